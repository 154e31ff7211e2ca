// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// Artifacts of the scenario runs are left under ./acceptance_artifacts.

#include "isacbf/io/artifacts.hpp"
#include "isacbf/oracles.hpp"
#include "../test_support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <sstream>

using namespace isacbf;
using namespace isacbf::io;
using isacbf::fixtures::relErr;
using isacbf::fixtures::Rng;

namespace {

const fs::path kScenarios = fs::path(ISACBF_SOURCE_DIR) / "scenarios";
const fs::path kArtifacts = "acceptance_artifacts";

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            if (pass) detail << "first failure: " << what << "; ";
            pass = false;
        }
    }
};

struct Criterion {
    int id;
    const char* name;
    double limitSeconds;
    std::function<void(Outcome&)> run;
};

// Random admissible (lambda, Q) pairs shared by criteria 3 and 4.
struct AdmissiblePair {
    CommLink link;
    double lambda;
    CMat q;
};

std::vector<AdmissiblePair> admissiblePairs(int count)
{
    Rng rng(20240603);
    std::uniform_int_distribution<int> nDist(2, 8);
    std::uniform_real_distribution<double> margin(0.0, 1.0);
    std::vector<AdmissiblePair> out;
    while (static_cast<int>(out.size()) < count) {
        const Eigen::Index n = nDist(rng);
        const Eigen::Index K = 1 + static_cast<Eigen::Index>(rng() % std::min<Eigen::Index>(n, 3));
        const IsacProblem p = isacbf::fixtures::randomProblem(rng, n, K, 1 + static_cast<int>(rng() % 3));
        const int L = p.sensing.parameters;
        const CMat q = qbeta(p, isacbf::fixtures::randomReal(rng, L, L));
        // lambda I - Q PSD, from the boundary lambda = rho(Q) upwards
        const double lambda = maxEigenvalue(q) * (1.0 + margin(rng)) + 1e-9;
        out.push_back({p.link, lambda, q});
    }
    return out;
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

// ---------------------------------------------------------------------------

void betaIdentity(Outcome& o)
{
    Rng rng(1);
    double worst = 0.0;
    int strict = 0, samples = 0;
    for (int t = 0; t < 100; ++t) {
        const int L = 1 + t % 4;
        const Eigen::Index n = 2 + t % 7;
        const SensingStatistics s = isacbf::fixtures::randomStatistics(rng, n, L);
        const CMat v = isacbf::fixtures::randomComplex(rng, n, 1 + t % 3);
        const int symbols = 1 + t % 5;
        const double noise = 0.1 + 0.01 * t;
        const RMat j = fisherInformation(s, v, symbols, noise);
        const RMat opt = betaOptimal(j);
        const double best = innerObjective(s, opt, v, symbols, noise);
        worst = std::max(worst, relErr(best, bcrb(j)));
        for (double scale : {1e-4, 1e-2, 1.0}) {
            for (int r = 0; r < 3; ++r) {
                const RMat beta = opt + scale * opt.norm() * isacbf::fixtures::randomReal(rng, L, L);
                ++samples;
                if (innerObjective(s, beta, v, symbols, noise) < best) ++strict;
            }
        }
    }
    o.check(worst <= 1e-9, "max relative error " + fmt(worst));
    o.check(strict == samples, std::to_string(samples - strict) + " sampled beta not strictly smaller");
    o.detail << "max rel err " << fmt(worst) << ", " << strict << "/" << samples << " perturbed beta strictly smaller";
}

void traceIdentity(Outcome& o)
{
    Rng rng(2);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int L = 1 + t % 4;
        const Eigen::Index n = 2 + t % 7;
        const SensingStatistics s = isacbf::fixtures::randomStatistics(rng, n, L);
        const CMat v = isacbf::fixtures::randomComplex(rng, n, 1 + t % 3);
        const RMat beta = isacbf::fixtures::randomReal(rng, L, L);
        const double lhs = (v.adjoint() * qbeta(s, beta, 2, 0.3) * v).trace().real();
        const RMat jc = fisherInformation(s, v, 2, 0.3) - s.prior;
        double rhs = 0.0;
        for (int l = 0; l < L; ++l) rhs += beta.col(l).dot(jc * beta.col(l));
        worst = std::max(worst, relErr(lhs, rhs));
    }
    o.check(worst <= 1e-9, "max relative error " + fmt(worst));
    o.detail << "100 draws, max rel err " << fmt(worst);
}

void ulDlDuality(Outcome& o)
{
    double sinrErr = 0.0, objErr = 0.0;
    int converged = 0;
    for (const AdmissiblePair& p : admissiblePairs(50)) {
        const SubproblemResult r = solveSubproblem(p.link, p.lambda, p.q);
        if (r.status != SubproblemStatus::Converged) continue;
        ++converged;
        const RVec dl = downlinkSinr(p.link.channels, r.V, p.link.noisePower);
        for (Eigen::Index k = 0; k < dl.size(); ++k) sinrErr = std::max(sinrErr, relErr(dl(k), p.link.sinrTargets(k)));
        const CMat a = effectiveNoiseMatrix(p.lambda, p.q).A;
        const double lhs = (r.V.adjoint() * a * r.V).trace().real();
        objErr = std::max(objErr, relErr(lhs, p.link.noisePower * r.z.sum()));
    }
    o.check(converged == 50, std::to_string(50 - converged) + " admissible pairs did not converge");
    o.check(sinrErr <= 1e-6, "SINR equality error " + fmt(sinrErr));
    o.check(objErr <= 1e-6, "objective mismatch " + fmt(objErr));
    o.detail << converged << "/50 converged, SINR rel err " << fmt(sinrErr) << ", objective rel err " << fmt(objErr);
}

void monotoneUplink(Outcome& o)
{
    UplinkOptions opts;
    opts.recordHistory = true;
    int violations = 0, converged = 0;
    double worstResidual = 0.0, worstSpread = 0.0;
    for (const AdmissiblePair& p : admissiblePairs(50)) {
        const RVec z0 = dominatingInitializer(p.link, p.lambda, p.q);
        const UplinkSolution a = solveUplink(p.link, p.lambda, p.q, z0, opts);
        const UplinkSolution b = solveUplink(p.link, p.lambda, p.q, 1e3 * z0, opts);
        if (a.status != SubproblemStatus::Converged || b.status != SubproblemStatus::Converged) continue;
        ++converged;
        for (const UplinkSolution* s : {&a, &b}) {
            for (std::size_t n = 2; n < s->history.size(); ++n)
                if (!(s->history[n].array() <= s->history[n - 1].array() * (1.0 + 1e-13)).all()) ++violations;
            worstResidual = std::max(worstResidual, s->residual);
        }
        worstSpread = std::max(worstSpread, (a.state.z - b.state.z).cwiseAbs().maxCoeff() / a.state.z.maxCoeff());
    }
    o.check(converged == 50, std::to_string(50 - converged) + " instances did not converge");
    o.check(violations == 0, std::to_string(violations) + " monotonicity violations");
    o.check(worstResidual < 1e-10, "residual " + fmt(worstResidual));
    o.check(worstSpread <= 1e-8, "initializer spread " + fmt(worstSpread));
    o.detail << converged << "/50 converged, " << violations << " increases, residual " << fmt(worstResidual)
             << ", z* spread (1e3x start) " << fmt(worstSpread) << " rel";
}

void analyticSingleUser(Outcome& o)
{
    Rng rng(5);
    double worst = 0.0;
    std::uniform_real_distribution<double> gammaDb(-5.0, 20.0), noise(0.01, 2.0);
    for (int t = 0; t < 100; ++t) {
        IsacProblem p;
        p.link.channels = isacbf::fixtures::randomComplex(rng, 1 + t % 8, 1);
        p.link.sinrTargets = RVec::Constant(1, db2lin(gammaDb(rng)));
        p.link.noisePower = noise(rng);
        const double expected = p.link.sinrTargets(0) * p.link.noisePower / p.link.channels.squaredNorm();
        worst = std::max(worst, relErr(checkFeasibility(p).minPower, expected));
    }
    o.check(worst <= 1e-8, "max relative error " + fmt(worst));
    o.detail << "100 channels, max rel err " << fmt(worst);
}

void tinyInstances(Outcome& o)
{
    Rng rng(6);
    double worstRatio = 0.0;
    for (int t = 0; t < 20; ++t) {
        oracles::TinyInstance inst;
        inst.problem = isacbf::fixtures::randomProblem(rng, 2, 1, 1, 3.0);
        if (t % 2) { // half of them with the AoA model
            AoAModel m;
            m.nTx = 2;
            m.nRx = 2;
            m.priorMeanDeg = -30.0 + 6.0 * t;
            m.priorStdDeg = 1.0 + t;
            m.quadratureOrder = 64;
            inst.problem.sensing = computeStatistics(m);
        }
        inst.seed = 1000 + static_cast<std::uint64_t>(t);
        const oracles::BruteForceResult bf = oracles::bruteForceIsac(inst);
        const SolveReport r = solve(inst.problem);
        const double ratio = r.bcrb / bf.bcrb;
        worstRatio = std::max(worstRatio, ratio);
        o.check(r.bcrb <= bf.bcrb * 1.01, "instance " + std::to_string(t) + " ratio " + fmt(ratio));
    }
    o.detail << "20 instances, max solver/oracle BCRB ratio " << std::setprecision(9) << worstRatio;
}

const char* kTwoUserScenarios[] = {"fig2_sigma2p5", "fig2_sigma10"};

void endToEndGap(Outcome& o)
{
    for (const char* name : kTwoUserScenarios) {
        const auto t0 = std::chrono::steady_clock::now();
        const ScenarioConfig cfg = loadScenario(kScenarios / (std::string(name) + ".json"));
        const RunOutcome run = runSolve(cfg, kArtifacts / name);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.check(run.exitCode == ExitSuccess, std::string(name) + " exit " + std::to_string(run.exitCode));
        if (run.exitCode != ExitSuccess) continue;
        const double gap = run.result.at("relativeGap").get<double>();
        const double power = run.result.at("totalPower").get<double>();
        const auto sinr = run.result.at("sinrDb").get<std::vector<double>>();
        double sinrErr = 0.0;
        for (std::size_t k = 0; k < sinr.size(); ++k) sinrErr = std::max(sinrErr, std::abs(sinr[k] - cfg.sinrTargetsDb[k]));
        o.check(gap <= 1e-3, std::string(name) + " gap " + fmt(gap));
        o.check(relErr(power, cfg.powerBudget) <= 1e-4, std::string(name) + " power " + fmt(power));
        o.check(sinrErr <= 1e-3, std::string(name) + " SINR error " + fmt(sinrErr) + " dB");
        o.check(secs < 60.0, std::string(name) + " took " + fmt(secs) + " s");
        o.detail << name << ": bcrb " << fmt(run.bcrb) << " gap " << fmt(gap) << " power " << std::setprecision(10)
                 << power << " sinr err " << fmt(sinrErr) << " dB, " << fmt(secs) << " s; ";
    }
}

void figureStructure(Outcome& o)
{
    const double floorDb = -15.0; // lobes must stand out from the sidelobe floor
    auto pattern = [&](const char* name, const std::string& dir, bool commOnly) {
        RunOptions opts;
        opts.commOnly = commOnly;
        const RunOutcome run = runSolve(loadScenario(kScenarios / (std::string(name) + ".json")), kArtifacts / dir, opts);
        o.check(run.exitCode == ExitSuccess, dir + " failed");
        return readBeamPatternCsv(kArtifacts / dir / "beampattern.csv");
    };
    const BeamPattern narrow = pattern("fig2_sigma2p5", "fig2_sigma2p5", false);
    const BeamPattern wide = pattern("fig2_sigma10", "fig2_sigma10", false);
    const BeamPattern comm = pattern("fig2_sigma2p5", "fig2_comm_only", true);

    for (double a : {-30.0, 0.0, 50.0})
        o.check(hasLobeNear(narrow, a, 2.0, floorDb), "sigma 2.5: no local maximum within 2 deg of " + fmt(a));
    const auto wNarrow = lobeWidth3dB(narrow, 0.0, 2.0);
    const auto wWide = lobeWidth3dB(wide, 0.0, 2.0);
    o.check(wNarrow && wWide, "sensing lobe width not measurable");
    if (wNarrow && wWide) o.check(*wWide > *wNarrow, "sigma 10 lobe not wider");
    for (double a : {-30.0, 50.0})
        o.check(hasLobeNear(comm, a, 2.0, floorDb), "comm-only: no maximum near " + fmt(a));
    const bool commSensingLobe = hasLobeNear(comm, 0.0, 2.0, floorDb);
    o.check(!commSensingLobe, "comm-only pattern has a lobe at 0 deg");
    o.detail << "3 dB width at 0 deg: sigma 2.5 -> " << (wNarrow ? fmt(*wNarrow) : "n/a") << " deg, sigma 10 -> "
             << (wWide ? fmt(*wWide) : "n/a") << " deg; comm-only lobe at 0 deg: " << (commSensingLobe ? "yes" : "no");
}

void monotoneSweeps(Outcome& o)
{
    const ScenarioConfig cfg = loadScenario(kScenarios / "small_n8.json");
    auto sweep = [&](SweepAxis axis, const std::vector<double>& values, int direction) {
        const auto rows = runSweep(cfg, axis, values, kArtifacts / (std::string("sweep_") + to_string(axis)), 4);
        double worst = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            o.check(rows[i].outcome.exitCode == ExitSuccess,
                    std::string(to_string(axis)) + " point " + std::to_string(i) + " failed");
            if (i == 0) continue;
            const double prev = rows[i - 1].outcome.bcrb, cur = rows[i].outcome.bcrb;
            worst = std::max(worst, direction * (cur - prev) / prev); // positive = violation
        }
        o.check(worst <= 1e-6, std::string(to_string(axis)) + " violation " + fmt(worst));
        o.detail << to_string(axis) << " worst step " << fmt(worst) << "; ";
    };
    sweep(SweepAxis::Power, {0.5, 1.0, 2.0, 4.0, 8.0}, +1);
    sweep(SweepAxis::SinrDb, {0.0, 3.0, 6.0, 9.0, 12.0}, -1);
}

void betaModes(Outcome& o)
{
    for (const char* name : kTwoUserScenarios) {
        const IsacProblem p = buildProblem(loadScenario(kScenarios / (std::string(name) + ".json")));
        SolveOptions sub, closed;
        closed.betaMode = BetaMode::ClosedForm;
        const SolveReport a = solve(p, sub);
        const SolveReport b = solve(p, closed);
        const double diff = relErr(a.bcrb, b.bcrb);
        o.check(a.status == SolveStatus::Converged && b.status == SolveStatus::Converged, std::string(name) + " not converged");
        o.check(diff <= 5e-3, std::string(name) + " differ by " + fmt(diff));
        o.detail << name << ": subgradient " << fmt(a.bcrb) << " (" << a.iterations << " it), closed-form "
                 << fmt(b.bcrb) << " (" << b.iterations << " it), rel diff " << fmt(diff) << "; ";
    }
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {1, "beta identity", 5.0, betaIdentity},
        {2, "Q_beta trace identity", 5.0, traceIdentity},
        {3, "UL-DL duality", 30.0, ulDlDuality},
        {4, "uplink monotonicity", 1e9, monotoneUplink},
        {5, "analytic K=1 power", 1.0, analyticSingleUser},
        {6, "tiny-instance optimality", 120.0, tinyInstances},
        {7, "end-to-end duality gap", 1e9, endToEndGap}, // per-run limit checked inside
        {8, "beam pattern structure", 120.0, figureStructure},
        {9, "monotone sweeps", 300.0, monotoneSweeps},
        {10, "beta-mode agreement", 1e9, betaModes},
    };
    fs::create_directories(kArtifacts);
    int failed = 0;
    for (const Criterion& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.limitSeconds) o.check(false, "runtime " + fmt(secs) + " s over limit " + fmt(c.limitSeconds) + " s");
        if (!o.pass) ++failed;
        std::printf("[%s] criterion %2d  %-26s %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
