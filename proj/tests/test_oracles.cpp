#include "isacbf/oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace isacbf;
using namespace isacbf::oracles;
using fixtures::relErr;

namespace {

oracles::TinyInstance tinyInstance(fixtures::Rng& rng, Eigen::Index nTx, Eigen::Index K, std::uint64_t seed)
{
    TinyInstance inst;
    inst.problem = fixtures::randomProblem(rng, nTx, K, 1, 3.0);
    inst.seed = seed;
    return inst;
}

} // namespace

TEST(AnalyticSingleUser, HandValues)
{
    CVec h = CVec::Zero(2);
    h(0) = 1.0;
    EXPECT_NEAR(analyticSingleUserPower(h, 1.0, 1.0).power, 1.0, 1e-15);
    h(0) = 2.0; // ||h||^2 = 4
    EXPECT_NEAR(analyticSingleUserPower(h, db2lin(10.0), 1.0).power, 2.5, 1e-14);
    EXPECT_NEAR(analyticSingleUserPower(h, 2.0 * 7.0, 0.3).power, 2.0 * analyticSingleUserPower(h, 7.0, 0.3).power,
                1e-15);
    const SingleUserSolution s = analyticSingleUserPower(h, 3.0, 0.5);
    EXPECT_NEAR(s.v.squaredNorm(), s.power, 1e-15);
    EXPECT_NEAR(std::norm(h.dot(s.v)) / 0.5, 3.0, 1e-13);
}

TEST(AnalyticSingleUser, ZeroChannel)
{
    try {
        analyticSingleUserPower(CVec::Zero(3), 1.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroChannel);
    }
}

TEST(AnalyticSingleUser, AgreesWithFeasibility)
{
    fixtures::Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const IsacProblem p = fixtures::randomProblem(rng, 1 + t % 6, 1, 1);
        const double analytic =
            analyticSingleUserPower(p.link.channels.col(0), p.link.sinrTargets(0), p.link.noisePower).power;
        EXPECT_LT(relErr(checkFeasibility(p).minPower, analytic), 1e-8);
    }
}

TEST(BruteForce, SolverNeverBeaten)
{
    fixtures::Rng rng(2);
    for (int t = 0; t < 6; ++t) {
        const TinyInstance inst = tinyInstance(rng, 2 + t % 2, 1 + t % 2, 100 + t);
        const BruteForceResult bf = bruteForceIsac(inst);
        const SolveReport r = solve(inst.problem);
        EXPECT_LE(r.bcrb, bf.bcrb * (1 + 0.01));
        EXPECT_GE(bf.bcrb, r.bcrb - 1e-9 * r.bcrb);
        EXPECT_GT(bf.feasibleDraws, 0);
        EXPECT_EQ(bf.seed, inst.seed);
    }
}

TEST(BruteForce, ScalarBeamformerIsDeterminedByPower)
{
    fixtures::Rng rng(3);
    const TinyInstance inst = tinyInstance(rng, 1, 1, 5);
    const double gain = 2.0 * inst.problem.symbols / inst.problem.link.noisePower;
    const double expected =
        1.0 / (gain * inst.problem.sensing.block(0, 0)(0, 0).real() * inst.problem.powerBudget + inst.problem.sensing.prior(0, 0));
    EXPECT_LT(relErr(bruteForceIsac(inst).bcrb, expected), 1e-9);
}

TEST(BruteForce, VanishingTargetsMatchPowerMax)
{
    fixtures::Rng rng(4);
    TinyInstance inst = tinyInstance(rng, 3, 1, 6);
    inst.problem.link.sinrTargets.setConstant(1e-9);
    const CMat v = std::sqrt(inst.problem.powerBudget) * dominantEigenvector(inst.problem.sensing.block(0, 0));
    EXPECT_LT(relErr(bruteForceIsac(inst).bcrb, bcrbOf(inst.problem, v)), 1e-2);
}

TEST(BruteForce, SeedsAgree)
{
    fixtures::Rng rng(5);
    TinyInstance inst = tinyInstance(rng, 2, 2, 1);
    const double a = bruteForceIsac(inst).bcrb;
    inst.seed = 99;
    const double b = bruteForceIsac(inst).bcrb;
    EXPECT_LT(relErr(a, b), 1e-2);
}

TEST(BruteForce, CapsAndFeasibility)
{
    fixtures::Rng rng(6);
    TinyInstance big = tinyInstance(rng, 4, 1, 1);
    EXPECT_THROW(bruteForceIsac(big), Error);

    TinyInstance hopeless = tinyInstance(rng, 2, 1, 1);
    hopeless.problem.link.sinrTargets.setConstant(1e6);
    hopeless.searchBudget = 50;
    try {
        bruteForceIsac(hopeless);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoFeasiblePoint);
    }
}

TEST(DualFiniteDifference, ZeroDirection)
{
    fixtures::Rng rng(7);
    const IsacProblem p = fixtures::randomProblem(rng, 3, 1, 1);
    EXPECT_EQ(dualFiniteDifference(p, 1.0, RMat::Ones(1, 1), 0.0, RMat::Zero(1, 1), 1e-5), 0.0);
}

TEST(DualFiniteDifference, MatchesSubgradient)
{
    fixtures::Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const IsacProblem p = fixtures::randomProblem(rng, 4, 1 + t % 3, 1 + t % 3);
        const Feasibility f = checkFeasibility(p);
        const DualState d = initialDual(p, f.commBeamformers);
        const auto eval = evaluateDual(p, d.lambda, d.beta);
        ASSERT_TRUE(eval);
        const Subgradient g = subgradient(p, d, eval->subproblem);
        const int L = p.sensing.parameters;
        const double dl = 0.1 * d.lambda * (t % 2 ? 1.0 : -1.0);
        const RMat db = 0.1 * d.beta.norm() * fixtures::randomReal(rng, L, L);
        const double predicted = g.lambda * dl + (g.beta.array() * db.array()).sum();
        const double fd = dualFiniteDifference(p, d.lambda, d.beta, dl, db, 1e-5);
        EXPECT_LT(std::abs(fd - predicted), 1e-3 * std::abs(predicted)) << t;
    }
}

TEST(DualFiniteDifference, BetaDirectionStationaryAtOptimum)
{
    fixtures::Rng rng(9);
    const IsacProblem p = fixtures::randomProblem(rng, 4, 2, 1);
    SolveOptions o;
    o.betaMode = BetaMode::ClosedForm;
    o.gapTolerance = 1e-6;
    const SolveReport r = solve(p, o);
    const DualState& d = r.finalDual;
    const RMat db = d.beta; // scale-matched direction
    const double fd = dualFiniteDifference(p, d.lambda, d.beta, 0.0, db, 1e-5);
    // a unit relative move of beta changes the objective by O(bcrb); at the optimum the slope vanishes
    EXPECT_LT(std::abs(fd), 1e-2 * r.bcrb);
}

TEST(DualFiniteDifference, InadmissiblePerturbation)
{
    fixtures::Rng rng(10);
    const IsacProblem p = fixtures::randomProblem(rng, 4, 1, 1);
    const Feasibility f = checkFeasibility(p);
    const DualState d = initialDual(p, f.commBeamformers);
    try {
        dualFiniteDifference(p, d.lambda, d.beta, -1e6 * d.lambda, RMat::Zero(1, 1), 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PerturbationInadmissible);
    }
}
