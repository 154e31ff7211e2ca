#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/fim.hpp"
#include "isacbf/link.hpp"
#include "isacbf/linalg.hpp"
#include "isacbf/sensing_model.hpp"
#include "isacbf/uplink.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace isacbf {

/// Complete problem instance: users, sensing statistics, power budget and the
/// coherence length T entering the FIM gain 2T/sigma^2.
struct IsacProblem {
    CommLink link;
    SensingStatistics sensing;
    double powerBudget = 1.0;
    int symbols = 1;
};

inline void validateProblem(const IsacProblem& problem)
{
    validateLink(problem.link);
    validateStatistics(problem.sensing);
    detail::require(problem.sensing.antennas() == problem.link.antennas(), ErrorCode::DimensionMismatch,
                    "sensing statistics and channels disagree on N_T");
    detail::require(problem.powerBudget > 0.0, ErrorCode::InvalidArgument, "power budget must be > 0");
    detail::require(problem.symbols >= 1, ErrorCode::InvalidArgument, "symbol count must be >= 1");
}

inline RMat fisherInformation(const IsacProblem& problem, const BeamformingMatrix& v)
{
    return fisherInformation(problem.sensing, v, problem.symbols, problem.link.noisePower);
}

inline CMat qbeta(const IsacProblem& problem, const BetaMatrix& beta)
{
    return qbeta(problem.sensing, beta, problem.symbols, problem.link.noisePower);
}

/// Tr(J_V^-1) of a given beamforming matrix.
inline double bcrbOf(const IsacProblem& problem, const BeamformingMatrix& v)
{
    return bcrb(fisherInformation(problem, v));
}

// ---------------------------------------------------------------------------

struct Feasibility {
    bool feasible = false;
    double minPower = std::numeric_limits<double>::infinity();
    /// Minimum-power beamformers meeting every SINR target with equality.
    BeamformingMatrix commBeamformers;
    SubproblemStatus status = SubproblemStatus::IterationLimit;
};

/// Classical power minimization under the SINR targets, solved as the uplink
/// subproblem with lambda = 1 and Q = 0.
inline Feasibility checkFeasibility(const IsacProblem& problem, const UplinkOptions& options = {})
{
    validateLink(problem.link);
    const CMat zero = CMat::Zero(problem.link.antennas(), problem.link.antennas());
    const SubproblemResult sub = solveSubproblem(problem.link, 1.0, zero, options);
    Feasibility out;
    out.status = sub.status;
    if (sub.status != SubproblemStatus::Converged) return out;
    out.commBeamformers = sub.V;
    out.minPower = totalPower(sub.V);
    out.feasible = out.minPower <= problem.powerBudget;
    return out;
}

/// Communication-only design: the minimum-power beamformers scaled up to the full budget.
inline BeamformingMatrix commOnlyBeamformers(const IsacProblem& problem)
{
    const Feasibility f = checkFeasibility(problem);
    if (!f.feasible) throw Error(ErrorCode::Infeasible, "SINR targets cannot be met within the power budget");
    return f.commBeamformers * std::sqrt(problem.powerBudget / f.minPower);
}

// ---------------------------------------------------------------------------

struct DualState {
    double lambda = 0.0;
    BetaMatrix beta;
    bool admissible = false;
    double dualValue = -std::numeric_limits<double>::infinity();
};

/// L(lambda, beta, V) = sum_k v_k^H (lambda I - Q_beta) v_k - lambda P + sum_l (2 beta_l^T e_l - beta_l^T C beta_l).
inline double lagrangianValue(const IsacProblem& problem, double lambda, const BetaMatrix& beta,
                              const BeamformingMatrix& v)
{
    const CMat a = effectiveNoiseMatrix(lambda, qbeta(problem, beta)).A;
    return (v.adjoint() * a * v).trace().real() - lambda * problem.powerBudget + 2.0 * beta.trace() -
           (beta.transpose() * problem.sensing.prior * beta).trace();
}

struct DualEvaluation {
    double value = 0.0;
    SubproblemResult subproblem;
};

/// Dual function g(lambda, beta): the Lagrangian at the SINR-constrained minimizer.
/// Empty when the pair is inadmissible (the inner problem is unbounded below).
inline std::optional<DualEvaluation> evaluateDual(const IsacProblem& problem, double lambda, const BetaMatrix& beta,
                                                  const UplinkOptions& options = {})
{
    DualEvaluation out;
    out.subproblem = solveSubproblem(problem.link, lambda, qbeta(problem, beta), options);
    if (out.subproblem.status != SubproblemStatus::Converged) return std::nullopt;
    out.value = lagrangianValue(problem, lambda, beta, out.subproblem.V);
    return out;
}

/// Starting multipliers: V0 = comm beamformers at full power, beta0 = J_{V0}^-1 and
/// lambda0 = 1.01 rho(Q_beta0), which makes lambda0 I - Q_beta0 PSD.
inline DualState initialDual(const IsacProblem& problem, const BeamformingMatrix& commBeamformers)
{
    const double power = totalPower(commBeamformers);
    detail::require(power > 0.0, ErrorCode::InvalidArgument, "communication beamformers are zero");
    const BeamformingMatrix v0 = commBeamformers * std::sqrt(problem.powerBudget / power);

    DualState dual;
    dual.beta = betaOptimal(fisherInformation(problem, v0));
    dual.lambda = 1.01 * std::max(maxEigenvalue(qbeta(problem, dual.beta)), 0.0);
    if (const auto eval = evaluateDual(problem, dual.lambda, dual.beta)) {
        dual.admissible = true;
        dual.dualValue = eval->value;
    }
    return dual;
}

struct Subgradient {
    double lambda = 0.0;
    RMat beta;
};

/// dL/dlambda = Tr(V V^H) - P and dL/dbeta_l = 2 (e_l - J_V beta_l) at the inner minimizer.
inline Subgradient subgradient(const IsacProblem& problem, const DualState& dual, const SubproblemResult& result)
{
    detail::require(result.status == SubproblemStatus::Converged, ErrorCode::InvalidArgument,
                    "subgradient needs a converged subproblem");
    const RMat j = fisherInformation(problem, result.V);
    const Eigen::Index L = j.rows();
    Subgradient g;
    g.lambda = totalPower(result.V) - problem.powerBudget;
    g.beta = 2.0 * (RMat::Identity(L, L) - j * dual.beta);
    return g;
}

// ---------------------------------------------------------------------------

enum class BetaMode { Subgradient, ClosedForm };

inline const char* to_string(BetaMode m) { return m == BetaMode::ClosedForm ? "closed-form" : "subgradient"; }

struct SolveOptions {
    /// Stop once (best primal - best dual) / best primal falls below this ...
    double gapTolerance = 1e-3;
    /// ... and the best primal point needed at most this relative power rescaling.
    double powerTolerance = 1e-6;
    /// Once the gap is certified, iteration continues to polish the point until it needs
    /// no rescaling or the gap falls below this. An optimum with SINR slack is always a
    /// rescaled point.
    double exactGapTolerance = 1e-6;
    int maxIterations = 500;
    int maxHalvings = 30;
    BetaMode betaMode = BetaMode::Subgradient;
    /// Initial and maximal normalized lambda step.
    double lambdaStep = 0.1;
    double maxLambdaStep = 1.0;
    /// Scale a of the a/sqrt(n) preconditioned beta step (capped at 1).
    double betaStep = 0.3;
    UplinkOptions uplink;
};

struct TraceRecord {
    int iteration = 0;
    double lambda = 0.0;
    double betaNorm = 0.0;
    double dual = 0.0;
    /// Best primal BCRB so far.
    double primal = 0.0;
    double gap = 0.0;
    /// Normalized lambda step actually taken after this iteration (0 on the last record).
    double step = 0.0;
    int retries = 0;
};

enum class SolveStatus { Converged, IterationLimit, Stalled };

inline const char* to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::Stalled: return "stalled";
    }
    return "unknown";
}

struct SolveReport {
    SolveStatus status = SolveStatus::IterationLimit;
    BeamformingMatrix V;
    double bcrb = 0.0;
    double dualValue = 0.0;
    double gap = 0.0;
    double relativeGap = 0.0;
    int iterations = 0;
    int weakDualityViolations = 0;
    double minCommPower = 0.0;
    DualState finalDual;
    std::vector<TraceRecord> trace;
};

/// Maximizes the partial dual over (lambda, beta) and returns the best primal point.
///
/// Each iteration solves the fixed-(lambda, beta) subproblem through the uplink,
/// evaluates the dual value and the BCRB of the recovered beamformers (rescaled to
/// the budget when they use less than P; a point above P is not primal feasible),
/// then steps:
///  - lambda += eta rho(Q_beta) clamp(g_lambda / P, -1, 1), where eta grows by 1.5
///    while g_lambda keeps its sign and halves when it flips;
///  - beta += s (J^-1 - beta), the subgradient 2 (e - J beta) preconditioned by
///    J^-1 / 2, with s = min(1, a / sqrt(n)); closed-form mode starts at s = 1 and
///    halves s whenever the dual value drops. J is taken at V rescaled to the budget;
///  - lambda is rescaled by rho(Q_beta_new) / rho(Q_beta_old) so that the ratio
///    lambda / rho(Q_beta), which decides admissibility, follows the beta move.
/// An inadmissible tentative pair halves the whole step, up to maxHalvings times, then
/// a beta-only step is tried once before giving up.
inline SolveReport solve(const IsacProblem& problem, const SolveOptions& options = {})
{
    constexpr double kRhoMargin = 1e-6;
    validateProblem(problem);
    const double P = problem.powerBudget;

    const Feasibility feas = checkFeasibility(problem, options.uplink);
    if (!feas.feasible)
        throw Error(ErrorCode::Infeasible, "SINR targets cannot be met within the power budget (min power " +
                                               std::to_string(feas.minPower) + ")");

    SolveReport report;
    report.minCommPower = feas.minPower;
    const BeamformingMatrix v0 = feas.commBeamformers * std::sqrt(P / feas.minPower);
    double bestPrimal = bcrbOf(problem, v0);
    double bestScaleError = std::abs(1.0 - feas.minPower / P);
    report.V = v0;

    DualState dual = initialDual(problem, feas.commBeamformers);
    CMat q = qbeta(problem, dual.beta);
    double rho = std::max(maxEigenvalue(q), 0.0);

    if (rho == 0.0) {
        // Sensing statistics carry no information: J = C for every V.
        report.status = SolveStatus::Converged;
        report.bcrb = bestPrimal;
        report.dualValue = bestPrimal;
        report.finalDual = dual;
        return report;
    }

    SubproblemResult current = solveSubproblem(problem.link, dual.lambda, q, options.uplink);
    if (current.status != SubproblemStatus::Converged) {
        report.status = SolveStatus::Stalled;
        report.bcrb = bestPrimal;
        report.finalDual = dual;
        return report;
    }

    double bestDual = -std::numeric_limits<double>::infinity();
    double eta = options.lambdaStep;
    int previousSign = 0;
    double omega = 1.0;
    double previousDual = -std::numeric_limits<double>::infinity();
    report.status = SolveStatus::IterationLimit;

    for (int n = 1; n <= options.maxIterations; ++n) {
        const BeamformingMatrix& v = current.V;
        const RMat j = fisherInformation(problem, v);
        const double power = totalPower(v);

        dual.admissible = true;
        dual.dualValue = lagrangianValue(problem, dual.lambda, dual.beta, v);
        bestDual = std::max(bestDual, dual.dualValue);

        if (power <= P * (1.0 + 1e-10)) {
            const BeamformingMatrix scaled = v * std::sqrt(P / power);
            const double candidate = bcrbOf(problem, scaled);
            if (candidate < bestPrimal) {
                bestPrimal = candidate;
                bestScaleError = std::abs(1.0 - power / P);
                report.V = scaled;
            }
        }
        if (dual.dualValue > bestPrimal * (1.0 + 1e-8)) ++report.weakDualityViolations;

        const double relGap = (bestPrimal - bestDual) / bestPrimal;
        TraceRecord rec;
        rec.iteration = n;
        rec.lambda = dual.lambda;
        rec.betaNorm = dual.beta.norm();
        rec.dual = dual.dualValue;
        rec.primal = bestPrimal;
        rec.gap = relGap;
        report.iterations = n;

        const bool certified = relGap <= options.gapTolerance;
        if (certified && (bestScaleError <= options.powerTolerance || relGap <= options.exactGapTolerance)) {
            report.trace.push_back(rec);
            report.status = SolveStatus::Converged;
            break;
        }
        if (n == options.maxIterations) {
            report.trace.push_back(rec);
            if (certified) report.status = SolveStatus::Converged;
            break;
        }

        const double gLambda = std::clamp((power - P) / P, -1.0, 1.0);
        const int sign = (gLambda > 0.0) - (gLambda < 0.0);
        if (sign != 0 && sign == previousSign)
            eta = std::min(eta * 1.5, options.maxLambdaStep);
        else if (sign != 0 && previousSign != 0)
            eta *= 0.5;
        if (sign != 0) previousSign = sign;

        // On the admissibility boundary the inner minimizer is not unique and the uplink
        // returns the least-power one; its J underestimates the information at the budget.
        const BetaMatrix betaTarget =
            power < P ? betaOptimal(fisherInformation(problem, BeamformingMatrix(v * std::sqrt(P / power)))) : betaOptimal(j);
        // The full closed-form jump can cycle between two beta values; damp it whenever the dual drops.
        if (options.betaMode == BetaMode::ClosedForm && n > 1)
            omega = dual.dualValue < previousDual ? 0.5 * omega : std::min(1.0, 1.5 * omega);
        previousDual = dual.dualValue;
        const double betaRate = options.betaMode == BetaMode::ClosedForm
                                    ? omega
                                    : std::min(1.0, options.betaStep / std::sqrt(static_cast<double>(n)));

        double t = 1.0;
        bool accepted = false;
        bool betaOnlyAccepted = false;
        // The last attempt drops the lambda move and keeps only the tracked beta step. It
        // rescues iterates pinned at lambda ~ rho(Q) while g_lambda < 0.
        for (int h = 0; h <= options.maxHalvings + 1; ++h) {
            const bool betaOnly = h > options.maxHalvings;
            const double tb = betaOnly ? 1.0 : t;
            const BetaMatrix betaNext = dual.beta + tb * betaRate * (betaTarget - dual.beta);
            const CMat qNext = qbeta(problem, betaNext);
            const double rhoNext = std::max(maxEigenvalue(qNext), 0.0);
            double lambdaNext = betaOnly ? dual.lambda : dual.lambda + t * eta * rho * gLambda;
            lambdaNext = std::max(lambdaNext * (rhoNext / rho), 0.0);
            // Creeping towards rho(Q) from above ends in a numerically singular A; stop short of it.
            if (dual.lambda >= rho && lambdaNext >= rhoNext && lambdaNext < (1.0 + kRhoMargin) * rhoNext)
                lambdaNext = (1.0 + kRhoMargin) * rhoNext;

            SubproblemResult trial = solveSubproblem(problem.link, lambdaNext, qNext, options.uplink);
            if (trial.status == SubproblemStatus::Converged && rhoNext > 0.0) {
                dual.lambda = lambdaNext;
                dual.beta = betaNext;
                q = qNext;
                rho = rhoNext;
                current = std::move(trial);
                accepted = true;
                betaOnlyAccepted = betaOnly;
                break;
            }
            t *= 0.5;
            ++rec.retries;
        }
        rec.step = betaOnlyAccepted ? 0.0 : t * eta;
        report.trace.push_back(rec);
        if (!accepted) {
            report.status = SolveStatus::Stalled;
            break;
        }
        if (!betaOnlyAccepted) eta *= t;
    }

    report.bcrb = bestPrimal;
    report.dualValue = bestDual;
    report.gap = bestPrimal - bestDual;
    report.relativeGap = report.gap / bestPrimal;
    report.finalDual = dual;
    return report;
}

} // namespace isacbf
