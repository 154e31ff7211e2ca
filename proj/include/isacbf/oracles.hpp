#pragma once

// Independent reference computations used to check the solver. Nothing here calls
// into the uplink or outer-solver code paths, except dualFiniteDifference, which
// differentiates the dual function numerically to check the analytic subgradient.

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"
#include "isacbf/solver.hpp"

#include <cstdint>
#include <random>

namespace isacbf::oracles {

struct SingleUserSolution {
    double power = 0.0;
    CVec v;
};

/// Single-user power minimization in closed form: v = sqrt(gamma sigma^2) h / ||h||^2.
inline SingleUserSolution analyticSingleUserPower(const CVec& h, double gamma, double noisePower)
{
    const double hh = h.squaredNorm();
    if (!(hh > 0.0)) throw Error(ErrorCode::ZeroChannel, "channel is zero");
    SingleUserSolution out;
    out.power = gamma * noisePower / hh;
    out.v = std::sqrt(gamma * noisePower) * h / hh;
    return out;
}

struct TinyInstance {
    IsacProblem problem;
    int searchBudget = 2000;
    std::uint64_t seed = 1;
};

struct BruteForceResult {
    double bcrb = 0.0;
    BeamformingMatrix V;
    std::uint64_t seed = 0;
    int feasibleDraws = 0;
};

namespace detail {

// Fisher information written out directly from its definition.
inline double directBcrb(const IsacProblem& p, const CMat& v)
{
    const int L = p.sensing.parameters;
    const double gain = 2.0 * p.symbols / p.link.noisePower;
    RMat j(L, L);
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b) {
            cdouble tr = 0.0;
            for (Eigen::Index k = 0; k < v.cols(); ++k)
                tr += v.col(k).dot(p.sensing.block(a, b) * v.col(k));
            j(a, b) = gain * tr.real() + p.sensing.prior(a, b);
        }
    j = 0.5 * (j + j.transpose());
    Eigen::LDLT<RMat> ldlt(j);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::numeric_limits<double>::infinity();
    return ldlt.solve(RMat::Identity(L, L)).trace();
}

inline bool sinrFeasible(const IsacProblem& p, const CMat& v)
{
    const CMat& h = p.link.channels;
    for (Eigen::Index k = 0; k < h.cols(); ++k) {
        double interference = p.link.noisePower;
        for (Eigen::Index i = 0; i < h.cols(); ++i)
            if (i != k) interference += std::norm(h.col(k).dot(v.col(i)));
        if (std::norm(h.col(k).dot(v.col(k))) < p.link.sinrTargets(k) * interference) return false;
    }
    return true;
}

} // namespace detail

/// Upper-bound oracle for tiny instances (N_T <= 3, K <= 2, L = 1).
///
/// Draws `searchBudget` complex Gaussian beamforming matrices scaled onto the power
/// sphere Tr(VV^H) = P, keeps the SINR-feasible ones, and refines the best few by
/// pattern search over the real and imaginary parts of every entry (each move is
/// projected back onto the sphere; infeasible moves are rejected). The returned
/// point is feasible, so its BCRB upper-bounds the optimum.
inline BruteForceResult bruteForceIsac(const TinyInstance& inst)
{
    const IsacProblem& p = inst.problem;
    const Eigen::Index nTx = p.link.antennas();
    const Eigen::Index K = p.link.users();
    if (nTx > 3 || K > 2 || p.sensing.parameters != 1)
        throw Error(ErrorCode::InvalidArgument, "tiny instances need N_T <= 3, K <= 2, L = 1");

    std::mt19937_64 rng(inst.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double P = p.powerBudget;
    auto project = [P](CMat v) {
        v *= std::sqrt(P / v.squaredNorm());
        return v;
    };

    struct Start {
        double value;
        CMat v;
    };
    std::vector<Start> starts;
    BruteForceResult out;
    out.seed = inst.seed;
    for (int s = 0; s < inst.searchBudget; ++s) {
        CMat v(nTx, K);
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cdouble(normal(rng), normal(rng));
        v = project(v);
        if (!detail::sinrFeasible(p, v)) continue;
        ++out.feasibleDraws;
        starts.push_back({detail::directBcrb(p, v), v});
    }
    if (starts.empty()) throw Error(ErrorCode::NoFeasiblePoint, "no SINR-feasible draw in the search budget");
    std::sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.value < b.value; });
    if (starts.size() > 8) starts.resize(8);

    out.bcrb = std::numeric_limits<double>::infinity();
    for (Start& start : starts) {
        CMat v = start.v;
        double value = start.value;
        double delta = 0.1 * std::sqrt(P);
        while (delta > 1e-10 * std::sqrt(P)) {
            bool improved = false;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                for (const cdouble dir : {cdouble(1, 0), cdouble(-1, 0), cdouble(0, 1), cdouble(0, -1)}) {
                    CMat trial = v;
                    trial(i) += delta * dir;
                    trial = project(trial);
                    if (!detail::sinrFeasible(p, trial)) continue;
                    const double tv = detail::directBcrb(p, trial);
                    if (tv < value) {
                        value = tv;
                        v = trial;
                        improved = true;
                    }
                }
            }
            if (!improved) delta *= 0.5;
        }
        if (value < out.bcrb) {
            out.bcrb = value;
            out.V = v;
        }
    }
    return out;
}

/// Central difference (g(x + h d) - g(x - h d)) / (2h) of the dual function along
/// the direction d = (dLambda, dBeta). Throws PerturbationInadmissible if either
/// perturbed pair is inadmissible.
inline double dualFiniteDifference(const IsacProblem& problem, double lambda, const RMat& beta, double dLambda,
                                   const RMat& dBeta, double h)
{
    if (dLambda == 0.0 && dBeta.isZero(0.0)) return 0.0;
    const auto plus = evaluateDual(problem, lambda + h * dLambda, beta + h * dBeta);
    const auto minus = evaluateDual(problem, lambda - h * dLambda, beta - h * dBeta);
    if (!plus || !minus) throw Error(ErrorCode::PerturbationInadmissible, "perturbed dual point is inadmissible");
    return (plus->value - minus->value) / (2.0 * h);
}

} // namespace isacbf::oracles
