#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"
#include "isacbf/sensing_model.hpp"

namespace isacbf {

/// Downlink beamformers, N_T x K, column k is v_k.
using BeamformingMatrix = CMat;
/// Auxiliary saddle variable, L x L, column l is beta_l.
using BetaMatrix = RMat;

inline double totalPower(const BeamformingMatrix& v) { return v.squaredNorm(); }

/// 2T / sigma^2, the factor in front of the data term of the Bayesian FIM.
inline double fisherGain(int symbols, double noisePower)
{
    detail::require(symbols >= 1, ErrorCode::InvalidArgument, "symbol count must be >= 1");
    detail::require(noisePower > 0.0, ErrorCode::InvalidArgument, "noise power must be > 0");
    return 2.0 * static_cast<double>(symbols) / noisePower;
}

namespace detail {

// Tr(T V V^H) = sum_k v_k^H T v_k
inline cdouble traceQuadratic(const CMat& t, const BeamformingMatrix& v)
{
    return (v.adjoint() * t * v).trace();
}

inline void checkBeamformers(const SensingStatistics& stats, const BeamformingMatrix& v)
{
    require(stats.parameters >= 1 && stats.blocks.size() == static_cast<std::size_t>(stats.parameters * stats.parameters),
            ErrorCode::DimensionMismatch, "malformed sensing statistics");
    require(v.rows() == stats.antennas(), ErrorCode::DimensionMismatch, "beamformer rows must equal N_T");
}

inline void checkBeta(const SensingStatistics& stats, const BetaMatrix& beta)
{
    require(beta.rows() == stats.parameters && beta.cols() == stats.parameters, ErrorCode::DimensionMismatch,
            "beta must be L x L");
}

} // namespace detail

/// Bayesian FIM: [J]_ij = (2T/sigma^2) Re Tr(T_ij V V^H) + C_ij.
///
/// Diagonal traces are real in exact arithmetic; a residual imaginary part above
/// 1e-10 relative indicates malformed statistics and is reported, not dropped.
inline RMat fisherInformation(const SensingStatistics& stats, const BeamformingMatrix& v, int symbols, double noisePower)
{
    detail::checkBeamformers(stats, v);
    const double gain = fisherGain(symbols, noisePower);
    const int L = stats.parameters;
    RMat j(L, L);
    for (int a = 0; a < L; ++a) {
        for (int b = 0; b < L; ++b) {
            const cdouble tr = detail::traceQuadratic(stats.block(a, b), v);
            if (a == b && std::abs(tr.imag()) > 1e-10 * std::max(std::abs(tr), 1e-300))
                throw Error(ErrorCode::InvalidStatistics, "diagonal FIM trace has an imaginary residue");
            j(a, b) = gain * tr.real() + stats.prior(a, b);
        }
    }
    return symmetricPart(j);
}

namespace detail {

inline void checkPositiveDefinite(const RMat& j)
{
    require(j.rows() == j.cols() && j.rows() >= 1, ErrorCode::DimensionMismatch, "FIM must be square");
    const RVec ev = symmetricEigenvalues(j);
    const double largest = ev(ev.size() - 1);
    if (!(largest > 0.0) || ev(0) <= 1e-12 * largest)
        throw Error(ErrorCode::SingularFim, "FIM is singular or indefinite (condition guard 1e12)");
}

} // namespace detail

/// Tr(J^-1) through a Cholesky solve.
inline double bcrb(const RMat& j)
{
    detail::checkPositiveDefinite(j);
    Eigen::LLT<RMat> llt(symmetricPart(j));
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularFim, "Cholesky factorization failed");
    return llt.solve(RMat::Identity(j.rows(), j.cols())).trace();
}

/// Maximizer of sum_l (2 beta_l^T e_l - beta_l^T J beta_l): beta = J^-1.
inline BetaMatrix betaOptimal(const RMat& j)
{
    detail::checkPositiveDefinite(j);
    Eigen::LLT<RMat> llt(symmetricPart(j));
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularFim, "Cholesky factorization failed");
    return symmetricPart(llt.solve(RMat::Identity(j.rows(), j.cols())));
}

/// Q_beta = (2T/sigma^2) sum_l sum_ij [beta_l]_i [beta_l]_j T_ij  (Hermitian PSD).
inline CMat qbeta(const SensingStatistics& stats, const BetaMatrix& beta, int symbols, double noisePower)
{
    detail::checkBeta(stats, beta);
    const double gain = fisherGain(symbols, noisePower);
    const int L = stats.parameters;
    // sum_l beta_l beta_l^T collects the weights of every T_ij
    const RMat weights = beta * beta.transpose();
    CMat q = CMat::Zero(stats.antennas(), stats.antennas());
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b)
            if (weights(a, b) != 0.0) q += weights(a, b) * stats.block(a, b);
    return gain * hermitianPart(q);
}

/// sum_l (2 [beta_l]_l - beta_l^T J_V beta_l).
inline double innerObjective(const SensingStatistics& stats, const BetaMatrix& beta, const BeamformingMatrix& v,
                             int symbols, double noisePower)
{
    detail::checkBeta(stats, beta);
    const RMat j = fisherInformation(stats, v, symbols, noisePower);
    return 2.0 * beta.trace() - (beta.transpose() * j * beta).trace();
}

/// The same value written as (sum_l 2 beta_l^T e_l - beta_l^T C beta_l) - Tr(Q_beta V V^H).
inline double innerObjectiveSplit(const SensingStatistics& stats, const BetaMatrix& beta, const BeamformingMatrix& v,
                                  int symbols, double noisePower)
{
    detail::checkBeamformers(stats, v);
    const CMat q = qbeta(stats, beta, symbols, noisePower);
    return 2.0 * beta.trace() - (beta.transpose() * stats.prior * beta).trace() -
           detail::traceQuadratic(q, v).real();
}

} // namespace isacbf
