#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"
#include "isacbf/quadrature.hpp"

#include <span>
#include <string>
#include <vector>

namespace isacbf {

/// Expectation statistics of the sensing channel derivatives.
///
/// block(i, j) = E{dG_i^H dG_j} where dG_i is the derivative of the N_R x N_T
/// round-trip channel with respect to parameter i; `prior` is the prior
/// information matrix C, [C]_ij = -E{d^2 log f(eta) / d eta_i d eta_j}.
/// Any channel model plugs in by producing one of these.
struct SensingStatistics {
    int parameters = 0;
    std::vector<CMat> blocks; // row-major, parameters x parameters
    RMat prior;

    const CMat& block(int i, int j) const { return blocks[static_cast<std::size_t>(i * parameters + j)]; }
    CMat& block(int i, int j) { return blocks[static_cast<std::size_t>(i * parameters + j)]; }
    Eigen::Index antennas() const { return blocks.empty() ? 0 : blocks.front().rows(); }
};

/// One weighted draw of the parameter: weight and the L derivative matrices dG_i.
struct DerivativeSample {
    double weight = 1.0;
    std::vector<CMat> derivatives;
};

/// T_ij = sum_s w_s dG_i(s)^H dG_j(s). Summation order follows the sample order.
inline SensingStatistics accumulateStatistics(std::span<const DerivativeSample> samples, const RMat& prior)
{
    detail::require(!samples.empty(), ErrorCode::InvalidArgument, "no derivative samples");
    const int L = static_cast<int>(samples.front().derivatives.size());
    detail::require(L >= 1, ErrorCode::InvalidArgument, "samples carry no derivatives");
    detail::require(prior.rows() == L && prior.cols() == L, ErrorCode::DimensionMismatch,
                    "prior matrix must be L x L");
    const Eigen::Index nTx = samples.front().derivatives.front().cols();

    SensingStatistics stats;
    stats.parameters = L;
    stats.prior = symmetricPart(prior);
    stats.blocks.assign(static_cast<std::size_t>(L * L), CMat::Zero(nTx, nTx));
    for (const auto& s : samples) {
        detail::require(static_cast<int>(s.derivatives.size()) == L, ErrorCode::DimensionMismatch,
                        "inconsistent parameter count across samples");
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) {
                stats.block(i, j).noalias() += s.weight * (s.derivatives[i].adjoint() * s.derivatives[j]);
            }
        }
    }
    for (int i = 0; i < L; ++i) stats.block(i, i) = hermitianPart(stats.block(i, i));
    for (int i = 0; i < L; ++i)
        for (int j = i + 1; j < L; ++j) stats.block(j, i) = stats.block(i, j).adjoint();
    return stats;
}

/// Throws InvalidStatistics unless
///  - block(j, i) == block(i, j)^H (1e-12 relative to the largest entry),
///  - the stacked LN x LN block matrix is PSD (which implies every real
///    contraction sum_ij b_i b_j T_ij is PSD),
///  - C is symmetric PSD.
inline void validateStatistics(const SensingStatistics& stats)
{
    const int L = stats.parameters;
    if (L < 1 || stats.blocks.size() != static_cast<std::size_t>(L * L))
        throw Error(ErrorCode::InvalidStatistics, "block grid does not match parameter count");
    if (stats.prior.rows() != L || stats.prior.cols() != L)
        throw Error(ErrorCode::InvalidStatistics, "prior matrix must be L x L");
    const Eigen::Index n = stats.antennas();
    double scale = 0.0;
    for (const auto& b : stats.blocks) {
        if (b.rows() != n || b.cols() != n) throw Error(ErrorCode::InvalidStatistics, "blocks must be N_T x N_T");
        if (!b.allFinite()) throw Error(ErrorCode::InvalidStatistics, "non-finite entries");
        scale = std::max(scale, b.cwiseAbs().maxCoeff());
    }
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
            if ((stats.block(j, i) - stats.block(i, j).adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
                throw Error(ErrorCode::InvalidStatistics, "T[j][i] != T[i][j]^H");

    CMat stacked(L * n, L * n);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) stacked.block(i * n, j * n, n, n) = stats.block(i, j);
    const RVec ev = hermitianEigenvalues(stacked);
    if (ev(0) < -1e-10 * std::max(std::abs(ev(ev.size() - 1)), 1e-300))
        throw Error(ErrorCode::InvalidStatistics, "derivative statistics are not positive semidefinite");

    if ((stats.prior - stats.prior.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(stats.prior.cwiseAbs().maxCoeff(), 1.0))
        throw Error(ErrorCode::InvalidStatistics, "prior matrix is not symmetric");
    const RVec cev = symmetricEigenvalues(stats.prior);
    if (cev(0) < -1e-10 * std::max(std::abs(cev(L - 1)), 1e-300))
        throw Error(ErrorCode::InvalidStatistics, "prior matrix is not positive semidefinite");
}

// ---------------------------------------------------------------------------
// Single-target angle-of-arrival model, half-wavelength ULAs at both ends.

struct AoAModel {
    int nTx = 1;
    int nRx = 1;
    cdouble pathGain{1.0, 0.0};
    double priorMeanDeg = 0.0;
    double priorStdDeg = 1.0;
    int quadratureOrder = 128;
};

/// a(theta)_n = exp(j pi n sin(theta)), n = 0..m-1.
inline CVec steeringVector(Eigen::Index m, double thetaRad)
{
    detail::require(m >= 1, ErrorCode::InvalidArgument, "antenna count must be >= 1");
    CVec a(m);
    const double s = std::sin(thetaRad);
    for (Eigen::Index n = 0; n < m; ++n) a(n) = std::polar(1.0, pi * static_cast<double>(n) * s);
    return a;
}

/// d a(theta) / d theta, element n = j pi n cos(theta) exp(j pi n sin(theta)).
inline CVec steeringDerivative(Eigen::Index m, double thetaRad)
{
    CVec a = steeringVector(m, thetaRad);
    const double c = std::cos(thetaRad);
    for (Eigen::Index n = 0; n < m; ++n) a(n) *= cdouble(0.0, pi * static_cast<double>(n) * c);
    return a;
}

inline void validateModel(const AoAModel& model)
{
    if (model.nTx < 1) throw ValidationError("sensing.nTx", "must be >= 1");
    if (model.nRx < 1) throw ValidationError("sensing.nRx", "must be >= 1");
    if (!(model.priorStdDeg > 0.0)) throw ValidationError("sensing.priorStdDeg", "must be > 0");
    if (model.quadratureOrder < 2) throw ValidationError("sensing.quadratureOrder", "must be >= 2");
}

/// G(theta) = alpha a_R(theta) a_T(theta)^H.
inline CMat roundTripChannel(const AoAModel& model, double thetaRad)
{
    return model.pathGain * steeringVector(model.nRx, thetaRad) * steeringVector(model.nTx, thetaRad).adjoint();
}

/// dG/dtheta = alpha (da_R a_T^H + a_R da_T^H).
inline CMat channelDerivative(const AoAModel& model, double thetaRad)
{
    const CVec aT = steeringVector(model.nTx, thetaRad);
    const CVec aR = steeringVector(model.nRx, thetaRad);
    const CVec daT = steeringDerivative(model.nTx, thetaRad);
    const CVec daR = steeringDerivative(model.nRx, thetaRad);
    return model.pathGain * (daR * aT.adjoint() + aR * daT.adjoint());
}

namespace detail {

inline SensingStatistics aoaStatistics(const AoAModel& model, int order)
{
    const double sigma = deg2rad(model.priorStdDeg);
    const QuadratureRule rule = gaussianExpectationRule(deg2rad(model.priorMeanDeg), sigma, order);
    std::vector<DerivativeSample> samples;
    samples.reserve(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        if (rule.weights[i] == 0.0) continue;
        samples.push_back({rule.weights[i], {channelDerivative(model, rule.nodes[i])}});
    }
    RMat prior(1, 1);
    prior(0, 0) = 1.0 / (sigma * sigma);
    return accumulateStatistics(samples, prior);
}

} // namespace detail

/// E{dG^H dG} over the Gaussian prior by Gauss-Hermite quadrature, and C = 1/sigma^2
/// (sigma in radians). With `selfCheck`, the rule of twice the order is evaluated as
/// well and QuadratureOrderTooSmall is thrown if any entry moves by more than 1e-6
/// relative to the largest entry.
inline SensingStatistics computeStatistics(const AoAModel& model, bool selfCheck = false)
{
    validateModel(model);
    SensingStatistics stats = detail::aoaStatistics(model, model.quadratureOrder);
    if (selfCheck) {
        const SensingStatistics refined = detail::aoaStatistics(model, 2 * model.quadratureOrder);
        const double scale = refined.block(0, 0).cwiseAbs().maxCoeff();
        const double change = (stats.block(0, 0) - refined.block(0, 0)).cwiseAbs().maxCoeff();
        if (change > 1e-6 * std::max(scale, 1e-300))
            throw Error(ErrorCode::QuadratureOrderTooSmall,
                        "order " + std::to_string(model.quadratureOrder) + " changes by " + std::to_string(change / scale) +
                            " relative when doubled; increase sensing.quadratureOrder");
    }
    return stats;
}

} // namespace isacbf
