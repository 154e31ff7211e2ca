#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/fim.hpp"
#include "isacbf/link.hpp"
#include "isacbf/linalg.hpp"

#include <vector>

namespace isacbf {

// Solver for the fixed-(lambda, beta) downlink problem
//
//   minimize  sum_k v_k^H (lambda I - Q) v_k   s.t.  SINR_k(V) >= gamma_k
//
// through its virtual uplink: alternate max-SINR combining and fixed-point power
// control from a dominating start, then map the uplink combiners back to
// downlink beamformers with powers p = sigma^2 (D - F)^-1 1.

/// Unit-norm combiners (columns) and nonnegative virtual uplink powers.
struct UplinkState {
    CMat U;
    RVec z;
};

/// D = diag(|h_k^H u_k|^2 / gamma_k) stored as its diagonal; F_ij = |h_i^H u_j|^2 off the diagonal.
struct CouplingMatrices {
    RVec d;
    RMat F;

    RMat D() const { return d.asDiagonal(); }
    /// Perron root of D^-1 F.
    double spectralRadius() const { return perronRoot(d.cwiseInverse().asDiagonal() * F); }
};

enum class SubproblemStatus { Converged, Inadmissible, IterationLimit };

inline const char* to_string(SubproblemStatus s)
{
    switch (s) {
    case SubproblemStatus::Converged: return "converged";
    case SubproblemStatus::Inadmissible: return "inadmissible";
    case SubproblemStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

struct EffectiveNoise {
    CMat A;
    double minEigenvalue = 0.0;
};

/// lambda I - Q together with its smallest eigenvalue (>= 0 is the sufficient admissibility test).
inline EffectiveNoise effectiveNoiseMatrix(double lambda, const CMat& q)
{
    detail::require(q.rows() == q.cols(), ErrorCode::DimensionMismatch, "Q must be square");
    EffectiveNoise out;
    out.A = hermitianPart(lambda * CMat::Identity(q.rows(), q.cols()) - q);
    out.minEigenvalue = minEigenvalue(out.A);
    return out;
}

struct Combiner {
    CVec u;
    /// Attained value of (sum_{i!=k} z_i |h_i^H u|^2 + u^H A u) / (|h_k^H u|^2 / gamma_k).
    double quotient = 0.0;
};

/// Makes the largest-magnitude entry (first on ties) real and positive.
inline void normalizePhase(CVec& u)
{
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double m = std::abs(u(i));
        if (m > best) {
            best = m;
            imax = i;
        }
    }
    if (best > 0.0) {
        u *= std::conj(u(imax)) / best;
        u(imax) = std::abs(u(imax));
    }
}

/// Max-SINR receive combiner for user k: u ~ A_k^-1 h_k, A_k = sum_{i!=k} z_i h_i h_i^H + A.
/// Throws IndefiniteNumerator when A_k has an eigenvalue <= 1e-10 ||A_k||.
inline Combiner maxSinrCombiner(Eigen::Index k, const RVec& z, const CMat& channels, const CMat& a, double gamma)
{
    detail::require(k >= 0 && k < channels.cols() && z.size() == channels.cols(), ErrorCode::DimensionMismatch,
                    "user index or power vector does not match the channels");
    detail::require(a.rows() == channels.rows() && a.cols() == channels.rows(), ErrorCode::DimensionMismatch,
                    "noise matrix must be N_T x N_T");
    CMat ak = a;
    for (Eigen::Index i = 0; i < channels.cols(); ++i)
        if (i != k) ak.noalias() += z(i) * channels.col(i) * channels.col(i).adjoint();
    ak = hermitianPart(ak);

    const RVec ev = hermitianEigenvalues(ak);
    const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    if (!(norm > 0.0) || ev(0) <= 1e-10 * norm)
        throw Error(ErrorCode::IndefiniteNumerator, "interference-plus-noise matrix is not positive definite");

    Eigen::LLT<CMat> llt(ak);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::IndefiniteNumerator, "Cholesky factorization of the combiner numerator failed");
    const CVec x = llt.solve(channels.col(k));
    const double gain = channels.col(k).dot(x).real(); // h^H A_k^-1 h

    Combiner c;
    c.u = x / x.norm();
    normalizePhase(c.u);
    c.quotient = gamma / gain;
    return c;
}

/// z'_k = (sum_{i!=k} z_i |h_i^H u_k|^2 + u_k^H A u_k) gamma_k / |h_k^H u_k|^2.
inline RVec powerUpdate(const UplinkState& state, const CMat& channels, const CMat& a, const RVec& gammas)
{
    const Eigen::Index K = channels.cols();
    detail::require(state.U.rows() == channels.rows() && state.U.cols() == K && state.z.size() == K &&
                        gammas.size() == K,
                    ErrorCode::DimensionMismatch, "uplink state does not match the channels");
    const RMat gains = (channels.adjoint() * state.U).cwiseAbs2(); // (i, k) = |h_i^H u_k|^2
    RVec next(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        if (gains(k, k) <= 1e-28 * channels.col(k).squaredNorm() * state.U.col(k).squaredNorm())
            throw Error(ErrorCode::ZeroDesiredGain, "combiner is orthogonal to its own channel");
        double interference = (state.U.col(k).adjoint() * a * state.U.col(k)).value().real();
        for (Eigen::Index i = 0; i < K; ++i)
            if (i != k) interference += state.z(i) * gains(i, k);
        next(k) = interference * gammas(k) / gains(k, k);
    }
    return next;
}

inline CouplingMatrices couplingMatrices(const CMat& u, const CMat& channels, const RVec& gammas)
{
    const Eigen::Index K = channels.cols();
    detail::require(u.rows() == channels.rows() && u.cols() == K && gammas.size() == K, ErrorCode::DimensionMismatch,
                    "combiners do not match the channels");
    const RMat gains = (channels.adjoint() * u).cwiseAbs2(); // (i, j) = |h_i^H u_j|^2
    CouplingMatrices cm;
    cm.d = gains.diagonal().cwiseQuotient(gammas);
    cm.F = gains;
    cm.F.diagonal().setZero();
    return cm;
}

struct UplinkOptions {
    double tolerance = 1e-10;
    int maxIterations = 10000;
    bool recordHistory = false;
};

struct UplinkSolution {
    SubproblemStatus status = SubproblemStatus::IterationLimit;
    UplinkState state;
    int iterations = 0;
    double residual = 0.0;
    /// The last update raised some power. From a dominating start the sequence only
    /// decreases, so this means z fell below the fixed point (or there is none).
    bool rising = false;
    /// z[0], z[1], ... when requested.
    std::vector<RVec> history;
};

/// Alternates combining and power control from z0 until
/// ||z[n+1] - z[n]||_inf <= tolerance ||z[n+1]||_inf. Falling to z_k <= 0 or an
/// indefinite combiner numerator marks the pair inadmissible. A converged point must
/// meet every uplink SINR with equality (1e-8) and have rho(D^-1 F) < 1.
inline UplinkSolution solveUplink(const CommLink& link, double lambda, const CMat& q, const RVec& z0,
                                  const UplinkOptions& options = {})
{
    validateLink(link);
    const Eigen::Index K = link.users();
    detail::require(q.rows() == link.antennas() && q.cols() == link.antennas(), ErrorCode::DimensionMismatch,
                    "Q must be N_T x N_T");
    detail::require(z0.size() == K, ErrorCode::DimensionMismatch, "z0 must have one entry per user");

    const CMat a = effectiveNoiseMatrix(lambda, q).A;
    UplinkSolution out;
    out.state.z = z0;
    out.state.U = CMat::Zero(link.antennas(), K);
    if (options.recordHistory) out.history.push_back(z0);

    bool converged = false;
    try {
        for (int n = 0; n < options.maxIterations; ++n) {
            for (Eigen::Index k = 0; k < K; ++k)
                out.state.U.col(k) = maxSinrCombiner(k, out.state.z, link.channels, a, link.sinrTargets(k)).u;
            RVec next = powerUpdate(out.state, link.channels, a, link.sinrTargets);
            out.iterations = n + 1;
            if (options.recordHistory) out.history.push_back(next);
            if (!next.allFinite() || (next.array() <= 0.0).any()) {
                out.state.z = next;
                out.status = SubproblemStatus::Inadmissible;
                return out;
            }
            out.residual = (next - out.state.z).cwiseAbs().maxCoeff() / next.cwiseAbs().maxCoeff();
            out.rising = (next.array() > out.state.z.array() * (1.0 + 1e-12)).any();
            out.state.z = next;
            // Unbounded growth from a dominating start: the targets are unreachable.
            if (next.maxCoeff() > 1e20 * z0.maxCoeff()) break;
            if (out.residual <= options.tolerance) {
                converged = true;
                break;
            }
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::IndefiniteNumerator && e.code() != ErrorCode::ZeroDesiredGain) throw;
        out.status = SubproblemStatus::Inadmissible;
        return out;
    }
    if (!converged) {
        out.status = SubproblemStatus::IterationLimit;
        return out;
    }

    const RVec sinr = uplinkSinr(link.channels, out.state.U, out.state.z, a);
    if (((sinr.array() / link.sinrTargets.array()) - 1.0).abs().maxCoeff() > 1e-8) {
        out.status = SubproblemStatus::IterationLimit;
        return out;
    }
    if (couplingMatrices(out.state.U, link.channels, link.sinrTargets).spectralRadius() >= 1.0) {
        out.status = SubproblemStatus::Inadmissible;
        return out;
    }
    out.status = SubproblemStatus::Converged;
    return out;
}

/// Starting powers that dominate the fixed point: 1e3 gamma_k (lambda + ||Q||_2) / ||h_k||^2.
inline RVec dominatingInitializer(const CommLink& link, double lambda, const CMat& q)
{
    const double level = std::max(lambda + hermitianNorm(q), 1e-300);
    RVec z0(link.users());
    for (Eigen::Index k = 0; k < link.users(); ++k)
        z0(k) = 1e3 * link.sinrTargets(k) * level / link.channels.col(k).squaredNorm();
    return z0;
}

/// p = sigma^2 (D - F)^-1 1. Throws SingularCoupling when D - F has condition above 1e12.
inline RVec downlinkPowers(const CouplingMatrices& cm, double noisePower)
{
    const Eigen::Index K = cm.d.size();
    detail::require(cm.F.rows() == K && cm.F.cols() == K, ErrorCode::DimensionMismatch, "F must be K x K");
    const RMat m = cm.D() - cm.F;
    Eigen::JacobiSVD<RMat> svd(m);
    const RVec sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(K - 1) <= 1e-12 * sv(0))
        throw Error(ErrorCode::SingularCoupling, "D - F is numerically singular");
    return m.fullPivLu().solve(RVec::Constant(K, noisePower));
}

struct SubproblemResult {
    SubproblemStatus status = SubproblemStatus::IterationLimit;
    BeamformingMatrix V;
    CMat U;
    RVec z;
    RVec p;
    /// sum_k v_k^H (lambda I - Q) v_k
    double objective = 0.0;
    /// sigma^2 1^T z
    double uplinkObjective = 0.0;
    double spectralRadius = 0.0;
    int iterations = 0;
};

/// Downlink beamformers from a converged uplink: (D - F) p = sigma^2 1, v_k = sqrt(p_k) u_k.
/// Throws SingularCoupling when D - F is numerically singular.
inline SubproblemResult recoverDownlink(const UplinkState& state, const CommLink& link, double lambda, const CMat& q)
{
    validateLink(link);
    const CouplingMatrices cm = couplingMatrices(state.U, link.channels, link.sinrTargets);

    SubproblemResult out;
    out.U = state.U;
    out.z = state.z;
    out.uplinkObjective = link.noisePower * state.z.sum();
    out.spectralRadius = cm.spectralRadius();
    if (out.spectralRadius >= 1.0) {
        out.status = SubproblemStatus::Inadmissible;
        return out;
    }

    out.p = downlinkPowers(cm, link.noisePower);
    if (!out.p.allFinite() || (out.p.array() <= 0.0).any()) {
        out.status = SubproblemStatus::Inadmissible;
        return out;
    }

    out.V = state.U * out.p.cwiseSqrt().asDiagonal();
    const RVec sinr = downlinkSinr(link.channels, out.V, link.noisePower);
    if (((sinr.array() / link.sinrTargets.array()) - 1.0).abs().maxCoeff() > 1e-8)
        throw Error(ErrorCode::SingularCoupling, "recovered powers miss the SINR targets; coupling ill-conditioned");

    const CMat a = effectiveNoiseMatrix(lambda, q).A;
    out.objective = (out.V.adjoint() * a * out.V).trace().real();
    out.status = SubproblemStatus::Converged;
    return out;
}

/// Full fixed-(lambda, Q) solve: dominating start, uplink iteration, downlink recovery.
/// On IterationLimit the start is scaled by 1e2 and retried, at most three times.
inline SubproblemResult solveSubproblem(const CommLink& link, double lambda, const CMat& q,
                                        const UplinkOptions& options = {})
{
    RVec z0 = dominatingInitializer(link, lambda, q);
    UplinkSolution ul;
    int iterations = 0;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        ul = solveUplink(link, lambda, q, z0, options);
        iterations += ul.iterations;
        // A run still decreasing at the cap is slow, not undershooting; a higher start won't help.
        if (ul.status != SubproblemStatus::IterationLimit || !ul.rising) break;
        z0 *= 1e2;
    }
    SubproblemResult out;
    if (ul.status == SubproblemStatus::Converged) {
        try {
            out = recoverDownlink(ul.state, link, lambda, q);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularCoupling) throw;
            out.status = SubproblemStatus::Inadmissible;
        }
    } else {
        out.status = ul.status;
    }
    out.iterations = iterations;
    if (out.U.size() == 0) {
        out.U = ul.state.U;
        out.z = ul.state.z;
    }
    return out;
}

} // namespace isacbf
