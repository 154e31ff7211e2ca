#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"

namespace isacbf {

/// Downlink users: channels h_k (columns), linear SINR targets and receiver noise.
struct CommLink {
    CMat channels;
    RVec sinrTargets;
    double noisePower = 1.0;

    Eigen::Index antennas() const { return channels.rows(); }
    Eigen::Index users() const { return channels.cols(); }
};

inline void validateLink(const CommLink& link)
{
    detail::require(link.users() >= 1, ErrorCode::InvalidArgument, "at least one user is required");
    detail::require(link.sinrTargets.size() == link.users(), ErrorCode::DimensionMismatch,
                    "one SINR target per user is required");
    detail::require((link.sinrTargets.array() > 0.0).all(), ErrorCode::InvalidArgument, "SINR targets must be > 0");
    detail::require(link.noisePower > 0.0, ErrorCode::InvalidArgument, "noise power must be > 0");
    detail::require(link.channels.allFinite(), ErrorCode::InvalidArgument, "channels must be finite");
}

/// |h_k^H v_k|^2 / (sum_{i != k} |h_k^H v_i|^2 + sigma^2)
inline RVec downlinkSinr(const CMat& channels, const CMat& v, double noisePower)
{
    detail::require(channels.rows() == v.rows() && channels.cols() == v.cols(), ErrorCode::DimensionMismatch,
                    "beamformers must be N_T x K");
    const RMat gains = (channels.adjoint() * v).cwiseAbs2(); // (k, i) = |h_k^H v_i|^2
    RVec sinr(channels.cols());
    for (Eigen::Index k = 0; k < channels.cols(); ++k)
        sinr(k) = gains(k, k) / (gains.row(k).sum() - gains(k, k) + noisePower);
    return sinr;
}

/// z_k |h_k^H u_k|^2 / (sum_{i != k} z_i |h_i^H u_k|^2 + u_k^H A u_k)
inline RVec uplinkSinr(const CMat& channels, const CMat& u, const RVec& z, const CMat& noise)
{
    detail::require(channels.rows() == u.rows() && channels.cols() == u.cols(), ErrorCode::DimensionMismatch,
                    "combiners must be N_T x K");
    const RMat gains = (channels.adjoint() * u).cwiseAbs2(); // (i, k) = |h_i^H u_k|^2
    RVec sinr(channels.cols());
    for (Eigen::Index k = 0; k < channels.cols(); ++k) {
        double interference = (u.col(k).adjoint() * noise * u.col(k)).value().real();
        for (Eigen::Index i = 0; i < channels.cols(); ++i)
            if (i != k) interference += z(i) * gains(i, k);
        sinr(k) = z(k) * gains(k, k) / interference;
    }
    return sinr;
}

} // namespace isacbf
