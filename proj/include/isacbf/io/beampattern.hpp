#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"
#include "isacbf/sensing_model.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace isacbf::io {

/// Transmit array response B(theta) = sum_k |a_T(theta)^H v_k|^2 on a uniform grid.
struct BeamPattern {
    std::vector<double> thetaDeg;
    std::vector<double> gain;
    std::vector<double> gainDb; // 10 log10(B / max B)

    std::size_t size() const { return thetaDeg.size(); }
};

/// Grid points are fromDeg + i * stepDeg, computed from the index so the grid does
/// not drift. The default grid is -90:0.1:90 (1801 points).
inline BeamPattern computeBeamPattern(const CMat& v, double fromDeg = -90.0, double toDeg = 90.0, double stepDeg = 0.1)
{
    detail::require(stepDeg > 0.0 && toDeg >= fromDeg, ErrorCode::InvalidArgument, "bad beam pattern grid");
    detail::require(v.size() > 0, ErrorCode::InvalidArgument, "beamformers are empty");
    const auto n = static_cast<std::size_t>(std::floor((toDeg - fromDeg) / stepDeg + 1e-9)) + 1;
    BeamPattern bp;
    bp.thetaDeg.resize(n);
    bp.gain.resize(n);
    bp.gainDb.resize(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = fromDeg + static_cast<double>(i) * stepDeg;
        const CVec a = steeringVector(v.rows(), deg2rad(theta));
        bp.thetaDeg[i] = theta;
        bp.gain[i] = (a.adjoint() * v).squaredNorm();
        peak = std::max(peak, bp.gain[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
        bp.gainDb[i] = peak > 0.0 ? lin2db(bp.gain[i] / peak) : -std::numeric_limits<double>::infinity();
    return bp;
}

/// Indices of interior local maxima (strictly above the left neighbour, not below
/// the right one) whose normalized gain is at least floorDb.
inline std::vector<std::size_t> localMaxima(const BeamPattern& bp, double floorDb = -std::numeric_limits<double>::infinity())
{
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < bp.size(); ++i)
        if (bp.gain[i] > bp.gain[i - 1] && bp.gain[i] >= bp.gain[i + 1] && bp.gainDb[i] >= floorDb) out.push_back(i);
    return out;
}

/// True if some local maximum above floorDb lies within toleranceDeg of thetaDeg.
inline bool hasLobeNear(const BeamPattern& bp, double thetaDeg, double toleranceDeg, double floorDb)
{
    for (std::size_t i : localMaxima(bp, floorDb))
        if (std::abs(bp.thetaDeg[i] - thetaDeg) <= toleranceDeg) return true;
    return false;
}

/// Width in degrees of the -3 dB region around the strongest local maximum within
/// searchDeg of nearDeg (crossings linearly interpolated in dB). Empty if there is no
/// such maximum or the lobe runs off the grid.
inline std::optional<double> lobeWidth3dB(const BeamPattern& bp, double nearDeg, double searchDeg = 5.0)
{
    std::optional<std::size_t> best;
    for (std::size_t i : localMaxima(bp))
        if (std::abs(bp.thetaDeg[i] - nearDeg) <= searchDeg && (!best || bp.gain[i] > bp.gain[*best])) best = i;
    if (!best) return std::nullopt;

    const double level = bp.gainDb[*best] - 3.0;
    auto crossing = [&](std::size_t inside, std::size_t outside) {
        const double t = (bp.gainDb[inside] - level) / (bp.gainDb[inside] - bp.gainDb[outside]);
        return bp.thetaDeg[inside] + t * (bp.thetaDeg[outside] - bp.thetaDeg[inside]);
    };
    std::size_t lo = *best;
    while (lo > 0 && bp.gainDb[lo - 1] > level) --lo;
    std::size_t hi = *best;
    while (hi + 1 < bp.size() && bp.gainDb[hi + 1] > level) ++hi;
    if (lo == 0 || hi + 1 == bp.size()) return std::nullopt;
    return crossing(hi, hi + 1) - crossing(lo, lo - 1);
}

} // namespace isacbf::io
