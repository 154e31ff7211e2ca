#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace isacbf {

using cdouble = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / pi; }
inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin2db(double lin) { return 10.0 * std::log10(lin); }

// (A + A^H) / 2
inline CMat hermitianPart(const CMat& a) { return 0.5 * (a + a.adjoint()); }
inline RMat symmetricPart(const RMat& a) { return 0.5 * (a + a.transpose()); }

/// Eigenvalues of the Hermitian part of `a`, ascending.
inline RVec hermitianEigenvalues(const CMat& a)
{
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitianPart(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline RVec symmetricEigenvalues(const RMat& a)
{
    Eigen::SelfAdjointEigenSolver<RMat> es(symmetricPart(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double minEigenvalue(const CMat& a) { return hermitianEigenvalues(a)(0); }
inline double maxEigenvalue(const CMat& a)
{
    RVec ev = hermitianEigenvalues(a);
    return ev(ev.size() - 1);
}

/// Largest |eigenvalue| of a Hermitian matrix, i.e. its spectral norm.
inline double hermitianNorm(const CMat& a)
{
    if (a.size() == 0) return 0.0;
    RVec ev = hermitianEigenvalues(a);
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

/// Unit eigenvector of the largest eigenvalue of a Hermitian matrix.
inline CVec dominantEigenvector(const CMat& a)
{
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitianPart(a));
    return es.eigenvectors().col(a.rows() - 1);
}

/// Perron root of an elementwise nonnegative square matrix.
///
/// Power iteration runs on M + I, which shares the Perron vector of M but is
/// primitive whenever M is irreducible, so periodic matrices such as
/// [[0, a], [b, 0]] still converge. Termination uses the Collatz-Wielandt
/// bracket min_i (Mx)_i/x_i <= rho <= max_i (Mx)_i/x_i for positive x.
inline double perronRoot(const RMat& m, int maxIterations = 200, double tolerance = 1e-10)
{
    const Eigen::Index n = m.rows();
    if (n == 0) return 0.0;
    RVec x = RVec::Ones(n);
    double lower = 0.0;
    double upper = 0.0;
    for (int it = 0; it < maxIterations; ++it) {
        RVec mx = m * x;
        lower = (mx.array() / x.array()).minCoeff();
        upper = (mx.array() / x.array()).maxCoeff();
        if (upper - lower <= tolerance * std::max(upper, 1e-300)) break;
        x = mx + x;
        x /= x.maxCoeff();
    }
    return upper;
}

} // namespace isacbf
