#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"

#include <vector>

namespace isacbf {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2) via Golub-Welsch.
/// Nodes ascending; weights sum to sqrt(pi).
inline QuadratureRule gaussHermite(int order)
{
    detail::require(order >= 1, ErrorCode::InvalidArgument, "quadrature order must be >= 1");
    const int n = order;
    RVec diag = RVec::Zero(n);
    RVec sub = RVec::Zero(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);

    Eigen::SelfAdjointEigenSolver<RMat> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);

    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        rule.nodes[i] = es.eigenvalues()(i);
        rule.weights[i] = std::sqrt(pi) * v0 * v0;
    }
    // Symmetrize: the rule is exactly symmetric about 0.
    for (int i = 0, j = n - 1; i < j; ++i, --j) {
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Nodes and probability weights for E{f(x)}, x ~ N(mean, std^2).
inline QuadratureRule gaussianExpectationRule(double mean, double std, int order)
{
    QuadratureRule rule = gaussHermite(order);
    const double scale = std::sqrt(2.0) * std;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        rule.nodes[i] = mean + scale * rule.nodes[i];
        rule.weights[i] /= std::sqrt(pi);
    }
    return rule;
}

} // namespace isacbf
