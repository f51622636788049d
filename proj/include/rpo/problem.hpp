#pragma once

#include "rpo/geometry.hpp"

#include <functional>
#include <string>
#include <utility>

namespace rpo {

using Diagnostics = std::vector<std::pair<std::string, double>>;

struct Problem {
    std::vector<ComponentKind> kinds;
    std::function<double(const ProductPoint&)> cost;
    std::function<Blocks(const ProductPoint&)> egrad;
    std::function<MetricFactors(const ProductPoint&)> metric;  // empty: identity factors
    Projection projection = Projection::ClosedForm;
    // Optional closed-form Riemannian gradient; must agree with the generic path.
    std::function<TangentVector(const ProductPoint&, const MetricFactors&)> rgrad;
    // Optional progress measure used by cost_tol and rel_change_tol in place of the cost.
    std::function<double(const ProductPoint&)> monitor;
    // Optional per-iteration application metrics recorded in the trace.
    std::function<Diagnostics(const ProductPoint&)> diagnostics;
};

inline MetricFactors factors_at(const Problem& P, const ProductPoint& x)
{
    return P.metric ? P.metric(x) : identity_factors(x.size());
}

inline TangentVector gradient(const Problem& P, const ProductPoint& x, const MetricFactors& F)
{
    if (P.rgrad) return P.rgrad(x, F);
    return egrad_to_rgrad(x, P.kinds, F, P.egrad(x), P.projection);
}

inline TangentVector gradient(const Problem& P, const ProductPoint& x) { return gradient(P, x, factors_at(P, x)); }

inline TangentVector project(const Problem& P, const ProductPoint& x, const MetricFactors& F, const Blocks& v)
{
    return project_tangent(x, P.kinds, F, v, P.projection);
}

}  // namespace rpo
