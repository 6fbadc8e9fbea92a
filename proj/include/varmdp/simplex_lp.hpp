// Minimal dense two-phase simplex for the small inner LPs that arise in
// robust Bellman updates (tens of variables, never more).
#pragma once

#include "varmdp/types.hpp"

namespace varmdp {

struct LpResult {
    enum class Status { optimal, infeasible, unbounded };
    Status status = Status::infeasible;
    Vec x;
    Real objective = 0.0;
};

/// Solves min c^T x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0.
/// Bland's rule throughout, so the method always terminates.
LpResult solve_lp(const std::vector<Vec>& a_ub, const Vec& b_ub,
                  const std::vector<Vec>& a_eq, const Vec& b_eq, const Vec& c);

} // namespace varmdp
