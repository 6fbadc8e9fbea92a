#include "varmdp/simplex_lp.hpp"

#include <cmath>
#include <limits>

namespace varmdp {

namespace {

constexpr Real kPivotTol = 1e-9;

// Dense tableau: rows are constraints, the last column is the RHS.
struct Tableau {
    int rows = 0;
    int cols = 0; // structural + slack + artificial columns
    std::vector<Vec> a;
    Vec rhs;
    std::vector<int> basis; // basic column per row

    void pivot(int row, int col) {
        const Real inv = 1.0 / a[row][col];
        for (int j = 0; j < cols; ++j) { a[row][j] *= inv; }
        rhs[row] *= inv;
        a[row][col] = 1.0; // kill roundoff on the pivot itself
        for (int i = 0; i < rows; ++i) {
            if (i == row) { continue; }
            const Real factor = a[i][col];
            if (factor == 0.0) { continue; }
            for (int j = 0; j < cols; ++j) { a[i][j] -= factor * a[row][j]; }
            rhs[i] -= factor * rhs[row];
            a[i][col] = 0.0;
        }
        basis[row] = col;
    }
};

// Runs simplex on the given objective, restricted to columns < allowed_cols.
// Returns false on unboundedness.
bool run_simplex(Tableau& t, const Vec& objective, int allowed_cols) {
    for (;;) {
        // Reduced costs: c_j - c_B^T B^{-1} A_j (tableau is kept in basis form,
        // so B^{-1} A_j is just column j).
        int entering = -1;
        for (int j = 0; j < allowed_cols; ++j) {
            Real reduced = objective[j];
            for (int i = 0; i < t.rows; ++i) {
                const Real cb = objective[t.basis[i]];
                if (cb != 0.0) { reduced -= cb * t.a[i][j]; }
            }
            if (reduced < -kPivotTol) { // Bland: first improving column
                entering = j;
                break;
            }
        }
        if (entering < 0) { return true; }

        int leaving = -1;
        Real best_ratio = std::numeric_limits<Real>::infinity();
        for (int i = 0; i < t.rows; ++i) {
            if (t.a[i][entering] > kPivotTol) {
                const Real ratio = t.rhs[i] / t.a[i][entering];
                if (ratio < best_ratio - kPivotTol ||
                    (ratio < best_ratio + kPivotTol &&
                     (leaving < 0 || t.basis[i] < t.basis[leaving]))) {
                    best_ratio = ratio;
                    leaving = i;
                }
            }
        }
        if (leaving < 0) { return false; }
        t.pivot(leaving, entering);
    }
}

} // namespace

LpResult solve_lp(const std::vector<Vec>& a_ub, const Vec& b_ub,
                  const std::vector<Vec>& a_eq, const Vec& b_eq, const Vec& c) {
    const int n = static_cast<int>(c.size());
    const int m_ub = static_cast<int>(a_ub.size());
    const int m_eq = static_cast<int>(a_eq.size());
    const int m = m_ub + m_eq;

    Tableau t;
    t.rows = m;
    t.cols = n + m_ub; // artificials appended below
    t.a.assign(m, Vec(t.cols, 0.0));
    t.rhs.assign(m, 0.0);
    t.basis.assign(m, -1);

    for (int i = 0; i < m_ub; ++i) {
        for (int j = 0; j < n; ++j) { t.a[i][j] = a_ub[i][j]; }
        t.a[i][n + i] = 1.0; // slack
        t.rhs[i] = b_ub[i];
    }
    for (int i = 0; i < m_eq; ++i) {
        for (int j = 0; j < n; ++j) { t.a[m_ub + i][j] = a_eq[i][j]; }
        t.rhs[m_ub + i] = b_eq[i];
    }
    // Normalize RHS signs (flips slack coefficients to -1 where applied).
    for (int i = 0; i < m; ++i) {
        if (t.rhs[i] < 0.0) {
            for (Real& v : t.a[i]) { v = -v; }
            t.rhs[i] = -t.rhs[i];
        }
    }
    // Use slacks with +1 coefficients as the initial basis; every other row
    // gets an artificial variable.
    std::vector<int> artificial_rows;
    for (int i = 0; i < m; ++i) {
        if (i < m_ub && t.a[i][n + i] == 1.0) {
            t.basis[i] = n + i;
        } else {
            artificial_rows.push_back(i);
        }
    }
    const int art_offset = t.cols;
    t.cols += static_cast<int>(artificial_rows.size());
    for (auto& row : t.a) { row.resize(t.cols, 0.0); }
    for (size_t k = 0; k < artificial_rows.size(); ++k) {
        const int i = artificial_rows[k];
        t.a[i][art_offset + static_cast<int>(k)] = 1.0;
        t.basis[i] = art_offset + static_cast<int>(k);
    }

    LpResult result;

    if (!artificial_rows.empty()) {
        Vec phase1(t.cols, 0.0);
        for (int j = art_offset; j < t.cols; ++j) { phase1[j] = 1.0; }
        if (!run_simplex(t, phase1, t.cols)) {
            result.status = LpResult::Status::infeasible;
            return result;
        }
        Real infeasibility = 0.0;
        for (int i = 0; i < t.rows; ++i) {
            if (t.basis[i] >= art_offset) { infeasibility += t.rhs[i]; }
        }
        if (infeasibility > 1e-7) {
            result.status = LpResult::Status::infeasible;
            return result;
        }
        // Drive any zero-level artificials out of the basis when possible.
        for (int i = 0; i < t.rows; ++i) {
            if (t.basis[i] < art_offset) { continue; }
            for (int j = 0; j < art_offset; ++j) {
                if (std::abs(t.a[i][j]) > kPivotTol) {
                    t.pivot(i, j);
                    break;
                }
            }
        }
    }

    Vec phase2(t.cols, 0.0);
    for (int j = 0; j < n; ++j) { phase2[j] = c[j]; }
    if (!run_simplex(t, phase2, art_offset)) {
        result.status = LpResult::Status::unbounded;
        return result;
    }

    result.status = LpResult::Status::optimal;
    result.x.assign(n, 0.0);
    for (int i = 0; i < t.rows; ++i) {
        if (t.basis[i] < n) { result.x[t.basis[i]] = t.rhs[i]; }
    }
    result.objective = 0.0;
    for (int j = 0; j < n; ++j) { result.objective += c[j] * result.x[j]; }
    return result;
}

} // namespace varmdp
