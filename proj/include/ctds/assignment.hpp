#ifndef CTDS_ASSIGNMENT_HPP
#define CTDS_ASSIGNMENT_HPP

#include <limits>
#include <vector>

#include "ctds/common.hpp"

namespace ctds {

// Exact minimum-cost perfect matching on a dense square cost matrix via
// shortest augmenting paths with potentials (Jonker-Volgenant style), O(n^3).
// Returns the optimal total cost; row_to_col, if given, receives the matching.
inline double solve_assignment(const Mat& cost, std::vector<Index>* row_to_col = nullptr) {
    const Index n = cost.rows();
    require(cost.cols() == n && n >= 1, "solve_assignment: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const Index i0 = p[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    if (row_to_col) row_to_col->assign(n, -1);
    for (Index j = 1; j <= n; ++j) {
        total += cost(p[j] - 1, j - 1);
        if (row_to_col) (*row_to_col)[p[j] - 1] = j - 1;
    }
    return total;
}

}  // namespace ctds

#endif  // CTDS_ASSIGNMENT_HPP
