#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trajalign/errors.hpp"

namespace trajalign {

template <typename Scalar>
struct Assignment {
    /// (row, col) pairs, sorted by row
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    /// sum of the assigned entries, accumulated in row order
    Scalar cost = Scalar(0);
};

namespace detail {

// Kuhn-Munkres with row/column potentials on a square matrix (1-based
// internals). Returns the column assigned to each row plus the potentials.
template <typename Scalar>
void solve_square(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                  std::vector<Eigen::Index>& row_to_col,
                  std::vector<Scalar>& u,
                  std::vector<Scalar>& v) {
    const Eigen::Index n = a.rows();
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    u.assign(static_cast<std::size_t>(n + 1), Scalar(0));
    v.assign(static_cast<std::size_t>(n + 1), Scalar(0));
    std::vector<Eigen::Index> p(static_cast<std::size_t>(n + 1), 0);
    std::vector<Eigen::Index> way(static_cast<std::size_t>(n + 1), 0);

    for (Eigen::Index i = 1; i <= n; ++i) {
        p[0] = i;
        Eigen::Index j0 = 0;
        std::vector<Scalar> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = p[j0];
            Scalar delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const Scalar cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
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
            const Eigen::Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    row_to_col.assign(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 1; j <= n; ++j) {
        row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    }
}

// Among all perfect matchings that use only tight edges (every one of them
// is optimal), pick the lexicographically smallest column sequence in row
// order. Starts from the optimal matching `row_to_col`.
inline void lexicographic_tight_matching(const std::vector<std::vector<char>>& tight,
                                         std::vector<Eigen::Index>& row_to_col) {
    const auto n = static_cast<Eigen::Index>(row_to_col.size());
    std::vector<Eigen::Index> col_to_row(static_cast<std::size_t>(n), -1);
    for (Eigen::Index r = 0; r < n; ++r) {
        col_to_row[row_to_col[r]] = r;
    }
    std::vector<char> fixed_row(static_cast<std::size_t>(n), 0);
    std::vector<char> visited(static_cast<std::size_t>(n), 0);

    // Kuhn augmenting search restricted to unfixed rows and tight edges.
    auto augment = [&](auto&& self, Eigen::Index row, Eigen::Index banned_col) -> bool {
        for (Eigen::Index c = 0; c < n; ++c) {
            if (!tight[row][c] || visited[c] || c == banned_col) {
                continue;
            }
            const Eigen::Index owner = col_to_row[c];
            if (owner >= 0 && fixed_row[owner]) {
                continue;
            }
            visited[c] = 1;
            if (owner < 0 || self(self, owner, banned_col)) {
                col_to_row[c] = row;
                row_to_col[row] = c;
                return true;
            }
        }
        return false;
    };

    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index current = row_to_col[r];
        for (Eigen::Index c = 0; c < current; ++c) {
            if (!tight[r][c] || fixed_row[col_to_row[c]]) {
                continue;
            }
            // move r onto c; the displaced row must find another column
            const auto saved_r2c = row_to_col;
            const auto saved_c2r = col_to_row;
            const Eigen::Index displaced = col_to_row[c];
            row_to_col[r] = c;
            col_to_row[c] = r;
            col_to_row[current] = -1;
            fixed_row[r] = 1;
            std::fill(visited.begin(), visited.end(), 0);
            if (augment(augment, displaced, c)) {
                break;
            }
            fixed_row[r] = 0;
            row_to_col = saved_r2c;
            col_to_row = saved_c2r;
        }
        fixed_row[r] = 1;
    }
}

}  // namespace detail

/// Minimum-cost one-to-one assignment of an n x m cost matrix.
///
/// Returns min(n, m) pairs. Rectangular inputs are padded to square with
/// zero-cost dummy cells, which leaves the optimum over real cells intact.
/// Among equal-cost optima the lexicographically smallest column sequence
/// (rows in order, dummy columns after real ones) is returned, so results
/// are stable across runs. Throws DomainError on non-finite entries.
template <typename Derived>
Assignment<typename Derived::Scalar> hungarian(const Eigen::MatrixBase<Derived>& cost) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Assignment<Scalar> out;
    const Eigen::Index n = cost.rows();
    const Eigen::Index m = cost.cols();
    if (n == 0 || m == 0) {
        return out;
    }
    if (!cost.allFinite()) {
        throw DomainError("hungarian: cost matrix has non-finite entries");
    }

    const Eigen::Index k = std::max(n, m);
    Mat square = Mat::Zero(k, k);
    square.topLeftCorner(n, m) = cost;

    std::vector<Eigen::Index> row_to_col;
    std::vector<Scalar> u;
    std::vector<Scalar> v;
    detail::solve_square(square, row_to_col, u, v);

    const Scalar scale = std::max(Scalar(1), square.cwiseAbs().maxCoeff());
    const Scalar eps = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale * Scalar(k);
    std::vector<std::vector<char>> tight(static_cast<std::size_t>(k), std::vector<char>(static_cast<std::size_t>(k), 0));
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const Scalar reduced = square(i, j) - u[i + 1] - v[j + 1];
            tight[i][j] = std::abs(reduced) <= eps ? 1 : 0;
        }
        tight[i][row_to_col[i]] = 1;
    }
    detail::lexicographic_tight_matching(tight, row_to_col);

    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = row_to_col[static_cast<std::size_t>(i)];
        if (j < m) {
            out.pairs.emplace_back(i, j);
            out.cost += cost(i, j);
        }
    }
    return out;
}

}  // namespace trajalign
