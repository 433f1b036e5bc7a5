#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

/// parents[v] bitmask, as in DagIndex's raw form.
using Parents = std::vector<std::uint64_t>;

inline bool has_edge(const Parents& p, std::size_t from, std::size_t to) { return (p[to] >> from) & 1U; }

inline std::uint64_t descendants_inclusive(const Parents& p, std::size_t v) {
    std::uint64_t seen = std::uint64_t{1} << v;
    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (std::size_t w = 0; w < p.size(); ++w) {
            if (has_edge(p, u, w) && !((seen >> w) & 1U)) {
                seen |= std::uint64_t{1} << w;
                stack.push_back(w);
            }
        }
    }
    return seen;
}

/// Visits every simple path between x and y in the skeleton.
inline void for_each_path(const Parents& p, std::size_t x, std::size_t y,
                          const std::function<void(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> path{x};
    std::uint64_t used = std::uint64_t{1} << x;
    std::function<void(std::size_t)> walk = [&](std::size_t u) {
        if (u == y) {
            visit(path);
            return;
        }
        for (std::size_t w = 0; w < p.size(); ++w) {
            if ((used >> w) & 1U) continue;
            if (!has_edge(p, u, w) && !has_edge(p, w, u)) continue;
            used |= std::uint64_t{1} << w;
            path.push_back(w);
            walk(w);
            path.pop_back();
            used &= ~(std::uint64_t{1} << w);
        }
    };
    walk(x);
}

/// A path is blocked when some interior node is a conditioned non-collider,
/// or a collider with neither itself nor a descendant conditioned.
inline bool path_blocked(const Parents& p, const std::vector<std::size_t>& path, std::uint64_t z) {
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const auto prev = path[k - 1], v = path[k], next = path[k + 1];
        const bool collider = has_edge(p, prev, v) && has_edge(p, next, v);
        if (collider) {
            if ((descendants_inclusive(p, v) & z) == 0) return true;
        } else if ((z >> v) & 1U) {
            return true;
        }
    }
    return false;
}

inline bool d_separated(const Parents& p, std::size_t x, std::size_t y, std::uint64_t z) {
    bool open = false;
    for_each_path(p, x, y, [&](const std::vector<std::size_t>& path) {
        if (!open && !path_blocked(p, path, z)) open = true;
    });
    return !open;
}

/// Back-door criterion by enumeration: no conditioned descendant of the
/// treatment, and every path leaving the treatment through a parent blocked.
inline bool backdoor_clear(const Parents& p, std::size_t t, std::size_t y, std::uint64_t z) {
    if (descendants_inclusive(p, t) & ~(std::uint64_t{1} << t) & z) return false;
    bool open = false;
    for_each_path(p, t, y, [&](const std::vector<std::size_t>& path) {
        if (open || path.size() < 2) return;
        if (!has_edge(p, path[1], path[0])) return;
        if (!path_blocked(p, path, z)) open = true;
    });
    return !open;
}

inline bool acyclic(const std::vector<std::vector<bool>>& adj) {
    const auto n = adj.size();
    std::vector<int> state(n, 0);
    std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
        state[u] = 1;
        for (std::size_t w = 0; w < n; ++w) {
            if (!adj[u][w]) continue;
            if (state[w] == 1) return false;
            if (state[w] == 0 && !dfs(w)) return false;
        }
        state[u] = 2;
        return true;
    };
    for (std::size_t u = 0; u < n; ++u) {
        if (state[u] == 0 && !dfs(u)) return false;
    }
    return true;
}

enum class Outcome { contradiction, beta_zero, leave_one_out, single_asset_market };

/// Substitutes X = sum_j w_j Y_j into Y_i = beta X + Z and reads off the
/// same-period dependency structure of the resulting system.
inline Outcome aggregator_outcome(const std::vector<double>& w, std::size_t target, double beta) {
    const double self = beta * w[target];
    double others = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (j != target) others += beta * w[j];
    }
    // Nodes: 0 = X, 1 + j = Y_j.
    const auto n = w.size() + 1;
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    if (beta != 0.0) adj[0][1 + target] = true;
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] != 0.0) adj[1 + j][0] = true;
    }
    const bool cyclic = !acyclic(adj);
    if (beta == 0.0) return Outcome::beta_zero;
    if (self == 0.0) return Outcome::leave_one_out;
    if (others == 0.0 && cyclic) return Outcome::single_asset_market;
    return Outcome::contradiction;
}

/// Two-pass sample covariance.
inline double cov(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double ma = a.mean(), mb = b.mean();
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

/// Bivariate slope and its classical standard error.
struct Slope {
    double beta;
    double se;
};

inline Slope slope(const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
    const double b = cov(x, y) / cov(x, x);
    const double a = y.mean() - b * x.mean();
    double rss = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double e = y[i] - a - b * x[i];
        rss += e * e;
    }
    const auto n = static_cast<double>(y.size());
    const double s2 = rss / (n - 2.0);
    return {b, std::sqrt(s2 / (cov(x, x) * (n - 1.0)))};
}

} // namespace oracle
