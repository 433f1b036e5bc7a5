#pragma once

// Simulated counterparts of the closed forms: OLS slopes and post-hedge
// loadings estimated on draws from the fork and chain SEMs over a grid.

#include "capmscm/analytics.hpp"
#include "capmscm/scm_core.hpp"

#include <cstdint>
#include <vector>

namespace capmscm::analytics {

struct McPoint {
    double sigma_x = 0.0;
    double beta_hat = 0.0;
    double beta_se = 0.0;
    double beta_analytic = 0.0;
    double loading_hat = 0.0;  // fork only
    double loading_se = 0.0;
    double loading_analytic = 0.0;
};

/// Z@0 -> X@1, Z@0 -> Y@1.
scm::LinearSem fork_sem(const ForkParams& p);
/// Z@0 -> X@1 -> Y@2.
scm::LinearSem chain_sem(const ChainParams& p);

/// Grid point k draws `n` rows with seed derive_seed(seed, hash_name("fork"), k).
/// The loading is the slope of Y - alpha - beta X on Z.
std::vector<McPoint> monte_carlo_fork(const ForkParams& p, const std::vector<double>& sigma_x_grid, std::size_t n,
                                      std::uint64_t seed, unsigned threads = 1);

std::vector<McPoint> monte_carlo_chain(const ChainParams& p, const std::vector<double>& sigma_x_grid, std::size_t n,
                                       std::uint64_t seed, unsigned threads = 1);

} // namespace capmscm::analytics
