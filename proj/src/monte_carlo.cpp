#include "capmscm/monte_carlo.hpp"

#include "capmscm/regression.hpp"
#include "capmscm/rng.hpp"

namespace capmscm::analytics {

namespace {

struct Fit {
    double alpha = 0.0;
    double slope = 0.0;
    double se = 0.0;
    Eigen::VectorXd residual;
};

Fit simple_ols(const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
    regression::DesignMatrix d = regression::DesignMatrix::with_intercept(y);
    d.add("x", x);
    const auto fit = regression::ols(d);
    return {fit.coef(0), fit.coef(1), fit.se(1), fit.residuals};
}

} // namespace

scm::LinearSem fork_sem(const ForkParams& p) {
    p.validate();
    return scm::SemBuilder()
        .node("Z", 0)
        .node("X", 1)
        .node("Y", 1)
        .edge("Z@0", "X@1", p.a)
        .edge("Z@0", "Y@1", p.b)
        .noise("Z", p.sigma_z)
        .noise("X", p.sigma_x)
        .noise("Y", p.sigma_y)
        .build();
}

scm::LinearSem chain_sem(const ChainParams& p) {
    p.validate();
    return scm::SemBuilder()
        .node("Z", 0)
        .node("X", 1)
        .node("Y", 2)
        .edge("Z@0", "X@1", p.a)
        .edge("X@1", "Y@2", p.c)
        .noise("Z", p.sigma_z)
        .noise("X", p.sigma_x)
        .noise("Y", p.sigma_y)
        .build();
}

std::vector<McPoint> monte_carlo_fork(const ForkParams& p, const std::vector<double>& sigma_x_grid, std::size_t n,
                                      std::uint64_t seed, unsigned threads) {
    std::vector<McPoint> out;
    for (std::size_t k = 0; k < sigma_x_grid.size(); ++k) {
        ForkParams q = p;
        q.sigma_x = sigma_x_grid[k];
        const auto draws = scm::simulate(fork_sem(q), n, derive_seed(seed, hash_name("fork"), k), {threads});
        const Eigen::VectorXd x = draws.column("X@1");
        const Eigen::VectorXd y = draws.column("Y@1");
        const Eigen::VectorXd z = draws.column("Z@0");
        const Fit capm = simple_ols(y, x);
        const Fit hedge = simple_ols(capm.residual, z);
        out.push_back({q.sigma_x, capm.slope, capm.se, fork_beta(q).beta, hedge.slope, hedge.se,
                       fork_residual_loading(q)});
    }
    return out;
}

std::vector<McPoint> monte_carlo_chain(const ChainParams& p, const std::vector<double>& sigma_x_grid, std::size_t n,
                                       std::uint64_t seed, unsigned threads) {
    std::vector<McPoint> out;
    for (std::size_t k = 0; k < sigma_x_grid.size(); ++k) {
        ChainParams q = p;
        q.sigma_x = sigma_x_grid[k];
        const auto draws = scm::simulate(chain_sem(q), n, derive_seed(seed, hash_name("chain"), k), {threads});
        const Fit fit = simple_ols(draws.column("Y@2"), draws.column("X@1"));
        McPoint pt;
        pt.sigma_x = q.sigma_x;
        pt.beta_hat = fit.slope;
        pt.beta_se = fit.se;
        pt.beta_analytic = chain_beta(q);
        out.push_back(pt);
    }
    return out;
}

} // namespace capmscm::analytics
