#pragma once

// OLS used by every diagnostic: plain and multiple regression, environment
// interaction designs, distributed-lag designs and robust standard errors.

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace capmscm::regression {

inline constexpr std::string_view kIntercept = "(intercept)";
/// Guard on the condition number of the column-equilibrated X'X.
inline constexpr double kConditionLimit = 1e10;
inline constexpr std::size_t kDefaultEnvironmentFloor = 30;

enum class SeKind { classical, heteroskedasticity_robust, cluster_by_date };

std::string_view to_string(SeKind kind) noexcept;
SeKind se_kind_from_string(std::string_view text);

/// Regressors with the intercept as column 0. `clusters` is either empty or
/// one key per row (the date index for pooled panels).
struct DesignMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::int64_t> clusters;

    /// Starts a design with only the intercept column.
    static DesignMatrix with_intercept(const Eigen::VectorXd& y);
    DesignMatrix& add(std::string name, const Eigen::VectorXd& column);

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index cols() const { return x.cols(); }
};

struct RegressionFit {
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::MatrixXd covariance;  // of the coefficients, matching se_kind
    Eigen::VectorXd residuals;
    double r_squared = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    SeKind se_kind = SeKind::classical;

    Eigen::Index index(std::string_view name) const;
    double coefficient(std::string_view name) const { return coef(index(name)); }
    double std_error(std::string_view name) const { return se(index(name)); }
};

/// Least squares through a column-pivoted Householder QR of the equilibrated
/// design. Errors: insufficient_observations (rows <= cols), rank_deficient,
/// invalid_argument for malformed designs.
///
/// HC1 scaling is n/(n-p). Cluster scaling is G/(G-1) * (n-1)/(n-p), which
/// reduces to HC1 when every row is its own cluster.
RegressionFit ols(const DesignMatrix& design, SeKind se_kind = SeKind::classical);

struct BetaNeutral {
    double alpha = 0.0;
    double beta = 0.0;
    Eigen::VectorXd residual;
};

/// Bivariate OLS of y on x with intercept, and the hedged residual
/// y - alpha - beta * x. Throws degenerate_regressor when x is constant.
BetaNeutral beta_neutral_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& x);

/// Named control columns aligned with the rows they accompany.
struct Controls {
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // rows x names.size()

    bool empty() const { return names.empty(); }
    /// Copy without columns that are constant over the rows.
    Controls without_constant_columns() const;
};

// ---------------------------------------------------------------------------

struct EnvironmentRows {
    Eigen::VectorXd y;
    Eigen::VectorXd market;
    std::vector<std::string> environment;
    Controls controls;
    std::vector<std::int64_t> clusters;
};

struct EnvironmentBeta {
    std::string environment;
    double beta = 0.0;
    double se = 0.0;
    std::size_t n_obs = 0;
};

struct InteractionOptions {
    std::size_t min_rows = kDefaultEnvironmentFloor;
    SeKind se_kind = SeKind::classical;
};

struct InteractionFit {
    std::string base_environment;
    std::vector<EnvironmentBeta> betas;  // base first, then the rest sorted by label
    std::vector<std::string> dropped_controls;
    RegressionFit fit;
};

/// y ~ 1 + market + sum_{e != base} (1{E=e} + market*1{E=e}) + controls.
/// beta_e = beta + delta_e with delta-method standard errors. Constant
/// control columns carry no information and are dropped before fitting.
/// Errors: missing_base_env, thin_environment (a non-base environment below
/// `min_rows`).
InteractionFit interaction_fit(const EnvironmentRows& rows, const std::string& base_env,
                               const InteractionOptions& options = {});

// ---------------------------------------------------------------------------

struct LagCoefficient {
    int lag = 0;
    double coef = 0.0;
    double se = 0.0;
};

/// One series pair for a distributed-lag fit. `controls` rows align with y;
/// `time_ids` (optional) feed cluster-by-date standard errors.
struct LagBlock {
    Eigen::VectorXd y;
    Eigen::VectorXd x;
    Controls controls;
    std::vector<std::int64_t> time_ids;
};

struct LagProfile {
    std::vector<LagCoefficient> lags;  // k = 0..max_lag
    RegressionFit fit;
};

/// y_t ~ 1 + sum_{k=0..max_lag} c_k x_{t-k} + controls_t, all lags in one
/// regression. The first max_lag rows of each block are dropped; blocks are
/// stacked into one pooled fit.
LagProfile lag_profile(const std::vector<LagBlock>& blocks, int max_lag, SeKind se_kind = SeKind::classical);

LagProfile lag_profile(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Controls& controls,
                       int max_lag, SeKind se_kind = SeKind::classical);

} // namespace capmscm::regression
