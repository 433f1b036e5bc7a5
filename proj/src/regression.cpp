#include "capmscm/regression.hpp"

#include "capmscm/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace capmscm::regression {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

bool is_constant(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() == 0) return true;
    return (v.array() == v(0)).all();
}

void validate(const DesignMatrix& d) {
    if (d.names.size() != static_cast<std::size_t>(d.x.cols())) {
        throw Error(Errc::invalid_argument, "design has " + std::to_string(d.x.cols()) + " columns but " +
                                                std::to_string(d.names.size()) + " names");
    }
    if (d.names.empty() || d.names.front() != kIntercept) {
        throw Error(Errc::invalid_argument, "the first design column must be the intercept");
    }
    if (d.y.size() != d.x.rows()) throw Error(Errc::invalid_argument, "response length does not match design rows");
    if (!d.clusters.empty() && d.clusters.size() != static_cast<std::size_t>(d.x.rows())) {
        throw Error(Errc::invalid_argument, "cluster keys do not match design rows");
    }
    std::set<std::string> seen;
    for (const auto& n : d.names) {
        if (!seen.insert(n).second) throw Error(Errc::invalid_argument, "duplicate regressor name " + n);
    }
    if (!all_finite(d.x) || !d.y.allFinite()) {
        throw Error(Errc::invalid_argument, "design contains non-finite values");
    }
    if (d.x.rows() <= d.x.cols()) {
        throw Error(Errc::insufficient_observations, "need more rows (" + std::to_string(d.x.rows()) +
                                                         ") than regressors (" + std::to_string(d.x.cols()) + ")");
    }
    if (!(d.x.col(0).array() == 1.0).all()) throw Error(Errc::invalid_argument, "intercept column must be all ones");
    for (Eigen::Index j = 1; j < d.x.cols(); ++j) {
        if (is_constant(d.x.col(j))) {
            throw Error(Errc::rank_deficient,
                        "regressor " + d.names[static_cast<std::size_t>(j)] + " is constant, collinear with the intercept");
        }
    }
}

} // namespace

std::string_view to_string(SeKind kind) noexcept {
    switch (kind) {
    case SeKind::classical: return "classical";
    case SeKind::heteroskedasticity_robust: return "heteroskedasticity_robust";
    case SeKind::cluster_by_date: return "cluster_by_date";
    }
    return "unknown";
}

SeKind se_kind_from_string(std::string_view text) {
    if (text == "classical") return SeKind::classical;
    if (text == "heteroskedasticity_robust" || text == "hc1") return SeKind::heteroskedasticity_robust;
    if (text == "cluster_by_date" || text == "cluster") return SeKind::cluster_by_date;
    throw Error(Errc::invalid_argument, "unknown standard-error kind '" + std::string(text) + "'");
}

DesignMatrix DesignMatrix::with_intercept(const Eigen::VectorXd& y) {
    DesignMatrix d;
    d.y = y;
    d.x = Eigen::MatrixXd::Ones(y.size(), 1);
    d.names.emplace_back(kIntercept);
    return d;
}

DesignMatrix& DesignMatrix::add(std::string name, const Eigen::VectorXd& column) {
    if (column.size() != x.rows()) {
        throw Error(Errc::invalid_argument, "column " + name + " has the wrong number of rows");
    }
    x.conservativeResize(Eigen::NoChange, x.cols() + 1);
    x.col(x.cols() - 1) = column;
    names.push_back(std::move(name));
    return *this;
}

Eigen::Index RegressionFit::index(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(Errc::invalid_argument, "no regressor named " + std::string(name));
    return static_cast<Eigen::Index>(it - names.begin());
}

RegressionFit ols(const DesignMatrix& design, SeKind se_kind) {
    validate(design);
    if (se_kind == SeKind::cluster_by_date && design.clusters.empty()) {
        throw Error(Errc::invalid_argument, "cluster-by-date standard errors need cluster keys");
    }
    const Eigen::Index n = design.x.rows();
    const Eigen::Index p = design.x.cols();

    const Eigen::VectorXd norms = design.x.colwise().norm().transpose();
    const Eigen::VectorXd inv_norms = norms.cwiseInverse();
    const Eigen::MatrixXd scaled = design.x * inv_norms.asDiagonal();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
    const double largest = diag.maxCoeff();
    const double smallest = diag.minCoeff();
    if (qr.rank() < p || smallest == 0.0 || (largest / smallest) * (largest / smallest) > kConditionLimit) {
        throw Error(Errc::rank_deficient, "design columns are collinear (condition limit exceeded)");
    }

    RegressionFit fit;
    fit.names = design.names;
    fit.n_obs = static_cast<std::size_t>(n);
    fit.se_kind = se_kind;
    fit.coef = inv_norms.cwiseProduct(qr.solve(design.y));
    fit.residuals = design.y - design.x * fit.coef;

    // (X'X)^-1 = D P R^-1 R^-T P' D with D = diag(1/norm).
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd scaled_inv = qr.colsPermutation() * (r_inv * r_inv.transpose()) *
                                 qr.colsPermutation().transpose();
    const Eigen::MatrixXd bread = inv_norms.asDiagonal() * scaled_inv * inv_norms.asDiagonal();

    const double rss = fit.residuals.squaredNorm();
    const double dof = static_cast<double>(n - p);
    switch (se_kind) {
    case SeKind::classical:
        fit.covariance = (rss / dof) * bread;
        break;
    case SeKind::heteroskedasticity_robust: {
        const Eigen::MatrixXd xe = design.x.array().colwise() * fit.residuals.array();
        const Eigen::MatrixXd meat = xe.transpose() * xe;
        fit.covariance = (static_cast<double>(n) / dof) * bread * meat * bread;
        break;
    }
    case SeKind::cluster_by_date: {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return design.clusters[static_cast<std::size_t>(a)] < design.clusters[static_cast<std::size_t>(b)];
        });
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
        std::size_t groups = 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Eigen::Index row = order[k];
            score += design.x.row(row).transpose() * fit.residuals(row);
            const bool last = k + 1 == order.size() ||
                              design.clusters[static_cast<std::size_t>(order[k + 1])] !=
                                  design.clusters[static_cast<std::size_t>(row)];
            if (last) {
                meat += score * score.transpose();
                score.setZero();
                ++groups;
            }
        }
        if (groups < 2) throw Error(Errc::insufficient_observations, "cluster-robust errors need at least two clusters");
        const double g = static_cast<double>(groups);
        const double factor = g / (g - 1.0) * (static_cast<double>(n) - 1.0) / dof;
        fit.covariance = factor * bread * meat * bread;
        fit.n_clusters = groups;
        break;
    }
    }
    fit.se = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();

    const double mean = design.y.mean();
    const double tss = (design.y.array() - mean).square().sum();
    fit.r_squared = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 1.0;
    return fit;
}

BetaNeutral beta_neutral_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
    if (y.size() != x.size()) throw Error(Errc::invalid_argument, "series lengths differ");
    if (y.size() < 3) throw Error(Errc::insufficient_observations, "need at least three observations");
    if (!y.allFinite() || !x.allFinite()) throw Error(Errc::invalid_argument, "series contain non-finite values");
    const double x_mean = x.mean();
    const double y_mean = y.mean();
    const Eigen::ArrayXd dx = x.array() - x_mean;
    const double sxx = dx.square().sum();
    if (!(sxx > 0.0)) throw Error(Errc::degenerate_regressor, "regressor has zero variance");
    BetaNeutral out;
    out.beta = (dx * (y.array() - y_mean)).sum() / sxx;
    out.alpha = y_mean - out.beta * x_mean;
    out.residual = (y.array() - out.alpha - out.beta * x.array()).matrix();
    return out;
}

Controls Controls::without_constant_columns() const {
    Controls out;
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        if (!is_constant(values.col(col))) keep.push_back(col);
    }
    out.values.resize(values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.names.push_back(names[static_cast<std::size_t>(keep[k])]);
        out.values.col(static_cast<Eigen::Index>(k)) = values.col(keep[k]);
    }
    return out;
}

InteractionFit interaction_fit(const EnvironmentRows& rows, const std::string& base_env,
                               const InteractionOptions& options) {
    const auto n = rows.y.size();
    if (rows.market.size() != n || rows.environment.size() != static_cast<std::size_t>(n)) {
        throw Error(Errc::invalid_argument, "environment rows have inconsistent lengths");
    }
    if (!rows.controls.empty() && rows.controls.values.rows() != n) {
        throw Error(Errc::invalid_argument, "control rows do not match the response");
    }

    std::map<std::string, std::size_t> counts;
    for (const auto& e : rows.environment) {
        if (e.empty()) throw Error(Errc::invalid_argument, "every row needs an environment label");
        ++counts[e];
    }
    if (!counts.contains(base_env)) {
        throw Error(Errc::missing_base_env, "base environment '" + base_env + "' has no rows");
    }
    for (const auto& [env, count] : counts) {
        if (env != base_env && count < options.min_rows) {
            throw Error(Errc::thin_environment, "environment '" + env + "' has " + std::to_string(count) +
                                                    " rows, below the floor of " + std::to_string(options.min_rows));
        }
    }

    InteractionFit out;
    out.base_environment = base_env;

    DesignMatrix design = DesignMatrix::with_intercept(rows.y);
    design.clusters = rows.clusters;
    design.add("market", rows.market);
    std::vector<std::string> others;
    for (const auto& [env, count] : counts) {
        if (env == base_env) continue;
        others.push_back(env);
        Eigen::VectorXd indicator(n);
        for (Eigen::Index r = 0; r < n; ++r) indicator(r) = rows.environment[static_cast<std::size_t>(r)] == env;
        design.add("env[" + env + "]", indicator);
        design.add("market:env[" + env + "]", rows.market.cwiseProduct(indicator));
    }
    if (!rows.controls.empty()) {
        const Controls kept = rows.controls.without_constant_columns();
        for (const auto& name : rows.controls.names) {
            if (std::find(kept.names.begin(), kept.names.end(), name) == kept.names.end()) {
                out.dropped_controls.push_back(name);
            }
        }
        for (std::size_t j = 0; j < kept.names.size(); ++j) {
            design.add(kept.names[j], kept.values.col(static_cast<Eigen::Index>(j)));
        }
    }

    out.fit = ols(design, options.se_kind);
    const Eigen::Index b = out.fit.index("market");
    out.betas.push_back({base_env, out.fit.coef(b), out.fit.se(b), counts[base_env]});
    for (const auto& env : others) {
        const Eigen::Index d = out.fit.index("market:env[" + env + "]");
        const double var = out.fit.covariance(b, b) + out.fit.covariance(d, d) + 2.0 * out.fit.covariance(b, d);
        out.betas.push_back({env, out.fit.coef(b) + out.fit.coef(d), std::sqrt(std::max(var, 0.0)), counts[env]});
    }
    return out;
}

LagProfile lag_profile(const std::vector<LagBlock>& blocks, int max_lag, SeKind se_kind) {
    if (max_lag < 0) throw Error(Errc::invalid_argument, "max_lag must be nonnegative");
    if (blocks.empty()) throw Error(Errc::insufficient_observations, "no series supplied");
    const auto& control_names = blocks.front().controls.names;
    const auto n_controls = static_cast<Eigen::Index>(control_names.size());
    const Eigen::Index width = max_lag + 1 + n_controls;

    std::vector<double> ys;
    std::vector<double> cells;  // row-major, `width` per row
    std::vector<std::int64_t> clusters;
    const bool want_clusters = se_kind == SeKind::cluster_by_date;

    for (const auto& block : blocks) {
        const Eigen::Index n = block.y.size();
        if (block.x.size() != n) throw Error(Errc::invalid_argument, "lag block x and y lengths differ");
        if (block.controls.names != control_names) {
            throw Error(Errc::invalid_argument, "all lag blocks must share the same controls");
        }
        if (n_controls > 0 && block.controls.values.rows() != n) {
            throw Error(Errc::invalid_argument, "lag block controls do not match the series length");
        }
        if (want_clusters && block.time_ids.size() != static_cast<std::size_t>(n)) {
            throw Error(Errc::invalid_argument, "cluster-by-date lag profile needs a time id per row");
        }
        std::vector<double> row(static_cast<std::size_t>(width));
        for (Eigen::Index t = max_lag; t < n; ++t) {
            bool finite = std::isfinite(block.y(t));
            for (int k = 0; k <= max_lag; ++k) {
                row[static_cast<std::size_t>(k)] = block.x(t - k);
                finite = finite && std::isfinite(row[static_cast<std::size_t>(k)]);
            }
            for (Eigen::Index j = 0; j < n_controls; ++j) {
                const double v = block.controls.values(t, j);
                row[static_cast<std::size_t>(max_lag + 1 + j)] = v;
                finite = finite && std::isfinite(v);
            }
            if (!finite) continue;
            ys.push_back(block.y(t));
            cells.insert(cells.end(), row.begin(), row.end());
            if (want_clusters) clusters.push_back(block.time_ids[static_cast<std::size_t>(t)]);
        }
    }

    const auto rows = static_cast<Eigen::Index>(ys.size());
    if (rows <= width + 1) {
        throw Error(Errc::insufficient_observations,
                    "lag profile has " + std::to_string(rows) + " usable rows for " + std::to_string(width + 1) +
                        " regressors");
    }
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), rows);
    const Eigen::MatrixXd x =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cells.data(), rows, width);

    DesignMatrix design = DesignMatrix::with_intercept(y);
    design.clusters = std::move(clusters);
    for (int k = 0; k <= max_lag; ++k) design.add("lag_" + std::to_string(k), x.col(k));
    for (Eigen::Index j = 0; j < n_controls; ++j) {
        design.add(control_names[static_cast<std::size_t>(j)], x.col(max_lag + 1 + j));
    }

    LagProfile out;
    out.fit = ols(design, se_kind);
    for (int k = 0; k <= max_lag; ++k) {
        const Eigen::Index idx = out.fit.index("lag_" + std::to_string(k));
        out.lags.push_back({k, out.fit.coef(idx), out.fit.se(idx)});
    }
    return out;
}

LagProfile lag_profile(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Controls& controls,
                       int max_lag, SeKind se_kind) {
    LagBlock block{y, x, controls, {}};
    if (se_kind == SeKind::cluster_by_date) {
        block.time_ids.resize(static_cast<std::size_t>(y.size()));
        std::iota(block.time_ids.begin(), block.time_ids.end(), std::int64_t{0});
    }
    return lag_profile(std::vector<LagBlock>{std::move(block)}, max_lag, se_kind);
}

} // namespace capmscm::regression
