#include "capmscm/analytics.hpp"

#include "capmscm/error.hpp"
#include "capmscm/format.hpp"

#include <cmath>
#include <ostream>

namespace capmscm::analytics {

namespace {

void check_sigma(double s, const char* name) {
    if (!std::isfinite(s) || s < 0.0) {
        throw Error(Errc::invalid_argument, std::string(name) + " must be a finite nonnegative number");
    }
}

} // namespace

void ForkParams::validate() const {
    if (!std::isfinite(a) || !std::isfinite(b)) throw Error(Errc::invalid_argument, "a and b must be finite");
    if (a == 0.0) throw Error(Errc::invalid_argument, "fork needs a != 0");
    check_sigma(sigma_z, "sigma_z");
    check_sigma(sigma_x, "sigma_x");
    check_sigma(sigma_y, "sigma_y");
    if (sigma_z == 0.0 && sigma_x == 0.0) throw Error(Errc::invalid_argument, "Var(X) is zero");
}

void ChainParams::validate() const {
    if (!std::isfinite(a) || !std::isfinite(c)) throw Error(Errc::invalid_argument, "a and c must be finite");
    check_sigma(sigma_z, "sigma_z");
    check_sigma(sigma_x, "sigma_x");
    check_sigma(sigma_y, "sigma_y");
    if (a * a * sigma_z * sigma_z + sigma_x * sigma_x <= 0.0) {
        throw Error(Errc::invalid_argument, "Var(X) is zero");
    }
}

ForkBeta fork_beta(const ForkParams& p) {
    p.validate();
    const double signal = p.a * p.a * p.sigma_z * p.sigma_z;
    ForkBeta out;
    out.lambda = signal / (signal + p.sigma_x * p.sigma_x);
    out.signal_ratio = p.b / p.a;
    out.beta = out.signal_ratio * out.lambda;
    return out;
}

double fork_residual_loading(const ForkParams& p) {
    p.validate();
    const double noise = p.sigma_x * p.sigma_x;
    return p.b * noise / (p.a * p.a * p.sigma_z * p.sigma_z + noise);
}

double chain_beta(const ChainParams& p) {
    p.validate();
    return p.c;
}

std::vector<CurvePoint> attenuation_curve(const ForkParams& p, const std::vector<double>& sigma_x_grid) {
    std::vector<CurvePoint> out;
    out.reserve(sigma_x_grid.size());
    for (const double s : sigma_x_grid) {
        ForkParams q = p;
        q.sigma_x = s;
        const ForkBeta fb = fork_beta(q);
        out.push_back({s, fb.beta, fb.lambda, fork_residual_loading(q)});
    }
    return out;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 1 || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
        throw Error(Errc::invalid_argument, "grid needs finite lo <= hi and at least one point");
    }
    if (points == 1) return {lo};
    std::vector<double> grid;
    for (int k = 0; k < points; ++k) grid.push_back(lo + (hi - lo) * k / (points - 1));
    return grid;
}

std::vector<double> default_sigma_grid() { return linear_grid(0.0, 5.0, 21); }

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    out << "sigma_x,beta,lambda,residual_loading\n";
    for (const auto& pt : curve) {
        out << format_number(pt.sigma_x) << ',' << format_number(pt.beta) << ',' << format_number(pt.lambda) << ','
            << format_number(pt.residual_loading) << '\n';
    }
}

} // namespace capmscm::analytics
