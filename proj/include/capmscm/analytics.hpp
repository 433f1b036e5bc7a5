#pragma once

// Population quantities for the fork and chain SEMs: the attenuated fork
// slope, the residual loading left after hedging, and the chain slope.

#include <iosfwd>
#include <vector>

namespace capmscm::analytics {

/// X = a Z + U_X, Y = b Z + U_Y.
struct ForkParams {
    double a = 1.0;
    double b = 1.0;
    double sigma_z = 1.0;
    double sigma_x = 0.0;
    double sigma_y = 1.0;

    /// Throws Error(invalid_argument): a == 0, negative or non-finite sigma,
    /// or sigma_z == sigma_x == 0.
    void validate() const;
};

/// Z -> X -> Y with Y_t = c X_{t-1} + U_Y.
struct ChainParams {
    double a = 1.0;
    double c = 1.0;
    double sigma_z = 1.0;
    double sigma_x = 0.0;
    double sigma_y = 1.0;

    void validate() const;
};

struct ForkBeta {
    double beta = 0.0;
    double lambda = 0.0;
    double signal_ratio = 0.0;  // b / a
};

ForkBeta fork_beta(const ForkParams& p);

/// Coefficient on Z of Y - beta X, b * sigma_x^2 / (a^2 sigma_z^2 + sigma_x^2).
double fork_residual_loading(const ForkParams& p);

double chain_beta(const ChainParams& p);

struct CurvePoint {
    double sigma_x = 0.0;
    double beta = 0.0;
    double lambda = 0.0;
    double residual_loading = 0.0;
};

/// One row per grid value, in grid order. The sigma_x field of `p` is
/// ignored.
std::vector<CurvePoint> attenuation_curve(const ForkParams& p, const std::vector<double>& sigma_x_grid);

/// 0, 0.25, ..., 5.
std::vector<double> default_sigma_grid();

/// Evenly spaced inclusive grid; `points` >= 1.
std::vector<double> linear_grid(double lo, double hi, int points);

/// Header sigma_x,beta,lambda,residual_loading then one line per point.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

} // namespace capmscm::analytics
