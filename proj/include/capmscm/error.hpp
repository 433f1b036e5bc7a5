#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capmscm {

/// Failure categories shared by every module. The names double as the
/// machine-readable `error` field the CLI writes on failure.
enum class Errc {
    invalid_argument,
    invalid_dag,
    unknown_field,
    rank_deficient,
    insufficient_observations,
    degenerate_regressor,
    missing_base_env,
    thin_environment,
    io_error,
    parse_error,
    duplicate_key,
    unknown_column,
    missing_market_id,
    empty_intersection,
    coverage_gap,
    unlabeled_assets,
    overlapping_episodes,
    insufficient_lookback,
    too_few_events,
    missing_market_series,
    insufficient_history,
    zero_full_beta,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace capmscm
