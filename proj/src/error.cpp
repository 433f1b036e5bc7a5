#include "capmscm/error.hpp"

namespace capmscm {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::invalid_dag: return "invalid_dag";
    case Errc::unknown_field: return "unknown_field";
    case Errc::rank_deficient: return "rank_deficient";
    case Errc::insufficient_observations: return "insufficient_observations";
    case Errc::degenerate_regressor: return "degenerate_regressor";
    case Errc::missing_base_env: return "missing_base_env";
    case Errc::thin_environment: return "thin_environment";
    case Errc::io_error: return "io_error";
    case Errc::parse_error: return "parse_error";
    case Errc::duplicate_key: return "duplicate_key";
    case Errc::unknown_column: return "unknown_column";
    case Errc::missing_market_id: return "missing_market_id";
    case Errc::empty_intersection: return "empty_intersection";
    case Errc::coverage_gap: return "coverage_gap";
    case Errc::unlabeled_assets: return "unlabeled_assets";
    case Errc::overlapping_episodes: return "overlapping_episodes";
    case Errc::insufficient_lookback: return "insufficient_lookback";
    case Errc::too_few_events: return "too_few_events";
    case Errc::missing_market_series: return "missing_market_series";
    case Errc::insufficient_history: return "insufficient_history";
    case Errc::zero_full_beta: return "zero_full_beta";
    }
    return "unknown";
}

} // namespace capmscm
