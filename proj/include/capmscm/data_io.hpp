#pragma once

// File ingestion and calendar alignment: price/return tables, the return
// panel, event calendars, macro controls and environment labels.

#include <Eigen/Core>

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capmscm::io {

using Date = std::chrono::sys_days;

/// Strict YYYY-MM-DD.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Weekdays starting at `first` (moved forward to a weekday if needed).
std::vector<Date> business_days(Date first, std::size_t count);

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based file line of each row

    std::size_t column(std::string_view name) const;  // throws unknown_column
    std::optional<std::size_t> find_column(std::string_view name) const;
};

/// Comma separated, optional double quotes, header row required.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

/// Empty cell -> nullopt. Anything else must be a finite decimal number.
std::optional<double> parse_cell(std::string_view cell, const std::string& where);

// ---------------------------------------------------------------------------
// Tables and panels

struct TableSchema {
    std::string date_column = "date";
    bool wide = true;
    std::string id_column = "id";
    std::string value_column = "value";
};

/// Dates x ids; missing cells are NaN. Dates and ids are sorted.
struct PriceTable {
    std::vector<Date> dates;
    std::vector<std::string> ids;
    Eigen::MatrixXd values;

    std::optional<std::size_t> id_index(std::string_view id) const;
};

PriceTable load_prices_csv(const std::filesystem::path& path, const TableSchema& schema = {});
PriceTable table_from_csv(const CsvTable& csv, const TableSchema& schema, const std::string& source);

/// Union of tables. Two observed values for the same (date, id) are a
/// duplicate_key error. The result does not depend on argument order.
PriceTable merge_tables(const std::vector<PriceTable>& tables);

enum class PanelMode { from_prices, from_returns };

struct ReturnPanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Eigen::MatrixXd asset_returns;  // dates x assets, log returns
    Eigen::VectorXd market_return;
    std::string market_id;
    std::map<std::string, std::string> sectors;
    std::size_t dropped_rows = 0;

    std::size_t size() const { return dates.size(); }
    std::optional<std::size_t> asset_index(std::string_view asset) const;
    std::optional<std::size_t> date_index(Date d) const;
};

/// Computes log returns in from_prices mode and keeps only dates on which
/// the market and every asset are observed. Errors: missing_market_id,
/// empty_intersection.
ReturnPanel build_panel(const PriceTable& table, const std::string& market_id,
                        const std::map<std::string, std::string>& sector_map = {},
                        PanelMode mode = PanelMode::from_returns);

/// Wide CSV: date, market, assets..., shortest round-trip numbers.
void write_panel_csv(std::ostream& out, const ReturnPanel& panel);

/// Two columns: asset, sector.
std::map<std::string, std::string> load_sector_map(const std::filesystem::path& path);

/// Columns asset, weight and optionally date. With dates, the latest date's
/// weights are used.
std::map<std::string, double> load_weights(const std::filesystem::path& path);

struct EventCalendar {
    std::string name;
    std::vector<Date> dates;  // sorted, unique

    /// Panel rows of the event dates that fall on panel dates.
    std::vector<std::size_t> rows_in(const ReturnPanel& panel) const;
};

/// A `date` column; duplicate dates are a duplicate_key error.
EventCalendar load_events(const std::filesystem::path& path, std::string name = "events");

// ---------------------------------------------------------------------------
// Controls

/// Date-indexed controls aligned with a panel. `common` series apply to every
/// asset; `sector_ret` (when present) holds each asset's sector return.
struct ShockControls {
    std::vector<Date> dates;
    std::map<std::string, Eigen::VectorXd> common;
    std::optional<Eigen::MatrixXd> sector_ret;  // dates x panel assets
    bool standardized = false;

    bool empty() const { return common.empty() && !sector_ret; }
    /// Common names in map order, then "sector_ret".
    std::vector<std::string> names() const;
    /// Control values of one (date row, asset column) pair, in names() order.
    void fill_row(std::size_t row, std::size_t asset, double* out) const;
};

/// Macro levels at each panel date, forward-filled over at most
/// `max_fill_days` calendar days, plus the level before the first date.
struct AlignedLevels {
    Eigen::VectorXd levels;
    double previous = 0.0;
};

inline constexpr int kMaxForwardFillDays = 3;

AlignedLevels align_levels(const std::vector<Date>& dates, const PriceTable& macro, const std::string& column,
                           int max_fill_days = kMaxForwardFillDays);

struct ControlOptions {
    bool standardize = false;
    bool sector = true;  // use sector returns when supplied
};

/// Macro columns vix_level, dgs10_level and dxy_level (each optional) become
/// delta_vix, delta_dgs10 and dxy_ret. Sector returns are a table keyed by
/// sector label. Errors: coverage_gap, unlabeled_assets.
ShockControls build_controls(const ReturnPanel& panel, const PriceTable& macro,
                             const PriceTable* sector_returns = nullptr, const ControlOptions& options = {});

/// Controls given directly as date-indexed columns (no differencing).
ShockControls controls_from_table(const ReturnPanel& panel, const PriceTable& table, bool standardize = false);

/// Mean 0, sample sd 1 over the given rows; constant series are only centred.
void standardize(Eigen::VectorXd& v);

void write_controls_csv(std::ostream& out, const ShockControls& controls);

// ---------------------------------------------------------------------------
// Environments

enum class EnvScheme { vix_terciles, rates_trend_60d, usd_trend_60d, episodes };

std::string_view to_string(EnvScheme s) noexcept;
EnvScheme env_scheme_from_string(std::string_view text);

struct Episode {
    std::string label;
    Date start;
    Date end;  // inclusive
};

struct LabelParams {
    int lookback = 60;
    std::vector<Episode> episodes;
    std::string base_label = "Base";
};

/// One label per panel date; an empty label marks a date without enough
/// lookback. Tercile labels VIXLow/VIXMid/VIXHigh, trend labels
/// RatesUp/RatesDown and USDUp/USDDown (a zero change is Down).
struct EnvironmentLabeling {
    EnvScheme scheme = EnvScheme::episodes;
    std::vector<std::string> labels;
    std::vector<Episode> episodes;
    std::size_t unlabeled = 0;
    std::vector<std::string> notes;
};

/// `levels` are the scheme's underlying series at panel dates (VIX for
/// terciles, DGS10 or DXY for trends); unused for episodes.
EnvironmentLabeling label_environments(const ReturnPanel& panel, EnvScheme scheme, const Eigen::VectorXd* levels,
                                       const LabelParams& params = {});

/// Columns label, start, end.
std::vector<Episode> load_episodes(const std::filesystem::path& path);

} // namespace capmscm::io
