#include "capmscm/data_io.hpp"

#include "capmscm/error.hpp"
#include "capmscm/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>

namespace capmscm::io {

namespace {

using namespace std::chrono;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::string at_line(const std::string& source, std::size_t line) {
    return source + " line " + std::to_string(line);
}

std::vector<std::string> split_line(std::string_view line, const std::string& where) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += ch;
            }
        } else if (ch == '"' && trim(cell).empty()) {
            quoted = true;
            was_quoted = true;
            cell.clear();
        } else if (ch == ',') {
            cells.emplace_back(was_quoted ? cell : std::string(trim(cell)));
            cell.clear();
            was_quoted = false;
        } else {
            cell += ch;
        }
    }
    if (quoted) throw Error(Errc::parse_error, where + ": unterminated quote");
    cells.emplace_back(was_quoted ? cell : std::string(trim(cell)));
    return cells;
}

Eigen::MatrixXd nan_matrix(std::size_t rows, std::size_t cols) {
    return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), kNaN);
}

template <class T>
std::size_t position(const std::vector<T>& sorted, const T& value) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
}

} // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    const auto bad = [&] { return Error(Errc::parse_error, "invalid date '" + std::string(text) + "', want YYYY-MM-DD"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    const auto num = [&](std::size_t from, std::size_t len, auto& out) {
        const char* first = text.data() + from;
        const auto res = std::from_chars(first, first + len, out);
        if (res.ec != std::errc{} || res.ptr != first + len) throw bad();
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw bad();
    return sys_days{ymd};
}

std::string format_date(Date d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<Date> business_days(Date first, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    Date d = first;
    while (out.size() < count) {
        const weekday wd{d};
        if (wd != Saturday && wd != Sunday) out.push_back(d);
        d += days{1};
    }
    return out;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::column(std::string_view name) const {
    if (const auto c = find_column(name)) return *c;
    throw Error(Errc::unknown_column, "no column named '" + std::string(name) + "'");
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto cells = split_line(line, at_line(source, line_no));
        if (!have_header) {
            std::set<std::string> seen;
            for (const auto& h : cells) {
                if (h.empty()) throw Error(Errc::parse_error, at_line(source, line_no) + ": empty column name");
                if (!seen.insert(h).second) {
                    throw Error(Errc::duplicate_key, at_line(source, line_no) + ": duplicate column '" + h + "'");
                }
            }
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw Error(Errc::parse_error, at_line(source, line_no) + ": expected " +
                                               std::to_string(table.header.size()) + " fields, found " +
                                               std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw Error(Errc::parse_error, source + ": missing header row");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    return parse_csv(in, path.string());
}

std::optional<double> parse_cell(std::string_view cell, const std::string& where) {
    cell = trim(cell);
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = cell.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, cell.data() + cell.size(), value);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw Error(Errc::parse_error, where + ": '" + std::string(cell) + "' is not a finite number");
    }
    return value;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> PriceTable::id_index(std::string_view id) const {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids.begin());
}

PriceTable table_from_csv(const CsvTable& csv, const TableSchema& schema, const std::string& source) {
    const std::size_t date_col = csv.column(schema.date_column);
    struct Cell {
        Date date;
        std::string id;
        double value;
    };
    std::vector<Cell> cells;
    std::set<Date> dates;
    std::set<std::string> ids;

    if (schema.wide) {
        for (std::size_t c = 0; c < csv.header.size(); ++c) {
            if (c != date_col) ids.insert(csv.header[c]);
        }
        for (std::size_t r = 0; r < csv.rows.size(); ++r) {
            const auto& row = csv.rows[r];
            const std::string where = at_line(source, csv.line_numbers[r]);
            Date d;
            try {
                d = parse_date(row[date_col]);
            } catch (const Error& e) {
                throw Error(Errc::parse_error, where + ": " + e.what());
            }
            if (!dates.insert(d).second) {
                throw Error(Errc::duplicate_key, where + ": duplicate date " + format_date(d));
            }
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c == date_col) continue;
                if (const auto v = parse_cell(row[c], where + " column '" + csv.header[c] + "'")) {
                    cells.push_back({d, csv.header[c], *v});
                }
            }
        }
    } else {
        const std::size_t id_col = csv.column(schema.id_column);
        const std::size_t value_col = csv.column(schema.value_column);
        std::set<std::pair<Date, std::string>> seen;
        for (std::size_t r = 0; r < csv.rows.size(); ++r) {
            const auto& row = csv.rows[r];
            const std::string where = at_line(source, csv.line_numbers[r]);
            Date d;
            try {
                d = parse_date(row[date_col]);
            } catch (const Error& e) {
                throw Error(Errc::parse_error, where + ": " + e.what());
            }
            const std::string& id = row[id_col];
            if (id.empty()) throw Error(Errc::parse_error, where + ": empty id");
            if (!seen.emplace(d, id).second) {
                throw Error(Errc::duplicate_key, where + ": duplicate (" + format_date(d) + ", " + id + ")");
            }
            dates.insert(d);
            ids.insert(id);
            if (const auto v = parse_cell(row[value_col], where + " column '" + schema.value_column + "'")) {
                cells.push_back({d, id, *v});
            }
        }
    }

    PriceTable table;
    table.dates.assign(dates.begin(), dates.end());
    table.ids.assign(ids.begin(), ids.end());
    table.values = nan_matrix(table.dates.size(), table.ids.size());
    for (const auto& c : cells) {
        table.values(static_cast<Eigen::Index>(position(table.dates, c.date)),
                     static_cast<Eigen::Index>(position(table.ids, c.id))) = c.value;
    }
    return table;
}

PriceTable load_prices_csv(const std::filesystem::path& path, const TableSchema& schema) {
    return table_from_csv(read_csv(path), schema, path.string());
}

PriceTable merge_tables(const std::vector<PriceTable>& tables) {
    std::set<Date> dates;
    std::set<std::string> ids;
    for (const auto& t : tables) {
        dates.insert(t.dates.begin(), t.dates.end());
        ids.insert(t.ids.begin(), t.ids.end());
    }
    PriceTable out;
    out.dates.assign(dates.begin(), dates.end());
    out.ids.assign(ids.begin(), ids.end());
    out.values = nan_matrix(out.dates.size(), out.ids.size());
    for (const auto& t : tables) {
        for (std::size_t c = 0; c < t.ids.size(); ++c) {
            const auto oc = static_cast<Eigen::Index>(position(out.ids, t.ids[c]));
            for (std::size_t r = 0; r < t.dates.size(); ++r) {
                const double v = t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                if (std::isnan(v)) continue;
                double& slot = out.values(static_cast<Eigen::Index>(position(out.dates, t.dates[r])), oc);
                if (!std::isnan(slot)) {
                    throw Error(Errc::duplicate_key,
                                "two values for (" + format_date(t.dates[r]) + ", " + t.ids[c] + ")");
                }
                slot = v;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> ReturnPanel::asset_index(std::string_view asset) const {
    const auto it = std::find(assets.begin(), assets.end(), asset);
    if (it == assets.end()) return std::nullopt;
    return static_cast<std::size_t>(it - assets.begin());
}

std::optional<std::size_t> ReturnPanel::date_index(Date d) const {
    const auto it = std::lower_bound(dates.begin(), dates.end(), d);
    if (it == dates.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - dates.begin());
}

ReturnPanel build_panel(const PriceTable& table, const std::string& market_id,
                        const std::map<std::string, std::string>& sector_map, PanelMode mode) {
    const auto market_col = table.id_index(market_id);
    if (!market_col) throw Error(Errc::missing_market_id, "market id '" + market_id + "' not in table");
    if (table.ids.size() < 2) throw Error(Errc::invalid_argument, "table holds no assets besides the market");

    Eigen::MatrixXd returns = table.values;
    std::size_t first_row = 0;
    if (mode == PanelMode::from_prices) {
        if ((table.values.array() <= 0.0).any()) {
            throw Error(Errc::invalid_argument, "prices must be positive to take logs");
        }
        returns = nan_matrix(table.dates.size(), table.ids.size());
        const auto n = static_cast<Eigen::Index>(table.dates.size());
        for (Eigen::Index r = 1; r < n; ++r) {
            returns.row(r) = table.values.row(r).array().log() - table.values.row(r - 1).array().log();
        }
        first_row = 1;
    }

    ReturnPanel panel;
    panel.market_id = market_id;
    std::vector<Eigen::Index> asset_cols;
    for (std::size_t c = 0; c < table.ids.size(); ++c) {
        if (c == *market_col) continue;
        panel.assets.push_back(table.ids[c]);
        asset_cols.push_back(static_cast<Eigen::Index>(c));
        if (const auto it = sector_map.find(table.ids[c]); it != sector_map.end()) {
            panel.sectors[table.ids[c]] = it->second;
        }
    }

    std::vector<Eigen::Index> keep;
    for (std::size_t r = first_row; r < table.dates.size(); ++r) {
        if (returns.row(static_cast<Eigen::Index>(r)).allFinite()) {
            keep.push_back(static_cast<Eigen::Index>(r));
        } else {
            ++panel.dropped_rows;
        }
    }
    if (keep.empty()) throw Error(Errc::empty_intersection, "no date has every series observed");

    const auto rows = static_cast<Eigen::Index>(keep.size());
    panel.asset_returns.resize(rows, static_cast<Eigen::Index>(asset_cols.size()));
    panel.market_return.resize(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        panel.dates.push_back(table.dates[static_cast<std::size_t>(keep[static_cast<std::size_t>(k)])]);
        const Eigen::Index r = keep[static_cast<std::size_t>(k)];
        panel.market_return(k) = returns(r, static_cast<Eigen::Index>(*market_col));
        for (std::size_t a = 0; a < asset_cols.size(); ++a) {
            panel.asset_returns(k, static_cast<Eigen::Index>(a)) = returns(r, asset_cols[a]);
        }
    }
    return panel;
}

void write_panel_csv(std::ostream& out, const ReturnPanel& panel) {
    out << "date," << panel.market_id;
    for (const auto& a : panel.assets) out << ',' << a;
    out << '\n';
    for (std::size_t r = 0; r < panel.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        out << format_date(panel.dates[r]) << ',' << format_exact(panel.market_return(row));
        for (Eigen::Index a = 0; a < panel.asset_returns.cols(); ++a) {
            out << ',' << format_exact(panel.asset_returns(row, a));
        }
        out << '\n';
    }
}

std::map<std::string, std::string> load_sector_map(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t asset = csv.column("asset");
    const std::size_t sector = csv.column("sector");
    std::map<std::string, std::string> out;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        if (row[sector].empty()) continue;
        if (!out.emplace(row[asset], row[sector]).second) {
            throw Error(Errc::duplicate_key, at_line(path.string(), csv.line_numbers[r]) + ": duplicate asset " + row[asset]);
        }
    }
    return out;
}

std::map<std::string, double> load_weights(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t asset = csv.column("asset");
    const std::size_t weight = csv.column("weight");
    const auto date_col = csv.find_column("date");

    std::optional<Date> latest;
    if (date_col) {
        for (const auto& row : csv.rows) {
            const Date d = parse_date(row[*date_col]);
            if (!latest || d > *latest) latest = d;
        }
    }
    std::map<std::string, double> out;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        if (date_col && parse_date(row[*date_col]) != *latest) continue;
        const std::string where = at_line(path.string(), csv.line_numbers[r]);
        const auto w = parse_cell(row[weight], where);
        if (!w) throw Error(Errc::parse_error, where + ": missing weight");
        if (!out.emplace(row[asset], *w).second) throw Error(Errc::duplicate_key, where + ": duplicate asset " + row[asset]);
    }
    return out;
}

std::vector<std::size_t> EventCalendar::rows_in(const ReturnPanel& panel) const {
    std::vector<std::size_t> rows;
    for (const Date d : dates) {
        if (const auto r = panel.date_index(d)) rows.push_back(*r);
    }
    return rows;
}

EventCalendar load_events(const std::filesystem::path& path, std::string name) {
    const CsvTable csv = read_csv(path);
    const std::size_t date_col = csv.column("date");
    EventCalendar cal;
    cal.name = std::move(name);
    std::set<Date> seen;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string where = at_line(path.string(), csv.line_numbers[r]);
        Date d;
        try {
            d = parse_date(csv.rows[r][date_col]);
        } catch (const Error& e) {
            throw Error(Errc::parse_error, where + ": " + e.what());
        }
        if (!seen.insert(d).second) throw Error(Errc::duplicate_key, where + ": duplicate event date " + format_date(d));
    }
    cal.dates.assign(seen.begin(), seen.end());
    return cal;
}

// ---------------------------------------------------------------------------

std::vector<std::string> ShockControls::names() const {
    std::vector<std::string> out;
    for (const auto& [name, series] : common) out.push_back(name);
    if (sector_ret) out.emplace_back("sector_ret");
    return out;
}

void ShockControls::fill_row(std::size_t row, std::size_t asset, double* out) const {
    const auto r = static_cast<Eigen::Index>(row);
    for (const auto& [name, series] : common) *out++ = series(r);
    if (sector_ret) *out = (*sector_ret)(r, static_cast<Eigen::Index>(asset));
}

AlignedLevels align_levels(const std::vector<Date>& dates, const PriceTable& macro, const std::string& column,
                           int max_fill_days) {
    const auto col = macro.id_index(column);
    if (!col) throw Error(Errc::unknown_column, "macro table has no column '" + column + "'");
    std::vector<std::pair<Date, double>> obs;
    for (std::size_t r = 0; r < macro.dates.size(); ++r) {
        const double v = macro.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(*col));
        if (!std::isnan(v)) obs.emplace_back(macro.dates[r], v);
    }
    AlignedLevels out;
    out.levels.resize(static_cast<Eigen::Index>(dates.size()));
    for (std::size_t k = 0; k < dates.size(); ++k) {
        const auto it = std::upper_bound(obs.begin(), obs.end(), dates[k],
                                         [](Date d, const auto& o) { return d < o.first; });
        if (it == obs.begin() || (dates[k] - std::prev(it)->first).count() > max_fill_days) {
            throw Error(Errc::coverage_gap, column + " has no observation within " + std::to_string(max_fill_days) +
                                                " days before " + format_date(dates[k]));
        }
        const auto used = std::prev(it);
        out.levels(static_cast<Eigen::Index>(k)) = used->second;
        if (k == 0) {
            if (used == obs.begin()) {
                throw Error(Errc::coverage_gap, column + " has no observation before " + format_date(dates[0]) +
                                                    " to difference against");
            }
            out.previous = std::prev(used)->second;
        }
    }
    return out;
}

void standardize(Eigen::VectorXd& v) {
    if (v.size() < 2) return;
    const double mean = v.mean();
    v.array() -= mean;
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size() - 1));
    if (sd > 0.0) v /= sd;
}

ShockControls build_controls(const ReturnPanel& panel, const PriceTable& macro, const PriceTable* sector_returns,
                             const ControlOptions& options) {
    ShockControls out;
    out.dates = panel.dates;
    const auto n = static_cast<Eigen::Index>(panel.size());

    const auto differenced = [&](const std::string& column, bool log_return) {
        const AlignedLevels lv = align_levels(panel.dates, macro, column);
        if (log_return && ((lv.levels.array() <= 0.0).any() || lv.previous <= 0.0)) {
            throw Error(Errc::invalid_argument, column + " must be positive for a log return");
        }
        Eigen::VectorXd d(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const double prev = r == 0 ? lv.previous : lv.levels(r - 1);
            d(r) = log_return ? std::log(lv.levels(r) / prev) : lv.levels(r) - prev;
        }
        return d;
    };
    if (macro.id_index("vix_level")) out.common["delta_vix"] = differenced("vix_level", false);
    if (macro.id_index("dgs10_level")) out.common["delta_dgs10"] = differenced("dgs10_level", false);
    if (macro.id_index("dxy_level")) out.common["dxy_ret"] = differenced("dxy_level", true);

    if (sector_returns && options.sector) {
        std::vector<std::string> unlabeled;
        for (const auto& a : panel.assets) {
            if (!panel.sectors.contains(a)) unlabeled.push_back(a);
        }
        if (!unlabeled.empty()) {
            std::string list;
            for (const auto& a : unlabeled) list += (list.empty() ? "" : ", ") + a;
            throw Error(Errc::unlabeled_assets, "assets without a sector label: " + list);
        }
        Eigen::MatrixXd m(n, static_cast<Eigen::Index>(panel.assets.size()));
        for (std::size_t a = 0; a < panel.assets.size(); ++a) {
            const std::string& sector = panel.sectors.at(panel.assets[a]);
            const auto col = sector_returns->id_index(sector);
            if (!col) throw Error(Errc::unknown_column, "no sector return series for '" + sector + "'");
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto it = std::lower_bound(sector_returns->dates.begin(), sector_returns->dates.end(),
                                                 panel.dates[static_cast<std::size_t>(r)]);
                const double v = (it == sector_returns->dates.end() || *it != panel.dates[static_cast<std::size_t>(r)])
                                     ? kNaN
                                     : sector_returns->values(it - sector_returns->dates.begin(),
                                                              static_cast<Eigen::Index>(*col));
                if (std::isnan(v)) {
                    throw Error(Errc::coverage_gap, "sector " + sector + " has no return on " +
                                                        format_date(panel.dates[static_cast<std::size_t>(r)]));
                }
                m(r, static_cast<Eigen::Index>(a)) = v;
            }
        }
        out.sector_ret = std::move(m);
    }

    if (options.standardize) {
        for (auto& [name, series] : out.common) standardize(series);
        if (out.sector_ret) {
            Eigen::VectorXd flat = Eigen::Map<Eigen::VectorXd>(out.sector_ret->data(), out.sector_ret->size());
            standardize(flat);
            *out.sector_ret = Eigen::Map<Eigen::MatrixXd>(flat.data(), n, out.sector_ret->cols());
        }
        out.standardized = true;
    }
    return out;
}

ShockControls controls_from_table(const ReturnPanel& panel, const PriceTable& table, bool standardize_series) {
    ShockControls out;
    out.dates = panel.dates;
    const auto n = static_cast<Eigen::Index>(panel.size());
    for (std::size_t c = 0; c < table.ids.size(); ++c) {
        Eigen::VectorXd s(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const Date d = panel.dates[static_cast<std::size_t>(r)];
            const auto it = std::lower_bound(table.dates.begin(), table.dates.end(), d);
            const double v = (it == table.dates.end() || *it != d)
                                 ? kNaN
                                 : table.values(it - table.dates.begin(), static_cast<Eigen::Index>(c));
            if (std::isnan(v)) {
                throw Error(Errc::coverage_gap, "control " + table.ids[c] + " missing on " + format_date(d));
            }
            s(r) = v;
        }
        if (standardize_series) standardize(s);
        out.common[table.ids[c]] = std::move(s);
    }
    out.standardized = standardize_series;
    return out;
}

void write_controls_csv(std::ostream& out, const ShockControls& controls) {
    out << "date";
    for (const auto& [name, series] : controls.common) out << ',' << name;
    out << '\n';
    for (std::size_t r = 0; r < controls.dates.size(); ++r) {
        out << format_date(controls.dates[r]);
        for (const auto& [name, series] : controls.common) out << ',' << format_exact(series(static_cast<Eigen::Index>(r)));
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

std::string_view to_string(EnvScheme s) noexcept {
    switch (s) {
    case EnvScheme::vix_terciles: return "vix_terciles";
    case EnvScheme::rates_trend_60d: return "rates_trend_60d";
    case EnvScheme::usd_trend_60d: return "usd_trend_60d";
    case EnvScheme::episodes: return "episodes";
    }
    return "unknown";
}

EnvScheme env_scheme_from_string(std::string_view text) {
    for (const auto s : {EnvScheme::vix_terciles, EnvScheme::rates_trend_60d, EnvScheme::usd_trend_60d,
                         EnvScheme::episodes}) {
        if (to_string(s) == text) return s;
    }
    throw Error(Errc::invalid_argument, "unknown environment scheme '" + std::string(text) + "'");
}

EnvironmentLabeling label_environments(const ReturnPanel& panel, EnvScheme scheme, const Eigen::VectorXd* levels,
                                       const LabelParams& params) {
    EnvironmentLabeling out;
    out.scheme = scheme;
    const std::size_t n = panel.size();
    out.labels.assign(n, {});

    if (scheme == EnvScheme::episodes) {
        std::vector<Episode> eps = params.episodes;
        for (const auto& e : eps) {
            if (e.label.empty()) throw Error(Errc::invalid_argument, "episode label must not be empty");
            if (e.end < e.start) throw Error(Errc::invalid_argument, "episode " + e.label + " ends before it starts");
            if (e.label == params.base_label) {
                throw Error(Errc::invalid_argument, "episode label '" + e.label + "' is reserved for undeclared dates");
            }
        }
        std::sort(eps.begin(), eps.end(), [](const Episode& x, const Episode& y) {
            return std::tie(x.start, x.end, x.label) < std::tie(y.start, y.end, y.label);
        });
        for (std::size_t k = 1; k < eps.size(); ++k) {
            if (eps[k].start <= eps[k - 1].end) {
                throw Error(Errc::overlapping_episodes, "episodes " + eps[k - 1].label + " and " + eps[k].label + " overlap");
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            out.labels[r] = params.base_label;
            for (const auto& e : eps) {
                if (panel.dates[r] >= e.start && panel.dates[r] <= e.end) out.labels[r] = e.label;
            }
        }
        out.episodes = std::move(eps);
        return out;
    }

    if (!levels || static_cast<std::size_t>(levels->size()) != n) {
        throw Error(Errc::invalid_argument, std::string(to_string(scheme)) + " needs one level per panel date");
    }
    if (scheme == EnvScheme::vix_terciles) {
        std::vector<double> sorted(levels->data(), levels->data() + n);
        std::sort(sorted.begin(), sorted.end());
        const double lo = sorted[(n + 2) / 3 - 1];
        const double hi = sorted[(2 * n + 2) / 3 - 1];
        for (std::size_t r = 0; r < n; ++r) {
            const double v = (*levels)(static_cast<Eigen::Index>(r));
            out.labels[r] = v <= lo ? "VIXLow" : (v <= hi ? "VIXMid" : "VIXHigh");
        }
        return out;
    }

    if (params.lookback < 1) throw Error(Errc::invalid_argument, "lookback must be positive");
    const auto lookback = static_cast<std::size_t>(params.lookback);
    if (n <= lookback) {
        throw Error(Errc::insufficient_lookback, "panel has " + std::to_string(n) + " dates, lookback is " +
                                                     std::to_string(lookback));
    }
    const std::string prefix = scheme == EnvScheme::rates_trend_60d ? "Rates" : "USD";
    for (std::size_t r = lookback; r < n; ++r) {
        const double change = (*levels)(static_cast<Eigen::Index>(r)) - (*levels)(static_cast<Eigen::Index>(r - lookback));
        out.labels[r] = prefix + (change > 0.0 ? "Up" : "Down");
    }
    out.unlabeled = lookback;
    out.notes.push_back("first " + std::to_string(lookback) + " dates lack lookback and are unlabeled");
    return out;
}

std::vector<Episode> load_episodes(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    const std::size_t label = csv.column("label");
    const std::size_t start = csv.column("start");
    const std::size_t end = csv.column("end");
    std::vector<Episode> out;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        try {
            out.push_back({csv.rows[r][label], parse_date(csv.rows[r][start]), parse_date(csv.rows[r][end])});
        } catch (const Error& e) {
            throw Error(Errc::parse_error, at_line(path.string(), csv.line_numbers[r]) + ": " + e.what());
        }
    }
    return out;
}

} // namespace capmscm::io
