#include "countcast/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace countcast {

namespace {

std::string trim(const std::string& s) {
    const size_t start = s.find_first_not_of(" \t\r\n");
    const size_t end = s.find_last_not_of(" \t\r\n");
    return start == std::string::npos ? "" : s.substr(start, end - start + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::int64_t parse_count(const std::string& text, std::int64_t line_no) {
    try {
        size_t pos = 0;
        // Some sources write counts as "123.0"; accept an integral double.
        const double v = std::stod(text, &pos);
        if (pos != text.size() || !std::isfinite(v) || v != std::floor(v)) {
            throw std::invalid_argument(text);
        }
        return static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": unparseable count '" + text + "'");
    }
}

}  // namespace

const char* feature_name(Feature f) {
    switch (f) {
        case Feature::Cases: return "cases";
        case Feature::Deaths: return "deaths";
        case Feature::Recovered: return "recovered";
    }
    return "?";
}

Feature feature_from_name(const std::string& name) {
    for (int j = 0; j < kFeatureCount; ++j) {
        if (name == feature_name(static_cast<Feature>(j))) return static_cast<Feature>(j);
    }
    throw DataError("unknown feature '" + name + "'");
}

bool same_keys(const std::vector<SeriesKey>& a, const std::vector<SeriesKey>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

int CountPanel::find_series(const std::string& region, Feature f) const {
    for (size_t d = 0; d < keys.size(); ++d) {
        if (keys[d].region == region && keys[d].feature == f) return static_cast<int>(d);
    }
    return -1;
}

CumulativePanel parse_cumulative_csv(std::istream& in, const ColumnMapping& mapping) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.empty()) throw DataError("empty header row");

    auto find_column = [&](const std::string& name) -> int {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };

    const int date_col = find_column(mapping.date);
    const int region_col = find_column(mapping.region);
    if (date_col < 0) throw DataError("date column '" + mapping.date + "' not found in header");
    if (region_col < 0) throw DataError("region column '" + mapping.region + "' not found in header");

    struct FeatureColumn {
        Feature feature;
        int column;
    };
    std::vector<FeatureColumn> feature_cols;
    const std::pair<Feature, const std::string*> wanted[] = {
        {Feature::Cases, &mapping.cases},
        {Feature::Deaths, &mapping.deaths},
        {Feature::Recovered, &mapping.recovered},
    };
    for (const auto& [feature, name] : wanted) {
        const int col = find_column(*name);
        if (col >= 0) feature_cols.push_back({feature, col});
    }
    if (feature_cols.empty()) throw DataError("no cumulative count columns found in header");

    int max_col = std::max(date_col, region_col);
    for (const auto& fc : feature_cols) max_col = std::max(max_col, fc.column);
    const size_t needed = static_cast<size_t>(max_col);

    // cell[(region, feature)][date] = cumulative count; blanks stay absent.
    std::map<std::string, std::map<std::int64_t, std::vector<std::int64_t>>> by_region;
    std::set<std::int64_t> all_dates;
    const std::int64_t kMissing = -1;

    std::int64_t line_no = 1;
    std::int64_t data_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() <= needed) {
            throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(needed + 1) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const std::string region = fields[static_cast<size_t>(region_col)];
        if (region.empty()) continue;  // ISCIII files end with a notes row
        Date date;
        try {
            date = Date::parse(fields[static_cast<size_t>(date_col)], mapping.dmy_dates);
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }

        auto& dates_of_region = by_region[region];
        if (dates_of_region.count(date.days())) {
            throw DataError("duplicate (date, region) pair (" + date.to_iso() + ", " + region +
                            ") at line " + std::to_string(line_no));
        }
        std::vector<std::int64_t> row(feature_cols.size(), kMissing);
        for (size_t j = 0; j < feature_cols.size(); ++j) {
            const std::string& cell = fields[static_cast<size_t>(feature_cols[j].column)];
            if (cell.empty()) continue;  // missing report, forward-filled below
            row[j] = parse_count(cell, line_no);
            if (row[j] < 0) {
                throw DataError("line " + std::to_string(line_no) + ": negative cumulative count");
            }
        }
        dates_of_region.emplace(date.days(), std::move(row));
        all_dates.insert(date.days());
        ++data_rows;
    }
    if (data_rows == 0) throw DataError("no data rows in input file");

    const std::int64_t first_day = *all_dates.begin();
    const std::int64_t last_day = *all_dates.rbegin();
    const std::int64_t t_len = last_day - first_day + 1;

    CumulativePanel panel;
    panel.dates.reserve(static_cast<size_t>(t_len));
    for (std::int64_t d = first_day; d <= last_day; ++d) panel.dates.emplace_back(d);

    for (const auto& [region, _] : by_region) {
        for (const auto& fc : feature_cols) {
            SeriesKey key;
            key.region = region;
            key.feature = fc.feature;
            key.flat_index = static_cast<int>(panel.keys.size());
            panel.keys.push_back(key);
        }
    }

    panel.values.setZero(t_len, static_cast<std::int64_t>(panel.keys.size()));
    std::int64_t col = 0;
    for (const auto& [region, rows] : by_region) {
        std::vector<std::int64_t> carry(feature_cols.size(), 0);
        for (std::int64_t t = 0; t < t_len; ++t) {
            const auto it = rows.find(first_day + t);
            if (it != rows.end()) {
                for (size_t j = 0; j < feature_cols.size(); ++j) {
                    if (it->second[j] != kMissing) carry[j] = it->second[j];
                }
            }
            for (size_t j = 0; j < feature_cols.size(); ++j) {
                panel.values(t, col + static_cast<std::int64_t>(j)) = carry[j];
            }
        }
        col += static_cast<std::int64_t>(feature_cols.size());
    }
    return panel;
}

CumulativePanel parse_cumulative_csv_file(const std::string& path, const ColumnMapping& mapping) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file '" + path + "'");
    return parse_cumulative_csv(in, mapping);
}

CountPanel to_daily_increments(const CumulativePanel& cum, std::int64_t* clamped_cells) {
    CountPanel panel;
    panel.dates = cum.dates;
    panel.keys = cum.keys;
    panel.values.resize(cum.values.rows(), cum.values.cols());
    std::int64_t clamped = 0;
    for (std::int64_t d = 0; d < cum.values.cols(); ++d) {
        panel.values(0, d) = cum.values(0, d);
        for (std::int64_t t = 1; t < cum.values.rows(); ++t) {
            const std::int64_t diff = cum.values(t, d) - cum.values(t - 1, d);
            if (diff < 0) ++clamped;
            panel.values(t, d) = std::max<std::int64_t>(0, diff);
        }
    }
    if (clamped_cells) *clamped_cells = clamped;
    return panel;
}

NormalizationSpec fit_normalizer(const CountPanel& panel) {
    const std::int64_t t_len = panel.days();
    const std::int64_t d_len = panel.series();
    NormalizationSpec spec;
    spec.location.resize(d_len);
    spec.scale.resize(d_len);
    for (std::int64_t d = 0; d < d_len; ++d) {
        double mean = 0.0;
        for (std::int64_t t = 0; t < t_len; ++t) {
            mean += std::log1p(static_cast<double>(panel.values(t, d)));
        }
        mean /= static_cast<double>(t_len);
        double var = 0.0;
        for (std::int64_t t = 0; t < t_len; ++t) {
            const double dev = std::log1p(static_cast<double>(panel.values(t, d))) - mean;
            var += dev * dev;
        }
        var /= static_cast<double>(t_len);
        spec.location(d) = mean;
        spec.scale(d) = std::max(std::sqrt(var), kScaleFloor);
    }
    return spec;
}

Eigen::MatrixXd normalize(const CountPanel& panel, const NormalizationSpec& spec) {
    return normalize_values(panel.values.cast<double>(), spec);
}

Eigen::MatrixXd normalize_values(const Eigen::MatrixXd& counts, const NormalizationSpec& spec) {
    Eigen::MatrixXd z(counts.rows(), counts.cols());
    for (Eigen::Index d = 0; d < counts.cols(); ++d) {
        for (Eigen::Index t = 0; t < counts.rows(); ++t) {
            z(t, d) = (std::log1p(counts(t, d)) - spec.location(d)) / spec.scale(d);
        }
    }
    return z;
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& z, const NormalizationSpec& spec) {
    Eigen::MatrixXd y(z.rows(), z.cols());
    for (Eigen::Index d = 0; d < z.cols(); ++d) {
        for (Eigen::Index t = 0; t < z.rows(); ++t) {
            y(t, d) = std::max(0.0, std::expm1(z(t, d) * spec.scale(d) + spec.location(d)));
        }
    }
    return y;
}

Eigen::VectorXd denormalize_row(const Eigen::VectorXd& z, const NormalizationSpec& spec) {
    Eigen::VectorXd y(z.size());
    for (Eigen::Index d = 0; d < z.size(); ++d) {
        y(d) = std::max(0.0, std::expm1(z(d) * spec.scale(d) + spec.location(d)));
    }
    return y;
}

Eigen::VectorXd normalize_row(const Eigen::VectorXd& counts, const NormalizationSpec& spec) {
    Eigen::VectorXd z(counts.size());
    for (Eigen::Index d = 0; d < counts.size(); ++d) {
        z(d) = (std::log1p(counts(d)) - spec.location(d)) / spec.scale(d);
    }
    return z;
}

std::vector<WindowSample> make_windows(const Eigen::MatrixXd& normalized, int lookback) {
    const Eigen::Index t_len = normalized.rows();
    if (t_len <= lookback) {
        throw DataError("insufficient history: need more than " + std::to_string(lookback) +
                        " days, have " + std::to_string(t_len));
    }
    std::vector<WindowSample> samples;
    samples.reserve(static_cast<size_t>(t_len - lookback));
    for (Eigen::Index t = lookback; t < t_len; ++t) {
        WindowSample s;
        s.input = normalized.middleRows(t - lookback, lookback);
        s.target = normalized.row(t);
        s.target_day = t;
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_panel_csv(const CountPanel& panel, std::ostream& out) {
    out << "date,region,feature,count\n";
    for (std::int64_t t = 0; t < panel.days(); ++t) {
        for (std::int64_t d = 0; d < panel.series(); ++d) {
            const SeriesKey& key = panel.keys[static_cast<size_t>(d)];
            out << panel.dates[static_cast<size_t>(t)].to_iso() << ',' << key.region << ','
                << feature_name(key.feature) << ',' << panel.values(t, d) << '\n';
        }
    }
}

void write_panel_csv_file(const CountPanel& panel, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write panel file '" + path + "'");
    write_panel_csv(panel, out);
}

CountPanel load_panel_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty panel file");
    if (trim(line) != "date,region,feature,count") {
        throw DataError("panel file header must be 'date,region,feature,count'");
    }
    std::map<std::pair<std::string, int>, std::map<std::int64_t, std::int64_t>> cells;
    std::set<std::int64_t> dates;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 4) {
            throw DataError("line " + std::to_string(line_no) + ": expected 4 fields");
        }
        Date date;
        try {
            date = Date::parse(fields[0], false);
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        const Feature feature = feature_from_name(fields[2]);
        const std::int64_t count = parse_count(fields[3], line_no);
        if (count < 0) throw DataError("line " + std::to_string(line_no) + ": negative count");
        cells[{fields[1], static_cast<int>(feature)}][date.days()] = count;
        dates.insert(date.days());
    }
    if (cells.empty()) throw DataError("no data rows in panel file");

    const std::int64_t first_day = *dates.begin();
    const std::int64_t last_day = *dates.rbegin();
    const std::int64_t t_len = last_day - first_day + 1;

    CountPanel panel;
    for (std::int64_t d = first_day; d <= last_day; ++d) panel.dates.emplace_back(d);
    for (const auto& [rk, _] : cells) {
        SeriesKey key;
        key.region = rk.first;
        key.feature = static_cast<Feature>(rk.second);
        key.flat_index = static_cast<int>(panel.keys.size());
        panel.keys.push_back(key);
    }
    panel.values.setZero(t_len, static_cast<std::int64_t>(panel.keys.size()));
    std::int64_t col = 0;
    for (const auto& [rk, by_date] : cells) {
        for (const auto& [day, count] : by_date) {
            panel.values(day - first_day, col) = count;
        }
        ++col;
    }
    return panel;
}

CountPanel load_panel_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open panel file '" + path + "'");
    return load_panel_csv(in);
}

}  // namespace countcast
