#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "countcast/dates.hpp"
#include "countcast/errors.hpp"

namespace countcast {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class Feature : int { Cases = 0, Deaths = 1, Recovered = 2 };
inline constexpr int kFeatureCount = 3;

const char* feature_name(Feature f);
Feature feature_from_name(const std::string& name);

// One column of the panel: a (region, count-type) pair. flat_index is the
// column position and is a bijection over the pairs present in the data.
struct SeriesKey {
    std::string region;
    Feature feature = Feature::Cases;
    int flat_index = 0;

    bool operator==(const SeriesKey& o) const {
        return region == o.region && feature == o.feature && flat_index == o.flat_index;
    }
};

bool same_keys(const std::vector<SeriesKey>& a, const std::vector<SeriesKey>& b);

// Cumulative counts on a dense daily grid (gaps forward-filled at ingestion).
struct CumulativePanel {
    std::vector<Date> dates;       // length T, consecutive days
    std::vector<SeriesKey> keys;   // length D
    CountMatrix values;            // T x D

    std::int64_t days() const { return static_cast<std::int64_t>(dates.size()); }
    std::int64_t series() const { return static_cast<std::int64_t>(keys.size()); }
};

// Daily increments derived from a CumulativePanel.
struct CountPanel {
    std::vector<Date> dates;
    std::vector<SeriesKey> keys;
    CountMatrix values;  // T x D, all entries >= 0

    std::int64_t days() const { return static_cast<std::int64_t>(dates.size()); }
    std::int64_t series() const { return static_cast<std::int64_t>(keys.size()); }
    int find_series(const std::string& region, Feature f) const;  // -1 if absent
};

// Maps the logical columns onto a concrete CSV header. Defaults match the
// ISCIII historical layout (CCAA,FECHA,CASOS,...,Fallecidos,Recuperados).
struct ColumnMapping {
    std::string date = "FECHA";
    std::string region = "CCAA";
    std::string cases = "CASOS";
    std::string deaths = "Fallecidos";
    std::string recovered = "Recuperados";
    bool dmy_dates = true;  // DD/MM/YYYY when true, ISO-8601 otherwise
};

// Parses a cumulative-counts CSV. Missing (region, date) rows and blank count
// cells are forward-filled from the previous day (0 when there is none).
// Feature columns absent from the header are dropped from the key set.
CumulativePanel parse_cumulative_csv(std::istream& in, const ColumnMapping& mapping);
CumulativePanel parse_cumulative_csv_file(const std::string& path, const ColumnMapping& mapping);

// Per-cell first differences with negative differences clamped to 0; row 0 is
// the first cumulative row. clamped_cells, when given, receives the number of
// negative differences that were clamped.
CountPanel to_daily_increments(const CumulativePanel& cum, std::int64_t* clamped_cells = nullptr);

// Per-series location/scale of log(1+y), scale floored at 1e-6.
struct NormalizationSpec {
    Eigen::VectorXd location;  // m_d
    Eigen::VectorXd scale;     // s_d > 0

    std::int64_t series() const { return location.size(); }
};

inline constexpr double kScaleFloor = 1e-6;

NormalizationSpec fit_normalizer(const CountPanel& panel);

// z = (log(1+y) - m) / s per series.
Eigen::MatrixXd normalize(const CountPanel& panel, const NormalizationSpec& spec);
Eigen::MatrixXd normalize_values(const Eigen::MatrixXd& counts, const NormalizationSpec& spec);
// y = max(0, exp(z*s + m) - 1) per series.
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& z, const NormalizationSpec& spec);
Eigen::VectorXd denormalize_row(const Eigen::VectorXd& z, const NormalizationSpec& spec);
Eigen::VectorXd normalize_row(const Eigen::VectorXd& counts, const NormalizationSpec& spec);

// Training sample: the k rows before target_day as input, that day as target.
struct WindowSample {
    Eigen::MatrixXd input;   // k x D, normalized
    Eigen::VectorXd target;  // D, normalized
    std::int64_t target_day = 0;
};

std::vector<WindowSample> make_windows(const Eigen::MatrixXd& normalized, int lookback);

// Canonical panel file: CSV with header `date,region,feature,count`.
void write_panel_csv(const CountPanel& panel, std::ostream& out);
void write_panel_csv_file(const CountPanel& panel, const std::string& path);
CountPanel load_panel_csv(std::istream& in);
CountPanel load_panel_csv_file(const std::string& path);

}  // namespace countcast
