#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "countcast/bayes.hpp"
#include "countcast/panel.hpp"

namespace countcast {

inline constexpr const char* kNationalScope = "ES";

// Monte Carlo draws, draw-major: value(draw, day, series) sits at
// (draw * days + day) * D + series. Counts are stored as doubles so the same
// container carries cumulative paths, aggregates and draw-matched deltas.
struct Ensemble {
    int n_draws = 0;
    std::vector<std::int64_t> days;
    std::vector<SeriesKey> keys;
    std::vector<double> data;

    std::int64_t day_count() const { return static_cast<std::int64_t>(days.size()); }
    std::int64_t series() const { return static_cast<std::int64_t>(keys.size()); }
    double at(int draw, std::int64_t day_i, std::int64_t series_i) const {
        return data[static_cast<size_t>((static_cast<std::int64_t>(draw) * day_count() + day_i) *
                                            series() +
                                        series_i)];
    }
    double& at(int draw, std::int64_t day_i, std::int64_t series_i) {
        return data[static_cast<size_t>((static_cast<std::int64_t>(draw) * day_count() + day_i) *
                                            series() +
                                        series_i)];
    }
};

// n independent draws per grid cell. Each cell gets its own derived stream
// keyed by (seed, day, series), so two grids over the same (day, series)
// lattice see identical randomness draw for draw.
Ensemble draw_ensemble(const std::vector<PredictiveCell>& grid, int n, std::uint64_t seed);

// Running sum over days within each draw, plus a per-series starting total.
Ensemble cumulative_paths(const Ensemble& ens, const Eigen::VectorXd& offsets);

// Sums regions draw-wise into one series per feature, keyed under scope "ES".
Ensemble aggregate_national(const Ensemble& ens);

// Draw-matched difference (a - b); shapes must agree.
Ensemble ensemble_difference(const Ensemble& a, const Ensemble& b);

Ensemble slice_days(const Ensemble& ens, std::int64_t first_index, std::int64_t count);

// R_t = cases_t / cases_{t-1} per draw; NaN where the denominator is 0 and on
// the first day. scope is a region code or "ES" (cases summed over regions).
struct ReproductionSeries {
    int n_draws = 0;
    std::string scope;
    std::vector<std::int64_t> days;
    Eigen::MatrixXd values;  // n_draws x days, NaN = undefined
};

ReproductionSeries crude_R(const Ensemble& ens, const std::string& scope);

// Equal-tail band: per day/series the mean of defined draws and the
// nearest-rank quantiles at (1-level)/2 and (1+level)/2. Days with no defined
// draws are flagged and skipped by the CSV writer.
struct CredibleBand {
    double level = 0.95;
    std::vector<std::int64_t> days;
    std::vector<SeriesKey> keys;
    Eigen::MatrixXd mean, lower, upper;                          // days x D
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> defined;  // days x D
};

CredibleBand band(const Ensemble& ens, double level);
CredibleBand band(const ReproductionSeries& series, double level);

// Nearest-rank empirical quantile: element of rank ceil(p*n) (1-based) of the
// sorted values.
double nearest_rank_quantile(std::vector<double> values, double p);

// Band CSV rows `day,scope,feature,quantity,mean,lower,upper,level`; the
// header and each band's rows are emitted separately so several bands can
// share one file.
void write_band_header(std::ostream& out);
void append_band_rows(const CredibleBand& band, const std::string& quantity, std::ostream& out);

}  // namespace countcast
