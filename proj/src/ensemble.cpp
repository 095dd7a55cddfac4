#include "countcast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "countcast/errors.hpp"
#include "countcast/rng.hpp"

namespace countcast {

namespace {

constexpr std::uint64_t kTagCell = 3;

void require_same_shape(const Ensemble& a, const Ensemble& b, const char* what) {
    if (a.n_draws != b.n_draws || a.days != b.days || !same_keys(a.keys, b.keys)) {
        throw DataError(std::string(what) + ": ensembles have different shapes");
    }
}

}  // namespace

Ensemble draw_ensemble(const std::vector<PredictiveCell>& grid, int n, std::uint64_t seed) {
    if (n < 1) throw UsageError("need at least one draw");
    if (grid.empty()) throw DataError("empty predictive grid");

    Ensemble ens;
    ens.n_draws = n;
    for (const PredictiveCell& cell : grid) {
        if (ens.days.empty() || ens.days.back() != cell.day) {
            if (std::find(ens.days.begin(), ens.days.end(), cell.day) != ens.days.end()) {
                throw DataError("predictive grid days are not contiguous");
            }
            ens.days.push_back(cell.day);
        }
    }
    for (const PredictiveCell& cell : grid) {
        if (cell.day != ens.days.front()) break;
        ens.keys.push_back(cell.key);
    }
    const std::int64_t n_days = ens.day_count();
    const std::int64_t n_series = ens.series();
    if (static_cast<std::int64_t>(grid.size()) != n_days * n_series) {
        throw DataError("predictive grid is not a full day x series lattice");
    }

    ens.data.resize(static_cast<size_t>(n) * static_cast<size_t>(n_days) *
                    static_cast<size_t>(n_series));
    for (std::int64_t d = 0; d < n_days; ++d) {
        for (std::int64_t j = 0; j < n_series; ++j) {
            const PredictiveCell& cell = grid[static_cast<size_t>(d * n_series + j)];
            if (cell.day != ens.days[static_cast<size_t>(d)] ||
                !(cell.key == ens.keys[static_cast<size_t>(j)])) {
                throw DataError("predictive grid cells are out of order");
            }
            rng::Stream stream(rng::derive_seed(seed, kTagCell,
                                                static_cast<std::uint64_t>(cell.day),
                                                static_cast<std::uint64_t>(cell.key.flat_index)));
            for (int draw = 0; draw < n; ++draw) {
                ens.at(draw, d, j) = static_cast<double>(nb_sample(cell.params, stream));
            }
        }
    }
    return ens;
}

Ensemble cumulative_paths(const Ensemble& ens, const Eigen::VectorXd& offsets) {
    if (offsets.size() != ens.series()) {
        throw DataError("cumulative offsets do not align with the series");
    }
    Ensemble out = ens;
    for (int draw = 0; draw < ens.n_draws; ++draw) {
        for (std::int64_t j = 0; j < ens.series(); ++j) {
            double running = offsets(j);
            for (std::int64_t d = 0; d < ens.day_count(); ++d) {
                running += ens.at(draw, d, j);
                out.at(draw, d, j) = running;
            }
        }
    }
    return out;
}

Ensemble aggregate_national(const Ensemble& ens) {
    Ensemble out;
    out.n_draws = ens.n_draws;
    out.days = ens.days;
    std::vector<std::vector<std::int64_t>> groups;  // source columns per output feature
    for (int f = 0; f < kFeatureCount; ++f) {
        std::vector<std::int64_t> cols;
        for (std::int64_t j = 0; j < ens.series(); ++j) {
            if (ens.keys[static_cast<size_t>(j)].feature == static_cast<Feature>(f)) {
                cols.push_back(j);
            }
        }
        if (cols.empty()) continue;
        SeriesKey key;
        key.region = kNationalScope;
        key.feature = static_cast<Feature>(f);
        key.flat_index = static_cast<int>(out.keys.size());
        out.keys.push_back(key);
        groups.push_back(std::move(cols));
    }
    out.data.assign(static_cast<size_t>(out.n_draws) * static_cast<size_t>(out.day_count()) *
                        static_cast<size_t>(out.series()),
                    0.0);
    for (int draw = 0; draw < ens.n_draws; ++draw) {
        for (std::int64_t d = 0; d < ens.day_count(); ++d) {
            for (size_t g = 0; g < groups.size(); ++g) {
                double total = 0.0;
                for (std::int64_t j : groups[g]) total += ens.at(draw, d, j);
                out.at(draw, d, static_cast<std::int64_t>(g)) = total;
            }
        }
    }
    return out;
}

Ensemble ensemble_difference(const Ensemble& a, const Ensemble& b) {
    require_same_shape(a, b, "difference");
    Ensemble out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
    return out;
}

Ensemble slice_days(const Ensemble& ens, std::int64_t first_index, std::int64_t count) {
    if (first_index < 0 || count < 0 || first_index + count > ens.day_count()) {
        throw DataError("day slice out of range");
    }
    Ensemble out;
    out.n_draws = ens.n_draws;
    out.keys = ens.keys;
    out.days.assign(ens.days.begin() + first_index, ens.days.begin() + first_index + count);
    out.data.resize(static_cast<size_t>(out.n_draws) * static_cast<size_t>(count) *
                    static_cast<size_t>(out.series()));
    for (int draw = 0; draw < out.n_draws; ++draw) {
        for (std::int64_t d = 0; d < count; ++d) {
            for (std::int64_t j = 0; j < out.series(); ++j) {
                out.at(draw, d, j) = ens.at(draw, first_index + d, j);
            }
        }
    }
    return out;
}

ReproductionSeries crude_R(const Ensemble& ens, const std::string& scope) {
    std::vector<std::int64_t> case_cols;
    for (std::int64_t j = 0; j < ens.series(); ++j) {
        const SeriesKey& key = ens.keys[static_cast<size_t>(j)];
        if (key.feature != Feature::Cases) continue;
        if (scope == kNationalScope || key.region == scope) case_cols.push_back(j);
    }
    if (case_cols.empty()) {
        throw DataError("no cases series for scope " + scope);
    }
    if (scope != kNationalScope && case_cols.size() > 1) {
        throw DataError("ambiguous cases series for scope " + scope);
    }

    ReproductionSeries out;
    out.n_draws = ens.n_draws;
    out.scope = scope;
    out.days = ens.days;
    const std::int64_t n_days = ens.day_count();
    out.values.resize(ens.n_draws, n_days);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int draw = 0; draw < ens.n_draws; ++draw) {
        double prev = nan;
        for (std::int64_t d = 0; d < n_days; ++d) {
            double cases = 0.0;
            for (std::int64_t j : case_cols) cases += ens.at(draw, d, j);
            out.values(draw, d) = (d > 0 && prev > 0.0) ? cases / prev : nan;
            prev = cases;
        }
    }
    return out;
}

double nearest_rank_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    if (!(p > 0.0 && p < 1.0)) throw UsageError("quantile level must lie in (0, 1)");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<std::int64_t>(values.size());
    // The 1e-9 slack keeps p*n at exact integers (e.g. 0.975 * 1000) from
    // being pushed up a rank by representation error.
    auto rank = static_cast<std::int64_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::int64_t>(rank, 1, n);
    return values[static_cast<size_t>(rank - 1)];
}

CredibleBand band(const Ensemble& ens, double level) {
    if (!(level > 0.0 && level < 1.0)) throw UsageError("band level must lie in (0, 1)");
    if (ens.n_draws < 1) throw DataError("band of an empty ensemble");
    CredibleBand out;
    out.level = level;
    out.days = ens.days;
    out.keys = ens.keys;
    const std::int64_t n_days = ens.day_count();
    const std::int64_t n_series = ens.series();
    out.mean.resize(n_days, n_series);
    out.lower.resize(n_days, n_series);
    out.upper.resize(n_days, n_series);
    out.defined.setOnes(n_days, n_series);
    const double p_low = (1.0 - level) / 2.0;
    const double p_high = (1.0 + level) / 2.0;
    std::vector<double> sample(static_cast<size_t>(ens.n_draws));
    for (std::int64_t d = 0; d < n_days; ++d) {
        for (std::int64_t j = 0; j < n_series; ++j) {
            double sum = 0.0;
            for (int draw = 0; draw < ens.n_draws; ++draw) {
                sample[static_cast<size_t>(draw)] = ens.at(draw, d, j);
                sum += sample[static_cast<size_t>(draw)];
            }
            out.mean(d, j) = sum / static_cast<double>(ens.n_draws);
            out.lower(d, j) = nearest_rank_quantile(sample, p_low);
            out.upper(d, j) = nearest_rank_quantile(sample, p_high);
        }
    }
    return out;
}

CredibleBand band(const ReproductionSeries& series, double level) {
    if (!(level > 0.0 && level < 1.0)) throw UsageError("band level must lie in (0, 1)");
    CredibleBand out;
    out.level = level;
    out.days = series.days;
    SeriesKey key;
    key.region = series.scope;
    key.feature = Feature::Cases;
    key.flat_index = 0;
    out.keys = {key};
    const auto n_days = static_cast<std::int64_t>(series.days.size());
    out.mean.resize(n_days, 1);
    out.lower.resize(n_days, 1);
    out.upper.resize(n_days, 1);
    out.defined.setZero(n_days, 1);
    const double p_low = (1.0 - level) / 2.0;
    const double p_high = (1.0 + level) / 2.0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sample;
    for (std::int64_t d = 0; d < n_days; ++d) {
        sample.clear();
        double sum = 0.0;
        for (int draw = 0; draw < series.n_draws; ++draw) {
            const double v = series.values(draw, d);
            if (std::isnan(v)) continue;
            sample.push_back(v);
            sum += v;
        }
        if (sample.empty()) {
            out.mean(d, 0) = nan;
            out.lower(d, 0) = nan;
            out.upper(d, 0) = nan;
            continue;
        }
        out.defined(d, 0) = 1;
        out.mean(d, 0) = sum / static_cast<double>(sample.size());
        out.lower(d, 0) = nearest_rank_quantile(sample, p_low);
        out.upper(d, 0) = nearest_rank_quantile(sample, p_high);
    }
    return out;
}

void write_band_header(std::ostream& out) {
    out << "day,scope,feature,quantity,mean,lower,upper,level\n";
}

void append_band_rows(const CredibleBand& band, const std::string& quantity, std::ostream& out) {
    char buf[160];
    for (std::int64_t d = 0; d < static_cast<std::int64_t>(band.days.size()); ++d) {
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(band.keys.size()); ++j) {
            if (!band.defined(d, j)) continue;
            const SeriesKey& key = band.keys[static_cast<size_t>(j)];
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%g", band.mean(d, j),
                          band.lower(d, j), band.upper(d, j), band.level);
            out << band.days[static_cast<size_t>(d)] << ',' << key.region << ','
                << feature_name(key.feature) << ',' << quantity << ',' << buf << '\n';
        }
    }
    if (!out) throw DataError("failed writing band rows");
}

}  // namespace countcast
