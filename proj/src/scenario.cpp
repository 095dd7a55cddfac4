#include "countcast/scenario.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <set>

#include "countcast/errors.hpp"

namespace countcast {

ScenarioSpec scenario_spec_from(const KeyValueMap& kv) {
    static const std::set<std::string> known = {"label",            "region",  "feature",
                                                "window_days",      "compound",
                                                "daily_multiplier"};
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw UsageError("unknown scenario field \"" + key + "\"");
    }
    ScenarioSpec spec;
    spec.label = kv_string(kv, "label", spec.label);
    spec.region = kv_string(kv, "region", "");
    if (spec.region.empty()) throw UsageError("scenario field \"region\" is required");
    const std::string feature = kv_string(kv, "feature", "");
    if (feature.empty()) throw UsageError("scenario field \"feature\" is required");
    spec.feature = feature_from_name(feature);
    spec.window_days = static_cast<int>(kv_int(kv, "window_days", 0));
    if (spec.window_days < 1) {
        throw UsageError("scenario field \"window_days\" must be a positive integer");
    }
    spec.daily_multiplier = kv_double(kv, "daily_multiplier", -1.0);
    if (!(spec.daily_multiplier > 0.0) || !std::isfinite(spec.daily_multiplier)) {
        throw UsageError("scenario field \"daily_multiplier\" must be a positive number");
    }
    spec.compound = kv_bool(kv, "compound", spec.compound);
    return spec;
}

ScenarioSpec load_scenario_spec(const std::string& path) {
    return scenario_spec_from(parse_key_value_file(path));
}

CountPanel apply_scenario(const CountPanel& panel, const ScenarioSpec& spec) {
    const int col = panel.find_series(spec.region, spec.feature);
    if (col < 0) {
        throw DataError("scenario target not in panel: region \"" + spec.region + "\", feature " +
                        feature_name(spec.feature));
    }
    if (spec.window_days < 1 || spec.window_days > panel.days()) {
        throw DataError("scenario window of " + std::to_string(spec.window_days) +
                        " days exceeds the " + std::to_string(panel.days()) + " observed days");
    }
    CountPanel out = panel;
    const std::int64_t first = panel.days() - spec.window_days;
    for (int i = 0; i < spec.window_days; ++i) {
        const double factor = spec.compound
                                  ? std::pow(spec.daily_multiplier, static_cast<double>(i + 1))
                                  : spec.daily_multiplier;
        const double y = static_cast<double>(panel.values(first + i, col));
        out.values(first + i, col) = static_cast<std::int64_t>(std::floor(y * factor + 0.5));
    }
    return out;
}

namespace {

struct PipelineEnsembles {
    Ensemble daily;
    Ensemble cumulative;
};

// Shared path of baseline and perturbed runs: one-step predictions over
// observed days, a rolled-out horizon, the Bayesian layer, and draws. The
// cumulative offset is the panel total strictly before first_day.
PipelineEnsembles run_pipeline(const BiLstmModel& model, const CountPanel& panel, int horizon,
                               int n_draws, std::uint64_t seed, std::int64_t first_day) {
    PointForecast point = predict_onestep_all(model, panel);
    if (horizon > 0) point = concat_forecasts(point, forecast_horizon(model, panel, horizon));
    const std::vector<PredictiveCell> grid = build_predictive_grid(point, panel);
    PipelineEnsembles out;
    out.daily = draw_ensemble(grid, n_draws, seed);

    std::int64_t first_index = -1;
    for (size_t i = 0; i < out.daily.days.size(); ++i) {
        if (out.daily.days[i] == first_day) {
            first_index = static_cast<std::int64_t>(i);
            break;
        }
    }
    if (first_index < 0) throw DataError("scenario window precedes the first prediction day");
    out.daily = slice_days(out.daily, first_index, out.daily.day_count() - first_index);

    Eigen::VectorXd offsets = Eigen::VectorXd::Zero(panel.series());
    for (std::int64_t t = 0; t < first_day; ++t) {
        for (std::int64_t j = 0; j < panel.series(); ++j) {
            offsets(j) += static_cast<double>(panel.values(t, j));
        }
    }
    out.cumulative = cumulative_paths(out.daily, offsets);
    return out;
}

}  // namespace

ScenarioImpact run_scenario(const BiLstmModel& model, const CountPanel& panel,
                            const ScenarioSpec& spec, int horizon, int n_draws, double level,
                            std::uint64_t seed) {
    if (!same_keys(model.keys, panel.keys)) {
        throw DataError("model and panel series do not match");
    }
    const CountPanel perturbed = apply_scenario(panel, spec);

    // Predictions only exist from day `lookback` on, so the reported window
    // starts at the later of that and the first perturbed day.
    const std::int64_t first_day =
        std::max<std::int64_t>(model.lookback, panel.days() - spec.window_days);

    const PipelineEnsembles base = run_pipeline(model, panel, horizon, n_draws, seed, first_day);
    const PipelineEnsembles pert =
        run_pipeline(model, perturbed, horizon, n_draws, seed, first_day);

    const Ensemble d_daily = ensemble_difference(pert.daily, base.daily);
    const Ensemble d_cumulative = ensemble_difference(pert.cumulative, base.cumulative);

    ScenarioImpact impact;
    impact.spec = spec;
    impact.days = d_daily.days;
    impact.delta_daily = band(d_daily, level);
    impact.delta_cumulative = band(d_cumulative, level);
    impact.delta_national_daily = band(aggregate_national(d_daily), level);
    impact.delta_national_cumulative = band(aggregate_national(d_cumulative), level);
    return impact;
}

void write_impact_csv(const ScenarioImpact& impact, std::ostream& out) {
    write_band_header(out);
    append_band_rows(impact.delta_daily, "delta_daily", out);
    append_band_rows(impact.delta_cumulative, "delta_cumulative", out);
    append_band_rows(impact.delta_national_daily, "delta_daily", out);
    append_band_rows(impact.delta_national_cumulative, "delta_cumulative", out);
}

void write_impact_csv_file(const ScenarioImpact& impact, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    write_impact_csv(impact, out);
}

}  // namespace countcast
