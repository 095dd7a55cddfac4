#include "countcast/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "countcast/bayes.hpp"
#include "countcast/ensemble.hpp"
#include "countcast/errors.hpp"
#include "countcast/model_io.hpp"
#include "countcast/scenario.hpp"
#include "countcast/svg.hpp"

namespace countcast {

namespace {

std::string sanitize_for_filename(const std::string& s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_';
        out += ok ? c : '_';
    }
    return out.empty() ? std::string("_") : out;
}

void ensure_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

CountPanel load_panel(const RunConfig& cfg) {
    return load_panel_csv_file(output_path(cfg, cfg.panel_csv));
}

// Keeps only the requested regions' columns; keys keep their original
// flat_index so panel columns stay addressable.
Ensemble select_regions(const Ensemble& ens, const std::vector<std::string>& regions) {
    if (regions.empty()) return ens;
    std::vector<std::int64_t> cols;
    for (std::int64_t j = 0; j < ens.series(); ++j) {
        const std::string& region = ens.keys[static_cast<size_t>(j)].region;
        if (std::find(regions.begin(), regions.end(), region) != regions.end()) cols.push_back(j);
    }
    if (cols.empty()) throw DataError("region filter matches no series");
    Ensemble out;
    out.n_draws = ens.n_draws;
    out.days = ens.days;
    for (std::int64_t j : cols) out.keys.push_back(ens.keys[static_cast<size_t>(j)]);
    out.data.resize(static_cast<size_t>(out.n_draws) * static_cast<size_t>(out.day_count()) *
                    static_cast<size_t>(out.series()));
    for (int draw = 0; draw < out.n_draws; ++draw) {
        for (std::int64_t d = 0; d < out.day_count(); ++d) {
            for (size_t c = 0; c < cols.size(); ++c) {
                out.at(draw, d, static_cast<std::int64_t>(c)) = ens.at(draw, d, cols[c]);
            }
        }
    }
    return out;
}

std::vector<std::string> regions_of(const std::vector<SeriesKey>& keys) {
    std::vector<std::string> regions;
    for (const SeriesKey& key : keys) {
        if (std::find(regions.begin(), regions.end(), key.region) == regions.end()) {
            regions.push_back(key.region);
        }
    }
    return regions;
}

// Observed-count points for a scope: the region's own column, or the sum over
// regions for the national scope.
std::vector<std::pair<std::int64_t, double>> observed_points(const CountPanel& panel,
                                                             const std::string& scope, Feature f,
                                                             bool cumulative) {
    std::vector<std::pair<std::int64_t, double>> points;
    std::vector<int> cols;
    if (scope == kNationalScope) {
        for (const SeriesKey& key : panel.keys) {
            if (key.feature == f) cols.push_back(key.flat_index);
        }
    } else {
        const int col = panel.find_series(scope, f);
        if (col >= 0) cols.push_back(col);
    }
    if (cols.empty()) return points;
    double running = 0.0;
    for (std::int64_t t = 0; t < panel.days(); ++t) {
        double v = 0.0;
        for (int col : cols) v += static_cast<double>(panel.values(t, col));
        running += v;
        points.emplace_back(t, cumulative ? running : v);
    }
    return points;
}

std::vector<std::pair<std::int64_t, double>> observed_r_points(const CountPanel& panel,
                                                               const std::string& scope) {
    std::vector<std::pair<std::int64_t, double>> points;
    std::vector<int> cols;
    if (scope == kNationalScope) {
        for (const SeriesKey& key : panel.keys) {
            if (key.feature == Feature::Cases) cols.push_back(key.flat_index);
        }
    } else {
        const int col = panel.find_series(scope, Feature::Cases);
        if (col >= 0) cols.push_back(col);
    }
    if (cols.empty()) return points;
    double prev = 0.0;
    for (std::int64_t t = 0; t < panel.days(); ++t) {
        double v = 0.0;
        for (int col : cols) v += static_cast<double>(panel.values(t, col));
        if (t > 0 && prev > 0.0) points.emplace_back(t, v / prev);
        prev = v;
    }
    return points;
}

PlotPanel panel_from_band(const CredibleBand& bd, std::int64_t col, const std::string& title) {
    PlotPanel panel;
    panel.title = title;
    panel.days = bd.days;
    const auto n = static_cast<std::int64_t>(bd.days.size());
    panel.mean.resize(static_cast<size_t>(n));
    panel.lower.resize(static_cast<size_t>(n));
    panel.upper.resize(static_cast<size_t>(n));
    panel.defined.resize(static_cast<size_t>(n));
    for (std::int64_t d = 0; d < n; ++d) {
        panel.mean[static_cast<size_t>(d)] = bd.mean(d, col);
        panel.lower[static_cast<size_t>(d)] = bd.lower(d, col);
        panel.upper[static_cast<size_t>(d)] = bd.upper(d, col);
        panel.defined[static_cast<size_t>(d)] = bd.defined(d, col);
    }
    return panel;
}

// One SVG for a (scope, quantity) pair: a panel per feature present.
void write_scope_plot(const RunConfig& cfg, const CredibleBand& bd, const std::string& scope,
                      const std::string& quantity, const CountPanel* panel_for_points,
                      const std::string& file_prefix) {
    std::vector<PlotPanel> panels;
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(bd.keys.size()); ++j) {
        const SeriesKey& key = bd.keys[static_cast<size_t>(j)];
        if (key.region != scope) continue;
        PlotPanel panel = panel_from_band(bd, j, std::string(feature_name(key.feature)) + " — " + quantity);
        if (panel_for_points) {
            panel.observed =
                observed_points(*panel_for_points, scope, key.feature, quantity == "cumulative");
        }
        panels.push_back(std::move(panel));
    }
    if (panels.empty()) return;
    const std::string title = scope + " — " + quantity;
    write_plot_svg_file(title, panels,
                        output_path(cfg, file_prefix + sanitize_for_filename(scope) + "_" +
                                             quantity + ".svg"));
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out << "step,train_mae,val_mae\n";
    char buf[80];
    for (size_t i = 0; i < history.train_mae.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g", i + 1, history.train_mae[i],
                      history.val_mae[i]);
        out << buf << '\n';
    }
    if (!out) throw DataError("failed writing history: " + path);
}

}  // namespace

std::string output_path(const RunConfig& cfg, const std::string& name) {
    const std::filesystem::path p(name);
    if (p.is_absolute()) return name;
    return (std::filesystem::path(cfg.out_dir) / p).string();
}

IngestSummary cmd_ingest(const RunConfig& cfg) {
    if (cfg.input_csv.empty()) throw UsageError("config key \"input_csv\" is required for ingest");
    ensure_out_dir(cfg);
    const CumulativePanel cumulative = parse_cumulative_csv_file(cfg.input_csv, cfg.columns);
    IngestSummary summary;
    const CountPanel panel = to_daily_increments(cumulative, &summary.clamped);
    write_panel_csv_file(panel, output_path(cfg, cfg.panel_csv));

    summary.days = panel.days();
    summary.series = panel.series();
    summary.first_date = panel.dates.front();
    summary.last_date = panel.dates.back();
    std::cout << "panel: " << summary.days << " days x " << summary.series << " series ("
              << summary.first_date.to_iso() << ".." << summary.last_date.to_iso() << "), "
              << summary.clamped << " negative diffs clamped\n";
    return summary;
}

void cmd_train(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const CountPanel panel = load_panel(cfg);
    auto [model, history] = train(panel, cfg.train);
    save_model_file(model, output_path(cfg, cfg.model_file));
    write_history_csv(history, output_path(cfg, "history.csv"));
    std::cout << "trained " << cfg.train.steps << " steps over " << panel.series()
              << " series; model has " << count_parameters(model) << " parameters\n";
    if (!history.train_mae.empty()) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "final train MAE %.6f, val MAE %.6f",
                      history.train_mae.back(), history.val_mae.back());
        std::cout << buf << '\n';
    }
}

void cmd_predict(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    const CountPanel panel = load_panel(cfg);
    const BiLstmModel model = load_model_file(output_path(cfg, cfg.model_file));
    if (!same_keys(model.keys, panel.keys)) {
        throw DataError("model was trained on a different panel (series keys differ)");
    }

    PointForecast point = predict_onestep_all(model, panel);
    if (cfg.horizon > 0) {
        point = concat_forecasts(point, forecast_horizon(model, panel, cfg.horizon));
    }
    const std::vector<PredictiveCell> grid = build_predictive_grid(point, panel);
    write_grid_csv_file(grid, output_path(cfg, "grid.csv"));

    Ensemble ens = draw_ensemble(grid, cfg.n_draws, cfg.train.seed);
    ens = select_regions(ens, cfg.region_filter);
    const bool include_national = cfg.region_filter.empty();

    Eigen::VectorXd offsets = Eigen::VectorXd::Zero(ens.series());
    const std::int64_t first_day = ens.days.front();
    for (std::int64_t j = 0; j < ens.series(); ++j) {
        const int col = ens.keys[static_cast<size_t>(j)].flat_index;
        for (std::int64_t t = 0; t < first_day; ++t) {
            offsets(j) += static_cast<double>(panel.values(t, col));
        }
    }

    const CredibleBand daily = band(ens, cfg.level);
    const CredibleBand cumulative = band(cumulative_paths(ens, offsets), cfg.level);

    const std::vector<std::string> scopes = regions_of(ens.keys);
    std::vector<CredibleBand> r_bands;
    for (const std::string& region : scopes) {
        bool has_cases = false;
        for (const SeriesKey& key : ens.keys) {
            has_cases |= key.region == region && key.feature == Feature::Cases;
        }
        if (has_cases) r_bands.push_back(band(crude_R(ens, region), cfg.level));
    }

    CredibleBand national_daily, national_cumulative;
    bool has_national_r = false;
    CredibleBand national_r;
    if (include_national) {
        const Ensemble national = aggregate_national(ens);
        national_daily = band(national, cfg.level);
        Eigen::VectorXd nat_offsets = Eigen::VectorXd::Zero(national.series());
        for (std::int64_t j = 0; j < national.series(); ++j) {
            const Feature f = national.keys[static_cast<size_t>(j)].feature;
            for (std::int64_t c = 0; c < panel.series(); ++c) {
                if (panel.keys[static_cast<size_t>(c)].feature != f) continue;
                for (std::int64_t t = 0; t < first_day; ++t) {
                    nat_offsets(j) += static_cast<double>(panel.values(t, c));
                }
            }
        }
        national_cumulative = band(cumulative_paths(national, nat_offsets), cfg.level);
        for (const SeriesKey& key : ens.keys) {
            has_national_r |= key.feature == Feature::Cases;
        }
        if (has_national_r) {
            national_r = band(crude_R(ens, kNationalScope), cfg.level);
        }
    }

    {
        std::ofstream out(output_path(cfg, "bands.csv"));
        if (!out) throw DataError("cannot open file for writing: " + output_path(cfg, "bands.csv"));
        write_band_header(out);
        append_band_rows(daily, "daily", out);
        append_band_rows(cumulative, "cumulative", out);
        for (const CredibleBand& rb : r_bands) append_band_rows(rb, "R", out);
        if (include_national) {
            append_band_rows(national_daily, "daily", out);
            append_band_rows(national_cumulative, "cumulative", out);
            if (has_national_r) append_band_rows(national_r, "R", out);
        }
    }

    for (const std::string& region : scopes) {
        write_scope_plot(cfg, daily, region, "daily", &panel, "plot_");
        write_scope_plot(cfg, cumulative, region, "cumulative", &panel, "plot_");
    }
    for (const CredibleBand& rb : r_bands) {
        const std::string scope = rb.keys.front().region;
        PlotPanel panel_r = panel_from_band(rb, 0, "crude R — cases");
        panel_r.observed = observed_r_points(panel, scope);
        write_plot_svg_file(scope + " — R", {panel_r},
                            output_path(cfg, "plot_" + sanitize_for_filename(scope) + "_R.svg"));
    }
    if (include_national) {
        write_scope_plot(cfg, national_daily, kNationalScope, "daily", &panel, "plot_");
        write_scope_plot(cfg, national_cumulative, kNationalScope, "cumulative", &panel, "plot_");
        if (has_national_r) {
            PlotPanel panel_r = panel_from_band(national_r, 0, "crude R — cases");
            panel_r.observed = observed_r_points(panel, kNationalScope);
            write_plot_svg_file(std::string(kNationalScope) + " — R", {panel_r},
                                output_path(cfg, std::string("plot_") + kNationalScope + "_R.svg"));
        }
    }

    std::cout << "predicted " << ens.day_count() << " days (" << cfg.horizon
              << " beyond the data) for " << ens.series() << " series, " << cfg.n_draws
              << " draws\n";
}

void cmd_scenario(const RunConfig& cfg, const std::string& spec_path) {
    ensure_out_dir(cfg);
    const CountPanel panel = load_panel(cfg);
    const BiLstmModel model = load_model_file(output_path(cfg, cfg.model_file));
    if (!same_keys(model.keys, panel.keys)) {
        throw DataError("model was trained on a different panel (series keys differ)");
    }
    const ScenarioSpec spec = load_scenario_spec(spec_path);
    const ScenarioImpact impact =
        run_scenario(model, panel, spec, cfg.horizon, cfg.n_draws, cfg.level, cfg.train.seed);
    write_impact_csv_file(impact, output_path(cfg, "impact.csv"));

    write_scope_plot(cfg, impact.delta_daily, spec.region, "daily", nullptr, "impact_");
    write_scope_plot(cfg, impact.delta_cumulative, spec.region, "cumulative", nullptr, "impact_");
    write_scope_plot(cfg, impact.delta_national_daily, kNationalScope, "daily", nullptr,
                     "impact_");
    write_scope_plot(cfg, impact.delta_national_cumulative, kNationalScope, "cumulative", nullptr,
                     "impact_");

    std::cout << "scenario \"" << spec.label << "\": " << spec.region << " "
              << feature_name(spec.feature) << " x" << spec.daily_multiplier << " over last "
              << spec.window_days << " days; impact over " << impact.days.size() << " days\n";
}

}  // namespace countcast
