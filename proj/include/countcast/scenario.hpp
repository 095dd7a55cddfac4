#pragma once

#include <cstdint>
#include <string>

#include "countcast/config.hpp"
#include "countcast/ensemble.hpp"
#include "countcast/lstm.hpp"
#include "countcast/panel.hpp"

namespace countcast {

// A counterfactual rewrite of one series' recent history: the last
// window_days observed days are scaled by daily_multiplier, compounding day
// by day unless compound is false.
struct ScenarioSpec {
    std::string label = "scenario";
    std::string region;
    Feature feature = Feature::Cases;
    int window_days = 0;
    double daily_multiplier = 1.0;
    bool compound = true;
};

// Reads a spec from key-value text (`region`, `feature`, `window_days`,
// `daily_multiplier`, `compound`, `label`); errors name the bad field.
ScenarioSpec scenario_spec_from(const KeyValueMap& kv);
ScenarioSpec load_scenario_spec(const std::string& path);

// Rewrites the last window_days cells of the target series:
// y' = round(y * multiplier^rank), rank 1..N oldest to newest (multiplier^1
// throughout when compound is false). Rounds half up.
CountPanel apply_scenario(const CountPanel& panel, const ScenarioSpec& spec);

// Draw-matched differences (perturbed - baseline) between two full pipeline
// runs that share every RNG stream. Bands cover the scenario window plus the
// horizon, for daily and cumulative counts, per series and nationally.
struct ScenarioImpact {
    ScenarioSpec spec;
    std::vector<std::int64_t> days;
    CredibleBand delta_daily;
    CredibleBand delta_cumulative;
    CredibleBand delta_national_daily;
    CredibleBand delta_national_cumulative;
};

ScenarioImpact run_scenario(const BiLstmModel& model, const CountPanel& panel,
                            const ScenarioSpec& spec, int horizon, int n_draws, double level,
                            std::uint64_t seed);

// Impact CSV: the band schema with a `delta_` quantity prefix.
void write_impact_csv(const ScenarioImpact& impact, std::ostream& out);
void write_impact_csv_file(const ScenarioImpact& impact, const std::string& path);

}  // namespace countcast
