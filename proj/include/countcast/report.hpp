#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "countcast/config.hpp"
#include "countcast/panel.hpp"

namespace countcast {

// Output paths all live under cfg.out_dir (absolute paths pass through).
std::string output_path(const RunConfig& cfg, const std::string& name);

struct IngestSummary {
    std::int64_t days = 0;
    std::int64_t series = 0;
    std::int64_t clamped = 0;
    Date first_date;
    Date last_date;
};

// Raw cumulative CSV -> canonical daily panel + a one-line summary.
IngestSummary cmd_ingest(const RunConfig& cfg);

// Panel -> trained model file + `step,train_mae,val_mae` history CSV.
void cmd_train(const RunConfig& cfg);

// Panel + model -> predictive grid CSV, band CSV (daily, cumulative, R; per
// region and national) and one SVG per (scope, quantity).
void cmd_predict(const RunConfig& cfg);

// Panel + model + scenario spec -> draw-matched difference bands and plots.
void cmd_scenario(const RunConfig& cfg, const std::string& spec_path);

}  // namespace countcast
