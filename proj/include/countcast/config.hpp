#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "countcast/lstm.hpp"
#include "countcast/panel.hpp"

namespace countcast {

// Flat `key = value` text, '#' starts a comment, blank lines ignored.
// Ordered map so diagnostics and dumps are stable.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::istream& in, const std::string& origin);
KeyValueMap parse_key_value_file(const std::string& path);

// Typed accessors; errors name the key and the offending text.
std::string kv_string(const KeyValueMap& kv, const std::string& key, const std::string& fallback);
std::int64_t kv_int(const KeyValueMap& kv, const std::string& key, std::int64_t fallback);
std::uint64_t kv_uint(const KeyValueMap& kv, const std::string& key, std::uint64_t fallback);
double kv_double(const KeyValueMap& kv, const std::string& key, double fallback);
bool kv_bool(const KeyValueMap& kv, const std::string& key, bool fallback);

struct RunConfig {
    std::string input_csv;            // raw cumulative counts (ingest)
    std::string panel_csv = "panel.csv";
    std::string model_file = "model.bin";
    std::string out_dir = "out";
    TrainConfig train;
    int horizon = 30;
    int n_draws = 1000;
    double level = 0.95;
    std::vector<std::string> region_filter;  // empty = all regions + national
    ColumnMapping columns;
};

// Builds a RunConfig from a key-value map; unknown keys are rejected so typos
// fail loudly rather than silently falling back to defaults.
RunConfig run_config_from(const KeyValueMap& kv);
RunConfig load_run_config(const std::string& path);

}  // namespace countcast
