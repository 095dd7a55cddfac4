#include "countcast/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "countcast/errors.hpp"

namespace countcast {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

KeyValueMap parse_key_values(std::istream& in, const std::string& origin) {
    KeyValueMap kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw UsageError(origin + ":" + std::to_string(line_no) +
                             ": expected `key = value`, got \"" + text + "\"");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": duplicate key \"" + key +
                             "\"");
        }
    }
    return kv;
}

KeyValueMap parse_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    return parse_key_values(in, path);
}

std::string kv_string(const KeyValueMap& kv, const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

std::int64_t kv_int(const KeyValueMap& kv, const std::string& key, std::int64_t fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        size_t used = 0;
        const std::int64_t v = std::stoll(it->second, &used);
        if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("config key \"" + key + "\": expected an integer, got \"" + it->second + "\"");
}

std::uint64_t kv_uint(const KeyValueMap& kv, const std::string& key, std::uint64_t fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        size_t used = 0;
        const std::uint64_t v = std::stoull(it->second, &used);
        if (used == it->second.size() && it->second[0] != '-') return v;
    } catch (const std::exception&) {
    }
    throw UsageError("config key \"" + key + "\": expected a non-negative integer, got \"" +
                     it->second + "\"");
}

double kv_double(const KeyValueMap& kv, const std::string& key, double fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("config key \"" + key + "\": expected a number, got \"" + it->second + "\"");
}

bool kv_bool(const KeyValueMap& kv, const std::string& key, bool fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key \"" + key + "\": expected true/false, got \"" + it->second + "\"");
}

RunConfig run_config_from(const KeyValueMap& kv) {
    static const std::set<std::string> known = {
        "input_csv",      "panel_csv",         "model_file",
        "out_dir",        "steps",             "batch_size",
        "validation_per_batch",                "lookback",
        "hidden",         "dropout",           "recurrent_dropout",
        "learning_rate",  "seed",              "horizon",
        "n_draws",        "level",             "regions",
        "date_column",    "region_column",     "cases_column",
        "deaths_column",  "recovered_column",  "date_format",
    };
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw UsageError("unknown config key \"" + key + "\"");
    }

    RunConfig cfg;
    cfg.input_csv = kv_string(kv, "input_csv", cfg.input_csv);
    cfg.panel_csv = kv_string(kv, "panel_csv", cfg.panel_csv);
    cfg.model_file = kv_string(kv, "model_file", cfg.model_file);
    cfg.out_dir = kv_string(kv, "out_dir", cfg.out_dir);

    cfg.train.steps = static_cast<int>(kv_int(kv, "steps", cfg.train.steps));
    cfg.train.batch_size = static_cast<int>(kv_int(kv, "batch_size", cfg.train.batch_size));
    cfg.train.validation_per_batch =
        static_cast<int>(kv_int(kv, "validation_per_batch", cfg.train.validation_per_batch));
    cfg.train.lookback = static_cast<int>(kv_int(kv, "lookback", cfg.train.lookback));
    cfg.train.hidden = static_cast<int>(kv_int(kv, "hidden", cfg.train.hidden));
    cfg.train.dropout = kv_double(kv, "dropout", cfg.train.dropout);
    cfg.train.recurrent_dropout = kv_double(kv, "recurrent_dropout", cfg.train.recurrent_dropout);
    cfg.train.learning_rate = kv_double(kv, "learning_rate", cfg.train.learning_rate);
    cfg.train.seed = kv_uint(kv, "seed", cfg.train.seed);

    cfg.horizon = static_cast<int>(kv_int(kv, "horizon", cfg.horizon));
    cfg.n_draws = static_cast<int>(kv_int(kv, "n_draws", cfg.n_draws));
    cfg.level = kv_double(kv, "level", cfg.level);
    if (cfg.horizon < 0) throw UsageError("horizon must be >= 0");
    if (cfg.n_draws < 1) throw UsageError("n_draws must be >= 1");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw UsageError("level must lie in (0, 1)");

    const std::string regions = kv_string(kv, "regions", "");
    std::stringstream ss(regions);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string r = trim(item);
        if (!r.empty()) cfg.region_filter.push_back(r);
    }

    cfg.columns.date = kv_string(kv, "date_column", cfg.columns.date);
    cfg.columns.region = kv_string(kv, "region_column", cfg.columns.region);
    cfg.columns.cases = kv_string(kv, "cases_column", cfg.columns.cases);
    cfg.columns.deaths = kv_string(kv, "deaths_column", cfg.columns.deaths);
    cfg.columns.recovered = kv_string(kv, "recovered_column", cfg.columns.recovered);
    const std::string fmt = kv_string(kv, "date_format", cfg.columns.dmy_dates ? "dmy" : "iso");
    if (fmt == "dmy") {
        cfg.columns.dmy_dates = true;
    } else if (fmt == "iso") {
        cfg.columns.dmy_dates = false;
    } else {
        throw UsageError("config key \"date_format\": expected iso or dmy, got \"" + fmt + "\"");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from(parse_key_value_file(path));
}

}  // namespace countcast
