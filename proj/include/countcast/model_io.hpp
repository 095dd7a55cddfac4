#pragma once

#include <iosfwd>
#include <string>

#include "countcast/lstm.hpp"

namespace countcast {

// Binary model file, little-endian, fixed layout: magic, version, dimensions,
// training settings, series keys, normalization constants, then every weight
// block row-major in canonical order. Round trips bit-exactly.
void save_model(const BiLstmModel& model, std::ostream& out);
void save_model_file(const BiLstmModel& model, const std::string& path);
BiLstmModel load_model(std::istream& in);
BiLstmModel load_model_file(const std::string& path);

}  // namespace countcast
