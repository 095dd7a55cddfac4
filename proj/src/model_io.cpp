#include "countcast/model_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "countcast/errors.hpp"

namespace countcast {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'M', 'O', 'D', 'E', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(out, &value, sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) throw DataError("model file truncated");
}

template <typename T>
T get(std::istream& in) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value;
    get_bytes(in, &value, sizeof(T));
    return value;
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw DataError("model file corrupt: oversized string");
    std::string s(n, '\0');
    get_bytes(in, s.data(), n);
    return s;
}

void put_block(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    }
}

void put_block(std::ostream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(out, v(i));
}

void get_block(std::istream& in, Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(in);
    }
}

void get_block(std::istream& in, Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get<double>(in);
}

}  // namespace

void save_model(const BiLstmModel& model, std::ostream& out) {
    put_bytes(out, kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::int32_t>(out, model.input_dim());
    put<std::int32_t>(out, model.hidden_dim());
    put<std::int32_t>(out, model.lookback);

    const TrainConfig& c = model.config;
    put<std::int32_t>(out, c.steps);
    put<std::int32_t>(out, c.batch_size);
    put<std::int32_t>(out, c.validation_per_batch);
    put<std::int32_t>(out, c.lookback);
    put<std::int32_t>(out, c.hidden);
    put<double>(out, c.dropout);
    put<double>(out, c.recurrent_dropout);
    put<double>(out, c.learning_rate);
    put<std::uint64_t>(out, c.seed);

    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.keys.size()));
    for (const SeriesKey& key : model.keys) {
        put_string(out, key.region);
        put<std::int32_t>(out, static_cast<std::int32_t>(key.feature));
        put<std::int32_t>(out, key.flat_index);
    }

    put_block(out, model.norm.location);
    put_block(out, model.norm.scale);
    for_each_block(model.params, [&](const char*, const auto& block) { put_block(out, block); });
    if (!out) throw DataError("failed writing model data");
}

void save_model_file(const BiLstmModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    save_model(model, out);
    out.flush();
    if (!out) throw DataError("failed writing model file: " + path);
}

BiLstmModel load_model(std::istream& in) {
    char magic[8];
    get_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a model file (bad magic)");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) {
        throw DataError("unsupported model file version " + std::to_string(version));
    }
    const auto input_dim = get<std::int32_t>(in);
    const auto hidden = get<std::int32_t>(in);
    const auto lookback = get<std::int32_t>(in);
    if (input_dim < 1 || hidden < 1 || lookback < 1) {
        throw DataError("model file corrupt: bad dimensions");
    }

    BiLstmModel model;
    model.lookback = lookback;
    TrainConfig& c = model.config;
    c.steps = get<std::int32_t>(in);
    c.batch_size = get<std::int32_t>(in);
    c.validation_per_batch = get<std::int32_t>(in);
    c.lookback = get<std::int32_t>(in);
    c.hidden = get<std::int32_t>(in);
    c.dropout = get<double>(in);
    c.recurrent_dropout = get<double>(in);
    c.learning_rate = get<double>(in);
    c.seed = get<std::uint64_t>(in);

    const auto n_keys = get<std::uint32_t>(in);
    if (static_cast<std::int32_t>(n_keys) != input_dim) {
        throw DataError("model file corrupt: key count does not match width");
    }
    model.keys.resize(n_keys);
    for (SeriesKey& key : model.keys) {
        key.region = get_string(in);
        const auto feature = get<std::int32_t>(in);
        if (feature < 0 || feature >= kFeatureCount) {
            throw DataError("model file corrupt: bad feature code");
        }
        key.feature = static_cast<Feature>(feature);
        key.flat_index = get<std::int32_t>(in);
    }

    model.norm.location.resize(input_dim);
    model.norm.scale.resize(input_dim);
    get_block(in, model.norm.location);
    get_block(in, model.norm.scale);

    rng::Stream dummy(0);
    model.params = init_params(input_dim, hidden, dummy);  // sizes the blocks
    for_each_block(model.params, [&](const char*, auto& block) { get_block(in, block); });

    // Anything left over means the file was written by something else.
    in.peek();
    if (!in.eof()) throw DataError("model file corrupt: trailing data");
    return model;
}

BiLstmModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    return load_model(in);
}

}  // namespace countcast
