#include "countcast/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "countcast/errors.hpp"

namespace countcast {

namespace {

constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagStep = 2;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CellTrace {
    Eigen::VectorXd x, hm, i, f, g, o, c, tanh_c;
};

struct DirectionTrace {
    std::vector<CellTrace> steps;
    Eigen::VectorXd h_final;
};

void check_finite_window(const Eigen::MatrixXd& window) {
    if (!window.allFinite()) throw NumericError("non-finite value in input window");
}

// Consumes the window rows first-to-last (reversed=false) or last-to-first.
Eigen::VectorXd run_direction(const DirectionWeights& w, const Eigen::MatrixXd& window,
                              bool reversed, const Eigen::VectorXd& rec_mask,
                              DirectionTrace* trace) {
    const Eigen::Index k = window.rows();
    const Eigen::Index hidden = w.W_i.rows();
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
    if (trace) trace->steps.resize(static_cast<size_t>(k));
    for (Eigen::Index s = 0; s < k; ++s) {
        const Eigen::Index row = reversed ? k - 1 - s : s;
        const Eigen::VectorXd x = window.row(row).transpose();
        const Eigen::VectorXd hm = h.cwiseProduct(rec_mask);
        const Eigen::VectorXd gate_i =
            (w.W_i * x + w.U_i * hm + w.b_i).unaryExpr([](double v) { return sigmoid(v); });
        const Eigen::VectorXd gate_f =
            (w.W_f * x + w.U_f * hm + w.b_f).unaryExpr([](double v) { return sigmoid(v); });
        const Eigen::VectorXd gate_g =
            (w.W_g * x + w.U_g * hm + w.b_g).unaryExpr([](double v) { return std::tanh(v); });
        const Eigen::VectorXd gate_o =
            (w.W_o * x + w.U_o * hm + w.b_o).unaryExpr([](double v) { return sigmoid(v); });
        c = gate_f.cwiseProduct(c) + gate_i.cwiseProduct(gate_g);
        const Eigen::VectorXd tc = c.unaryExpr([](double v) { return std::tanh(v); });
        h = gate_o.cwiseProduct(tc);
        if (trace) {
            CellTrace& t = trace->steps[static_cast<size_t>(s)];
            t.x = x;
            t.hm = hm;
            t.i = gate_i;
            t.f = gate_f;
            t.g = gate_g;
            t.o = gate_o;
            t.c = c;
            t.tanh_c = tc;
        }
    }
    if (trace) trace->h_final = h;
    return h;
}

struct ForwardTrace {
    DirectionTrace fwd, bwd;
    Eigen::VectorXd concat_masked;  // [h_fwd; h_bwd] after the output mask
    Eigen::VectorXd prediction;
};

Eigen::VectorXd forward_traced(const Eigen::MatrixXd& window, const ModelParams& p,
                               const DropoutMasks& masks, ForwardTrace* trace) {
    const Eigen::Index hidden = p.forward.W_i.rows();
    const Eigen::VectorXd h_fwd =
        run_direction(p.forward, window, false, masks.recurrent_forward, trace ? &trace->fwd : nullptr);
    const Eigen::VectorXd h_bwd =
        run_direction(p.backward, window, true, masks.recurrent_backward, trace ? &trace->bwd : nullptr);
    Eigen::VectorXd concat(2 * hidden);
    concat.head(hidden) = h_fwd;
    concat.tail(hidden) = h_bwd;
    const Eigen::VectorXd masked = concat.cwiseProduct(masks.output);
    Eigen::VectorXd pred = p.dense_W * masked + p.dense_b;
    if (trace) {
        trace->concat_masked = masked;
        trace->prediction = pred;
    }
    return pred;
}

// Accumulates one direction's share of the gradient. dh_final is the loss
// gradient arriving at the direction's final hidden state.
void backprop_direction(const DirectionWeights& w, const DirectionTrace& trace,
                        const Eigen::VectorXd& rec_mask, const Eigen::VectorXd& dh_final,
                        DirectionWeights& grad) {
    const Eigen::Index k = static_cast<Eigen::Index>(trace.steps.size());
    const Eigen::Index hidden = w.W_i.rows();
    Eigen::VectorXd dh = dh_final;
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(hidden);
    for (Eigen::Index s = k - 1; s >= 0; --s) {
        const CellTrace& t = trace.steps[static_cast<size_t>(s)];
        const Eigen::VectorXd da_o =
            dh.cwiseProduct(t.tanh_c).cwiseProduct(t.o).cwiseProduct(Eigen::VectorXd::Ones(hidden) - t.o);
        dc += dh.cwiseProduct(t.o).cwiseProduct(
            (Eigen::VectorXd::Ones(hidden) - t.tanh_c.cwiseProduct(t.tanh_c)));
        const Eigen::VectorXd c_prev =
            s == 0 ? Eigen::VectorXd::Zero(hidden) : trace.steps[static_cast<size_t>(s - 1)].c;
        const Eigen::VectorXd da_f = dc.cwiseProduct(c_prev).cwiseProduct(t.f).cwiseProduct(
            Eigen::VectorXd::Ones(hidden) - t.f);
        const Eigen::VectorXd da_i = dc.cwiseProduct(t.g).cwiseProduct(t.i).cwiseProduct(
            Eigen::VectorXd::Ones(hidden) - t.i);
        const Eigen::VectorXd da_g =
            dc.cwiseProduct(t.i).cwiseProduct(Eigen::VectorXd::Ones(hidden) - t.g.cwiseProduct(t.g));

        grad.W_i.noalias() += da_i * t.x.transpose();
        grad.W_f.noalias() += da_f * t.x.transpose();
        grad.W_g.noalias() += da_g * t.x.transpose();
        grad.W_o.noalias() += da_o * t.x.transpose();
        grad.U_i.noalias() += da_i * t.hm.transpose();
        grad.U_f.noalias() += da_f * t.hm.transpose();
        grad.U_g.noalias() += da_g * t.hm.transpose();
        grad.U_o.noalias() += da_o * t.hm.transpose();
        grad.b_i += da_i;
        grad.b_f += da_f;
        grad.b_g += da_g;
        grad.b_o += da_o;

        const Eigen::VectorXd dhm = w.U_i.transpose() * da_i + w.U_f.transpose() * da_f +
                                    w.U_g.transpose() * da_g + w.U_o.transpose() * da_o;
        dh = dhm.cwiseProduct(rec_mask);
        dc = dc.cwiseProduct(t.f);
    }
}

DirectionWeights zero_direction(int input_dim, int hidden) {
    DirectionWeights d;
    d.W_i = Eigen::MatrixXd::Zero(hidden, input_dim);
    d.W_f = Eigen::MatrixXd::Zero(hidden, input_dim);
    d.W_g = Eigen::MatrixXd::Zero(hidden, input_dim);
    d.W_o = Eigen::MatrixXd::Zero(hidden, input_dim);
    d.U_i = Eigen::MatrixXd::Zero(hidden, hidden);
    d.U_f = Eigen::MatrixXd::Zero(hidden, hidden);
    d.U_g = Eigen::MatrixXd::Zero(hidden, hidden);
    d.U_o = Eigen::MatrixXd::Zero(hidden, hidden);
    d.b_i = Eigen::VectorXd::Zero(hidden);
    d.b_f = Eigen::VectorXd::Zero(hidden);
    d.b_g = Eigen::VectorXd::Zero(hidden);
    d.b_o = Eigen::VectorXd::Zero(hidden);
    return d;
}

void fill_uniform(Eigen::MatrixXd& m, double limit, rng::Stream& stream) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = (2.0 * stream.next_double() - 1.0) * limit;
        }
    }
}

}  // namespace

DropoutMasks DropoutMasks::none(int hidden) {
    DropoutMasks m;
    m.recurrent_forward = Eigen::VectorXd::Ones(hidden);
    m.recurrent_backward = Eigen::VectorXd::Ones(hidden);
    m.output = Eigen::VectorXd::Ones(2 * hidden);
    return m;
}

DropoutMasks DropoutMasks::draw(int hidden, double dropout, double recurrent_dropout,
                                rng::Stream& stream) {
    auto draw_mask = [&](Eigen::Index n, double p) {
        Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
        if (p <= 0.0) return mask;
        const double keep_scale = 1.0 / (1.0 - p);
        for (Eigen::Index i = 0; i < n; ++i) {
            mask(i) = stream.next_double() < p ? 0.0 : keep_scale;
        }
        return mask;
    };
    DropoutMasks m;
    m.recurrent_forward = draw_mask(hidden, recurrent_dropout);
    m.recurrent_backward = draw_mask(hidden, recurrent_dropout);
    m.output = draw_mask(2 * hidden, dropout);
    return m;
}

CellState lstm_cell_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                         const Eigen::VectorXd& c, const DirectionWeights& w,
                         const Eigen::VectorXd& rec_mask) {
    if (!x.allFinite() || !h.allFinite() || !c.allFinite()) {
        throw NumericError("non-finite value in LSTM cell input");
    }
    const Eigen::VectorXd hm = h.cwiseProduct(rec_mask);
    CellState out;
    const Eigen::VectorXd gate_i =
        (w.W_i * x + w.U_i * hm + w.b_i).unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::VectorXd gate_f =
        (w.W_f * x + w.U_f * hm + w.b_f).unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::VectorXd gate_g =
        (w.W_g * x + w.U_g * hm + w.b_g).unaryExpr([](double v) { return std::tanh(v); });
    const Eigen::VectorXd gate_o =
        (w.W_o * x + w.U_o * hm + w.b_o).unaryExpr([](double v) { return sigmoid(v); });
    out.c = gate_f.cwiseProduct(c) + gate_i.cwiseProduct(gate_g);
    out.h = gate_o.cwiseProduct(out.c.unaryExpr([](double v) { return std::tanh(v); }));
    return out;
}

Eigen::VectorXd model_forward(const Eigen::MatrixXd& window, const BiLstmModel& model,
                              const DropoutMasks& masks) {
    if (window.rows() != model.lookback || window.cols() != model.input_dim()) {
        throw DataError("window shape " + std::to_string(window.rows()) + "x" +
                        std::to_string(window.cols()) + " does not match model (" +
                        std::to_string(model.lookback) + "x" + std::to_string(model.input_dim()) +
                        ")");
    }
    check_finite_window(window);
    return forward_traced(window, model.params, masks, nullptr);
}

Eigen::VectorXd model_forward(const Eigen::MatrixXd& window, const BiLstmModel& model) {
    return model_forward(window, model, DropoutMasks::none(model.hidden_dim()));
}

double mae_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() == 0) {
        throw DataError("mae_loss shape mismatch");
    }
    return (pred - target).cwiseAbs().mean();
}

ModelParams zero_like(const ModelParams& p) {
    ModelParams z;
    z.forward = zero_direction(p.input_dim(), p.hidden_dim());
    z.backward = zero_direction(p.input_dim(), p.hidden_dim());
    z.dense_W = Eigen::MatrixXd::Zero(p.dense_W.rows(), p.dense_W.cols());
    z.dense_b = Eigen::VectorXd::Zero(p.dense_b.size());
    return z;
}

ModelParams backward(const std::vector<WindowSample>& batch, const BiLstmModel& model,
                     const std::vector<DropoutMasks>& masks, double* batch_mae) {
    if (batch.empty()) throw DataError("backward: empty batch");
    if (masks.size() != batch.size()) throw DataError("backward: one mask set per sample required");
    const Eigen::Index d_len = model.input_dim();
    const Eigen::Index hidden = model.hidden_dim();
    const double denom = static_cast<double>(batch.size()) * static_cast<double>(d_len);

    ModelParams grads = zero_like(model.params);
    double abs_sum = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
        const WindowSample& sample = batch[b];
        if (sample.input.rows() != model.lookback || sample.input.cols() != d_len) {
            throw DataError("backward: sample window shape mismatch");
        }
        check_finite_window(sample.input);
        ForwardTrace trace;
        forward_traced(sample.input, model.params, masks[b], &trace);

        // d(mean |pred - y|)/dpred, subgradient 0 at exact zeros.
        Eigen::VectorXd dpred(d_len);
        for (Eigen::Index j = 0; j < d_len; ++j) {
            const double diff = trace.prediction(j) - sample.target(j);
            abs_sum += std::abs(diff);
            dpred(j) = diff > 0.0 ? 1.0 / denom : (diff < 0.0 ? -1.0 / denom : 0.0);
        }

        grads.dense_b += dpred;
        grads.dense_W.noalias() += dpred * trace.concat_masked.transpose();
        const Eigen::VectorXd dmasked = model.params.dense_W.transpose() * dpred;
        const Eigen::VectorXd dconcat = dmasked.cwiseProduct(masks[b].output);
        backprop_direction(model.params.forward, trace.fwd, masks[b].recurrent_forward,
                           dconcat.head(hidden), grads.forward);
        backprop_direction(model.params.backward, trace.bwd, masks[b].recurrent_backward,
                           dconcat.tail(hidden), grads.backward);
    }
    if (batch_mae) *batch_mae = abs_sum / denom;

    for_each_block(grads, [](const char* name, const auto& block) {
        if (!block.allFinite()) {
            throw NumericError(std::string("non-finite gradient in block ") + name);
        }
    });
    return grads;
}

void optimizer_step(ModelParams& params, const ModelParams& grads, RmspropState& state,
                    double learning_rate) {
    if (!state.initialized) {
        state.acc = zero_like(params);
        state.initialized = true;
    }
    auto update = [&](auto& w, const auto& g, auto& acc) {
        acc.array() = 0.9 * acc.array() + 0.1 * g.array().square();
        w.array() -= learning_rate * g.array() / (acc.array() + 1e-8).sqrt();
    };
    auto dir = [&](DirectionWeights& w, const DirectionWeights& g, DirectionWeights& a) {
        update(w.W_i, g.W_i, a.W_i);
        update(w.W_f, g.W_f, a.W_f);
        update(w.W_g, g.W_g, a.W_g);
        update(w.W_o, g.W_o, a.W_o);
        update(w.U_i, g.U_i, a.U_i);
        update(w.U_f, g.U_f, a.U_f);
        update(w.U_g, g.U_g, a.U_g);
        update(w.U_o, g.U_o, a.U_o);
        update(w.b_i, g.b_i, a.b_i);
        update(w.b_f, g.b_f, a.b_f);
        update(w.b_g, g.b_g, a.b_g);
        update(w.b_o, g.b_o, a.b_o);
    };
    dir(params.forward, grads.forward, state.acc.forward);
    dir(params.backward, grads.backward, state.acc.backward);
    update(params.dense_W, grads.dense_W, state.acc.dense_W);
    update(params.dense_b, grads.dense_b, state.acc.dense_b);
}

ModelParams init_params(int input_dim, int hidden, rng::Stream& stream) {
    if (input_dim < 1 || hidden < 1) throw UsageError("model dimensions must be >= 1");
    ModelParams p;
    p.forward = zero_direction(input_dim, hidden);
    p.backward = zero_direction(input_dim, hidden);
    p.dense_W = Eigen::MatrixXd::Zero(input_dim, 2 * hidden);
    p.dense_b = Eigen::VectorXd::Zero(input_dim);

    const double limit_in = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
    const double limit_rec = std::sqrt(6.0 / static_cast<double>(2 * hidden));
    const double limit_dense = std::sqrt(6.0 / static_cast<double>(2 * hidden + input_dim));
    auto init_direction = [&](DirectionWeights& d) {
        fill_uniform(d.W_i, limit_in, stream);
        fill_uniform(d.W_f, limit_in, stream);
        fill_uniform(d.W_g, limit_in, stream);
        fill_uniform(d.W_o, limit_in, stream);
        fill_uniform(d.U_i, limit_rec, stream);
        fill_uniform(d.U_f, limit_rec, stream);
        fill_uniform(d.U_g, limit_rec, stream);
        fill_uniform(d.U_o, limit_rec, stream);
        d.b_f.setOnes();  // open forget gates at the start
    };
    init_direction(p.forward);
    init_direction(p.backward);
    fill_uniform(p.dense_W, limit_dense, stream);
    return p;
}

std::pair<BiLstmModel, TrainHistory> train(const CountPanel& panel, const TrainConfig& cfg) {
    if (cfg.lookback < 1 || cfg.hidden < 1) throw UsageError("lookback and hidden must be >= 1");
    if (cfg.batch_size < 1 || cfg.validation_per_batch < 0 ||
        cfg.validation_per_batch >= cfg.batch_size) {
        throw UsageError("need 0 <= validation_per_batch < batch_size");
    }
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0 || cfg.recurrent_dropout < 0.0 ||
        cfg.recurrent_dropout >= 1.0) {
        throw UsageError("dropout rates must lie in [0, 1)");
    }
    if (panel.days() <= cfg.lookback + 1) {
        throw DataError("insufficient history: need more than " +
                        std::to_string(cfg.lookback + 1) + " days, have " +
                        std::to_string(panel.days()));
    }

    BiLstmModel model;
    model.norm = fit_normalizer(panel);
    model.lookback = cfg.lookback;
    model.keys = panel.keys;
    model.config = cfg;
    rng::Stream init_stream(rng::derive_seed(cfg.seed, kTagInit));
    model.params = init_params(static_cast<int>(panel.series()), cfg.hidden, init_stream);

    const Eigen::MatrixXd normalized = normalize(panel, model.norm);
    const std::vector<WindowSample> windows = make_windows(normalized, cfg.lookback);

    TrainHistory history;
    history.train_mae.reserve(static_cast<size_t>(cfg.steps));
    history.val_mae.reserve(static_cast<size_t>(cfg.steps));

    RmspropState state;
    const int train_per_step = cfg.batch_size - cfg.validation_per_batch;
    for (int step = 1; step <= cfg.steps; ++step) {
        rng::Stream stream(rng::derive_seed(cfg.seed, kTagStep, static_cast<std::uint64_t>(step)));
        std::vector<size_t> picks(static_cast<size_t>(cfg.batch_size));
        for (auto& idx : picks) idx = static_cast<size_t>(stream.next_below(windows.size()));

        // The first validation_per_batch picks are held out of this step's
        // gradient; nothing stops them being redrawn as training samples on a
        // later step.
        std::vector<WindowSample> val_batch;
        std::vector<WindowSample> train_batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (b < cfg.validation_per_batch) {
                val_batch.push_back(windows[picks[static_cast<size_t>(b)]]);
            } else {
                train_batch.push_back(windows[picks[static_cast<size_t>(b)]]);
            }
        }

        std::vector<DropoutMasks> masks;
        masks.reserve(static_cast<size_t>(train_per_step));
        for (int b = 0; b < train_per_step; ++b) {
            masks.push_back(DropoutMasks::draw(cfg.hidden, cfg.dropout, cfg.recurrent_dropout, stream));
        }

        double train_mae = 0.0;
        const ModelParams grads = backward(train_batch, model, masks, &train_mae);

        double val_mae = 0.0;
        if (!val_batch.empty()) {
            const DropoutMasks none = DropoutMasks::none(cfg.hidden);
            double abs_sum = 0.0;
            for (const WindowSample& s : val_batch) {
                const Eigen::VectorXd pred = forward_traced(s.input, model.params, none, nullptr);
                abs_sum += (pred - s.target).cwiseAbs().sum();
            }
            val_mae = abs_sum / (static_cast<double>(val_batch.size()) *
                                 static_cast<double>(panel.series()));
        }

        history.train_mae.push_back(train_mae);
        history.val_mae.push_back(val_mae);
        optimizer_step(model.params, grads, state, cfg.learning_rate);
    }
    return {std::move(model), std::move(history)};
}

PointForecast concat_forecasts(const PointForecast& a, const PointForecast& b) {
    if (!same_keys(a.keys, b.keys)) throw DataError("cannot concatenate forecasts over different series");
    PointForecast out;
    out.keys = a.keys;
    out.days = a.days;
    out.days.insert(out.days.end(), b.days.begin(), b.days.end());
    out.observed = a.observed;
    out.observed.insert(out.observed.end(), b.observed.begin(), b.observed.end());
    out.values.resize(a.values.rows() + b.values.rows(),
                      std::max(a.values.cols(), b.values.cols()));
    if (a.values.rows() > 0) out.values.topRows(a.values.rows()) = a.values;
    if (b.values.rows() > 0) out.values.bottomRows(b.values.rows()) = b.values;
    return out;
}

PointForecast predict_onestep_all(const BiLstmModel& model, const CountPanel& panel) {
    const std::int64_t t_len = panel.days();
    const int k = model.lookback;
    if (t_len <= k) {
        throw DataError("insufficient history: need more than " + std::to_string(k) +
                        " days, have " + std::to_string(t_len));
    }
    const Eigen::MatrixXd normalized = normalize(panel, model.norm);
    PointForecast out;
    out.keys = model.keys;
    out.values.resize(t_len - k, panel.series());
    const DropoutMasks none = DropoutMasks::none(model.hidden_dim());
    for (std::int64_t t = k; t < t_len; ++t) {
        const Eigen::MatrixXd window = normalized.middleRows(t - k, k);
        const Eigen::VectorXd z = model_forward(window, model, none);
        out.values.row(t - k) = denormalize_row(z, model.norm).transpose();
        out.days.push_back(t);
        out.observed.push_back(true);
    }
    return out;
}

PointForecast forecast_from_history(const BiLstmModel& model, const Eigen::MatrixXd& normalized,
                                    std::int64_t first_day, int horizon) {
    const int k = model.lookback;
    if (normalized.rows() < k) {
        throw DataError("insufficient history: need at least " + std::to_string(k) + " days");
    }
    if (horizon < 0) throw UsageError("horizon must be >= 0");
    const DropoutMasks none = DropoutMasks::none(model.hidden_dim());

    PointForecast out;
    out.keys = model.keys;
    out.values.resize(horizon, normalized.cols());
    Eigen::MatrixXd window = normalized.bottomRows(k);
    for (int h = 0; h < horizon; ++h) {
        const Eigen::VectorXd z = model_forward(window, model, none);
        const Eigen::VectorXd counts = denormalize_row(z, model.norm);
        out.values.row(h) = counts.transpose();
        out.days.push_back(first_day + h);
        out.observed.push_back(false);
        // Feed the clamped count-scale value back, not the raw output.
        if (k > 1) window.topRows(k - 1) = window.bottomRows(k - 1).eval();
        window.row(k - 1) = normalize_row(counts, model.norm).transpose();
    }
    return out;
}

PointForecast forecast_horizon(const BiLstmModel& model, const CountPanel& panel, int horizon) {
    const Eigen::MatrixXd normalized = normalize(panel, model.norm);
    return forecast_from_history(model, normalized, panel.days(), horizon);
}

std::int64_t count_parameters(int input_dim, int hidden) {
    const std::int64_t d = input_dim;
    const std::int64_t h = hidden;
    return 2 * (4 * (h * d + h * h + h)) + (d * 2 * h + d);
}

std::int64_t count_parameters(const BiLstmModel& model) {
    return count_parameters(model.input_dim(), model.hidden_dim());
}

}  // namespace countcast
