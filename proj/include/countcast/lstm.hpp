#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "countcast/panel.hpp"
#include "countcast/rng.hpp"

namespace countcast {

struct TrainConfig {
    int steps = 200;
    int batch_size = 10;
    int validation_per_batch = 2;
    int lookback = 14;
    int hidden = 32;
    double dropout = 0.10;            // on the concatenated output state
    double recurrent_dropout = 0.10;  // on h entering the gates
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

// One direction of the recurrent layer. W_* map input to gates (H x D),
// U_* map hidden to gates (H x H), b_* are gate biases (H).
struct DirectionWeights {
    Eigen::MatrixXd W_i, W_f, W_g, W_o;
    Eigen::MatrixXd U_i, U_f, U_g, U_o;
    Eigen::VectorXd b_i, b_f, b_g, b_o;
};

struct ModelParams {
    DirectionWeights forward;
    DirectionWeights backward;
    Eigen::MatrixXd dense_W;  // D x 2H
    Eigen::VectorXd dense_b;  // D

    int input_dim() const { return static_cast<int>(dense_W.rows()); }
    int hidden_dim() const { return static_cast<int>(forward.W_i.rows()); }
};

// Visits every weight block in canonical order (forward gates, backward
// gates, dense). The order is load-bearing: serialization, the optimizer and
// the gradient checks all rely on it.
template <typename Params, typename Fn>
void for_each_block(Params&& p, Fn&& fn) {
    auto direction = [&](auto& d, const char* prefix) {
        const std::string pre(prefix);
        fn((pre + ".W_i").c_str(), d.W_i);
        fn((pre + ".W_f").c_str(), d.W_f);
        fn((pre + ".W_g").c_str(), d.W_g);
        fn((pre + ".W_o").c_str(), d.W_o);
        fn((pre + ".U_i").c_str(), d.U_i);
        fn((pre + ".U_f").c_str(), d.U_f);
        fn((pre + ".U_g").c_str(), d.U_g);
        fn((pre + ".U_o").c_str(), d.U_o);
        fn((pre + ".b_i").c_str(), d.b_i);
        fn((pre + ".b_f").c_str(), d.b_f);
        fn((pre + ".b_g").c_str(), d.b_g);
        fn((pre + ".b_o").c_str(), d.b_o);
    };
    direction(p.forward, "forward");
    direction(p.backward, "backward");
    fn("dense_W", p.dense_W);
    fn("dense_b", p.dense_b);
}

struct BiLstmModel {
    ModelParams params;
    NormalizationSpec norm;
    int lookback = 0;
    std::vector<SeriesKey> keys;
    TrainConfig config;

    int input_dim() const { return params.input_dim(); }
    int hidden_dim() const { return params.hidden_dim(); }
};

struct TrainHistory {
    std::vector<double> train_mae;  // normalized log-scale units
    std::vector<double> val_mae;
};

// Inverted dropout masks, entries in {0, 1/(1-p)}; all-ones at inference.
struct DropoutMasks {
    Eigen::VectorXd recurrent_forward;   // H
    Eigen::VectorXd recurrent_backward;  // H
    Eigen::VectorXd output;              // 2H

    static DropoutMasks none(int hidden);
    static DropoutMasks draw(int hidden, double dropout, double recurrent_dropout,
                             rng::Stream& stream);
};

struct CellState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

// One LSTM step: sigmoid input/forget/output gates, tanh candidate, with the
// recurrent mask applied to h before it enters the gates.
CellState lstm_cell_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                         const Eigen::VectorXd& c, const DirectionWeights& w,
                         const Eigen::VectorXd& rec_mask);

// Window of k rows -> next-day estimate in normalized units. The forward
// direction reads rows first-to-last, the backward direction last-to-first;
// final hidden states are concatenated and fed to the dense layer.
Eigen::VectorXd model_forward(const Eigen::MatrixXd& window, const BiLstmModel& model,
                              const DropoutMasks& masks);
Eigen::VectorXd model_forward(const Eigen::MatrixXd& window, const BiLstmModel& model);

double mae_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

// Exact gradient of the batch MAE with respect to every weight block, by
// backpropagation through time over both directions. The |.| subgradient at 0
// is taken as 0. Masks are per-sample and fixed for the whole evaluation.
ModelParams backward(const std::vector<WindowSample>& batch, const BiLstmModel& model,
                     const std::vector<DropoutMasks>& masks, double* batch_mae = nullptr);

ModelParams zero_like(const ModelParams& p);

struct RmspropState {
    ModelParams acc;
    bool initialized = false;
};

// acc <- 0.9 acc + 0.1 g^2 ; w <- w - lr g / sqrt(acc + 1e-8), elementwise.
void optimizer_step(ModelParams& params, const ModelParams& grads, RmspropState& state,
                    double learning_rate);

ModelParams init_params(int input_dim, int hidden, rng::Stream& stream);

std::pair<BiLstmModel, TrainHistory> train(const CountPanel& panel, const TrainConfig& cfg);

// Point guesses on the count scale, for observed days and/or a horizon.
struct PointForecast {
    std::vector<std::int64_t> days;
    std::vector<SeriesKey> keys;
    Eigen::MatrixXd values;  // |days| x D, >= 0
    std::vector<bool> observed;

    std::int64_t size() const { return static_cast<std::int64_t>(days.size()); }
};

PointForecast concat_forecasts(const PointForecast& a, const PointForecast& b);

// One-step-ahead guesses for every observed day t in [k, T), dropout off.
PointForecast predict_onestep_all(const BiLstmModel& model, const CountPanel& panel);

// Iterative roll-out: each predicted day is denormalized, clamped, and fed
// back (re-normalized) as the next window row.
PointForecast forecast_horizon(const BiLstmModel& model, const CountPanel& panel, int horizon);
PointForecast forecast_from_history(const BiLstmModel& model, const Eigen::MatrixXd& normalized,
                                    std::int64_t first_day, int horizon);

std::int64_t count_parameters(const BiLstmModel& model);
std::int64_t count_parameters(int input_dim, int hidden);

}  // namespace countcast
