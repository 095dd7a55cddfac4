#include <doctest.h>

#include <cmath>
#include <vector>

#include "countcast/errors.hpp"
#include "countcast/lstm.hpp"
#include "gradient_check.hpp"
#include "test_util.hpp"

using namespace countcast;

namespace {

ModelParams zero_params(int input_dim, int hidden) {
    rng::Stream stream(0);
    ModelParams p = init_params(input_dim, hidden, stream);
    for_each_block(p, [](const char*, auto& block) { block.setZero(); });
    return p;
}

BiLstmModel make_model(ModelParams params, int lookback) {
    BiLstmModel model;
    const int input_dim = params.input_dim();
    model.params = std::move(params);
    model.lookback = lookback;
    model.norm.location = Eigen::VectorXd::Zero(input_dim);
    model.norm.scale = Eigen::VectorXd::Ones(input_dim);
    for (int j = 0; j < input_dim; ++j) {
        SeriesKey key;
        key.region = "R" + std::to_string(j);
        key.feature = Feature::Cases;
        key.flat_index = j;
        model.keys.push_back(key);
    }
    return model;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("lstm: cell step with zero weights halves the carry") {
    // All gates sit at sigmoid(0) = 1/2 and the candidate at tanh(0) = 0, so
    // c' = c/2 and h' = tanh(c/2)/2.
    const DirectionWeights w = zero_params(2, 3).forward;
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(3);
    const CellState out = lstm_cell_step(x, h, c, w, Eigen::VectorXd::Ones(3));
    for (int i = 0; i < 3; ++i) {
        CHECK(out.c(i) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(out.h(i) == doctest::Approx(0.23105857863000487).epsilon(1e-15));
    }
}

TEST_CASE("lstm: scalar cell step matches a hand-evaluated formula") {
    ModelParams p = zero_params(1, 1);
    DirectionWeights& w = p.forward;
    w.W_i(0, 0) = 0.5;
    w.W_f(0, 0) = -0.3;
    w.W_g(0, 0) = 0.8;
    w.W_o(0, 0) = 0.2;
    w.U_i(0, 0) = 0.25;
    w.U_f(0, 0) = 0.6;
    w.U_g(0, 0) = -0.4;
    w.U_o(0, 0) = 0.15;
    w.b_i(0) = 0.1;
    w.b_f(0) = 1.0;
    w.b_g(0) = -0.2;
    w.b_o(0) = 0.05;

    const double x = 0.3, h = 0.2, c = -0.4, mask = 1.5;
    const double hm = h * mask;
    const double gi = sigmoid(0.5 * x + 0.25 * hm + 0.1);
    const double gf = sigmoid(-0.3 * x + 0.6 * hm + 1.0);
    const double gg = std::tanh(0.8 * x - 0.4 * hm - 0.2);
    const double go = sigmoid(0.2 * x + 0.15 * hm + 0.05);
    const double c_new = gf * c + gi * gg;
    const double h_new = go * std::tanh(c_new);

    Eigen::VectorXd xv(1), hv(1), cv(1), mv(1);
    xv << x;
    hv << h;
    cv << c;
    mv << mask;
    const CellState out = lstm_cell_step(xv, hv, cv, w, mv);
    CHECK(out.c(0) == doctest::Approx(c_new).epsilon(1e-15));
    CHECK(out.h(0) == doctest::Approx(h_new).epsilon(1e-15));
}

TEST_CASE("lstm: cell step rejects non-finite input") {
    const DirectionWeights w = zero_params(1, 1).forward;
    Eigen::VectorXd x(1), h(1), c(1), m(1);
    x << std::numeric_limits<double>::quiet_NaN();
    h << 0.0;
    c << 0.0;
    m << 1.0;
    CHECK_THROWS_AS(lstm_cell_step(x, h, c, w, m), NumericError);
}

TEST_CASE("lstm: parameter count formula") {
    CHECK(count_parameters(56, 32) == 26424);
    CHECK(count_parameters(1, 1) == 27);
    CHECK(count_parameters(3, 2) == 2 * (4 * (2 * 3 + 4 + 2)) + (3 * 4 + 3));
    const BiLstmModel model = make_model(zero_params(5, 4), 3);
    CHECK(count_parameters(model) == count_parameters(5, 4));
}

TEST_CASE("lstm: initialization respects Xavier bounds and bias conventions") {
    rng::Stream stream(rng::derive_seed(99, 1));
    const int input_dim = 6, hidden = 4;
    const ModelParams p = init_params(input_dim, hidden, stream);
    const double limit_in = std::sqrt(6.0 / (input_dim + hidden));
    const double limit_rec = std::sqrt(6.0 / (2 * hidden));
    const double limit_dense = std::sqrt(6.0 / (2 * hidden + input_dim));
    CHECK(p.forward.W_i.cwiseAbs().maxCoeff() <= limit_in);
    CHECK(p.backward.W_g.cwiseAbs().maxCoeff() <= limit_in);
    CHECK(p.forward.U_o.cwiseAbs().maxCoeff() <= limit_rec);
    CHECK(p.dense_W.cwiseAbs().maxCoeff() <= limit_dense);
    CHECK(p.forward.W_i.cwiseAbs().maxCoeff() > 0.0);
    // Forget gates start open; every other bias starts at zero.
    CHECK((p.forward.b_f.array() == 1.0).all());
    CHECK((p.backward.b_f.array() == 1.0).all());
    CHECK((p.forward.b_i.array() == 0.0).all());
    CHECK((p.forward.b_g.array() == 0.0).all());
    CHECK((p.backward.b_o.array() == 0.0).all());
    CHECK((p.dense_b.array() == 0.0).all());

    rng::Stream stream_b(rng::derive_seed(99, 1));
    const ModelParams q = init_params(input_dim, hidden, stream_b);
    CHECK((p.forward.W_i - q.forward.W_i).cwiseAbs().maxCoeff() == 0.0);
    rng::Stream stream_c(rng::derive_seed(100, 1));
    const ModelParams r = init_params(input_dim, hidden, stream_c);
    CHECK((p.forward.W_i - r.forward.W_i).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("lstm: zero weights forward to the dense bias") {
    ModelParams p = zero_params(3, 2);
    p.dense_b << 0.7, -1.2, 0.4;
    const BiLstmModel model = make_model(std::move(p), 4);
    Eigen::MatrixXd window(4, 3);
    window << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    const Eigen::VectorXd out = model_forward(window, model);
    CHECK(out(0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(out(1) == doctest::Approx(-1.2).epsilon(1e-15));
    CHECK(out(2) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("lstm: forward matches an independent straight-line evaluation") {
    const int input_dim = 3, hidden = 2, lookback = 4;
    rng::Stream stream(rng::derive_seed(7, 1));
    BiLstmModel model = make_model(init_params(input_dim, hidden, stream), lookback);
    Eigen::MatrixXd window(lookback, input_dim);
    for (int r = 0; r < lookback; ++r) {
        for (int c = 0; c < input_dim; ++c) window(r, c) = stream.next_normal();
    }
    DropoutMasks masks = DropoutMasks::none(hidden);
    masks.recurrent_forward << 1.25, 0.0;
    masks.recurrent_backward << 1.25, 1.25;
    masks.output << 0.0, 2.0, 1.0, 0.5;

    // Plain-loop re-implementation, no shared code with the engine.
    auto run_dir = [&](const DirectionWeights& w, bool reversed, const Eigen::VectorXd& rmask) {
        std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
        for (int s = 0; s < lookback; ++s) {
            const int row = reversed ? lookback - 1 - s : s;
            std::vector<double> hm(hidden);
            for (int i = 0; i < hidden; ++i) hm[i] = h[i] * rmask(i);
            std::vector<double> gi(hidden), gf(hidden), gg(hidden), go(hidden);
            for (int i = 0; i < hidden; ++i) {
                double ai = w.b_i(i), af = w.b_f(i), ag = w.b_g(i), ao = w.b_o(i);
                for (int j = 0; j < input_dim; ++j) {
                    ai += w.W_i(i, j) * window(row, j);
                    af += w.W_f(i, j) * window(row, j);
                    ag += w.W_g(i, j) * window(row, j);
                    ao += w.W_o(i, j) * window(row, j);
                }
                for (int j = 0; j < hidden; ++j) {
                    ai += w.U_i(i, j) * hm[j];
                    af += w.U_f(i, j) * hm[j];
                    ag += w.U_g(i, j) * hm[j];
                    ao += w.U_o(i, j) * hm[j];
                }
                gi[i] = sigmoid(ai);
                gf[i] = sigmoid(af);
                gg[i] = std::tanh(ag);
                go[i] = sigmoid(ao);
            }
            for (int i = 0; i < hidden; ++i) {
                c[i] = gf[i] * c[i] + gi[i] * gg[i];
                h[i] = go[i] * std::tanh(c[i]);
            }
        }
        return h;
    };
    const std::vector<double> hf = run_dir(model.params.forward, false, masks.recurrent_forward);
    const std::vector<double> hb = run_dir(model.params.backward, true, masks.recurrent_backward);
    std::vector<double> concat;
    concat.insert(concat.end(), hf.begin(), hf.end());
    concat.insert(concat.end(), hb.begin(), hb.end());
    std::vector<double> expect(input_dim);
    for (int d = 0; d < input_dim; ++d) {
        double acc = model.params.dense_b(d);
        for (int j = 0; j < 2 * hidden; ++j) {
            acc += model.params.dense_W(d, j) * concat[static_cast<size_t>(j)] * masks.output(j);
        }
        expect[static_cast<size_t>(d)] = acc;
    }

    const Eigen::VectorXd got = model_forward(window, model, masks);
    for (int d = 0; d < input_dim; ++d) {
        CHECK(got(d) == doctest::Approx(expect[static_cast<size_t>(d)]).epsilon(1e-12));
    }
}

TEST_CASE("lstm: swapping directions and reversing the window is symmetric") {
    const int input_dim = 2, hidden = 3, lookback = 5;
    rng::Stream stream(rng::derive_seed(8, 1));
    BiLstmModel model = make_model(init_params(input_dim, hidden, stream), lookback);
    Eigen::MatrixXd window(lookback, input_dim);
    for (int r = 0; r < lookback; ++r) {
        for (int c = 0; c < input_dim; ++c) window(r, c) = stream.next_normal();
    }

    BiLstmModel swapped = model;
    swapped.params.forward = model.params.backward;
    swapped.params.backward = model.params.forward;
    swapped.params.dense_W.leftCols(hidden) = model.params.dense_W.rightCols(hidden);
    swapped.params.dense_W.rightCols(hidden) = model.params.dense_W.leftCols(hidden);

    const Eigen::MatrixXd reversed = window.colwise().reverse();
    const Eigen::VectorXd a = model_forward(window, model);
    const Eigen::VectorXd b = model_forward(reversed, swapped);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lstm: forward rejects a wrong-shape window") {
    const BiLstmModel model = make_model(zero_params(3, 2), 4);
    CHECK_THROWS_AS(model_forward(Eigen::MatrixXd::Zero(3, 3), model), DataError);
    CHECK_THROWS_AS(model_forward(Eigen::MatrixXd::Zero(4, 2), model), DataError);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(4, 3);
    bad(2, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(model_forward(bad, model), NumericError);
}

TEST_CASE("lstm: mae loss basics") {
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 2, 2, 1, 8;
    CHECK(mae_loss(a, b) == doctest::Approx((1 + 0 + 2 + 4) / 4.0));
    CHECK(mae_loss(a, b) == mae_loss(b, a));
    CHECK(mae_loss(a, a) == 0.0);
    CHECK_THROWS_AS(mae_loss(a, Eigen::MatrixXd::Zero(2, 3)), DataError);
}

TEST_CASE("lstm: dropout masks") {
    rng::Stream stream(5);
    const DropoutMasks none = DropoutMasks::none(4);
    CHECK((none.recurrent_forward.array() == 1.0).all());
    CHECK((none.output.array() == 1.0).all());
    CHECK(none.output.size() == 8);

    const DropoutMasks zero_rate = DropoutMasks::draw(4, 0.0, 0.0, stream);
    CHECK((zero_rate.recurrent_backward.array() == 1.0).all());
    CHECK((zero_rate.output.array() == 1.0).all());

    bool saw_zero = false, saw_scaled = false, only_valid = true;
    for (int trial = 0; trial < 200; ++trial) {
        const DropoutMasks m = DropoutMasks::draw(4, 0.5, 0.5, stream);
        for (const auto* v : {&m.recurrent_forward, &m.recurrent_backward, &m.output}) {
            for (Eigen::Index i = 0; i < v->size(); ++i) {
                if ((*v)(i) == 0.0) saw_zero = true;
                else if ((*v)(i) == 2.0) saw_scaled = true;
                else only_valid = false;
            }
        }
    }
    CHECK(saw_zero);
    CHECK(saw_scaled);
    CHECK(only_valid);  // inverted dropout: entries are 0 or 1/(1-p)
}

TEST_CASE("lstm: exact-fit batch has zero gradient under the subgradient rule") {
    ModelParams p = zero_params(2, 2);
    p.dense_b << 0.3, -0.1;
    const BiLstmModel model = make_model(std::move(p), 3);
    WindowSample sample;
    sample.input = Eigen::MatrixXd::Zero(3, 2);
    sample.target.resize(2);
    sample.target << 0.3, -0.1;  // equals the constant prediction
    double mae = -1.0;
    const ModelParams grads = backward({sample}, model, {DropoutMasks::none(2)}, &mae);
    CHECK(mae == 0.0);
    for_each_block(grads, [](const char*, const auto& block) {
        CHECK(block.cwiseAbs().maxCoeff() == 0.0);
    });
}

TEST_CASE("lstm: backward validates its inputs") {
    const BiLstmModel model = make_model(zero_params(2, 2), 3);
    CHECK_THROWS_AS(backward({}, model, {}), DataError);
    WindowSample sample;
    sample.input = Eigen::MatrixXd::Zero(3, 2);
    sample.target = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(backward({sample}, model, {}), DataError);  // mask count mismatch
    WindowSample bad = sample;
    bad.input(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(backward({bad}, model, {DropoutMasks::none(2)}), NumericError);
}

TEST_CASE("lstm: BPTT gradients match finite differences on tiny models") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        testutil::TinyProblem problem = testutil::make_tiny_problem(seed, seed % 2 == 0);
        const testutil::GradCheck check = testutil::finite_difference_check(
            problem.model, problem.batch, problem.masks, 1e-5, 1e-4, 1e-7);
        INFO("seed ", seed, " max_rel_err ", check.max_rel_err);
        CHECK(check.entries > 0);
        CHECK(check.all_within());
    }
}

TEST_CASE("lstm: rmsprop scalar updates match the hand recurrence") {
    ModelParams p = zero_params(1, 1);
    p.dense_b(0) = 2.0;
    ModelParams g = zero_like(p);
    g.dense_b(0) = 1.0;
    RmspropState state;

    optimizer_step(p, g, state, 1e-3);
    double acc = 0.1 * 1.0;
    double w = 2.0 - 1e-3 * 1.0 / std::sqrt(acc + 1e-8);
    CHECK(p.dense_b(0) == doctest::Approx(w).epsilon(1e-15));
    CHECK(p.forward.W_i(0, 0) == 0.0);  // zero gradient leaves weights alone

    optimizer_step(p, g, state, 1e-3);
    acc = 0.9 * acc + 0.1 * 1.0;
    w = w - 1e-3 * 1.0 / std::sqrt(acc + 1e-8);
    CHECK(p.dense_b(0) == doctest::Approx(w).epsilon(1e-14));
}

TEST_CASE("lstm: zero-like mirrors every block shape") {
    const ModelParams p = zero_params(3, 2);
    const ModelParams z = zero_like(p);
    CHECK(z.dense_W.rows() == 3);
    CHECK(z.dense_W.cols() == 4);
    CHECK(z.forward.U_g.rows() == 2);
    int blocks = 0;
    for_each_block(z, [&](const char*, const auto& block) {
        ++blocks;
        CHECK(block.cwiseAbs().maxCoeff() == 0.0);
    });
    CHECK(blocks == 26);
}

TEST_CASE("lstm: training runs deterministically and records history") {
    const CountPanel panel =
        testutil::make_panel({"MD", "CT"}, 30, [](std::int64_t t, const std::string& r, Feature f) {
            return 20 + 10 * ((t + static_cast<std::int64_t>(f)) % 7) + (r == "MD" ? 15 : 0);
        });
    TrainConfig cfg;
    cfg.steps = 8;
    cfg.batch_size = 5;
    cfg.validation_per_batch = 1;
    cfg.lookback = 7;
    cfg.hidden = 6;
    cfg.seed = 77;

    auto [model, history] = train(panel, cfg);
    CHECK(history.train_mae.size() == 8);
    CHECK(history.val_mae.size() == 8);
    for (double v : history.train_mae) CHECK(std::isfinite(v));
    for (double v : history.val_mae) CHECK(std::isfinite(v));
    CHECK(model.lookback == 7);
    CHECK(same_keys(model.keys, panel.keys));
    CHECK(model.input_dim() == 6);
    CHECK(model.hidden_dim() == 6);

    auto [model2, history2] = train(panel, cfg);
    CHECK(history2.train_mae == history.train_mae);
    bool identical = true;
    for_each_block(model.params, [&](const char* name, const auto& block) {
        // Compare against the twin run block by block.
        for_each_block(model2.params, [&](const char* name2, const auto& block2) {
            if (std::string(name) == name2) {
                if constexpr (std::is_same_v<std::decay_t<decltype(block)>,
                                             std::decay_t<decltype(block2)>>) {
                    identical &= (block - block2).cwiseAbs().maxCoeff() == 0.0;
                }
            }
        });
    });
    CHECK(identical);

    TrainConfig other = cfg;
    other.seed = 78;
    auto [model3, history3] = train(panel, other);
    CHECK(history3.train_mae != history.train_mae);
}

TEST_CASE("lstm: degenerate training configs") {
    const CountPanel panel =
        testutil::make_panel({"MD"}, 12, [](std::int64_t t, const std::string&, Feature) {
            return 5 + t;
        });
    TrainConfig cfg;
    cfg.steps = 0;
    cfg.lookback = 7;
    cfg.hidden = 3;
    cfg.batch_size = 4;
    cfg.validation_per_batch = 1;
    auto [model, history] = train(panel, cfg);
    CHECK(history.train_mae.empty());
    CHECK(model.params.dense_W.rows() == 3);

    TrainConfig short_cfg = cfg;
    short_cfg.lookback = 11;  // needs at least 13 days
    CHECK_THROWS_AS(train(panel, short_cfg), DataError);
    TrainConfig bad_val = cfg;
    bad_val.validation_per_batch = 4;
    CHECK_THROWS_AS(train(panel, bad_val), UsageError);
    TrainConfig bad_drop = cfg;
    bad_drop.dropout = 1.0;
    CHECK_THROWS_AS(train(panel, bad_drop), UsageError);
}

TEST_CASE("lstm: one-step predictions cover days k..T-1 on the count scale") {
    const CountPanel panel =
        testutil::make_panel({"MD"}, 15, [](std::int64_t t, const std::string&, Feature f) {
            return 30 + 2 * t + static_cast<std::int64_t>(f);
        });
    ModelParams p = zero_params(3, 2);
    p.dense_b << 0.5, 0.5, 0.5;
    BiLstmModel model = make_model(std::move(p), 4);
    model.keys = panel.keys;
    model.norm = fit_normalizer(panel);

    const PointForecast point = predict_onestep_all(model, panel);
    REQUIRE(point.size() == 11);
    CHECK(point.days.front() == 4);
    CHECK(point.days.back() == 14);
    CHECK(point.values.rows() == 11);
    CHECK(same_keys(point.keys, panel.keys));
    for (bool obs : point.observed) CHECK(obs);
    // Constant normalized output 0.5 denormalizes per series independently of
    // the day.
    for (int j = 0; j < 3; ++j) {
        const double want =
            std::max(0.0, std::expm1(0.5 * model.norm.scale(j) + model.norm.location(j)));
        for (int i = 0; i < 11; ++i) {
            CHECK(point.values(i, j) == doctest::Approx(want).epsilon(1e-12));
        }
    }

    const CountPanel tiny =
        testutil::make_panel({"MD"}, 4, [](std::int64_t, const std::string&, Feature) {
            return static_cast<std::int64_t>(1);
        });
    CHECK_THROWS_AS(predict_onestep_all(model, tiny), DataError);
}

TEST_CASE("lstm: horizon roll-out feeds clamped counts back") {
    const CountPanel panel =
        testutil::make_panel({"MD", "CT"}, 25, [](std::int64_t t, const std::string& r, Feature f) {
            return 10 + (t * (r == "MD" ? 3 : 2)) % 17 + static_cast<std::int64_t>(f);
        });
    rng::Stream stream(rng::derive_seed(3, 1));
    BiLstmModel model = make_model(init_params(6, 4, stream), 5);
    model.keys = panel.keys;
    model.norm = fit_normalizer(panel);

    const int horizon = 4;
    const PointForecast got = forecast_horizon(model, panel, horizon);
    REQUIRE(got.size() == horizon);
    CHECK(got.days.front() == 25);
    CHECK(got.days.back() == 28);
    for (bool obs : got.observed) CHECK_FALSE(obs);
    CHECK((got.values.array() >= 0).all());

    // Independent roll-out through the public single-step interface.
    Eigen::MatrixXd history = normalize(panel, model.norm);
    for (int h = 0; h < horizon; ++h) {
        const Eigen::MatrixXd window = history.bottomRows(5);
        const Eigen::VectorXd z = model_forward(window, model);
        const Eigen::VectorXd counts = denormalize_row(z, model.norm);
        for (int j = 0; j < 6; ++j) {
            CHECK(got.values(h, j) == doctest::Approx(counts(j)).epsilon(1e-12));
        }
        history.conservativeResize(history.rows() + 1, Eigen::NoChange);
        history.row(history.rows() - 1) = normalize_row(counts, model.norm).transpose();
    }

    CHECK(forecast_horizon(model, panel, 0).size() == 0);
    CHECK_THROWS_AS(forecast_from_history(model, history, 0, -1), UsageError);
}

TEST_CASE("lstm: forecast concatenation preserves order and keys") {
    const CountPanel panel =
        testutil::make_panel({"MD"}, 20, [](std::int64_t t, const std::string&, Feature) {
            return 10 + t % 6;
        });
    ModelParams p = zero_params(3, 2);
    p.dense_b << 0.1, 0.2, 0.3;
    BiLstmModel model = make_model(std::move(p), 6);
    model.keys = panel.keys;
    model.norm = fit_normalizer(panel);

    const PointForecast observed = predict_onestep_all(model, panel);
    const PointForecast ahead = forecast_horizon(model, panel, 3);
    const PointForecast all = concat_forecasts(observed, ahead);
    CHECK(all.size() == observed.size() + 3);
    CHECK(all.days.front() == 6);
    CHECK(all.days.back() == 22);
    CHECK(all.observed.front());
    CHECK_FALSE(all.observed.back());
    CHECK(all.values.rows() == all.size());
    CHECK(same_keys(all.keys, panel.keys));
}
