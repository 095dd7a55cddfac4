#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "countcast/bayes.hpp"
#include "countcast/errors.hpp"
#include "test_util.hpp"

using namespace countcast;

namespace {

// Independent check of the compound distribution: integrate
// Poisson(y | lambda) Gamma(lambda | r, rate) d lambda with composite Simpson
// after substituting lambda = u^2, which keeps the integrand smooth down to
// u = 0 even for shapes as small as 1/2.
double mixture_pmf_by_quadrature(double r, double rate, std::int64_t y) {
    const long double lr = static_cast<long double>(r);
    const long double lrate = static_cast<long double>(rate);
    const long double ly = static_cast<long double>(y);
    auto integrand = [&](long double u) -> long double {
        if (u <= 0.0L) {
            // lambda^(r+y-1) -> u^(2(r+y)-2); only r + y = 1/2 leaves a
            // finite non-zero limit at the origin.
            if (std::fabs(static_cast<double>(lr + ly) - 0.5) < 1e-15) {
                return 2.0L * std::exp(lr * std::log(lrate) - std::lgamma(static_cast<double>(lr)) -
                                       std::lgamma(static_cast<double>(ly) + 1.0));
            }
            return 0.0L;
        }
        const long double lambda = u * u;
        const long double log_f = ly * std::log(static_cast<double>(lambda)) - lambda -
                                  std::lgamma(static_cast<double>(ly) + 1.0) +
                                  lr * std::log(static_cast<double>(lrate)) +
                                  (lr - 1.0L) * std::log(static_cast<double>(lambda)) -
                                  lrate * lambda - std::lgamma(static_cast<double>(lr));
        return 2.0L * u * std::exp(static_cast<double>(log_f));
    };
    // Integrand is negligible beyond the Gamma/Poisson bulk by a wide margin.
    const long double lambda_max = (lr + ly + 60.0L) * 4.0L / std::min(lrate, 1.0L) + 60.0L;
    const long double upper = std::sqrt(static_cast<double>(lambda_max));
    const int n = 40000;  // even
    const long double h = upper / n;
    long double sum = integrand(0.0L) + integrand(upper);
    for (int i = 1; i < n; ++i) {
        sum += (i % 2 == 1 ? 4.0L : 2.0L) * integrand(i * h);
    }
    return static_cast<double>(sum * h / 3.0L);
}

}  // namespace

TEST_CASE("bayes: posterior parameters blend estimate and observation") {
    const NegBinParams p = posterior_predictive_params(4.0, 2);
    CHECK(p.flavor == PredictiveFlavor::Posterior);
    CHECK(p.r == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(p.q == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    // The shape floor keeps a zero estimate usable when counts did arrive.
    const NegBinParams floored = posterior_predictive_params(0.0, 3);
    CHECK(floored.flavor == PredictiveFlavor::Posterior);
    CHECK(floored.r == doctest::Approx(1e-6 + 3.0).epsilon(1e-15));

    const NegBinParams degenerate = posterior_predictive_params(0.0, 0);
    CHECK(degenerate.flavor == PredictiveFlavor::DegenerateZero);

    CHECK_THROWS_AS(posterior_predictive_params(-0.5, 1), NumericError);
    CHECK_THROWS_AS(posterior_predictive_params(std::nan(""), 1), NumericError);
    CHECK_THROWS_AS(posterior_predictive_params(1.0, -1), DataError);
}

TEST_CASE("bayes: prior parameters take the estimate as the shape") {
    const NegBinParams p = prior_predictive_params(7.5);
    CHECK(p.flavor == PredictiveFlavor::Prior);
    CHECK(p.r == doctest::Approx(7.5).epsilon(1e-15));
    CHECK(p.q == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(prior_predictive_params(0.0).flavor == PredictiveFlavor::DegenerateZero);
    CHECK(prior_predictive_params(1e-9).flavor == PredictiveFlavor::DegenerateZero);
    CHECK(prior_predictive_params(1e-5).flavor == PredictiveFlavor::Prior);
    CHECK_THROWS_AS(prior_predictive_params(-1.0), NumericError);
}

TEST_CASE("bayes: moments follow r(1-q)/q and mean/q") {
    const Moments posterior = nb_moments(posterior_predictive_params(4.0, 2));
    CHECK(posterior.mean == doctest::Approx(3.0).epsilon(1e-12));       // (y_hat + y_obs) / 2
    CHECK(posterior.variance == doctest::Approx(4.5).epsilon(1e-12));   // 1.5 x mean

    const Moments prior = nb_moments(prior_predictive_params(4.0));
    CHECK(prior.mean == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(prior.variance == doctest::Approx(8.0).epsilon(1e-12));

    const Moments degenerate = nb_moments(prior_predictive_params(0.0));
    CHECK(degenerate.mean == 0.0);
    CHECK(degenerate.variance == 0.0);
}

TEST_CASE("bayes: pmf closed-form spot values") {
    NegBinParams p;
    p.r = 1.0;
    p.q = 2.0 / 3.0;
    p.flavor = PredictiveFlavor::Posterior;
    // Geometric with success 2/3: pmf(y) = (2/3) (1/3)^y.
    CHECK(nb_pmf(p, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(nb_pmf(p, 1) == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
    CHECK(nb_pmf(p, 4) == doctest::Approx((2.0 / 3.0) * std::pow(1.0 / 3.0, 4)).epsilon(1e-13));

    NegBinParams two = p;
    two.r = 2.0;
    // pmf(1) = C(2,1) q^2 (1-q) = 2 (4/9)(1/3) = 8/27.
    CHECK(nb_pmf(two, 1) == doctest::Approx(8.0 / 27.0).epsilon(1e-14));

    // Prior with y_hat = 1 is geometric with success 1/2.
    const NegBinParams geo = prior_predictive_params(1.0);
    for (std::int64_t y = 0; y <= 10; ++y) {
        CHECK(nb_pmf(geo, y) == doctest::Approx(std::pow(0.5, y + 1)).epsilon(1e-13));
    }

    CHECK(nb_pmf(p, -1) == 0.0);
    const NegBinParams degenerate = prior_predictive_params(0.0);
    CHECK(nb_pmf(degenerate, 0) == 1.0);
    CHECK(nb_pmf(degenerate, 1) == 0.0);
}

TEST_CASE("bayes: pmf sums to one over a generous support") {
    for (double r : {0.5, 1.0, 2.5, 6.0, 20.0}) {
        for (double q : {0.5, 2.0 / 3.0}) {
            NegBinParams p;
            p.r = r;
            p.q = q;
            p.flavor = PredictiveFlavor::Posterior;
            long double total = 0.0L;
            for (std::int64_t y = 0; y <= 4000; ++y) total += nb_pmf(p, y);
            INFO("r ", r, " q ", q);
            CHECK(static_cast<double>(total) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("bayes: pmf matches independent Gamma-Poisson quadrature") {
    for (double r : {0.5, 1.0, 6.0, 20.0}) {
        for (double q : {0.5, 2.0 / 3.0}) {
            NegBinParams p;
            p.r = r;
            p.q = q;
            p.flavor = PredictiveFlavor::Posterior;
            const double rate = q / (1.0 - q);
            double worst = 0.0;
            for (std::int64_t y = 0; y <= 50; ++y) {
                const double direct = nb_pmf(p, y);
                const double mixed = mixture_pmf_by_quadrature(r, rate, y);
                worst = std::max(worst, std::fabs(direct - mixed));
            }
            INFO("r ", r, " q ", q, " worst ", worst);
            CHECK(worst < 1e-10);
        }
    }
}

TEST_CASE("bayes: quantiles walk the CDF") {
    const NegBinParams geo = prior_predictive_params(1.0);  // CDF(y) = 1 - (1/2)^(y+1)
    CHECK(nb_quantile(geo, 0.5) == 0);    // CDF(0) = 0.5 exactly
    CHECK(nb_quantile(geo, 0.51) == 1);
    CHECK(nb_quantile(geo, 0.75) == 1);
    CHECK(nb_quantile(geo, 0.76) == 2);
    CHECK(nb_quantile(geo, 1e-12) == 0);

    NegBinParams p;
    p.r = 6.0;
    p.q = 2.0 / 3.0;
    p.flavor = PredictiveFlavor::Posterior;
    std::int64_t prev = -1;
    for (double prob : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975, 0.999}) {
        const std::int64_t yq = nb_quantile(p, prob);
        CHECK(yq >= prev);  // monotone in p
        prev = yq;
        // Definition check: CDF(yq) >= p > CDF(yq - 1).
        long double cdf = 0.0L;
        for (std::int64_t y = 0; y < yq; ++y) cdf += nb_pmf(p, y);
        CHECK(static_cast<double>(cdf) < prob + 1e-9);
        cdf += nb_pmf(p, yq);
        CHECK(static_cast<double>(cdf) >= prob - 1e-9);
    }

    CHECK(nb_quantile(prior_predictive_params(0.0), 0.999) == 0);
    CHECK_THROWS_AS(nb_quantile(p, 0.0), UsageError);
    CHECK_THROWS_AS(nb_quantile(p, 1.0), UsageError);
}

TEST_CASE("bayes: sampling is deterministic and unbiased") {
    NegBinParams p;
    p.r = 6.0;
    p.q = 2.0 / 3.0;
    p.flavor = PredictiveFlavor::Posterior;

    rng::Stream a(rng::derive_seed(11, 3, 0, 0));
    rng::Stream b(rng::derive_seed(11, 3, 0, 0));
    for (int i = 0; i < 50; ++i) CHECK(nb_sample(p, a) == nb_sample(p, b));

    rng::Stream s(rng::derive_seed(12, 3, 0, 0));
    const int n = 100000;
    long double sum = 0.0L;
    for (int i = 0; i < n; ++i) {
        const std::int64_t y = nb_sample(p, s);
        CHECK(y >= 0);
        sum += y;
    }
    const Moments m = nb_moments(p);
    const double se = std::sqrt(m.variance / n);
    CHECK(std::fabs(static_cast<double>(sum) / n - m.mean) < 4.0 * se);

    const NegBinParams degenerate = prior_predictive_params(0.0);
    for (int i = 0; i < 20; ++i) CHECK(nb_sample(degenerate, s) == 0);
}

TEST_CASE("bayes: predictive grid pairs observed days with counts") {
    const CountPanel panel =
        testutil::make_panel({"MD"}, 12, [](std::int64_t t, const std::string&, Feature f) {
            return 5 + t + static_cast<std::int64_t>(f);
        });
    TrainConfig cfg;
    cfg.steps = 2;
    cfg.batch_size = 3;
    cfg.validation_per_batch = 1;
    cfg.lookback = 5;
    cfg.hidden = 3;
    auto [model, history] = train(panel, cfg);

    const PointForecast observed = predict_onestep_all(model, panel);
    const PointForecast ahead = forecast_horizon(model, panel, 3);
    const PointForecast point = concat_forecasts(observed, ahead);
    const std::vector<PredictiveCell> grid = build_predictive_grid(point, panel);
    REQUIRE(grid.size() == static_cast<size_t>(point.size()) * 3);

    for (const PredictiveCell& cell : grid) {
        const bool in_panel = cell.day < panel.days();
        if (in_panel) {
            REQUIRE(cell.y_obs.has_value());
            const double count = panel.values(cell.day, cell.key.flat_index);
            CHECK(static_cast<double>(*cell.y_obs) == count);
            CHECK(cell.params.flavor != PredictiveFlavor::Prior);
            if (cell.params.flavor == PredictiveFlavor::Posterior) {
                CHECK(cell.params.q == doctest::Approx(2.0 / 3.0));
                CHECK(cell.params.r ==
                      doctest::Approx(std::max(cell.y_hat, kShapeFloor) + *cell.y_obs));
            }
        } else {
            CHECK_FALSE(cell.y_obs.has_value());
            CHECK(cell.params.flavor != PredictiveFlavor::Posterior);
        }
    }

    // Cells arrive day-major in series order, matching the forecast layout.
    for (size_t i = 0; i < grid.size(); ++i) {
        CHECK(grid[i].day == point.days[i / 3]);
        CHECK(grid[i].key.flat_index == static_cast<int>(i % 3));
    }

    PointForecast mismatched = point;
    mismatched.keys[0].region = "XX";
    CHECK_THROWS_AS(build_predictive_grid(mismatched, panel), DataError);

    PointForecast out_of_range = point;
    out_of_range.days.back() = panel.days() + 5;
    out_of_range.observed.back() = true;
    CHECK_THROWS_AS(build_predictive_grid(out_of_range, panel), DataError);
}

TEST_CASE("bayes: grid CSV carries one row per cell") {
    const CountPanel panel =
        testutil::make_panel({"MD"}, 10, [](std::int64_t t, const std::string&, Feature) {
            return 4 + t % 3;
        });
    PointForecast point;
    point.days = {8, 9};
    point.keys = panel.keys;
    point.observed = {true, false};
    point.values.resize(2, 3);
    point.values << 4.0, 5.0, 6.0, 4.5, 5.5, 6.5;
    const std::vector<PredictiveCell> grid = build_predictive_grid(point, panel);

    std::ostringstream out;
    write_grid_csv(grid, out);
    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "day,region,feature,flavor,r,q,mean,var,y_obs");
    size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(line.find("MD") != std::string::npos);
    }
    CHECK(rows == grid.size());
    CHECK(out.str().find("posterior") != std::string::npos);
    CHECK(out.str().find("prior") != std::string::npos);
}
