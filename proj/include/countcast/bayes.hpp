#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "countcast/lstm.hpp"
#include "countcast/panel.hpp"
#include "countcast/rng.hpp"

namespace countcast {

// Negative Binomial predictive for one cell. Posterior cells carry q = 2/3
// (mean (y_hat+y_obs)/2, variance 1.5x mean), prior cells q = 1/2 (mean
// y_hat, variance 2x mean). DegenerateZero is a point mass at 0 used where
// the Gamma shape would collapse.
enum class PredictiveFlavor { Posterior, Prior, DegenerateZero };

const char* flavor_name(PredictiveFlavor f);

struct NegBinParams {
    double r = 0.0;  // shape, > 0 unless degenerate
    double q = 0.5;  // success probability of the zero-count direction
    PredictiveFlavor flavor = PredictiveFlavor::Prior;
};

inline constexpr double kShapeFloor = 1e-6;

// Shape r = max(y_hat, eps) + y_obs, q = 2/3; collapses to a point mass at 0
// when y_hat is at the floor and nothing was observed.
NegBinParams posterior_predictive_params(double y_hat, std::int64_t y_obs);

// Shape r = max(y_hat, eps), q = 1/2; point mass at 0 when y_hat is at the floor.
NegBinParams prior_predictive_params(double y_hat);

// Gamma(r+y) / (Gamma(y+1) Gamma(r)) q^r (1-q)^y via log-gamma.
double nb_pmf(const NegBinParams& params, std::int64_t y);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

Moments nb_moments(const NegBinParams& params);

// Smallest y with CDF(y) >= p, CDF accumulated through the pmf recurrence.
std::int64_t nb_quantile(const NegBinParams& params, double p);

// Exact Gamma-Poisson mixture draw: lambda ~ Gamma(shape r, rate q/(1-q)),
// then Y ~ Poisson(lambda).
std::int64_t nb_sample(const NegBinParams& params, rng::Stream& stream);

struct PredictiveCell {
    SeriesKey key;
    std::int64_t day = 0;
    NegBinParams params;
    std::optional<std::int64_t> y_obs;
    double y_hat = 0.0;
};

// One cell per (day, series) of the point forecast: posterior flavor with the
// panel's count where the day is observed, prior flavor beyond the data.
std::vector<PredictiveCell> build_predictive_grid(const PointForecast& point,
                                                  const CountPanel& panel);

// CSV export, header `day,region,feature,flavor,r,q,mean,var,y_obs`.
void write_grid_csv(const std::vector<PredictiveCell>& grid, std::ostream& out);
void write_grid_csv_file(const std::vector<PredictiveCell>& grid, const std::string& path);

}  // namespace countcast
