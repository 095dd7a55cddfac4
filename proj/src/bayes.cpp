#include "countcast/bayes.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "countcast/errors.hpp"

namespace countcast {

const char* flavor_name(PredictiveFlavor f) {
    switch (f) {
        case PredictiveFlavor::Posterior: return "posterior";
        case PredictiveFlavor::Prior: return "prior";
        case PredictiveFlavor::DegenerateZero: return "degenerate_zero";
    }
    return "?";
}

NegBinParams posterior_predictive_params(double y_hat, std::int64_t y_obs) {
    if (!(y_hat >= 0.0)) throw NumericError("posterior predictive needs a non-negative estimate");
    if (y_obs < 0) throw DataError("observed count must be non-negative");
    NegBinParams p;
    p.r = std::max(y_hat, kShapeFloor) + static_cast<double>(y_obs);
    p.q = 2.0 / 3.0;
    p.flavor = (y_hat <= kShapeFloor && y_obs == 0) ? PredictiveFlavor::DegenerateZero
                                                    : PredictiveFlavor::Posterior;
    return p;
}

NegBinParams prior_predictive_params(double y_hat) {
    if (!(y_hat >= 0.0)) throw NumericError("prior predictive needs a non-negative estimate");
    NegBinParams p;
    p.r = std::max(y_hat, kShapeFloor);
    p.q = 0.5;
    p.flavor = y_hat <= kShapeFloor ? PredictiveFlavor::DegenerateZero : PredictiveFlavor::Prior;
    return p;
}

double nb_pmf(const NegBinParams& params, std::int64_t y) {
    if (y < 0) return 0.0;
    if (params.flavor == PredictiveFlavor::DegenerateZero) return y == 0 ? 1.0 : 0.0;
    const double yd = static_cast<double>(y);
    const double log_p = std::lgamma(params.r + yd) - std::lgamma(yd + 1.0) -
                         std::lgamma(params.r) + params.r * std::log(params.q) +
                         yd * std::log1p(-params.q);
    return std::exp(log_p);
}

Moments nb_moments(const NegBinParams& params) {
    if (params.flavor == PredictiveFlavor::DegenerateZero) return {0.0, 0.0};
    Moments m;
    m.mean = params.r * (1.0 - params.q) / params.q;
    m.variance = m.mean / params.q;
    return m;
}

std::int64_t nb_quantile(const NegBinParams& params, double p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("quantile level must lie in (0, 1)");
    if (params.flavor == PredictiveFlavor::DegenerateZero) return 0;
    // pmf(y+1) = pmf(y) * (r+y)/(y+1) * (1-q); the 1e-12 slack absorbs the
    // rounding drift of the accumulated CDF.
    double pmf = std::exp(params.r * std::log(params.q));
    double cdf = pmf;
    std::int64_t y = 0;
    while (cdf + 1e-12 < p) {
        pmf *= (params.r + static_cast<double>(y)) / (static_cast<double>(y) + 1.0) *
               (1.0 - params.q);
        cdf += pmf;
        ++y;
        if (y > 100000000) throw NumericError("quantile search did not converge");
    }
    return y;
}

std::int64_t nb_sample(const NegBinParams& params, rng::Stream& stream) {
    if (params.flavor == PredictiveFlavor::DegenerateZero) return 0;
    const double rate = params.q / (1.0 - params.q);
    const double lambda = stream.next_gamma(params.r, rate);
    return stream.next_poisson(lambda);
}

std::vector<PredictiveCell> build_predictive_grid(const PointForecast& point,
                                                  const CountPanel& panel) {
    if (!same_keys(point.keys, panel.keys)) {
        throw DataError("forecast and panel series do not match");
    }
    if (point.values.cols() != panel.series() ||
        point.values.rows() != static_cast<Eigen::Index>(point.days.size())) {
        throw DataError("forecast shape does not match its day list");
    }
    std::vector<PredictiveCell> grid;
    grid.reserve(point.days.size() * static_cast<size_t>(panel.series()));
    for (size_t i = 0; i < point.days.size(); ++i) {
        const std::int64_t day = point.days[i];
        const bool observed = point.observed[i];
        if (observed && (day < 0 || day >= panel.days())) {
            throw DataError("observed forecast day " + std::to_string(day) +
                            " lies outside the panel");
        }
        for (Eigen::Index j = 0; j < point.values.cols(); ++j) {
            PredictiveCell cell;
            cell.key = panel.keys[static_cast<size_t>(j)];
            cell.day = day;
            cell.y_hat = point.values(static_cast<Eigen::Index>(i), j);
            if (observed) {
                cell.y_obs = panel.values(day, j);
                cell.params = posterior_predictive_params(cell.y_hat, *cell.y_obs);
            } else {
                cell.params = prior_predictive_params(cell.y_hat);
            }
            grid.push_back(std::move(cell));
        }
    }
    return grid;
}

void write_grid_csv(const std::vector<PredictiveCell>& grid, std::ostream& out) {
    out << "day,region,feature,flavor,r,q,mean,var,y_obs\n";
    char buf[128];
    for (const PredictiveCell& cell : grid) {
        const Moments m = nb_moments(cell.params);
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", cell.params.r, cell.params.q,
                      m.mean, m.variance);
        out << cell.day << ',' << cell.key.region << ',' << feature_name(cell.key.feature) << ','
            << flavor_name(cell.params.flavor) << ',' << buf << ',';
        if (cell.y_obs) out << *cell.y_obs;
        out << '\n';
    }
    if (!out) throw DataError("failed writing predictive grid");
}

void write_grid_csv_file(const std::vector<PredictiveCell>& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    write_grid_csv(grid, out);
}

}  // namespace countcast
