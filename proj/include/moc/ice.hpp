#ifndef MOC_ICE_HPP
#define MOC_ICE_HPP

#include <cmath>
#include <vector>

#include "moc/error.hpp"
#include "moc/feature_space.hpp"
#include "moc/model.hpp"

namespace moc {

inline constexpr std::size_t default_ice_grid_size = 10;

struct IceCurve {
    std::size_t feature = 0;
    std::vector<double> grid;
    std::vector<double> predictions;
    double sigma = 0.0;
};

// Population standard deviation.
inline double population_sd(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

// Evaluation grid for one feature: `n` equidistant values over the
// observed range (rounded for integer features), or every level.
inline std::vector<double> feature_grid(const ObservedDataset& observed, std::size_t j, std::size_t n) {
    const auto& f = observed.schema()[j];
    std::vector<double> grid;
    if (f.is_categorical()) {
        for (std::size_t l = 0; l < f.levels.size(); ++l) grid.push_back(static_cast<double>(l));
        return grid;
    }
    if (n < 2) {
        throw ConfigInvalid("grid size must be at least 2");
    }
    const Bounds r = observed.derived_ranges()[j];
    for (std::size_t i = 0; i < n; ++i) {
        double v = r.lower + r.width() * static_cast<double>(i) / static_cast<double>(n - 1);
        if (i == n - 1) v = r.upper;
        if (f.kind == FeatureKind::integer) v = std::round(v);
        grid.push_back(v);
    }
    return grid;
}

inline IceCurve ice_curve(const PredictionModel& model, const DataPoint& x_star, const ObservedDataset& observed,
                          std::size_t j, std::size_t grid_size = default_ice_grid_size) {
    IceCurve curve;
    curve.feature = j;
    curve.grid = feature_grid(observed, j, grid_size);
    std::vector<DataPoint> batch(curve.grid.size(), x_star);
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i][j] = curve.grid[i];
    curve.predictions = model.predict_batch(batch);
    curve.sigma = population_sd(curve.predictions);
    return curve;
}

// ICE standard deviation of every feature, evaluated in one model call.
inline std::vector<double> ice_sigmas(const PredictionModel& model, const DataPoint& x_star,
                                      const ObservedDataset& observed,
                                      std::size_t grid_size = default_ice_grid_size) {
    const std::size_t p = observed.schema().size();
    std::vector<DataPoint> batch;
    std::vector<std::size_t> offsets{0};
    for (std::size_t j = 0; j < p; ++j) {
        for (double v : feature_grid(observed, j, grid_size)) {
            batch.push_back(x_star);
            batch.back()[j] = v;
        }
        offsets.push_back(batch.size());
    }
    const auto preds = model.predict_batch(batch);
    std::vector<double> sigmas(p);
    for (std::size_t j = 0; j < p; ++j) {
        sigmas[j] = population_sd(std::vector<double>(preds.begin() + static_cast<std::ptrdiff_t>(offsets[j]),
                                                      preds.begin() + static_cast<std::ptrdiff_t>(offsets[j + 1])));
    }
    return sigmas;
}

// Predictions over a 2-D grid through x_star; values[i * b_values.size() + k]
// holds the prediction at (a_values[i], b_values[k]).
struct ResponseSurface {
    std::size_t feature_a = 0;
    std::size_t feature_b = 0;
    std::vector<double> a_values;
    std::vector<double> b_values;
    std::vector<double> values;

    double at(std::size_t i, std::size_t k) const { return values[i * b_values.size() + k]; }
};

inline ResponseSurface response_surface_grid(const PredictionModel& model, const DataPoint& x_star,
                                             const ObservedDataset& observed, std::size_t a, std::size_t b,
                                             std::size_t resolution) {
    if (a == b) {
        throw ConfigInvalid("response surface needs two distinct features");
    }
    if (resolution < 2) {
        throw ConfigInvalid("resolution must be at least 2");
    }
    ResponseSurface s;
    s.feature_a = a;
    s.feature_b = b;
    s.a_values = feature_grid(observed, a, resolution);
    s.b_values = feature_grid(observed, b, resolution);
    std::vector<DataPoint> batch;
    batch.reserve(s.a_values.size() * s.b_values.size());
    for (double va : s.a_values) {
        for (double vb : s.b_values) {
            batch.push_back(x_star);
            batch.back()[a] = va;
            batch.back()[b] = vb;
        }
    }
    s.values = model.predict_batch(batch);
    return s;
}

} // namespace moc

#endif
