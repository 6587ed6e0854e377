#ifndef MOC_BASELINES_HPP
#define MOC_BASELINES_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "moc/archive.hpp"
#include "moc/error.hpp"
#include "moc/feature_space.hpp"
#include "moc/model.hpp"
#include "moc/objectives.hpp"
#include "moc/random.hpp"

namespace moc {

struct WhatifResult {
    std::size_t row = 0;
    DataPoint point;
    double prediction = 0.0;
    double distance = 0.0;
};

// Nearest observed row (Gower) whose prediction lies in the target set;
// ties go to the lower row index.
inline WhatifResult whatif_nearest(const DataPoint& x_star, const DesiredOutcome& target,
                                   const PredictionModel& model, const ObservedDataset& observed) {
    const auto preds = model.predict_batch(observed.rows());
    std::optional<WhatifResult> best;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!target.contains(preds[i])) continue;
        const double d = gower_distance(observed[i], x_star, observed.schema(), observed.ranges());
        if (!best || d < best->distance) best = WhatifResult{i, observed[i], preds[i], d};
    }
    if (!best) {
        throw NoFeasiblePoint("no observed row attains the target " + target.to_string());
    }
    return *best;
}

inline constexpr double random_search_keep_probability = 0.5;

// Each generation draws mu fresh candidates: per actionable feature a fair
// coin keeps x_star's value, otherwise the value is uniform over the range
// spanned by the observed data and x_star (or over all levels).
inline ParetoArchive random_search(const DataPoint& x_star, const DesiredOutcome& target,
                                   const PredictionModel& model, const ObservedDataset& observed, std::size_t mu,
                                   std::size_t generations, std::uint64_t seed, std::size_t k = 1) {
    if (mu < 1 || generations < 1) {
        throw ConfigInvalid("random search needs mu >= 1 and generations >= 1");
    }
    const auto& schema = observed.schema();
    schema.validate(x_star);
    ObjectiveContext ctx{&model, &observed, x_star, target, k, {}};
    ParetoArchive archive(reference_point(model.predict(x_star), target, schema.size()));
    Rng rng(seed);
    for (std::size_t g = 0; g < generations; ++g) {
        std::vector<DataPoint> batch(mu, x_star);
        for (auto& x : batch) {
            std::vector<bool> keep(schema.size(), true);
            for (std::size_t j = 0; j < schema.size(); ++j) {
                const auto& f = schema[j];
                if (!f.actionable || bernoulli(rng, random_search_keep_probability)) continue;
                keep[j] = false;
                if (f.is_categorical()) {
                    x[j] = static_cast<double>(uniform_index(rng, f.levels.size()));
                } else {
                    const Bounds r = observed.derived_ranges()[j];
                    x[j] = uniform_real(rng, std::min(r.lower, x_star[j]), std::max(r.upper, x_star[j]));
                }
            }
            x = clamp_to_ranges(std::move(x), schema);
            for (std::size_t j = 0; j < schema.size(); ++j) {
                if (keep[j]) x[j] = x_star[j];
            }
        }
        const auto ev = evaluate_batch(batch, ctx);
        std::vector<ArchiveEntry> entries;
        for (std::size_t i = 0; i < mu; ++i) entries.push_back({batch[i], ev.predictions[i], ev.objectives[i], g});
        archive.add_generation(std::move(entries));
    }
    return archive;
}

} // namespace moc

#endif
