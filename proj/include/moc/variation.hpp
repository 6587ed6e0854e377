#ifndef MOC_VARIATION_HPP
#define MOC_VARIATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "moc/candidate.hpp"
#include "moc/feature_space.hpp"
#include "moc/random.hpp"
#include "moc/sampler.hpp"

namespace moc {

// Optional callbacks fired inside the operators; tests use them to check
// per-event properties that the finished children no longer show.
struct VariationHooks {
    // Numeric parent genes and the SBX children before clamping.
    std::function<void(double a, double b, double c1, double c2)> on_sbx;
    // Feature index and the value drawn by the conditional sampler.
    std::function<void(std::size_t feature, double value)> on_conditional;
};

// Linear map of ICE standard deviations onto [p_min, p_max]. When all
// sigmas coincide the formula is 0/0 and every feature gets the midpoint.
inline std::vector<double> init_probabilities(std::span<const double> sigmas, double p_min, double p_max) {
    std::vector<double> out(sigmas.size(), 0.5 * (p_min + p_max));
    if (sigmas.empty()) return out;
    const auto [lo, hi] = std::minmax_element(sigmas.begin(), sigmas.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) return out;
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
        out[j] = (sigmas[j] - *lo) * (p_max - p_min) / span + p_min;
    }
    return out;
}

inline double sample_admissible(const ObservedDataset& observed, std::size_t j, Rng& rng) {
    const auto& f = observed.schema()[j];
    if (f.is_categorical()) {
        return static_cast<double>(uniform_index(rng, f.levels.size()));
    }
    const Bounds r = observed.derived_ranges()[j];
    return uniform_real(rng, r.lower, r.upper);
}

// Forces frozen features back onto x_star and caps genes into range.
inline void enforce_constraints(Candidate& c, const FeatureSchema& schema, const DataPoint& x_star) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (!schema[j].actionable) {
            c.use_original[j] = 1;
            c.genes[j] = x_star[j];
        }
    }
    c.genes = clamp_to_ranges(std::move(c.genes), schema);
}

// Draw order per candidate, per actionable feature: one coin for the
// mask, then (if the feature is free) one draw for its value.
inline std::vector<Candidate> initialize_population(const DataPoint& x_star, const EvolutionConfig& config,
                                                   const ObservedDataset& observed,
                                                   std::span<const double> probabilities, Rng& rng) {
    const auto& schema = observed.schema();
    std::vector<Candidate> pop(config.mu);
    for (auto& c : pop) {
        c.genes = x_star;
        c.use_original.assign(schema.size(), 1);
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (!schema[j].actionable) continue;
            if (bernoulli(rng, probabilities[j])) {
                c.use_original[j] = 0;
                c.genes[j] = sample_admissible(observed, j, rng);
            }
        }
        enforce_constraints(c, schema, x_star);
    }
    return pop;
}

// Simulated binary crossover of two reals; the children always sum to
// a + b.
inline std::pair<double, double> sbx_pair(double a, double b, double eta, Rng& rng) {
    const double u = uniform01(rng);
    const double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0))
                                 : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
    const double c1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
    const double c2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
    return {c1, c2};
}

// Recombines a pair with probability p_rec: SBX on numeric genes, swaps on
// categorical genes (uniform crossover) and on mask bits.
inline std::pair<Candidate, Candidate> sbx_crossover(const Candidate& parent_a, const Candidate& parent_b,
                                                     const EvolutionConfig& config, const FeatureSchema& schema,
                                                     const DataPoint& x_star, Rng& rng,
                                                     const VariationHooks* hooks = nullptr) {
    Candidate a = parent_a;
    Candidate b = parent_b;
    if (!bernoulli(rng, config.p_rec)) {
        return {std::move(a), std::move(b)};
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].is_numeric()) {
            if (bernoulli(rng, config.p_rec_gen)) {
                const auto [c1, c2] = sbx_pair(a.genes[j], b.genes[j], config.sbx_eta, rng);
                if (hooks && hooks->on_sbx) hooks->on_sbx(a.genes[j], b.genes[j], c1, c2);
                a.genes[j] = c1;
                b.genes[j] = c2;
            }
        } else if (bernoulli(rng, 0.5 * config.p_rec_gen)) {
            std::swap(a.genes[j], b.genes[j]);
        }
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (bernoulli(rng, config.p_rec_use_orig)) std::swap(a.use_original[j], b.use_original[j]);
    }
    enforce_constraints(a, schema, x_star);
    enforce_constraints(b, schema, x_star);
    return {std::move(a), std::move(b)};
}

// Mutates with probability p_mut. Default operators: scaled Gaussian for
// numeric genes, a different uniform level for categoricals, a flip for
// binaries. With a sampler, genes are redrawn in random feature order from
// their conditional distribution given the current effective point.
// Afterwards each mask bit flips with probability p_mut_use_orig.
inline Candidate mutate(Candidate c, const EvolutionConfig& config, const ObservedDataset& observed,
                        const DataPoint& x_star, Rng& rng, const ConditionalSampler* sampler = nullptr,
                        const VariationHooks* hooks = nullptr) {
    const auto& schema = observed.schema();
    if (!bernoulli(rng, config.p_mut)) {
        return c;
    }
    if (sampler) {
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (schema[j].actionable) order.push_back(j);
        }
        shuffle(order, rng);
        for (std::size_t j : order) {
            if (!bernoulli(rng, config.p_mut_gen)) continue;
            const double v = sampler->sample(j, c.effective(x_star), rng);
            if (hooks && hooks->on_conditional) hooks->on_conditional(j, v);
            c.genes[j] = v;
        }
    } else {
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const auto& f = schema[j];
            if (!f.actionable || !bernoulli(rng, config.p_mut_gen)) continue;
            if (f.kind == FeatureKind::binary) {
                c.genes[j] = 1.0 - c.genes[j];
            } else if (f.kind == FeatureKind::categorical) {
                auto level = uniform_index(rng, f.levels.size() - 1);
                if (static_cast<double>(level) >= c.genes[j]) ++level;
                c.genes[j] = static_cast<double>(level);
            } else {
                double width = observed.derived_ranges()[j].width();
                if (!(width > 0.0)) width = f.capping_bounds().width();
                c.genes[j] += config.mutation_scale * width * standard_normal(rng);
            }
        }
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].actionable && bernoulli(rng, config.p_mut_use_orig)) {
            c.use_original[j] = c.use_original[j] ? 0 : 1;
        }
    }
    enforce_constraints(c, schema, x_star);
    return c;
}

} // namespace moc

#endif
