#ifndef MOC_SEARCH_HPP
#define MOC_SEARCH_HPP

#include <functional>
#include <optional>
#include <vector>

#include "moc/archive.hpp"
#include "moc/candidate.hpp"
#include "moc/ice.hpp"
#include "moc/model.hpp"
#include "moc/objectives.hpp"
#include "moc/sampler.hpp"
#include "moc/selection.hpp"
#include "moc/variation.hpp"

namespace moc {

struct MocResult {
    ParetoArchive archive;
    std::vector<std::size_t> counterfactuals;  // archive indices, nondominated
    std::vector<double> init_probabilities;
    std::size_t generations_run = 0;
    double prediction_at_x_star = 0.0;
};

struct SearchObserver {
    VariationHooks variation;
    // Generation number and the pool indices that survived; fired after
    // every survivor selection.
    std::function<void(std::size_t generation, const std::vector<Candidate>& pool,
                       const std::vector<std::size_t>& survivors)>
        on_selection;
    std::function<void(std::size_t generation, double hv)> on_generation;
};

namespace detail {

inline void evaluate_candidates(std::vector<Candidate>& cands, const ObjectiveContext& ctx) {
    std::vector<DataPoint> pts;
    pts.reserve(cands.size());
    for (const auto& c : cands) pts.push_back(c.effective(ctx.x_star));
    const auto ev = evaluate_batch(pts, ctx);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        cands[i].prediction = ev.predictions[i];
        cands[i].objectives = ev.objectives[i];
    }
}

inline std::vector<ArchiveEntry> to_entries(const std::vector<Candidate>& cands, const DataPoint& x_star,
                                            std::size_t generation) {
    std::vector<ArchiveEntry> out;
    out.reserve(cands.size());
    for (const auto& c : cands) out.push_back({c.effective(x_star), c.prediction, c.objectives, generation});
    return out;
}

inline PoolRanking rank_candidates(const std::vector<Candidate>& cands, const DataPoint& x_star,
                                   const FeatureSchema& schema, std::optional<double> epsilon) {
    std::vector<ObjectiveVector> objs;
    std::vector<DataPoint> pts;
    for (const auto& c : cands) {
        objs.push_back(c.objectives);
        pts.push_back(c.effective(x_star));
    }
    return rank_pool(objs, pts, schema, epsilon);
}

} // namespace detail

// Per-feature probability that an initial candidate deviates from x_star:
// ICE-variance based when enabled, otherwise the midpoint of
// [p_min, p_max]. Only actionable features enter the min/max scaling.
inline std::vector<double> initialization_probabilities(const PredictionModel& model, const DataPoint& x_star,
                                                        const ObservedDataset& observed,
                                                        const EvolutionConfig& config) {
    const auto& schema = observed.schema();
    std::vector<double> probs(schema.size(), 0.5 * (config.p_min + config.p_max));
    if (!config.use_ice_init) return probs;
    const auto sigmas = ice_sigmas(model, x_star, observed, config.ice_grid_size);
    std::vector<double> free_sigmas;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].actionable) free_sigmas.push_back(sigmas[j]);
    }
    const auto mapped = init_probabilities(free_sigmas, config.p_min, config.p_max);
    for (std::size_t j = 0, k = 0; j < schema.size(); ++j) {
        probs[j] = schema[j].actionable ? mapped[k++] : 0.0;
    }
    return probs;
}

// The modified NSGA-II search. `observed` carries the schema, including
// frozen features and user bounds, and must not contain x_star itself.
inline MocResult run_moc(const DataPoint& x_star, const DesiredOutcome& target, const PredictionModel& model,
                         const ObservedDataset& observed, const EvolutionConfig& config,
                         const SearchObserver* observer = nullptr) {
    config.validate();
    const auto& schema = observed.schema();
    schema.validate(x_star);
    if (observed.empty()) {
        throw EmptyDataset("observed dataset is empty");
    }
    if (config.k > observed.size()) {
        throw ConfigInvalid("k exceeds the number of observed rows");
    }

    ObjectiveContext ctx{&model, &observed, x_star, target, config.k, {}};
    MocResult result;
    result.prediction_at_x_star = model.predict(x_star);
    result.archive = ParetoArchive(reference_point(result.prediction_at_x_star, target, schema.size()));
    result.init_probabilities = initialization_probabilities(model, x_star, observed, config);

    std::optional<ConditionalSampler> sampler;
    if (config.use_conditional_mutator) {
        const std::size_t min_leaf = config.sampler_min_leaf.value_or(default_min_leaf(observed.size()));
        sampler = fit_samplers(observed, config.sampler_max_depth, std::min(min_leaf, observed.size()));
    }
    const VariationHooks* hooks = observer ? &observer->variation : nullptr;

    Rng rng(config.seed);
    auto population = initialize_population(x_star, config, observed, result.init_probabilities, rng);
    detail::evaluate_candidates(population, ctx);
    result.archive.add_generation(detail::to_entries(population, x_star, 0));
    if (observer && observer->on_generation) observer->on_generation(0, result.archive.current_hv());

    auto ranking = detail::rank_candidates(population, x_star, schema, config.epsilon);
    std::size_t stale = 0;
    std::size_t gen = 1;
    for (; gen <= config.generations; ++gen) {
        const auto parents = tournament_select(ranking, config.mu, rng);
        std::vector<Candidate> offspring;
        offspring.reserve(config.mu + 1);
        for (std::size_t i = 0; offspring.size() < config.mu; i += 2) {
            const auto& a = population[parents[i % parents.size()]];
            const auto& b = population[parents[(i + 1) % parents.size()]];
            auto [c1, c2] = sbx_crossover(a, b, config, schema, x_star, rng, hooks);
            offspring.push_back(mutate(std::move(c1), config, observed, x_star, rng, sampler ? &*sampler : nullptr,
                                       hooks));
            if (offspring.size() < config.mu) {
                offspring.push_back(mutate(std::move(c2), config, observed, x_star, rng,
                                           sampler ? &*sampler : nullptr, hooks));
            }
        }
        for (auto& c : offspring) c.generation_born = gen;
        detail::evaluate_candidates(offspring, ctx);

        const double hv_before = result.archive.current_hv();
        result.archive.add_generation(detail::to_entries(offspring, x_star, gen));
        if (observer && observer->on_generation) observer->on_generation(gen, result.archive.current_hv());

        std::vector<Candidate> pool = std::move(population);
        pool.insert(pool.end(), std::make_move_iterator(offspring.begin()), std::make_move_iterator(offspring.end()));
        std::vector<ObjectiveVector> objs;
        std::vector<DataPoint> pts;
        for (const auto& c : pool) {
            objs.push_back(c.objectives);
            pts.push_back(c.effective(x_star));
        }
        const auto survivors = select_survivors(objs, pts, config.mu, schema, config.epsilon);
        if (observer && observer->on_selection) observer->on_selection(gen, pool, survivors);
        population.clear();
        for (auto i : survivors) population.push_back(pool[i]);
        ranking = detail::rank_candidates(population, x_star, schema, config.epsilon);

        if (config.early_stop_patience) {
            stale = result.archive.current_hv() > hv_before ? 0 : stale + 1;
            if (stale >= *config.early_stop_patience) {
                ++gen;
                break;
            }
        }
    }
    result.generations_run = gen - 1;
    result.counterfactuals = result.archive.nondominated();
    return result;
}

} // namespace moc

#endif
