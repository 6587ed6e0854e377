#ifndef MOC_CANDIDATE_HPP
#define MOC_CANDIDATE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "moc/error.hpp"
#include "moc/feature_space.hpp"
#include "moc/objectives.hpp"

namespace moc {

// Genes plus a per-feature use-original mask: where the mask is set the
// effective value is x_star's, whatever the gene holds.
struct Candidate {
    DataPoint genes;
    std::vector<std::uint8_t> use_original;
    double prediction = std::numeric_limits<double>::quiet_NaN();
    ObjectiveVector objectives;
    std::size_t generation_born = 0;

    DataPoint effective(const DataPoint& x_star) const {
        DataPoint x = genes;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (use_original[j]) x[j] = x_star[j];
        }
        return x;
    }
};

// Control parameters. Defaults are the tuned configuration: population 20,
// 175 generations, ICE initialization and the conditional mutator on.
struct EvolutionConfig {
    std::size_t mu = 20;
    std::size_t generations = 175;
    double p_rec = 0.57;
    double p_rec_gen = 0.85;
    double p_rec_use_orig = 0.88;
    double p_mut = 0.79;
    double p_mut_gen = 0.56;
    double p_mut_use_orig = 0.32;
    double p_min = 0.01;
    double p_max = 0.99;
    std::optional<double> epsilon;
    std::size_t k = 1;
    bool use_ice_init = true;
    bool use_conditional_mutator = true;
    std::optional<std::size_t> early_stop_patience;
    std::uint64_t seed = 1;

    double sbx_eta = 20.0;
    double mutation_scale = 0.1;  // Gaussian sd as a fraction of the observed range
    std::size_t ice_grid_size = 10;
    std::size_t sampler_max_depth = 3;
    std::optional<std::size_t> sampler_min_leaf;  // default max(10, n / 20)

    void validate() const {
        auto prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigInvalid(std::string(name) + " must be in [0, 1]");
        };
        prob(p_rec, "p_rec");
        prob(p_rec_gen, "p_rec_gen");
        prob(p_rec_use_orig, "p_rec_use_orig");
        prob(p_mut, "p_mut");
        prob(p_mut_gen, "p_mut_gen");
        prob(p_mut_use_orig, "p_mut_use_orig");
        prob(p_min, "p_min");
        prob(p_max, "p_max");
        if (p_min > p_max) throw ConfigInvalid("p_min must not exceed p_max");
        if (mu < 2) throw ConfigInvalid("mu must be at least 2");
        if (k < 1) throw ConfigInvalid("k must be at least 1");
        if (epsilon && !(*epsilon >= 0.0)) throw ConfigInvalid("epsilon must be non-negative");
        if (early_stop_patience && *early_stop_patience < 1) throw ConfigInvalid("patience must be at least 1");
        if (!(sbx_eta >= 0.0)) throw ConfigInvalid("sbx_eta must be non-negative");
        if (!(mutation_scale >= 0.0)) throw ConfigInvalid("mutation_scale must be non-negative");
        if (ice_grid_size < 2) throw ConfigInvalid("ice_grid_size must be at least 2");
    }
};

inline nlohmann::json config_to_json(const EvolutionConfig& c) {
    nlohmann::json j{{"mu", c.mu},
                     {"generations", c.generations},
                     {"p_rec", c.p_rec},
                     {"p_rec_gen", c.p_rec_gen},
                     {"p_rec_use_orig", c.p_rec_use_orig},
                     {"p_mut", c.p_mut},
                     {"p_mut_gen", c.p_mut_gen},
                     {"p_mut_use_orig", c.p_mut_use_orig},
                     {"p_min", c.p_min},
                     {"p_max", c.p_max},
                     {"k", c.k},
                     {"use_ice_init", c.use_ice_init},
                     {"use_conditional_mutator", c.use_conditional_mutator},
                     {"seed", c.seed},
                     {"sbx_eta", c.sbx_eta},
                     {"mutation_scale", c.mutation_scale},
                     {"ice_grid_size", c.ice_grid_size},
                     {"sampler_max_depth", c.sampler_max_depth}};
    j["epsilon"] = c.epsilon ? nlohmann::json(*c.epsilon) : nlohmann::json(nullptr);
    j["early_stop_patience"] = c.early_stop_patience ? nlohmann::json(*c.early_stop_patience) : nlohmann::json(nullptr);
    j["sampler_min_leaf"] = c.sampler_min_leaf ? nlohmann::json(*c.sampler_min_leaf) : nlohmann::json(nullptr);
    return j;
}

// Applies the keys present in `j` on top of `base`; unknown keys are an
// error so typos do not pass silently.
inline EvolutionConfig config_from_json(const nlohmann::json& j, EvolutionConfig base = {}) {
    if (!j.is_object()) throw ConfigInvalid("config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "mu") base.mu = v.get<std::size_t>();
            else if (key == "generations") base.generations = v.get<std::size_t>();
            else if (key == "p_rec") base.p_rec = v.get<double>();
            else if (key == "p_rec_gen") base.p_rec_gen = v.get<double>();
            else if (key == "p_rec_use_orig") base.p_rec_use_orig = v.get<double>();
            else if (key == "p_mut") base.p_mut = v.get<double>();
            else if (key == "p_mut_gen") base.p_mut_gen = v.get<double>();
            else if (key == "p_mut_use_orig") base.p_mut_use_orig = v.get<double>();
            else if (key == "p_min") base.p_min = v.get<double>();
            else if (key == "p_max") base.p_max = v.get<double>();
            else if (key == "k") base.k = v.get<std::size_t>();
            else if (key == "use_ice_init") base.use_ice_init = v.get<bool>();
            else if (key == "use_conditional_mutator") base.use_conditional_mutator = v.get<bool>();
            else if (key == "seed") base.seed = v.get<std::uint64_t>();
            else if (key == "sbx_eta") base.sbx_eta = v.get<double>();
            else if (key == "mutation_scale") base.mutation_scale = v.get<double>();
            else if (key == "ice_grid_size") base.ice_grid_size = v.get<std::size_t>();
            else if (key == "sampler_max_depth") base.sampler_max_depth = v.get<std::size_t>();
            else if (key == "epsilon") base.epsilon = v.is_null() ? std::nullopt : std::optional(v.get<double>());
            else if (key == "early_stop_patience")
                base.early_stop_patience = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
            else if (key == "sampler_min_leaf")
                base.sampler_min_leaf = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
            else throw ConfigInvalid("unknown config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("config: ") + e.what());
    }
    base.validate();
    return base;
}

} // namespace moc

#endif
