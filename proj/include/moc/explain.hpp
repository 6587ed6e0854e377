#ifndef MOC_EXPLAIN_HPP
#define MOC_EXPLAIN_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moc/archive.hpp"
#include "moc/ice.hpp"
#include "moc/metrics.hpp"
#include "moc/search.hpp"

namespace moc {

// A fully specified explanation task: the observed data, the instance,
// the target and the user's actionability edits.
struct ExplainTask {
    const ObservedDataset* data = nullptr;  // full dataset, x_star row included
    std::optional<std::size_t> row;         // x_star = data row, excluded from observed
    std::optional<DataPoint> point;         // or an inline x_star
    DesiredOutcome target;
    EvolutionConfig config;
    std::vector<std::string> freeze;
    std::vector<std::pair<std::string, Bounds>> bounds;
    std::size_t limit = 10;
};

struct Explanation {
    FeatureSchema schema;  // with freezes and bounds applied
    ObservedDataset observed;
    DataPoint x_star;
    DesiredOutcome target;
    EvolutionConfig config;
    MocResult result;
    std::vector<std::size_t> truncated;  // archive indices, selection order
};

inline FeatureSchema apply_constraints(FeatureSchema schema, const std::vector<std::string>& freeze,
                                       const std::vector<std::pair<std::string, Bounds>>& bounds) {
    schema = schema.with_frozen(freeze);
    for (const auto& [name, b] : bounds) {
        const auto j = schema.index_of(name);
        if (!schema[j].is_numeric()) throw ConfigInvalid("bounds given for non-numeric feature '" + name + "'");
        if (!(b.lower <= b.upper) || b.lower < schema[j].range.lower || b.upper > schema[j].range.upper) {
            throw ConfigInvalid("bounds for '" + name + "' must lie within its declared range");
        }
        schema = schema.with_user_bounds(name, b);
    }
    return schema;
}

// Indices of the counterfactual set after truncation, as archive indices.
inline std::vector<std::size_t> truncate_result(const MocResult& result, const DesiredOutcome& target,
                                                std::size_t limit) {
    std::vector<ObjectiveVector> objs;
    std::vector<double> preds;
    for (auto i : result.counterfactuals) {
        objs.push_back(result.archive[i].objectives);
        preds.push_back(result.archive[i].prediction);
    }
    std::vector<std::size_t> out;
    for (auto k : truncate_counterfactuals(objs, preds, target, limit, result.archive.reference())) {
        out.push_back(result.counterfactuals[k]);
    }
    return out;
}

inline Explanation explain(const ExplainTask& task, const PredictionModel& model,
                           const SearchObserver* observer = nullptr) {
    if (!task.data) throw ConfigInvalid("no dataset");
    const auto schema = apply_constraints(task.data->schema(), task.freeze, task.bounds);
    DataPoint x_star;
    std::optional<ObservedDataset> observed;
    if (task.row) {
        if (*task.row >= task.data->size()) {
            throw ConfigInvalid("row " + std::to_string(*task.row) + " out of range (dataset has " +
                                std::to_string(task.data->size()) + " rows)");
        }
        x_star = (*task.data)[*task.row];
        observed = task.data->without_row(*task.row).with_schema(schema);
    } else if (task.point) {
        x_star = *task.point;
        task.data->schema().validate(x_star);
        observed = task.data->with_schema(schema);
    } else {
        throw ConfigInvalid("either a row or a point is required");
    }
    auto result = run_moc(x_star, task.target, model, *observed, task.config, observer);
    auto truncated = truncate_result(result, task.target, task.limit);
    return Explanation{schema, std::move(*observed), std::move(x_star), task.target, task.config,
                       std::move(result), std::move(truncated)};
}

inline std::vector<std::string> changed_features(const DataPoint& x, const DataPoint& x_star,
                                                 const FeatureSchema& schema) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (!same_value(x[j], x_star[j])) out.push_back(schema[j].name);
    }
    return out;
}

inline nlohmann::json counterfactual_json(const Explanation& ex, std::size_t archive_index) {
    auto j = entry_to_json(ex.result.archive[archive_index], ex.schema, archive_index);
    j["changed"] = changed_features(ex.result.archive[archive_index].point, ex.x_star, ex.schema);
    j["attains_target"] = ex.target.contains(ex.result.archive[archive_index].prediction);
    return j;
}

// The payload behind the explorer views: truncated counterfactual set,
// x_star, reference point and HV trace; `all` adds the full nondominated
// set.
inline nlohmann::json pareto_payload(const Explanation& ex, bool all) {
    const auto& r = ex.result.archive.reference();
    nlohmann::json cfs = nlohmann::json::array();
    for (auto i : ex.truncated) cfs.push_back(counterfactual_json(ex, i));
    nlohmann::json out{{"x_star", ex.schema.point_to_json(ex.x_star)},
                       {"prediction_x_star", ex.result.prediction_at_x_star},
                       {"target", {{"lower", ex.target.lower},
                                   {"upper", ex.target.upper},
                                   {"lower_open", ex.target.lower_open},
                                   {"upper_open", ex.target.upper_open}}},
                       {"reference_point", {r[0], r[1], r[2], r[3]}},
                       {"hv_trace", ex.result.archive.hv_trace()},
                       {"counterfactuals", std::move(cfs)}};
    if (all) {
        nlohmann::json full = nlohmann::json::array();
        for (auto i : ex.result.counterfactuals) full.push_back(counterfactual_json(ex, i));
        out["all"] = std::move(full);
    }
    return out;
}

inline nlohmann::json surface_payload(const ResponseSurface& s, const ObservedDataset& observed,
                                      const DataPoint& x_star, const std::vector<DataPoint>& counterfactuals);

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigInvalid("cannot write '" + path.string() + "'");
    out << text;
}

// Parallel-coordinates table: x_star first, then one row per returned
// counterfactual.
inline std::string parallel_table_csv(const Explanation& ex) {
    std::vector<std::string> header{"id"};
    for (const auto& f : ex.schema) header.push_back(f.name);
    header.emplace_back("prediction");
    std::string out = csv::join(header) + "\n";
    auto row = [&](const std::string& id, const DataPoint& x, double pred) {
        std::vector<std::string> cells{id};
        for (std::size_t j = 0; j < ex.schema.size(); ++j) cells.push_back(ex.schema.format_value(j, x[j]));
        cells.push_back(csv::format_number(pred));
        out += csv::join(cells) + "\n";
    };
    row("x_star", ex.x_star, ex.result.prediction_at_x_star);
    for (auto i : ex.truncated) row(std::to_string(i), ex.result.archive[i].point, ex.result.archive[i].prediction);
    return out;
}

inline std::string pareto_csv(const Explanation& ex) {
    std::vector<std::string> header{"index", "generation"};
    for (const auto& f : ex.schema) header.push_back(f.name);
    for (const char* c : {"prediction", "o1", "o2", "o3", "o4"}) header.emplace_back(c);
    std::string out = csv::join(header) + "\n";
    for (auto i : ex.truncated) {
        const auto& e = ex.result.archive[i];
        std::vector<std::string> cells{std::to_string(i), std::to_string(e.generation)};
        for (std::size_t j = 0; j < ex.schema.size(); ++j) cells.push_back(ex.schema.format_value(j, e.point[j]));
        cells.push_back(csv::format_number(e.prediction));
        for (std::size_t m = 0; m < 4; ++m) cells.push_back(csv::format_number(e.objectives[m]));
        out += csv::join(cells) + "\n";
    }
    return out;
}

inline nlohmann::json run_metadata(const Explanation& ex) {
    return nlohmann::json{{"target", ex.target.to_string()},
                          {"config", config_to_json(ex.config)},
                          {"schema", schema_to_json(ex.schema)},
                          {"x_star", ex.schema.point_to_json(ex.x_star)},
                          {"prediction_x_star", ex.result.prediction_at_x_star},
                          {"generations_run", ex.result.generations_run},
                          {"init_probabilities", ex.result.init_probabilities},
                          {"evaluations", ex.result.archive.size()}};
}

// Writes pareto.json, pareto.csv, archive.csv, archive.json, hv.csv and
// parallel.csv into `dir`.
inline void write_run_directory(const std::filesystem::path& dir, const Explanation& ex) {
    std::filesystem::create_directories(dir);
    write_text(dir / "pareto.json", pareto_payload(ex, true).dump(2) + "\n");
    write_text(dir / "pareto.csv", pareto_csv(ex));
    {
        std::ostringstream s;
        write_archive_csv(s, ex.result.archive, ex.schema);
        write_text(dir / "archive.csv", s.str());
    }
    write_text(dir / "archive.json", archive_to_json(ex.result.archive, ex.schema, run_metadata(ex)).dump(2) + "\n");
    {
        std::ostringstream s;
        write_hv_csv(s, ex.result.archive.hv_trace());
        write_text(dir / "hv.csv", s.str());
    }
    write_text(dir / "parallel.csv", parallel_table_csv(ex));
}

// Equal-width histogram of one numeric feature over the observed rows.
struct Histogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<std::size_t> counts;
};

inline Histogram feature_histogram(const ObservedDataset& observed, std::size_t j, std::size_t bins = 20) {
    Histogram h;
    const Bounds r = observed.derived_ranges()[j];
    const double width = r.width() > 0.0 ? r.width() : 1.0;
    for (std::size_t b = 0; b <= bins; ++b) {
        h.edges.push_back(r.lower + width * static_cast<double>(b) / static_cast<double>(bins));
    }
    h.counts.assign(bins, 0);
    for (const auto& row : observed.rows()) {
        auto b = static_cast<std::size_t>((row[j] - r.lower) / width * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        ++h.counts[b];
    }
    return h;
}

inline nlohmann::json surface_payload(const ResponseSurface& s, const ObservedDataset& observed,
                                      const DataPoint& x_star, const std::vector<DataPoint>& counterfactuals) {
    const auto& schema = observed.schema();
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t i = 0; i < s.a_values.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < s.b_values.size(); ++k) row.push_back(s.at(i, k));
        grid.push_back(std::move(row));
    }
    auto hist = [&](std::size_t j) {
        const auto h = feature_histogram(observed, j);
        return nlohmann::json{{"edges", h.edges}, {"counts", h.counts}};
    };
    nlohmann::json cfs = nlohmann::json::array();
    for (const auto& x : counterfactuals) {
        bool only_ab = true;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (j != s.feature_a && j != s.feature_b && !same_value(x[j], x_star[j])) only_ab = false;
        }
        cfs.push_back({{"a", x[s.feature_a]}, {"b", x[s.feature_b]}, {"only_ab", only_ab}});
    }
    return nlohmann::json{
        {"feature_a", schema[s.feature_a].name},
        {"feature_b", schema[s.feature_b].name},
        {"a_values", s.a_values},
        {"b_values", s.b_values},
        {"grid", std::move(grid)},
        {"x_star", {{"a", x_star[s.feature_a]}, {"b", x_star[s.feature_b]}}},
        {"histograms", {{"a", hist(s.feature_a)}, {"b", hist(s.feature_b)}}},
        {"counterfactuals", std::move(cfs)}};
}

} // namespace moc

#endif
