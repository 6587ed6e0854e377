#ifndef MOC_BENCHMARK_HPP
#define MOC_BENCHMARK_HPP

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moc/baselines.hpp"
#include "moc/explain.hpp"

namespace moc {

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m{"mocmod", "moc", "mocice", "moccond", "random"};
    return m;
}

struct MethodRun {
    std::string method;
    ParetoArchive archive;
    std::vector<std::size_t> counterfactuals;  // nondominated archive indices
};

// Runs one method on one instance. MOC variants differ only in the two
// modifications; random search gets generations + 1 batches so every
// method evaluates mu * (generations + 1) candidates.
inline MethodRun run_method(const std::string& method, const DataPoint& x_star, const DesiredOutcome& target,
                            const PredictionModel& model, const ObservedDataset& observed, EvolutionConfig config) {
    if (method == "random") {
        auto archive = random_search(x_star, target, model, observed, config.mu, config.generations + 1, config.seed,
                                     config.k);
        auto cfs = archive.nondominated();
        return {method, std::move(archive), std::move(cfs)};
    }
    if (method == "mocmod") {
        config.use_ice_init = config.use_conditional_mutator = true;
    } else if (method == "moc") {
        config.use_ice_init = config.use_conditional_mutator = false;
    } else if (method == "mocice") {
        config.use_ice_init = true;
        config.use_conditional_mutator = false;
    } else if (method == "moccond") {
        config.use_ice_init = false;
        config.use_conditional_mutator = true;
    } else {
        throw ConfigInvalid("unknown method '" + method + "'");
    }
    auto r = run_moc(x_star, target, model, observed, config);
    return {method, std::move(r.archive), std::move(r.counterfactuals)};
}

// Opposite-class target for a probability output.
inline DesiredOutcome auto_target(double prediction) {
    return prediction > 0.5 ? DesiredOutcome{0.0, 0.5, false, false} : DesiredOutcome{0.5, 1.0, true, false};
}

struct ExternalSet {
    std::string method;
    std::size_t row = 0;
    std::filesystem::path file;
};

struct BenchmarkEntry {
    std::string name;
    std::filesystem::path data;
    std::filesystem::path schema;
    std::filesystem::path model;
    std::vector<std::size_t> rows;
    std::string target = "auto";
    std::vector<ExternalSet> external;
};

struct BenchmarkManifest {
    std::vector<BenchmarkEntry> entries;
    std::vector<std::string> methods = {"mocmod", "moc", "random"};
    EvolutionConfig config;
};

inline BenchmarkManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base) {
    if (!doc.is_object()) throw ConfigInvalid("manifest must be a JSON object");
    BenchmarkManifest m;
    auto path = [&](const nlohmann::json& j, const char* key) {
        std::filesystem::path p = j.at(key).get<std::string>();
        return p.is_absolute() ? p : base / p;
    };
    try {
        if (doc.contains("config")) m.config = config_from_json(doc["config"]);
        if (doc.contains("methods")) m.methods = doc["methods"].get<std::vector<std::string>>();
        for (const auto& e : doc.value("entries", nlohmann::json::array())) {
            BenchmarkEntry entry;
            entry.name = e.at("name").get<std::string>();
            entry.data = path(e, "data");
            entry.schema = path(e, "schema");
            entry.model = path(e, "model");
            entry.rows = e.at("rows").get<std::vector<std::size_t>>();
            entry.target = e.value("target", std::string("auto"));
            for (const auto& x : e.value("external", nlohmann::json::array())) {
                entry.external.push_back({x.at("method").get<std::string>(), x.at("row").get<std::size_t>(),
                                          path(x, "file")});
            }
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("manifest: ") + e.what());
    }
    m.config.validate();
    if (m.entries.empty()) throw ConfigInvalid("manifest lists no entries");
    if (m.methods.empty()) throw ConfigInvalid("manifest lists no methods");
    for (const auto& method : m.methods) {
        if (std::count(m.methods.begin(), m.methods.end(), method) > 1) {
            throw ConfigInvalid("method '" + method + "' listed twice");
        }
        if (std::find(known_methods().begin(), known_methods().end(), method) == known_methods().end()) {
            throw ConfigInvalid("unknown method '" + method + "'");
        }
    }
    for (const auto& e : m.entries) {
        if (e.rows.empty()) throw ConfigInvalid("entry '" + e.name + "' lists no rows");
    }
    return m;
}

// Counterfactuals produced elsewhere, one per CSV row with a header naming
// the schema's features (extra columns are ignored).
inline std::vector<DataPoint> read_external_counterfactuals(const std::filesystem::path& file,
                                                            const FeatureSchema& schema) {
    std::ifstream in(file);
    if (!in) throw ConfigInvalid("cannot read '" + file.string() + "'");
    const auto lines = csv::read_all(in);
    if (lines.empty()) throw EmptyComparisonSet("'" + file.string() + "' has no header");
    std::vector<std::size_t> column(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        auto it = std::find(lines[0].begin(), lines[0].end(), schema[j].name);
        if (it == lines[0].end()) throw SchemaMismatch("'" + file.string() + "' lacks column '" + schema[j].name + "'");
        column[j] = static_cast<std::size_t>(it - lines[0].begin());
    }
    std::vector<DataPoint> out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].size() != lines[0].size()) throw ParseError("'" + file.string() + "': ragged row");
        DataPoint x{std::vector<double>(schema.size())};
        for (std::size_t j = 0; j < schema.size(); ++j) x[j] = schema.parse_value(j, lines[r][column[j]]);
        schema.validate(x);
        out.push_back(std::move(x));
    }
    return out;
}

struct BenchmarkReport {
    std::string ranks;       // entry,row,method,generation,hv,rank
    std::string mean_ranks;  // method,generation,mean_rank
    std::string summary;     // per entry,row,method: set sizes, final HV, objective medians
    std::string coverage;    // entry,row,method,external,n_external,coverage
};

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline BenchmarkReport run_benchmark(const BenchmarkManifest& manifest) {
    BenchmarkReport rep;
    std::ostringstream ranks, summary, coverage;
    ranks << "entry,row,method,generation,hv,rank\n";
    summary << "entry,row,method,n_nondominated,n_attaining,hv_final,median_o1,median_o2,median_o3,median_o4\n";
    coverage << "entry,row,method,external,n_external,coverage\n";
    std::map<std::string, std::vector<std::vector<double>>> rank_sums;  // method -> generation -> ranks
    std::size_t instance = 0;
    for (const auto& entry : manifest.entries) {
        const auto data = load_dataset(entry.data.string(), entry.schema.string());
        const auto model = load_model(entry.model.string(), data.schema());
        for (auto row : entry.rows) {
            if (row >= data.size()) throw ConfigInvalid("entry '" + entry.name + "': row out of range");
            const auto x_star = data[row];
            const auto observed = data.without_row(row);
            const auto target = entry.target == "auto" ? auto_target(model->predict(x_star)) : parse_target(entry.target);
            auto config = manifest.config;
            config.seed = manifest.config.seed + instance++;

            std::vector<MethodRun> runs;
            for (const auto& m : manifest.methods) runs.push_back(run_method(m, x_star, target, *model, observed, config));

            std::size_t gens = runs.front().archive.hv_trace().size();
            for (const auto& r : runs) gens = std::min(gens, r.archive.hv_trace().size());
            for (std::size_t g = 0; g < gens; ++g) {
                std::vector<double> hv;
                for (const auto& r : runs) hv.push_back(r.archive.hv_trace()[g]);
                const auto rk = mid_ranks(hv);
                for (std::size_t i = 0; i < runs.size(); ++i) {
                    ranks << csv::quote(entry.name) << ',' << row << ',' << runs[i].method << ',' << g << ','
                          << csv::format_number(hv[i]) << ',' << csv::format_number(rk[i]) << '\n';
                    auto& sums = rank_sums[runs[i].method];
                    if (sums.size() <= g) sums.resize(g + 1);
                    sums[g].push_back(rk[i]);
                }
            }

            for (const auto& r : runs) {
                std::array<std::vector<double>, 4> objs;
                std::size_t attaining = 0;
                for (auto i : r.counterfactuals) {
                    for (std::size_t m = 0; m < 4; ++m) objs[m].push_back(r.archive[i].objectives[m]);
                    if (target.contains(r.archive[i].prediction)) ++attaining;
                }
                summary << csv::quote(entry.name) << ',' << row << ',' << r.method << ',' << r.counterfactuals.size()
                        << ',' << attaining << ',' << csv::format_number(r.archive.current_hv());
                for (std::size_t m = 0; m < 4; ++m) summary << ',' << csv::format_number(median(objs[m]));
                summary << '\n';
            }

            ObjectiveContext ctx{model.get(), &observed, x_star, target, config.k, {}};
            for (const auto& ext : entry.external) {
                if (ext.row != row) continue;
                const auto theirs_pts = read_external_counterfactuals(ext.file, data.schema());
                const auto theirs = evaluate_batch(theirs_pts, ctx).objectives;
                for (const auto& r : runs) {
                    std::vector<ObjectiveVector> ours;
                    for (auto i : r.counterfactuals) ours.push_back(r.archive[i].objectives);
                    coverage << csv::quote(entry.name) << ',' << row << ',' << r.method << ','
                             << csv::quote(ext.method) << ',' << theirs.size() << ','
                             << csv::format_number(coverage_rate(ours, theirs)) << '\n';
                }
            }
        }
    }
    std::ostringstream mean;
    mean << "method,generation,mean_rank\n";
    for (const auto& m : manifest.methods) {
        const auto& sums = rank_sums[m];
        for (std::size_t g = 0; g < sums.size(); ++g) {
            double s = 0.0;
            for (double v : sums[g]) s += v;
            mean << m << ',' << g << ',' << csv::format_number(s / static_cast<double>(sums[g].size())) << '\n';
        }
    }
    rep.ranks = ranks.str();
    rep.mean_ranks = mean.str();
    rep.summary = summary.str();
    rep.coverage = coverage.str();
    return rep;
}

inline void write_benchmark_report(const std::filesystem::path& dir, const BenchmarkReport& rep) {
    std::filesystem::create_directories(dir);
    write_text(dir / "ranks.csv", rep.ranks);
    write_text(dir / "mean_ranks.csv", rep.mean_ranks);
    write_text(dir / "summary.csv", rep.summary);
    write_text(dir / "coverage.csv", rep.coverage);
}

} // namespace moc

#endif
