// moc: explain one prediction, benchmark variants, or serve the HTTP API.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moc/benchmark.hpp"
#include "moc/explain.hpp"
#include "moc/service.hpp"

namespace {

struct ExplainFlags {
    std::string data, schema, model, target, out, surface, config;
    std::size_t row = 0;
    std::size_t pop = 20;
    std::size_t generations = 175;
    std::uint64_t seed = 1;
    std::optional<double> epsilon;
    std::vector<std::string> freeze, bounds;
    bool no_ice_init = false;
    bool no_conditional = false;
    std::size_t k = 1;
    std::size_t limit = 10;
};

std::pair<std::string, moc::Bounds> parse_bound(const std::string& spec) {
    const auto first = spec.find(':');
    const auto last = spec.rfind(':');
    if (first == std::string::npos || first == last) {
        throw moc::ConfigInvalid("bounds must look like name:lower:upper, got '" + spec + "'");
    }
    const auto lo = moc::csv::parse_number(spec.substr(first + 1, last - first - 1));
    const auto hi = moc::csv::parse_number(spec.substr(last + 1));
    if (!lo || !hi) throw moc::ConfigInvalid("bad bounds '" + spec + "'");
    return {spec.substr(0, first), moc::Bounds{*lo, *hi}};
}

void write_surface(const std::string& spec, const moc::Explanation& ex, const moc::PredictionModel& model,
                   const std::filesystem::path& out) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
    if (parts.size() != 3) throw moc::ConfigInvalid("--surface expects feature_a,feature_b,resolution");
    const auto& schema = ex.schema;
    const auto a = schema.index_of(parts[0]);
    const auto b = schema.index_of(parts[1]);
    for (auto j : {a, b}) {
        if (!schema[j].is_numeric()) throw moc::ConfigInvalid("feature '" + schema[j].name + "' is not numerical");
    }
    const auto res = moc::csv::parse_number(parts[2]);
    if (!res || *res < 2 || *res > 200 || *res != static_cast<double>(static_cast<std::size_t>(*res))) {
        throw moc::ConfigInvalid("surface resolution must be an integer in [2, 200]");
    }
    const auto grid = moc::response_surface_grid(model, ex.x_star, ex.observed, a, b, static_cast<std::size_t>(*res));
    std::vector<moc::DataPoint> cfs;
    for (auto i : ex.truncated) cfs.push_back(ex.result.archive[i].point);
    moc::write_text(out / "surface.json", moc::surface_payload(grid, ex.observed, ex.x_star, cfs).dump(2) + "\n");
}

int cmd_explain(const ExplainFlags& f) {
    const auto data = moc::load_dataset(f.data, f.schema);
    const auto model = moc::load_model(f.model, data.schema());
    moc::ExplainTask task;
    task.data = &data;
    task.row = f.row;
    task.target = moc::parse_target(f.target);
    if (!f.config.empty()) task.config = moc::config_from_json(moc::read_json_file(f.config));
    task.config.mu = f.pop;
    task.config.generations = f.generations;
    task.config.seed = f.seed;
    task.config.epsilon = f.epsilon;
    task.config.k = f.k;
    if (f.no_ice_init) task.config.use_ice_init = false;
    if (f.no_conditional) task.config.use_conditional_mutator = false;
    task.freeze = f.freeze;
    for (const auto& b : f.bounds) task.bounds.push_back(parse_bound(b));
    task.limit = f.limit;
    const auto ex = moc::explain(task, *model);
    moc::write_run_directory(f.out, ex);
    if (!f.surface.empty()) write_surface(f.surface, ex, *model, f.out);
    std::size_t attaining = 0;
    for (auto i : ex.truncated) attaining += task.target.contains(ex.result.archive[i].prediction) ? 1 : 0;
    std::cerr << "moc: " << ex.result.counterfactuals.size() << " nondominated, " << ex.truncated.size()
              << " returned (" << attaining << " attain " << task.target.to_string() << "), final hv "
              << moc::csv::format_number(ex.result.archive.current_hv()) << "\n";
    return 0;
}

int cmd_benchmark(const std::string& manifest_path, const std::string& out) {
    const auto manifest =
        moc::parse_manifest(moc::read_json_file(manifest_path), std::filesystem::path(manifest_path).parent_path());
    moc::write_benchmark_report(out, moc::run_benchmark(manifest));
    return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& data_dir, const std::string& runs_dir,
              std::size_t queue_depth) {
    moc::Service service({data_dir, runs_dir, queue_depth});
    const int bound = service.bind(host, port);
    std::cerr << "moc: serving " << service.datasets().size() << " dataset(s) on http://" << host << ":" << bound
              << "\n";
    service.listen();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective counterfactual explanations"};
    app.require_subcommand(1);

    ExplainFlags ef;
    auto* explain = app.add_subcommand("explain", "Search counterfactuals for one dataset row");
    explain->add_option("--data", ef.data, "Dataset CSV")->required();
    explain->add_option("--schema", ef.schema, "Schema JSON")->required();
    explain->add_option("--model", ef.model, "Model JSON (linear or external)")->required();
    explain->add_option("--row", ef.row, "0-based row index of x*")->required();
    explain->add_option("--target", ef.target, "Desired outcome: v, a:b, (a:b, a:b)")->required();
    explain->add_option("--out", ef.out, "Run directory")->required();
    explain->add_option("--pop", ef.pop, "Population size");
    explain->add_option("--generations", ef.generations, "Number of generations");
    explain->add_option("--seed", ef.seed, "Random seed");
    explain->add_option("--epsilon", ef.epsilon, "Penalize candidates with o1 above this");
    explain->add_option("--freeze", ef.freeze, "Non-actionable features")->delimiter(',');
    explain->add_option("--bounds", ef.bounds, "Capping bounds name:lower:upper")->delimiter(',');
    explain->add_flag("--no-ice-init", ef.no_ice_init, "Uniform initialization probabilities");
    explain->add_flag("--no-conditional", ef.no_conditional, "Disable the conditional mutator");
    explain->add_option("--k", ef.k, "Neighbours for the plausibility objective");
    explain->add_option("--limit", ef.limit, "Size of the returned counterfactual set");
    explain->add_option("--surface", ef.surface, "Response surface: feature_a,feature_b,resolution");
    explain->add_option("--config", ef.config, "JSON file with control-parameter overrides");

    std::string manifest, bench_out;
    auto* bench = app.add_subcommand("benchmark", "Compare MOC variants and random search");
    bench->add_option("--manifest", manifest, "Benchmark manifest JSON")->required();
    bench->add_option("--out", bench_out, "Report directory")->required();

    std::string host = "127.0.0.1", data_dir, runs_dir;
    int port = 8080;
    std::size_t queue_depth = 64;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--port", port, "TCP port (0 picks a free one)");
    serve->add_option("--host", host, "Listen address");
    serve->add_option("--data-dir", data_dir, "Directory of <id>.csv/.schema.json/.model.json")->required();
    serve->add_option("--runs-dir", runs_dir, "Where job runs are stored (default <data-dir>/runs)");
    serve->add_option("--queue-depth", queue_depth, "Maximum number of queued jobs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*explain) return cmd_explain(ef);
        if (*bench) return cmd_benchmark(manifest, bench_out);
        if (*serve) return cmd_serve(host, port, data_dir, runs_dir, queue_depth);
    } catch (const moc::ExternalProcessFailure& e) {
        std::cerr << "moc: model failure: " << e.what() << "\n";
        return 2;
    } catch (const moc::BindFailure& e) {
        std::cerr << "moc: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "moc: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
