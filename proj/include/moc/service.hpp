#ifndef MOC_SERVICE_HPP
#define MOC_SERVICE_HPP

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "moc/explain.hpp"
#include "moc/model.hpp"

namespace moc {

struct HttpError : Error {
    HttpError(int status, std::string code, const std::string& message)
        : Error(message), status(status), code(std::move(code)) {}
    int status;
    std::string code;
};

struct ServiceOptions {
    std::filesystem::path data_dir;
    std::filesystem::path runs_dir;  // defaults to <data_dir>/runs
    std::size_t queue_depth = 64;
    std::size_t max_resolution = 200;
};

// A registered dataset: <id>.csv, <id>.schema.json and optionally
// <id>.model.json in the data directory.
struct DatasetEntry {
    std::string id;
    std::shared_ptr<const ObservedDataset> data;
    std::shared_ptr<const PredictionModel> model;
};

enum class JobState { queued, running, done, failed };

inline std::string_view to_string(JobState s) {
    switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
    }
    return "unknown";
}

struct Job {
    std::string id;
    std::string dataset;
    nlohmann::json request;
    ExplainTask task;
    JobState state = JobState::queued;
    std::string error;
    std::atomic<std::size_t> generation{0};
    std::size_t generations_run = 0;

    // Immutable once state == done.
    std::string pareto;
    std::string pareto_all;
    std::string hv;
    DataPoint x_star;
    std::vector<DataPoint> counterfactuals;
};

class Service {
public:
    explicit Service(ServiceOptions options) : options_(std::move(options)) {
        if (options_.runs_dir.empty()) options_.runs_dir = options_.data_dir / "runs";
        if (!std::filesystem::is_directory(options_.data_dir)) {
            throw ConfigInvalid("data directory '" + options_.data_dir.string() + "' does not exist");
        }
        scan_datasets();
        std::filesystem::create_directories(options_.runs_dir);
        recover_jobs();
        // Without SO_REUSEPORT, so a port already in use fails to bind.
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
        });
        routes();
        worker_ = std::jthread([this](std::stop_token st) { work(st); });
    }

    ~Service() {
        stop();
        worker_.request_stop();
        queue_cv_.notify_all();
    }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds the listening socket; port 0 picks a free port. Returns the
    // bound port.
    int bind(const std::string& host, int port) {
        int bound = port;
        if (port == 0) {
            bound = server_.bind_to_any_port(host);
            if (bound < 0) throw BindFailure("cannot bind " + host);
        } else if (!server_.bind_to_port(host, port)) {
            throw BindFailure("cannot bind " + host + ":" + std::to_string(port));
        }
        return bound;
    }

    // Blocks serving requests until stop().
    void listen() { server_.listen_after_bind(); }

    void stop() {
        if (server_.is_running()) server_.stop();
    }

    void wait_until_ready() const { server_.wait_until_ready(); }

    const std::map<std::string, DatasetEntry>& datasets() const { return datasets_; }

    // Blocks until the job leaves the queued/running states.
    JobState wait_for(const std::string& id) {
        std::unique_lock lock(mutex_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) throw HttpError(404, "not_found", "unknown job '" + id + "'");
        auto job = it->second;
        done_cv_.wait(lock, [&] { return job->state == JobState::done || job->state == JobState::failed; });
        return job->state;
    }

private:
    static nlohmann::json error_body(const std::string& code, const std::string& message) {
        return {{"code", code}, {"message", message}};
    }

    template <class Fn>
    auto guarded(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            auto fail = [&](int status, const std::string& code, const std::string& msg) {
                res.status = status;
                res.set_content(error_body(code, msg).dump(), "application/json");
            };
            try {
                fn(req, res);
            } catch (const HttpError& e) {
                fail(e.status, e.code, e.what());
            } catch (const ExternalProcessFailure& e) {
                fail(502, "model_failure", e.what());
            } catch (const Error& e) {
                fail(400, "invalid_request", e.what());
            } catch (const nlohmann::json::exception& e) {
                fail(400, "invalid_request", e.what());
            } catch (const std::exception& e) {
                fail(500, "internal", e.what());
            }
        };
    }

    static void reply(httplib::Response& res, int status, const std::string& body) {
        res.status = status;
        res.set_content(body, "application/json");
    }

    static nlohmann::json parse_body(const httplib::Request& req) {
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw HttpError(400, "invalid_request", "body must be a JSON object");
        return j;
    }

    void scan_datasets() {
        const std::string suffix = ".schema.json";
        std::vector<std::filesystem::path> schemas;
        for (const auto& e : std::filesystem::directory_iterator(options_.data_dir)) {
            const auto name = e.path().filename().string();
            if (e.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) schemas.push_back(e.path());
        }
        for (const auto& schema_path : schemas) {
            const auto name = schema_path.filename().string();
            const std::string id = name.substr(0, name.size() - suffix.size());
            const auto csv_path = options_.data_dir / (id + ".csv");
            if (!std::filesystem::exists(csv_path)) continue;
            DatasetEntry entry{id, std::make_shared<ObservedDataset>(load_dataset(csv_path.string(), schema_path.string())),
                               nullptr};
            const auto model_path = options_.data_dir / (id + ".model.json");
            if (std::filesystem::exists(model_path)) {
                entry.model = std::shared_ptr<const PredictionModel>(
                    load_model(model_path.string(), entry.data->schema()).release());
            }
            datasets_.emplace(id, std::move(entry));
        }
    }

    const DatasetEntry& dataset(const std::string& id) const {
        auto it = datasets_.find(id);
        if (it == datasets_.end()) throw HttpError(404, "not_found", "unknown dataset '" + id + "'");
        return it->second;
    }

    const DatasetEntry& dataset_with_model(const std::string& id) const {
        const auto& d = dataset(id);
        if (!d.model) throw HttpError(404, "not_found", "dataset '" + id + "' has no model");
        return d;
    }

    static DesiredOutcome target_from_json(const nlohmann::json& j) {
        if (j.is_string()) return parse_target(j.get<std::string>());
        if (j.is_number()) return DesiredOutcome::single(j.get<double>());
        if (j.is_object()) {
            DesiredOutcome t{j.at("lower").get<double>(), j.at("upper").get<double>(), j.value("lower_open", false),
                             j.value("upper_open", false)};
            if (!(t.lower <= t.upper)) throw ConfigInvalid("target lower exceeds upper");
            return t;
        }
        throw ConfigInvalid("target must be a string, number or object");
    }

    // Validates a submission eagerly so bad requests fail with 400 instead
    // of producing a failed job.
    ExplainTask task_from_request(const nlohmann::json& req, const DatasetEntry& d) const {
        static const std::set<std::string> known{"dataset", "row", "point", "target", "freeze", "bounds", "config", "limit"};
        for (const auto& [key, _] : req.items()) {
            if (!known.contains(key)) throw ConfigInvalid("unknown request key '" + key + "'");
        }
        ExplainTask task;
        task.data = d.data.get();
        if (req.contains("row")) {
            task.row = req["row"].get<std::size_t>();
            if (*task.row >= d.data->size()) throw ConfigInvalid("row out of range");
        } else if (req.contains("point")) {
            task.point = d.data->schema().point_from_json(req["point"]);
        } else {
            throw ConfigInvalid("request needs 'row' or 'point'");
        }
        if (!req.contains("target")) throw ConfigInvalid("request needs 'target'");
        task.target = target_from_json(req["target"]);
        if (req.contains("freeze")) task.freeze = req["freeze"].get<std::vector<std::string>>();
        if (req.contains("bounds")) {
            if (!req["bounds"].is_object()) throw ConfigInvalid("bounds must map feature names to [lower, upper]");
            for (const auto& [name, b] : req["bounds"].items()) task.bounds.emplace_back(name, parse_bounds(b, name));
        }
        if (req.contains("config")) task.config = config_from_json(req["config"]);
        task.config.validate();
        if (req.contains("limit")) task.limit = req["limit"].get<std::size_t>();
        apply_constraints(d.data->schema(), task.freeze, task.bounds);
        return task;
    }

    std::filesystem::path run_dir(const std::string& id) const { return options_.runs_dir / id; }

    void persist_status(const Job& job) const {
        nlohmann::json s{{"state", to_string(job.state)}, {"dataset", job.dataset}};
        if (!job.error.empty()) s["error"] = job.error;
        write_text(run_dir(job.id) / "status.json", s.dump(2) + "\n");
    }

    static void fill_payloads(Job& job, const nlohmann::json& all, const FeatureSchema& schema) {
        auto brief = all;
        brief.erase("all");
        job.pareto = brief.dump();
        job.pareto_all = all.dump();
        job.hv = nlohmann::json{{"hv_trace", all.at("hv_trace")}}.dump();
        job.generations_run = all.at("hv_trace").size() - 1;
        job.x_star = schema.point_from_json(all.at("x_star"));
        job.counterfactuals.clear();
        for (const auto& c : all.at("counterfactuals")) {
            job.counterfactuals.push_back(schema.point_from_json(c.at("features")));
        }
    }

    // Reloads finished runs; runs interrupted by a restart are marked failed.
    void recover_jobs() {
        for (const auto& e : std::filesystem::directory_iterator(options_.runs_dir)) {
            if (!e.is_directory()) continue;
            const auto id = e.path().filename().string();
            const auto id_num = id.starts_with("job-") ? id.substr(4) : std::string();
            if (id_num.empty() || id_num.find_first_not_of("0123456789") != std::string::npos) continue;
            next_id_ = std::max(next_id_, std::stoull(id_num) + 1);
            auto job = std::make_shared<Job>();
            job->id = id;
            try {
                job->request = read_json_file((e.path() / "request.json").string());
                job->dataset = job->request.at("dataset").get<std::string>();
                const auto status = read_json_file((e.path() / "status.json").string());
                const auto state = status.at("state").get<std::string>();
                if (state == "done") {
                    const auto& d = dataset(job->dataset);
                    job->task = task_from_request(job->request, d);
                    fill_payloads(*job, read_json_file((e.path() / "pareto.json").string()), d.data->schema());
                    job->state = JobState::done;
                } else {
                    job->state = JobState::failed;
                    job->error = state == "failed" ? status.value("error", "failed") : "interrupted by restart";
                }
            } catch (const std::exception& ex) {
                job->state = JobState::failed;
                job->error = std::string("unreadable run directory: ") + ex.what();
            }
            jobs_.emplace(id, std::move(job));
        }
    }

    void work(std::stop_token st) {
        while (!st.stop_requested()) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lock(mutex_);
                queue_cv_.wait(lock, st, [&] { return !queue_.empty(); });
                if (st.stop_requested()) return;
                job = queue_.front();
                queue_.pop_front();
                job->state = JobState::running;
            }
            run_job(*job);
            done_cv_.notify_all();
        }
    }

    void run_job(Job& job) {
        try {
            persist_status(job);
            const auto& d = dataset_with_model(job.dataset);
            SearchObserver observer;
            observer.on_generation = [&job](std::size_t g, double) { job.generation = g; };
            const auto ex = explain(job.task, *d.model, &observer);
            write_run_directory(run_dir(job.id), ex);
            const auto all = pareto_payload(ex, true);
            std::lock_guard lock(mutex_);
            fill_payloads(job, all, d.data->schema());
            job.state = JobState::done;
            persist_status(job);
        } catch (const std::exception& e) {
            std::lock_guard lock(mutex_);
            job.state = JobState::failed;
            job.error = e.what();
            try {
                persist_status(job);
            } catch (const std::exception&) {
            }
        }
    }

    std::shared_ptr<Job> find_job(const std::string& id) const {
        auto it = jobs_.find(id);
        if (it == jobs_.end()) throw HttpError(404, "not_found", "unknown job '" + id + "'");
        return it->second;
    }

    std::shared_ptr<Job> finished_job(const std::string& id) const {
        auto job = find_job(id);
        if (job->state != JobState::done) {
            throw HttpError(409, "not_done", "job '" + id + "' is " + std::string(to_string(job->state)));
        }
        return job;
    }

    void routes() {
        server_.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
                        reply(res, 200, nlohmann::json{{"status", "ok"}}.dump());
                    }));

        server_.Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
                        nlohmann::json out = nlohmann::json::array();
                        for (const auto& [id, d] : datasets_) {
                            out.push_back({{"id", id},
                                           {"rows", d.data->size()},
                                           {"has_model", d.model != nullptr},
                                           {"schema", schema_to_json(d.data->schema())}});
                        }
                        reply(res, 200, out.dump());
                    }));

        server_.Get(R"(/datasets/([^/]+)/rows/(\d+))",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto& d = dataset(req.matches[1]);
                        const auto i = std::stoull(req.matches[2]);
                        if (i >= d.data->size()) throw HttpError(404, "not_found", "row out of range");
                        const auto& x = (*d.data)[i];
                        nlohmann::json out{{"row", i}, {"values", d.data->schema().point_to_json(x)}};
                        if (d.model) out["prediction"] = d.model->predict(x);
                        reply(res, 200, out.dump());
                    }));

        server_.Post("/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         const auto body = parse_body(req);
                         if (!body.contains("dataset") || !body["dataset"].is_string()) {
                             throw ConfigInvalid("request needs a 'dataset' id");
                         }
                         const auto& d = dataset_with_model(body["dataset"].get<std::string>());
                         auto task = task_from_request(body, d);
                         std::shared_ptr<Job> job;
                         {
                             std::lock_guard lock(mutex_);
                             if (queue_.size() >= options_.queue_depth) {
                                 throw HttpError(503, "queue_full", "job queue is full");
                             }
                             job = std::make_shared<Job>();
                             job->id = "job-" + std::to_string(next_id_++);
                             job->dataset = d.id;
                             job->request = body;
                             job->task = std::move(task);
                             std::filesystem::create_directories(run_dir(job->id));
                             write_text(run_dir(job->id) / "request.json", body.dump(2) + "\n");
                             persist_status(*job);
                             jobs_.emplace(job->id, job);
                             queue_.push_back(job);
                         }
                         queue_cv_.notify_one();
                         reply(res, 202, nlohmann::json{{"id", job->id}, {"state", "queued"}}.dump());
                     }));

        server_.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::lock_guard lock(mutex_);
                        const auto job = find_job(req.matches[1]);
                        nlohmann::json out{{"id", job->id},
                                           {"dataset", job->dataset},
                                           {"state", to_string(job->state)},
                                           {"generation", job->generation.load()},
                                           {"generations", job->task.config.generations}};
                        if (job->state == JobState::done) out["generations_run"] = job->generations_run;
                        if (job->state == JobState::failed) out["error"] = job->error;
                        reply(res, 200, out.dump());
                    }));

        server_.Get(R"(/jobs/([^/]+)/pareto)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::lock_guard lock(mutex_);
                        const auto job = finished_job(req.matches[1]);
                        const bool all = req.has_param("all") && req.get_param_value("all") == "true";
                        reply(res, 200, all ? job->pareto_all : job->pareto);
                    }));

        server_.Get(R"(/jobs/([^/]+)/hv)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::lock_guard lock(mutex_);
                        reply(res, 200, finished_job(req.matches[1])->hv);
                    }));

        server_.Post("/surface", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         reply(res, 200, surface(parse_body(req)).dump());
                     }));
    }

    nlohmann::json surface(const nlohmann::json& body) const {
        std::string dataset_id;
        DataPoint x_star;
        std::optional<std::size_t> row;
        std::vector<DataPoint> cfs;
        if (body.contains("job")) {
            std::lock_guard lock(mutex_);
            const auto job = finished_job(body["job"].get<std::string>());
            dataset_id = job->dataset;
            x_star = job->x_star;
            row = job->task.row;
            cfs = job->counterfactuals;
        } else if (body.contains("dataset")) {
            dataset_id = body["dataset"].get<std::string>();
            const auto& d = dataset(dataset_id);
            if (body.contains("row")) {
                row = body["row"].get<std::size_t>();
                if (*row >= d.data->size()) throw ConfigInvalid("row out of range");
                x_star = (*d.data)[*row];
            } else if (body.contains("point")) {
                x_star = d.data->schema().point_from_json(body["point"]);
            } else {
                throw ConfigInvalid("surface request needs 'row' or 'point'");
            }
        } else {
            throw ConfigInvalid("surface request needs 'job' or 'dataset'");
        }
        const auto& d = dataset_with_model(dataset_id);
        const auto& schema = d.data->schema();
        const auto a = schema.index_of(body.at("a").get<std::string>());
        const auto b = schema.index_of(body.at("b").get<std::string>());
        for (auto j : {a, b}) {
            if (!schema[j].is_numeric()) {
                throw HttpError(400, "non_numerical_feature", "feature '" + schema[j].name + "' is not numerical");
            }
        }
        const auto resolution = body.value("resolution", std::size_t{50});
        if (resolution < 2 || resolution > options_.max_resolution) {
            throw ConfigInvalid("resolution must be in [2, " + std::to_string(options_.max_resolution) + "]");
        }
        const auto observed = row ? d.data->without_row(*row) : *d.data;
        const auto grid = response_surface_grid(*d.model, x_star, observed, a, b, resolution);
        return surface_payload(grid, observed, x_star, cfs);
    }

    ServiceOptions options_;
    std::map<std::string, DatasetEntry> datasets_;
    mutable std::mutex mutex_;
    std::condition_variable_any queue_cv_;
    std::condition_variable done_cv_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::shared_ptr<Job>> queue_;
    unsigned long long next_id_ = 1;
    httplib::Server server_;
    std::jthread worker_;
};

} // namespace moc

#endif
