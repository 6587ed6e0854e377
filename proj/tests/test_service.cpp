#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "moc/service.hpp"

using namespace moc;
using nlohmann::json;

namespace {

void write_data_dir(const std::filesystem::path& dir) {
    const auto credit = fixtures::credit_data();
    fixtures::write_dataset(dir, "credit", credit);
    fixtures::write_linear_model(dir / "credit.model.json", fixtures::credit_logistic(), credit.schema());
    const auto diabetes = fixtures::diabetes_data();
    fixtures::write_dataset(dir, "diabetes", diabetes);
    fixtures::write_linear_model(dir / "diabetes.model.json", fixtures::diabetes_logistic(), diabetes.schema());
}

class Running {
public:
    explicit Running(const std::filesystem::path& data_dir, std::size_t queue_depth = 64)
        : service_(ServiceOptions{data_dir, {}, queue_depth}) {
        port_ = service_.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { service_.listen(); });
        service_.wait_until_ready();
    }
    ~Running() {
        service_.stop();
        thread_.join();
    }

    Service& service() { return service_; }
    int port() const { return port_; }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60, 0);
        return c;
    }

private:
    Service service_;
    int port_ = 0;
    std::thread thread_;
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

const json small_job{{"dataset", "credit"}, {"row", 4}, {"target", "(0.5:1"}, {"config", {{"generations", 10}}}};

std::string submit(httplib::Client& c, const json& body) {
    const auto r = c.Post("/jobs", body.dump(), "application/json");
    EXPECT_EQ(r->status, 202) << r->body;
    return body_of(r)["id"].get<std::string>();
}

} // namespace

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override { write_data_dir(dir_.path()); }
    fixtures::TempDir dir_;
};

TEST_F(ServiceTest, HealthAndDatasets) {
    Running s(dir_.path());
    auto c = s.client();
    EXPECT_EQ(c.Get("/health")->status, 200);
    const auto ds = body_of(c.Get("/datasets"));
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds[0]["id"], "credit");
    EXPECT_EQ(ds[0]["rows"], 522);
    EXPECT_EQ(ds[1]["has_model"], true);
    const auto row = c.Get("/datasets/credit/rows/4");
    ASSERT_EQ(row->status, 200);
    EXPECT_TRUE(body_of(row).contains("prediction"));
    EXPECT_EQ(c.Get("/datasets/credit/rows/9999")->status, 404);
    EXPECT_EQ(c.Get("/datasets/none/rows/0")->status, 404);
}

TEST_F(ServiceTest, JobLifecycle) {
    Running s(dir_.path());
    auto c = s.client();
    const auto id = submit(c, small_job);
    EXPECT_EQ(id, "job-1");
    EXPECT_EQ(s.service().wait_for(id), JobState::done);
    const auto st = body_of(c.Get("/jobs/" + id));
    EXPECT_EQ(st["state"], "done");
    EXPECT_EQ(st["generations_run"], 10);

    const auto brief = body_of(c.Get("/jobs/" + id + "/pareto"));
    const auto full = body_of(c.Get("/jobs/" + id + "/pareto?all=true"));
    EXPECT_FALSE(brief.contains("all"));
    ASSERT_TRUE(full.contains("all"));
    std::set<std::size_t> all_idx;
    for (const auto& cf : full["all"]) all_idx.insert(cf["index"].get<std::size_t>());
    const auto x_star = brief["x_star"];
    for (const auto& cf : brief["counterfactuals"]) {
        EXPECT_TRUE(all_idx.contains(cf["index"].get<std::size_t>()));
        // o3 recomputed from the returned features against x_star.
        int changed = 0;
        for (const auto& [name, v] : cf["features"].items()) changed += v != x_star[name];
        EXPECT_EQ(cf["objectives"][2].get<double>(), changed);
    }
    const auto hv = body_of(c.Get("/jobs/" + id + "/hv"));
    EXPECT_EQ(hv["hv_trace"].size(), 11u);
    EXPECT_EQ(hv["hv_trace"], brief["hv_trace"]);
    EXPECT_TRUE(std::filesystem::exists(dir_ / "runs" / id / "archive.csv"));
}

TEST_F(ServiceTest, ErrorsAndNotDone) {
    Running s(dir_.path());
    auto c = s.client();
    EXPECT_EQ(c.Get("/jobs/job-99")->status, 404);
    EXPECT_EQ(c.Get("/jobs/job-99/pareto")->status, 404);
    auto bad = c.Post("/jobs", "not json", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(body_of(bad)["code"], "invalid_request");
    EXPECT_EQ(c.Post("/jobs", json{{"dataset", "nope"}, {"row", 1}, {"target", "0.5:1"}}.dump(), "application/json")->status,
              404);
    EXPECT_EQ(c.Post("/jobs", json{{"dataset", "credit"}, {"row", 1}}.dump(), "application/json")->status, 400);
    EXPECT_EQ(c.Post("/jobs", json{{"dataset", "credit"}, {"row", 1}, {"target", "0.5:1"}, {"extra", 1}}.dump(),
                     "application/json")
                  ->status,
              400);
    EXPECT_EQ(c.Post("/jobs", json{{"dataset", "credit"}, {"row", 1}, {"target", "0.5:1"}, {"bounds", {{"job", {0, 1}}}}}
                                  .dump(),
                     "application/json")
                  ->status,
              400);

    // A long job keeps the queue busy so the second one is observably not done.
    auto long_job = small_job;
    long_job["config"]["generations"] = 400;
    const auto first = submit(c, long_job);
    const auto second = submit(c, small_job);
    const auto r = c.Get("/jobs/" + second + "/pareto");
    EXPECT_EQ(r->status, 409);
    EXPECT_EQ(body_of(r)["code"], "not_done");
    EXPECT_EQ(c.Get("/jobs/" + second + "/hv")->status, 409);
    s.service().wait_for(second);
    EXPECT_EQ(body_of(c.Get("/jobs/" + first))["state"], "done");
}

TEST_F(ServiceTest, QueueFull) {
    Running s(dir_.path(), 1);
    auto c = s.client();
    auto long_job = small_job;
    long_job["config"]["generations"] = 300;
    submit(c, long_job);
    // The worker may or may not have picked up the first job yet; at most
    // two submissions fit (one running, one queued).
    int rejected = 0;
    std::string last;
    for (int i = 0; i < 3; ++i) {
        const auto r = c.Post("/jobs", small_job.dump(), "application/json");
        if (r->status == 503) {
            ++rejected;
            EXPECT_EQ(body_of(r)["code"], "queue_full");
        } else {
            last = body_of(r)["id"];
        }
    }
    EXPECT_GE(rejected, 1);
    if (!last.empty()) s.service().wait_for(last);
}

TEST_F(ServiceTest, Surface) {
    Running s(dir_.path());
    auto c = s.client();
    const auto id = submit(c, small_job);
    s.service().wait_for(id);
    const auto r = c.Post("/surface", json{{"job", id}, {"a", "age"}, {"b", "amount"}}.dump(), "application/json");
    ASSERT_EQ(r->status, 200) << r->body;
    const auto j = body_of(r);
    ASSERT_EQ(j["grid"].size(), 50u);
    EXPECT_EQ(j["grid"][0].size(), 50u);
    const auto pareto = body_of(c.Get("/jobs/" + id + "/pareto"));
    EXPECT_EQ(j["counterfactuals"].size(), pareto["counterfactuals"].size());
    std::size_t total = 0;
    for (const auto& n : j["histograms"]["a"]["counts"]) total += n.get<std::size_t>();
    EXPECT_EQ(total, 521u);

    const auto direct = c.Post("/surface", json{{"dataset", "diabetes"}, {"row", 0}, {"a", "plas"}, {"b", "mass"},
                                                {"resolution", 10}}
                                               .dump(),
                               "application/json");
    ASSERT_EQ(direct->status, 200);
    EXPECT_EQ(body_of(direct)["grid"].size(), 10u);

    const auto cat = c.Post("/surface", json{{"job", id}, {"a", "age"}, {"b", "job"}}.dump(), "application/json");
    EXPECT_EQ(cat->status, 400);
    EXPECT_EQ(body_of(cat)["code"], "non_numerical_feature");
    for (int res : {1, 201}) {
        EXPECT_EQ(c.Post("/surface", json{{"job", id}, {"a", "age"}, {"b", "amount"}, {"resolution", res}}.dump(),
                         "application/json")
                      ->status,
                  400);
    }
    EXPECT_EQ(c.Post("/surface", json{{"job", "job-77"}, {"a", "age"}, {"b", "amount"}}.dump(), "application/json")->status,
              404);
}

TEST_F(ServiceTest, SameSeedJobsAgree) {
    Running s(dir_.path());
    auto c = s.client();
    const auto a = submit(c, small_job);
    const auto b = submit(c, small_job);
    s.service().wait_for(b);
    EXPECT_EQ(c.Get("/jobs/" + a + "/pareto?all=true")->body, c.Get("/jobs/" + b + "/pareto?all=true")->body);
}

TEST_F(ServiceTest, ModelFailureFailsJob) {
    fixtures::write_file(dir_ / "broken.model.json",
                         json{{"type", "external"}, {"command", "sh"},
                              {"args", {"-c", "n=0; while read l; do n=$((n+1)); echo 0.5; done; [ $n -le 1 ]"}}}
                             .dump());
    fixtures::write_dataset(dir_.path(), "broken", fixtures::credit_data());
    Running s(dir_.path());
    auto c = s.client();
    const auto id = submit(c, json{{"dataset", "broken"}, {"row", 1}, {"target", "0.5:1"}, {"config", {{"generations", 2}}}});
    EXPECT_EQ(s.service().wait_for(id), JobState::failed);
    EXPECT_EQ(body_of(c.Get("/jobs/" + id))["state"], "failed");
    const auto r = c.Post("/surface", json{{"dataset", "broken"}, {"row", 0}, {"a", "age"}, {"b", "amount"}}.dump(),
                          "application/json");
    EXPECT_EQ(r->status, 502);
}

TEST_F(ServiceTest, RestartRecoversFinishedJobs) {
    std::string pareto;
    {
        Running s(dir_.path());
        auto c = s.client();
        const auto id = submit(c, small_job);
        s.service().wait_for(id);
        pareto = c.Get("/jobs/" + id + "/pareto")->body;
    }
    // A run directory left behind mid-flight.
    std::filesystem::create_directories(dir_ / "runs" / "job-2");
    fixtures::write_file(dir_ / "runs" / "job-2" / "request.json", small_job.dump());
    fixtures::write_file(dir_ / "runs" / "job-2" / "status.json", R"({"state": "running", "dataset": "credit"})");
    Running s(dir_.path());
    auto c = s.client();
    EXPECT_EQ(c.Get("/jobs/job-1/pareto")->body, pareto);
    const auto st = body_of(c.Get("/jobs/job-2"));
    EXPECT_EQ(st["state"], "failed");
    EXPECT_EQ(st["error"], "interrupted by restart");
    EXPECT_EQ(submit(c, small_job), "job-3");
}

TEST_F(ServiceTest, BindFailures) {
    Running s(dir_.path());
    Service other(ServiceOptions{dir_.path(), dir_ / "runs2", 4});
    // Port 1 needs privileges we do not have (or is otherwise unavailable).
    if (geteuid() != 0) {
        EXPECT_THROW(other.bind("127.0.0.1", 1), BindFailure);
    }
    EXPECT_THROW(other.bind("127.0.0.1", s.port()), BindFailure);
    EXPECT_THROW(other.bind("256.0.0.1", 8080), BindFailure);
    EXPECT_THROW(Service(ServiceOptions{dir_ / "missing", {}, 4}), ConfigInvalid);
}
