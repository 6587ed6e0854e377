#ifndef MOC_MODEL_HPP
#define MOC_MODEL_HPP

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "moc/csv.hpp"
#include "moc/error.hpp"
#include "moc/feature_space.hpp"

extern char** environ;

namespace moc {

// Batch prediction over points of a fixed schema. For classifiers the
// output is the probability of one user-selected class.
class PredictionModel {
public:
    virtual ~PredictionModel() = default;

    virtual std::vector<double> predict_batch(std::span<const DataPoint> batch) const = 0;

    double predict(const DataPoint& x) const {
        return predict_batch(std::span<const DataPoint>(&x, 1)).front();
    }
};

// Any callable mapping one point to a prediction. Handy for fixtures.
template <typename F>
class FunctionModel final : public PredictionModel {
public:
    explicit FunctionModel(F f) : f_(std::move(f)) {}

    std::vector<double> predict_batch(std::span<const DataPoint> batch) const override {
        std::vector<double> out;
        out.reserve(batch.size());
        for (const auto& x : batch) out.push_back(f_(x));
        return out;
    }

private:
    F f_;
};

enum class Link { identity, logistic };

// One column of the encoded design: a numeric feature as-is, or the
// indicator of one level of a categorical feature.
struct EncodedColumn {
    std::size_t feature = 0;
    std::optional<std::size_t> level;
};

class LinearModel final : public PredictionModel {
public:
    LinearModel(double intercept, std::vector<double> coefficients, std::vector<EncodedColumn> encoding, Link link)
        : intercept_(intercept), coefficients_(std::move(coefficients)), encoding_(std::move(encoding)), link_(link) {
        if (coefficients_.size() != encoding_.size()) {
            throw ConfigInvalid("linear model: " + std::to_string(coefficients_.size()) + " coefficients for " +
                                std::to_string(encoding_.size()) + " encoded columns");
        }
    }

    // Default encoding: numeric features verbatim, every categorical level
    // one-hot, in schema order.
    static std::vector<EncodedColumn> default_encoding(const FeatureSchema& schema) {
        std::vector<EncodedColumn> enc;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (schema[j].is_numeric()) {
                enc.push_back({j, std::nullopt});
            } else {
                for (std::size_t l = 0; l < schema[j].levels.size(); ++l) enc.push_back({j, l});
            }
        }
        return enc;
    }

    double linear_predictor(const DataPoint& x) const {
        double eta = intercept_;
        for (std::size_t c = 0; c < encoding_.size(); ++c) {
            const auto& col = encoding_[c];
            const double v = col.level ? (x[col.feature] == static_cast<double>(*col.level) ? 1.0 : 0.0)
                                       : x[col.feature];
            eta += coefficients_[c] * v;
        }
        return eta;
    }

    std::vector<double> predict_batch(std::span<const DataPoint> batch) const override {
        std::vector<double> out;
        out.reserve(batch.size());
        for (const auto& x : batch) {
            const double eta = linear_predictor(x);
            out.push_back(link_ == Link::logistic ? 1.0 / (1.0 + std::exp(-eta)) : eta);
        }
        return out;
    }

    double intercept() const { return intercept_; }
    const std::vector<double>& coefficients() const { return coefficients_; }
    const std::vector<EncodedColumn>& encoding() const { return encoding_; }
    Link link() const { return link_; }

private:
    double intercept_;
    std::vector<double> coefficients_;
    std::vector<EncodedColumn> encoding_;
    Link link_;
};

namespace detail {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd(std::exchange(o.fd, -1)) {}
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

inline std::pair<Fd, Fd> make_pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
        throw ExternalProcessFailure(std::string("pipe: ") + std::strerror(errno));
    }
    return {Fd(fds[0]), Fd(fds[1])};
}

// Runs `argv` with `input` on stdin and returns everything it wrote to
// stdout. Throws on spawn failure or nonzero exit.
inline std::string run_process(const std::vector<std::string>& argv, const std::string& workdir,
                               const std::string& input) {
    static const bool sigpipe_ignored = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    auto [in_read, in_write] = make_pipe();
    auto [out_read, out_write] = make_pipe();

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_read.fd, STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_write.fd, STDOUT_FILENO);
    if (!workdir.empty()) {
        posix_spawn_file_actions_addchdir_np(&actions, workdir.c_str());
    }

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        throw ExternalProcessFailure("cannot start '" + argv[0] + "': " + std::strerror(rc));
    }
    in_read.reset();
    out_write.reset();

    std::thread writer([fd = std::move(in_write), &input]() mutable {
        std::size_t off = 0;
        while (off < input.size()) {
            const ssize_t n = ::write(fd.fd, input.data() + off, input.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                break;  // child closed its stdin; the exit status tells the story
            }
            off += static_cast<std::size_t>(n);
        }
    });

    std::string output;
    char buf[65536];
    for (;;) {
        const ssize_t n = ::read(out_read.fd, buf, sizeof(buf));
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (n == 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    writer.join();

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) {
            throw ExternalProcessFailure(std::string("waitpid: ") + std::strerror(errno));
        }
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw ExternalProcessFailure("'" + argv[0] + "' exited with status " +
                                     std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    }
    return output;
}

} // namespace detail

// A model living in another process. Each batch is written as headerless
// CSV (schema order, categorical levels as labels) to the child's stdin;
// the child answers with one decimal prediction per line.
class ExternalModel final : public PredictionModel {
public:
    ExternalModel(FeatureSchema schema, std::string command, std::vector<std::string> args,
                  std::string workdir = {})
        : schema_(std::move(schema)), workdir_(std::move(workdir)) {
        argv_.push_back(std::move(command));
        for (auto& a : args) argv_.push_back(std::move(a));
        probe();
    }

    std::vector<double> predict_batch(std::span<const DataPoint> batch) const override {
        if (batch.empty()) return {};
        std::string input;
        for (const auto& x : batch) {
            for (std::size_t j = 0; j < schema_.size(); ++j) {
                if (j) input.push_back(',');
                input += csv::quote(schema_.format_value(j, x[j]));
            }
            input.push_back('\n');
        }
        std::string output;
        {
            std::lock_guard lock(mutex_);
            output = detail::run_process(argv_, workdir_, input);
        }
        std::vector<double> preds;
        preds.reserve(batch.size());
        std::size_t start = 0;
        while (start < output.size()) {
            std::size_t end = output.find('\n', start);
            if (end == std::string::npos) end = output.size();
            std::string_view line(output.data() + start, end - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (!line.empty()) {
                auto v = csv::parse_number(line);
                if (!v || !std::isfinite(*v)) {
                    throw ExternalProcessFailure("malformed prediction '" + std::string(line) + "'");
                }
                preds.push_back(*v);
            }
            start = end + 1;
        }
        if (preds.size() != batch.size()) {
            throw ExternalProcessFailure("external model returned " + std::to_string(preds.size()) +
                                         " predictions for " + std::to_string(batch.size()) + " points");
        }
        return preds;
    }

    const std::vector<std::string>& argv() const { return argv_; }

private:
    void probe() const {
        DataPoint x{std::vector<double>(schema_.size())};
        for (std::size_t j = 0; j < schema_.size(); ++j) {
            const auto& f = schema_[j];
            x[j] = f.is_categorical() ? 0.0 : std::round(0.5 * (f.range.lower + f.range.upper));
            if (f.is_numeric()) x[j] = std::clamp(x[j], f.range.lower, f.range.upper);
        }
        (void)predict_batch(std::span<const DataPoint>(&x, 1));
    }

    FeatureSchema schema_;
    std::vector<std::string> argv_;
    std::string workdir_;
    mutable std::mutex mutex_;
};

// Model file: {"type": "linear", "link", "intercept", "coefficients",
// "encoding"} or {"type": "external", "command", "args"}. Relative paths
// in an external command resolve against `base_dir`, which is also the
// child's working directory.
inline std::unique_ptr<PredictionModel> parse_model(const nlohmann::json& doc, const FeatureSchema& schema,
                                                    const std::filesystem::path& base_dir = {}) {
    try {
        const std::string type = doc.at("type").get<std::string>();
        if (type == "linear") {
            const std::string link_name = doc.value("link", std::string("identity"));
            Link link;
            if (link_name == "identity") {
                link = Link::identity;
            } else if (link_name == "logistic") {
                link = Link::logistic;
            } else {
                throw ConfigInvalid("unknown link '" + link_name + "'");
            }
            std::vector<EncodedColumn> encoding;
            if (doc.contains("encoding")) {
                for (const auto& col : doc["encoding"]) {
                    EncodedColumn c;
                    c.feature = schema.index_of(col.at("feature").get<std::string>());
                    if (col.contains("level")) {
                        if (!schema[c.feature].is_categorical()) {
                            throw ConfigInvalid("encoding: level given for numeric feature");
                        }
                        c.level = schema[c.feature].level_index(col["level"].get<std::string>());
                    } else if (schema[c.feature].is_categorical()) {
                        throw ConfigInvalid("encoding: categorical feature '" + schema[c.feature].name +
                                            "' needs a level");
                    }
                    encoding.push_back(c);
                }
            } else {
                encoding = LinearModel::default_encoding(schema);
            }
            return std::make_unique<LinearModel>(doc.value("intercept", 0.0),
                                                 doc.at("coefficients").get<std::vector<double>>(),
                                                 std::move(encoding), link);
        }
        if (type == "external") {
            std::string command = doc.at("command").get<std::string>();
            if (command.find('/') != std::string::npos && !std::filesystem::path(command).is_absolute() &&
                !base_dir.empty()) {
                command = (base_dir / command).lexically_normal().string();
            }
            auto args = doc.value("args", std::vector<std::string>{});
            std::string workdir = base_dir.empty() ? std::string() : base_dir.string();
            return std::make_unique<ExternalModel>(schema, std::move(command), std::move(args), std::move(workdir));
        }
        throw ConfigInvalid("unknown model type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

inline std::unique_ptr<PredictionModel> load_model(const std::string& path, const FeatureSchema& schema) {
    auto dir = std::filesystem::absolute(path).parent_path();
    return parse_model(read_json_file(path), schema, dir);
}

} // namespace moc

#endif
