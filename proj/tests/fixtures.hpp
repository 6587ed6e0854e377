// Synthetic datasets and models shared by the unit and acceptance tests.
#ifndef MOC_TEST_FIXTURES_HPP
#define MOC_TEST_FIXTURES_HPP

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moc/forest.hpp"
#include "moc/model.hpp"
#include "moc/random.hpp"

namespace fixtures {

using namespace moc;

inline FeatureDescriptor numeric(std::string name, double lo, double hi, FeatureKind kind = FeatureKind::numerical) {
    FeatureDescriptor f;
    f.name = std::move(name);
    f.kind = kind;
    f.range = {lo, hi};
    return f;
}

inline FeatureDescriptor categorical(std::string name, std::vector<std::string> levels) {
    FeatureDescriptor f;
    f.name = std::move(name);
    f.kind = levels.size() == 2 ? FeatureKind::binary : FeatureKind::categorical;
    f.levels = std::move(levels);
    return f;
}

inline double round_to(double v, double step) { return std::round(v / step) * step; }

inline double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Eight numeric features in the style of the Pima diabetes data.
inline FeatureSchema diabetes_schema() {
    return FeatureSchema({numeric("preg", 0, 17), numeric("plas", 0, 199), numeric("pres", 0, 122),
                          numeric("skin", 0, 99), numeric("insu", 0, 846), numeric("mass", 0, 67.1),
                          numeric("pedi", 0.078, 2.42), numeric("age", 21, 81)});
}

inline DataPoint diabetes_x_star() { return DataPoint{{11, 120, 80, 37, 150, 42.3, 0.78, 48}}; }

// Rows 0 and 1 hold the per-feature minima and maxima so the observed
// ranges equal the declared ones.
inline ObservedDataset diabetes_data(std::uint64_t seed = 7, std::size_t n = 768) {
    const auto schema = diabetes_schema();
    Rng rng(seed);
    std::vector<DataPoint> rows;
    rows.push_back(DataPoint{{0, 0, 0, 0, 0, 0, 0.078, 21}});
    rows.push_back(DataPoint{{17, 199, 122, 99, 846, 67.1, 2.42, 81}});
    while (rows.size() < n) {
        const double age = clip(std::round(21 + std::abs(standard_normal(rng)) * 14), 21, 81);
        const double preg = clip(std::round((age - 21) / 5 + standard_normal(rng) * 2.2), 0, 17);
        const double plas = clip(std::round(121 + 31 * standard_normal(rng) + 0.3 * (age - 33)), 0, 199);
        const double pres = clip(std::round(69 + 12 * standard_normal(rng) + 0.2 * (age - 33)), 0, 122);
        const double mass = clip(round_to(32 + 7 * standard_normal(rng), 0.1), 0, 67.1);
        const double skin = bernoulli(rng, 0.3) ? 0 : clip(std::round(0.9 * mass + 8 * standard_normal(rng)), 0, 99);
        const double insu = bernoulli(rng, 0.45)
                                ? 0
                                : clip(std::round(std::exp(4.6 + 0.006 * (plas - 121) + 0.55 * standard_normal(rng))),
                                       0, 846);
        const double pedi = clip(round_to(std::exp(-0.8 + 0.55 * standard_normal(rng)), 0.001), 0.078, 2.42);
        rows.push_back(DataPoint{{preg, plas, pres, skin, insu, mass, pedi, age}});
    }
    return ObservedDataset(schema, std::move(rows));
}

inline LinearModel diabetes_logistic() {
    const auto schema = diabetes_schema();
    return LinearModel(-8.4, {0.123, 0.035, -0.013, 0.0006, -0.0012, 0.09, 0.95, 0.015},
                       LinearModel::default_encoding(schema), Link::logistic);
}

// Nine mixed features in the style of the German credit data.
inline FeatureSchema credit_schema() {
    return FeatureSchema({numeric("age", 19, 75, FeatureKind::integer), categorical("sex", {"female", "male"}),
                          categorical("job", {"unskilled", "skilled", "highly_skilled", "management"}),
                          categorical("housing", {"free", "own", "rent"}),
                          categorical("saving", {"little", "moderate", "quite_rich", "rich"}),
                          categorical("checking", {"little", "moderate", "rich"}),
                          numeric("amount", 250, 18424), numeric("duration", 4, 72, FeatureKind::integer),
                          categorical("purpose", {"business", "car", "domestic", "education", "furniture",
                                                  "radio_tv", "repairs", "vacation"})});
}

inline ObservedDataset credit_data(std::uint64_t seed = 11, std::size_t n = 522) {
    const auto schema = credit_schema();
    Rng rng(seed);
    std::vector<DataPoint> rows;
    rows.push_back(DataPoint{{19, 0, 0, 0, 0, 0, 250, 4, 0}});
    rows.push_back(DataPoint{{75, 1, 3, 2, 3, 2, 18424, 72, 7}});
    auto pick = [&](std::vector<double> weights) {
        double total = 0;
        for (double w : weights) total += w;
        double u = uniform01(rng) * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if ((u -= weights[i]) < 0) return static_cast<double>(i);
        }
        return static_cast<double>(weights.size() - 1);
    };
    while (rows.size() < n) {
        const double age = clip(std::round(19 + std::abs(standard_normal(rng)) * 16), 19, 75);
        const double sex = bernoulli(rng, 0.69) ? 1 : 0;
        const double job = pick({0.2, 0.63, 0.02, 0.15});
        const double housing = pick({0.11, 0.7, 0.19});
        const double saving = pick({0.75, 0.14, 0.06, 0.05});
        const double checking = pick({0.47, 0.43, 0.1});
        const double duration = clip(std::round(std::exp(2.9 + 0.5 * standard_normal(rng))), 4, 72);
        const double amount =
            clip(round_to(std::exp(7.4 + 0.035 * duration + 0.45 * standard_normal(rng)), 1), 250, 18424);
        const double purpose = pick({0.1, 0.33, 0.01, 0.06, 0.2, 0.25, 0.02, 0.03});
        rows.push_back(DataPoint{{age, sex, job, housing, saving, checking, amount, duration, purpose}});
    }
    return ObservedDataset(schema, std::move(rows));
}

// Probability of a good credit risk.
inline LinearModel credit_logistic() {
    const auto schema = credit_schema();
    // age | sex f,m | job 4 | housing 3 | saving 4 | checking 3 | amount | duration | purpose 8
    std::vector<double> coef{0.02,  -0.1,  0.1,   -0.2, 0.0,  0.1,   0.2,   -0.3, 0.3,  -0.2,
                             -0.3,  0.2,   0.6,   0.8,  -0.6, 0.2,   0.9,   -8e-5, -0.04, 0.1,
                             0.3,   -0.2,  -0.3,  0.0,  0.2,  -0.2,  -0.1};
    return LinearModel(0.9, std::move(coef), LinearModel::default_encoding(schema), Link::logistic);
}

inline nlohmann::json linear_model_json(const LinearModel& m, const FeatureSchema& schema) {
    nlohmann::json enc = nlohmann::json::array();
    for (const auto& c : m.encoding()) {
        nlohmann::json col{{"feature", schema[c.feature].name}};
        if (c.level) col["level"] = schema[c.feature].levels[*c.level];
        enc.push_back(std::move(col));
    }
    return {{"type", "linear"},
            {"link", m.link() == Link::logistic ? "logistic" : "identity"},
            {"intercept", m.intercept()},
            {"coefficients", m.coefficients()},
            {"encoding", std::move(enc)}};
}

// Bagged regression trees fitted to 0/1 labels drawn from `teacher`.
inline Forest train_forest(const ObservedDataset& data, const PredictionModel& teacher, std::uint64_t seed,
                           std::size_t n_trees = 15, std::size_t depth = 5, std::size_t min_leaf = 8) {
    Rng rng(seed);
    const auto probs = teacher.predict_batch(data.rows());
    std::vector<double> labels;
    for (double p : probs) labels.push_back(bernoulli(rng, p) ? 1.0 : 0.0);
    std::vector<PartitionTree> trees;
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::vector<DataPoint> rows;
        std::vector<double> y;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto k = uniform_index(rng, data.size());
            rows.push_back(data[k]);
            y.push_back(labels[k]);
        }
        TreeGrowth g;
        g.max_depth = depth;
        g.min_leaf = min_leaf;
        trees.push_back(grow_tree(rows, y, data.schema(), g));
    }
    return Forest(data.schema(), std::move(trees));
}

class TempDir {
public:
    explicit TempDir(const std::string& tag = "moc") {
        auto base = std::filesystem::temp_directory_path();
        std::string tmpl = (base / (tag + "-XXXXXX")).string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Writes <id>.csv and <id>.schema.json.
inline void write_dataset(const std::filesystem::path& dir, const std::string& id, const ObservedDataset& data) {
    const auto& schema = data.schema();
    std::vector<std::string> header;
    for (const auto& f : schema) header.push_back(f.name);
    std::string text = csv::join(header) + "\n";
    for (const auto& row : data.rows()) {
        std::vector<std::string> cells;
        for (std::size_t j = 0; j < schema.size(); ++j) cells.push_back(schema.format_value(j, row[j]));
        text += csv::join(cells) + "\n";
    }
    write_file(dir / (id + ".csv"), text);
    write_file(dir / (id + ".schema.json"), schema_to_json(schema).dump(2));
}

inline void write_linear_model(const std::filesystem::path& path, const LinearModel& m, const FeatureSchema& schema) {
    write_file(path, linear_model_json(m, schema).dump(2));
}

// Writes <stem>.forest.json next to `model_path` and an external model file
// that runs the moc-forest predictor on it.
inline void write_forest_model(const std::filesystem::path& model_path, const Forest& forest) {
    const auto forest_name = model_path.stem().string() + ".forest.json";
    write_file(model_path.parent_path() / forest_name, forest.to_json().dump());
    write_file(model_path, nlohmann::json{{"type", "external"}, {"command", MOC_FOREST_PATH}, {"args", {forest_name}}}
                               .dump(2));
}

} // namespace fixtures

#endif
