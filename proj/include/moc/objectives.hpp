#ifndef MOC_OBJECTIVES_HPP
#define MOC_OBJECTIVES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moc/csv.hpp"
#include "moc/error.hpp"
#include "moc/feature_space.hpp"
#include "moc/model.hpp"
#include "moc/parallel.hpp"

namespace moc {

// Target set for the prediction: a closed, half-open or open interval, or
// a single value when lower == upper.
struct DesiredOutcome {
    double lower = 0.0;
    double upper = 0.0;
    bool lower_open = false;
    bool upper_open = false;

    static DesiredOutcome closed(double lo, double hi) { return {lo, hi, false, false}; }
    static DesiredOutcome single(double v) { return {v, v, false, false}; }

    bool contains(double y) const {
        const bool above = lower_open ? y > lower : y >= lower;
        const bool below = upper_open ? y < upper : y <= upper;
        return above && below;
    }

    std::string to_string() const {
        if (lower == upper && !lower_open && !upper_open) return csv::format_number(lower);
        return std::string(lower_open ? "(" : "") + csv::format_number(lower) + ":" + csv::format_number(upper) +
               (upper_open ? ")" : "");
    }
};

// Accepts "v", "a:b", and open-endpoint forms "(a:b", "a:b)", "(a:b)";
// "[" and "]" mark closed endpoints explicitly.
inline DesiredOutcome parse_target(std::string_view text) {
    DesiredOutcome t;
    std::string_view s = text;
    if (!s.empty() && (s.front() == '(' || s.front() == '[')) {
        t.lower_open = s.front() == '(';
        s.remove_prefix(1);
    }
    if (!s.empty() && (s.back() == ')' || s.back() == ']')) {
        t.upper_open = s.back() == ')';
        s.remove_suffix(1);
    }
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) {
        auto v = csv::parse_number(s);
        if (!v || t.lower_open || t.upper_open) throw ParseError("bad target '" + std::string(text) + "'");
        t.lower = t.upper = *v;
        return t;
    }
    auto lo = csv::parse_number(s.substr(0, colon));
    auto hi = csv::parse_number(s.substr(colon + 1));
    if (!lo || !hi || *lo > *hi) {
        throw ParseError("bad target '" + std::string(text) + "'");
    }
    t.lower = *lo;
    t.upper = *hi;
    return t;
}

struct ObjectiveVector {
    std::array<double, 4> values{};

    double o1() const { return values[0]; }
    double o2() const { return values[1]; }
    double o3() const { return values[2]; }
    double o4() const { return values[3]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

// Worst value of each objective: (o1 of x_star, 1, p, 1).
struct ReferencePoint {
    std::array<double, 4> s{};
    double operator[](std::size_t i) const { return s[i]; }
};

inline double o1_target_distance(double prediction, const DesiredOutcome& target) {
    if (target.contains(prediction)) return 0.0;
    if (prediction < target.lower) return target.lower - prediction;
    if (prediction > target.upper) return prediction - target.upper;
    // Exactly on an open endpoint: the infimum 0 is not attained, so report
    // the smallest positive distance to keep o1 == 0 equivalent to membership.
    return std::numeric_limits<double>::denorm_min();
}

inline double o2_proximity(const DataPoint& x, const DataPoint& x_star, const FeatureSchema& schema,
                           std::span<const double> ranges) {
    return gower_distance(x, x_star, schema, ranges);
}

inline constexpr double sparsity_rel_tol = 1e-12;

inline bool same_value(double a, double b) {
    return a == b || std::abs(a - b) <= sparsity_rel_tol * std::max(std::abs(a), std::abs(b));
}

inline int o3_sparsity(const DataPoint& x, const DataPoint& x_star) {
    int changed = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!same_value(x[j], x_star[j])) ++changed;
    }
    return changed;
}

// Weighted Gower distance to the k nearest observed rows; ties in distance
// go to the lower row index. Empty weights mean uniform 1/k.
inline double o4_plausibility(const DataPoint& x, const ObservedDataset& observed, std::size_t k = 1,
                              std::span<const double> weights = {}) {
    if (observed.empty()) {
        throw EmptyDataset("o4 needs at least one observed row");
    }
    if (k < 1 || k > observed.size()) {
        throw ConfigInvalid("k must be in [1, number of observed rows]");
    }
    if (!weights.empty() && weights.size() != k) {
        throw ConfigInvalid("need exactly k weights");
    }
    if (!weights.empty()) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (std::abs(total - 1.0) > 1e-9) throw ConfigInvalid("weights must sum to 1");
    }
    const auto& schema = observed.schema();
    const auto ranges = observed.ranges();
    if (k == 1) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& row : observed.rows()) {
            best = std::min(best, gower_distance(x, row, schema, ranges));
        }
        return best;
    }
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) {
        d.emplace_back(gower_distance(x, observed[i], schema, ranges), i);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sum += (weights.empty() ? 1.0 / static_cast<double>(k) : weights[i]) * d[i].first;
    }
    return sum;
}

// Everything the objectives need besides the candidate itself.
struct ObjectiveContext {
    const PredictionModel* model = nullptr;
    const ObservedDataset* observed = nullptr;
    DataPoint x_star;
    DesiredOutcome target;
    std::size_t k = 1;
    std::vector<double> weights;  // empty: uniform

    const FeatureSchema& schema() const { return observed->schema(); }
};

inline ObjectiveVector objectives_for(const DataPoint& x, double prediction, const ObjectiveContext& ctx) {
    ObjectiveVector o;
    o[0] = o1_target_distance(prediction, ctx.target);
    o[1] = o2_proximity(x, ctx.x_star, ctx.schema(), ctx.observed->ranges());
    o[2] = static_cast<double>(o3_sparsity(x, ctx.x_star));
    o[3] = o4_plausibility(x, *ctx.observed, ctx.k, ctx.weights);
    return o;
}

inline ObjectiveVector evaluate_objectives(const DataPoint& x, const ObjectiveContext& ctx) {
    return objectives_for(x, ctx.model->predict(x), ctx);
}

struct Evaluation {
    std::vector<double> predictions;
    std::vector<ObjectiveVector> objectives;
};

// One model call for the whole batch; the distance work is spread over
// the evaluation threads.
inline Evaluation evaluate_batch(std::span<const DataPoint> points, const ObjectiveContext& ctx) {
    Evaluation ev;
    ev.predictions = ctx.model->predict_batch(points);
    if (ev.predictions.size() != points.size()) {
        throw ExternalProcessFailure("model returned the wrong number of predictions");
    }
    ev.objectives.resize(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        ev.objectives[i] = objectives_for(points[i], ev.predictions[i], ctx);
    });
    return ev;
}

inline ReferencePoint reference_point(double prediction_at_x_star, const DesiredOutcome& target, std::size_t p) {
    return ReferencePoint{{o1_target_distance(prediction_at_x_star, target), 1.0, static_cast<double>(p), 1.0}};
}

inline ReferencePoint reference_point(const DataPoint& x_star, const DesiredOutcome& target,
                                      const PredictionModel& model, std::size_t p) {
    return reference_point(model.predict(x_star), target, p);
}

} // namespace moc

#endif
