#ifndef MOC_SAMPLER_HPP
#define MOC_SAMPLER_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "moc/error.hpp"
#include "moc/feature_space.hpp"
#include "moc/random.hpp"

namespace moc {

// Node of a shallow partition tree. Inner nodes route a point left when
// its split value is <= threshold (numeric) or equals the level index
// (categorical). Leaves keep the observed target values that reached them.
struct TreeNode {
    std::optional<std::size_t> split_feature;
    bool categorical_split = false;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<double> pool;

    bool is_leaf() const { return !split_feature.has_value(); }
};

struct PartitionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    std::size_t leaf_of(const DataPoint& x) const {
        std::size_t n = 0;
        while (!nodes[n].is_leaf()) {
            const auto& node = nodes[n];
            const double v = x[*node.split_feature];
            const bool go_left = node.categorical_split ? v == node.threshold : v <= node.threshold;
            n = go_left ? node.left : node.right;
        }
        return n;
    }

    const std::vector<double>& leaf_pool(const DataPoint& x) const { return nodes[leaf_of(x)].pool; }

    std::size_t depth() const { return depth_from(0); }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(),
                                                      [](const TreeNode& n) { return n.is_leaf(); }));
    }

private:
    std::size_t depth_from(std::size_t n) const {
        if (nodes[n].is_leaf()) return 0;
        return 1 + std::max(depth_from(nodes[n].left), depth_from(nodes[n].right));
    }
};

struct TreeGrowth {
    std::size_t max_depth = 3;
    std::size_t min_leaf = 10;
    bool categorical_target = false;
    std::optional<std::size_t> excluded_feature;  // never split on this one
};

namespace detail {

// Sum of squared deviations (numeric target) or n times Gini impurity.
class Impurity {
public:
    explicit Impurity(bool categorical) : categorical_(categorical) {}

    void add(double y) {
        ++n_;
        if (categorical_) {
            counts_[y] += 1.0;
        } else {
            sum_ += y;
            sq_ += y * y;
        }
    }

    void remove(double y) {
        --n_;
        if (categorical_) {
            counts_[y] -= 1.0;
        } else {
            sum_ -= y;
            sq_ -= y * y;
        }
    }

    double value() const {
        if (n_ == 0) return 0.0;
        const double n = static_cast<double>(n_);
        if (categorical_) {
            double s = 0.0;
            for (const auto& [level, c] : counts_) s += c * c;
            return n - s / n;
        }
        return std::max(0.0, sq_ - sum_ * sum_ / n);
    }

    std::size_t count() const { return n_; }

private:
    bool categorical_;
    std::size_t n_ = 0;
    double sum_ = 0.0;
    double sq_ = 0.0;
    std::map<double, double> counts_;
};

struct Split {
    std::size_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;
    double gain = 0.0;
};

inline std::optional<Split> best_split(const std::vector<DataPoint>& rows, std::span<const double> target,
                                       const std::vector<std::size_t>& idx, const FeatureSchema& schema,
                                       const TreeGrowth& g) {
    Impurity parent(g.categorical_target);
    for (auto i : idx) parent.add(target[i]);
    const double base = parent.value();
    if (base <= 1e-12) return std::nullopt;

    std::optional<Split> best;
    auto consider = [&](Split s) {
        if (s.gain > 1e-12 * std::max(1.0, base) && (!best || s.gain > best->gain)) best = s;
    };

    for (std::size_t f = 0; f < schema.size(); ++f) {
        if (g.excluded_feature && *g.excluded_feature == f) continue;
        if (schema[f].is_categorical()) {
            for (std::size_t l = 0; l < schema[f].levels.size(); ++l) {
                Impurity in(g.categorical_target), out(g.categorical_target);
                for (auto i : idx) (rows[i][f] == static_cast<double>(l) ? in : out).add(target[i]);
                if (in.count() < g.min_leaf || out.count() < g.min_leaf) continue;
                consider({f, true, static_cast<double>(l), base - in.value() - out.value()});
            }
            continue;
        }
        std::vector<std::size_t> order = idx;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return rows[a][f] < rows[b][f]; });
        Impurity left(g.categorical_target), right(g.categorical_target);
        for (auto i : order) right.add(target[i]);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            left.add(target[order[k]]);
            right.remove(target[order[k]]);
            const double v = rows[order[k]][f];
            const double next = rows[order[k + 1]][f];
            if (v == next) continue;
            if (left.count() < g.min_leaf || right.count() < g.min_leaf) continue;
            consider({f, false, v + 0.5 * (next - v), base - left.value() - right.value()});
        }
    }
    return best;
}

inline void grow(PartitionTree& tree, std::size_t node, const std::vector<DataPoint>& rows,
                 std::span<const double> target, const std::vector<std::size_t>& idx, const FeatureSchema& schema,
                 const TreeGrowth& g, std::size_t depth) {
    std::optional<Split> split;
    if (depth < g.max_depth && idx.size() >= 2 * g.min_leaf) {
        split = best_split(rows, target, idx, schema, g);
    }
    if (!split) {
        for (auto i : idx) tree.nodes[node].pool.push_back(target[i]);
        return;
    }
    std::vector<std::size_t> left_idx, right_idx;
    for (auto i : idx) {
        const double v = rows[i][split->feature];
        const bool left = split->categorical ? v == split->threshold : v <= split->threshold;
        (left ? left_idx : right_idx).push_back(i);
    }
    const std::size_t l = tree.nodes.size();
    tree.nodes.emplace_back();
    const std::size_t r = tree.nodes.size();
    tree.nodes.emplace_back();
    auto& n = tree.nodes[node];
    n.split_feature = split->feature;
    n.categorical_split = split->categorical;
    n.threshold = split->threshold;
    n.left = l;
    n.right = r;
    grow(tree, l, rows, target, left_idx, schema, g, depth + 1);
    grow(tree, r, rows, target, right_idx, schema, g, depth + 1);
}

} // namespace detail

// CART-style tree: variance-reduction splits for a numeric target, Gini
// for a categorical one. Every leaf holds at least `min_leaf` rows.
inline PartitionTree grow_tree(const std::vector<DataPoint>& rows, std::span<const double> target,
                               const FeatureSchema& schema, const TreeGrowth& growth) {
    if (rows.empty()) {
        throw DatasetTooSmall("cannot grow a tree on zero rows");
    }
    PartitionTree tree;
    tree.nodes.emplace_back();
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    TreeGrowth g = growth;
    g.min_leaf = std::max<std::size_t>(1, g.min_leaf);
    detail::grow(tree, 0, rows, target, idx, schema, g, 0);
    return tree;
}

// Per-feature conditional samplers: tree j partitions the observed rows by
// the other features, and sampling draws from the observed values of
// feature j in the leaf the context falls into.
class ConditionalSampler {
public:
    ConditionalSampler(FeatureSchema schema, std::vector<PartitionTree> trees)
        : schema_(std::move(schema)), trees_(std::move(trees)) {}

    const FeatureSchema& schema() const { return schema_; }
    const PartitionTree& tree(std::size_t j) const { return trees_[j]; }
    std::size_t size() const { return trees_.size(); }

    // Feature j of `context` is ignored.
    double sample(std::size_t j, const DataPoint& context, Rng& rng) const {
        const auto& pool = trees_[j].leaf_pool(context);
        return pool[uniform_index(rng, pool.size())];
    }

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::array();
        for (std::size_t j = 0; j < trees_.size(); ++j) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : trees_[j].nodes) {
                if (n.is_leaf()) {
                    nodes.push_back({{"leaf", true}, {"pool_size", n.pool.size()}});
                } else {
                    nodes.push_back({{"split", schema_[*n.split_feature].name},
                                     {"categorical", n.categorical_split},
                                     {"threshold", n.threshold},
                                     {"left", n.left},
                                     {"right", n.right}});
                }
            }
            out.push_back({{"feature", schema_[j].name}, {"nodes", std::move(nodes)}});
        }
        return out;
    }

private:
    FeatureSchema schema_;
    std::vector<PartitionTree> trees_;
};

inline constexpr std::size_t default_sampler_depth = 3;

inline std::size_t default_min_leaf(std::size_t n_rows) {
    return std::max<std::size_t>(10, n_rows / 20);
}

inline ConditionalSampler fit_samplers(const ObservedDataset& observed, std::size_t max_depth,
                                       std::size_t min_leaf) {
    if (observed.empty() || observed.size() < min_leaf) {
        throw DatasetTooSmall("need at least min_leaf = " + std::to_string(min_leaf) + " observed rows, have " +
                              std::to_string(observed.size()));
    }
    const auto& schema = observed.schema();
    std::vector<PartitionTree> trees;
    std::vector<double> target(observed.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        for (std::size_t i = 0; i < observed.size(); ++i) target[i] = observed[i][j];
        TreeGrowth g;
        g.max_depth = max_depth;
        g.min_leaf = min_leaf;
        g.categorical_target = schema[j].is_categorical();
        g.excluded_feature = j;
        trees.push_back(grow_tree(observed.rows(), target, schema, g));
    }
    return ConditionalSampler(schema, std::move(trees));
}

inline ConditionalSampler fit_samplers(const ObservedDataset& observed) {
    return fit_samplers(observed, default_sampler_depth, default_min_leaf(observed.size()));
}

inline double sample_conditional(const ConditionalSampler& sampler, std::size_t j, const DataPoint& context,
                                 Rng& rng) {
    return sampler.sample(j, context, rng);
}

} // namespace moc

#endif
