#ifndef MOC_FOREST_HPP
#define MOC_FOREST_HPP

#include <numeric>
#include <vector>

#include <json.hpp>

#include "moc/error.hpp"
#include "moc/feature_space.hpp"
#include "moc/model.hpp"
#include "moc/sampler.hpp"

namespace moc {

// Averaging ensemble of partition trees whose leaves predict the mean of
// their pool. Serves as a stand-in black box behind the external-process
// protocol.
class Forest final : public PredictionModel {
public:
    Forest(FeatureSchema schema, std::vector<PartitionTree> trees)
        : schema_(std::move(schema)), trees_(std::move(trees)) {
        if (trees_.empty()) throw ConfigInvalid("forest has no trees");
        for (const auto& t : trees_) {
            for (const auto& n : t.nodes) {
                if (n.is_leaf() && n.pool.empty()) throw ConfigInvalid("forest leaf without value");
            }
        }
    }

    const FeatureSchema& schema() const { return schema_; }

    std::vector<double> predict_batch(std::span<const DataPoint> batch) const override {
        std::vector<double> out;
        out.reserve(batch.size());
        for (const auto& x : batch) {
            double sum = 0.0;
            for (const auto& t : trees_) {
                const auto& pool = t.leaf_pool(x);
                sum += std::accumulate(pool.begin(), pool.end(), 0.0) / static_cast<double>(pool.size());
            }
            out.push_back(sum / static_cast<double>(trees_.size()));
        }
        return out;
    }

    // {"features": schema, "trees": [{"nodes": [...]}]}; inner nodes are
    // {"feature", "threshold"|"level", "left", "right"}, leaves {"value"}.
    nlohmann::json to_json() const {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : trees_) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes) {
                if (n.is_leaf()) {
                    nodes.push_back(
                        {{"value", std::accumulate(n.pool.begin(), n.pool.end(), 0.0) / static_cast<double>(n.pool.size())}});
                    continue;
                }
                const auto& f = schema_[*n.split_feature];
                nlohmann::json node{{"feature", f.name}, {"left", n.left}, {"right", n.right}};
                if (n.categorical_split) {
                    node["level"] = f.levels.at(static_cast<std::size_t>(n.threshold));
                } else {
                    node["threshold"] = n.threshold;
                }
                nodes.push_back(std::move(node));
            }
            trees.push_back({{"nodes", std::move(nodes)}});
        }
        return {{"features", schema_to_json(schema_)}, {"trees", std::move(trees)}};
    }

    static Forest from_json(const nlohmann::json& doc) {
        try {
            auto schema = parse_schema(doc.at("features"));
            std::vector<PartitionTree> trees;
            for (const auto& t : doc.at("trees")) {
                PartitionTree tree;
                const auto& nodes = t.at("nodes");
                for (const auto& n : nodes) {
                    TreeNode node;
                    if (n.contains("value")) {
                        node.pool = {n["value"].get<double>()};
                    } else {
                        const std::size_t f = schema.index_of(n.at("feature").get<std::string>());
                        node.split_feature = f;
                        node.left = n.at("left").get<std::size_t>();
                        node.right = n.at("right").get<std::size_t>();
                        if (node.left >= nodes.size() || node.right >= nodes.size()) {
                            throw ParseError("forest: child index out of bounds");
                        }
                        if (n.contains("level")) {
                            node.categorical_split = true;
                            node.threshold = static_cast<double>(schema[f].level_index(n["level"].get<std::string>()));
                        } else {
                            node.threshold = n.at("threshold").get<double>();
                        }
                    }
                    tree.nodes.push_back(std::move(node));
                }
                if (tree.nodes.empty()) throw ParseError("forest: empty tree");
                trees.push_back(std::move(tree));
            }
            return Forest(std::move(schema), std::move(trees));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("forest: ") + e.what());
        }
    }

private:
    FeatureSchema schema_;
    std::vector<PartitionTree> trees_;
};

} // namespace moc

#endif
