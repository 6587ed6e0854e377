#ifndef MOC_FEATURE_SPACE_HPP
#define MOC_FEATURE_SPACE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "moc/csv.hpp"
#include "moc/error.hpp"

namespace moc {

enum class FeatureKind { numerical, integer, categorical, binary };

inline std::string_view to_string(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::numerical: return "numerical";
    case FeatureKind::integer: return "integer";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::binary: return "binary";
    }
    return "?";
}

inline FeatureKind parse_feature_kind(std::string_view s) {
    if (s == "numerical" || s == "numeric") return FeatureKind::numerical;
    if (s == "integer") return FeatureKind::integer;
    if (s == "categorical") return FeatureKind::categorical;
    if (s == "binary") return FeatureKind::binary;
    throw ParseError("unknown feature kind '" + std::string(s) + "'");
}

struct Bounds {
    double lower = 0.0;
    double upper = 0.0;

    double width() const { return upper - lower; }
    bool contains(double v) const { return v >= lower && v <= upper; }
    friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::numerical;
    Bounds range;                     // numerical / integer only
    std::vector<std::string> levels;  // categorical / binary only
    bool actionable = true;
    std::optional<Bounds> user_bounds;

    bool is_numeric() const {
        return kind == FeatureKind::numerical || kind == FeatureKind::integer;
    }
    bool is_categorical() const { return !is_numeric(); }

    // Bounds used when capping values: the user's tighter range if set,
    // otherwise the declared range.
    Bounds capping_bounds() const { return user_bounds ? *user_bounds : range; }

    std::size_t level_index(std::string_view label) const {
        auto it = std::find(levels.begin(), levels.end(), label);
        if (it == levels.end()) {
            throw SchemaMismatch("feature '" + name + "': unknown level '" + std::string(label) + "'");
        }
        return static_cast<std::size_t>(it - levels.begin());
    }

    void validate() const {
        if (name.empty()) {
            throw SchemaMismatch("feature with empty name");
        }
        if (is_numeric()) {
            if (!levels.empty()) {
                throw SchemaMismatch("feature '" + name + "': numeric feature declares levels");
            }
            if (!(range.lower <= range.upper) || !std::isfinite(range.lower) || !std::isfinite(range.upper)) {
                throw SchemaMismatch("feature '" + name + "': invalid range");
            }
            if (user_bounds) {
                if (!(user_bounds->lower <= user_bounds->upper) || user_bounds->lower < range.lower ||
                    user_bounds->upper > range.upper) {
                    throw SchemaMismatch("feature '" + name + "': user_bounds outside range");
                }
            }
        } else {
            if (levels.size() < 2) {
                throw SchemaMismatch("feature '" + name + "': needs at least two levels");
            }
            if (kind == FeatureKind::binary && levels.size() != 2) {
                throw SchemaMismatch("feature '" + name + "': binary feature needs exactly two levels");
            }
            std::unordered_set<std::string> seen(levels.begin(), levels.end());
            if (seen.size() != levels.size()) {
                throw SchemaMismatch("feature '" + name + "': duplicate levels");
            }
            if (user_bounds) {
                throw SchemaMismatch("feature '" + name + "': user_bounds on a categorical feature");
            }
        }
    }
};

// One mixed-type feature vector. Categorical and binary values are stored
// as the index of their level in the descriptor.
struct DataPoint {
    std::vector<double> values;

    DataPoint() = default;
    explicit DataPoint(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t j) { return values[j]; }
    double operator[](std::size_t j) const { return values[j]; }
    auto begin() const { return values.begin(); }
    auto end() const { return values.end(); }
    friend bool operator==(const DataPoint&, const DataPoint&) = default;
};

class FeatureSchema {
public:
    FeatureSchema() = default;

    explicit FeatureSchema(std::vector<FeatureDescriptor> features) : features_(std::move(features)) {
        if (features_.empty()) {
            throw SchemaMismatch("schema declares no features");
        }
        std::unordered_set<std::string> names;
        for (const auto& f : features_) {
            f.validate();
            if (!names.insert(f.name).second) {
                throw SchemaMismatch("duplicate feature name '" + f.name + "'");
            }
        }
    }

    std::size_t size() const { return features_.size(); }
    const FeatureDescriptor& operator[](std::size_t j) const { return features_[j]; }
    const std::vector<FeatureDescriptor>& features() const { return features_; }
    auto begin() const { return features_.begin(); }
    auto end() const { return features_.end(); }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t j = 0; j < features_.size(); ++j) {
            if (features_[j].name == name) return j;
        }
        return std::nullopt;
    }

    std::size_t index_of(std::string_view name) const {
        if (auto j = find(name)) return *j;
        throw SchemaMismatch("unknown feature '" + std::string(name) + "'");
    }

    // Copy with the named features marked non-actionable.
    FeatureSchema with_frozen(const std::vector<std::string>& names) const {
        FeatureSchema out = *this;
        for (const auto& n : names) {
            out.features_[index_of(n)].actionable = false;
        }
        return out;
    }

    // Copy with tighter capping bounds on one numeric feature.
    FeatureSchema with_user_bounds(std::string_view name, Bounds bounds) const {
        FeatureSchema out = *this;
        auto& f = out.features_[index_of(name)];
        f.user_bounds = bounds;
        f.validate();
        return out;
    }

    void validate(const DataPoint& x) const {
        if (x.size() != size()) {
            throw SchemaMismatch("point has " + std::to_string(x.size()) + " values, schema has " +
                                 std::to_string(size()));
        }
        for (std::size_t j = 0; j < size(); ++j) {
            const auto& f = features_[j];
            const double v = x[j];
            if (!std::isfinite(v)) {
                throw MissingValue("feature '" + f.name + "': non-finite value");
            }
            if (f.is_categorical()) {
                if (v != std::floor(v) || v < 0 || v >= static_cast<double>(f.levels.size())) {
                    throw SchemaMismatch("feature '" + f.name + "': invalid level index");
                }
            } else {
                if (f.kind == FeatureKind::integer && v != std::floor(v)) {
                    throw SchemaMismatch("feature '" + f.name + "': non-integral value");
                }
                if (!f.range.contains(v)) {
                    throw SchemaMismatch("feature '" + f.name + "': value " + csv::format_number(v) +
                                         " outside declared range");
                }
            }
        }
    }

    double parse_value(std::size_t j, std::string_view cell) const {
        const auto& f = features_[j];
        std::string_view trimmed = cell;
        while (!trimmed.empty() && trimmed.front() == ' ') trimmed.remove_prefix(1);
        while (!trimmed.empty() && trimmed.back() == ' ') trimmed.remove_suffix(1);
        if (trimmed.empty() || trimmed == "NA") {
            throw MissingValue("feature '" + f.name + "': missing value");
        }
        if (f.is_categorical()) {
            return static_cast<double>(f.level_index(trimmed));
        }
        auto v = csv::parse_number(trimmed);
        if (!v) {
            throw ParseError("feature '" + f.name + "': cannot parse '" + std::string(trimmed) + "'");
        }
        return *v;
    }

    std::string format_value(std::size_t j, double v) const {
        const auto& f = features_[j];
        if (f.is_categorical()) {
            return f.levels.at(static_cast<std::size_t>(v));
        }
        return csv::format_number(v);
    }

    nlohmann::json value_to_json(std::size_t j, double v) const {
        if (features_[j].is_categorical()) {
            return features_[j].levels.at(static_cast<std::size_t>(v));
        }
        return v;
    }

    double value_from_json(std::size_t j, const nlohmann::json& v) const {
        if (v.is_string()) {
            return parse_value(j, v.get<std::string>());
        }
        if (v.is_number() && features_[j].is_numeric()) {
            return v.get<double>();
        }
        throw ParseError("feature '" + features_[j].name + "': bad JSON value");
    }

    // {name: value} object for a point.
    nlohmann::json point_to_json(const DataPoint& x) const {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t j = 0; j < size(); ++j) {
            obj[features_[j].name] = value_to_json(j, x[j]);
        }
        return obj;
    }

    DataPoint point_from_json(const nlohmann::json& obj) const {
        if (!obj.is_object()) {
            throw ParseError("point must be a JSON object");
        }
        DataPoint x{std::vector<double>(size())};
        for (std::size_t j = 0; j < size(); ++j) {
            auto it = obj.find(features_[j].name);
            if (it == obj.end()) {
                throw MissingValue("point lacks feature '" + features_[j].name + "'");
            }
            x[j] = value_from_json(j, *it);
        }
        validate(x);
        return x;
    }

private:
    std::vector<FeatureDescriptor> features_;
};

inline Bounds parse_bounds(const nlohmann::json& j, std::string_view what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ParseError(std::string(what) + " must be [lower, upper]");
    }
    return Bounds{j[0].get<double>(), j[1].get<double>()};
}

inline FeatureSchema parse_schema(const nlohmann::json& doc) {
    const nlohmann::json& arr = doc.is_object() && doc.contains("features") ? doc["features"] : doc;
    if (!arr.is_array()) {
        throw ParseError("schema must be an array of feature descriptors");
    }
    std::vector<FeatureDescriptor> features;
    for (const auto& item : arr) {
        if (!item.is_object() || !item.contains("name") || !item.contains("kind")) {
            throw ParseError("feature descriptor needs 'name' and 'kind'");
        }
        FeatureDescriptor f;
        f.name = item["name"].get<std::string>();
        f.kind = parse_feature_kind(item["kind"].get<std::string>());
        if (f.is_numeric()) {
            if (!item.contains("range")) {
                throw ParseError("feature '" + f.name + "': numeric feature needs 'range'");
            }
            f.range = parse_bounds(item["range"], "range");
            if (item.contains("levels")) {
                throw SchemaMismatch("feature '" + f.name + "': numeric feature declares levels");
            }
        } else {
            if (!item.contains("levels") || !item["levels"].is_array()) {
                throw ParseError("feature '" + f.name + "': categorical feature needs 'levels'");
            }
            for (const auto& l : item["levels"]) {
                f.levels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
            }
            if (item.contains("range")) {
                throw SchemaMismatch("feature '" + f.name + "': categorical feature declares a range");
            }
        }
        f.actionable = item.value("actionable", true);
        if (item.contains("user_bounds") && !item["user_bounds"].is_null()) {
            f.user_bounds = parse_bounds(item["user_bounds"], "user_bounds");
        }
        features.push_back(std::move(f));
    }
    return FeatureSchema(std::move(features));
}

inline nlohmann::json schema_to_json(const FeatureSchema& schema) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : schema) {
        nlohmann::json item{{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
        if (f.is_numeric()) {
            item["range"] = {f.range.lower, f.range.upper};
        } else {
            item["levels"] = f.levels;
        }
        item["actionable"] = f.actionable;
        if (f.user_bounds) {
            item["user_bounds"] = {f.user_bounds->lower, f.user_bounds->upper};
        }
        arr.push_back(std::move(item));
    }
    return arr;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

inline FeatureSchema load_schema(const std::string& path) {
    return parse_schema(read_json_file(path));
}

// Observed (training) data with the per-feature ranges extracted from it.
class ObservedDataset {
public:
    ObservedDataset(FeatureSchema schema, std::vector<DataPoint> rows)
        : schema_(std::move(schema)), rows_(std::move(rows)) {
        for (const auto& r : rows_) {
            schema_.validate(r);
        }
        derived_ranges_.resize(schema_.size());
        widths_.assign(schema_.size(), 1.0);
        for (std::size_t j = 0; j < schema_.size(); ++j) {
            const auto& f = schema_[j];
            if (f.is_categorical()) {
                derived_ranges_[j] = Bounds{0.0, static_cast<double>(f.levels.size() - 1)};
                continue;
            }
            if (rows_.empty()) {
                derived_ranges_[j] = f.range;
            } else {
                auto [lo, hi] = std::minmax_element(rows_.begin(), rows_.end(),
                    [j](const DataPoint& a, const DataPoint& b) { return a[j] < b[j]; });
                derived_ranges_[j] = Bounds{(*lo)[j], (*hi)[j]};
            }
            widths_[j] = derived_ranges_[j].width();
        }
    }

    const FeatureSchema& schema() const { return schema_; }
    const std::vector<DataPoint>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const DataPoint& operator[](std::size_t i) const { return rows_[i]; }

    // Observed [min, max] per feature (level-index span for categoricals).
    const std::vector<Bounds>& derived_ranges() const { return derived_ranges_; }

    // The range widths used to normalize numeric Gower deltas.
    std::span<const double> ranges() const { return widths_; }

    // Same rows under a schema that differs only in actionability or
    // user bounds; the observed ranges are kept.
    ObservedDataset with_schema(FeatureSchema schema) const {
        if (schema.size() != schema_.size()) {
            throw SchemaMismatch("replacement schema has a different feature count");
        }
        ObservedDataset out = *this;
        out.schema_ = std::move(schema);
        return out;
    }

    ObservedDataset without_row(std::size_t i) const {
        std::vector<DataPoint> rest;
        rest.reserve(rows_.size());
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            if (r != i) rest.push_back(rows_[r]);
        }
        return ObservedDataset(schema_, std::move(rest));
    }

private:
    FeatureSchema schema_;
    std::vector<DataPoint> rows_;
    std::vector<Bounds> derived_ranges_;
    std::vector<double> widths_;
};

inline ObservedDataset parse_dataset(std::istream& in, const FeatureSchema& schema) {
    auto records = csv::read_all(in);
    if (records.empty()) {
        throw ParseError("dataset has no header row");
    }
    const auto& header = records.front();
    if (header.size() != schema.size()) {
        throw SchemaMismatch("header has " + std::to_string(header.size()) + " columns, schema has " +
                             std::to_string(schema.size()));
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] != schema[j].name) {
            throw SchemaMismatch("header column " + std::to_string(j) + " is '" + header[j] +
                                 "', schema expects '" + schema[j].name + "'");
        }
    }
    std::vector<DataPoint> rows;
    rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != schema.size()) {
            throw ParseError("row " + std::to_string(r) + " has " + std::to_string(rec.size()) + " cells");
        }
        DataPoint x{std::vector<double>(schema.size())};
        for (std::size_t j = 0; j < schema.size(); ++j) {
            x[j] = schema.parse_value(j, rec[j]);
        }
        rows.push_back(std::move(x));
    }
    return ObservedDataset(schema, std::move(rows));
}

inline ObservedDataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
    auto schema = load_schema(schema_path);
    std::ifstream in(csv_path);
    if (!in) {
        throw ParseError("cannot open '" + csv_path + "'");
    }
    return parse_dataset(in, schema);
}

// Per-feature Gower dissimilarity in [0, 1]. A zero range degrades to the
// inequality indicator.
inline double gower_delta(double xj, double yj, const FeatureDescriptor& descriptor, double range_j) {
    if (descriptor.is_categorical()) {
        return xj == yj ? 0.0 : 1.0;
    }
    if (!(range_j > 0.0)) {
        return xj == yj ? 0.0 : 1.0;
    }
    return std::min(1.0, std::abs(xj - yj) / range_j);
}

inline double gower_distance(const DataPoint& x, const DataPoint& y, const FeatureSchema& schema,
                             std::span<const double> ranges) {
    const std::size_t p = schema.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        sum += gower_delta(x[j], y[j], schema[j], ranges[j]);
    }
    return sum / static_cast<double>(p);
}

// Caps numeric values into their capping bounds and rounds integer
// features half away from zero.
inline DataPoint clamp_to_ranges(DataPoint x, const FeatureSchema& schema) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& f = schema[j];
        if (f.is_categorical()) {
            continue;
        }
        const Bounds b = f.capping_bounds();
        double v = std::clamp(x[j], b.lower, b.upper);
        if (f.kind == FeatureKind::integer) {
            v = std::round(v);
            if (v > b.upper) v = std::floor(b.upper);
            if (v < b.lower) v = std::ceil(b.lower);
        }
        x[j] = v;
    }
    return x;
}

} // namespace moc

#endif
