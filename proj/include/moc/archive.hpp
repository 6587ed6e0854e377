#ifndef MOC_ARCHIVE_HPP
#define MOC_ARCHIVE_HPP

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moc/csv.hpp"
#include "moc/feature_space.hpp"
#include "moc/metrics.hpp"
#include "moc/objectives.hpp"

namespace moc {

struct ArchiveEntry {
    DataPoint point;  // effective point
    double prediction = 0.0;
    ObjectiveVector objectives;
    std::size_t generation = 0;
};

// Append-only record of every evaluated candidate together with the
// dominated hypervolume of the whole archive after each generation.
class ParetoArchive {
public:
    ParetoArchive() = default;
    explicit ParetoArchive(ReferencePoint ref) : ref_(ref) {}

    const ReferencePoint& reference() const { return ref_; }
    const std::vector<ArchiveEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const ArchiveEntry& operator[](std::size_t i) const { return entries_[i]; }

    // Per-generation HV trace; hv_trace()[g] covers generations 0..g.
    const std::vector<double>& hv_trace() const { return hv_trace_; }

    void add_generation(std::vector<ArchiveEntry> batch) {
        for (auto& e : batch) {
            entries_.push_back(std::move(e));
            update_front(entries_.size() - 1);
        }
        std::vector<ObjectiveVector> pts;
        pts.reserve(front_.size());
        for (auto i : front_) pts.push_back(entries_[i].objectives);
        hv_trace_.push_back(hypervolume(pts, ref_));
    }

    double current_hv() const { return hv_trace_.empty() ? 0.0 : hv_trace_.back(); }

    // Archive members not dominated by any other member, keeping the first
    // occurrence of each distinct effective point.
    std::vector<std::size_t> nondominated() const {
        std::vector<ObjectiveVector> objs;
        objs.reserve(entries_.size());
        for (const auto& e : entries_) objs.push_back(e.objectives);
        std::vector<std::size_t> out;
        for (auto i : nondominated_indices(objs)) {
            const bool dup = std::any_of(out.begin(), out.end(),
                                         [&](std::size_t k) { return entries_[k].point == entries_[i].point; });
            if (!dup) out.push_back(i);
        }
        return out;
    }

private:
    // Keeps front_ as the distinct nondominated objective vectors strictly
    // inside the reference box; only those carry volume.
    void update_front(std::size_t idx) {
        const auto& o = entries_[idx].objectives;
        for (std::size_t m = 0; m < 4; ++m) {
            if (!(o[m] < ref_[m])) return;
        }
        for (auto i : front_) {
            const auto& f = entries_[i].objectives;
            if (f == o || dominates(f, o)) return;
        }
        std::erase_if(front_, [&](std::size_t i) { return dominates(o, entries_[i].objectives); });
        front_.push_back(idx);
    }

    ReferencePoint ref_;
    std::vector<ArchiveEntry> entries_;
    std::vector<std::size_t> front_;
    std::vector<double> hv_trace_;
};

inline void write_archive_csv(std::ostream& out, const ParetoArchive& archive, const FeatureSchema& schema) {
    std::vector<std::string> header{"generation"};
    for (const auto& f : schema) header.push_back(f.name);
    for (const char* c : {"prediction", "o1", "o2", "o3", "o4"}) header.emplace_back(c);
    out << csv::join(header) << '\n';
    for (const auto& e : archive.entries()) {
        std::vector<std::string> row{std::to_string(e.generation)};
        for (std::size_t j = 0; j < schema.size(); ++j) row.push_back(schema.format_value(j, e.point[j]));
        row.push_back(csv::format_number(e.prediction));
        for (std::size_t m = 0; m < 4; ++m) row.push_back(csv::format_number(e.objectives[m]));
        out << csv::join(row) << '\n';
    }
}

inline void write_hv_csv(std::ostream& out, const std::vector<double>& trace) {
    out << "generation,hv\n";
    for (std::size_t g = 0; g < trace.size(); ++g) {
        out << g << ',' << csv::format_number(trace[g]) << '\n';
    }
}

inline nlohmann::json objectives_to_json(const ObjectiveVector& o) {
    return nlohmann::json::array({o[0], o[1], o[2], o[3]});
}

inline nlohmann::json entry_to_json(const ArchiveEntry& e, const FeatureSchema& schema, std::size_t index) {
    return nlohmann::json{{"index", index},
                          {"generation", e.generation},
                          {"features", schema.point_to_json(e.point)},
                          {"prediction", e.prediction},
                          {"objectives", objectives_to_json(e.objectives)}};
}

inline nlohmann::json archive_to_json(const ParetoArchive& archive, const FeatureSchema& schema,
                                      nlohmann::json metadata) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < archive.size(); ++i) entries.push_back(entry_to_json(archive[i], schema, i));
    const auto& r = archive.reference();
    return nlohmann::json{{"metadata", std::move(metadata)},
                          {"reference_point", {r[0], r[1], r[2], r[3]}},
                          {"hv_trace", archive.hv_trace()},
                          {"entries", std::move(entries)}};
}

} // namespace moc

#endif
