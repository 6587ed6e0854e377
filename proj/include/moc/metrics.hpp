#ifndef MOC_METRICS_HPP
#define MOC_METRICS_HPP

#include <algorithm>
#include <array>
#include <iterator>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "moc/error.hpp"
#include "moc/objectives.hpp"

namespace moc {

// a <= b everywhere and a < b somewhere.
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    bool strictly = false;
    for (std::size_t i = 0; i < 4; ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

// Indices of points not dominated by any other point. Equal vectors do not
// dominate each other, so duplicates are all kept.
inline std::vector<std::size_t> nondominated_indices(std::span<const ObjectiveVector> points) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
            dominated = j != i && dominates(points[j], points[i]);
        }
        if (!dominated) out.push_back(i);
    }
    return out;
}

namespace detail {

// Area dominated by a 2-D point set (minimization) inside the box bounded
// by (rx, ry). Keys are x, values y; the stored points form a staircase
// with y strictly decreasing in x. The area is summed afresh from positive
// rectangles so it never drifts through cancellation.
class Staircase {
public:
    Staircase(double rx, double ry) : rx_(rx), ry_(ry) {}

    double area() const {
        double a = 0.0;
        for (auto it = pts_.begin(); it != pts_.end(); ++it) {
            const auto next = std::next(it);
            a += ((next == pts_.end() ? rx_ : next->first) - it->first) * (ry_ - it->second);
        }
        return a;
    }

    void insert(double x, double y) {
        if (x >= rx_ || y >= ry_) return;
        auto it = pts_.upper_bound(x);
        if (it != pts_.begin() && std::prev(it)->second <= y) return;  // dominated or duplicate
        it = pts_.lower_bound(x);
        while (it != pts_.end() && it->second >= y) it = pts_.erase(it);
        pts_.emplace_hint(it, x, y);
    }

private:
    double rx_;
    double ry_;
    std::map<double, double> pts_;
};

using Point3 = std::array<double, 3>;

// Sweep along the third coordinate, adding slabs of the 2-D staircase.
inline double hypervolume_3d(std::vector<Point3> pts, const Point3& ref) {
    std::stable_sort(pts.begin(), pts.end(), [](const Point3& a, const Point3& b) { return a[2] < b[2]; });
    Staircase stair(ref[0], ref[1]);
    double volume = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) volume += stair.area() * (pts[i][2] - pts[i - 1][2]);
        stair.insert(pts[i][0], pts[i][1]);
    }
    if (!pts.empty()) volume += stair.area() * (ref[2] - pts.back()[2]);
    return volume;
}

} // namespace detail

// Volume of objective space dominated by `points` and bounded by `ref`.
// Points not strictly inside the reference box add nothing. Only the
// distinct nondominated points, in a canonical order, enter the
// arithmetic, so the result is a function of the front alone. Sweeps over the objective with the fewest distinct values (o3,
// an integer count, in practice) and computes 3-D slices exactly.
inline double hypervolume(std::span<const ObjectiveVector> points, const ReferencePoint& ref) {
    std::vector<ObjectiveVector> pts;
    pts.reserve(points.size());
    for (const auto& p : points) {
        bool inside = true;
        for (std::size_t i = 0; i < 4; ++i) inside = inside && p[i] < ref[i];
        if (inside) pts.push_back(p);
    }
    if (pts.empty()) return 0.0;
    std::sort(pts.begin(), pts.end(), [](const ObjectiveVector& a, const ObjectiveVector& b) {
        return std::lexicographical_compare(a.values.begin(), a.values.end(), b.values.begin(), b.values.end());
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    {
        std::vector<ObjectiveVector> front;
        for (auto i : nondominated_indices(pts)) front.push_back(pts[i]);
        pts = std::move(front);
    }

    std::size_t sweep = 0;
    std::size_t fewest = pts.size() + 1;
    for (std::size_t d = 0; d < 4; ++d) {
        std::vector<double> vals;
        for (const auto& p : pts) vals.push_back(p[d]);
        std::sort(vals.begin(), vals.end());
        const auto distinct = static_cast<std::size_t>(std::unique(vals.begin(), vals.end()) - vals.begin());
        if (distinct < fewest) {
            fewest = distinct;
            sweep = d;
        }
    }
    std::array<std::size_t, 3> rest{};
    for (std::size_t d = 0, k = 0; d < 4; ++d) {
        if (d != sweep) rest[k++] = d;
    }
    std::stable_sort(pts.begin(), pts.end(),
                     [sweep](const ObjectiveVector& a, const ObjectiveVector& b) { return a[sweep] < b[sweep]; });
    const detail::Point3 ref3{ref[rest[0]], ref[rest[1]], ref[rest[2]]};

    double volume = 0.0;
    std::vector<detail::Point3> slice;
    std::size_t i = 0;
    while (i < pts.size()) {
        const double level = pts[i][sweep];
        while (i < pts.size() && pts[i][sweep] == level) {
            slice.push_back({pts[i][rest[0]], pts[i][rest[1]], pts[i][rest[2]]});
            ++i;
        }
        const double next = i < pts.size() ? pts[i][sweep] : ref[sweep];
        volume += (next - level) * detail::hypervolume_3d(slice, ref3);
    }
    return volume;
}

// Share of `theirs` dominated by at least one member of `ours`.
inline double coverage_rate(std::span<const ObjectiveVector> ours, std::span<const ObjectiveVector> theirs) {
    if (theirs.empty()) {
        throw EmptyComparisonSet("coverage rate needs a nonempty comparison set");
    }
    std::size_t covered = 0;
    for (const auto& t : theirs) {
        if (std::any_of(ours.begin(), ours.end(), [&](const ObjectiveVector& o) { return dominates(o, t); })) {
            ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(theirs.size());
}

// Greedy reduction of a counterfactual set to at most `limit` members.
// Target-attaining points are exhausted first; within a pool the point
// with the largest marginal hypervolume gain wins, ties to the lower index.
// Returns indices into `points` in selection order.
inline std::vector<std::size_t> truncate_counterfactuals(std::span<const ObjectiveVector> points,
                                                         std::span<const double> predictions,
                                                         const DesiredOutcome& target, std::size_t limit,
                                                         const ReferencePoint& ref) {
    if (limit < 1) {
        throw ConfigInvalid("limit must be at least 1");
    }
    std::vector<std::size_t> all(points.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (points.size() <= limit) return all;

    std::vector<std::size_t> attaining;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < points.size(); ++i) {
        (target.contains(predictions[i]) ? attaining : others).push_back(i);
    }

    std::vector<std::size_t> chosen;
    std::vector<ObjectiveVector> chosen_pts;
    double current = 0.0;
    for (auto* pool : {&attaining, &others}) {
        while (chosen.size() < limit && !pool->empty()) {
            std::size_t best_pos = 0;
            double best_gain = -1.0;
            double best_total = current;
            for (std::size_t pos = 0; pos < pool->size(); ++pos) {
                chosen_pts.push_back(points[(*pool)[pos]]);
                const double total = hypervolume(chosen_pts, ref);
                chosen_pts.pop_back();
                const double gain = total - current;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_pos = pos;
                    best_total = total;
                }
            }
            const std::size_t idx = (*pool)[best_pos];
            pool->erase(pool->begin() + static_cast<std::ptrdiff_t>(best_pos));
            chosen.push_back(idx);
            chosen_pts.push_back(points[idx]);
            current = best_total;
        }
    }
    return chosen;
}

// Ranks with ties averaged; the largest value gets rank n.
inline std::vector<double> mid_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace moc

#endif
