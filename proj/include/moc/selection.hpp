#ifndef MOC_SELECTION_HPP
#define MOC_SELECTION_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "moc/feature_space.hpp"
#include "moc/metrics.hpp"
#include "moc/objectives.hpp"
#include "moc/random.hpp"

namespace moc {

using Fronts = std::vector<std::vector<std::size_t>>;

// Fast nondominated sort. Indices inside each front are ascending.
inline Fronts nondominated_sort(std::span<const ObjectiveVector> objectives) {
    const std::size_t n = objectives.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> domination_count(n, 0);
    Fronts fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(objectives[i], objectives[j])) {
                dominated_by_me[i].push_back(j);
                ++domination_count[j];
            } else if (dominates(objectives[j], objectives[i])) {
                dominated_by_me[j].push_back(i);
                ++domination_count[i];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (domination_count[i] == 0) current.push_back(i);
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto i : current) {
            for (auto j : dominated_by_me[i]) {
                if (--domination_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

// Moves every candidate with o1 > epsilon out of its front into trailing
// singleton fronts ordered by ascending violation (ties: lower index).
// Fronts left empty are dropped.
inline Fronts penalize_violators(const Fronts& fronts, std::span<const ObjectiveVector> objectives,
                                 double epsilon) {
    Fronts out;
    std::vector<std::size_t> violators;
    for (const auto& front : fronts) {
        std::vector<std::size_t> kept;
        for (auto i : front) {
            (objectives[i].o1() > epsilon ? violators : kept).push_back(i);
        }
        if (!kept.empty()) out.push_back(std::move(kept));
    }
    std::stable_sort(violators.begin(), violators.end(), [&](std::size_t a, std::size_t b) {
        const double va = objectives[a].o1() - epsilon;
        const double vb = objectives[b].o1() - epsilon;
        return va < vb || (va == vb && a < b);
    });
    for (auto i : violators) out.push_back({i});
    return out;
}

namespace detail {

// Adds the normalized neighbour gap of each interior member along one
// coordinate; the extremes become infinite. A coordinate that is constant
// over the front adds nothing.
template <typename Value, typename Gap>
void add_crowding_axis(std::size_t n, Value value, Gap gap, std::vector<double>& dist) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    const double span = gap(order.front(), order.back());
    if (!(span > 0.0)) return;
    constexpr double inf = std::numeric_limits<double>::infinity();
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        dist[order[k]] += gap(order[k - 1], order[k + 1]) / span;
    }
}

} // namespace detail

// Crowding distance of each front member: the usual objective-space sum
// plus the same construction per feature in decision space, where numeric
// gaps are range-normalized and categorical gaps are inequality
// indicators. Both parts carry weight one.
inline std::vector<double> crowding_distance_mixed(std::span<const ObjectiveVector> objectives,
                                                   std::span<const DataPoint> points, const FeatureSchema& schema) {
    const std::size_t n = objectives.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (n <= 2) return std::vector<double>(n, inf);

    std::vector<double> obj(n, 0.0);
    for (std::size_t m = 0; m < 4; ++m) {
        detail::add_crowding_axis(
            n, [&](std::size_t i) { return objectives[i][m]; },
            [&](std::size_t a, std::size_t b) { return std::abs(objectives[b][m] - objectives[a][m]); }, obj);
    }
    std::vector<double> feat(n, 0.0);
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].is_categorical()) {
            detail::add_crowding_axis(
                n, [&](std::size_t i) { return points[i][j]; },
                [&](std::size_t a, std::size_t b) { return points[a][j] == points[b][j] ? 0.0 : 1.0; }, feat);
        } else {
            detail::add_crowding_axis(
                n, [&](std::size_t i) { return points[i][j]; },
                [&](std::size_t a, std::size_t b) { return std::abs(points[b][j] - points[a][j]); }, feat);
        }
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = obj[i] + feat[i];
    return out;
}

// Front rank and mixed crowding distance of every member of a pool.
struct PoolRanking {
    Fronts fronts;
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

inline PoolRanking rank_pool(std::span<const ObjectiveVector> objectives, std::span<const DataPoint> points,
                             const FeatureSchema& schema, std::optional<double> epsilon) {
    PoolRanking r;
    r.fronts = nondominated_sort(objectives);
    if (epsilon) r.fronts = penalize_violators(r.fronts, objectives, *epsilon);
    r.rank.assign(objectives.size(), 0);
    r.crowding.assign(objectives.size(), 0.0);
    for (std::size_t f = 0; f < r.fronts.size(); ++f) {
        const auto& front = r.fronts[f];
        std::vector<ObjectiveVector> objs;
        std::vector<DataPoint> pts;
        for (auto i : front) {
            objs.push_back(objectives[i]);
            pts.push_back(points[i]);
        }
        const auto cd = crowding_distance_mixed(objs, pts, schema);
        for (std::size_t k = 0; k < front.size(); ++k) {
            r.rank[front[k]] = f;
            r.crowding[front[k]] = cd[k];
        }
    }
    return r;
}

// Environmental selection: whole fronts in order, then the members of the
// splitting front with the largest mixed crowding distance (ties: lower
// index). Returns pool indices in the order they were admitted.
inline std::vector<std::size_t> select_survivors(std::span<const ObjectiveVector> objectives,
                                                 std::span<const DataPoint> points, std::size_t mu,
                                                 const FeatureSchema& schema, std::optional<double> epsilon) {
    if (objectives.size() < mu) {
        throw ConfigInvalid("survivor pool smaller than mu");
    }
    const auto ranking = rank_pool(objectives, points, schema, epsilon);
    std::vector<std::size_t> survivors;
    for (const auto& front : ranking.fronts) {
        if (survivors.size() + front.size() <= mu) {
            survivors.insert(survivors.end(), front.begin(), front.end());
            continue;
        }
        std::vector<std::size_t> order = front;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ranking.crowding[a] > ranking.crowding[b];
        });
        order.resize(mu - survivors.size());
        survivors.insert(survivors.end(), order.begin(), order.end());
        break;
    }
    return survivors;
}

// Binary tournaments on (rank, crowding): lower rank wins, then larger
// crowding, then the lower index. Two draws per tournament.
inline std::vector<std::size_t> tournament_select(const PoolRanking& ranking, std::size_t count, Rng& rng) {
    const std::size_t n = ranking.rank.size();
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        const std::size_t a = uniform_index(rng, n);
        std::size_t b = uniform_index(rng, n - 1);
        if (b >= a) ++b;
        std::size_t winner;
        if (ranking.rank[a] != ranking.rank[b]) {
            winner = ranking.rank[a] < ranking.rank[b] ? a : b;
        } else if (ranking.crowding[a] != ranking.crowding[b]) {
            winner = ranking.crowding[a] > ranking.crowding[b] ? a : b;
        } else {
            winner = std::min(a, b);
        }
        chosen.push_back(winner);
    }
    return chosen;
}

} // namespace moc

#endif
