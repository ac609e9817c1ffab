#pragma once

// Pareto dominance, fast non-dominated sorting and crowding distance for
// minimization problems. Objective vectors are any random-access range of
// doubles (std::array<double, M>, std::vector<double>, ...).

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <ranges>
#include <span>
#include <stdexcept>
#include <vector>

namespace divland::nsga2 {

template <typename V>
concept ObjectiveVector = std::ranges::random_access_range<V> && std::ranges::sized_range<V> &&
                          std::convertible_to<std::ranges::range_value_t<V>, double>;

/// True iff a is no worse than b everywhere and strictly better somewhere.
template <ObjectiveVector A, ObjectiveVector B>
bool dominates(const A& a, const B& b)
{
    const auto m = std::ranges::size(a);
    if (m != std::ranges::size(b)) {
        throw std::domain_error("objective vectors differ in dimension");
    }
    bool strictly = false;
    for (std::size_t k = 0; k < m; ++k) {
        if (a[k] > b[k]) {
            return false;
        }
        if (a[k] < b[k]) {
            strictly = true;
        }
    }
    return strictly;
}

using Fronts = std::vector<std::vector<std::size_t>>;

/// Deb's fast non-dominated sort. Front 0 is the non-dominated set; indices
/// inside each front are ascending.
template <ObjectiveVector V>
Fronts non_dominated_sort(std::span<const V> points)
{
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> domination_count(n, 0);
    Fronts fronts;
    if (n == 0) {
        return fronts;
    }

    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(points[p], points[q])) {
                dominated_by_me[p].push_back(q);
                ++domination_count[q];
            } else if (dominates(points[q], points[p])) {
                dominated_by_me[q].push_back(p);
                ++domination_count[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (domination_count[p] == 0) {
            current.push_back(p);
        }
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto p : current) {
            for (auto q : dominated_by_me[p]) {
                if (--domination_count[q] == 0) {
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

template <ObjectiveVector V>
Fronts non_dominated_sort(const std::vector<V>& points)
{
    return non_dominated_sort(std::span<const V>{points});
}

/// Front index per point.
inline std::vector<std::size_t> ranks_from_fronts(const Fronts& fronts, std::size_t n)
{
    std::vector<std::size_t> rank(n, 0);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        for (auto i : fronts[f]) {
            rank[i] = f;
        }
    }
    return rank;
}

/// Crowding distance within one front. Identical objective vectors share the
/// distance of their common point, so duplicates never split a gap unevenly.
/// Objectives with zero range contribute nothing, including no boundary
/// infinity; a front with at most two distinct points is all infinite.
template <ObjectiveVector V>
std::vector<double> crowding_distance(std::span<const V> front)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = front.size();
    if (n == 0) {
        throw std::domain_error("crowding distance of an empty front");
    }

    // collapse duplicates
    using Key = std::vector<double>;
    std::map<Key, std::size_t> unique_index;
    std::vector<Key> unique;
    std::vector<std::size_t> owner(n);
    for (std::size_t i = 0; i < n; ++i) {
        Key key(std::ranges::begin(front[i]), std::ranges::end(front[i]));
        auto [it, inserted] = unique_index.try_emplace(key, unique.size());
        if (inserted) {
            unique.push_back(std::move(key));
        }
        owner[i] = it->second;
    }

    const std::size_t u = unique.size();
    std::vector<double> dist(u, 0.0);
    if (u <= 2) {
        std::fill(dist.begin(), dist.end(), inf);
    } else {
        const std::size_t m = unique.front().size();
        std::vector<std::size_t> order(u);
        for (std::size_t k = 0; k < m; ++k) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return unique[a][k] < unique[b][k]; });
            const double lo = unique[order.front()][k];
            const double hi = unique[order.back()][k];
            const double range = hi - lo;
            if (!(range > 0.0)) {
                continue;
            }
            dist[order.front()] = inf;
            dist[order.back()] = inf;
            for (std::size_t r = 1; r + 1 < u; ++r) {
                dist[order[r]] += (unique[order[r + 1]][k] - unique[order[r - 1]][k]) / range;
            }
        }
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = dist[owner[i]];
    }
    return out;
}

template <ObjectiveVector V>
std::vector<double> crowding_distance(const std::vector<V>& front)
{
    return crowding_distance(std::span<const V>{front});
}

struct Ranking {
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

/// Rank and crowding distance (computed within each front) for every point.
template <ObjectiveVector V>
Ranking rank_and_crowd(std::span<const V> points)
{
    const auto fronts = non_dominated_sort(points);
    Ranking r{ranks_from_fronts(fronts, points.size()), std::vector<double>(points.size(), 0.0)};
    for (const auto& front : fronts) {
        std::vector<V> members;
        members.reserve(front.size());
        for (auto i : front) {
            members.push_back(points[i]);
        }
        const auto d = crowding_distance(std::span<const V>{members});
        for (std::size_t k = 0; k < front.size(); ++k) {
            r.crowding[front[k]] = d[k];
        }
    }
    return r;
}

/// NSGA-II truncation: indices of the `keep` best points ordered by
/// (rank ascending, crowding descending, index ascending).
template <ObjectiveVector V>
std::vector<std::size_t> select_survivors(std::span<const V> points, std::size_t keep, Ranking* ranking = nullptr)
{
    Ranking r = rank_and_crowd(points);
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (r.rank[a] != r.rank[b]) {
            return r.rank[a] < r.rank[b];
        }
        return r.crowding[a] > r.crowding[b];
    });
    order.resize(std::min(keep, order.size()));
    if (ranking != nullptr) {
        *ranking = std::move(r);
    }
    return order;
}

} // namespace divland::nsga2
