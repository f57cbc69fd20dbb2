// Retrieval and clustering metrics: Recall@k, k-means + NMI, and the
// per-class unique-center count.
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "softtriple/linalg.hpp"
#include "softtriple/losses.hpp"

namespace softtriple {

struct RetrievalMetrics {
    std::map<std::size_t, double> recall_at;
    double nmi = 0.0;
};

struct ClusterAssignment {
    std::vector<std::size_t> assignment;
    double distortion = 0.0;
};

// For each query, rank all other points by inner product descending (ties by
// ascending index); hit at k iff any of the top-k shares the query's label.
inline std::map<std::size_t, double> recall_at_k(
    const std::vector<UnitEmbedding>& embeddings,
    const std::vector<std::size_t>& labels, const std::vector<std::size_t>& ks) {
    std::size_t n = embeddings.size();
    if (n < 2 || labels.size() != n)
        throw std::invalid_argument("recall_at_k: need N >= 2 matching embeddings/labels");
    std::size_t max_k = 0;
    for (std::size_t k : ks) max_k = std::max(max_k, k);
    if (max_k >= n)
        throw std::invalid_argument("recall_at_k: k must be < N");

    std::map<std::size_t, double> hits;
    for (std::size_t k : ks) hits[k] = 0.0;
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < n; ++i) {
        ranked.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            ranked.emplace_back(dot(embeddings[i].values, embeddings[j].values), j);
        }
        std::partial_sort(ranked.begin(), ranked.begin() + max_k, ranked.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
        bool found = false;
        std::size_t depth = 0;
        for (std::size_t k : ks) {  // std::map iterates ks in ascending order
            while (depth < k && !found) {
                if (labels[ranked[depth].second] == labels[i]) found = true;
                ++depth;
            }
            if (found) hits[k] += 1.0;
        }
    }
    for (auto& [k, v] : hits) v /= static_cast<double>(n);
    return hits;
}

namespace detail {

inline double sq_dist(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded at
// the point farthest from its current center.
inline ClusterAssignment kmeans(const std::vector<Vector>& points, std::size_t k,
                                std::uint64_t seed, std::size_t max_iters = 100) {
    std::size_t n = points.size();
    if (k == 0 || k > n)
        throw std::invalid_argument("kmeans: need 0 < k <= N");
    Rng rng = Rng::split(seed, 11);

    // k-means++ seeding
    std::vector<Vector> centers;
    centers.push_back(points[rng.next_index(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::max());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], detail::sq_dist(points[i], centers.back()));
            total += d2[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double r = rng.uniform(0.0, total);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_index(n);
        }
        centers.push_back(points[pick]);
    }

    ClusterAssignment out;
    out.assignment.assign(n, 0);
    std::size_t dim = points[0].size();
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double d = detail::sq_dist(points[i], centers[c]);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            if (out.assignment[i] != best_c) {
                out.assignment[i] = best_c;
                changed = true;
            }
        }
        std::vector<Vector> sums(k, Vector(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            axpy(1.0, points[i], sums[out.assignment[i]]);
            ++counts[out.assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // farthest point from its assigned center takes over
                double worst = -1.0;
                std::size_t worst_i = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = detail::sq_dist(points[i], centers[out.assignment[i]]);
                    if (d > worst) {
                        worst = d;
                        worst_i = i;
                    }
                }
                centers[c] = points[worst_i];
                changed = true;
            } else {
                for (std::size_t j = 0; j < dim; ++j)
                    centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
            }
        }
        if (!changed && iter > 0) break;
    }
    out.distortion = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.distortion += detail::sq_dist(points[i], centers[out.assignment[i]]);
    return out;
}

inline ClusterAssignment kmeans_best_of(const std::vector<Vector>& points, std::size_t k,
                                        std::uint64_t seed, std::size_t restarts = 10,
                                        std::size_t max_iters = 100) {
    ClusterAssignment best;
    best.distortion = std::numeric_limits<double>::max();
    for (std::size_t r = 0; r < restarts; ++r) {
        ClusterAssignment cur = kmeans(points, k, seed + r, max_iters);
        if (cur.distortion < best.distortion) best = std::move(cur);
    }
    return best;
}

// 2 I(Ω;C) / (H(Ω)+H(C)), natural logs, plug-in counts. Both partitions
// trivial (0/0) is defined as 1.
inline double nmi(const std::vector<std::size_t>& assignment,
                  const std::vector<std::size_t>& labels) {
    std::size_t n = assignment.size();
    if (labels.size() != n || n == 0)
        throw std::invalid_argument("nmi: length mismatch");
    std::map<std::size_t, std::size_t> a_count, b_count;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
    for (std::size_t i = 0; i < n; ++i) {
        ++a_count[assignment[i]];
        ++b_count[labels[i]];
        ++joint[{assignment[i], labels[i]}];
    }
    double nd = static_cast<double>(n);
    double ha = 0.0, hb = 0.0, mi = 0.0;
    for (auto& [k, c] : a_count) {
        double p = c / nd;
        ha -= p * std::log(p);
    }
    for (auto& [k, c] : b_count) {
        double p = c / nd;
        hb -= p * std::log(p);
    }
    for (auto& [kv, c] : joint) {
        double p = c / nd;
        double pa = a_count[kv.first] / nd;
        double pb = b_count[kv.second] / nd;
        mi += p * std::log(p / (pa * pb));
    }
    if (ha + hb == 0.0) return 1.0;
    return 2.0 * mi / (ha + hb);
}

// Per class, single-linkage merge of centers whose embedding distance
// sqrt(2 - 2 w·w') is below eps; returns the component count per class.
inline std::vector<std::size_t> count_unique_centers(const CenterBank& bank, double eps) {
    if (!(eps > 0.0))
        throw std::invalid_argument("count_unique_centers: eps must be > 0");
    std::size_t K = bank.centers_per_class;
    std::vector<std::size_t> counts(bank.num_classes, 0);
    std::vector<std::size_t> parent(K);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t c = 0; c < bank.num_classes; ++c) {
        std::iota(parent.begin(), parent.end(), 0);
        for (std::size_t s = 0; s < K; ++s) {
            auto ws = bank.center(c, s);
            for (std::size_t t = s + 1; t < K; ++t) {
                auto wt = bank.center(c, t);
                double ip = 0.0;
                for (std::size_t i = 0; i < bank.dim; ++i) ip += ws[i] * wt[i];
                double dist = std::sqrt(std::max(2.0 - 2.0 * ip, 0.0));
                if (dist < eps) parent[find(s)] = find(t);
            }
        }
        std::size_t comps = 0;
        for (std::size_t k = 0; k < K; ++k)
            if (find(k) == k) ++comps;
        counts[c] = comps;
    }
    return counts;
}

}  // namespace softtriple
