#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "deepfix/rng.hpp"
#include "deepfix/saliency.hpp"
#include "deepfix/tensor.hpp"

namespace deepfix {

namespace detail {

inline void check_fix_dims(const Map2D& sal, const FixationSet& fix, const char* what) {
    if (fix.height != sal.height || fix.width != sal.width)
        throw ShapeError(std::string(what) + ": fixations recorded on " +
                         std::to_string(fix.width) + "x" + std::to_string(fix.height) +
                         ", map is " + std::to_string(sal.width) + "x" +
                         std::to_string(sal.height));
    if (fix.points.empty()) throw DataError(std::string(what) + ": no fixations");
    fix.check_bounds();
}

/// Area under the ROC curve traced by thresholding at every positive sample
/// value, integrated by trapezoid through (0,0) and (1,1).
inline real auc_from_samples(std::vector<real> pos, std::vector<real> neg) {
    if (pos.empty()) throw DataError("auc: no positive samples");
    if (neg.empty()) throw DataError("auc: no negative samples");
    std::sort(pos.begin(), pos.end(), std::greater<real>());
    std::sort(neg.begin(), neg.end(), std::greater<real>());

    std::vector<real> fpr{0}, tpr{0};
    size_t ni = 0;
    size_t pi = 0;
    while (pi < pos.size()) {
        const real t = pos[pi];
        while (pi < pos.size() && pos[pi] == t) ++pi;  // all positives at this threshold
        while (ni < neg.size() && neg[ni] >= t) ++ni;
        tpr.push_back(static_cast<real>(pi) / pos.size());
        fpr.push_back(static_cast<real>(ni) / neg.size());
    }
    fpr.push_back(1);
    tpr.push_back(1);

    real area = 0;
    for (size_t i = 1; i < fpr.size(); ++i)
        area += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2;
    return area;
}

inline std::vector<real> values_at_fixations(const Map2D& sal, const FixationSet& fix) {
    std::vector<real> out;
    out.reserve(fix.points.size());
    for (const Fixation& f : fix.points) out.push_back(sal.at(f.y, f.x));
    return out;
}

inline std::vector<char> fixated_mask(const FixationSet& fix) {
    std::vector<char> mask(static_cast<size_t>(fix.height) * fix.width, 0);
    for (const Fixation& f : fix.points) mask[static_cast<size_t>(f.y) * fix.width + f.x] = 1;
    return mask;
}

}  // namespace detail

/// Mean of the z-scored saliency values at fixation points. A constant map has
/// no z-score; the result is zero and the flag, when given, is raised.
inline real nss(const Map2D& sal, const FixationSet& fix, bool* degenerate = nullptr) {
    detail::check_fix_dims(sal, fix, "nss");
    if (degenerate) *degenerate = false;
    // flatness must be tested exactly; summation rounding keeps the two-pass
    // variance from reaching zero on a constant map
    const auto [lo_it, hi_it] = std::minmax_element(sal.v.begin(), sal.v.end());
    if (*lo_it == *hi_it) {
        if (degenerate) *degenerate = true;
        return 0;
    }
    const real mu = map_mean(sal);
    const real sd = map_std(sal);
    real acc = 0;
    for (const Fixation& f : fix.points) acc += (sal.at(f.y, f.x) - mu) / sd;
    return acc / static_cast<real>(fix.points.size());
}

/// Pearson correlation between two maps, population normalization.
inline real cc(const Map2D& a, const Map2D& b) {
    if (!a.same_shape(b))
        throw ShapeError("cc: maps are " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " and " + std::to_string(b.width) + "x" + std::to_string(b.height));
    if (a.v.empty()) throw ShapeError("cc: empty maps");
    const auto [alo, ahi] = std::minmax_element(a.v.begin(), a.v.end());
    const auto [blo, bhi] = std::minmax_element(b.v.begin(), b.v.end());
    if (*alo == *ahi || *blo == *bhi) throw NumericalError("cc: constant map has no correlation");
    const real ma = map_mean(a), mb = map_mean(b);
    real cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const real da = a.v[i] - ma, db = b.v[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0 || vb == 0) throw NumericalError("cc: constant map has no correlation");
    return cov / std::sqrt(va * vb);
}

/// Histogram intersection of the two maps as distributions.
inline real sim(const Map2D& a, const Map2D& b) {
    if (!a.same_shape(b)) throw ShapeError("sim: map extents differ");
    const Map2D pa = sum_normalize(a), pb = sum_normalize(b);
    real acc = 0;
    for (size_t i = 0; i < pa.v.size(); ++i) acc += std::min(pa.v[i], pb.v[i]);
    return acc;
}

/// ROC area over the binary fixation map: positives are the distinct fixated
/// pixels, negatives every other pixel, thresholds at the positive values.
inline real auc_judd(const Map2D& sal, const FixationSet& fix) {
    detail::check_fix_dims(sal, fix, "auc_judd");
    const std::vector<char> mask = detail::fixated_mask(fix);
    std::vector<real> pos, neg;
    neg.reserve(sal.v.size());
    for (size_t i = 0; i < sal.v.size(); ++i) (mask[i] ? pos : neg).push_back(sal.v[i]);
    return detail::auc_from_samples(std::move(pos), std::move(neg));
}

struct AucResult {
    real mean = 0;
    real stddev = 0;
};

namespace detail {

inline AucResult auc_over_splits(const std::vector<real>& pos, const std::vector<real>& neg_pool,
                                 size_t per_split, int splits, Rng& rng) {
    if (neg_pool.empty()) throw DataError("auc: empty negative pool");
    if (splits < 1) throw std::invalid_argument("auc: splits must be >= 1");
    std::vector<real> areas;
    areas.reserve(static_cast<size_t>(splits));
    std::vector<real> neg(per_split);
    for (int s = 0; s < splits; ++s) {
        for (size_t i = 0; i < per_split; ++i)
            neg[i] = neg_pool[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(neg_pool.size()) - 1))];
        areas.push_back(auc_from_samples(pos, neg));
    }
    AucResult res;
    for (real a : areas) res.mean += a;
    res.mean /= areas.size();
    real acc = 0;
    for (real a : areas) {
        const real d = a - res.mean;
        acc += d * d;
    }
    res.stddev = std::sqrt(acc / areas.size());
    return res;
}

}  // namespace detail

/// ROC area against chance: each split draws as many negatives as there are
/// fixations, uniformly with replacement from the non-fixated pixels.
inline AucResult auc_borji(const Map2D& sal, const FixationSet& fix, int splits, Rng& rng) {
    detail::check_fix_dims(sal, fix, "auc_borji");
    const std::vector<real> pos = detail::values_at_fixations(sal, fix);
    const std::vector<char> mask = detail::fixated_mask(fix);
    std::vector<real> pool;
    pool.reserve(sal.v.size());
    for (size_t i = 0; i < sal.v.size(); ++i)
        if (!mask[i]) pool.push_back(sal.v[i]);
    if (pool.empty()) throw DataError("auc_borji: every pixel is fixated");
    return detail::auc_over_splits(pos, pool, pos.size(), splits, rng);
}

/// ROC area with center bias discounted: negatives come from where observers
/// looked on other images, so a location-only predictor scores near chance.
inline AucResult shuffled_auc(const Map2D& sal, const FixationSet& fix,
                              const std::vector<Fixation>& other_fixations, int splits, Rng& rng) {
    detail::check_fix_dims(sal, fix, "shuffled_auc");
    const std::vector<real> pos = detail::values_at_fixations(sal, fix);
    std::vector<real> pool;
    pool.reserve(other_fixations.size());
    for (const Fixation& f : other_fixations) {
        if (f.x < 0 || f.x >= sal.width || f.y < 0 || f.y >= sal.height)
            throw DataError("shuffled_auc: pool fixation (" + std::to_string(f.x) + "," +
                            std::to_string(f.y) + ") outside map");
        pool.push_back(sal.at(f.y, f.x));
    }
    if (pool.empty()) throw DataError("shuffled_auc: empty fixation pool");
    return detail::auc_over_splits(pos, pool, pos.size(), splits, rng);
}

// ---------------------------------------------------------------------------
// earth mover's distance
// ---------------------------------------------------------------------------

namespace detail {

/// Surplus and deficit cells of the difference between two distributions, with
/// their grid coordinates. Mass shared by both maps never needs to move.
struct TransportProblem {
    std::vector<real> supply, demand;
    std::vector<int> sup_x, sup_y, dem_x, dem_y;
};

inline TransportProblem build_transport(const Map2D& p, const Map2D& q) {
    TransportProblem t;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            const real d = p.at(y, x) - q.at(y, x);
            if (d > 0) {
                t.supply.push_back(d);
                t.sup_x.push_back(x);
                t.sup_y.push_back(y);
            } else if (d < 0) {
                t.demand.push_back(-d);
                t.dem_x.push_back(x);
                t.dem_y.push_back(y);
            }
        }
    return t;
}

inline real cell_distance(int x0, int y0, int x1, int y1) {
    const real dx = static_cast<real>(x0 - x1), dy = static_cast<real>(y0 - y1);
    return std::sqrt(dx * dx + dy * dy);
}

/// Minimum-cost transport by successive shortest augmenting paths with node
/// potentials; Dijkstra runs dense over the bipartite residual graph.
inline real solve_transport(const TransportProblem& t) {
    const int ns = static_cast<int>(t.supply.size());
    const int nd = static_cast<int>(t.demand.size());
    if (ns == 0 || nd == 0) return 0;

    std::vector<real> a = t.supply, b = t.demand;
    std::vector<real> flow(static_cast<size_t>(ns) * nd, 0);
    std::vector<real> pi(static_cast<size_t>(ns) + nd, 0);
    const real inf = std::numeric_limits<real>::infinity();
    const real total = std::accumulate(b.begin(), b.end(), real(0));
    const real eps = std::max(total, real(1)) * 1e-14;

    auto cost = [&](int i, int j) {
        return cell_distance(t.sup_x[i], t.sup_y[i], t.dem_x[j], t.dem_y[j]);
    };

    std::vector<real> dist(static_cast<size_t>(ns) + nd);
    std::vector<int> parent(static_cast<size_t>(ns) + nd);
    std::vector<char> done(static_cast<size_t>(ns) + nd);

    const long max_phases = 64L * (ns + nd) + 64;
    for (long phase = 0;; ++phase) {
        const real remaining = std::accumulate(b.begin(), b.end(), real(0));
        if (remaining <= eps) break;
        if (phase >= max_phases) throw NumericalError("emd: transport did not converge");
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (int i = 0; i < ns; ++i)
            if (a[i] > 0) dist[i] = 0;

        for (int iter = 0; iter < ns + nd; ++iter) {
            int u = -1;
            real best = inf;
            for (int k = 0; k < ns + nd; ++k)
                if (!done[k] && dist[k] < best) {
                    best = dist[k];
                    u = k;
                }
            if (u < 0) break;
            done[u] = 1;
            if (u < ns) {
                for (int j = 0; j < nd; ++j) {
                    if (done[ns + j]) continue;
                    const real nd_cost = dist[u] + cost(u, j) - pi[u] + pi[ns + j];
                    if (nd_cost < dist[ns + j]) {
                        dist[ns + j] = nd_cost;
                        parent[ns + j] = u;
                    }
                }
            } else {
                const int j = u - ns;
                for (int i = 0; i < ns; ++i) {
                    if (done[i] || flow[static_cast<size_t>(i) * nd + j] <= 0) continue;
                    const real nd_cost = dist[u] - cost(i, j) - pi[u] + pi[i];
                    if (nd_cost < dist[i]) {
                        dist[i] = nd_cost;
                        parent[i] = u;
                    }
                }
            }
        }

        int target = -1;
        real best = inf;
        for (int j = 0; j < nd; ++j)
            if (b[j] > 0 && dist[ns + j] < best) {
                best = dist[ns + j];
                target = j;
            }
        if (target < 0) throw NumericalError("emd: transport network disconnected");

        // bottleneck along the augmenting path
        real delta = b[target];
        for (int u = ns + target; parent[u] >= 0; u = parent[u]) {
            const int p = parent[u];
            if (p >= ns) delta = std::min(delta, flow[static_cast<size_t>(u) * nd + (p - ns)]);
            if (parent[p] < 0) delta = std::min(delta, a[p]);
        }

        for (int u = ns + target; parent[u] >= 0; u = parent[u]) {
            const int p = parent[u];
            if (p < ns)
                flow[static_cast<size_t>(p) * nd + (u - ns)] += delta;
            else
                flow[static_cast<size_t>(u) * nd + (p - ns)] -= delta;
            if (parent[p] < 0) a[p] -= delta;
        }
        b[target] -= delta;

        // keep reduced costs non-negative: raise potentials by the settled
        // distance, capped at the target's distance for nodes beyond it
        const real reach = dist[ns + target];
        for (int k = 0; k < ns + nd; ++k)
            if (dist[k] < inf) pi[k] -= std::min(dist[k], reach);
    }

    real total_cost = 0;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nd; ++j) {
            const real f = flow[static_cast<size_t>(i) * nd + j];
            if (f > 0) total_cost += f * cost(i, j);
        }
    return total_cost;
}

}  // namespace detail

struct EmdResult {
    real cost = 0;
    int factor = 1;  // uniform downsampling factor applied before transport
};

/// Earth mover's distance between two maps as distributions. Maps larger than
/// the grid cap are first box-summed by a uniform integer factor; the cost is
/// in units of the resulting cell width.
inline EmdResult emd_details(const Map2D& a, const Map2D& b, int grid_cap = 32) {
    if (!a.same_shape(b)) throw ShapeError("emd: map extents differ");
    if (a.v.empty()) throw ShapeError("emd: empty maps");
    EmdResult res;
    res.factor = downsample_factor_for_cap(a.height, a.width, grid_cap);
    const Map2D pa = sum_normalize(box_downsample_sum(a, res.factor));
    const Map2D pb = sum_normalize(box_downsample_sum(b, res.factor));
    res.cost = detail::solve_transport(detail::build_transport(pa, pb));
    return res;
}

inline real emd(const Map2D& a, const Map2D& b, int grid_cap = 32) {
    return emd_details(a, b, grid_cap).cost;
}

}  // namespace deepfix
