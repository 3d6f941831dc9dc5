#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "deepfix/archive.hpp"
#include "deepfix/bicubic.hpp"
#include "deepfix/dataset.hpp"
#include "deepfix/metrics.hpp"
#include "deepfix/network.hpp"
#include "deepfix/trainer.hpp"

namespace deepfix {

/// Network response upsampled to image resolution and min-max normalized.
/// Explicit-cb weights then add cb_weight times the stored train-split mean
/// map and the blend is normalized a second time; the mean is resampled if
/// its resolution differs from the prediction's.
inline Map2D predict_map(Network& net, const Map2D& mean_map, real cb_weight,
                         const Tensor& image) {
    if (image.n != 1) throw ShapeError("predict: expected a single-image tensor");
    Tensor out = net.forward(image, false);
    Map2D pred = minmax_normalize(bicubic_upsample(map_from_plane(out, 0, 0), image.h, image.w));
    if (net.variant != Variant::ExplicitCB) return pred;
    if (mean_map.v.empty())
        throw DataError("explicit-cb prediction needs the mean map stored at training time");
    const Map2D m = (mean_map.height == pred.height && mean_map.width == pred.width)
                        ? mean_map
                        : bicubic_upsample(mean_map, pred.height, pred.width);
    for (size_t i = 0; i < pred.v.size(); ++i) pred.v[i] += cb_weight * m.v[i];
    return minmax_normalize(pred);
}

/// Mean over one split of the per-image euclidean loss between the
/// full-resolution prediction and the ground-truth map.
inline real prediction_loss(Network& net, const Map2D& mean_map, real cb_weight,
                            const Manifest& manifest, const std::string& split) {
    const std::vector<const ManifestRecord*> recs = split_records(manifest, split);
    if (recs.empty()) throw DataError("manifest has no " + split + " records");
    real acc = 0;
    for (const ManifestRecord* rec : recs) {
        if (rec->map.empty()) throw DataError(rec->image + ": loss requires a ground-truth map");
        const LoadedSample s = load_sample(manifest, *rec);
        const Map2D pred = predict_map(net, mean_map, cb_weight, s.image);
        real err = 0;
        for (size_t i = 0; i < pred.v.size(); ++i) {
            const real d = pred.v[i] - s.map.v[i];
            err += d * d;
        }
        acc += err / (2 * static_cast<real>(pred.v.size()));
    }
    return acc / static_cast<real>(recs.size());
}

struct EvalOptions {
    std::string split = "test";
    real cb_weight = 1.0;  // explicit-cb only: scale of the blended mean map
    int emd_grid = 32;
    int auc_splits = 100;
    uint64_t seed = 1;
};

struct ImageMetrics {
    std::string id;
    real nss = 0, cc = 0, sim = 0, auc_judd = 0;
    AucResult auc_borji, sauc;
    real emd = 0;
    int emd_factor = 1;
};

struct EvalReport {
    EvalOptions options;
    std::vector<ImageMetrics> rows;
    ImageMetrics mean;
};

namespace detail {

/// Run fn(0..n-1) across worker threads; callers store results by index so
/// the outcome is identical to a sequential loop.
template <class F>
inline void parallel_ordered(int n, F&& fn) {
    const unsigned hw = std::thread::hardware_concurrency();
    const int workers = std::max(1, std::min<int>(static_cast<int>(hw), n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline Fixation rescale_fixation(const Fixation& f, int from_w, int from_h, int to_w, int to_h) {
    Fixation out;
    out.x = std::min(to_w - 1, static_cast<int>(static_cast<real>(f.x) * to_w / from_w));
    out.y = std::min(to_h - 1, static_cast<int>(static_cast<real>(f.y) * to_h / from_h));
    return out;
}

}  // namespace detail

/// Score every record of the chosen split with all seven metrics. The
/// shuffled-AUC negative pool for an image is the other images' fixations,
/// rescaled when extents differ. Per-image random streams derive from the
/// evaluation seed, so results are independent of scheduling.
inline EvalReport evaluate_network(Network& net, const Map2D& mean_map, const Manifest& manifest,
                                   const EvalOptions& opts) {
    const std::vector<const ManifestRecord*> recs = split_records(manifest, opts.split);
    if (recs.empty()) throw DataError("manifest has no " + opts.split + " records");

    std::vector<LoadedSample> samples;
    samples.reserve(recs.size());
    for (const ManifestRecord* rec : recs) {
        if (rec->map.empty()) throw DataError(rec->image + ": evaluation requires a map");
        if (rec->fix.empty()) throw DataError(rec->image + ": evaluation requires fixations");
        samples.push_back(load_sample(manifest, *rec));
        if (samples.back().fix.points.empty())
            throw DataError(rec->image + ": no fixations inside the cropped frame");
    }

    // predictions are sequential: one network instance holds state per forward
    std::vector<Map2D> predictions(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        predictions[i] = predict_map(net, mean_map, opts.cb_weight, samples[i].image);

    EvalReport report;
    report.options = opts;
    report.rows.resize(samples.size());
    detail::parallel_ordered(static_cast<int>(samples.size()), [&](int i) {
        const LoadedSample& s = samples[static_cast<size_t>(i)];
        const Map2D& pred = predictions[static_cast<size_t>(i)];
        ImageMetrics& row = report.rows[static_cast<size_t>(i)];
        row.id = s.id;

        std::vector<Fixation> pool;
        for (size_t j = 0; j < samples.size(); ++j) {
            if (j == static_cast<size_t>(i)) continue;
            const FixationSet& other = samples[j].fix;
            for (const Fixation& f : other.points)
                pool.push_back(detail::rescale_fixation(f, other.width, other.height, s.fix.width,
                                                        s.fix.height));
        }

        Rng rng(Rng::derive(opts.seed, static_cast<uint64_t>(i)));
        row.nss = nss(pred, s.fix);
        row.cc = cc(pred, s.map);
        row.sim = sim(pred, s.map);
        row.auc_judd = auc_judd(pred, s.fix);
        row.auc_borji = auc_borji(pred, s.fix, opts.auc_splits, rng);
        row.sauc = shuffled_auc(pred, s.fix, pool, opts.auc_splits, rng);
        const EmdResult e = emd_details(pred, s.map, opts.emd_grid);
        row.emd = e.cost;
        row.emd_factor = e.factor;
    });

    report.mean.id = "MEAN";
    for (const ImageMetrics& r : report.rows) {
        report.mean.nss += r.nss;
        report.mean.cc += r.cc;
        report.mean.sim += r.sim;
        report.mean.auc_judd += r.auc_judd;
        report.mean.auc_borji.mean += r.auc_borji.mean;
        report.mean.auc_borji.stddev += r.auc_borji.stddev;
        report.mean.sauc.mean += r.sauc.mean;
        report.mean.sauc.stddev += r.sauc.stddev;
        report.mean.emd += r.emd;
    }
    const real inv = 1 / static_cast<real>(report.rows.size());
    report.mean.nss *= inv;
    report.mean.cc *= inv;
    report.mean.sim *= inv;
    report.mean.auc_judd *= inv;
    report.mean.auc_borji.mean *= inv;
    report.mean.auc_borji.stddev *= inv;
    report.mean.sauc.mean *= inv;
    report.mean.sauc.stddev *= inv;
    report.mean.emd *= inv;
    report.mean.emd_factor = report.rows.front().emd_factor;
    return report;
}

namespace detail {

inline std::string metric_row(const ImageMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%d", m.id.c_str(),
                  m.nss, m.cc, m.sim, m.auc_judd, m.auc_borji.mean, m.auc_borji.stddev,
                  m.sauc.mean, m.sauc.stddev, m.emd, m.emd_factor);
    return buf;
}

}  // namespace detail

inline void write_report(std::ostream& out, const EvalReport& report) {
    out << "# saliency metric report\n";
    out << "# split: " << report.options.split << "\n";
    out << "# auc splits per image: " << report.options.auc_splits << "\n";
    out << "# emd grid cap: " << report.options.emd_grid
        << "; emd is measured in downsampled cell widths (emd_factor input pixels per cell)\n";
    out << "image\tnss\tcc\tsim\tauc_judd\tauc_borji\tauc_borji_std\tsauc\tsauc_std\temd\temd_"
           "factor\n";
    for (const ImageMetrics& r : report.rows) out << detail::metric_row(r) << "\n";
    out << detail::metric_row(report.mean) << "\n";
}

}  // namespace deepfix
