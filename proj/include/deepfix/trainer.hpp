#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "deepfix/dataset.hpp"
#include "deepfix/network.hpp"
#include "deepfix/optimizer.hpp"

namespace deepfix {

struct TrainOptions {
    int iters = 600;
    int batch = 4;
    int eval_every = 50;  // validation cadence in iterations
    uint64_t seed = 1;
    OptimizerOptions opt;
    int max_decays = 2;  // stop once the schedule would drop rates a third time
    std::ostream* log = nullptr;
};

struct TrainRun {
    real initial_loss = 0;  // whole train set, before the first step
    real final_loss = 0;    // whole train set, after the last step
    std::vector<real> iter_losses;
    std::vector<std::pair<int, real>> val_losses;
    int iterations = 0;
    Map2D mean_map;  // train-split mean, kept for explicit-cb prediction blending
};

namespace detail {

struct TrainSet {
    std::vector<Tensor> images;    // (1,3,H,W) each
    std::vector<Map2D> targets;    // at output resolution
    std::vector<std::string> ids;
    int h = 0, w = 0, oh = 0, ow = 0;
};

/// When mean_out is given it receives the pixelwise mean of the full-resolution
/// maps, saving a second pass over the files.
inline TrainSet load_train_set(const Manifest& manifest, const std::string& split,
                               Map2D* mean_out = nullptr) {
    TrainSet set;
    Map2D mean;
    size_t count = 0;
    for (const ManifestRecord* rec : split_records(manifest, split)) {
        if (rec->map.empty())
            throw DataError(rec->image + ": training requires a ground-truth map");
        LoadedSample s = load_sample(manifest, *rec);
        if (set.images.empty()) {
            set.h = s.image.h;
            set.w = s.image.w;
            set.oh = s.image.h / 8;
            set.ow = s.image.w / 8;
        } else if (s.image.h != set.h || s.image.w != set.w) {
            throw DataError(rec->image + ": image is " + std::to_string(s.image.w) + "x" +
                            std::to_string(s.image.h) + ", batch requires uniform " +
                            std::to_string(set.w) + "x" + std::to_string(set.h));
        }
        if (mean_out) {
            if (mean.v.empty()) mean = Map2D(s.map.height, s.map.width);
            for (size_t i = 0; i < mean.v.size(); ++i) mean.v[i] += s.map.v[i];
            ++count;
        }
        set.targets.push_back(box_downsample(s.map, 8));
        set.images.push_back(std::move(s.image));
        set.ids.push_back(s.id);
    }
    if (mean_out && count > 0) {
        for (real& v : mean.v) v /= static_cast<real>(count);
        *mean_out = std::move(mean);
    }
    return set;
}

inline Tensor batch_images(const TrainSet& set, const std::vector<int>& idx, size_t from,
                           size_t count) {
    Tensor batch(static_cast<int>(count), 3, set.h, set.w);
    for (size_t i = 0; i < count; ++i) {
        const Tensor& img = set.images[static_cast<size_t>(idx[from + i])];
        std::copy(img.v.begin(), img.v.end(),
                  batch.v.begin() + static_cast<size_t>(i) * img.v.size());
    }
    return batch;
}

inline Tensor batch_targets(const TrainSet& set, const std::vector<int>& idx, size_t from,
                            size_t count) {
    Tensor batch(static_cast<int>(count), 1, set.oh, set.ow);
    for (size_t i = 0; i < count; ++i)
        plane_from_map(batch, static_cast<int>(i), 0, set.targets[static_cast<size_t>(idx[from + i])]);
    return batch;
}

/// Mean per-element loss over a whole set, dropout off.
inline real set_loss(Network& net, const TrainSet& set, int batch) {
    std::vector<int> idx(set.images.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    real acc = 0;
    size_t total_elems = 0;
    for (size_t from = 0; from < idx.size(); from += static_cast<size_t>(batch)) {
        const size_t count = std::min(static_cast<size_t>(batch), idx.size() - from);
        Tensor out = net.forward(batch_images(set, idx, from, count), false);
        const LossResult res = euclidean_loss(out, batch_targets(set, idx, from, count));
        acc += res.loss * static_cast<real>(out.size());
        total_elems += out.size();
    }
    if (total_elems == 0) throw DataError("loss over empty sample set");
    return acc / static_cast<real>(total_elems);
}

inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

inline std::string format_log_line(int iter, real train_loss, const real* val_loss, real lr) {
    char buf[128];
    if (val_loss)
        std::snprintf(buf, sizeof(buf), "%d\t%.9g\t%.9g\t%.9g", iter, train_loss, *val_loss, lr);
    else
        std::snprintf(buf, sizeof(buf), "%d\t%.9g\t-\t%.9g", iter, train_loss, lr);
    return buf;
}

}  // namespace detail

/// Pixelwise mean of a stack of same-sized maps.
inline Map2D compute_mean_map(const std::vector<Map2D>& maps) {
    if (maps.empty()) throw DataError("mean map over an empty set");
    Map2D mean(maps[0].height, maps[0].width);
    for (const Map2D& m : maps) {
        if (m.height != mean.height || m.width != mean.width)
            throw ShapeError("mean map: got a " + std::to_string(m.width) + "x" +
                             std::to_string(m.height) + " map in a " + std::to_string(mean.width) +
                             "x" + std::to_string(mean.height) + " stack");
        for (size_t i = 0; i < mean.v.size(); ++i) mean.v[i] += m.v[i];
    }
    for (real& v : mean.v) v /= static_cast<real>(maps.size());
    return mean;
}

/// Mean of one split's ground-truth maps, at full input resolution.
inline Map2D compute_mean_map(const Manifest& manifest, const std::string& split) {
    std::vector<Map2D> maps;
    for (const ManifestRecord* rec : split_records(manifest, split)) {
        if (rec->map.empty())
            throw DataError(rec->image + ": mean map requires a ground-truth map");
        maps.push_back(load_sample(manifest, *rec).map);
    }
    return compute_mean_map(maps);
}

/// Mean per-element loss of the network's raw output over one manifest split.
inline real dataset_loss(Network& net, const Manifest& manifest, const std::string& split,
                         int batch = 4) {
    const detail::TrainSet set = detail::load_train_set(manifest, split);
    if (set.images.empty()) throw DataError("manifest has no " + split + " records");
    return detail::set_loss(net, set, batch);
}

/// Momentum SGD over the manifest's train split, with periodic validation
/// driving the rate schedule. Weights must be initialized beforehand. For the
/// explicit-cb variant the run also records the train-split mean map, which
/// prediction blends in afterwards; the loss itself never sees it.
inline TrainRun train_network(Network& net, const Manifest& manifest, const TrainOptions& opts) {
    if (opts.iters < 1) throw std::invalid_argument("train: iters must be >= 1");
    if (opts.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    TrainRun run;
    const bool want_mean = net.variant == Variant::ExplicitCB;
    const detail::TrainSet train_set =
        detail::load_train_set(manifest, "train", want_mean ? &run.mean_map : nullptr);
    if (train_set.images.empty()) throw DataError("manifest has no train records");
    const detail::TrainSet val_set = detail::load_train_set(manifest, "val");

    net.set_dropout_seed(Rng::derive(opts.seed, 0xd0));
    Optimizer optimizer(opts.opt);
    const std::vector<ParamRef> params = net.params();

    run.initial_loss = detail::set_loss(net, train_set, opts.batch);

    std::vector<int> order(train_set.images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(Rng::derive(opts.seed, 0x5f));
    size_t cursor = order.size();  // forces a shuffle before the first batch

    for (int iter = 1; iter <= opts.iters; ++iter) {
        const size_t count = std::min(static_cast<size_t>(opts.batch), order.size());
        if (cursor + count > order.size()) {
            detail::shuffle_indices(order, shuffle_rng);
            cursor = 0;
        }
        Tensor x = detail::batch_images(train_set, order, cursor, count);
        Tensor target = detail::batch_targets(train_set, order, cursor, count);
        cursor += count;

        Tensor out = net.forward(x, true);
        const LossResult res = euclidean_loss(out, target);
        if (!std::isfinite(res.loss)) {
            for (size_t i = 0; i < count; ++i) {
                Tensor single = net.forward(detail::batch_images(train_set, order,
                                                                cursor - count + i, 1), false);
                const LossResult one = euclidean_loss(
                    single, detail::batch_targets(train_set, order, cursor - count + i, 1));
                if (!std::isfinite(one.loss))
                    throw NumericalError(
                        "non-finite loss at sample " +
                        train_set.ids[static_cast<size_t>(order[cursor - count + i])]);
            }
            throw NumericalError("non-finite batch loss");
        }
        net.zero_grads();
        net.backward(res.grad);
        optimizer.step(params);

        run.iter_losses.push_back(res.loss);
        run.iterations = iter;

        bool stop = false;
        const real* logged_val = nullptr;
        real vloss = 0;
        if (!val_set.images.empty() && opts.eval_every > 0 && iter % opts.eval_every == 0) {
            vloss = detail::set_loss(net, val_set, opts.batch);
            run.val_losses.emplace_back(iter, vloss);
            logged_val = &vloss;
            optimizer.observe_validation(vloss);
            if (optimizer.decays() > opts.max_decays) stop = true;
        }
        if (opts.log)
            *opts.log << detail::format_log_line(iter, res.loss, logged_val, optimizer.lr_fresh)
                      << "\n";
        if (stop) break;
    }

    run.final_loss = detail::set_loss(net, train_set, opts.batch);
    return run;
}

}  // namespace deepfix
