#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "deepfix/dataset.hpp"
#include "deepfix/eval.hpp"
#include "deepfix/network.hpp"
#include "deepfix/trainer.hpp"

namespace deepfix {

struct AblationOptions {
    int train_count = 500, val_count = 100;
    real strength = 0.7;
    int seeds = 3;
    uint64_t base_seed = 1;
    NetworkConfig config = NetworkConfig::desk();
    TrainOptions train;  // train.seed is overridden per repetition
    real cb_weight = 1.0;
    int emd_grid = 12;
    int auc_splits = 100;
    std::string workdir = "ablation";
    bool keep_artifacts = true;  // leave datasets and weights in the workdir
    std::ostream* progress = nullptr;
};

/// Validation summary of one variant: per-seed values reduced to medians.
struct VariantSummary {
    Variant variant = Variant::LBC;
    real val_loss = 0;
    real emd = 0, auc_judd = 0, sim = 0, auc_borji = 0, sauc = 0, cc = 0, nss = 0;
};

struct AblationResult {
    std::vector<VariantSummary> rows;  // DF-No-LBC, DF-Explicit-CB, DF-LBC
    AblationOptions options;
};

namespace detail {

inline real median(std::vector<real> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

struct SeedOutcome {
    real val_loss = 0;
    ImageMetrics mean;
};

}  // namespace detail

inline const char* ablation_row_name(Variant v) {
    switch (v) {
        case Variant::NoLBC: return "DF-No-LBC";
        case Variant::ExplicitCB: return "DF-Explicit-CB";
        case Variant::LBC: return "DF-LBC";
    }
    throw std::invalid_argument("ablation_row_name: bad enum value");
}

/// Train all three variants on the same synthetic datasets, one dataset per
/// seed, and reduce validation metrics to per-variant medians over seeds.
inline AblationResult run_ablation(const AblationOptions& opts) {
    if (opts.seeds < 1) throw std::invalid_argument("ablation: needs at least one seed");
    const Variant variants[3] = {Variant::NoLBC, Variant::ExplicitCB, Variant::LBC};
    std::vector<std::vector<detail::SeedOutcome>> outcomes(3);

    for (int s = 0; s < opts.seeds; ++s) {
        const uint64_t seed = opts.base_seed + static_cast<uint64_t>(s);
        const std::string dir =
            (std::filesystem::path(opts.workdir) / ("seed" + std::to_string(seed))).string();
        SynthOptions synth;
        synth.train = opts.train_count;
        synth.val = opts.val_count;
        synth.height = opts.config.input_height;
        synth.width = opts.config.input_width;
        synth.strength = opts.strength;
        synth.seed = seed;
        const Manifest manifest = generate_synthetic_dataset(dir, synth);
        if (opts.progress)
            *opts.progress << "# dataset seed " << seed << ": " << opts.train_count << " train / "
                           << opts.val_count << " val\n";

        for (int v = 0; v < 3; ++v) {
            Network net(opts.config, variants[v]);
            net.init_weights(seed);
            TrainOptions topt = opts.train;
            topt.seed = seed;
            const TrainRun run = train_network(net, manifest, topt);

            detail::SeedOutcome outcome;
            outcome.val_loss =
                prediction_loss(net, run.mean_map, opts.cb_weight, manifest, "val");

            EvalOptions eopt;
            eopt.split = "val";
            eopt.cb_weight = opts.cb_weight;
            eopt.emd_grid = opts.emd_grid;
            eopt.auc_splits = opts.auc_splits;
            eopt.seed = seed;
            const EvalReport report = evaluate_network(net, run.mean_map, manifest, eopt);
            outcome.mean = report.mean;
            outcomes[static_cast<size_t>(v)].push_back(outcome);

            if (opts.keep_artifacts) {
                const std::string weights =
                    (std::filesystem::path(dir) / (std::string(variant_name(variants[v])) + ".dfx"))
                        .string();
                save_weights(weights, net, run.mean_map.v.empty() ? nullptr : &run.mean_map);
            }
            if (opts.progress)
                *opts.progress << "# seed " << seed << " " << ablation_row_name(variants[v])
                               << ": val_loss " << outcome.val_loss << ", cc " << outcome.mean.cc
                               << ", nss " << outcome.mean.nss << ", emd " << outcome.mean.emd
                               << " (" << run.iterations << " iters)\n";
        }
    }

    AblationResult result;
    result.options = opts;
    for (int v = 0; v < 3; ++v) {
        const std::vector<detail::SeedOutcome>& runs = outcomes[static_cast<size_t>(v)];
        VariantSummary row;
        row.variant = variants[v];
        std::vector<real> vals;
        auto med = [&](auto pick) {
            vals.clear();
            for (const detail::SeedOutcome& o : runs) vals.push_back(pick(o));
            return detail::median(vals);
        };
        row.val_loss = med([](const detail::SeedOutcome& o) { return o.val_loss; });
        row.emd = med([](const detail::SeedOutcome& o) { return o.mean.emd; });
        row.auc_judd = med([](const detail::SeedOutcome& o) { return o.mean.auc_judd; });
        row.sim = med([](const detail::SeedOutcome& o) { return o.mean.sim; });
        row.auc_borji = med([](const detail::SeedOutcome& o) { return o.mean.auc_borji.mean; });
        row.sauc = med([](const detail::SeedOutcome& o) { return o.mean.sauc.mean; });
        row.cc = med([](const detail::SeedOutcome& o) { return o.mean.cc; });
        row.nss = med([](const detail::SeedOutcome& o) { return o.mean.nss; });
        result.rows.push_back(row);
    }
    return result;
}

/// Three-row comparison table in the classic column order; validation loss
/// rides along in the comment header since it is not one of the seven metrics.
inline void write_ablation_report(std::ostream& out, const AblationResult& r) {
    out << "# ablation comparison, " << r.options.config.name << " config\n";
    out << "# dataset: " << r.options.train_count << " train / " << r.options.val_count
        << " val synthetic, center-bias strength " << r.options.strength << ", " << r.options.seeds
        << " seeds\n";
    out << "# cells are medians over seeds of per-image validation means\n";
    out << "# val_loss: euclidean loss between full-resolution predictions and maps\n";
    char buf[160];
    for (const VariantSummary& row : r.rows) {
        std::snprintf(buf, sizeof(buf), "# val_loss %s\t%.9g", ablation_row_name(row.variant),
                      row.val_loss);
        out << buf << "\n";
    }
    out << "variant\temd\tauc_judd\tsim\tauc_borji\tsauc\tcc\tnss\n";
    for (const VariantSummary& row : r.rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f",
                      ablation_row_name(row.variant), row.emd, row.auc_judd, row.sim,
                      row.auc_borji, row.sauc, row.cc, row.nss);
        out << buf << "\n";
    }
}

}  // namespace deepfix
