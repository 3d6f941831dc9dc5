// Command-line front end: train, predict, evaluate, ablate, gradcheck, synth.
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "deepfix/deepfix.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonArgs {
    std::string config = "desk";
    std::string variant = "lbc";
    std::string weights;
    std::string manifest;
    std::string out;
    uint64_t seed = 1;
    int iters = 600;
    int batch = 4;
    int emd_grid = 32;
    int ablate_emd_grid = 12;
    int auc_splits = 100;
    double cb_weight = 1.0;
};

int cmd_train(const CommonArgs& args) {
    deepfix::Network net(deepfix::parse_config(args.config), deepfix::parse_variant(args.variant));
    net.init_weights(args.seed);

    const deepfix::Manifest manifest = deepfix::load_manifest(args.manifest);
    deepfix::TrainOptions opts;
    opts.iters = args.iters;
    opts.batch = args.batch;
    opts.seed = args.seed;

    const std::string log_path = args.out + ".log";
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw deepfix::DataError(log_path + ": cannot open for writing");
    log << "# iter\ttrain_loss\tval_loss\tlr_fresh\n";
    opts.log = &log;

    const deepfix::TrainRun run = deepfix::train_network(net, manifest, opts);
    deepfix::save_weights(args.out, net,
                          run.mean_map.v.empty() ? nullptr : &run.mean_map);

    char buf[160];
    std::snprintf(buf, sizeof(buf), "# initial_loss %.9g final_loss %.9g iterations %d",
                  run.initial_loss, run.final_loss, run.iterations);
    log << buf << "\n";
    std::cout << "wrote " << args.out << " and " << log_path << "\n";
    return kExitOk;
}

int cmd_predict(const CommonArgs& args, const std::string& image_path) {
    deepfix::LoadedNetwork loaded = deepfix::network_from_archive(args.weights);
    const deepfix::Tensor raw = deepfix::load_image_ppm(image_path);
    const deepfix::CropGeom geom = deepfix::center_crop_geom(raw.h, raw.w, 8);
    const deepfix::Tensor image = deepfix::crop_tensor(raw, geom);

    const deepfix::Map2D pred =
        deepfix::predict_map(*loaded.net, loaded.mean_map, args.cb_weight, image);
    deepfix::save_map_pgm16(args.out, pred);
    deepfix::save_heatmap_pgm8(args.out + ".heatmap.pgm", pred);
    std::cout << "wrote " << args.out << " (" << pred.width << "x" << pred.height << ") and "
              << args.out << ".heatmap.pgm\n";
    return kExitOk;
}

int cmd_evaluate(const CommonArgs& args) {
    deepfix::LoadedNetwork loaded = deepfix::network_from_archive(args.weights);
    const deepfix::Manifest manifest = deepfix::load_manifest(args.manifest);

    deepfix::EvalOptions opts;
    opts.split = "test";
    opts.cb_weight = args.cb_weight;
    opts.emd_grid = args.emd_grid;
    opts.auc_splits = args.auc_splits;
    opts.seed = args.seed;

    const deepfix::EvalReport report =
        deepfix::evaluate_network(*loaded.net, loaded.mean_map, manifest, opts);
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw deepfix::DataError(args.out + ": cannot open for writing");
    deepfix::write_report(out, report);
    std::cout << "wrote " << args.out << " (" << report.rows.size() << " images)\n";
    return kExitOk;
}

int cmd_ablate(const CommonArgs& args, int train_count, int val_count, double strength,
               int seeds) {
    deepfix::AblationOptions opts;
    opts.train_count = train_count;
    opts.val_count = val_count;
    opts.strength = strength;
    opts.seeds = seeds;
    opts.base_seed = args.seed;
    opts.train.iters = args.iters;
    opts.train.batch = args.batch;
    opts.cb_weight = args.cb_weight;
    opts.emd_grid = args.ablate_emd_grid;
    opts.auc_splits = args.auc_splits;
    opts.workdir = args.out + ".work";
    opts.progress = &std::cout;

    const deepfix::AblationResult result = deepfix::run_ablation(opts);
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw deepfix::DataError(args.out + ": cannot open for writing");
    deepfix::write_ablation_report(out, result);
    deepfix::write_ablation_report(std::cout, result);
    return kExitOk;
}

int cmd_gradcheck(const CommonArgs& args) {
    const std::vector<deepfix::CheckOutcome> outcomes = deepfix::gradcheck_suite(args.seed);
    bool all_ok = true;
    for (const deepfix::CheckOutcome& o : outcomes) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-22s %-6s max_rel %.3e (%d probes)", o.name.c_str(),
                      o.ok() ? "pass" : "FAIL", o.max_rel, o.probes);
        std::cout << buf << "\n";
        all_ok = all_ok && o.ok();
    }
    if (!all_ok) {
        std::cerr << "gradient check failed\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_synth(const CommonArgs& args, int train_count, int val_count, int test_count, int height,
              int width, double strength) {
    deepfix::SynthOptions opts;
    opts.train = train_count;
    opts.val = val_count;
    opts.test = test_count;
    opts.height = height;
    opts.width = width;
    opts.strength = strength;
    opts.seed = args.seed;
    const deepfix::Manifest m = deepfix::generate_synthetic_dataset(args.out, opts);
    std::cout << "wrote " << m.records.size() << " samples under " << args.out << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"saliency network: training, prediction and evaluation"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string image_path;
    int train_count = 500, val_count = 100, test_count = 0;
    int seeds = 3, height = 48, width = 64;
    double strength = 0.7;

    CLI::App* train = app.add_subcommand("train", "train a network on a manifest");
    train->add_option("--config", args.config, "desk or full");
    train->add_option("--variant", args.variant, "lbc, no-lbc or explicit-cb");
    train->add_option("--manifest", args.manifest, "dataset manifest")->required();
    train->add_option("--out", args.out, "output weight archive")->required();
    train->add_option("--seed", args.seed, "run seed");
    train->add_option("--iters", args.iters, "training iterations");
    train->add_option("--batch", args.batch, "batch size");

    CLI::App* predict = app.add_subcommand("predict", "predict a saliency map for one image");
    predict->add_option("--weights", args.weights, "weight archive")->required();
    predict->add_option("--image", image_path, "input image (binary ppm)")->required();
    predict->add_option("--out", args.out, "output map path (16-bit pgm)")->required();
    predict->add_option("--cb-weight", args.cb_weight, "explicit-cb mean map scale");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score the test split with all metrics");
    evaluate->add_option("--weights", args.weights, "weight archive")->required();
    evaluate->add_option("--manifest", args.manifest, "dataset manifest")->required();
    evaluate->add_option("--out", args.out, "report path")->required();
    evaluate->add_option("--seed", args.seed, "sampling seed");
    evaluate->add_option("--emd-grid", args.emd_grid, "emd grid cap");
    evaluate->add_option("--auc-splits", args.auc_splits, "splits for sampled auc metrics");
    evaluate->add_option("--cb-weight", args.cb_weight, "explicit-cb mean map scale");

    CLI::App* ablate = app.add_subcommand("ablate", "train and compare the three variants");
    ablate->add_option("--out", args.out, "report path")->required();
    ablate->add_option("--seed", args.seed, "base seed");
    ablate->add_option("--iters", args.iters, "training iterations per run");
    ablate->add_option("--batch", args.batch, "batch size");
    ablate->add_option("--train-count", train_count, "synthetic training samples");
    ablate->add_option("--val-count", val_count, "synthetic validation samples");
    ablate->add_option("--strength", strength, "center-bias mixing weight");
    ablate->add_option("--seeds", seeds, "number of repetitions");
    ablate->add_option("--emd-grid", args.ablate_emd_grid, "emd grid cap");
    ablate->add_option("--auc-splits", args.auc_splits, "splits for sampled auc metrics");
    ablate->add_option("--cb-weight", args.cb_weight, "explicit-cb mean map scale");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference suite");
    gradcheck->add_option("--seed", args.seed, "probe seed");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", args.out, "output directory")->required();
    synth->add_option("--seed", args.seed, "dataset seed");
    synth->add_option("--train-count", train_count, "training samples");
    synth->add_option("--val-count", val_count, "validation samples");
    synth->add_option("--test-count", test_count, "test samples");
    synth->add_option("--height", height, "image height");
    synth->add_option("--width", width, "image width");
    synth->add_option("--strength", strength, "center-bias mixing weight");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train(args);
        if (predict->parsed()) return cmd_predict(args, image_path);
        if (evaluate->parsed()) return cmd_evaluate(args);
        if (ablate->parsed())
            return cmd_ablate(args, train_count, val_count, strength, seeds);
        if (gradcheck->parsed()) return cmd_gradcheck(args);
        if (synth->parsed())
            return cmd_synth(args, train_count, val_count, test_count, height, width, strength);
    } catch (const deepfix::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const deepfix::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const deepfix::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
