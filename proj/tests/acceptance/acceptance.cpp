// Acceptance runner. Exercises the shipped behavior end to end and prints one
// verdict line per check. Expects the CLI binary path as the only argument;
// scratch files go under the system temp directory.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "deepfix/deepfix.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace deepfix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, format);
    std::vsnprintf(buf, sizeof(buf), format, ap);
    va_end(ap);
    return buf;
}

struct Verdict {
    bool ok = false;
    std::string detail;
};

Map2D random_map(Rng& rng, int h, int w, real lo, real hi) {
    Map2D m(h, w);
    for (real& v : m.v) v = rng.uniform(lo, hi);
    return m;
}

Tensor random_tensor(Rng& rng, int n, int c, int h, int w) {
    Tensor t(n, c, h, w);
    for (real& v : t.v) v = rng.uniform();
    return t;
}

FixationSet random_fixations(Rng& rng, int h, int w, int count) {
    FixationSet fix;
    fix.height = h;
    fix.width = w;
    for (int i = 0; i < count; ++i)
        fix.points.push_back({rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1)});
    return fix;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- criterion 1: finite-difference gradients ------------------------------

Verdict criterion_gradients() {
    static_assert(sizeof(real) == 8, "gradients are checked in double precision");
    const auto t0 = Clock::now();
    const std::vector<CheckOutcome> outcomes = gradcheck_suite(1);
    const double elapsed = seconds_since(t0);

    bool all_ok = !outcomes.empty();
    real worst = 0;
    std::string failed;
    for (const CheckOutcome& o : outcomes) {
        if (!o.ok()) failed += (failed.empty() ? "" : ",") + o.name;
        all_ok = all_ok && o.ok();
        worst = std::max(worst, o.max_rel);
    }
    Verdict v;
    v.ok = all_ok && elapsed < 60.0;
    v.detail = fmt("%zu kernels, max_rel %.2e, %.1fs", outcomes.size(), worst, elapsed);
    if (!failed.empty()) v.detail += " failed: " + failed;
    return v;
}

// --- criterion 2: dilated receptive extents --------------------------------

Verdict criterion_receptive_extents() {
    const int e3 = probe_receptive_extent(3, 2);
    const int e5 = probe_receptive_extent(5, 6);
    Verdict v;
    v.ok = e3 == 5 && e5 == 25;
    v.detail = fmt("3-tap hole 2 covers %d, 5-tap hole 6 covers %d", e3, e5);
    return v;
}

// --- criterion 3: geometry through the network -----------------------------

Verdict criterion_geometry() {
    Network net(NetworkConfig::desk(), Variant::LBC);
    net.init_weights(7);
    Rng rng(31);
    const Tensor x = random_tensor(rng, 1, 3, 48, 64);
    const Tensor out = net.forward(x, false);
    const bool coarse_ok = out.n == 1 && out.c == 1 && out.h == 6 && out.w == 8;
    const Map2D up = bicubic_upsample(map_from_plane(out, 0, 0), 48, 64);
    Verdict v;
    v.ok = coarse_ok && up.height == 48 && up.width == 64;
    v.detail = fmt("48x64 -> %dx%d -> %dx%d", out.h, out.w, up.height, up.width);
    return v;
}

// --- criterion 4: location bias vs plain convolution -----------------------

Verdict criterion_location_bias() {
    ConvSpec spec;
    spec.kernel_h = spec.kernel_w = 5;
    spec.hole = 6;
    spec.pad = same_pad(5, 6);
    spec.in_channels = 3;
    spec.out_channels = 4;

    LBCLayer lbc("bias5", spec, default_variance_grid(), LrGroup::Fresh, 0.05);
    Rng rng(17);
    lbc.init_params(rng);

    // zeroed location weights must reproduce the plain convolution bit for bit
    ConvLayer plain("plain5", spec, true, LrGroup::Fresh, 0.05);
    plain.weights = lbc.weights;
    plain.bias = lbc.bias;
    const Tensor probe = random_tensor(rng, 2, 3, 48, 48);
    const Tensor saved_loc = lbc.loc_weights;
    lbc.loc_weights.fill(0);
    const bool matches_plain = lbc.forward(probe, false).v == plain.forward(probe, false).v;
    lbc.loc_weights = saved_loc;

    // a few descent steps toward a constant target leave the location weights
    // nonzero and genuinely trained
    for (int step = 0; step < 3; ++step) {
        Tensor out = lbc.forward(probe, true);
        Tensor target = Tensor::zeros_like(out);
        target.fill(1);
        const LossResult res = euclidean_loss(out, target);
        lbc.weight_grad.fill(0);
        lbc.loc_weight_grad.fill(0);
        std::fill(lbc.bias_grad.begin(), lbc.bias_grad.end(), real(0));
        lbc.backward(res.grad);
        for (size_t i = 0; i < lbc.weights.v.size(); ++i)
            lbc.weights.v[i] -= 0.05 * lbc.weight_grad.v[i];
        for (size_t i = 0; i < lbc.loc_weights.v.size(); ++i)
            lbc.loc_weights.v[i] -= 0.05 * lbc.loc_weight_grad.v[i];
        for (size_t i = 0; i < lbc.bias.size(); ++i) lbc.bias[i] -= 0.05 * lbc.bias_grad[i];
    }
    real loc_mag = 0;
    for (real w : lbc.loc_weights.v) loc_mag = std::max(loc_mag, std::abs(w));

    // shifted input pair; compare outputs on the region whose footprints stay
    // inside real data for both images
    const int size = 48, sy = 3, sx = 2, reach = spec.pad;
    const Tensor a = random_tensor(rng, 1, 3, size, size);
    Tensor b = Tensor::zeros_like(a);
    for (int c = 0; c < 3; ++c)
        for (int y = sy; y < size; ++y)
            for (int x = sx; x < size; ++x) b.at(0, c, y, x) = a.at(0, c, y - sy, x - sx);

    auto interior_gap = [&](const Tensor& oa, const Tensor& ob) {
        real gap = 0;
        for (int c = 0; c < spec.out_channels; ++c)
            for (int y = reach + sy; y < size - reach; ++y)
                for (int x = reach + sx; x < size - reach; ++x)
                    gap = std::max(gap,
                                   std::abs(ob.at(0, c, y, x) - oa.at(0, c, y - sy, x - sx)));
        return gap;
    };

    const real trained_gap = interior_gap(lbc.forward(a, false), lbc.forward(b, false));
    lbc.loc_weights.fill(0);
    const real zeroed_gap = interior_gap(lbc.forward(a, false), lbc.forward(b, false));

    Verdict v;
    v.ok = matches_plain && loc_mag > 0 && trained_gap > 1e-6 && zeroed_gap == 0;
    v.detail = fmt("zero-bias match %s, trained shift gap %.3g, zeroed shift gap %.3g",
                   matches_plain ? "exact" : "BROKEN", trained_gap, zeroed_gap);
    return v;
}

// --- criterion 5: metrics against brute-force references -------------------

Verdict criterion_metric_references() {
    const auto t0 = Clock::now();
    Rng rng(101);
    real worst = 0;
    for (int i = 0; i < 100; ++i) {
        const Map2D m = random_map(rng, 10, 10, 0, 1);
        const Map2D m2 = random_map(rng, 10, 10, 0, 1);
        const FixationSet fix = random_fixations(rng, 10, 10, 12);
        worst = std::max(worst, std::abs(nss(m, fix) - oracle::nss(m, fix)));
        worst = std::max(worst, std::abs(cc(m, m2) - oracle::cc(m, m2)));
        worst = std::max(worst, std::abs(sim(m, m2) - oracle::sim(m, m2)));
        worst = std::max(worst, std::abs(auc_judd(m, fix) - oracle::auc_judd(m, fix)));
    }
    real worst_emd = 0;
    for (int i = 0; i < 50; ++i) {
        const Map2D a = random_map(rng, 6, 6, 0.05, 1);
        const Map2D b = random_map(rng, 6, 6, 0.05, 1);
        worst_emd = std::max(worst_emd, std::abs(emd(a, b, 32) - oracle::emd(a, b, 32)));
    }
    const double elapsed = seconds_since(t0);
    Verdict v;
    v.ok = worst <= 1e-9 && worst_emd <= 1e-9 && elapsed < 300.0;
    v.detail = fmt("100 maps gap %.2e, 50 transport gaps %.2e, %.1fs", worst, worst_emd, elapsed);
    return v;
}

// --- criterion 6: anchor values and chance level ---------------------------

Verdict criterion_metric_anchors() {
    Map2D bump(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            const real dy = y - 9.5, dx = x - 9.5;
            bump.at(y, x) = std::exp(-(dy * dy + dx * dx) / 18.0);
        }
    const bool self_ok = std::abs(cc(bump, bump) - 1) <= 1e-12 &&
                         std::abs(sim(bump, bump) - 1) <= 1e-12 && emd(bump, bump, 32) == 0;

    Map2D pa(12, 12), pb(12, 12), pc(12, 12), pd(12, 12);
    pa.at(2, 3) = 1;
    pb.at(2, 8) = 1;
    pc.at(1, 1) = 1;
    pd.at(4, 5) = 1;
    const real axis = emd(pa, pb, 32);
    const real diag = emd(pc, pd, 32);
    const bool point_ok = std::abs(axis - 5.0) <= 1e-12 && std::abs(diag - 5.0) <= 1e-12;

    Rng rng(2024);
    const Map2D noise = random_map(rng, 64, 64, 0, 1);
    const FixationSet fix = random_fixations(rng, 64, 64, 1000);
    const real chance = auc_judd(noise, fix);
    const bool chance_ok = std::abs(chance - 0.5) <= 0.02;

    Verdict v;
    v.ok = self_ok && point_ok && chance_ok;
    v.detail = fmt("self cc/sim/emd %s, point emd %.3f and %.3f, chance auc %.3f",
                   self_ok ? "exact" : "BROKEN", axis, diag, chance);
    return v;
}

// --- criterion 7: blur degrades a sharp prediction -------------------------

Verdict criterion_blur_degrades() {
    Rng rng(55);
    FixationSet fix;
    fix.height = 48;
    fix.width = 64;
    for (int cluster = 0; cluster < 5; ++cluster) {
        const int cy = rng.uniform_int(8, 39), cx = rng.uniform_int(8, 55);
        for (int i = 0; i < 8; ++i) {
            const int y = std::clamp(cy + static_cast<int>(std::lround(rng.gaussian(0, 2))), 0, 47);
            const int x = std::clamp(cx + static_cast<int>(std::lround(rng.gaussian(0, 2))), 0, 63);
            fix.points.push_back({x, y});
        }
    }
    const Map2D truth = fixation_density(fix, 3.0);
    const Map2D sharp = truth;
    const Map2D blurred = minmax_normalize(gaussian_blur(sharp, 4.0));

    const real emd_sharp = emd(sharp, truth, 32);
    const real emd_blur = emd(blurred, truth, 32);
    const real nss_sharp = nss(sharp, fix);
    const real nss_blur = nss(blurred, fix);
    Rng ra(7), rb(7);
    const real borji_sharp = auc_borji(sharp, fix, 100, ra).mean;
    const real borji_blur = auc_borji(blurred, fix, 100, rb).mean;
    const real borji_gap = std::abs(borji_sharp - borji_blur);

    Verdict v;
    v.ok = emd_blur > emd_sharp && nss_blur < nss_sharp && borji_gap < 0.05;
    v.detail = fmt("emd %.3f->%.3f, nss %.3f->%.3f, auc gap %.3f", emd_sharp, emd_blur,
                   nss_sharp, nss_blur, borji_gap);
    return v;
}

// --- criterion 8: the three variants rank as expected ----------------------

Verdict criterion_variant_ranking(const fs::path& work) {
    AblationOptions opts;
    opts.train.iters = 400;
    opts.workdir = (work / "ablation").string();
    opts.keep_artifacts = false;
    opts.progress = &std::cout;

    const auto t0 = Clock::now();
    const AblationResult result = run_ablation(opts);
    const double elapsed = seconds_since(t0);
    write_ablation_report(std::cout, result);

    const VariantSummary& none = result.rows[0];
    const VariantSummary& cb = result.rows[1];
    const VariantSummary& lbc = result.rows[2];
    auto lowest_to_highest = [](real a, real b, real c) { return a < b && b < c; };
    const bool order_ok = lowest_to_highest(lbc.val_loss, cb.val_loss, none.val_loss) &&
                          lowest_to_highest(lbc.emd, cb.emd, none.emd) &&
                          lowest_to_highest(none.cc, cb.cc, lbc.cc) &&
                          lowest_to_highest(none.nss, cb.nss, lbc.nss);

    Verdict v;
    v.ok = order_ok && elapsed < 1800.0;
    v.detail = fmt("val_loss %.4f/%.4f/%.4f, nss %.3f/%.3f/%.3f, %.1f min",
                   lbc.val_loss, cb.val_loss, none.val_loss, lbc.nss, cb.nss, none.nss,
                   elapsed / 60.0);
    return v;
}

// --- criterion 9: a small set is memorized ---------------------------------

Verdict criterion_overfits_small_set(const fs::path& work) {
    SynthOptions sopts;
    sopts.train = 10;
    sopts.val = 0;
    sopts.test = 0;
    sopts.height = 48;
    sopts.width = 64;
    sopts.strength = 0.7;
    sopts.seed = 21;
    const Manifest manifest = generate_synthetic_dataset((work / "overfit").string(), sopts);

    Network net(NetworkConfig::desk(), Variant::LBC);
    net.init_weights(3);
    TrainOptions topts;
    topts.iters = 2000;
    topts.batch = 2;
    topts.seed = 3;

    const auto t0 = Clock::now();
    const TrainRun run = train_network(net, manifest, topts);
    const double elapsed = seconds_since(t0);

    Verdict v;
    v.ok = run.final_loss < 0.1 * run.initial_loss && elapsed < 600.0;
    v.detail = fmt("loss %.4f -> %.5f (%.1f%%) in %d iters, %.1f min", run.initial_loss,
                   run.final_loss, 100.0 * run.final_loss / run.initial_loss, run.iterations,
                   elapsed / 60.0);
    return v;
}

// --- criterion 10: the command line is bit-reproducible --------------------

Verdict criterion_cli_reproducible(const std::string& cli, const fs::path& work) {
    const fs::path dir = work / "cli";
    fs::create_directories(dir);
    const std::string data = (dir / "data").string();
    auto run_cli = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " >/dev/null";
        return std::system(cmd.c_str()) == 0;
    };

    if (!run_cli("synth --out " + data +
                 " --seed 9 --train-count 6 --val-count 2 --test-count 2"
                 " --height 48 --width 64 --strength 0.7"))
        throw DataError("synth invocation failed");

    const std::string manifest = data + "/manifest.tsv";
    const std::string w1 = (dir / "w1.dfx").string(), w2 = (dir / "w2.dfx").string();
    for (const std::string& out : {w1, w2})
        if (!run_cli("train --manifest " + manifest +
                     " --config desk --variant lbc --iters 25 --batch 2 --seed 4 --out " + out))
            throw DataError("train invocation failed");

    const std::string image = data + "/img_0008.ppm";
    const std::string p1 = (dir / "p1.pgm").string(), p2 = (dir / "p2.pgm").string();
    for (const std::string& out : {p1, p2})
        if (!run_cli("predict --weights " + w1 + " --image " + image + " --out " + out))
            throw DataError("predict invocation failed");

    const std::string e1 = (dir / "e1.tsv").string(), e2 = (dir / "e2.tsv").string();
    for (const std::string& out : {e1, e2})
        if (!run_cli("evaluate --weights " + w1 + " --manifest " + manifest +
                     " --seed 5 --emd-grid 12 --auc-splits 50 --out " + out))
            throw DataError("evaluate invocation failed");

    const std::string weights = read_file(w1);
    const bool weights_ok = !weights.empty() && weights == read_file(w2);
    const bool logs_ok = read_file(w1 + ".log") == read_file(w2 + ".log");
    const std::string pred = read_file(p1);
    const bool pred_ok = !pred.empty() && pred == read_file(p2) &&
                         read_file(p1 + ".heatmap.pgm") == read_file(p2 + ".heatmap.pgm");
    const std::string report = read_file(e1);
    const bool report_ok = !report.empty() && report == read_file(e2);

    Verdict v;
    v.ok = weights_ok && logs_ok && pred_ok && report_ok;
    v.detail = fmt("weights %s, logs %s, predictions %s, reports %s",
                   weights_ok ? "identical" : "DIFFER", logs_ok ? "identical" : "DIFFER",
                   pred_ok ? "identical" : "DIFFER", report_ok ? "identical" : "DIFFER");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <cli-binary>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path work = fs::temp_directory_path() / "deepfix_acceptance";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    struct Entry {
        int number;
        const char* what;
        std::function<Verdict()> check;
    };
    const std::vector<Entry> entries = {
        {1, "gradient checks pass for every layer and the full network",
         [] { return criterion_gradients(); }},
        {2, "probed receptive extents of the dilated kernels are exact",
         [] { return criterion_receptive_extents(); }},
        {3, "a 48x64 input gives a 6x8 response and a 48x64 upsampled map",
         [] { return criterion_geometry(); }},
        {4, "location bias off matches plain convolution, on breaks shift equivariance",
         [] { return criterion_location_bias(); }},
        {5, "metric implementations agree with brute-force references",
         [] { return criterion_metric_references(); }},
        {6, "metric anchor values are exact and chance-level auc is 0.5",
         [] { return criterion_metric_anchors(); }},
        {7, "blurring a sharp prediction degrades emd and nss but not roc area",
         [] { return criterion_blur_degrades(); }},
        {8, "trained variants rank location bias, center bias, then plain",
         [&work] { return criterion_variant_ranking(work); }},
        {9, "a ten-image training set is memorized within the iteration budget",
         [&work] { return criterion_overfits_small_set(work); }},
        {10, "training, prediction and evaluation are bit-reproducible",
         [&cli, &work] { return criterion_cli_reproducible(cli, work); }},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        Verdict v;
        try {
            v = e.check();
        } catch (const std::exception& ex) {
            v.ok = false;
            v.detail = std::string("exception: ") + ex.what();
        }
        std::cout << (v.ok ? "PASS" : "FAIL") << " criterion " << e.number << ": " << e.what;
        if (!v.detail.empty()) std::cout << " (" << v.detail << ")";
        std::cout << "\n" << std::flush;
        if (!v.ok) ++failures;
    }
    if (failures == 0)
        std::cout << "all " << entries.size() << " criteria passed\n";
    else
        std::cout << failures << " of " << entries.size() << " criteria failed\n";
    return failures == 0 ? 0 : 1;
}
