#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "msseg/config.hpp"
#include "msseg/gradcheck.hpp"
#include "msseg/io.hpp"
#include "msseg/metrics.hpp"
#include "msseg/multigrid.hpp"
#include "msseg/training.hpp"

namespace fs = std::filesystem;
using namespace msseg;

namespace {

// .mstn inputs may carry several feature channels; anything else is an image.
Tensor read_input(const fs::path& path) {
    if (path.extension() != ".mstn") return read_image(path);
    Tensor t = load_tensor(path);
    if (t.rank() == 2) return t.reshaped({1, t.dim(0), t.dim(1)});
    if (t.rank() != 3) throw std::invalid_argument(path.string() + ": expected a rank 2 or 3 tensor");
    return t;
}

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void write_trace(const std::vector<double>& trace, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    char buf[64];
    for (double e : trace) {
        std::snprintf(buf, sizeof buf, "%.17g\n", e);
        out << buf;
    }
}

struct SegmentArgs {
    std::string input, config, mode, output, trace;
};

int run_segment(const SegmentArgs& a) {
    const RunConfig cfg = config_from(a.config);
    const std::string mode = a.mode.empty() ? cfg.mode : a.mode;
    const Tensor f = read_input(a.input);
    const bool want_trace = !a.trace.empty();
    SolverState state{Tensor(), LabelField::uniform(1, 1, 1), Tensor(), 0, {}};

    if (mode == "admm") {
        SolverConfig sc;
        sc.params = cfg.energy();
        sc.classes = cfg.classes;
        sc.iterations = cfg.iters;
        sc.record_energy = want_trace;
        state = admm_segment(f, sc);
    } else if (mode == "multigrid") {
        MgConfig mc;
        mc.params = cfg.energy();
        mc.classes = cfg.classes;
        mc.grids = cfg.grids;
        mc.smoothing.assign(cfg.grids, cfg.th);
        state = initial_state(f, mc.solver_config());
        const GaussianKernel k(cfg.sigma);
        for (int c = 0; c < cfg.iters; ++c) {
            const LabelField prev = state.v;
            state = v_cycle(std::move(state), mc);
            if (want_trace)
                state.energy_trace.push_back(
                    energy_terms(state.u, state.v, state.f_hat, prev, *mc.op_at(1), mc.params, k).total());
        }
    } else {
        throw std::invalid_argument("unknown mode '" + mode + "' (expected admm or multigrid)");
    }
    write_mask(state.v.values(), a.output);
    if (want_trace) write_trace(state.energy_trace, a.trace);
    return 0;
}

std::vector<Sample> load_directory(const fs::path& dir, std::size_t classes) {
    const fs::path images = dir / "images", masks = dir / "masks";
    if (!fs::is_directory(images) || !fs::is_directory(masks))
        throw std::runtime_error(dir.string() + " must contain images/ and masks/ subdirectories");
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(images))
        if (e.is_regular_file()) names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("no images in " + images.string());
    std::vector<Sample> out;
    for (const auto& n : names) {
        Sample s{read_image(images / n), read_mask(masks / n, classes)};
        if (s.image.height() != s.label.height() || s.image.width() != s.label.width())
            throw std::runtime_error("image and mask extents differ for " + n.string());
        out.push_back(std::move(s));
    }
    return out;
}

struct TrainArgs {
    std::string data, config, out;
    std::size_t synthetic = 0, size = 64;
};

int run_train(const TrainArgs& a, int threads) {
    const RunConfig cfg = config_from(a.config);
    if (a.data.empty() && a.synthetic == 0) throw std::invalid_argument("train needs --data or --synthetic");
    const std::vector<Sample> data =
        a.synthetic ? synth_dataset(cfg.seed, a.synthetic, a.size, 0.1, cfg.classes) : load_directory(a.data, cfg.classes);

    MsnetHyper hyper;
    hyper.features = cfg.features;
    hyper.classes = cfg.classes;
    hyper.grids = cfg.grids;
    MsnetParams params = init_params(cfg.seed, hyper);
    AdamConfig ac;
    ac.lr = cfg.lr;
    ac.decay = cfg.lr_decay;
    ac.interval = cfg.lr_interval;
    OptimizerState opt = make_optimizer(params, ac);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch = cfg.batch;
    tc.threads = threads;
    tc.on_step = [](std::size_t step, double loss) {
        if (step % 10 == 0) std::printf("step %zu loss %.6f\n", step, loss);
    };
    const auto curve = train(params, data, tc, opt);
    save_params(params, a.out);
    if (!curve.empty()) std::printf("trained %zu steps, final loss %.6f\n", curve.size(), curve.back());
    return 0;
}

int run_infer(const std::string& weights, const std::string& input, const std::string& output) {
    const MsnetParams params = load_params(weights);
    write_mask(msnet_predict(read_input(input), params), output);
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_path, std::size_t classes) {
    const Tensor pred = read_mask(pred_path, classes), gt = read_mask(gt_path, classes);
    const EvaluationReport r = evaluate(pred, gt);
    auto asd_text = [](bool defined, double v) {
        char buf[32];
        if (!defined || std::isnan(v)) return std::string("n/a");
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    std::printf("%-6s %-8s %-8s %-8s %s\n", "class", "Acc", "IoU", "DSC", "ASD");
    for (std::size_t n = 0; n < r.classes.size(); ++n) {
        const ClassReport& c = r.classes[n];
        std::printf("%-6zu %.4f   %.4f   %.4f   %s\n", n, c.accuracy, c.iou, c.dsc,
                    asd_text(c.asd_defined, c.asd).c_str());
    }
    std::printf("%-6s %.4f   %.4f   %.4f   %s\n", "macro", r.accuracy, r.iou, r.dsc,
                asd_text(r.asd_classes > 0, r.asd).c_str());
    return 0;
}

int run_gradcheck(std::uint64_t seed, const MsnetHyper& hyper, std::size_t size) {
    const GradCheckResult r = gradient_check(seed, hyper, size);
    std::printf("checked %zu parameters: max relative error %.3e, max absolute error %.3e (worst %s)\n", r.checked,
                r.max_relative, r.max_absolute, r.worst.c_str());
    return 0;
}

int run_perimeter(double radius, std::size_t size, const std::vector<double>& sigmas) {
    if (!(radius > 0.0) || size == 0) throw std::invalid_argument("radius and size must be positive");
    Tensor v({2, size, size});
    const double c = static_cast<double>(size) / 2.0;
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = y + 0.5 - c, dx = x + 0.5 - c;
            const bool in = dx * dx + dy * dy <= radius * radius;
            v.at(1, y, x) = in;
            v.at(0, y, x) = !in;
        }
    const LabelField field(v);
    const Tensor e = Tensor::ones({1, size, size});
    const double target = 2.0 * std::numbers::pi * radius;
    std::printf("target 2*pi*R = %.2f\n", target);
    // Three scalings of the same TD value: the literal sqrt(pi/sigma) factor,
    // that factor for a single boundary (TD counts both phases), and the
    // single-boundary value with the kernel width divided out.
    std::printf("%-7s %-12s %-16s %-16s %s\n", "sigma", "TD", "sqrt(pi/s)*TD", "per-boundary", "width-scaled");
    for (double s : sigmas) {
        const double td = td_regularizer(field, GaussianKernel(s), e, 1.0);
        const double full = std::sqrt(std::numbers::pi / s) * td;
        const double half = full / 2.0;
        const double scaled = std::sqrt(2.0 * std::numbers::pi) / s * td / 2.0;
        auto cell = [&](double x) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f (%.1f%%)", x, 100.0 * std::abs(x - target) / target);
            return std::string(buf);
        };
        std::printf("%-7g %-12.4f %-16s %-16s %s\n", s, td, cell(full).c_str(), cell(half).c_str(),
                    cell(scaled).c_str());
    }
    return 0;
}

int run_params(const MsnetHyper& hyper) {
    const MsnetParams p = init_params(0, hyper);
    std::printf("parameters %zu\n", p.parameter_count());
    std::printf("used by the forward pass %zu\n", p.active_parameter_count());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multigrid Mumford-Shah segmentation: classical solvers and the unrolled network"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "OpenMP threads for kernels and batch members")->check(CLI::PositiveNumber);

    SegmentArgs seg;
    auto* segment = app.add_subcommand("segment", "segment an image with the variational solver");
    segment->add_option("--input", seg.input, "image (PGM/PPM) or feature tensor (.mstn)")->required();
    segment->add_option("--config", seg.config, "run configuration");
    segment->add_option("--mode", seg.mode, "admm or multigrid (overrides the config)")
        ->check(CLI::IsMember({"admm", "multigrid"}));
    segment->add_option("--output", seg.output, "output class-index mask (PGM)")->required();
    segment->add_option("--energy-trace", seg.trace, "write the energy after every iteration");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train the network");
    train_cmd->add_option("--data", tr.data, "directory with images/ and masks/");
    train_cmd->add_option("--config", tr.config, "run configuration");
    train_cmd->add_option("--out", tr.out, "weights file to write")->required();
    train_cmd->add_option("--synthetic", tr.synthetic, "train on this many generated samples instead of --data");
    train_cmd->add_option("--size", tr.size, "extent of generated samples")->capture_default_str();

    std::string weights, infer_in, infer_out;
    auto* infer = app.add_subcommand("infer", "segment an image with trained weights");
    infer->add_option("--weights", weights)->required();
    infer->add_option("--input", infer_in)->required();
    infer->add_option("--output", infer_out)->required();

    std::string pred, gt;
    std::size_t classes = 2;
    auto* eval = app.add_subcommand("eval", "compare a predicted mask with ground truth");
    eval->add_option("--pred", pred)->required();
    eval->add_option("--gt", gt)->required();
    eval->add_option("--classes", classes)->required()->check(CLI::PositiveNumber);

    std::uint64_t seed = 0;
    MsnetHyper small;
    small.features = 2;
    small.classes = 2;
    small.grids = 2;
    std::size_t check_size = 16;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of network gradients");
    gradcheck->add_option("--seed", seed)->required();
    gradcheck->add_option("--features", small.features)->capture_default_str();
    gradcheck->add_option("--classes", small.classes)->capture_default_str();
    gradcheck->add_option("--grids", small.grids)->capture_default_str();
    gradcheck->add_option("--size", check_size)->capture_default_str();

    double radius = 40.0;
    std::size_t size = 256;
    std::vector<double> sigmas;
    auto* perimeter = app.add_subcommand("perimeter", "threshold-dynamics length of a disk");
    perimeter->add_option("--radius", radius)->required();
    perimeter->add_option("--size", size)->required();
    perimeter->add_option("--sigma", sigmas, "comma separated kernel widths")->required()->delimiter(',');

    MsnetHyper hyper;
    auto* params = app.add_subcommand("params", "print the network parameter count");
    params->add_option("--features", hyper.features)->capture_default_str();
    params->add_option("--classes", hyper.classes)->capture_default_str();
    params->add_option("--grids", hyper.grids)->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    omp_set_num_threads(threads);

    try {
        if (*segment) return run_segment(seg);
        if (*train_cmd) return run_train(tr, threads);
        if (*infer) return run_infer(weights, infer_in, infer_out);
        if (*eval) return run_eval(pred, gt, classes);
        if (*gradcheck) return run_gradcheck(seed, small, check_size);
        if (*perimeter) return run_perimeter(radius, size, sigmas);
        if (*params) return run_params(hyper);
    } catch (const std::exception& e) {
        std::cerr << "msseg: error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
