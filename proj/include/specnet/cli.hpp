#pragma once

#include <cstdio>
#include <filesystem>
#include <future>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specnet/checkpoint.hpp"
#include "specnet/dataset.hpp"
#include "specnet/errors.hpp"
#include "specnet/io.hpp"
#include "specnet/memory.hpp"
#include "specnet/network.hpp"
#include "specnet/optimizer.hpp"

namespace specnet {

enum class Command { Train, Eval, SweepBeta, Compare, Selftest };

// Exit-code contract, stable for scripting.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitData = 3,
    kExitNumericIntegrity = 4,
};

struct RunConfig {
    Command command = Command::Train;
    TrainConfig train;
    std::string data_dir;
    std::string out_dir = "out";
    std::string model_path;
    std::string mode = "spectral"; // spectral | spatial
    std::vector<double> beta_list = {0.5, 0.75, 1.0, 1.25, 1.5};
    std::string precision = "f64";
    double compare_tolerance = 1e-6;
};

// Pre-threshold |Y| RMS that calibration targets; keeps the paper's beta
// sweep range [0.5, 1.5] meaningful at desk scale.
inline constexpr double kCalibrationTargetRms = 0.5;
inline constexpr index_t kCalibrationBatch = 16;
inline constexpr index_t kDefaultSyntheticSamples = 384;
inline constexpr index_t kDefaultMnistSubset = 10000;

inline RunConfig parse_args(const std::vector<std::string>& args) {
    RunConfig cfg;
    CLI::App app{"SpecNet: spectral-domain convolutional blocks with sparse feature maps"};
    app.fallthrough();
    app.set_config("--config", "", "flat key = value config file");
    app.require_subcommand(1);

    app.add_option("--dataset", cfg.train.dataset, "mnist | cifar10 | synthetic")
        ->check(CLI::IsMember({"mnist", "cifar10", "synthetic"}));
    app.add_option("--data-dir", cfg.data_dir, "dataset root directory")
        ->envname("SPECNET_DATA_DIR");
    app.add_option("--beta", cfg.train.beta, "spectral magnitude threshold")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--beta-list", cfg.beta_list, "betas for sweep-beta");
    app.add_option("--epochs", cfg.train.epochs, "training epochs")
        ->check(CLI::PositiveNumber);
    app.add_option("--batch", cfg.train.batch_size, "batch size")
        ->check(CLI::PositiveNumber);
    app.add_option("--lr", cfg.train.initial_lr, "initial learning rate")
        ->check(CLI::PositiveNumber);
    app.add_option("--lr-period", cfg.train.lr_halving_period,
                   "epochs between learning-rate halvings")
        ->check(CLI::PositiveNumber);
    app.add_option("--momentum", cfg.train.momentum, "SGD momentum");
    app.add_option("--seed", cfg.train.seed, "run seed");
    app.add_option("--subset", cfg.train.subset, "cap on training samples (0 = all)");
    app.add_option("--out", cfg.out_dir, "output directory for CSV/checkpoint artifacts");
    app.add_option("--model", cfg.model_path, "checkpoint path (eval)");
    app.add_option("--mode", cfg.mode, "spectral | spatial execution mode")
        ->check(CLI::IsMember({"spectral", "spatial"}));
    app.add_option("--precision", cfg.precision, "f32 | f64 scalar precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--tolerance", cfg.compare_tolerance, "compare: max logit deviation")
        ->check(CLI::NonNegativeNumber);

    auto* train_cmd = app.add_subcommand("train", "train a model, emit metrics + checkpoint");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    auto* sweep_cmd = app.add_subcommand("sweep-beta", "memory/accuracy trade-off over betas");
    auto* compare_cmd =
        app.add_subcommand("compare", "spectral vs spatial logit equivalence at beta=0");
    auto* selftest_cmd = app.add_subcommand("selftest", "run the numeric oracle suites");

    std::vector<const char*> argv;
    argv.push_back("specnet");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        std::puts(app.help().c_str());
        throw;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    if (train_cmd->parsed()) cfg.command = Command::Train;
    if (eval_cmd->parsed()) cfg.command = Command::Eval;
    if (sweep_cmd->parsed()) cfg.command = Command::SweepBeta;
    if (compare_cmd->parsed()) cfg.command = Command::Compare;
    if (selftest_cmd->parsed()) cfg.command = Command::Selftest;

    if (cfg.command == Command::SweepBeta && cfg.beta_list.empty())
        throw UsageError("sweep-beta: --beta-list must not be empty");
    for (double b : cfg.beta_list)
        if (!(b >= 0.0)) throw UsageError("sweep-beta: betas must be >= 0");
    cfg.train.validate();
    return cfg;
}

// ---------------------------------------------------------------------------

namespace cli_detail {

inline ModelSpec spec_lenet_mini(RunMode mode, index_t rows, index_t cols, index_t channels,
                                 index_t classes) {
    ModelSpec spec;
    spec.mode = mode;
    spec.input_rows = rows;
    spec.input_cols = cols;
    spec.input_channels = channels;
    spec.num_classes = classes;
    spec.layers = {LayerDesc::conv(8, 3),  LayerDesc::pool(),
                   LayerDesc::conv(16, 3), LayerDesc::to_spatial(),
                   LayerDesc::flatten(),   LayerDesc::dense(classes)};
    return spec;
}

inline ModelSpec spec_single_conv(RunMode mode, index_t rows, index_t cols, index_t channels,
                                  index_t classes) {
    ModelSpec spec;
    spec.mode = mode;
    spec.input_rows = rows;
    spec.input_cols = cols;
    spec.input_channels = channels;
    spec.num_classes = classes;
    spec.layers = {LayerDesc::conv(4, 3), LayerDesc::to_spatial(), LayerDesc::flatten(),
                   LayerDesc::dense(classes)};
    return spec;
}

template <typename Real>
struct DatasetBundle {
    LabeledImageSet<Real> train;
    LabeledImageSet<Real> test;
    ChannelStats stats;
};

template <typename Real>
LabeledImageSet<Real> truncate(LabeledImageSet<Real> set, index_t n) {
    if (n > 0 && set.size() > n) {
        set.images.resize(n);
        set.labels.resize(n);
    }
    return set;
}

template <typename Real>
DatasetBundle<Real> load_dataset(const RunConfig& cfg, bool apply_standardization = true) {
    namespace fs = std::filesystem;
    DatasetBundle<Real> out;
    if (cfg.train.dataset == "synthetic") {
        const index_t total =
            cfg.train.subset > 0 ? std::max<index_t>(cfg.train.subset, 3) : kDefaultSyntheticSamples;
        auto all = synthetic_shapes<Real>(total, cfg.train.seed);
        auto [train, test] = split_train_test(all, 1.0 / 3.0);
        out.train = std::move(train);
        out.test = std::move(test);
    } else if (cfg.train.dataset == "mnist") {
        if (cfg.data_dir.empty())
            throw DataError("mnist: pass --data-dir or set SPECNET_DATA_DIR");
        const fs::path root(cfg.data_dir);
        out.train = truncate(load_idx<Real>((root / "train-images-idx3-ubyte").string(),
                                            (root / "train-labels-idx1-ubyte").string()),
                             cfg.train.subset > 0 ? cfg.train.subset : kDefaultMnistSubset);
        out.test = truncate(load_idx<Real>((root / "t10k-images-idx3-ubyte").string(),
                                           (root / "t10k-labels-idx1-ubyte").string()),
                            2000);
    } else {
        if (cfg.data_dir.empty())
            throw DataError("cifar10: pass --data-dir or set SPECNET_DATA_DIR");
        const fs::path root(cfg.data_dir);
        out.train = truncate(load_cifar_bin<Real>((root / "data_batch_1.bin").string()),
                             cfg.train.subset > 0 ? cfg.train.subset : 2000);
        out.test = truncate(load_cifar_bin<Real>((root / "test_batch.bin").string()), 1000);
    }
    out.stats = compute_channel_stats(out.train);
    if (apply_standardization) {
        standardize(out.train, out.stats);
        standardize(out.test, out.stats);
    }
    return out;
}

template <typename Real>
std::vector<std::vector<DenseReal<Real>>> calibration_batch(const LabeledImageSet<Real>& set) {
    std::vector<std::vector<DenseReal<Real>>> out;
    for (index_t s = 0; s < std::min<index_t>(kCalibrationBatch, set.size()); ++s)
        out.push_back(set.images[s]);
    return out;
}

template <typename Real>
Model<Real> build_ready_model(const ModelSpec& spec, Real beta, std::uint64_t seed,
                              const LabeledImageSet<Real>& train) {
    auto model = build_model<Real>(spec, beta);
    std::mt19937_64 gen(seed);
    init_params(model, gen);
    calibrate_model_scale(model, calibration_batch(train),
                          static_cast<Real>(kCalibrationTargetRms));
    return model;
}

template <typename Real>
int run_train(const RunConfig& cfg) {
    auto data = load_dataset<Real>(cfg);
    const RunMode mode = cfg.mode == "spectral" ? RunMode::Spectral : RunMode::SpatialBaseline;
    auto spec = spec_lenet_mini(mode, data.train.rows, data.train.cols, data.train.channels,
                                data.train.num_classes);
    auto model = build_ready_model<Real>(spec, static_cast<Real>(cfg.train.beta),
                                         cfg.train.seed, data.train);
    auto report = train(model, cfg.train, data.train, data.test);

    namespace fs = std::filesystem;
    const fs::path out(cfg.out_dir);
    atomic_write_file(out / "metrics.csv", metrics_csv(report.rows));
    atomic_write_file(out / "ledger.csv", ledger_csv(report.ledger));
    save_checkpoint(out / "model.ckpt", model, data.stats);
    std::printf("train: mode=%s beta=%s final train_acc=%.4f test_acc=%.4f -> %s\n",
                to_string(mode), format_double(cfg.train.beta).c_str(),
                report.final_train_accuracy, report.final_test_accuracy,
                out.string().c_str());
    return kExitOk;
}

template <typename Real>
int run_eval(const RunConfig& cfg) {
    if (cfg.model_path.empty()) throw UsageError("eval: --model checkpoint path required");
    auto loaded = load_checkpoint<Real>(cfg.model_path);
    auto data = load_dataset<Real>(cfg, false);
    // Normalization statistics travel with the checkpoint (training split).
    const ChannelStats& stats = loaded.stats.mean.empty() ? data.stats : loaded.stats;
    standardize(data.test, stats);
    auto [loss, acc] = train_detail::evaluate(loaded.model, data.test);
    std::printf("eval: samples=%zu loss=%.6f accuracy=%.4f\n",
                static_cast<std::size_t>(data.test.size()), loss, acc);
    return kExitOk;
}

// Trains one spectral run for the given beta with the shared seed/schedule.
template <typename Real>
RunReport sweep_point(const RunConfig& cfg, const DatasetBundle<Real>& data, double beta) {
    auto spec = spec_lenet_mini(RunMode::Spectral, data.train.rows, data.train.cols,
                                data.train.channels, data.train.num_classes);
    auto model =
        build_ready_model<Real>(spec, static_cast<Real>(beta), cfg.train.seed, data.train);
    TrainConfig tc = cfg.train;
    tc.beta = beta;
    return train(model, tc, data.train, data.test);
}

template <typename Real>
int run_sweep(const RunConfig& cfg) {
    auto data = load_dataset<Real>(cfg);
    namespace fs = std::filesystem;
    const fs::path out(cfg.out_dir);

    auto base_spec = spec_lenet_mini(RunMode::SpatialBaseline, data.train.rows,
                                     data.train.cols, data.train.channels,
                                     data.train.num_classes);
    auto base_model = build_ready_model<Real>(base_spec, Real(0), cfg.train.seed, data.train);
    TrainConfig base_cfg = cfg.train;
    base_cfg.beta = 0.0;
    auto base_report = train(base_model, base_cfg, data.train, data.test);
    atomic_write_file(out / "metrics_baseline.csv", metrics_csv(base_report.rows));
    const double base_acc = data.test.size() > 0 ? base_report.final_test_accuracy
                                                 : base_report.final_train_accuracy;

    // Beta points are independent (isolated ledgers, identical seeding), so
    // they run concurrently.
    std::vector<std::future<RunReport>> futures;
    futures.reserve(cfg.beta_list.size());
    for (double beta : cfg.beta_list)
        futures.push_back(std::async(std::launch::async,
                                     [&, beta] { return sweep_point<Real>(cfg, data, beta); }));

    std::string summary = "beta,avg_ratio,peak_ratio,final_accuracy_ratio\n";
    for (index_t i = 0; i < cfg.beta_list.size(); ++i) {
        const double beta = cfg.beta_list[i];
        auto report = futures[i].get();
        const auto ratios = relative_memory(report.ledger, base_report.ledger);
        const double acc = data.test.size() > 0 ? report.final_test_accuracy
                                                : report.final_train_accuracy;
        const double acc_ratio = base_acc > 0 ? acc / base_acc : 0.0;
        summary += format_double(beta) + ',' + format_double(ratios.avg_ratio) + ',' +
                   format_double(ratios.peak_ratio) + ',' + format_double(acc_ratio) + '\n';
        std::printf("sweep beta=%.3f: avg_ratio=%.4f peak_ratio=%.4f acc_ratio=%.4f\n", beta,
                    ratios.avg_ratio, ratios.peak_ratio, acc_ratio);
        char name[64];
        std::snprintf(name, sizeof(name), "metrics_beta_%g.csv", beta);
        atomic_write_file(out / name, metrics_csv(report.rows));
    }
    atomic_write_file(out / "sweep_summary.csv", summary);
    std::printf("sweep: wrote %s\n", (out / "sweep_summary.csv").string().c_str());
    return kExitOk;
}

template <typename Real>
int run_compare(const RunConfig& cfg) {
    auto data = load_dataset<Real>(cfg);
    auto spec_s = spec_single_conv(RunMode::Spectral, data.train.rows, data.train.cols,
                                   data.train.channels, data.train.num_classes);
    auto spectral = build_ready_model<Real>(spec_s, Real(0), cfg.train.seed, data.train);
    auto spec_b = spec_single_conv(RunMode::SpatialBaseline, data.train.rows, data.train.cols,
                                   data.train.channels, data.train.num_classes);
    auto baseline = build_model<Real>(spec_b, Real(0));
    baseline.convs = spectral.convs; // identical weights; shapes match for single conv
    baseline.dense = spectral.dense;

    const auto& probe = data.test.size() > 0 ? data.test : data.train;
    double max_dev = 0.0;
    const index_t n = std::min<index_t>(32, probe.size());
    for (index_t s = 0; s < n; ++s) {
        auto a = model_forward(spectral, probe.images[s], false);
        auto b = model_forward(baseline, probe.images[s], false);
        for (index_t i = 0; i < a.logits.size(); ++i)
            max_dev = std::max(max_dev,
                               static_cast<double>(std::abs(a.logits[i] - b.logits[i])));
    }
    std::printf("compare: %zu samples, max logit deviation = %.3e (tolerance %.1e)\n",
                static_cast<std::size_t>(n), max_dev, cfg.compare_tolerance);
    if (max_dev > cfg.compare_tolerance) {
        std::printf("compare: FAIL\n");
        return kExitNumericIntegrity;
    }
    std::printf("compare: PASS\n");
    return kExitOk;
}

// Compact oracle suites; always runs in 64-bit scalars.
int run_selftest();

} // namespace cli_detail

inline int run(const RunConfig& cfg) {
    if (cfg.command == Command::Selftest) return cli_detail::run_selftest();
    if (cfg.precision == "f32") {
        switch (cfg.command) {
        case Command::Train: return cli_detail::run_train<float>(cfg);
        case Command::Eval: return cli_detail::run_eval<float>(cfg);
        case Command::SweepBeta: return cli_detail::run_sweep<float>(cfg);
        case Command::Compare: return cli_detail::run_compare<float>(cfg);
        default: break;
        }
    } else {
        switch (cfg.command) {
        case Command::Train: return cli_detail::run_train<double>(cfg);
        case Command::Eval: return cli_detail::run_eval<double>(cfg);
        case Command::SweepBeta: return cli_detail::run_sweep<double>(cfg);
        case Command::Compare: return cli_detail::run_compare<double>(cfg);
        default: break;
        }
    }
    throw UsageError("unknown command");
}

namespace cli_detail {

inline int run_selftest() {
    int failures = 0;
    auto report = [&](const char* name, bool ok) {
        std::printf("selftest %-10s %s\n", name, ok ? "PASS" : "FAIL");
        if (!ok) ++failures;
    };
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    auto random_map = [&](index_t r, index_t c) {
        DenseReal<double> m(r, c);
        for (auto& v : m.data) v = dist(gen);
        return m;
    };

    // FFT vs direct DFT and round trip.
    {
        bool ok = true;
        for (int t = 0; t < 30 && ok; ++t) {
            const index_t r = 1 + static_cast<index_t>(gen() % 16);
            const index_t c = 1 + static_cast<index_t>(gen() % 16);
            auto x = random_map(r, c);
            auto fast = fft2d(x);
            auto ref = dft2d_reference(x);
            double scale = 1e-30, err = 0;
            for (index_t i = 0; i < fast.data.size(); ++i) {
                scale = std::max(scale, std::abs(ref.data[i]));
                err = std::max(err, std::abs(fast.data[i] - ref.data[i]));
            }
            if (err > 1e-10 * std::max(scale, 1.0)) ok = false;
            auto back = ifft2d(fast);
            for (index_t i = 0; i < back.data.size(); ++i)
                if (std::abs(back.data[i] - std::complex<double>(x.data[i], 0)) > 1e-10)
                    ok = false;
        }
        report("fft", ok);
    }

    // Convolution theorem at beta = 0.
    {
        bool ok = true;
        for (int t = 0; t < 20 && ok; ++t) {
            auto x = random_map(4 + t % 8, 5 + t % 7);
            auto k = random_map(3, 3);
            SpecConvLayer<double> layer(1, 1, 3, Beta<double>(0.0));
            layer.kernel(0, 0) = k;
            auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, layer);
            auto got = ifft2d(densify(r.cache.Yhat[0]));
            auto want = spatial_conv_reference(x, k);
            for (index_t i = 0; i < want.data.size(); ++i)
                if (std::abs(got.data[i].real() - want.data[i]) > 1e-8) ok = false;
        }
        report("conv", ok);
    }

    // Finite-difference gradient on a tiny model, both modes.
    {
        bool ok = true;
        for (RunMode mode : {RunMode::Spectral, RunMode::SpatialBaseline}) {
            ModelSpec spec;
            spec.mode = mode;
            spec.input_rows = 6;
            spec.input_cols = 6;
            spec.input_channels = 1;
            spec.num_classes = 2;
            spec.layers = {LayerDesc::conv(2, 3), LayerDesc::to_spatial(),
                           LayerDesc::flatten(), LayerDesc::dense(2)};
            auto model = build_model<double>(spec, 0.0);
            std::mt19937_64 g2(5);
            init_params(model, g2);
            auto x = random_map(6, 6);
            auto loss_of = [&]() {
                auto fwd = model_forward(model, {x}, false);
                return static_cast<double>(softmax_xent(fwd.logits, index_t(1)).loss);
            };
            auto fwd = model_forward(model, {x});
            auto sx = softmax_xent(fwd.logits, index_t(1));
            auto grads = model_backward(model, fwd.trace, sx.grad);
            auto params = param_tensors(model);
            auto gspans = grad_tensors(grads);
            const double h = 1e-5;
            for (index_t t = 0; t < params.size(); ++t)
                for (index_t i = 0; i < params[t].size(); i += 7) {
                    const double saved = params[t][i];
                    params[t][i] = saved + h;
                    const double lp = loss_of();
                    params[t][i] = saved - h;
                    const double lm = loss_of();
                    params[t][i] = saved;
                    const double fd = (lp - lm) / (2 * h);
                    const double an = gspans[t][i];
                    if (std::abs(fd - an) > 1e-4 * std::max({1e-6, std::abs(fd), std::abs(an)}))
                        ok = false;
                }
        }
        report("gradient", ok);
    }

    // Conjugate symmetry after conv + threshold + activation.
    {
        bool ok = true;
        for (double beta : {0.0, 0.5, 1.0, 1.5}) {
            auto x = random_map(6, 7);
            auto k = random_map(3, 3);
            SpecConvLayer<double> layer(1, 1, 3, Beta<double>(beta));
            layer.kernel(0, 0) = k;
            auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, layer);
            if (!check_hermitian(densify(r.Z[0]), 1e-9)) ok = false;
            auto spatial = to_spatial(r.Z[0]); // throws on residue > 1e-6
            (void)spatial;
        }
        report("symmetry", ok);
    }

    return failures == 0 ? kExitOk : kExitNumericIntegrity;
}

} // namespace cli_detail

} // namespace specnet
