#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "specnet/dataset.hpp"
#include "specnet/errors.hpp"
#include "specnet/io.hpp"
#include "specnet/memory.hpp"
#include "specnet/network.hpp"

namespace specnet {

struct TrainConfig {
    index_t batch_size = 32;
    double initial_lr = 0.02;
    index_t lr_halving_period = 50; // epochs
    double momentum = 0.95;
    index_t epochs = 30;
    double beta = 1.0;
    std::uint64_t seed = 1;
    std::string dataset = "synthetic";
    index_t subset = 0; // 0 = all samples

    void validate() const {
        if (batch_size < 1 || epochs < 1 || lr_halving_period < 1)
            throw UsageError("TrainConfig: counts must be positive");
        if (!(initial_lr > 0.0)) throw UsageError("TrainConfig: lr must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw UsageError("TrainConfig: momentum must be in [0,1)");
        if (!(beta >= 0.0)) throw UsageError("TrainConfig: beta must be >= 0");
    }
};

// initial_lr * 0.5^floor(epoch / period): halved every `period` epochs.
inline double lr_at_epoch(const TrainConfig& cfg, index_t epoch) {
    return cfg.initial_lr * std::pow(0.5, static_cast<double>(epoch / cfg.lr_halving_period));
}

template <typename Real>
struct SgdState {
    std::vector<std::vector<Real>> velocity;
    Real momentum = Real(0);
    Real current_lr = Real(0);

    template <typename Spans>
    static SgdState zeros_like(const Spans& params, Real momentum) {
        SgdState s;
        s.momentum = momentum;
        s.velocity.reserve(params.size());
        for (const auto& p : params) s.velocity.emplace_back(p.size(), Real(0));
        return s;
    }
};

// Classical momentum: v <- mu*v - lr*g; w <- w + v.
template <typename Real>
void sgd_momentum_step(std::vector<std::span<Real>>& params,
                       const std::vector<std::span<const Real>>& grads,
                       SgdState<Real>& state, Real lr) {
    if (params.size() != grads.size() || params.size() != state.velocity.size())
        throw DimensionError("sgd_momentum_step: tensor count mismatch");
    state.current_lr = lr;
    for (index_t t = 0; t < params.size(); ++t) {
        if (params[t].size() != grads[t].size() ||
            params[t].size() != state.velocity[t].size())
            throw DimensionError("sgd_momentum_step: tensor shape mismatch");
        auto& v = state.velocity[t];
        for (index_t i = 0; i < params[t].size(); ++i) {
            v[i] = state.momentum * v[i] - lr * grads[t][i];
            params[t][i] += v[i];
        }
    }
}

struct EpochRow {
    index_t epoch = 0;
    std::string phase; // train | test
    double loss = 0.0;
    double accuracy = 0.0;
    double avg_feature_bytes = 0.0;
    std::uint64_t peak_feature_bytes = 0;
    double lr = 0.0;
    double beta = 0.0;
};

inline std::string metrics_csv(const std::vector<EpochRow>& rows) {
    std::string out = "epoch,phase,loss,accuracy,avg_feature_bytes,peak_feature_bytes,lr,beta\n";
    for (const auto& r : rows) {
        out += std::to_string(r.epoch) + ',' + r.phase + ',' + format_double(r.loss) + ',' +
               format_double(r.accuracy) + ',' + format_double(r.avg_feature_bytes) + ',' +
               std::to_string(r.peak_feature_bytes) + ',' + format_double(r.lr) + ',' +
               format_double(r.beta) + '\n';
    }
    return out;
}

inline std::string ledger_csv(const MemLedger& ledger) {
    std::string out = "step,layer,mode,bytes\n";
    for (const auto& e : ledger.events())
        out += std::to_string(e.step) + ',' + e.layer + ',' + to_string(e.mode) + ',' +
               std::to_string(e.bytes) + '\n';
    return out;
}

struct RunReport {
    std::vector<EpochRow> rows;
    MemLedger ledger;
    double final_train_accuracy = 0.0;
    double final_test_accuracy = 0.0;
    double final_train_loss = 0.0;
};

namespace train_detail {

inline std::string layer_tag(LayerKind kind, index_t li) {
    const char* name = "layer";
    switch (kind) {
    case LayerKind::SpecConv: name = "conv"; break;
    case LayerKind::SpectralPool: name = "pool"; break;
    case LayerKind::ToSpatial: name = "to_spatial"; break;
    case LayerKind::Flatten: name = "flatten"; break;
    case LayerKind::Dense: name = "dense"; break;
    case LayerKind::ActivationSpatial: name = "act"; break;
    }
    return name + std::to_string(li);
}

template <typename Real>
index_t argmax(const std::vector<Real>& v) {
    return static_cast<index_t>(
        std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

template <typename Real>
std::pair<double, double> evaluate(const Model<Real>& model,
                                   const LabeledImageSet<Real>& set) {
    double loss = 0.0;
    index_t correct = 0;
    for (index_t s = 0; s < set.size(); ++s) {
        auto fwd = model_forward(model, set.images[s], false);
        loss += static_cast<double>(softmax_xent(fwd.logits, set.labels[s]).loss);
        if (argmax(fwd.logits) == set.labels[s]) ++correct;
    }
    const double n = std::max<double>(1.0, static_cast<double>(set.size()));
    return {loss / n, static_cast<double>(correct) / n};
}

} // namespace train_detail

// Deterministic training loop: init order, shuffling and batch order all
// derive from mt19937_64 seeded with cfg.seed. One epoch row per phase; the
// memory columns aggregate the ledger over that epoch's training steps.
template <typename Real>
RunReport train(Model<Real>& model, const TrainConfig& cfg,
                const LabeledImageSet<Real>& train_set,
                const LabeledImageSet<Real>& test_set) {
    cfg.validate();
    if (train_set.size() == 0) throw UsageError("train: empty training set");
    if (train_set.rows != model.spec.input_rows || train_set.cols != model.spec.input_cols ||
        train_set.channels != model.spec.input_channels)
        throw DimensionError("train: dataset shape does not match model input");

    RunReport report;
    auto params = param_tensors(model);
    auto sgd = SgdState<Real>::zeros_like(params, static_cast<Real>(cfg.momentum));
    std::mt19937_64 gen(cfg.seed);
    std::vector<index_t> order(train_set.size());
    std::iota(order.begin(), order.end(), index_t(0));

    const RunMode mode = model.spec.mode;
    std::uint64_t step = 0;
    for (index_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        const std::uint64_t epoch_first_step = step;
        std::shuffle(order.begin(), order.end(), gen);

        double epoch_loss = 0.0;
        index_t epoch_correct = 0;
        for (index_t start = 0; start < order.size(); start += cfg.batch_size) {
            const index_t stop = std::min<index_t>(start + cfg.batch_size, order.size());
            const index_t batch_n = stop - start;
            auto grads = ModelGrads<Real>::zeros_like(model);
            std::vector<std::uint64_t> layer_bytes(model.spec.layers.size(), 0);
            for (index_t b = start; b < stop; ++b) {
                const index_t s = order[b];
                auto fwd = model_forward(model, train_set.images[s]);
                for (index_t li = 0; li < layer_bytes.size(); ++li)
                    layer_bytes[li] += fwd.layer_bytes[li];
                auto sx = softmax_xent(fwd.logits, train_set.labels[s]);
                epoch_loss += static_cast<double>(sx.loss);
                if (train_detail::argmax(fwd.logits) == train_set.labels[s])
                    ++epoch_correct;
                grads.accumulate(model_backward(model, fwd.trace, sx.grad));
            }
            for (index_t li = 0; li < model.spec.layers.size(); ++li) {
                const auto kind = model.spec.layers[li].kind;
                if (kind == LayerKind::SpecConv || kind == LayerKind::SpectralPool)
                    report.ledger.record(step, train_detail::layer_tag(kind, li), mode,
                                         layer_bytes[li]);
            }
            grads.scale(Real(1) / static_cast<Real>(batch_n));
            auto gspans = grad_tensors(grads);
            sgd_momentum_step(params, gspans, sgd, static_cast<Real>(lr));
            ++step;
        }

        EpochRow row;
        row.epoch = epoch;
        row.phase = "train";
        row.loss = epoch_loss / static_cast<double>(train_set.size());
        row.accuracy =
            static_cast<double>(epoch_correct) / static_cast<double>(train_set.size());
        row.avg_feature_bytes = report.ledger.average_bytes(epoch_first_step, step);
        row.peak_feature_bytes = report.ledger.peak_bytes(epoch_first_step, step);
        row.lr = lr;
        row.beta = cfg.beta;
        report.final_train_accuracy = row.accuracy;
        report.final_train_loss = row.loss;
        report.rows.push_back(row);

        if (test_set.size() > 0) {
            auto [tl, ta] = train_detail::evaluate(model, test_set);
            EpochRow trow = row;
            trow.phase = "test";
            trow.loss = tl;
            trow.accuracy = ta;
            trow.avg_feature_bytes = 0.0;
            trow.peak_feature_bytes = 0;
            report.final_test_accuracy = ta;
            report.rows.push_back(trow);
        }
    }
    return report;
}

} // namespace specnet
