#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specnet/errors.hpp"
#include "specnet/tensor.hpp"

namespace specnet {

enum class RunMode { Spectral, SpatialBaseline };

inline const char* to_string(RunMode m) {
    return m == RunMode::Spectral ? "spectral" : "spatial";
}

// Logical bytes of a COO sparse spectral map: two scalars (re, im) and two
// indices per stored entry.
template <typename Real>
std::uint64_t sparse_bytes(const SparseSpectralMap<Real>& S,
                           std::uint64_t bytes_per_scalar,
                           std::uint64_t bytes_per_index) {
    return static_cast<std::uint64_t>(S.entries.size()) *
           (2 * bytes_per_scalar + 2 * bytes_per_index);
}

inline std::uint64_t dense_bytes(std::uint64_t rows, std::uint64_t cols,
                                 std::uint64_t channels, std::uint64_t bytes_per_scalar) {
    return rows * cols * channels * bytes_per_scalar;
}

struct MemEvent {
    std::uint64_t step = 0;
    std::string layer;
    RunMode mode = RunMode::Spectral;
    std::uint64_t bytes = 0;
};

// Time series of per-layer feature-map byte counts. Accounting is logical
// (derived from data-structure contents), so runs are exactly reproducible.
class MemLedger {
public:
    void record(std::uint64_t step, std::string layer, RunMode mode, std::uint64_t bytes) {
        events_.push_back({step, std::move(layer), mode, bytes});
    }

    const std::vector<MemEvent>& events() const { return events_; }
    bool empty() const { return events_.empty(); }

    // Peak: max over steps of the summed live-map bytes within the step.
    std::uint64_t peak_bytes() const { return peak_bytes(0, UINT64_MAX); }

    std::uint64_t peak_bytes(std::uint64_t from_step, std::uint64_t to_step) const {
        std::uint64_t peak = 0;
        for (const auto& [step, total] : step_totals(from_step, to_step))
            peak = std::max(peak, total);
        return peak;
    }

    // Average: mean over steps of the summed live-map bytes.
    double average_bytes() const { return average_bytes(0, UINT64_MAX); }

    double average_bytes(std::uint64_t from_step, std::uint64_t to_step) const {
        const auto totals = step_totals(from_step, to_step);
        if (totals.empty()) return 0.0;
        double sum = 0.0;
        for (const auto& [step, total] : totals) sum += static_cast<double>(total);
        return sum / static_cast<double>(totals.size());
    }

private:
    std::map<std::uint64_t, std::uint64_t> step_totals(std::uint64_t from_step,
                                                       std::uint64_t to_step) const {
        std::map<std::uint64_t, std::uint64_t> totals;
        for (const auto& e : events_)
            if (e.step >= from_step && e.step < to_step) totals[e.step] += e.bytes;
        return totals;
    }

    std::vector<MemEvent> events_;
};

struct MemoryRatios {
    double avg_ratio = 0.0;
    double peak_ratio = 0.0;
};

// Fig.-1 style comparison: spec-mode bytes divided by baseline bytes, for
// ledgers produced by the same architecture and batch schedule.
inline MemoryRatios relative_memory(const MemLedger& spec, const MemLedger& baseline) {
    if (spec.empty() || baseline.empty())
        throw UsageError("relative_memory: empty ledger");
    MemoryRatios r;
    r.avg_ratio = spec.average_bytes() / baseline.average_bytes();
    r.peak_ratio = static_cast<double>(spec.peak_bytes()) /
                   static_cast<double>(baseline.peak_bytes());
    return r;
}

} // namespace specnet
