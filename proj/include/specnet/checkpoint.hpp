#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "specnet/dataset.hpp"
#include "specnet/errors.hpp"
#include "specnet/network.hpp"

namespace specnet {

// Checkpoint container, layout version 1. All integers and parameter
// scalars are stored little-endian; parameters are 64-bit floats regardless
// of the runtime precision.
//
//   "SPNC" | version u8 | mode u8 | input_rows u32 | input_cols u32
//   | input_channels u32 | num_classes u32 | beta f64 | layer_count u32
//   | layers: kind u8, out_channels u32, kernel_size u32, units u32,
//             has_beta_override u8, beta_override f64
//   | conv parameter banks (row-major f64)
//   | dense weights then bias (f64)
//   | channel_stat_count u32 | means f64[] | stddevs f64[]

namespace ckpt_detail {

constexpr char kMagic[4] = {'S', 'P', 'N', 'C'};
constexpr std::uint8_t kVersion = 1;

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(char(v)); }

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k) const {
        if (off + k > n) throw LengthError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return p[off++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[off + i]) << (8 * i);
        off += 8;
        return std::bit_cast<double>(v);
    }
};

} // namespace ckpt_detail

template <typename Real>
std::string serialize_checkpoint(const Model<Real>& model, const ChannelStats& stats = {}) {
    using namespace ckpt_detail;
    std::string out;
    out.append(kMagic, 4);
    put_u8(out, kVersion);
    put_u8(out, model.spec.mode == RunMode::Spectral ? 0 : 1);
    put_u32(out, static_cast<std::uint32_t>(model.spec.input_rows));
    put_u32(out, static_cast<std::uint32_t>(model.spec.input_cols));
    put_u32(out, static_cast<std::uint32_t>(model.spec.input_channels));
    put_u32(out, static_cast<std::uint32_t>(model.spec.num_classes));
    put_f64(out, static_cast<double>(model.beta));
    put_u32(out, static_cast<std::uint32_t>(model.spec.layers.size()));
    for (const auto& d : model.spec.layers) {
        put_u8(out, static_cast<std::uint8_t>(d.kind));
        put_u32(out, static_cast<std::uint32_t>(d.out_channels));
        put_u32(out, static_cast<std::uint32_t>(d.kernel_size));
        put_u32(out, static_cast<std::uint32_t>(d.units));
        put_u8(out, d.beta_override ? 1 : 0);
        put_f64(out, d.beta_override.value_or(0.0));
    }
    for (const auto& conv : model.convs)
        for (const auto& k : conv.kernels)
            for (Real v : k.data) put_f64(out, static_cast<double>(v));
    for (const auto& layer : model.dense) {
        for (Real v : layer.weights.data) put_f64(out, static_cast<double>(v));
        for (Real v : layer.bias) put_f64(out, static_cast<double>(v));
    }
    put_u32(out, static_cast<std::uint32_t>(stats.mean.size()));
    for (double v : stats.mean) put_f64(out, v);
    for (double v : stats.stddev) put_f64(out, v);
    return out;
}

template <typename Real>
struct LoadedCheckpoint {
    Model<Real> model;
    ChannelStats stats;
};

template <typename Real>
LoadedCheckpoint<Real> deserialize_checkpoint(const std::string& bytes) {
    using namespace ckpt_detail;
    Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    r.need(4);
    if (std::string(bytes.data(), 4) != std::string(kMagic, 4))
        throw FormatError("checkpoint: bad magic");
    r.off = 4;
    if (r.u8() != kVersion) throw FormatError("checkpoint: unsupported layout version");

    ModelSpec spec;
    spec.mode = r.u8() == 0 ? RunMode::Spectral : RunMode::SpatialBaseline;
    spec.input_rows = r.u32();
    spec.input_cols = r.u32();
    spec.input_channels = r.u32();
    spec.num_classes = r.u32();
    const double beta = r.f64();
    const std::uint32_t layer_count = r.u32();
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        LayerDesc d;
        const std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::ActivationSpatial))
            throw FormatError("checkpoint: unknown layer kind");
        d.kind = static_cast<LayerKind>(kind);
        d.out_channels = r.u32();
        d.kernel_size = r.u32();
        d.units = r.u32();
        const bool has_override = r.u8() != 0;
        const double override_val = r.f64();
        if (has_override) d.beta_override = override_val;
        spec.layers.push_back(d);
    }

    LoadedCheckpoint<Real> out{build_model<Real>(spec, static_cast<Real>(beta)), {}};
    for (auto& conv : out.model.convs)
        for (auto& k : conv.kernels)
            for (auto& v : k.data) v = static_cast<Real>(r.f64());
    for (auto& layer : out.model.dense) {
        for (auto& v : layer.weights.data) v = static_cast<Real>(r.f64());
        for (auto& v : layer.bias) v = static_cast<Real>(r.f64());
    }
    const std::uint32_t stat_count = r.u32();
    out.stats.mean.resize(stat_count);
    out.stats.stddev.resize(stat_count);
    for (auto& v : out.stats.mean) v = r.f64();
    for (auto& v : out.stats.stddev) v = r.f64();
    return out;
}

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const Model<Real>& model,
                     const ChannelStats& stats = {}) {
    const auto bytes = serialize_checkpoint(model, stats);
    const auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint: " + path.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

template <typename Real>
LoadedCheckpoint<Real> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return deserialize_checkpoint<Real>(bytes);
}

} // namespace specnet
