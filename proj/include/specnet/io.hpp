#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "specnet/errors.hpp"

namespace specnet {

// Shortest round-trippable decimal form; keeps metric CSVs byte-stable
// across identical runs.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Write-temp-then-rename so partial runs never leave corrupt artifacts.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace specnet
