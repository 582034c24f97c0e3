#pragma once

// On-disk formats.
//
// Snapshot CSV: one header line, then n rows of n values (row k holds l = 0..n-1):
//   # variable=psi1 step=100 n=10 time=0.01 config=0123456789abcdef
// Values are printed with 17 significant digits so they read back bit-exactly.
//
// Snapshot binary: 32-byte little-endian header followed by n*n f64 values
//   [0,4) magic "QGDA"  [4,8) u32 n  [8,16) i64 step  [16,20) u32 variable id
//   [20,24) u32 reserved (0)  [24,32) u64 config hash

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgda/error.hpp"
#include "qgda/grid.hpp"
#include "qgda/metrics.hpp"

namespace qgda {

namespace fs = std::filesystem;

struct SnapshotRecord {
    std::string variable;
    long step = 0;
    int n = 0;
    double time = 0.0;
    std::string config_hash;  // 16 hex digits
    Vector values;            // row-major, n*n entries
};

inline const std::array<const char*, 7>& snapshot_variables() {
    static const std::array<const char*, 7> names{"psi1", "psi2", "q1", "q2", "mu_psi2", "mu_q1", "mu_q2"};
    return names;
}

inline std::uint32_t variable_id(const std::string& name) {
    const auto& names = snapshot_variables();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (name == names[i]) return static_cast<std::uint32_t>(i + 1);
    throw IoError("unknown snapshot variable '" + name + "'");
}

inline std::string variable_name(std::uint32_t id) {
    const auto& names = snapshot_variables();
    if (id < 1 || id > names.size()) throw IoError("unknown snapshot variable id " + std::to_string(id));
    return names[id - 1];
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string snapshot_csv(const SnapshotRecord& r) {
    if (r.values.size() != static_cast<Eigen::Index>(r.n) * r.n) throw IoError("snapshot: value count is not n*n");
    std::string out = "# variable=" + r.variable + " step=" + std::to_string(r.step) + " n=" + std::to_string(r.n) +
                      " time=" + format_double(r.time) + " config=" + r.config_hash + "\n";
    for (int k = 0; k < r.n; ++k) {
        for (int l = 0; l < r.n; ++l) {
            if (l) out += ',';
            out += format_double(r.values[static_cast<Eigen::Index>(k) * r.n + l]);
        }
        out += '\n';
    }
    return out;
}

inline void write_snapshot_csv(const fs::path& path, const SnapshotRecord& r) {
    std::ofstream out = open_output(path);
    out << snapshot_csv(r);
    finish_output(out, path);
}

inline SnapshotRecord parse_snapshot_csv(const std::string& text, const std::string& origin = "<memory>") {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header) || header.rfind("# ", 0) != 0) throw IoError(origin + ": missing snapshot header");
    SnapshotRecord r;
    std::istringstream hs(header.substr(2));
    std::string field;
    bool seen_n = false;
    while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw IoError(origin + ": malformed header field '" + field + "'");
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        try {
            if (key == "variable") r.variable = value;
            else if (key == "step") r.step = std::stol(value);
            else if (key == "n") r.n = std::stoi(value), seen_n = true;
            else if (key == "time") r.time = std::stod(value);
            else if (key == "config") r.config_hash = value;
            else throw IoError(origin + ": unknown header key '" + key + "'");
        } catch (const std::logic_error&) {
            throw IoError(origin + ": bad value for header key '" + key + "'");
        }
    }
    if (!seen_n || r.n < 1) throw IoError(origin + ": header lacks n");
    r.values.resize(static_cast<Eigen::Index>(r.n) * r.n);
    std::string line;
    for (int k = 0; k < r.n; ++k) {
        if (!std::getline(in, line)) throw IoError(origin + ": expected " + std::to_string(r.n) + " rows");
        std::istringstream ls(line);
        std::string cell;
        int l = 0;
        while (std::getline(ls, cell, ',')) {
            if (l >= r.n) throw IoError(origin + ": row " + std::to_string(k) + " has too many values");
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) throw IoError(origin + ": bad number '" + cell + "'");
            r.values[static_cast<Eigen::Index>(k) * r.n + l++] = v;
        }
        if (l != r.n) throw IoError(origin + ": row " + std::to_string(k) + " has " + std::to_string(l) + " values");
    }
    return r;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SnapshotRecord read_snapshot_csv(const fs::path& path) {
    return parse_snapshot_csv(read_file(path), path.string());
}

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>) bits = std::bit_cast<std::uint64_t>(value);
    else bits = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

template <class T>
T get_le(const std::string& in, std::size_t offset) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
    if constexpr (std::is_floating_point_v<T>) return std::bit_cast<T>(bits);
    else return static_cast<T>(bits);
}

}  // namespace detail

inline std::uint64_t parse_hash(const std::string& hex) {
    if (hex.empty()) return 0;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(hex, &used, 16);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used != hex.size()) throw IoError("config hash '" + hex + "' is not hexadecimal");
    return v;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

constexpr std::size_t binary_header_bytes = 32;

/// The binary format carries no time; readers get time = 0.
inline std::string snapshot_binary(const SnapshotRecord& r) {
    if (r.values.size() != static_cast<Eigen::Index>(r.n) * r.n) throw IoError("snapshot: value count is not n*n");
    std::string out = "QGDA";
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.n));
    detail::put_le<std::int64_t>(out, r.step);
    detail::put_le<std::uint32_t>(out, variable_id(r.variable));
    detail::put_le<std::uint32_t>(out, 0);
    detail::put_le<std::uint64_t>(out, parse_hash(r.config_hash));
    for (Eigen::Index i = 0; i < r.values.size(); ++i) detail::put_le<double>(out, r.values[i]);
    return out;
}

inline SnapshotRecord parse_snapshot_binary(const std::string& bytes, const std::string& origin = "<memory>") {
    if (bytes.size() < binary_header_bytes || bytes.compare(0, 4, "QGDA") != 0)
        throw IoError(origin + ": not a binary snapshot");
    SnapshotRecord r;
    r.n = static_cast<int>(detail::get_le<std::uint32_t>(bytes, 4));
    r.step = static_cast<long>(detail::get_le<std::int64_t>(bytes, 8));
    r.variable = variable_name(detail::get_le<std::uint32_t>(bytes, 16));
    r.config_hash = hash_hex(detail::get_le<std::uint64_t>(bytes, 24));
    const std::size_t count = static_cast<std::size_t>(r.n) * static_cast<std::size_t>(r.n);
    if (bytes.size() != binary_header_bytes + 8 * count) throw IoError(origin + ": truncated or oversized payload");
    r.values.resize(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i)
        r.values[static_cast<Eigen::Index>(i)] = detail::get_le<double>(bytes, binary_header_bytes + 8 * i);
    return r;
}

inline void write_snapshot_binary(const fs::path& path, const SnapshotRecord& r) {
    std::ofstream out = open_output(path, std::ios::out | std::ios::binary);
    const std::string bytes = snapshot_binary(r);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    finish_output(out, path);
}

inline SnapshotRecord read_snapshot_binary(const fs::path& path) {
    return parse_snapshot_binary(read_file(path), path.string());
}

/// Metrics series. Wall time is excluded so reruns are byte-identical.
inline void write_metrics_csv(const fs::path& path, const std::string& variable, int n, const std::string& config_hash,
                              double dt, const std::vector<MetricSample>& samples) {
    std::ofstream out = open_output(path);
    out << "# variable=" << variable << " n=" << n << " config=" << config_hash << "\n";
    out << "step,time,rmse,corr\n";
    for (const MetricSample& s : samples)
        out << s.step << ',' << format_double(s.step * dt) << ',' << format_double(s.rmse) << ','
            << format_double(s.corr) << '\n';
    finish_output(out, path);
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out = open_output(path);
    out << j.dump(2) << '\n';
    finish_output(out, path);
}

}  // namespace qgda
