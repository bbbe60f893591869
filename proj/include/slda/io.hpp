#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "error.hpp"
#include "stats.hpp"

namespace slda {

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const char* what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string(what) + ": truncated file");
    return v;
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const char* what) {
    char buf[4];
    if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
        throw FormatError(std::string(what) + ": bad magic, expected \"" + magic + "\"");
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return is;
}

}  // namespace detail

inline constexpr std::uint32_t kStatsVersion = 1;

/// STCV layout: magic, u32 version, u32 k, u32 dmax_u, u32 dmax_v,
/// u32 flags (bit 0 = centered), u64 image_count, u64 pixel_count,
/// f64 mu[k], f64 g[p][q][du + dmax_u][dv + dmax_v] with dv fastest.
inline void write_stats(std::ostream& os, const StationaryStats& s) {
    os.write("STCV", 4);
    detail::put<std::uint32_t>(os, kStatsVersion);
    detail::put<std::uint32_t>(os, std::uint32_t(s.channels()));
    detail::put<std::uint32_t>(os, std::uint32_t(s.dmax_u()));
    detail::put<std::uint32_t>(os, std::uint32_t(s.dmax_v()));
    detail::put<std::uint32_t>(os, s.centered() ? 1u : 0u);
    detail::put<std::uint64_t>(os, s.image_count);
    detail::put<std::uint64_t>(os, s.pixel_count);
    for (double m : s.mu_values()) detail::put(os, m);
    for (double g : s.g_values()) detail::put(os, g);
    if (!os) throw FormatError("write_stats: write failed");
}

inline StationaryStats read_stats(std::istream& is) {
    constexpr const char* what = "read_stats";
    detail::expect_magic(is, "STCV", what);
    const auto version = detail::get<std::uint32_t>(is, what);
    if (version != kStatsVersion) throw FormatError("read_stats: unsupported version " + std::to_string(version));
    const auto k = detail::get<std::uint32_t>(is, what);
    const auto du = detail::get<std::uint32_t>(is, what);
    const auto dv = detail::get<std::uint32_t>(is, what);
    const auto flags = detail::get<std::uint32_t>(is, what);
    if (k == 0) throw FormatError("read_stats: zero channels");
    StationaryStats s(k, du, dv, (flags & 1u) != 0);
    s.image_count = detail::get<std::uint64_t>(is, what);
    s.pixel_count = detail::get<std::uint64_t>(is, what);
    for (double& m : s.mu_values()) m = detail::get<double>(is, what);
    for (double& g : s.g_values()) g = detail::get<double>(is, what);
    return s;
}

inline void save_stats(const std::string& path, const StationaryStats& s) {
    auto os = detail::open_out(path);
    write_stats(os, s);
}

inline StationaryStats load_stats(const std::string& path) {
    auto is = detail::open_in(path);
    return read_stats(is);
}

/// FNV-1a over the serialized statistics, as 16 hex digits.
inline std::string fingerprint(const StationaryStats& s) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t head[4] = {s.channels(), s.dmax_u(), s.dmax_v(), s.centered() ? 1u : 0u};
    mix(head, sizeof head);
    mix(s.mu_values().data(), s.mu_values().size_bytes());
    mix(s.g_values().data(), s.g_values().size_bytes());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace slda
