#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

// Explicit little-endian primitives shared by the checkpoint and stream-dump
// formats.

namespace sfmap::detail {

inline void put_u8(std::ostream& os, uint8_t v) { os.put(char(v)); }

inline void put_u32(std::ostream& os, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, uint32_t(v & 0xffffffffu));
    put_u32(os, uint32_t(v >> 32));
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<uint32_t>(v)); }

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<uint64_t>(v)); }

inline bool get_u8(std::istream& is, uint8_t& v) {
    int c = is.get();
    if (c == EOF) return false;
    v = uint8_t(c);
    return true;
}

inline bool get_u32(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
        (uint32_t(b[3]) << 24);
    return true;
}

inline bool get_u64(std::istream& is, uint64_t& v) {
    uint32_t lo, hi;
    if (!get_u32(is, lo) || !get_u32(is, hi)) return false;
    v = uint64_t(lo) | (uint64_t(hi) << 32);
    return true;
}

inline bool get_f32(std::istream& is, float& v) {
    uint32_t u;
    if (!get_u32(is, u)) return false;
    v = std::bit_cast<float>(u);
    return true;
}

inline bool get_f64(std::istream& is, double& v) {
    uint64_t u;
    if (!get_u64(is, u)) return false;
    v = std::bit_cast<double>(u);
    return true;
}

}  // namespace sfmap::detail
