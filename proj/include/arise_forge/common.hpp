#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace arise_forge {

// Error raised for malformed input files. `line` is 1-based; 0 means the
// position is not line-addressable (e.g. the file could not be opened).
struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string& msg)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
          line(line_no) {}
};

// Error raised for invalid configuration (bad flag combinations, bad knob
// values, unusable selection files).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One of the 32 integer registers, identified by index.
struct Reg {
    uint8_t index = 0;
    friend constexpr bool operator==(Reg a, Reg b) { return a.index == b.index; }
    friend constexpr bool operator!=(Reg a, Reg b) { return a.index != b.index; }
    friend constexpr bool operator<(Reg a, Reg b) { return a.index < b.index; }
};

inline constexpr Reg kZeroReg{0};

inline constexpr const char* kAbiNames[32] = {
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2",
    "s0",   "s1", "a0", "a1", "a2", "a3", "a4", "a5",
    "a6",   "a7", "s2", "s3", "s4", "s5", "s6", "s7",
    "s8",   "s9", "s10", "s11", "t3", "t4", "t5", "t6",
};

inline std::string_view abi_name(Reg r) { return kAbiNames[r.index & 31]; }

// ABI name or xN numeral -> register. "fp" aliases s0/x8.
inline std::optional<Reg> parse_reg(std::string_view tok) {
    if (tok == "fp") return Reg{8};
    for (uint8_t i = 0; i < 32; ++i)
        if (tok == kAbiNames[i]) return Reg{i};
    if (tok.size() >= 2 && tok.size() <= 3 && tok[0] == 'x') {
        unsigned v = 0;
        auto [p, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), v, 10);
        if (ec == std::errc() && p == tok.data() + tok.size() && v < 32)
            return Reg{static_cast<uint8_t>(v)};
    }
    return std::nullopt;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool is_hex_digit(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }

inline bool all_hex(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!is_hex_digit(c)) return false;
    return true;
}

inline std::optional<uint64_t> parse_hex_u64(std::string_view s) {
    if (!all_hex(s) || s.size() > 16) return std::nullopt;
    uint64_t v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v, 16);
    return v;
}

// Decimal (optionally negative) or 0x-prefixed hex integer token.
inline std::optional<int64_t> parse_imm_token(std::string_view s) {
    if (s.empty()) return std::nullopt;
    bool neg = false;
    if (s[0] == '-') {
        neg = true;
        s.remove_prefix(1);
        if (s.empty()) return std::nullopt;
    }
    uint64_t mag = 0;
    if (s.size() > 2 && s[0] == '0' && s[1] == 'x') {
        auto h = parse_hex_u64(s.substr(2));
        if (!h) return std::nullopt;
        mag = *h;
    } else {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), mag, 10);
        if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    }
    if (!neg && mag > INT64_MAX) return std::nullopt;
    if (neg && mag > static_cast<uint64_t>(INT64_MAX) + 1) return std::nullopt;
    return neg ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
}

// splitmix64: the documented pseudo-random generator used wherever the tool
// needs reproducible randomness. Bit-stable across platforms.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    uint32_t next_u32() { return static_cast<uint32_t>(next() >> 32); }
    // Uniform-ish draw in [0, bound); bound > 0. Modulo bias is irrelevant
    // for the test-scale bounds used here.
    uint64_t below(uint64_t bound) { return next() % bound; }
};

}  // namespace arise_forge
