#pragma once

// Shared byte-level helpers: hex/base64 codecs, SHA-256, and the big-endian
// field encodings used by every canonical wire layout in this library.

#include <sodium.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sos {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string to_hex(ByteView data) {
    std::string out(data.size() * 2 + 1, '\0');
    sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
    out.resize(data.size() * 2);
    return out;
}

inline Bytes from_hex(std::string_view hex) {
    Bytes out(hex.size() / 2 + 1);
    std::size_t written = 0;
    if (hex.size() % 2 != 0 ||
        sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr, &written,
                       nullptr) != 0) {
        throw std::invalid_argument("invalid hex string");
    }
    out.resize(written);
    return out;
}

// Standard base64 with padding (sodium "original" variant).
inline std::string to_base64(ByteView data) {
    std::string out(sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(),
                      sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

inline Bytes from_base64(std::string_view b64) {
    Bytes out(b64.size() / 4 * 3 + 3);
    std::size_t written = 0;
    if (sodium_base642bin(out.data(), out.size(), b64.data(), b64.size(), nullptr, &written,
                          nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
        throw std::invalid_argument("invalid base64 string");
    }
    out.resize(written);
    return out;
}

using Sha256Digest = std::array<std::uint8_t, 32>;

inline Sha256Digest sha256(ByteView data) {
    ensure_sodium();
    Sha256Digest digest{};
    crypto_hash_sha256(digest.data(), data.data(), data.size());
    return digest;
}

inline std::string sha256_hex(ByteView data) {
    const auto d = sha256(data);
    return to_hex(ByteView{d.data(), d.size()});
}

// Big-endian fixed-width appenders. Doubles are encoded as their IEEE-754
// bit pattern so canonical encodings are exact and portable.
inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

inline void put_u32_be(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u64_be(Bytes& out, std::uint64_t v) {
    put_u32_be(out, static_cast<std::uint32_t>(v >> 32));
    put_u32_be(out, static_cast<std::uint32_t>(v));
}

inline void put_f64_be(Bytes& out, double v) {
    put_u64_be(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_bytes(Bytes& out, ByteView data) {
    out.insert(out.end(), data.begin(), data.end());
}

// Length-prefixed variable field (u32 big-endian length, then the bytes).
inline void put_var_bytes(Bytes& out, ByteView data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    put_bytes(out, data);
}

class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32_be() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }
    std::uint64_t u64_be() {
        const std::uint64_t hi = u32_be();
        return (hi << 32) | u32_be();
    }
    double f64_be() { return std::bit_cast<double>(u64_be()); }
    ByteView take(std::size_t n) {
        need(n);
        ByteView v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }
    ByteView var_bytes() { return take(u32_be()); }
    bool done() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw std::out_of_range("truncated byte sequence");
    }
    ByteView data_;
    std::size_t pos_ = 0;
};

/// Shortest decimal form that round-trips the exact double value.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace sos
