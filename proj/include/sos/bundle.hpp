#pragma once

// The store-carry-forward data unit. A bundle is immutable once signed; the
// id is the SHA-256 of its canonical bytes, so any party can recompute and
// check it. Mutable transport state (hop_count, spray copies) lives outside
// the canonical encoding and never affects the id or signature.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sos/common.hpp"
#include "sos/crypto.hpp"

namespace sos {

enum class BundleKind : std::uint8_t {
    post = 0,  // broadcast to followers, payload readable by anyone
    dm = 1,    // sealed envelope, payload readable only by the recipient
};

inline std::string to_string(BundleKind kind) {
    return kind == BundleKind::post ? "post" : "dm";
}

// Fixed accounting charge per bundle for headers, ids, and signature,
// applied on top of the payload when computing buffer/contact usage.
inline constexpr std::size_t kBundleHeaderOverheadBytes = 256;

struct Bundle {
    std::string id;  // hex SHA-256 of canonical_bundle_bytes
    BundleKind kind = BundleKind::post;
    std::string author_account_id;
    std::vector<std::string> destinations;  // account ids, sorted, unique
    double created_t = 0.0;
    double ttl_s = 0.0;
    Bytes payload;
    crypto::Signature signature;

    // Travels with the bundle so any relay can verify the signature with no
    // directory access; self-certifying because hashing it must reproduce
    // author_account_id. Not part of the canonical bytes.
    crypto::PublicKey author_public{};

    // Transport state, excluded from id and signature.
    std::uint32_t hop_count = 0;
    std::optional<std::uint32_t> copies;  // spray-and-wait only

    std::size_t size_bytes() const { return payload.size() + kBundleHeaderOverheadBytes; }

    bool expired(double now) const { return created_t + ttl_s < now; }

    bool addressed_to(const std::string& account) const {
        return std::binary_search(destinations.begin(), destinations.end(), account);
    }
};

// Signed-byte domain tag; keeps bundle signatures disjoint from every other
// signature an author key produces.
inline constexpr std::string_view kBundleSignContext = "sos.bundle.v1";

inline Bytes canonical_bundle_bytes(const Bundle& b) {
    Bytes out;
    put_bytes(out, as_bytes(kBundleSignContext));
    put_u8(out, static_cast<std::uint8_t>(b.kind));
    const auto author = crypto::account_id_raw(b.author_account_id);
    put_bytes(out, ByteView{author.data(), author.size()});
    put_u32_be(out, static_cast<std::uint32_t>(b.destinations.size()));
    for (const auto& d : b.destinations) {
        const auto raw = crypto::account_id_raw(d);
        put_bytes(out, ByteView{raw.data(), raw.size()});
    }
    put_f64_be(out, b.created_t);
    put_f64_be(out, b.ttl_s);
    put_var_bytes(out, ByteView{b.payload.data(), b.payload.size()});
    return out;
}

inline std::string bundle_id_for(const Bundle& b) {
    const Bytes canon = canonical_bundle_bytes(b);
    return sha256_hex(ByteView{canon.data(), canon.size()});
}

/// Builds, signs, and ids a bundle. Destinations are deduplicated and
/// sorted; created_t/ttl_s are taken as given.
inline Bundle make_bundle(const crypto::Identity& author, BundleKind kind,
                          std::vector<std::string> destinations, double created_t, double ttl_s,
                          Bytes payload, crypto::TimingSink* sink = nullptr) {
    if (ttl_s <= 0.0) throw std::invalid_argument("bundle ttl must be positive");
    if (destinations.empty()) throw std::invalid_argument("bundle needs a destination");
    Bundle b;
    b.kind = kind;
    b.author_account_id = author.account_id;
    b.author_public = author.signing_public;
    std::sort(destinations.begin(), destinations.end());
    destinations.erase(std::unique(destinations.begin(), destinations.end()),
                       destinations.end());
    b.destinations = std::move(destinations);
    b.created_t = created_t;
    b.ttl_s = ttl_s;
    b.payload = std::move(payload);
    const Bytes canon = canonical_bundle_bytes(b);
    b.signature = crypto::sign(author.signing_secret, ByteView{canon.data(), canon.size()}, sink);
    b.id = sha256_hex(ByteView{canon.data(), canon.size()});
    return b;
}

/// True iff the carried key hashes to the author account id, the id matches
/// the canonical bytes, and the signature verifies under that key. Requires
/// no directory: the bundle authenticates itself.
inline bool verify_bundle(const Bundle& b, crypto::TimingSink* sink = nullptr) {
    if (crypto::account_id_for(b.author_public) != b.author_account_id) return false;
    Bytes canon;
    try {
        canon = canonical_bundle_bytes(b);
    } catch (const std::invalid_argument&) {
        return false;
    }
    if (sha256_hex(ByteView{canon.data(), canon.size()}) != b.id) return false;
    return crypto::verify(b.author_public, ByteView{canon.data(), canon.size()}, b.signature,
                          sink);
}

}  // namespace sos
