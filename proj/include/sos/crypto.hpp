#pragma once

// Identity generation and the sign/verify and seal/open primitives.
//
// Algorithm constants for this library:
//   - Signatures: Ed25519 (RFC 8032), 64-byte detached signatures.
//   - Sealing: ephemeral X25519 (RFC 7748) against the recipient's key
//     converted from Ed25519, HKDF-SHA256 (RFC 5869) key derivation, and
//     ChaCha20-Poly1305 IETF (RFC 8439) with a zero nonce (the key is fresh
//     per envelope). The plaintext carries an inner Ed25519 signature from
//     the sender, so opening authenticates the origin as well as integrity.
//   - account_id: lowercase hex SHA-256 of the raw signing public key, a
//     self-certifying identifier.
//
// All operations are pure or use only call-local randomness; key material is
// immutable once created, so values may be shared freely across threads.

#include <sodium.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sos/common.hpp"

namespace sos::crypto {

inline constexpr std::size_t kPublicKeyBytes = 32;   // crypto_sign_PUBLICKEYBYTES
inline constexpr std::size_t kSecretKeyBytes = 64;   // crypto_sign_SECRETKEYBYTES
inline constexpr std::size_t kSeedBytes = 32;        // crypto_sign_SEEDBYTES
inline constexpr std::size_t kSignatureBytes = 64;   // crypto_sign_BYTES
inline constexpr std::size_t kAccountIdBytes = 32;   // SHA-256 digest length
inline constexpr std::size_t kEphemeralKeyBytes = 32;
inline constexpr std::size_t kAeadTagBytes = 16;
inline constexpr std::size_t kMaxUsernameLength = 32;

// Ciphertext = plaintext + inner signature + AEAD tag.
inline constexpr std::size_t kSealCiphertextOverhead = kSignatureBytes + kAeadTagBytes;

using PublicKey = std::array<std::uint8_t, kPublicKeyBytes>;
using SecretKey = std::array<std::uint8_t, kSecretKeyBytes>;
using Seed = std::array<std::uint8_t, kSeedBytes>;
using AccountIdRaw = std::array<std::uint8_t, kAccountIdBytes>;

struct CryptoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidUsername : CryptoError {
    explicit InvalidUsername(std::string_view name)
        : CryptoError("invalid-username: \"" + std::string(name) +
                      "\" (want 1-32 chars of [a-z0-9_])") {}
};
struct MalformedKey : CryptoError {
    using CryptoError::CryptoError;
};
struct MalformedEnvelope : CryptoError {
    using CryptoError::CryptoError;
};
struct AuthenticationFailure : CryptoError {
    using CryptoError::CryptoError;
};

/// Receives wall-clock durations of sign/verify/seal/open calls.
class TimingSink {
public:
    virtual ~TimingSink() = default;
    virtual void record(std::string_view op, std::uint64_t nanos) = 0;
};

namespace detail {

class OpTimer {
public:
    OpTimer(TimingSink* sink, std::string_view op) : sink_(sink), op_(op) {
        if (sink_) start_ = std::chrono::steady_clock::now();
    }
    ~OpTimer() {
        if (sink_) {
            const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                                std::chrono::steady_clock::now() - start_)
                                .count();
            sink_->record(op_, static_cast<std::uint64_t>(ns));
        }
    }

private:
    TimingSink* sink_;
    std::string_view op_;
    std::chrono::steady_clock::time_point start_{};
};

inline constexpr std::string_view kDmSignContext = "sos.dm.v1";
inline constexpr std::string_view kSealKdfInfo = "sos.seal.v1";

// RFC 5869 HKDF-SHA256, built on libsodium's HMAC-SHA256.
inline Bytes hmac_sha256(ByteView key, ByteView data) {
    crypto_auth_hmacsha256_state st;
    crypto_auth_hmacsha256_init(&st, key.data(), key.size());
    crypto_auth_hmacsha256_update(&st, data.data(), data.size());
    Bytes out(crypto_auth_hmacsha256_BYTES);
    crypto_auth_hmacsha256_final(&st, out.data());
    return out;
}

inline Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length) {
    const Bytes prk = hmac_sha256(salt, ikm);
    Bytes okm;
    Bytes block;
    std::uint8_t counter = 1;
    while (okm.size() < length) {
        Bytes input = block;
        put_bytes(input, info);
        put_u8(input, counter++);
        block = hmac_sha256(ByteView{prk.data(), prk.size()}, ByteView{input.data(), input.size()});
        okm.insert(okm.end(), block.begin(), block.end());
    }
    okm.resize(length);
    return okm;
}

}  // namespace detail

struct Signature {
    std::array<std::uint8_t, kSignatureBytes> bytes{};

    bool operator==(const Signature&) const = default;
};

/// A user's keypair plus the derived self-certifying account id.
struct Identity {
    std::string username;
    PublicKey signing_public{};
    SecretKey signing_secret{};
    std::string account_id;  // lowercase hex SHA-256 of signing_public
};

inline bool valid_username(std::string_view name) {
    if (name.empty() || name.size() > kMaxUsernameLength) return false;
    for (const char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

inline std::string account_id_for(const PublicKey& pk) {
    return sha256_hex(ByteView{pk.data(), pk.size()});
}

inline AccountIdRaw account_id_raw(std::string_view account_hex) {
    if (account_hex.size() != kAccountIdBytes * 2) {
        throw std::invalid_argument("account id must be 64 hex chars");
    }
    const Bytes raw = from_hex(account_hex);
    AccountIdRaw out{};
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

inline Identity generate_identity(std::string_view username,
                                  std::optional<Seed> seed = std::nullopt) {
    ensure_sodium();
    if (!valid_username(username)) throw InvalidUsername(username);
    Identity id;
    id.username = std::string(username);
    if (seed) {
        crypto_sign_seed_keypair(id.signing_public.data(), id.signing_secret.data(), seed->data());
    } else {
        crypto_sign_keypair(id.signing_public.data(), id.signing_secret.data());
    }
    id.account_id = account_id_for(id.signing_public);
    return id;
}

inline Signature sign(const SecretKey& secret, ByteView message, TimingSink* sink = nullptr) {
    ensure_sodium();
    detail::OpTimer timer(sink, "sign");
    Signature sig;
    unsigned long long len = 0;
    if (crypto_sign_detached(sig.bytes.data(), &len, message.data(), message.size(),
                             secret.data()) != 0) {
        throw MalformedKey("malformed-key: signing failed");
    }
    return sig;
}

/// Total function: malformed input (wrong-length signature, garbage bytes)
/// yields reject, never an exception.
inline bool verify(const PublicKey& pub, ByteView message, ByteView signature,
                   TimingSink* sink = nullptr) {
    ensure_sodium();
    detail::OpTimer timer(sink, "verify");
    if (signature.size() != kSignatureBytes) return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                       pub.data()) == 0;
}

inline bool verify(const PublicKey& pub, ByteView message, const Signature& signature,
                   TimingSink* sink = nullptr) {
    return verify(pub, message, ByteView{signature.bytes.data(), signature.bytes.size()}, sink);
}

/// A sealed direct message. Wire layout (fixed order, matching the canonical
/// encoding conventions): sender account (32 raw) | recipient account (32
/// raw) | ephemeral public key (32) | created_t (f64 BE) | ciphertext
/// (u32 BE length prefix).
struct Envelope {
    std::string sender_account_id;
    std::string recipient_account_id;
    std::array<std::uint8_t, kEphemeralKeyBytes> ephemeral_public{};
    Bytes ciphertext;
    double created_t = 0.0;

    Bytes serialize() const {
        Bytes out;
        const auto s = account_id_raw(sender_account_id);
        const auto r = account_id_raw(recipient_account_id);
        put_bytes(out, ByteView{s.data(), s.size()});
        put_bytes(out, ByteView{r.data(), r.size()});
        put_bytes(out, ByteView{ephemeral_public.data(), ephemeral_public.size()});
        put_f64_be(out, created_t);
        put_var_bytes(out, ByteView{ciphertext.data(), ciphertext.size()});
        return out;
    }

    static Envelope parse(ByteView wire) {
        try {
            ByteReader r(wire);
            Envelope env;
            env.sender_account_id = to_hex(r.take(kAccountIdBytes));
            env.recipient_account_id = to_hex(r.take(kAccountIdBytes));
            const ByteView eph = r.take(kEphemeralKeyBytes);
            std::copy(eph.begin(), eph.end(), env.ephemeral_public.begin());
            env.created_t = r.f64_be();
            const ByteView ct = r.var_bytes();
            env.ciphertext.assign(ct.begin(), ct.end());
            if (!r.done()) throw MalformedEnvelope("malformed-envelope: trailing bytes");
            return env;
        } catch (const std::out_of_range&) {
            throw MalformedEnvelope("malformed-envelope: truncated");
        }
    }
};

namespace detail {

inline Bytes seal_aad(const AccountIdRaw& sender, const AccountIdRaw& recipient,
                      double created_t) {
    Bytes aad;
    put_bytes(aad, ByteView{sender.data(), sender.size()});
    put_bytes(aad, ByteView{recipient.data(), recipient.size()});
    put_f64_be(aad, created_t);
    return aad;
}

inline Bytes inner_signed_body(const AccountIdRaw& sender, const AccountIdRaw& recipient,
                               ByteView plaintext) {
    Bytes body;
    put_bytes(body, as_bytes(kDmSignContext));
    put_bytes(body, ByteView{sender.data(), sender.size()});
    put_bytes(body, ByteView{recipient.data(), recipient.size()});
    put_bytes(body, plaintext);
    return body;
}

inline Bytes derive_seal_key(ByteView shared, ByteView ephemeral_pub, ByteView recipient_curve) {
    Bytes salt;
    put_bytes(salt, ephemeral_pub);
    put_bytes(salt, recipient_curve);
    return hkdf_sha256(shared, ByteView{salt.data(), salt.size()}, as_bytes(kSealKdfInfo),
                       crypto_aead_chacha20poly1305_ietf_KEYBYTES);
}

}  // namespace detail

/// `ephemeral_secret` overrides the random per-envelope X25519 key. Pass it
/// only where reproducibility is required (simulation); live traffic must
/// leave it unset so every envelope gets a fresh random key.
inline Envelope seal(const Identity& sender, const PublicKey& recipient_public,
                     ByteView plaintext, double created_t, TimingSink* sink = nullptr,
                     std::optional<std::array<std::uint8_t, 32>> ephemeral_secret = std::nullopt) {
    ensure_sodium();
    detail::OpTimer timer(sink, "seal");

    std::array<std::uint8_t, 32> recipient_curve{};
    if (crypto_sign_ed25519_pk_to_curve25519(recipient_curve.data(), recipient_public.data()) !=
        0) {
        throw MalformedKey("malformed-key: recipient public key is not convertible");
    }

    const AccountIdRaw sender_raw = account_id_raw(sender.account_id);
    const AccountIdRaw recipient_raw = account_id_raw(account_id_for(recipient_public));

    // Inner signature binds sender, recipient, and plaintext.
    const Bytes body = detail::inner_signed_body(sender_raw, recipient_raw, plaintext);
    const Signature inner = sign(sender.signing_secret, ByteView{body.data(), body.size()});

    Bytes inner_plain;
    put_bytes(inner_plain, plaintext);
    put_bytes(inner_plain, ByteView{inner.bytes.data(), inner.bytes.size()});

    Envelope env;
    env.sender_account_id = sender.account_id;
    env.recipient_account_id = to_hex(ByteView{recipient_raw.data(), recipient_raw.size()});
    env.created_t = created_t;

    std::array<std::uint8_t, 32> eph_secret{};
    if (ephemeral_secret) {
        eph_secret = *ephemeral_secret;
    } else {
        randombytes_buf(eph_secret.data(), eph_secret.size());
    }
    crypto_scalarmult_base(env.ephemeral_public.data(), eph_secret.data());

    std::array<std::uint8_t, 32> shared{};
    if (crypto_scalarmult(shared.data(), eph_secret.data(), recipient_curve.data()) != 0) {
        throw MalformedKey("malformed-key: X25519 agreement failed");
    }
    const Bytes key = detail::derive_seal_key(
        ByteView{shared.data(), shared.size()},
        ByteView{env.ephemeral_public.data(), env.ephemeral_public.size()},
        ByteView{recipient_curve.data(), recipient_curve.size()});

    const Bytes aad = detail::seal_aad(sender_raw, recipient_raw, created_t);
    const std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> nonce{};

    env.ciphertext.resize(inner_plain.size() + kAeadTagBytes);
    unsigned long long clen = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(env.ciphertext.data(), &clen, inner_plain.data(),
                                              inner_plain.size(), aad.data(), aad.size(), nullptr,
                                              nonce.data(), key.data());
    env.ciphertext.resize(clen);
    sodium_memzero(eph_secret.data(), eph_secret.size());
    sodium_memzero(shared.data(), shared.size());
    return env;
}

/// Returns the plaintext only if the ciphertext authenticates under the
/// (sender, recipient) keys; any single-byte modification of the envelope
/// fails with AuthenticationFailure.
inline Bytes open(const SecretKey& recipient_secret, const Envelope& env,
                  const PublicKey& sender_public, TimingSink* sink = nullptr) {
    ensure_sodium();
    detail::OpTimer timer(sink, "open");

    if (env.ciphertext.size() < kSealCiphertextOverhead) {
        throw MalformedEnvelope("malformed-envelope: ciphertext too short");
    }
    AccountIdRaw sender_raw{};
    AccountIdRaw recipient_raw{};
    try {
        sender_raw = account_id_raw(env.sender_account_id);
        recipient_raw = account_id_raw(env.recipient_account_id);
    } catch (const std::invalid_argument&) {
        throw MalformedEnvelope("malformed-envelope: bad account id");
    }

    PublicKey recipient_public{};
    crypto_sign_ed25519_sk_to_pk(recipient_public.data(), recipient_secret.data());
    std::array<std::uint8_t, 32> recipient_curve{};
    if (crypto_sign_ed25519_pk_to_curve25519(recipient_curve.data(), recipient_public.data()) !=
        0) {
        throw MalformedKey("malformed-key: recipient key is not convertible");
    }
    std::array<std::uint8_t, 32> curve_secret{};
    if (crypto_sign_ed25519_sk_to_curve25519(curve_secret.data(), recipient_secret.data()) != 0) {
        throw MalformedKey("malformed-key: recipient secret is not convertible");
    }

    std::array<std::uint8_t, 32> shared{};
    if (crypto_scalarmult(shared.data(), curve_secret.data(), env.ephemeral_public.data()) != 0) {
        sodium_memzero(curve_secret.data(), curve_secret.size());
        throw AuthenticationFailure("authentication-failure: key agreement rejected");
    }
    const Bytes key = detail::derive_seal_key(
        ByteView{shared.data(), shared.size()},
        ByteView{env.ephemeral_public.data(), env.ephemeral_public.size()},
        ByteView{recipient_curve.data(), recipient_curve.size()});
    sodium_memzero(curve_secret.data(), curve_secret.size());
    sodium_memzero(shared.data(), shared.size());

    const Bytes aad = detail::seal_aad(sender_raw, recipient_raw, env.created_t);
    const std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> nonce{};

    Bytes inner_plain(env.ciphertext.size() - kAeadTagBytes);
    unsigned long long mlen = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(inner_plain.data(), &mlen, nullptr,
                                                  env.ciphertext.data(), env.ciphertext.size(),
                                                  aad.data(), aad.size(), nonce.data(),
                                                  key.data()) != 0) {
        throw AuthenticationFailure("authentication-failure: ciphertext rejected");
    }
    inner_plain.resize(mlen);
    if (inner_plain.size() < kSignatureBytes) {
        throw MalformedEnvelope("malformed-envelope: inner payload too short");
    }

    const std::size_t plain_len = inner_plain.size() - kSignatureBytes;
    const ByteView plaintext{inner_plain.data(), plain_len};
    const ByteView inner_sig{inner_plain.data() + plain_len, kSignatureBytes};

    const Bytes body = detail::inner_signed_body(sender_raw, recipient_raw, plaintext);
    if (!verify(sender_public, ByteView{body.data(), body.size()}, inner_sig)) {
        throw AuthenticationFailure("authentication-failure: sender signature rejected");
    }
    if (account_id_for(sender_public) != env.sender_account_id) {
        throw AuthenticationFailure("authentication-failure: sender account mismatch");
    }
    return Bytes(plaintext.begin(), plaintext.end());
}

/// Key encoding for storage/wire: standard base64 of the raw key bytes.
inline std::string key_to_base64(const PublicKey& pk) {
    return to_base64(ByteView{pk.data(), pk.size()});
}

inline PublicKey key_from_base64(std::string_view b64) {
    Bytes raw;
    try {
        raw = from_base64(b64);
    } catch (const std::invalid_argument&) {
        throw MalformedKey("malformed-key: bad base64");
    }
    if (raw.size() != kPublicKeyBytes) {
        throw MalformedKey("malformed-key: expected 32 bytes");
    }
    PublicKey pk{};
    std::copy(raw.begin(), raw.end(), pk.begin());
    return pk;
}

}  // namespace sos::crypto
