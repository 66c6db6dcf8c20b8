#pragma once

// The social overlay on top of the DTN layer: profiles with interest tags,
// signed posts addressed to the author's followers at creation time, sealed
// direct messages, feeds, and interest-based peer discovery fed by profile
// cards exchanged during encounters.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sos/bundle.hpp"
#include "sos/common.hpp"
#include "sos/crypto.hpp"
#include "sos/registry.hpp"
#include "sos/routing.hpp"

namespace sos::social {

inline constexpr std::size_t kMaxPostTextBytes = 560;
inline constexpr std::size_t kMaxInterestTags = 16;
inline constexpr std::size_t kMaxInterestTagBytes = 24;

// Flat accounting charge for one profile card on the wire, applied per
// direction against the contact's link budget.
inline constexpr std::size_t kProfileCardBytes = 512;

struct SocialError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TextTooLong : SocialError {
    explicit TextTooLong(std::size_t size)
        : SocialError("text-too-long: " + std::to_string(size) + " bytes exceeds " +
                      std::to_string(kMaxPostTextBytes)) {}
};
struct NoAudience : SocialError {
    NoAudience() : SocialError("no-audience: author has no followers") {}
};
struct UnknownRecipient : SocialError {
    explicit UnknownRecipient(const std::string& name)
        : SocialError("unknown-recipient: \"" + name + "\" (key not cached, registry offline)") {}
};
struct NotFound : SocialError {
    explicit NotFound(const std::string& name)
        : SocialError("not-found: no account \"" + name + "\"") {}
};
struct InvalidProfile : SocialError {
    using SocialError::SocialError;
};
struct MalformedPayload : SocialError {
    using SocialError::SocialError;
};

/// Trims ASCII whitespace, lowercases, drops empties, deduplicates. Tag
/// count and length limits are enforced after normalization.
inline std::set<std::string> normalize_interests(const std::vector<std::string>& raw) {
    std::set<std::string> tags;
    for (const auto& item : raw) {
        std::size_t begin = 0;
        std::size_t end = item.size();
        while (begin < end && std::isspace(static_cast<unsigned char>(item[begin]))) ++begin;
        while (end > begin && std::isspace(static_cast<unsigned char>(item[end - 1]))) --end;
        std::string tag = item.substr(begin, end - begin);
        std::transform(tag.begin(), tag.end(), tag.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (tag.empty()) continue;
        if (tag.size() > kMaxInterestTagBytes) {
            throw InvalidProfile("invalid-profile: interest tag \"" + tag + "\" exceeds " +
                                 std::to_string(kMaxInterestTagBytes) + " bytes");
        }
        tags.insert(std::move(tag));
    }
    if (tags.size() > kMaxInterestTags) {
        throw InvalidProfile("invalid-profile: more than " + std::to_string(kMaxInterestTags) +
                             " interest tags");
    }
    return tags;
}

struct Profile {
    std::string username;
    std::string account_id;
    std::string public_key;  // base64
    std::set<std::string> interests;
};

/// Directed follower -> followee edges over account ids.
class FollowGraph {
public:
    /// Idempotent; self-edges are rejected.
    void add(const std::string& follower, const std::string& followee) {
        if (follower == followee) {
            throw std::invalid_argument("follow graph: self-edges are not allowed");
        }
        edges_[follower].insert(followee);
    }

    bool follows(const std::string& follower, const std::string& followee) const {
        const auto it = edges_.find(follower);
        return it != edges_.end() && it->second.count(followee) != 0;
    }

    /// Friendship for encounter analytics: either direction follows.
    bool friends(const std::string& a, const std::string& b) const {
        return follows(a, b) || follows(b, a);
    }

    const std::set<std::string>& followees(const std::string& follower) const {
        static const std::set<std::string> empty;
        const auto it = edges_.find(follower);
        return it == edges_.end() ? empty : it->second;
    }

    std::vector<std::string> followers_of(const std::string& followee) const {
        std::vector<std::string> out;
        for (const auto& [follower, followees] : edges_) {
            if (followees.count(followee) != 0) out.push_back(follower);
        }
        return out;
    }

private:
    std::map<std::string, std::set<std::string>> edges_;
};

struct Post {
    std::string author_account_id;
    std::uint64_t sequence = 0;
    std::string text;
    double created_t = 0.0;
    crypto::Signature signature;
};

inline constexpr std::string_view kPostSignContext = "sos.post.v1";

inline Bytes canonical_post_bytes(const Post& p) {
    Bytes out;
    put_bytes(out, as_bytes(kPostSignContext));
    const auto author = crypto::account_id_raw(p.author_account_id);
    put_bytes(out, ByteView{author.data(), author.size()});
    put_u64_be(out, p.sequence);
    put_f64_be(out, p.created_t);
    put_var_bytes(out, as_bytes(p.text));
    return out;
}

inline Post make_post(const crypto::Identity& author, std::uint64_t sequence,
                      const std::string& text, double created_t,
                      crypto::TimingSink* sink = nullptr) {
    if (text.size() > kMaxPostTextBytes) throw TextTooLong(text.size());
    Post p;
    p.author_account_id = author.account_id;
    p.sequence = sequence;
    p.text = text;
    p.created_t = created_t;
    const Bytes canon = canonical_post_bytes(p);
    p.signature = crypto::sign(author.signing_secret, ByteView{canon.data(), canon.size()}, sink);
    return p;
}

inline bool verify_post(const Post& p, const crypto::PublicKey& author_public,
                        crypto::TimingSink* sink = nullptr) {
    Bytes canon;
    try {
        canon = canonical_post_bytes(p);
    } catch (const std::invalid_argument&) {
        return false;
    }
    return crypto::verify(author_public, ByteView{canon.data(), canon.size()}, p.signature, sink);
}

/// Post bundle payload: canonical post bytes followed by the signature.
inline Bytes post_payload(const Post& p) {
    Bytes out = canonical_post_bytes(p);
    put_bytes(out, ByteView{p.signature.bytes.data(), p.signature.bytes.size()});
    return out;
}

inline Post parse_post_payload(ByteView payload) {
    try {
        ByteReader r(payload);
        const ByteView ctx = r.take(kPostSignContext.size());
        if (std::string_view(reinterpret_cast<const char*>(ctx.data()), ctx.size()) !=
            kPostSignContext) {
            throw MalformedPayload("malformed-payload: bad post context tag");
        }
        Post p;
        p.author_account_id = to_hex(r.take(crypto::kAccountIdBytes));
        p.sequence = r.u64_be();
        p.created_t = r.f64_be();
        const ByteView text = r.var_bytes();
        p.text.assign(text.begin(), text.end());
        const ByteView sig = r.take(crypto::kSignatureBytes);
        std::copy(sig.begin(), sig.end(), p.signature.bytes.begin());
        if (!r.done()) throw MalformedPayload("malformed-payload: trailing bytes after post");
        return p;
    } catch (const std::out_of_range&) {
        throw MalformedPayload("malformed-payload: truncated post");
    }
}

struct DeliveredDm {
    std::string sender_account_id;
    std::string plaintext;
    double created_t = 0.0;
    std::string bundle_id;
};

/// What deliver() decoded for the application layer.
struct DeliveryOutcome {
    BundleKind kind = BundleKind::post;
    std::optional<Post> post;
    std::optional<DeliveredDm> dm;
};

/// One user's middleware instance: identity and key cache, bundle buffer,
/// scheme state, and the social application state (posts seen, dms opened,
/// profile cards observed). Owned and driven by a single event handler.
class Node {
public:
    Node(const std::string& username, const std::vector<std::string>& interests,
         const SchemeConfig& scheme, std::size_t buffer_capacity_bytes, double default_ttl_s,
         std::optional<crypto::Seed> seed = std::nullopt, crypto::TimingSink* sink = nullptr)
        : identity_(crypto::generate_identity(username, seed)),
          scheme_(scheme),
          buffer_(identity_.account_id, buffer_capacity_bytes),
          prophet_(identity_.account_id, scheme.prophet),
          default_ttl_s_(default_ttl_s),
          sink_(sink) {
        profile_.username = username;
        profile_.account_id = identity_.account_id;
        profile_.public_key = crypto::key_to_base64(identity_.signing_public);
        profile_.interests = normalize_interests(interests);
        cache_key(username, identity_.account_id, identity_.signing_public);
    }

    const crypto::Identity& identity() const { return identity_; }
    const Profile& profile() const { return profile_; }
    const std::string& account_id() const { return identity_.account_id; }
    const std::string& username() const { return identity_.username; }
    Buffer& buffer() { return buffer_; }
    const Buffer& buffer() const { return buffer_; }
    PredictabilityTable& prophet() { return prophet_; }
    const PredictabilityTable& prophet() const { return prophet_; }
    const SchemeConfig& scheme() const { return scheme_; }

    /// Registers this node's key; exactly one registry call.
    void create_account(registry::RegistryClient& registry) {
        registry.register_account(identity_.username, profile_.public_key);
    }

    /// Adds a followee and caches their key. Performs a registry lookup only
    /// when the key is not already cached; returns whether it looked up.
    /// The registry pointer is null when unreachable (offline phase).
    bool follow(const std::string& followee_username, registry::RegistryClient* registry) {
        const auto cached = username_to_account_.find(followee_username);
        bool looked_up = false;
        std::string account;
        if (cached != username_to_account_.end()) {
            account = cached->second;
        } else {
            if (registry == nullptr) {
                throw registry::RegistryUnreachable(
                    "registry-unreachable: cannot resolve \"" + followee_username +
                    "\" while offline");
            }
            const auto rec = registry->lookup(followee_username);
            looked_up = true;
            if (!rec) throw NotFound(followee_username);
            cache_key(rec->username, rec->account_id, crypto::key_from_base64(rec->public_key));
            account = rec->account_id;
        }
        followees_.insert(account);
        return looked_up;
    }

    const std::set<std::string>& followees() const { return followees_; }

    bool knows_key(const std::string& account_id) const {
        return keys_.count(account_id) != 0;
    }

    /// Creates a signed post bundle addressed to the given follower snapshot.
    Bundle publish(const std::string& text, double now,
                   const std::vector<std::string>& follower_accounts) {
        if (follower_accounts.empty()) throw NoAudience();
        const Post post = make_post(identity_, next_sequence_++, text, now, sink_);
        return make_bundle(identity_, BundleKind::post, follower_accounts, now, default_ttl_s_,
                           post_payload(post), sink_);
    }

    /// Seals a message to the recipient. The key must be cached (follow,
    /// earlier lookup, or a received profile card), or the registry must be
    /// reachable for a lookup; returns the bundle and whether a lookup
    /// happened. `ephemeral_secret` is forwarded to seal() for reproducible
    /// simulation runs only.
    std::pair<Bundle, bool> direct_message(
        const std::string& recipient_username, const std::string& plaintext, double now,
        registry::RegistryClient* registry,
        std::optional<std::array<std::uint8_t, 32>> ephemeral_secret = std::nullopt) {
        bool looked_up = false;
        const auto it = username_to_account_.find(recipient_username);
        std::string account;
        if (it != username_to_account_.end()) {
            account = it->second;
        } else {
            if (registry == nullptr) throw UnknownRecipient(recipient_username);
            const auto rec = registry->lookup(recipient_username);
            looked_up = true;
            if (!rec) throw NotFound(recipient_username);
            cache_key(rec->username, rec->account_id, crypto::key_from_base64(rec->public_key));
            account = rec->account_id;
        }
        const crypto::PublicKey& recipient_key = keys_.at(account);
        const crypto::Envelope env = crypto::seal(identity_, recipient_key, as_bytes(plaintext),
                                                  now, sink_, ephemeral_secret);
        Bundle b = make_bundle(identity_, BundleKind::dm, {account}, now, default_ttl_s_,
                               env.serialize(), sink_);
        return {std::move(b), looked_up};
    }

    /// Consumes a bundle addressed to this node: re-verifies, decodes the
    /// post or opens the envelope, and records it for feed()/dms(). The
    /// author's key is cached on the way (it is self-certifying).
    DeliveryOutcome deliver(const Bundle& bundle, double) {
        if (!verify_bundle(bundle, sink_)) {
            throw MalformedPayload("malformed-payload: bundle failed verification at delivery");
        }
        keys_.emplace(bundle.author_account_id, bundle.author_public);
        DeliveryOutcome outcome;
        outcome.kind = bundle.kind;
        if (bundle.kind == BundleKind::post) {
            Post post = parse_post_payload(ByteView{bundle.payload.data(), bundle.payload.size()});
            if (post.author_account_id != bundle.author_account_id ||
                !verify_post(post, bundle.author_public, sink_)) {
                throw MalformedPayload("malformed-payload: post signature rejected");
            }
            posts_.emplace(std::make_pair(post.author_account_id, post.sequence), post);
            outcome.post = std::move(post);
        } else {
            const crypto::Envelope env =
                crypto::Envelope::parse(ByteView{bundle.payload.data(), bundle.payload.size()});
            const Bytes plain =
                crypto::open(identity_.signing_secret, env, bundle.author_public, sink_);
            DeliveredDm dm;
            dm.sender_account_id = env.sender_account_id;
            dm.plaintext.assign(plain.begin(), plain.end());
            dm.created_t = env.created_t;
            dm.bundle_id = bundle.id;
            dms_.push_back(dm);
            outcome.dm = std::move(dm);
        }
        return outcome;
    }

    /// Delivered, verified posts from followees, newest first; ties by
    /// (author, sequence) ascending.
    std::vector<Post> feed() const {
        std::vector<Post> out;
        for (const auto& [key, post] : posts_) {
            if (followees_.count(post.author_account_id) != 0) out.push_back(post);
        }
        std::sort(out.begin(), out.end(), [](const Post& x, const Post& y) {
            if (x.created_t != y.created_t) return x.created_t > y.created_t;
            if (x.author_account_id != y.author_account_id) {
                return x.author_account_id < y.author_account_id;
            }
            return x.sequence < y.sequence;
        });
        return out;
    }

    const std::vector<DeliveredDm>& dms() const { return dms_; }

    /// Records a profile card received during an encounter and caches the
    /// carried key when it is consistent with the card's account id.
    void observe_profile_card(const Profile& peer) {
        if (peer.account_id == identity_.account_id) return;
        observed_profiles_[peer.account_id] = peer;
        try {
            const crypto::PublicKey pk = crypto::key_from_base64(peer.public_key);
            if (crypto::account_id_for(pk) == peer.account_id) {
                cache_key(peer.username, peer.account_id, pk);
            }
        } catch (const crypto::MalformedKey&) {
            // Card with an undecodable key still counts for discovery.
        }
    }

    /// Encountered peers sharing interests with this node: by default any
    /// nonempty intersection, or Jaccard similarity >= tau when given.
    /// Sorted by shared-tag count descending, ties by account id.
    std::vector<std::pair<std::string, std::size_t>> discover(
        std::optional<double> jaccard_tau = std::nullopt) const {
        std::vector<std::pair<std::string, std::size_t>> out;
        for (const auto& [account, prof] : observed_profiles_) {
            std::vector<std::string> shared;
            std::set_intersection(profile_.interests.begin(), profile_.interests.end(),
                                  prof.interests.begin(), prof.interests.end(),
                                  std::back_inserter(shared));
            if (shared.empty()) continue;
            if (jaccard_tau) {
                std::set<std::string> uni(profile_.interests.begin(), profile_.interests.end());
                uni.insert(prof.interests.begin(), prof.interests.end());
                const double jaccard =
                    static_cast<double>(shared.size()) / static_cast<double>(uni.size());
                if (jaccard < *jaccard_tau) continue;
            }
            out.emplace_back(account, shared.size());
        }
        std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second > y.second;
            return x.first < y.first;
        });
        return out;
    }

    std::optional<std::string> account_for_username(const std::string& username) const {
        const auto it = username_to_account_.find(username);
        if (it == username_to_account_.end()) return std::nullopt;
        return it->second;
    }

private:
    void cache_key(const std::string& username, const std::string& account_id,
                   const crypto::PublicKey& key) {
        username_to_account_.emplace(username, account_id);
        keys_.emplace(account_id, key);
    }

    crypto::Identity identity_;
    Profile profile_;
    SchemeConfig scheme_;
    Buffer buffer_;
    PredictabilityTable prophet_;
    double default_ttl_s_;
    crypto::TimingSink* sink_;

    std::set<std::string> followees_;  // account ids
    std::map<std::string, std::string> username_to_account_;
    std::map<std::string, crypto::PublicKey> keys_;  // account id -> signing key
    std::map<std::pair<std::string, std::uint64_t>, Post> posts_;
    std::vector<DeliveredDm> dms_;
    std::map<std::string, Profile> observed_profiles_;
    std::uint64_t next_sequence_ = 1;
};

}  // namespace sos::social
