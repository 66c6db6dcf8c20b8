#pragma once

// Store-carry-forward routing: the per-node bundle buffer, summary-vector
// anti-entropy, delivery predictability state, and the transfer planners for
// the five schemes (direct, first_contact, epidemic, snw, prophet).
//
// A Buffer or PredictabilityTable belongs to exactly one node and is mutated
// only by that node's event handler; distinct instances are safe to use from
// different threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sos/bundle.hpp"
#include "sos/common.hpp"

namespace sos {

enum class SchemeKind : std::uint8_t {
    direct,
    first_contact,
    epidemic,
    spray_and_wait,
    prophet,
};

struct ProphetParams {
    double p_init = 0.75;
    double beta = 0.25;
    double gamma = 0.98;
    double aging_unit_s = 1.0;
};

struct SchemeConfig {
    SchemeKind kind = SchemeKind::epidemic;
    std::uint32_t spray_copies = 8;  // snw budget L
    ProphetParams prophet;
};

struct UnknownScheme : std::invalid_argument {
    explicit UnknownScheme(const std::string& what) : std::invalid_argument(what) {}
};

inline std::string known_schemes_hint() {
    return "direct, first_contact, epidemic, snw[:L=<n>], "
           "prophet[:p_init=<p>,beta=<b>,gamma=<g>,aging=<s>]";
}

namespace detail {

inline double parse_param_double(const std::string& scheme, const std::string& key,
                                 const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UnknownScheme("unknown-scheme: bad value for " + scheme + " parameter '" + key +
                            "': \"" + value + "\"");
    }
}

}  // namespace detail

/// Parses a scheme selection string such as "epidemic", "snw:L=4", or
/// "prophet:gamma=0.99". Unlisted parameters keep their defaults.
inline SchemeConfig parse_scheme(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    std::map<std::string, std::string> params;
    if (colon != std::string::npos) {
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            const auto comma = rest.find(',', pos);
            const std::string item =
                rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            const auto eq = item.find('=');
            if (item.empty() || eq == std::string::npos || eq == 0) {
                throw UnknownScheme("unknown-scheme: malformed parameter \"" + item + "\" in \"" +
                                    text + "\" (want key=value)");
            }
            params[item.substr(0, eq)] = item.substr(eq + 1);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }

    SchemeConfig cfg;
    if (name == "direct") {
        cfg.kind = SchemeKind::direct;
    } else if (name == "first_contact") {
        cfg.kind = SchemeKind::first_contact;
    } else if (name == "epidemic") {
        cfg.kind = SchemeKind::epidemic;
    } else if (name == "snw") {
        cfg.kind = SchemeKind::spray_and_wait;
    } else if (name == "prophet") {
        cfg.kind = SchemeKind::prophet;
    } else {
        throw UnknownScheme("unknown-scheme: \"" + name + "\"; valid schemes: " +
                            known_schemes_hint());
    }

    for (const auto& [key, value] : params) {
        if (cfg.kind == SchemeKind::spray_and_wait && key == "L") {
            const double v = detail::parse_param_double(name, key, value);
            if (v < 1.0 || v != std::floor(v) || v > 4294967295.0) {
                throw UnknownScheme("unknown-scheme: snw L must be a positive integer, got \"" +
                                    value + "\"");
            }
            cfg.spray_copies = static_cast<std::uint32_t>(v);
        } else if (cfg.kind == SchemeKind::prophet && key == "p_init") {
            const double v = detail::parse_param_double(name, key, value);
            if (v <= 0.0 || v > 1.0) throw UnknownScheme("unknown-scheme: p_init must be in (0,1]");
            cfg.prophet.p_init = v;
        } else if (cfg.kind == SchemeKind::prophet && key == "beta") {
            const double v = detail::parse_param_double(name, key, value);
            if (v < 0.0 || v > 1.0) throw UnknownScheme("unknown-scheme: beta must be in [0,1]");
            cfg.prophet.beta = v;
        } else if (cfg.kind == SchemeKind::prophet && key == "gamma") {
            const double v = detail::parse_param_double(name, key, value);
            if (v <= 0.0 || v > 1.0) throw UnknownScheme("unknown-scheme: gamma must be in (0,1]");
            cfg.prophet.gamma = v;
        } else if (cfg.kind == SchemeKind::prophet && key == "aging") {
            const double v = detail::parse_param_double(name, key, value);
            if (v <= 0.0) throw UnknownScheme("unknown-scheme: aging must be positive");
            cfg.prophet.aging_unit_s = v;
        } else {
            throw UnknownScheme("unknown-scheme: \"" + name + "\" does not take parameter '" +
                                key + "'");
        }
    }
    return cfg;
}

inline std::string to_string(const SchemeConfig& cfg) {
    switch (cfg.kind) {
        case SchemeKind::direct: return "direct";
        case SchemeKind::first_contact: return "first_contact";
        case SchemeKind::epidemic: return "epidemic";
        case SchemeKind::spray_and_wait: return "snw:L=" + std::to_string(cfg.spray_copies);
        case SchemeKind::prophet:
            return "prophet:p_init=" + format_double(cfg.prophet.p_init) +
                   ",beta=" + format_double(cfg.prophet.beta) +
                   ",gamma=" + format_double(cfg.prophet.gamma) +
                   ",aging=" + format_double(cfg.prophet.aging_unit_s);
    }
    return "epidemic";
}

/// The ids a node currently holds (unexpired), exchanged at contact start so
/// neither side offers what the other already has.
struct SummaryVector {
    std::set<std::string> ids;

    bool contains(const std::string& id) const { return ids.count(id) != 0; }
};

/// Per-destination delivery predictability (PRoPHET state). Entries age
/// multiplicatively with elapsed time and are reinforced on encounters. The
/// table never holds an entry for its own owner.
class PredictabilityTable {
public:
    PredictabilityTable() = default;
    PredictabilityTable(std::string owner_account, ProphetParams params)
        : owner_(std::move(owner_account)), params_(params) {}

    const std::string& owner() const { return owner_; }
    const ProphetParams& params() const { return params_; }

    /// Current stored P for the destination, 0 when never met.
    double value(const std::string& account) const {
        const auto it = entries_.find(account);
        return it == entries_.end() ? 0.0 : it->second.p;
    }

    /// Applies P <- P * gamma^k with k = elapsed / aging_unit (fractional k
    /// allowed) to every entry, bringing the whole table to `now`.
    void age_to(double now) {
        for (auto& [account, e] : entries_) {
            const double elapsed = now - e.last_update_t;
            if (elapsed > 0.0) {
                e.p *= std::pow(params_.gamma, elapsed / params_.aging_unit_s);
                e.last_update_t = now;
            }
        }
    }

    std::map<std::string, double> snapshot() const {
        std::map<std::string, double> out;
        for (const auto& [account, e] : entries_) out.emplace(account, e.p);
        return out;
    }

    friend void prophet_update(PredictabilityTable& a, PredictabilityTable& b, double now);

private:
    struct Entry {
        double p = 0.0;
        double last_update_t = 0.0;
    };

    void bump_direct(const std::string& account, double now) {
        Entry& e = entries_[account];
        e.p = e.p + (1.0 - e.p) * params_.p_init;
        e.last_update_t = now;
    }

    void apply_transitive(const std::string& via, double p_via,
                          const std::map<std::string, double>& via_table, double now) {
        for (const auto& [dest, p_peer] : via_table) {
            if (dest == owner_ || dest == via) continue;
            const double candidate = p_via * p_peer * params_.beta;
            Entry& e = entries_[dest];
            if (candidate > e.p) e.p = candidate;
            e.last_update_t = now;
        }
    }

    std::string owner_;
    ProphetParams params_;
    std::map<std::string, Entry> entries_;
};

/// Encounter update between two nodes, applied in order: (1) age both tables
/// to now; (2) direct reinforcement P_a(b) <- P_a(b) + (1-P_a(b))*P_init and
/// symmetrically; (3) transitivity P_a(d) <- max(P_a(d), P_a(b)*P_b(d)*beta)
/// for every d in b's table, and symmetrically. Both transitivity passes read
/// post-step-2 snapshots, so the update is order-independent.
inline void prophet_update(PredictabilityTable& a, PredictabilityTable& b, double now) {
    a.age_to(now);
    b.age_to(now);
    a.bump_direct(b.owner_, now);
    b.bump_direct(a.owner_, now);
    const auto a_snap = a.snapshot();
    const auto b_snap = b.snapshot();
    a.apply_transitive(b.owner_, a.value(b.owner_), b_snap, now);
    b.apply_transitive(a.owner_, b.value(a.owner_), a_snap, now);
}

enum class ReceiveStatus : std::uint8_t {
    accepted,
    duplicate,
    expired,
    rejected,  // would not fit even after every permitted eviction
};

inline std::string to_string(ReceiveStatus s) {
    switch (s) {
        case ReceiveStatus::accepted: return "accepted";
        case ReceiveStatus::duplicate: return "duplicate";
        case ReceiveStatus::expired: return "expired";
        case ReceiveStatus::rejected: return "rejected";
    }
    return "rejected";
}

/// Per-node bundle store with a byte capacity. Drop policy: evict oldest
/// receive_t first (ties by id), but never a bundle addressed to the owner.
/// An arrival that cannot fit even after all permitted evictions is rejected
/// without disturbing residents.
class Buffer {
public:
    struct Stored {
        Bundle bundle;
        double receive_t = 0.0;
        std::string from_account;                 // owner itself for local inserts
        std::optional<std::size_t> via_contact;   // contact the bundle arrived over
    };

    struct ReceiveResult {
        ReceiveStatus status = ReceiveStatus::rejected;
        std::vector<std::string> evicted;
    };

    Buffer() = default;
    Buffer(std::string owner_account, std::size_t capacity_bytes)
        : owner_(std::move(owner_account)), capacity_(capacity_bytes) {}

    const std::string& owner() const { return owner_; }
    std::size_t capacity_bytes() const { return capacity_; }
    std::size_t used_bytes() const { return used_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }

    const Stored* find(const std::string& id) const {
        const auto it = entries_.find(id);
        return it == entries_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, Stored>& entries() const { return entries_; }

    /// Stores a bundle arriving from a peer: hop_count is incremented, the
    /// arrival contact is remembered so planners never offer the bundle back
    /// over the same link.
    ReceiveResult receive(Bundle bundle, const std::string& from_account, double now,
                          std::optional<std::size_t> via_contact = std::nullopt) {
        bundle.hop_count += 1;
        return store(std::move(bundle), from_account, now, via_contact);
    }

    /// Stores the owner's own freshly created bundle (hop_count stays 0).
    ReceiveResult insert_local(Bundle bundle, double now) {
        return store(std::move(bundle), owner_, now, std::nullopt);
    }

    /// Removes exactly the bundles with created_t + ttl_s < now.
    std::vector<std::string> expire(double now) {
        std::vector<std::string> removed;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (it->second.bundle.expired(now)) {
                used_ -= it->second.bundle.size_bytes();
                removed.push_back(it->first);
                it = entries_.erase(it);
            } else {
                ++it;
            }
        }
        return removed;
    }

    /// Exactly the unexpired resident ids.
    SummaryVector summarize(double now) const {
        SummaryVector sv;
        for (const auto& [id, stored] : entries_) {
            if (!stored.bundle.expired(now)) sv.ids.insert(id);
        }
        return sv;
    }

    void remove(const std::string& id) {
        const auto it = entries_.find(id);
        if (it == entries_.end()) return;
        used_ -= it->second.bundle.size_bytes();
        entries_.erase(it);
    }

    void set_copies(const std::string& id, std::uint32_t copies) {
        const auto it = entries_.find(id);
        if (it != entries_.end()) it->second.bundle.copies = copies;
    }

private:
    ReceiveResult store(Bundle bundle, const std::string& from_account, double now,
                        std::optional<std::size_t> via_contact) {
        ReceiveResult result;
        if (bundle.expired(now)) {
            result.status = ReceiveStatus::expired;
            return result;
        }
        if (entries_.count(bundle.id) != 0) {
            result.status = ReceiveStatus::duplicate;
            return result;
        }
        const std::size_t need = bundle.size_bytes();
        if (used_ + need > capacity_) {
            std::vector<const Stored*> evictable;
            for (const auto& [id, stored] : entries_) {
                if (!stored.bundle.addressed_to(owner_)) evictable.push_back(&stored);
            }
            std::sort(evictable.begin(), evictable.end(), [](const Stored* x, const Stored* y) {
                if (x->receive_t != y->receive_t) return x->receive_t < y->receive_t;
                return x->bundle.id < y->bundle.id;
            });
            std::size_t reclaimable = 0;
            std::size_t take = 0;
            while (take < evictable.size() && used_ - reclaimable + need > capacity_) {
                reclaimable += evictable[take]->bundle.size_bytes();
                ++take;
            }
            if (used_ - reclaimable + need > capacity_) {
                result.status = ReceiveStatus::rejected;
                return result;
            }
            for (std::size_t i = 0; i < take; ++i) {
                result.evicted.push_back(evictable[i]->bundle.id);
            }
            for (const auto& id : result.evicted) remove(id);
        }
        used_ += need;
        std::string id = bundle.id;
        entries_.emplace(std::move(id), Stored{std::move(bundle), now, from_account, via_contact});
        result.status = ReceiveStatus::accepted;
        return result;
    }

    std::string owner_;
    std::size_t capacity_ = 0;
    std::size_t used_ = 0;
    std::map<std::string, Stored> entries_;
};

/// One planned offer: ship `send_copies` of the bundle (meaningful for snw
/// only) and, when `relinquish`, delete the local copy once the transfer
/// succeeds (first_contact custody, snw final handoff).
struct PlanItem {
    std::string id;
    std::uint32_t send_copies = 1;
    bool relinquish = false;
};

/// Decides what `self` offers `peer_account` right now. Common rules for all
/// schemes: never an id the peer already holds, never an expired bundle, and
/// never a bundle back over the contact it arrived on (`current_contact`).
/// Offer order: bundles addressed to the peer first, then ascending
/// created_t, ties by id.
inline std::vector<PlanItem> plan_transfers(const SchemeConfig& scheme, const Buffer& self,
                                            const PredictabilityTable* self_prophet,
                                            const std::string& peer_account,
                                            const SummaryVector& peer_summary,
                                            const PredictabilityTable* peer_prophet, double now,
                                            std::optional<std::size_t> current_contact) {
    struct Candidate {
        const Buffer::Stored* stored;
        PlanItem item;
    };
    std::vector<Candidate> picked;

    for (const auto& [id, stored] : self.entries()) {
        const Bundle& b = stored.bundle;
        if (b.expired(now)) continue;
        if (peer_summary.contains(id)) continue;
        if (current_contact && stored.via_contact == current_contact) continue;

        const bool peer_is_dest = b.addressed_to(peer_account);
        PlanItem item{id, 1, false};
        bool offer = false;
        switch (scheme.kind) {
            case SchemeKind::direct:
                offer = peer_is_dest;
                break;
            case SchemeKind::first_contact:
                offer = true;
                item.relinquish = true;
                break;
            case SchemeKind::epidemic:
                offer = true;
                break;
            case SchemeKind::spray_and_wait: {
                const std::uint32_t copies = b.copies.value_or(1);
                if (copies > 1) {
                    offer = true;
                    item.send_copies = copies / 2;
                } else if (peer_is_dest) {
                    offer = true;
                    item.send_copies = 1;
                    item.relinquish = true;
                }
                break;
            }
            case SchemeKind::prophet: {
                if (peer_is_dest) {
                    offer = true;
                } else if (self_prophet && peer_prophet) {
                    double p_self = 0.0;
                    double p_peer = 0.0;
                    for (const auto& d : b.destinations) {
                        p_self = std::max(p_self, self_prophet->value(d));
                        p_peer = std::max(p_peer, peer_prophet->value(d));
                    }
                    offer = p_peer > p_self;
                }
                break;
            }
        }
        if (offer) picked.push_back({&stored, std::move(item)});
    }

    std::sort(picked.begin(), picked.end(), [&](const Candidate& x, const Candidate& y) {
        const bool xd = x.stored->bundle.addressed_to(peer_account);
        const bool yd = y.stored->bundle.addressed_to(peer_account);
        if (xd != yd) return xd;
        if (x.stored->bundle.created_t != y.stored->bundle.created_t) {
            return x.stored->bundle.created_t < y.stored->bundle.created_t;
        }
        return x.item.id < y.item.id;
    });

    std::vector<PlanItem> plan;
    plan.reserve(picked.size());
    for (auto& c : picked) plan.push_back(std::move(c.item));
    return plan;
}

}  // namespace sos
