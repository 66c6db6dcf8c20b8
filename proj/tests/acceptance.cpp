// End-to-end acceptance checks for the middleware + simulator. Each check
// prints exactly one PASS/FAIL line; the process exits nonzero if any fail.
// argv[1] must point at the sos CLI binary (used by the determinism check).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <sodium.h>

#include "sos/sos.hpp"

using namespace sos;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_secs(double s) {
    std::ostringstream out;
    out.precision(2);
    out << std::fixed << s << "s";
    return out.str();
}

bool report(int num, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " " << num << " " << name;
    if (!detail.empty()) std::cout << ": " << detail;
    std::cout << std::endl;
    return ok;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// ---------------------------------------------------------------------------
// Randomized scenarios: up to 10 nodes and 50 contacts, unlimited storage and
// link capacity, everyone in the foreground, registry reachable only at t=0.
// serial_contacts lays the windows out one at a time, the shape a single
// shared radio channel produces; custody handoff schemes can shuttle a bundle
// around a cycle of simultaneously active links for as long as the budget
// lasts, so the runs exercising them use the serial layout.

netsim::Scenario random_scenario(std::uint64_t seed, bool serial_contacts = false) {
    SplitMix64 rng = substream(seed, "accept/gen");
    netsim::Scenario s;
    s.seed = seed;
    s.horizon_s = 1000.0;
    s.scheme = "epidemic";
    s.limits.capacity_bytes = std::size_t{1} << 40;
    s.limits.ttl_s = 1e9;
    s.online_phases = {{0.0, 0.0}};

    const std::size_t n = 2 + rng.bounded(9);
    for (std::size_t i = 0; i < n; ++i) {
        netsim::NodeSpec node;
        node.username = "n" + std::to_string(i);
        s.nodes.push_back(std::move(node));
    }
    std::vector<std::pair<std::size_t, std::size_t>> follow_edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && rng.next_double() < 0.35) {
                s.nodes[i].follows.push_back(s.nodes[j].username);
                follow_edges.emplace_back(i, j);
            }
        }
    }
    if (follow_edges.empty()) {
        s.nodes[0].follows.push_back(s.nodes[1].username);
        follow_edges.emplace_back(0, 1);
    }

    const std::size_t contact_count = 1 + rng.bounded(50);
    double serial_clock = 0.0;
    for (std::size_t c = 0; c < contact_count; ++c) {
        Contact contact;
        if (serial_contacts) {
            contact.t_start = serial_clock + rng.uniform(0.5, 5.0);
            contact.t_end = contact.t_start + rng.uniform(1.0, 12.0);
            serial_clock = contact.t_end;
            if (serial_clock >= 980.0) break;
        } else {
            contact.t_start = rng.uniform(0.0, 900.0);
            contact.t_end = contact.t_start + rng.uniform(1.0, 99.0);
        }
        const std::size_t a = rng.bounded(n);
        std::size_t b = rng.bounded(n - 1);
        if (b >= a) ++b;
        contact.node_a = s.nodes[a].username;
        contact.node_b = s.nodes[b].username;
        contact.bandwidth_bps = 1e15;
        s.contacts.push_back(std::move(contact));
    }

    std::set<std::size_t> has_followers;
    for (const auto& [i, j] : follow_edges) has_followers.insert(j);
    const std::vector<std::size_t> authors(has_followers.begin(), has_followers.end());

    const std::size_t traffic_count = 1 + rng.bounded(10);
    for (std::size_t t = 0; t < traffic_count; ++t) {
        netsim::TrafficSpec item;
        item.created_t = rng.uniform(0.5, 999.5);
        item.size_bytes = rng.bounded(100);
        if (rng.next_double() < 0.4) {
            const auto& [i, j] = follow_edges[rng.bounded(follow_edges.size())];
            item.kind = BundleKind::dm;
            item.author = s.nodes[i].username;
            item.to = s.nodes[j].username;
        } else {
            item.kind = BundleKind::post;
            item.author = s.nodes[authors[rng.bounded(authors.size())]].username;
        }
        s.traffic.push_back(std::move(item));
    }
    return s;
}

struct DeliveredSet {
    std::map<std::pair<std::string, std::string>, double> at;  // (bundle, recipient) -> t
};

struct BundleInfo {
    std::string author;
    double created_t = 0.0;
    std::vector<std::string> dest;
};

void scan_deliveries(const EventLog& log, std::map<std::string, BundleInfo>& bundles,
                     DeliveredSet& delivered) {
    for (const auto& r : log.records()) {
        const std::string type = r.at("type").get<std::string>();
        if (type == "bundle_created") {
            BundleInfo info;
            info.author = r.at("author").get<std::string>();
            info.created_t = r.at("t").get<double>();
            for (const auto& d : r.at("dest")) info.dest.push_back(d.get<std::string>());
            bundles[r.at("bundle").get<std::string>()] = std::move(info);
        } else if (type == "delivered") {
            delivered.at[{r.at("bundle").get<std::string>(),
                          r.at("recipient").get<std::string>()}] = r.at("t").get<double>();
        }
    }
}

// ---------------------------------------------------------------------------
// 1. Delivered pairs and times equal the foremost-journey oracle exactly.

bool criterion_oracle(int num) {
    const auto start = Clock::now();
    for (int i = 0; i < 100; ++i) {
        netsim::Scenario scenario = random_scenario(1000 + i);
        const std::vector<Contact> contacts = scenario.contacts;
        netsim::Simulation sim(std::move(scenario));
        const EventLog& log = sim.run();

        std::map<std::string, BundleInfo> bundles;
        DeliveredSet delivered;
        scan_deliveries(log, bundles, delivered);

        std::size_t reachable = 0;
        for (const auto& [id, info] : bundles) {
            for (const auto& d : info.dest) {
                const auto want = foremost_arrival(contacts, info.author, d, info.created_t);
                const auto it = delivered.at.find({id, d});
                if (want.has_value() != (it != delivered.at.end())) {
                    return report(num, "oracle-equivalence", false,
                                  "scenario " + std::to_string(i) + ": pair (" + id.substr(0, 8) +
                                      ", " + d + ") " +
                                      (want ? "missed a reachable delivery"
                                            : "delivered an unreachable pair"));
                }
                if (want) {
                    ++reachable;
                    if (*want != it->second) {
                        return report(num, "oracle-equivalence", false,
                                      "scenario " + std::to_string(i) + ": pair (" +
                                          id.substr(0, 8) + ", " + d + ") delivered at " +
                                          format_double(it->second) + ", oracle says " +
                                          format_double(*want));
                    }
                }
            }
        }
        if (delivered.at.size() != reachable) {
            return report(num, "oracle-equivalence", false,
                          "scenario " + std::to_string(i) + ": extra delivered pairs");
        }
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 60.0) {
        return report(num, "oracle-equivalence", false,
                      "100 scenarios matched but took " + format_secs(elapsed));
    }
    return report(num, "oracle-equivalence", true,
                  "100 scenarios, pairs and times exact, " + format_secs(elapsed));
}

// ---------------------------------------------------------------------------
// 2. Epidemic's delivered-pair set contains every other scheme's.

bool criterion_dominance(int num) {
    const std::vector<std::string> others{"direct", "first_contact", "snw:L=8", "prophet"};
    for (int i = 0; i < 20; ++i) {
        const netsim::Scenario base = random_scenario(2000 + i, true);

        std::set<std::pair<std::string, std::string>> epidemic_pairs;
        {
            netsim::Simulation sim(base);
            std::map<std::string, BundleInfo> bundles;
            DeliveredSet delivered;
            scan_deliveries(sim.run(), bundles, delivered);
            for (const auto& [pair, t] : delivered.at) epidemic_pairs.insert(pair);
        }
        for (const auto& scheme : others) {
            netsim::Scenario variant = base;
            variant.scheme = scheme;
            netsim::Simulation sim(std::move(variant));
            std::map<std::string, BundleInfo> bundles;
            DeliveredSet delivered;
            scan_deliveries(sim.run(), bundles, delivered);
            for (const auto& [pair, t] : delivered.at) {
                if (epidemic_pairs.count(pair) == 0) {
                    return report(num, "scheme-dominance", false,
                                  "scenario " + std::to_string(i) + ": " + scheme +
                                      " delivered (" + pair.first.substr(0, 8) + ", " +
                                      pair.second + ") that epidemic missed");
                }
            }
        }
    }
    return report(num, "scheme-dominance", true,
                  "20 scenarios x {direct, first_contact, snw:L=8, prophet} all within epidemic");
}

// ---------------------------------------------------------------------------
// 3. Custody replay: spray-and-wait stays within its copy budget and
// first_contact keeps a single custodian, re-derived from the log alone.

bool receive_failed(const EventLog& log, std::size_t i, const std::string& to,
                    const std::string& bundle) {
    const double t = log.at(i).at("t").get<double>();
    for (std::size_t j = i + 1; j < log.size(); ++j) {
        const Record& r = log.at(j);
        if (r.at("t").get<double>() != t) break;
        const std::string type = r.at("type").get<std::string>();
        if (type == "transfer" || type == "bundle_created" || type == "contact_start" ||
            type == "contact_end" || type == "app_state_change") {
            break;
        }
        if (type == "dropped" && r.at("node") == to && r.at("bundle") == bundle) {
            const std::string reason = r.at("reason").get<std::string>();
            if (reason == "no-fit" || reason == "expired") return true;
        }
    }
    return false;
}

std::string replay_custody(const EventLog& log, const SchemeConfig& scheme) {
    const bool snw = scheme.kind == SchemeKind::spray_and_wait;
    std::map<std::string, std::map<std::string, std::uint64_t>> copies;
    std::set<std::string> gone;  // bundles fully dropped or expired

    const auto violation = [&](std::size_t i, const std::string& bundle,
                               const std::string& why) {
        return "record " + std::to_string(i) + ", bundle " + bundle.substr(0, 8) + ": " + why;
    };
    const auto check = [&](std::size_t i, const std::string& bundle) -> std::string {
        std::uint64_t total = 0;
        std::size_t holders = 0;
        for (const auto& [node, c] : copies[bundle]) {
            total += c;
            if (c > 0) ++holders;
        }
        if (snw) {
            if (total > scheme.spray_copies) {
                return violation(i, bundle,
                                 std::to_string(total) + " copies exceed the budget of " +
                                     std::to_string(scheme.spray_copies));
            }
        } else {
            if (holders != 1 && gone.count(bundle) == 0) {
                return violation(i, bundle, std::to_string(holders) + " custodians (want 1)");
            }
        }
        return {};
    };

    for (std::size_t i = 0; i < log.size(); ++i) {
        const Record& r = log.at(i);
        const std::string type = r.at("type").get<std::string>();
        if (type == "bundle_created") {
            const std::string bundle = r.at("bundle").get<std::string>();
            const std::string author = r.at("author").get<std::string>();
            const std::uint64_t c = snw ? r.at("copies").get<std::uint64_t>() : 1;
            if (!receive_failed(log, i, author, bundle)) copies[bundle][author] = c;
            if (auto err = check(i, bundle); !err.empty()) return err;
        } else if (type == "transfer") {
            const std::string bundle = r.at("bundle").get<std::string>();
            const std::string from = r.at("from").get<std::string>();
            const std::string to = r.at("to").get<std::string>();
            const std::uint64_t c = snw ? r.at("copies").get<std::uint64_t>() : 1;
            if (!receive_failed(log, i, to, bundle)) {
                auto& held = copies[bundle][from];
                if (held < c) {
                    return violation(i, bundle,
                                     from + " sent " + std::to_string(c) + " copies holding " +
                                         std::to_string(held));
                }
                held -= c;
                if (held == 0) copies[bundle].erase(from);
                copies[bundle][to] += c;
            }
            if (auto err = check(i, bundle); !err.empty()) return err;
        } else if (type == "dropped") {
            if (r.at("reason") == "capacity") {
                const std::string bundle = r.at("bundle").get<std::string>();
                copies[bundle].erase(r.at("node").get<std::string>());
                if (copies[bundle].empty()) gone.insert(bundle);
            }
        } else if (type == "expired") {
            const std::string bundle = r.at("bundle").get<std::string>();
            copies[bundle].erase(r.at("node").get<std::string>());
            if (copies[bundle].empty()) gone.insert(bundle);
        }
    }
    return {};
}

bool criterion_custody(int num) {
    for (int i = 0; i < 20; ++i) {
        for (const std::string scheme : {"snw:L=8", "first_contact"}) {
            netsim::Scenario scenario = random_scenario(3000 + i, true);
            scenario.scheme = scheme;
            netsim::Simulation sim(std::move(scenario));
            const std::string err = replay_custody(sim.run(), parse_scheme(scheme));
            if (!err.empty()) {
                return report(num, "custody-bounds", false,
                              scheme + " scenario " + std::to_string(i) + ": " + err);
            }
        }
    }
    return report(num, "custody-bounds", true,
                  "20 scenarios replayed: snw:L=8 within budget, first_contact single custody");
}

// ---------------------------------------------------------------------------
// 4. Crypto: reference vectors bit-exact, randomized roundtrips, tampers.

crypto::Seed seed_from_hex(const std::string& hex) {
    const Bytes raw = from_hex(hex);
    crypto::Seed s{};
    std::copy(raw.begin(), raw.end(), s.begin());
    return s;
}

std::string check_reference_vectors() {
    struct Vector {
        const char* seed;
        const char* msg;
        const char* pk;
        const char* sig;
        const char* account_id;
    };
    const Vector ed25519[] = {
        {"9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60", "",
         "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
         "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc"
         "61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b",
         "21fe31dfa154a261626bf854046fd2271b7bed4b6abe45aa58877ef47f9721b9"},
        {"4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb", "72",
         "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
         "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e4"
         "58f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00",
         "39f713d0a644253f04529421b9f51b9b08979d08295959c4f3990ee617f5139f"},
        {"c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7", "af82",
         "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025",
         "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290a"
         "e67f760984dc6594a7c15e9716ed28dc027beceea1ec40a",
         "dac073e0123bdea59dd9b3bda9cf6037f63aca82627d7abcd5c4ac29dd74003e"},
    };
    for (const auto& v : ed25519) {
        const crypto::Identity id = crypto::generate_identity("vectoruser", seed_from_hex(v.seed));
        if (to_hex(ByteView{id.signing_public.data(), id.signing_public.size()}) != v.pk) {
            return "ed25519 public key mismatch";
        }
        if (id.account_id != v.account_id) return "account id mismatch";
        const Bytes msg = from_hex(v.msg);
        const crypto::Signature sig =
            crypto::sign(id.signing_secret, ByteView{msg.data(), msg.size()});
        if (to_hex(ByteView{sig.bytes.data(), sig.bytes.size()}) != v.sig) {
            return "ed25519 signature mismatch";
        }
        if (!crypto::verify(id.signing_public, ByteView{msg.data(), msg.size()}, sig)) {
            return "ed25519 verify rejected a reference signature";
        }
    }

    {
        const Bytes a_sk =
            from_hex("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a");
        const Bytes b_pk =
            from_hex("de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f");
        std::array<std::uint8_t, 32> shared{};
        if (crypto_scalarmult(shared.data(), a_sk.data(), b_pk.data()) != 0 ||
            to_hex(ByteView{shared.data(), shared.size()}) !=
                "4a5d9d5ba4ce2de1728e3bf480350f25e07e21c947d19e3376f09b3c1e161742") {
            return "x25519 shared secret mismatch";
        }
    }
    {
        const Bytes key =
            from_hex("808182838485868788898a8b8c8d8e8f909192939495969798999a9b9c9d9e9f");
        const Bytes nonce = from_hex("070000004041424344454647");
        const Bytes aad = from_hex("50515253c0c1c2c3c4c5c6c7");
        const Bytes pt = from_hex(
            "4c616469657320616e642047656e746c656d656e206f662074686520636c617373206f66202739393a2"
            "04966204920636f756c64206f6666657220796f75206f6e6c79206f6e652074697020666f7220746865"
            "206675747572652c2073756e73637265656e20776f756c642062652069742e");
        Bytes ct(pt.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
        unsigned long long ct_len = 0;
        if (crypto_aead_chacha20poly1305_ietf_encrypt(ct.data(), &ct_len, pt.data(), pt.size(),
                                                      aad.data(), aad.size(), nullptr,
                                                      nonce.data(), key.data()) != 0) {
            return "aead encrypt failed";
        }
        ct.resize(ct_len);
        if (to_hex(ByteView{ct.data(), ct.size()}) !=
            "d31a8d34648e60db7b86afbc53ef7ec2a4aded51296e08fea9e2b5a736ee62d63dbea45e8ca96712"
            "82fafb69da92728b1a71de0a9e060b2905d6a5b67ecd3b3692ddbd7f2d778b8c9803aee328091b58"
            "fab324e4fad675945585808b4831d7bc3ff4def08e4b7a9de576d26586cec64b61161ae10b594f09"
            "e26a7e902ecbd0600691") {
            return "chacha20-poly1305 ciphertext mismatch";
        }
    }
    {
        const Bytes ikm = from_hex("0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b0b");
        const Bytes salt = from_hex("000102030405060708090a0b0c");
        const Bytes info = from_hex("f0f1f2f3f4f5f6f7f8f9");
        const Bytes okm = crypto::detail::hkdf_sha256(ByteView{ikm.data(), ikm.size()},
                                                      ByteView{salt.data(), salt.size()},
                                                      ByteView{info.data(), info.size()}, 42);
        if (to_hex(ByteView{okm.data(), okm.size()}) !=
            "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b88718"
            "5865") {
            return "hkdf-sha256 okm mismatch";
        }
    }
    return {};
}

bool criterion_crypto(int num) {
    const auto start = Clock::now();
    if (const std::string err = check_reference_vectors(); !err.empty()) {
        return report(num, "crypto-soundness", false, err);
    }

    std::vector<crypto::Identity> ids;
    for (std::uint8_t i = 1; i <= 6; ++i) {
        crypto::Seed seed{};
        seed.fill(i);
        ids.push_back(crypto::generate_identity("user" + std::to_string(i), seed));
    }
    SplitMix64 rng = substream(4, "accept/crypto");
    const auto random_bytes = [&rng](std::size_t len) {
        Bytes out(len);
        for (auto& b : out) b = static_cast<std::uint8_t>(rng.bounded(256));
        return out;
    };

    for (int i = 0; i < 10000; ++i) {
        if (i % 2 == 0) {
            const crypto::Identity& signer = ids[rng.bounded(ids.size())];
            const Bytes msg = random_bytes(rng.bounded(300));
            const crypto::Signature sig =
                crypto::sign(signer.signing_secret, ByteView{msg.data(), msg.size()});
            if (!crypto::verify(signer.signing_public, ByteView{msg.data(), msg.size()}, sig)) {
                return report(num, "crypto-soundness", false,
                              "sign/verify roundtrip " + std::to_string(i) + " failed");
            }
        } else {
            const std::size_t a = rng.bounded(ids.size());
            std::size_t b = rng.bounded(ids.size() - 1);
            if (b >= a) ++b;
            const Bytes plain = random_bytes(rng.bounded(200));
            const crypto::Envelope env =
                crypto::seal(ids[a], ids[b].signing_public, ByteView{plain.data(), plain.size()},
                             static_cast<double>(i));
            const Bytes back =
                crypto::open(ids[b].signing_secret, env, ids[a].signing_public);
            if (back != plain) {
                return report(num, "crypto-soundness", false,
                              "seal/open roundtrip " + std::to_string(i) + " failed");
            }
        }
    }

    for (int i = 0; i < 1000; ++i) {
        if (i % 2 == 0) {
            const crypto::Identity& signer = ids[rng.bounded(ids.size())];
            Bytes msg = random_bytes(1 + rng.bounded(100));
            crypto::Signature sig =
                crypto::sign(signer.signing_secret, ByteView{msg.data(), msg.size()});
            if (rng.bounded(2) == 0) {
                msg[rng.bounded(msg.size())] ^=
                    static_cast<std::uint8_t>(1u << rng.bounded(8));
            } else {
                sig.bytes[rng.bounded(sig.bytes.size())] ^=
                    static_cast<std::uint8_t>(1u << rng.bounded(8));
            }
            if (crypto::verify(signer.signing_public, ByteView{msg.data(), msg.size()}, sig)) {
                return report(num, "crypto-soundness", false,
                              "tampered signature " + std::to_string(i) + " accepted");
            }
        } else {
            const std::size_t a = rng.bounded(ids.size());
            std::size_t b = rng.bounded(ids.size() - 1);
            if (b >= a) ++b;
            const Bytes plain = random_bytes(1 + rng.bounded(100));
            const crypto::Envelope env =
                crypto::seal(ids[a], ids[b].signing_public, ByteView{plain.data(), plain.size()},
                             static_cast<double>(i));
            Bytes wire = env.serialize();
            wire[rng.bounded(wire.size())] ^= static_cast<std::uint8_t>(1u << rng.bounded(8));
            try {
                const crypto::Envelope reparsed =
                    crypto::Envelope::parse(ByteView{wire.data(), wire.size()});
                (void)crypto::open(ids[b].signing_secret, reparsed, ids[a].signing_public);
                return report(num, "crypto-soundness", false,
                              "tampered envelope " + std::to_string(i) + " accepted");
            } catch (const crypto::CryptoError&) {
            }
        }
    }
    return report(num, "crypto-soundness", true,
                  "vectors exact, 10000 roundtrips, 1000 tampers rejected, " +
                      format_secs(seconds_since(start)));
}

// ---------------------------------------------------------------------------
// 5. After the registry window closes, traffic causes zero registry calls.

bool criterion_offline(int num) {
    netsim::Scenario s;
    s.seed = 5;
    s.horizon_s = 200.0;
    s.scheme = "epidemic";
    s.online_phases = {{0.0, 0.0}};  // reachable at bootstrap only
    for (const std::string name : {"n0", "n1", "n2", "n3", "n4"}) {
        netsim::NodeSpec node;
        node.username = name;
        s.nodes.push_back(std::move(node));
    }
    s.nodes[1].follows = {"n0"};
    s.nodes[2].follows = {"n0", "n1"};
    s.nodes[3].follows = {"n2"};
    s.nodes[4].follows = {"n3"};
    const std::size_t expected_lookups = 5;  // one per follow edge
    for (std::size_t i = 0; i + 1 < 5; ++i) {
        Contact c;
        c.t_start = 10.0 * static_cast<double>(i + 1);
        c.t_end = c.t_start + 5.0;
        c.node_a = "n" + std::to_string(i);
        c.node_b = "n" + std::to_string(i + 1);
        c.bandwidth_bps = 1e9;
        s.contacts.push_back(std::move(c));
    }
    const auto post = [](const std::string& author, double t) {
        netsim::TrafficSpec item;
        item.kind = BundleKind::post;
        item.author = author;
        item.created_t = t;
        item.size_bytes = 30;
        return item;
    };
    const auto dm = [](const std::string& author, const std::string& to, double t) {
        netsim::TrafficSpec item;
        item.kind = BundleKind::dm;
        item.author = author;
        item.to = to;
        item.created_t = t;
        item.size_bytes = 30;
        return item;
    };
    s.traffic = {post("n0", 5.0), post("n2", 12.0), dm("n2", "n1", 15.0), dm("n4", "n3", 30.0)};

    netsim::Simulation sim(std::move(s));
    const EventLog& log = sim.run();

    std::size_t registers = 0;
    std::size_t lookups = 0;
    for (const auto& r : log.records()) {
        if (r.at("type") != "registry_call") continue;
        const double t = r.at("t").get<double>();
        if (t != 0.0) {
            return report(num, "offline-autonomy", false,
                          "registry call at t=" + format_double(t) + " (" +
                              r.at("op").get<std::string>() + " " +
                              r.at("username").get<std::string>() + ")");
        }
        if (r.at("op") == "register") {
            ++registers;
        } else {
            ++lookups;
        }
    }
    if (registers != 5 || lookups != expected_lookups) {
        return report(num, "offline-autonomy", false,
                      "bootstrap made " + std::to_string(registers) + " registrations and " +
                          std::to_string(lookups) + " lookups (want 5 and " +
                          std::to_string(expected_lookups) + ")");
    }
    // The traffic itself went through: deliveries happened with zero calls.
    bool any_delivered = false;
    for (const auto& r : log.records()) {
        if (r.at("type") == "delivered") any_delivered = true;
    }
    if (!any_delivered) {
        return report(num, "offline-autonomy", false, "no deliveries to exercise the claim");
    }
    return report(num, "offline-autonomy", true,
                  "5 registrations + " + std::to_string(expected_lookups) +
                      " follow lookups at t=0, zero registry calls during traffic");
}

// ---------------------------------------------------------------------------
// 6. The CLI is deterministic: identical runs write identical files.

int run_cli(const std::string& cmd) { return std::system(("SOS_LOG=off " + cmd).c_str()); }

bool criterion_determinism(int num, const std::string& sos_binary) {
    if (sos_binary.empty() || !fs::exists(sos_binary)) {
        return report(num, "determinism", false,
                      "sos binary not found (pass its path as argv[1])");
    }
    const fs::path dir = fs::temp_directory_path() / "sos_acceptance";
    fs::create_directories(dir);
    const auto p = [&](const char* name) { return (dir / name).string(); };

    {
        std::ofstream sc(dir / "scenario.json");
        sc << R"({
  "schema": 1,
  "seed": 5,
  "horizon_s": 400,
  "scheme": "prophet",
  "online_phases": [[0, 0]],
  "nodes": [
    {"username": "ada", "follows": ["grace"], "interests": ["mesh"]},
    {"username": "grace", "interests": ["mesh", "radio"]},
    {"username": "kay", "follows": ["grace", "ada"], "schedule": [["foreground", 120], ["background", 60]]}
  ],
  "connectivity": {"contacts": [
    [10, 60, "ada", "grace", 250000],
    [50, 90, "grace", "kay", 250000],
    [130, 200, "ada", "kay", 250000],
    [210, 260, "ada", "grace", 250000]
  ]},
  "traffic": [
    {"type": "post", "author": "grace", "t": 20, "size_bytes": 80},
    {"type": "dm", "author": "ada", "to": "grace", "t": 45, "size_bytes": 32},
    {"type": "post", "author": "ada", "t": 140, "size_bytes": 200}
  ]
})";
    }

    const std::string base = "'" + sos_binary + "' run --scenario '" + p("scenario.json") + "'";
    if (run_cli(base + " --out '" + p("r1.json") + "' --log '" + p("l1.jsonl") + "'") != 0 ||
        run_cli(base + " --out '" + p("r2.json") + "' --log '" + p("l2.jsonl") + "'") != 0) {
        return report(num, "determinism", false, "sos run exited nonzero");
    }
    const std::string log1 = analytics::serialize_without_timings(EventLog::from_file(p("l1.jsonl")));
    const std::string log2 = analytics::serialize_without_timings(EventLog::from_file(p("l2.jsonl")));
    if (log1.empty() || log1 != log2) {
        return report(num, "determinism", false, "event logs differ between identical runs");
    }
    const std::string rep1 = analytics::report_without_timings(read_file(p("r1.json")));
    const std::string rep2 = analytics::report_without_timings(read_file(p("r2.json")));
    if (rep1.empty() || rep1 != rep2) {
        return report(num, "determinism", false, "reports differ between identical runs");
    }

    const std::string gen = "'" + sos_binary +
                            "' gen-trace --nodes 6 --seed 11 --horizon 600 --width 150 "
                            "--height 150 --range 20";
    if (run_cli(gen + " --out '" + p("t1.csv") + "'") != 0 ||
        run_cli(gen + " --out '" + p("t2.csv") + "'") != 0) {
        return report(num, "determinism", false, "sos gen-trace exited nonzero");
    }
    const std::string t1 = read_file(p("t1.csv"));
    if (t1.empty() || t1 != read_file(p("t2.csv"))) {
        return report(num, "determinism", false, "generated traces differ between identical runs");
    }
    fs::remove_all(dir);
    return report(num, "determinism", true,
                  "run twice: logs and reports byte-identical; gen-trace byte-identical");
}

// ---------------------------------------------------------------------------
// 7. Encounter updates equal an independent evaluation of the three rules.

struct ModelEntry {
    double p = 0.0;
    double last = 0.0;
};
using ModelTable = std::map<std::string, ModelEntry>;

void model_age(ModelTable& table, const ProphetParams& prm, double now) {
    for (auto& [dest, e] : table) {
        const double elapsed = now - e.last;
        if (elapsed > 0.0) {
            e.p *= std::pow(prm.gamma, elapsed / prm.aging_unit_s);
            e.last = now;
        }
    }
}

void model_update(ModelTable& a, const std::string& a_owner, ModelTable& b,
                  const std::string& b_owner, const ProphetParams& prm, double now) {
    model_age(a, prm, now);
    model_age(b, prm, now);
    {
        ModelEntry& e = a[b_owner];
        e.p = e.p + (1.0 - e.p) * prm.p_init;
        e.last = now;
    }
    {
        ModelEntry& e = b[a_owner];
        e.p = e.p + (1.0 - e.p) * prm.p_init;
        e.last = now;
    }
    const ModelTable a_snap = a;
    const ModelTable b_snap = b;
    const double a_via = a.at(b_owner).p;
    for (const auto& [dest, peer] : b_snap) {
        if (dest == a_owner || dest == b_owner) continue;
        const double candidate = a_via * peer.p * prm.beta;
        ModelEntry& e = a[dest];
        if (candidate > e.p) e.p = candidate;
        e.last = now;
    }
    const double b_via = b.at(a_owner).p;
    for (const auto& [dest, peer] : a_snap) {
        if (dest == b_owner || dest == a_owner) continue;
        const double candidate = b_via * peer.p * prm.beta;
        ModelEntry& e = b[dest];
        if (candidate > e.p) e.p = candidate;
        e.last = now;
    }
}

bool criterion_prophet(int num) {
    std::size_t tables_checked = 0;
    for (int run = 0; run < 100; ++run) {
        SplitMix64 rng = substream(7000 + run, "accept/prophet");
        ProphetParams prm;
        prm.p_init = rng.uniform(0.05, 0.95);
        prm.beta = rng.uniform(0.05, 0.95);
        prm.gamma = rng.uniform(0.5, 0.99);
        prm.aging_unit_s = rng.uniform(0.5, 20.0);

        const std::size_t n = 3 + rng.bounded(4);
        std::vector<PredictabilityTable> sim;
        std::vector<ModelTable> model(n);
        std::vector<std::string> owners;
        for (std::size_t i = 0; i < n; ++i) {
            owners.push_back("acct" + std::to_string(i));
            sim.emplace_back(owners.back(), prm);
        }

        double now = 0.0;
        for (int step = 0; step < 10; ++step) {
            now += rng.uniform(0.1, 50.0);
            const std::size_t a = rng.bounded(n);
            std::size_t b = rng.bounded(n - 1);
            if (b >= a) ++b;
            prophet_update(sim[a], sim[b], now);
            model_update(model[a], owners[a], model[b], owners[b], prm, now);

            for (const std::size_t idx : {a, b}) {
                const auto got = sim[idx].snapshot();
                const ModelTable& want = model[idx];
                if (got.size() != want.size()) {
                    return report(num, "predictability-numerics", false,
                                  "run " + std::to_string(run) + ": table " + owners[idx] +
                                      " entry count mismatch");
                }
                for (const auto& [dest, p] : got) {
                    const auto it = want.find(dest);
                    if (it == want.end() || std::abs(p - it->second.p) > 1e-12) {
                        return report(num, "predictability-numerics", false,
                                      "run " + std::to_string(run) + ": P_" + owners[idx] + "(" +
                                          dest + ") = " + format_double(p) + ", model says " +
                                          format_double(it == want.end() ? -1.0 : it->second.p));
                    }
                }
                ++tables_checked;
            }
        }
    }
    return report(num, "predictability-numerics", true,
                  std::to_string(tables_checked) + " randomized tables within 1e-12");
}

// ---------------------------------------------------------------------------
// 8. Metrics on tiny hand-built logs equal hand-computed values exactly.

Record fixture_meta() {
    Record r;
    r["type"] = "run_meta";
    r["t"] = 0.0;
    r["schema"] = 1;
    r["scheme"] = "epidemic";
    r["seed"] = 1;
    r["scenario_digest"] = std::string(64, 'a');
    r["horizon_s"] = 100.0;
    return r;
}

Record fixture_created(const std::string& id, double t, std::vector<std::string> dest) {
    Record r;
    r["type"] = "bundle_created";
    r["t"] = t;
    r["bundle"] = id;
    r["kind"] = "post";
    r["author"] = "author";
    r["dest"] = dest;
    r["size_bytes"] = 300;
    r["ttl_s"] = 86400.0;
    return r;
}

Record fixture_transfer(const std::string& id, double t) {
    Record r;
    r["type"] = "transfer";
    r["t"] = t;
    r["bundle"] = id;
    r["from"] = "a";
    r["to"] = "b";
    r["bytes"] = 300;
    return r;
}

Record fixture_delivered(const std::string& id, double t, const std::string& who) {
    Record r;
    r["type"] = "delivered";
    r["t"] = t;
    r["bundle"] = id;
    r["recipient"] = who;
    r["hop_count"] = 1;
    return r;
}

bool criterion_metrics(int num) {
    {
        // Two of two pairs delivered with latencies {2, 40}; three transfers.
        EventLog log;
        log.append(fixture_meta());
        log.append(fixture_created("b1", 10.0, {"x", "y"}));
        log.append(fixture_transfer("b1", 12.0));
        log.append(fixture_delivered("b1", 12.0, "x"));
        log.append(fixture_transfer("b1", 20.0));
        log.append(fixture_transfer("b1", 45.0));
        log.append(fixture_delivered("b1", 50.0, "y"));
        const analytics::Metrics m = analytics::compute_metrics(log);
        if (m.delivery_ratio != 1.0 || m.overhead_ratio != 0.5 || m.mean_latency_s != 21.0 ||
            m.median_latency_s != 2.0 || m.p95_latency_s != 40.0) {
            return report(num, "metrics-definitions", false, "two-delivery fixture mismatch");
        }
    }
    {
        // Four deliveries with latencies {2, 5, 9, 40}, one transfer each.
        EventLog log;
        log.append(fixture_meta());
        log.append(fixture_created("b1", 0.0, {"p", "q", "r", "s"}));
        const double times[] = {2.0, 5.0, 9.0, 40.0};
        const std::string who[] = {"p", "q", "r", "s"};
        for (int i = 0; i < 4; ++i) {
            log.append(fixture_transfer("b1", times[i]));
            log.append(fixture_delivered("b1", times[i], who[i]));
        }
        const analytics::Metrics m = analytics::compute_metrics(log);
        if (m.delivery_ratio != 1.0 || m.overhead_ratio != 0.0 || m.mean_latency_s != 14.0 ||
            m.median_latency_s != 5.0 || m.p95_latency_s != 40.0) {
            return report(num, "metrics-definitions", false, "four-delivery fixture mismatch");
        }
    }
    {
        // Nothing delivered: ratio 0, overhead per unit, latency left empty.
        EventLog log;
        log.append(fixture_meta());
        log.append(fixture_created("b1", 0.0, {"x"}));
        log.append(fixture_transfer("b1", 1.0));
        log.append(fixture_transfer("b1", 2.0));
        const analytics::Metrics m = analytics::compute_metrics(log);
        if (m.delivery_ratio != 0.0 || m.overhead_ratio != 2.0 ||
            m.mean_latency_s.has_value() || m.median_latency_s.has_value() ||
            m.p95_latency_s.has_value()) {
            return report(num, "metrics-definitions", false, "zero-delivery fixture mismatch");
        }
    }
    return report(num, "metrics-definitions", true,
                  "hand-computed ratios and percentiles reproduced exactly");
}

}  // namespace

int main(int argc, char** argv) {
    const std::string sos_binary = argc > 1 ? argv[1] : "";
    bool ok = true;
    try {
        ok &= criterion_oracle(1);
        ok &= criterion_dominance(2);
        ok &= criterion_custody(3);
        ok &= criterion_crypto(4);
        ok &= criterion_offline(5);
        ok &= criterion_determinism(6, sos_binary);
        ok &= criterion_prophet(7);
        ok &= criterion_metrics(8);
    } catch (const std::exception& e) {
        std::cout << "FAIL - unexpected exception: " << e.what() << "\n";
        return 1;
    }
    std::cout << (ok ? "all 8 criteria passed" : "acceptance FAILED") << "\n";
    return ok ? 0 : 1;
}
