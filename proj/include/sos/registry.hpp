#pragma once

// The account directory: an append-only username -> public key store with
// first-writer-wins registration, durable before success is reported, plus
// the HTTP service and client speaking the wire protocol:
//
//   POST /v1/accounts  {"username","public_key"} -> 201 {"account_id"} | 409 | 400
//   GET  /v1/accounts/{username}                 -> 200 record | 404
//
// The store is trusted on first use: clients cache looked-up keys forever
// and never contact the registry again for that name.

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "sos/common.hpp"
#include "sos/crypto.hpp"

namespace sos::registry {

struct RegistryRecord {
    std::string username;
    std::string public_key;  // base64 of the raw 32-byte signing key
    std::string account_id;  // lowercase hex SHA-256 of the raw key
    std::int64_t registered_at = 0;  // unix seconds, server wall clock

    bool operator==(const RegistryRecord&) const = default;
};

struct RegistryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DuplicateUsername : RegistryError {
    explicit DuplicateUsername(const std::string& name)
        : RegistryError("duplicate-username: \"" + name + "\"") {}
};
struct InvalidKey : RegistryError {
    using RegistryError::RegistryError;
};
struct CorruptLog : RegistryError {
    using RegistryError::RegistryError;
};
struct RegistryUnreachable : RegistryError {
    using RegistryError::RegistryError;
};

/// Username -> key directory. With a backing path every accepted
/// registration is appended and flushed to the log before the call returns;
/// replaying any prefix of that log yields a valid store.
class RegistryStore {
public:
    static RegistryStore in_memory() { return RegistryStore{}; }

    /// Opens (or creates) a log file and replays it. A malformed or
    /// inconsistent line fails with its 1-based line number.
    static RegistryStore open(const std::string& path) {
        RegistryStore store;
        store.state_->path = path;
        std::ifstream in(path, std::ios::binary);
        if (in) {
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty()) continue;
                store.replay_line(line, lineno);
            }
        }
        store.state_->log.open(path, std::ios::binary | std::ios::app);
        if (!store.state_->log) {
            throw RegistryError(path + ": cannot open registry log for append");
        }
        return store;
    }

    /// First writer wins. The key must be base64 of a 32-byte value; the
    /// account id is derived, never client-supplied.
    RegistryRecord register_account(const std::string& username, const std::string& public_key,
                                    std::int64_t registered_at) {
        if (!crypto::valid_username(username)) {
            throw InvalidKey("invalid-key: bad username \"" + username + "\"");
        }
        const crypto::PublicKey pk = decode_key(public_key);
        RegistryRecord rec;
        rec.username = username;
        rec.public_key = public_key;
        rec.account_id = crypto::account_id_for(pk);
        rec.registered_at = registered_at;

        State& s = *state_;
        std::unique_lock lock(s.mutex);
        if (s.records.count(username) != 0) throw DuplicateUsername(username);
        if (s.log.is_open()) {
            nlohmann::ordered_json j;
            j["username"] = rec.username;
            j["public_key"] = rec.public_key;
            j["account_id"] = rec.account_id;
            j["registered_at"] = rec.registered_at;
            s.log << j.dump() << '\n';
            if (!s.log.flush()) {
                throw RegistryError(s.path + ": append failed, registration not accepted");
            }
        }
        s.records.emplace(username, rec);
        return rec;
    }

    std::optional<RegistryRecord> lookup(const std::string& username) const {
        const State& s = *state_;
        std::shared_lock lock(s.mutex);
        const auto it = s.records.find(username);
        if (it == s.records.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const {
        const State& s = *state_;
        std::shared_lock lock(s.mutex);
        return s.records.size();
    }

private:
    struct State {
        mutable std::shared_mutex mutex;
        std::map<std::string, RegistryRecord> records;
        std::string path;
        std::ofstream log;
    };

    RegistryStore() : state_(std::make_unique<State>()) {}

    static crypto::PublicKey decode_key(const std::string& public_key_b64) {
        try {
            return crypto::key_from_base64(public_key_b64);
        } catch (const crypto::MalformedKey& e) {
            throw InvalidKey(std::string("invalid-key: ") + e.what());
        }
    }

    void replay_line(const std::string& line, std::size_t lineno) {
        State& s = *state_;
        const auto fail = [&](const std::string& why) {
            throw CorruptLog(s.path + ":" + std::to_string(lineno) + ": corrupt-log: " + why);
        };
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail("not a record object");
        if (!j.contains("username") || !j["username"].is_string() ||
            !j.contains("public_key") || !j["public_key"].is_string() ||
            !j.contains("account_id") || !j["account_id"].is_string() ||
            !j.contains("registered_at") || !j["registered_at"].is_number_integer()) {
            fail("missing or mistyped field");
        }
        RegistryRecord rec;
        rec.username = j["username"].get<std::string>();
        rec.public_key = j["public_key"].get<std::string>();
        rec.account_id = j["account_id"].get<std::string>();
        rec.registered_at = j["registered_at"].get<std::int64_t>();
        crypto::PublicKey pk{};
        try {
            pk = crypto::key_from_base64(rec.public_key);
        } catch (const crypto::MalformedKey&) {
            fail("public_key does not decode");
        }
        if (crypto::account_id_for(pk) != rec.account_id) {
            fail("account_id does not match public_key");
        }
        if (!crypto::valid_username(rec.username)) fail("invalid username");
        if (!s.records.emplace(rec.username, rec).second) {
            fail("duplicate username \"" + rec.username + "\"");
        }
    }

    std::unique_ptr<State> state_;
};

/// How nodes reach the registry; lets the simulator interpose reachability
/// gating and call accounting without faking HTTP.
class RegistryClient {
public:
    virtual ~RegistryClient() = default;
    virtual RegistryRecord register_account(const std::string& username,
                                            const std::string& public_key) = 0;
    virtual std::optional<RegistryRecord> lookup(const std::string& username) = 0;
};

class LocalRegistryClient final : public RegistryClient {
public:
    explicit LocalRegistryClient(RegistryStore& store, std::int64_t fixed_registered_at = 0)
        : store_(store), registered_at_(fixed_registered_at) {}

    RegistryRecord register_account(const std::string& username,
                                    const std::string& public_key) override {
        return store_.register_account(username, public_key, registered_at_);
    }

    std::optional<RegistryRecord> lookup(const std::string& username) override {
        return store_.lookup(username);
    }

private:
    RegistryStore& store_;
    std::int64_t registered_at_;
};

}  // namespace sos::registry
