#pragma once

// HTTP front end for the registry store, and the matching client. Split from
// registry.hpp so simulation code never pulls in the HTTP stack.

#include <atomic>
#include <cstdint>
#include <ctime>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sos/registry.hpp"

namespace sos::registry {

/// Serves the wire protocol over a RegistryStore until stop() is called.
class RegistryService {
public:
    explicit RegistryService(RegistryStore& store) : store_(store) {
        server_.Post("/v1/accounts", [this](const httplib::Request& req, httplib::Response& res) {
            handle_register(req, res);
        });
        server_.Get(R"(/v1/accounts/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_lookup(req.matches[1], res);
                    });
    }

    /// Binds and serves on the calling thread; returns false on bind failure.
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    /// Binds, then serves on a background thread. Returns the bound port, or
    /// nullopt on bind failure. Pass port 0 for an ephemeral port.
    std::optional<int> start(const std::string& host, int port) {
        const int bound = port == 0 ? server_.bind_to_any_port(host) : port;
        if (bound < 0) return std::nullopt;
        if (port != 0 && !server_.bind_to_port(host, port)) return std::nullopt;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~RegistryService() { stop(); }

private:
    void handle_register(const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("username") ||
            !body["username"].is_string() || !body.contains("public_key") ||
            !body["public_key"].is_string()) {
            respond(res, 400, {{"error", "bad-request"}});
            return;
        }
        try {
            const RegistryRecord rec =
                store_.register_account(body["username"].get<std::string>(),
                                        body["public_key"].get<std::string>(),
                                        static_cast<std::int64_t>(std::time(nullptr)));
            respond(res, 201, {{"account_id", rec.account_id}});
        } catch (const DuplicateUsername&) {
            respond(res, 409, {{"error", "duplicate-username"}});
        } catch (const InvalidKey& e) {
            respond(res, 400, {{"error", e.what()}});
        }
    }

    void handle_lookup(const std::string& username, httplib::Response& res) {
        const auto rec = store_.lookup(username);
        if (!rec) {
            respond(res, 404, {{"error", "not-found"}});
            return;
        }
        respond(res, 200, {{"username", rec->username},
                           {"public_key", rec->public_key},
                           {"account_id", rec->account_id}});
    }

    static void respond(httplib::Response& res, int status, nlohmann::ordered_json body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    RegistryStore& store_;
    httplib::Server server_;
    std::thread thread_;
};

class HttpRegistryClient final : public RegistryClient {
public:
    HttpRegistryClient(const std::string& host, int port) : client_(host, port) {
        client_.set_connection_timeout(5);
        client_.set_read_timeout(5);
    }

    RegistryRecord register_account(const std::string& username,
                                    const std::string& public_key) override {
        nlohmann::ordered_json body;
        body["username"] = username;
        body["public_key"] = public_key;
        const auto res = client_.Post("/v1/accounts", body.dump(), "application/json");
        if (!res) throw RegistryUnreachable("registry-unreachable: " + to_string(res.error()));
        if (res->status == 409) throw DuplicateUsername(username);
        if (res->status == 400) throw InvalidKey("invalid-key: rejected by registry");
        if (res->status != 201) {
            throw RegistryError("registry error: HTTP " + std::to_string(res->status));
        }
        const auto j = nlohmann::json::parse(res->body);
        RegistryRecord rec;
        rec.username = username;
        rec.public_key = public_key;
        rec.account_id = j.at("account_id").get<std::string>();
        return rec;
    }

    std::optional<RegistryRecord> lookup(const std::string& username) override {
        const auto res = client_.Get("/v1/accounts/" + username);
        if (!res) throw RegistryUnreachable("registry-unreachable: " + to_string(res.error()));
        if (res->status == 404) return std::nullopt;
        if (res->status != 200) {
            throw RegistryError("registry error: HTTP " + std::to_string(res->status));
        }
        const auto j = nlohmann::json::parse(res->body);
        RegistryRecord rec;
        rec.username = j.at("username").get<std::string>();
        rec.public_key = j.at("public_key").get<std::string>();
        rec.account_id = j.at("account_id").get<std::string>();
        return rec;
    }

private:
    httplib::Client client_;
};

}  // namespace sos::registry
