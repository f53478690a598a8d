// Copyright 2026 The cmdtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cmdtrace/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cmdtrace/timestamp.hpp"
#include "json.hpp"

namespace cmdtrace {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) throw ConfigError("unknown config key " + where + "." + key);
    }
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
    return v.get<std::string>();
}

std::optional<net::Endpoint> endpoint(const json& obj, const std::string& key, const std::string& where,
                                      std::optional<net::Endpoint> fallback) {
    if (!obj.contains(key)) return fallback;
    if (obj.at(key).is_null()) return std::nullopt;
    try {
        return net::Endpoint::parse(get_string(obj, key, where));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ServiceConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc, "config",
               {"listen", "tls", "store_dir", "fsync", "zone_offset", "hmac_key_path", "acks", "relay", "api"});
    ServiceConfig c;
    try {
        if (doc.contains("listen")) {
            const auto& l = doc.at("listen");
            check_keys(l, "listen", {"udp", "tcp", "tls"});
            c.listen_udp = endpoint(l, "udp", "listen", c.listen_udp);
            c.listen_tcp = endpoint(l, "tcp", "listen", c.listen_tcp);
            c.listen_tls = endpoint(l, "tls", "listen", c.listen_tls);
        }
        if (doc.contains("tls")) {
            const auto& t = doc.at("tls");
            check_keys(t, "tls", {"cert_file", "key_file", "ca_file", "server_name"});
            if (t.contains("cert_file")) c.tls.cert_file = resolve(base_dir, get_string(t, "cert_file", "tls"));
            if (t.contains("key_file")) c.tls.key_file = resolve(base_dir, get_string(t, "key_file", "tls"));
            if (t.contains("ca_file")) c.tls.ca_file = resolve(base_dir, get_string(t, "ca_file", "tls"));
            if (t.contains("server_name")) c.tls.server_name = get_string(t, "server_name", "tls");
        }
        if (doc.contains("store_dir")) c.store_dir = resolve(base_dir, get_string(doc, "store_dir", "config"));
        if (doc.contains("fsync")) c.fsync = doc.at("fsync").get<bool>();
        if (doc.contains("acks")) c.acks = doc.at("acks").get<bool>();
        if (doc.contains("zone_offset")) {
            auto off = parse_utc_offset(get_string(doc, "zone_offset", "config"));
            if (!off) throw ConfigError("config.zone_offset must look like +01:00");
            c.zone_offset = *off;
        }
        if (doc.contains("hmac_key_path")) {
            c.hmac_key_path = resolve(base_dir, get_string(doc, "hmac_key_path", "config"));
        }
        if (doc.contains("relay") && !doc.at("relay").is_null()) {
            const auto& r = doc.at("relay");
            check_keys(r, "relay", {"upstream", "transport", "buffer_capacity"});
            RelayConfig relay;
            auto up = endpoint(r, "upstream", "relay", std::nullopt);
            if (!up) throw ConfigError("relay.upstream is required");
            relay.upstream = *up;
            if (r.contains("transport")) {
                auto t = net::parse_transport(get_string(r, "transport", "relay"));
                if (!t) throw ConfigError("relay.transport must be udp, tcp or tls");
                relay.transport = *t;
            }
            if (r.contains("buffer_capacity")) {
                const auto n = r.at("buffer_capacity").get<std::int64_t>();
                if (n < 1) throw ConfigError("relay.buffer_capacity must be positive");
                relay.buffer_capacity = static_cast<std::size_t>(n);
            }
            c.relay = relay;
        }
        if (doc.contains("api")) {
            const auto& a = doc.at("api");
            check_keys(a, "api", {"bind", "scenario", "cors_allow", "heartbeat_seconds"});
            c.api.bind = endpoint(a, "bind", "api", c.api.bind);
            if (a.contains("scenario") && !a.at("scenario").is_null()) {
                c.api.scenario = resolve(base_dir, get_string(a, "scenario", "api"));
            }
            if (a.contains("cors_allow")) c.api.cors_allow = a.at("cors_allow").get<std::vector<std::string>>();
            if (a.contains("heartbeat_seconds")) {
                const auto s = a.at("heartbeat_seconds").get<std::int64_t>();
                if (s < 1) throw ConfigError("api.heartbeat_seconds must be positive");
                c.api.heartbeat = std::chrono::seconds(s);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string read_key_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open key file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    auto key = buf.str();
    while (!key.empty() && (key.back() == '\n' || key.back() == '\r')) key.pop_back();
    if (key.empty()) throw ConfigError("key file " + path.string() + " is empty");
    return key;
}

}  // namespace cmdtrace
