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

// Service configuration, read from a JSON file:
//
//   {
//     "listen": {"udp": "0.0.0.0:5514", "tcp": "0.0.0.0:5514", "tls": "0.0.0.0:6514"},
//     "tls": {"cert_file": "...", "key_file": "...", "ca_file": "..."},
//     "store_dir": "/var/lib/cmdtrace",
//     "fsync": true,
//     "zone_offset": "+01:00",
//     "hmac_key_path": "/etc/cmdtrace/hmac.key",
//     "acks": true,
//     "relay": {"upstream": "central:6514", "transport": "tls", "buffer_capacity": 100000},
//     "api": {"bind": "127.0.0.1:8080", "scenario": "attack_lifecycle.json",
//             "cors_allow": ["http://localhost:5173"], "heartbeat_seconds": 15}
//   }
//
// Relative paths are resolved against the directory of the file. A listener
// set to null is disabled; with "relay" present the collector forwards every
// committed record upstream.

#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/net.hpp"

namespace cmdtrace {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RelayConfig {
    net::Endpoint upstream;
    net::Transport transport = net::Transport::tcp;
    std::size_t buffer_capacity = 100000;
};

struct ApiConfig {
    std::optional<net::Endpoint> bind = net::Endpoint{"127.0.0.1", 8080};
    std::optional<std::filesystem::path> scenario;
    std::vector<std::string> cors_allow;
    std::chrono::seconds heartbeat{15};
};

struct ServiceConfig {
    std::optional<net::Endpoint> listen_udp = net::Endpoint{"0.0.0.0", 5514};
    std::optional<net::Endpoint> listen_tcp = net::Endpoint{"0.0.0.0", 5514};
    std::optional<net::Endpoint> listen_tls;
    net::TlsOptions tls;
    std::filesystem::path store_dir = "store";
    bool fsync = true;
    std::chrono::minutes zone_offset{0};
    std::optional<std::filesystem::path> hmac_key_path;
    bool acks = true;
    std::optional<RelayConfig> relay;
    ApiConfig api;
};

/// Throws ConfigError naming the offending key.
ServiceConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);

/// Contents of the key file without a trailing newline. Throws ConfigError.
std::string read_key_file(const std::filesystem::path& path);

}  // namespace cmdtrace
