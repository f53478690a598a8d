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

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cmdtrace {

struct Ipv4 {
    std::uint32_t value = 0;

    static std::optional<Ipv4> parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;

    friend auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

struct Cidr {
    Ipv4 network;
    int prefix = 32;

    /// `a.b.c.d/n`; a bare address is a /32.
    static std::optional<Cidr> parse(std::string_view text);
    [[nodiscard]] bool contains(Ipv4 addr) const;
    [[nodiscard]] bool overlaps(const Cidr& other) const;
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Cidr&, const Cidr&) = default;
};

}  // namespace cmdtrace
