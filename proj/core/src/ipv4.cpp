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

#include "cmdtrace/ipv4.hpp"

#include "cmdtrace/record.hpp"
#include "text_util.hpp"

namespace cmdtrace {

namespace {

std::uint32_t mask_for(int prefix) {
    return prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix);
}

}  // namespace

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
    if (!is_valid_ipv4_text(text)) return std::nullopt;
    std::uint32_t v = 0;
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
        auto end = text.find('.', start);
        if (end == std::string_view::npos) end = text.size();
        v = (v << 8) | static_cast<std::uint32_t>(*detail::parse_fixed_digits(text.substr(start, end - start)));
        start = end + 1;
    }
    return Ipv4{v};
}

std::string Ipv4::to_string() const {
    return std::to_string(value >> 24) + '.' + std::to_string((value >> 16) & 0xff) + '.' +
           std::to_string((value >> 8) & 0xff) + '.' + std::to_string(value & 0xff);
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
    const auto slash = text.find('/');
    const auto addr = Ipv4::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    int prefix = 32;
    if (slash != std::string_view::npos) {
        const auto p = detail::parse_fixed_digits(text.substr(slash + 1));
        if (!p || *p > 32) return std::nullopt;
        prefix = *p;
    }
    return Cidr{Ipv4{addr->value & mask_for(prefix)}, prefix};
}

bool Cidr::contains(Ipv4 addr) const {
    return (addr.value & mask_for(prefix)) == network.value;
}

bool Cidr::overlaps(const Cidr& other) const {
    const int shorter = prefix < other.prefix ? prefix : other.prefix;
    const auto m = mask_for(shorter);
    return (network.value & m) == (other.network.value & m);
}

std::string Cidr::to_string() const {
    return network.to_string() + '/' + std::to_string(prefix);
}

}  // namespace cmdtrace
