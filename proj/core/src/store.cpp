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

#include "cmdtrace/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "text_util.hpp"

namespace cmdtrace {

namespace {

constexpr std::string_view kPrefix = "sandbox";
constexpr std::string_view kSuffix = ".jsonl";

std::string read_prefix(const std::filesystem::path& path, std::uint64_t size) {
    std::string data;
    if (size == 0) return data;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError(StoreErrorKind::io, "cannot open " + path.string());
    data.resize(size);
    in.read(data.data(), static_cast<std::streamsize>(size));
    if (static_cast<std::uint64_t>(in.gcount()) != size) {
        throw StoreError(StoreErrorKind::io, "short read on " + path.string());
    }
    return data;
}

template <typename F>
void for_each_line(std::string_view data, F&& fn) {
    std::size_t start = 0;
    std::uint64_t seq = 0;
    while (start < data.size()) {
        const auto nl = data.find('\n', start);
        if (nl == std::string_view::npos) break;
        fn(++seq, data.substr(start, nl - start));
        start = nl + 1;
    }
}

}  // namespace

std::string dedup_key(const CommandRecord& r) {
    std::string key = std::to_string(r.timestamp.epoch_micros());
    key.push_back('\0');
    key += r.sandbox_id;
    key.push_back('\0');
    key += r.hostname;
    key.push_back('\0');
    key += r.cmd;
    key.push_back('\0');
    key += r.wd;
    return key;
}

struct CentralStore::Sandbox {
    std::string id;
    std::filesystem::path path;
    int fd = -1;
    mutable std::mutex mu;
    std::uint64_t count = 0;
    std::uint64_t size = 0;
    std::optional<Timestamp> last;
    std::unordered_map<std::string, std::uint64_t> seen;

    ~Sandbox() {
        if (fd >= 0) ::close(fd);
    }
};

CentralStore::CentralStore(std::filesystem::path root, StoreOptions options)
    : root_(std::move(root)), options_(options) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw StoreError(StoreErrorKind::io, "cannot create store dir " + root_.string() + ": " + ec.message());
    load_existing();
}

CentralStore::~CentralStore() = default;

std::filesystem::path CentralStore::file_name(std::string_view sandbox_id) {
    return std::string(kPrefix) + std::string(sandbox_id) + std::string(kSuffix);
}

void CentralStore::load_existing() {
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (!detail::starts_with(name, kPrefix) || !detail::ends_with(name, kSuffix)) continue;
        const auto id = name.substr(kPrefix.size(), name.size() - kPrefix.size() - kSuffix.size());
        if (!is_valid_sandbox_id(id)) continue;

        auto sb = std::make_unique<Sandbox>();
        sb->id = id;
        sb->path = entry.path();
        const auto data = read_prefix(sb->path, std::filesystem::file_size(sb->path));
        const auto complete = data.rfind('\n') == std::string::npos ? 0 : data.rfind('\n') + 1;
        if (complete != data.size()) {
            // Partial line from an interrupted append; it was never acknowledged.
            std::filesystem::resize_file(sb->path, complete);
        }
        for_each_line(std::string_view(data).substr(0, complete), [&](std::uint64_t seq, std::string_view line) {
            CommandRecord r;
            try {
                r = parse_canonical_json(line);
            } catch (const ParseError& e) {
                throw StoreError(StoreErrorKind::corrupt,
                                 sb->path.string() + ":" + std::to_string(seq) + ": " + e.what());
            }
            if (r.sandbox_id != id) {
                throw StoreError(StoreErrorKind::corrupt,
                                 sb->path.string() + ":" + std::to_string(seq) + ": foreign sandbox id");
            }
            sb->seen.emplace(dedup_key(r), seq);
            sb->count = seq;
            sb->last = r.timestamp;
        });
        sb->size = complete;
        sb->fd = ::open(sb->path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
        if (sb->fd < 0) throw StoreError(StoreErrorKind::io, "cannot open " + sb->path.string());
        sandboxes_.emplace(id, std::move(sb));
    }
}

CentralStore::Sandbox& CentralStore::sandbox_for(const std::string& id) {
    {
        std::shared_lock lock(map_mu_);
        if (auto it = sandboxes_.find(id); it != sandboxes_.end()) return *it->second;
    }
    std::unique_lock lock(map_mu_);
    if (auto it = sandboxes_.find(id); it != sandboxes_.end()) return *it->second;
    auto sb = std::make_unique<Sandbox>();
    sb->id = id;
    sb->path = root_ / file_name(id);
    sb->fd = ::open(sb->path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (sb->fd < 0) {
        throw StoreError(errno == ENOSPC ? StoreErrorKind::storage_full : StoreErrorKind::io,
                         "cannot create " + sb->path.string() + ": " + std::strerror(errno));
    }
    auto& ref = *sb;
    sandboxes_.emplace(id, std::move(sb));
    return ref;
}

const CentralStore::Sandbox* CentralStore::find(std::string_view id) const {
    std::shared_lock lock(map_mu_);
    auto it = sandboxes_.find(id);
    return it == sandboxes_.end() ? nullptr : it->second.get();
}

CommitResult CentralStore::commit(const CommandRecord& record) {
    if (auto bad = validate(record)) {
        throw StoreError(StoreErrorKind::io, "refusing invalid record: " + bad->field + " " + bad->reason);
    }
    auto& sb = sandbox_for(record.sandbox_id);
    std::lock_guard lock(sb.mu);

    auto key = dedup_key(record);
    if (auto it = sb.seen.find(key); it != sb.seen.end()) return CommitResult{it->second, true};

    std::string line = to_canonical_json(record);
    line.push_back('\n');
    std::string_view rest = line;
    while (!rest.empty()) {
        const ssize_t n = ::write(sb.fd, rest.data(), rest.size());
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) {
            const int err = errno;
            if (::ftruncate(sb.fd, static_cast<off_t>(sb.size)) != 0) {
                // The partial tail is dropped on the next open.
            }
            throw StoreError(err == ENOSPC || err == EDQUOT ? StoreErrorKind::storage_full : StoreErrorKind::io,
                             "append to " + sb.path.string() + ": " + std::strerror(err));
        }
        rest.remove_prefix(static_cast<std::size_t>(n));
    }
    if (options_.fsync && ::fdatasync(sb.fd) != 0) {
        const int err = errno;
        throw StoreError(err == ENOSPC ? StoreErrorKind::storage_full : StoreErrorKind::io,
                         "fdatasync " + sb.path.string() + ": " + std::strerror(err));
    }
    sb.size += line.size();
    sb.count += 1;
    sb.last = record.timestamp;
    sb.seen.emplace(std::move(key), sb.count);

    const StoredRecord stored{sb.count, record};
    std::vector<CommitObserver> observers;
    {
        std::lock_guard olock(observers_mu_);
        observers = observers_;
    }
    for (const auto& obs : observers) obs(stored);
    return CommitResult{sb.count, false};
}

ReadResult CentralStore::read(std::string_view sandbox_id, Since since) const {
    ReadResult result;
    const Sandbox* sb = find(sandbox_id);
    if (sb == nullptr) return result;
    result.known = true;
    std::uint64_t size = 0;
    {
        std::lock_guard lock(sb->mu);
        size = sb->size;
    }
    const auto data = read_prefix(sb->path, size);
    for_each_line(data, [&](std::uint64_t seq, std::string_view line) {
        if (const auto* after = std::get_if<std::uint64_t>(&since.bound); after != nullptr && seq <= *after) return;
        auto r = parse_canonical_json(line);
        if (const auto* at = std::get_if<Timestamp>(&since.bound); at != nullptr && r.timestamp.instant < at->instant) {
            return;
        }
        result.records.push_back(StoredRecord{seq, std::move(r)});
    });
    return result;
}

std::vector<std::string> CentralStore::sandboxes() const {
    std::shared_lock lock(map_mu_);
    std::vector<std::string> ids;
    for (const auto& [id, sb] : sandboxes_) {
        std::lock_guard sl(sb->mu);
        if (sb->count > 0) ids.push_back(id);
    }
    return ids;
}

std::optional<SandboxIndex> CentralStore::index(std::string_view sandbox_id) const {
    const Sandbox* sb = find(sandbox_id);
    if (sb == nullptr) return std::nullopt;
    std::lock_guard lock(sb->mu);
    return SandboxIndex{sb->count, sb->last};
}

std::map<std::string, std::vector<CommandRecord>> CentralStore::snapshot() const {
    std::map<std::string, std::vector<CommandRecord>> out;
    for (const auto& id : sandboxes()) {
        auto& list = out[id];
        for (auto& stored : read(id).records) list.push_back(std::move(stored.record));
    }
    return out;
}

void CentralStore::add_observer(CommitObserver observer) {
    std::lock_guard lock(observers_mu_);
    observers_.push_back(std::move(observer));
}

}  // namespace cmdtrace
