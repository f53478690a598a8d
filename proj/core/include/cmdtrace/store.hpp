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

// Central store: one append-only `sandbox<ID>.jsonl` file per sandbox, one
// canonical-JSON record per line. Line N of a file is sequence number N.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cmdtrace/record.hpp"

namespace cmdtrace {

enum class StoreErrorKind { storage_full, io, corrupt };

class StoreError : public std::runtime_error {
public:
    StoreError(StoreErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    [[nodiscard]] StoreErrorKind kind() const noexcept { return kind_; }

private:
    StoreErrorKind kind_;
};

struct CommitResult {
    std::uint64_t sequence_no = 0;  // for duplicates: the sequence of the original
    bool duplicate = false;
};

struct StoredRecord {
    std::uint64_t seq = 0;
    CommandRecord record;
};

/// Lower bound for read(): records at or after an instant, or strictly after
/// a sequence number.
struct Since {
    std::variant<Timestamp, std::uint64_t> bound{std::uint64_t{0}};

    static Since sequence(std::uint64_t after) { return Since{after}; }
    static Since time(Timestamp at_or_after) { return Since{at_or_after}; }
    static Since beginning() { return Since{std::uint64_t{0}}; }
};

struct ReadResult {
    bool known = false;  // false: UnknownSandbox
    std::vector<StoredRecord> records;
};

struct SandboxIndex {
    std::uint64_t record_count = 0;
    std::optional<Timestamp> last_timestamp;
};

struct StoreOptions {
    bool fsync = true;  // fdatasync before a commit is acknowledged
};

/// Identity used for at-least-once deduplication:
/// (timestamp, sandbox_id, hostname, cmd, wd).
std::string dedup_key(const CommandRecord& record);

class CentralStore {
public:
    /// Invoked after a record is durably appended, while the sandbox's writer
    /// lock is still held, so observers see commits in file order.
    using CommitObserver = std::function<void(const StoredRecord&)>;

    /// Opens (creating if needed) the directory and re-indexes existing files.
    /// A trailing partial line left by a crash is truncated away.
    explicit CentralStore(std::filesystem::path root, StoreOptions options = {});
    ~CentralStore();
    CentralStore(const CentralStore&) = delete;
    CentralStore& operator=(const CentralStore&) = delete;

    /// Thread-safe. Throws StoreError; nothing is acknowledged on failure.
    CommitResult commit(const CommandRecord& record);

    [[nodiscard]] ReadResult read(std::string_view sandbox_id, Since since = Since::beginning()) const;
    [[nodiscard]] std::vector<std::string> sandboxes() const;
    [[nodiscard]] std::optional<SandboxIndex> index(std::string_view sandbox_id) const;
    [[nodiscard]] std::map<std::string, std::vector<CommandRecord>> snapshot() const;

    void add_observer(CommitObserver observer);

    [[nodiscard]] const std::filesystem::path& root() const { return root_; }
    static std::filesystem::path file_name(std::string_view sandbox_id);

private:
    struct Sandbox;

    Sandbox& sandbox_for(const std::string& id);
    [[nodiscard]] const Sandbox* find(std::string_view id) const;
    void load_existing();

    std::filesystem::path root_;
    StoreOptions options_;
    mutable std::shared_mutex map_mu_;
    std::map<std::string, std::unique_ptr<Sandbox>, std::less<>> sandboxes_;
    std::mutex observers_mu_;
    std::vector<CommitObserver> observers_;
};

}  // namespace cmdtrace
