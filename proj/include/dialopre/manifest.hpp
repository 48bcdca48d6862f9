#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dialopre {

// SHA-256 of a byte string / of a file's contents, lowercase hex.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Record of one file that a pipeline stage read or wrote. Paths are stored
// as given (relative paths stay relative) so manifests from different
// machines compare equal when the tree layout matches.
struct FileRecord {
    std::string path;
    std::string sha256;
    std::uint64_t bytes = 0;

    static FileRecord of(const std::filesystem::path& path, const std::string& recorded_as = "");
    nlohmann::json to_json() const;
    static FileRecord from_json(const nlohmann::json& j);
    bool operator==(const FileRecord&) const = default;
};

// A stage manifest: everything needed to replay the stage and verify the
// replay byte-for-byte — the effective config snapshot, the seed, content
// hashes of every input consumed and every output produced.
struct Manifest {
    std::string subcommand;
    std::uint64_t seed = 0;
    nlohmann::json config;  // effective RunConfig snapshot
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;

    void add_input(const std::filesystem::path& path, const std::string& recorded_as = "");
    void add_output(const std::filesystem::path& path, const std::string& recorded_as = "");

    // Serialized with sorted keys and a trailing newline, so equal manifests
    // are byte-identical on disk.
    std::string dump() const;
    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);
    bool operator==(const Manifest&) const = default;
};

// Exclusive advisory lock on an output directory: creates <dir>/.lock with
// O_EXCL semantics, removes it on destruction. A second acquisition attempt
// fails with DataError naming the lock file. Stale locks (after a crash)
// must be removed by hand; the error message says so.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path lock_path_;
    bool held_ = false;
};

}  // namespace dialopre
