#include "dialopre/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "dialopre/errors.hpp"

namespace dialopre {

namespace {

std::string digest_to_hex(const unsigned char* digest, unsigned len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
            throw NumericError("sha256: cannot initialize digest");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    void update(const char* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_, data, n) != 1) throw NumericError("sha256: digest update failed");
    }
    std::string finish() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned len = 0;
        if (EVP_DigestFinal_ex(ctx_, digest, &len) != 1) throw NumericError("sha256: digest finalize failed");
        return digest_to_hex(digest, len);
    }

private:
    EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path.string());
    Sha256 h;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
    return h.finish();
}

FileRecord FileRecord::of(const std::filesystem::path& path, const std::string& recorded_as) {
    FileRecord r;
    r.path = recorded_as.empty() ? path.string() : recorded_as;
    r.sha256 = sha256_file(path);
    r.bytes = static_cast<std::uint64_t>(std::filesystem::file_size(path));
    return r;
}

nlohmann::json FileRecord::to_json() const {
    return nlohmann::json{{"path", path}, {"sha256", sha256}, {"bytes", bytes}};
}

FileRecord FileRecord::from_json(const nlohmann::json& j) {
    FileRecord r;
    try {
        r.path = j.at("path").get<std::string>();
        r.sha256 = j.at("sha256").get<std::string>();
        r.bytes = j.at("bytes").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("file record: ") + e.what());
    }
    return r;
}

void Manifest::add_input(const std::filesystem::path& path, const std::string& recorded_as) {
    inputs.push_back(FileRecord::of(path, recorded_as));
}

void Manifest::add_output(const std::filesystem::path& path, const std::string& recorded_as) {
    outputs.push_back(FileRecord::of(path, recorded_as));
}

std::string Manifest::dump() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& r : inputs) in.push_back(r.to_json());
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : outputs) out.push_back(r.to_json());
    const nlohmann::json j{
        {"subcommand", subcommand}, {"seed", seed}, {"config", config}, {"inputs", in}, {"outputs", out}};
    return j.dump(2) + "\n";
}

void Manifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << dump();
    if (!out) throw DataError("short write on manifest: " + path.string());
}

Manifest Manifest::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    Manifest m;
    try {
        m.subcommand = j.at("subcommand").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = j.at("config");
        for (const auto& r : j.at("inputs")) m.inputs.push_back(FileRecord::from_json(r));
        for (const auto& r : j.at("outputs")) m.outputs.push_back(FileRecord::from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    return m;
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    lock_path_ = dir / ".lock";
    const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw DataError("output directory is locked by another run (" + lock_path_.string() +
                        " exists); remove the file if the owning process is gone");
    const std::string pid = std::to_string(::getpid()) + "\n";
    // The pid is advisory; a failed write still leaves a valid lock.
    ssize_t written = ::write(fd, pid.data(), pid.size());
    (void)written;
    ::close(fd);
    held_ = true;
}

DirectoryLock::~DirectoryLock() {
    if (held_) {
        std::error_code ec;
        std::filesystem::remove(lock_path_, ec);
    }
}

}  // namespace dialopre
