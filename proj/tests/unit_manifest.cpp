#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "dialopre/errors.hpp"
#include "dialopre/manifest.hpp"

using namespace dialopre;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("dialopre_manifest_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

}  // namespace

TEST_CASE("sha256 matches the published test vectors") {
    // FIPS 180-2 examples: the empty string and "abc".
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sha256_file hashes file contents and reports missing files") {
    const auto dir = fresh_dir("hash");
    write_file(dir / "a.txt", "abc");
    CHECK(sha256_file(dir / "a.txt") == sha256_hex("abc"));

    // Binary content with embedded NULs.
    std::string blob(1 << 17, '\0');
    for (std::size_t i = 0; i < blob.size(); ++i) blob[i] = static_cast<char>(i * 131 % 251);
    write_file(dir / "b.bin", blob);
    CHECK(sha256_file(dir / "b.bin") == sha256_hex(blob));

    CHECK_THROWS_AS(sha256_file(dir / "missing.txt"), DataError);
}

TEST_CASE("FileRecord captures path, hash, and size") {
    const auto dir = fresh_dir("record");
    write_file(dir / "x.jsonl", "{\"k\":1}\n");
    const auto r = FileRecord::of(dir / "x.jsonl");
    CHECK(r.path == (dir / "x.jsonl").string());
    CHECK(r.bytes == 8);
    CHECK(r.sha256 == sha256_hex("{\"k\":1}\n"));

    const auto rel = FileRecord::of(dir / "x.jsonl", "ingest/x.jsonl");
    CHECK(rel.path == "ingest/x.jsonl");
    CHECK(rel.sha256 == r.sha256);

    const auto back = FileRecord::from_json(r.to_json());
    CHECK(back == r);
    CHECK_THROWS_AS(FileRecord::from_json(nlohmann::json{{"path", "p"}}), DataError);
}

TEST_CASE("Manifest round-trips and serializes deterministically") {
    const auto dir = fresh_dir("manifest");
    write_file(dir / "in.jsonl", "line\n");
    write_file(dir / "out.jsonl", "result\n");

    Manifest m;
    m.subcommand = "segment";
    m.seed = 42;
    m.config = nlohmann::json{{"delta_t_ms", 6000}, {"seed", 42}};
    m.add_input(dir / "in.jsonl", "in.jsonl");
    m.add_output(dir / "out.jsonl", "out.jsonl");

    // Byte-identical dumps for equal manifests, trailing newline included.
    Manifest copy = m;
    CHECK(m.dump() == copy.dump());
    CHECK(m.dump().back() == '\n');

    m.save(dir / "segment.manifest.json");
    const auto loaded = Manifest::load(dir / "segment.manifest.json");
    CHECK(loaded == m);
    CHECK(loaded.inputs.size() == 1);
    CHECK(loaded.outputs.at(0).sha256 == sha256_hex("result\n"));

    // Saving the loaded manifest reproduces the same bytes.
    loaded.save(dir / "again.json");
    CHECK(sha256_file(dir / "again.json") == sha256_file(dir / "segment.manifest.json"));
}

TEST_CASE("Manifest::load rejects malformed input") {
    const auto dir = fresh_dir("badmanifest");
    write_file(dir / "broken.json", "{not json");
    CHECK_THROWS_AS(Manifest::load(dir / "broken.json"), DataError);
    write_file(dir / "partial.json", "{\"subcommand\": \"x\"}");
    CHECK_THROWS_AS(Manifest::load(dir / "partial.json"), DataError);
    CHECK_THROWS_AS(Manifest::load(dir / "absent.json"), DataError);
}

TEST_CASE("DirectoryLock is exclusive per directory and releases on destruction") {
    const auto dir = fresh_dir("lock");
    {
        DirectoryLock lock(dir);
        CHECK(fs::exists(dir / ".lock"));
        CHECK_THROWS_AS(DirectoryLock{dir}, DataError);
        // A different directory locks independently.
        const auto other = fresh_dir("lock2");
        DirectoryLock lock2(other);
    }
    CHECK(!fs::exists(dir / ".lock"));
    DirectoryLock again(dir);  // reacquirable once released
}
