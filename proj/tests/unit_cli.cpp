#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dialopre/manifest.hpp"
#include "dialopre/toy_corpus.hpp"

// Integration tests of the pipeline binary: exit codes, manifests, locking,
// seed resolution and the report renderer, each against a generated fixture
// corpus. DIALOPRE_CLI_PATH is injected by the build.

using namespace dialopre;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("dialopre_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the binary through the shell, muting its streams unless the caller
// redirects them; returns the exit code.
int cli(const std::string& args, const std::string& redirect = "> /dev/null 2>&1") {
    const std::string cmd = std::string("\"") + DIALOPRE_CLI_PATH + "\" " + args + " " + redirect;
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\" "; }

// Writes a small bilingual fixture corpus and returns its directory.
fs::path make_fixtures(const std::string& name) {
    const fs::path dir = fresh_dir(name);
    toy::ToyCorpusConfig tc;
    tc.movies = 4;
    tc.conversations_per_movie = 3;
    tc.utterances_per_conversation = 8;
    tc.seed = 11;
    for (const auto& m : toy::generate_toy_corpus(tc)) {
        const auto dump = [&](const std::string& file, const std::vector<std::string>& lines) {
            std::string text;
            for (const auto& l : lines) text += l + "\n";
            write_file(dir / file, text);
        };
        dump(m.movie_id + ".en.jsonl", toy::subtitle_jsonl_lines(m.en));
        dump(m.movie_id + ".fr.jsonl", toy::subtitle_jsonl_lines(m.fr));
        dump(m.movie_id + ".en-fr.align.jsonl", toy::alignment_jsonl_lines(m.links));
    }
    return dir;
}

std::string small_model = "--set dim=16 --set max_utt_tokens=8 --set steps=5 ";

}  // namespace

TEST_CASE("full pipeline runs clean and every manifest hash matches the artifact") {
    const fs::path corpus = make_fixtures("pipe_corpus");
    const fs::path out = fresh_dir("pipe_out");
    // holdout=0.4 puts one of the four fixture movies in the eval split at
    // this seed; the default fraction would hold out none and leave the task
    // stages with no eval contexts to draw from.
    const std::string base =
        "--corpus-dir " + q(corpus) + "--out-dir " + q(out) + "--seed 5 --set holdout=0.4 ";

    CHECK(cli("ingest " + base) == 0);
    CHECK(cli("segment " + base + "--delta-t-ms 6000") == 0);
    CHECK(cli("align " + base) == 0);
    CHECK(cli("vocab " + base) == 0);
    CHECK(cli("pretrain " + base + small_model + "--set modes=mug,tmug,mmug") == 0);
    for (const std::string task : {"ii", "nur", "mii", "mnur"}) {
        CHECK(cli("make-tasks --task " + task + " " + base + "--set n_instances=40") == 0);
        CHECK(cli("evaluate --task " + task + " " + base) == 0);
    }
    CHECK(cli("mi-check " + base + "--joints 3") == 0);
    CHECK(cli("grad-check " + base + "--coords 40") == 0);
    CHECK(cli("report " + base + q(out / "eval" / "ii.metrics.json") + q(out / "eval" / "nur.metrics.json")) == 0);

    // Each stage left a manifest whose recorded outputs hash to what is on
    // disk now, and whose config snapshot is the effective one.
    const std::vector<std::string> manifests = {
        "ingest.manifest.json",        "segment.manifest.json",       "align.manifest.json",
        "vocab.manifest.json",         "pretrain.manifest.json",      "make-tasks.ii.manifest.json",
        "make-tasks.nur.manifest.json", "make-tasks.mii.manifest.json", "make-tasks.mnur.manifest.json",
        "evaluate.ii.manifest.json",   "evaluate.nur.manifest.json",  "evaluate.mii.manifest.json",
        "evaluate.mnur.manifest.json", "mi-check.manifest.json",      "grad-check.manifest.json",
        "report.manifest.json"};
    for (const auto& name : manifests) {
        CAPTURE(name);
        REQUIRE(fs::is_regular_file(out / name));
        const Manifest m = Manifest::load(out / name);
        CHECK(m.seed == 5);
        CHECK(m.config.at("seed").get<std::uint64_t>() == 5);
        CHECK(!m.outputs.empty());
        for (const auto& rec : m.outputs) {
            const fs::path p = fs::path(rec.path).is_absolute() ? fs::path(rec.path) : out / rec.path;
            CAPTURE(rec.path);
            CHECK(sha256_file(p) == rec.sha256);
        }
    }
    const Manifest pre = Manifest::load(out / "pretrain.manifest.json");
    CHECK(pre.config.at("steps").get<int>() == 5);
    CHECK(pre.config.at("modes").get<std::string>() == "mug,tmug,mmug");
}

TEST_CASE("usage errors exit 1, help exits 0") {
    CHECK(cli("") == 1);                        // a subcommand is required
    CHECK(cli("frobnicate") == 1);              // unknown subcommand
    CHECK(cli("make-tasks") == 1);              // --task is required
    CHECK(cli("make-tasks --task bogus") == 1); // not one of ii/nur/mii/mnur
    CHECK(cli("segment --delta-t-ms") == 1);    // flag without its value
    CHECK(cli("--help") == 0);
    CHECK(cli("evaluate --help") == 0);
}

TEST_CASE("data errors exit 2 and name the offending file") {
    const fs::path corpus = make_fixtures("data_corpus");
    const fs::path out = fresh_dir("data_out");
    const fs::path err = out / "stderr.txt";
    const std::string base = "--corpus-dir " + q(corpus) + "--out-dir " + q(out);

    CHECK(cli("ingest --corpus-dir /nonexistent --out-dir " + q(out)) == 2);
    CHECK(cli("segment " + base) == 2);  // ingest has not run
    CHECK(cli("ingest " + base + "--set no_such_key=1") == 2);
    CHECK(cli("report " + base) == 2);  // no metrics files

    // Monolingual pipeline, then a bilingual task: the missing aligned-pair
    // shard is reported by path.
    CHECK(cli("ingest " + base) == 0);
    CHECK(cli("segment " + base) == 0);
    CHECK(cli("vocab " + base) == 0);
    CHECK(cli("pretrain " + base + " " + small_model) == 0);
    CHECK(cli("make-tasks --task mnur " + base, "> /dev/null 2> " + q(err)) == 2);
    const std::string message = read_file(err);
    CHECK(message.find((out / "contexts" / "eval.pairs.jsonl").string()) != std::string::npos);

    // Malformed metrics json is a data error too.
    write_file(out / "bad.metrics.json", "{\"accuracy\": oops}");
    CHECK(cli("report " + base + " " + q(out / "bad.metrics.json")) == 2);
}

TEST_CASE("non-finite training loss exits 3") {
    const fs::path corpus = make_fixtures("num_corpus");
    const fs::path out = fresh_dir("num_out");
    const std::string base = "--corpus-dir " + q(corpus) + "--out-dir " + q(out) + " ";
    REQUIRE(cli("ingest " + base) == 0);
    REQUIRE(cli("segment " + base) == 0);
    REQUIRE(cli("vocab " + base) == 0);
    CHECK(cli("pretrain " + base + "--set dim=16 --set max_utt_tokens=8 --set steps=40 --set lr=1000000") == 3);
}

TEST_CASE("the output directory lock admits one run at a time") {
    const fs::path corpus = make_fixtures("lock_corpus");
    const fs::path out = fresh_dir("lock_out");
    const std::string base = "--corpus-dir " + q(corpus) + "--out-dir " + q(out);
    write_file(out / ".lock", "12345\n");
    CHECK(cli("ingest " + base) == 2);
    fs::remove(out / ".lock");
    CHECK(cli("ingest " + base) == 0);
    CHECK(!fs::exists(out / ".lock"));  // released on exit
}

TEST_CASE("seed resolution: flag > config file > DIALOPRE_SEED > default") {
    const fs::path corpus = make_fixtures("seed_corpus");
    const fs::path out = fresh_dir("seed_out");
    const std::string base = "--corpus-dir " + q(corpus) + "--out-dir " + q(out);
    const auto seed_of = [&] { return Manifest::load(out / "ingest.manifest.json").seed; };

    REQUIRE(cli("ingest " + base) == 0);
    CHECK(seed_of() == 1);  // built-in default

    const std::string env = "DIALOPRE_SEED=99 ";
    REQUIRE(std::system((env + "\"" + DIALOPRE_CLI_PATH + "\" ingest " + base + "> /dev/null 2>&1").c_str()) == 0);
    CHECK(seed_of() == 99);

    const fs::path cfg = out / "run.cfg";
    write_file(cfg, "seed = 7\nsteps = 9  # inline comment\n");
    REQUIRE(std::system((env + "\"" + DIALOPRE_CLI_PATH + "\" ingest " + base + "--config " + q(cfg) +
                         "> /dev/null 2>&1")
                            .c_str()) == 0);
    CHECK(seed_of() == 7);

    REQUIRE(cli("ingest " + base + "--config " + q(cfg) + "--seed 42") == 0);
    CHECK(seed_of() == 42);

    // --set outranks the config file; the snapshot shows the effective value.
    REQUIRE(cli("ingest " + base + "--config " + q(cfg) + "--set steps=3") == 0);
    CHECK(Manifest::load(out / "ingest.manifest.json").config.at("steps").get<int>() == 3);
}

TEST_CASE("replaying a stage yields byte-identical outputs") {
    const fs::path corpus = make_fixtures("replay_corpus");
    const fs::path out = fresh_dir("replay_out");
    const std::string base = "--corpus-dir " + q(corpus) + "--out-dir " + q(out) + "--seed 5 ";
    REQUIRE(cli("ingest " + base) == 0);
    REQUIRE(cli("segment " + base) == 0);
    const Manifest first = Manifest::load(out / "segment.manifest.json");
    REQUIRE(cli("segment " + base) == 0);
    const Manifest second = Manifest::load(out / "segment.manifest.json");
    CHECK(first == second);
    for (const auto& rec : second.outputs) CHECK(sha256_file(out / rec.path) == rec.sha256);
}

TEST_CASE("--delta-t-ms changes segmentation granularity") {
    const fs::path corpus = make_fixtures("delta_corpus");
    const fs::path out = fresh_dir("delta_out");
    const std::string base = "--corpus-dir " + q(corpus) + "--out-dir " + q(out);
    REQUIRE(cli("ingest " + base) == 0);

    const auto conversations = [&] {
        std::size_t n = 0;
        for (const auto& entry : fs::directory_iterator(out / "segment")) {
            std::ifstream in(entry.path());
            std::string line;
            while (std::getline(in, line))
                if (!line.empty()) ++n;
        }
        return n;
    };
    REQUIRE(cli("segment " + base) == 0);
    const std::size_t coarse = conversations();
    // Below the smallest inter-utterance gap every utterance becomes its own
    // conversation.
    REQUIRE(cli("segment " + base + "--delta-t-ms 300") == 0);
    const std::size_t fine = conversations();
    CHECK(fine > coarse);
}

TEST_CASE("report renders a stable table with best-in-column marks") {
    const fs::path out = fresh_dir("report_out");
    write_file(out / "mug.metrics.json",
               nlohmann::json{{"task", "mnur"},
                              {"accuracy", 0.10},
                              {"recall_at", {{1, 0.10}, {2, 0.20}, {5, 0.50}, {10, 1.0}}},
                              {"n_instances", 1000}}
                   .dump());
    write_file(out / "mug+tmug.metrics.json",
               nlohmann::json{{"task", "mnur"},
                              {"accuracy", 0.155},
                              {"recall_at", {{1, 0.155}, {2, 0.305}, {5, 0.625}, {10, 1.0}}},
                              {"n_instances", 1000}}
                   .dump());
    REQUIRE(cli("report --out-dir " + q(out) + q(out / "mug.metrics.json") + q(out / "mug+tmug.metrics.json")) ==
            0);

    const std::string expected =
        "run       task   acc%   R@5%   R@2%   R@1%     n\n"
        "--------  ----  -----  -----  -----  -----  ----\n"
        "mug       mnur   10.0   50.0   20.0   10.0  1000\n"
        "mug+tmug  mnur  15.5*  62.5*  30.5*  15.5*  1000\n"
        "* best in column\n";
    CHECK(read_file(out / "report" / "report.txt") == expected);

    // A classification row leaves the recall columns blank; a single-row
    // table carries no marks.
    write_file(out / "ii.metrics.json",
               nlohmann::json{{"task", "ii"}, {"accuracy", 0.206}, {"n_instances", 500}}.dump());
    REQUIRE(cli("report --out-dir " + q(out) + q(out / "ii.metrics.json")) == 0);
    const std::string single = read_file(out / "report" / "report.txt");
    CHECK(single.find("20.6") != std::string::npos);
    CHECK(single.find('*') == std::string::npos);
    CHECK(single.find('-') != std::string::npos);

    const nlohmann::json j = nlohmann::json::parse(read_file(out / "report" / "report.json"));
    CHECK(j.at("rows").size() == 1);
    CHECK(j.at("rows").at(0).at("accuracy").get<double>() == 0.206);
}
