// dialopre — multilingual dialog encoder pipeline driver.
//
// Stages: ingest → segment → align → vocab → pretrain → make-tasks →
// evaluate, plus the mi-check / grad-check self-diagnostics and the report
// table renderer. Every stage resolves one flat RunConfig (command-line
// overrides > config file > DIALOPRE_SEED > built-in defaults), takes an
// exclusive lock on the output directory, and writes a manifest recording
// the effective config, the seed, and content hashes of every file read and
// written, so any stage can be replayed and verified byte-for-byte.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dialopre/corpus.hpp"
#include "dialopre/errors.hpp"
#include "dialopre/manifest.hpp"
#include "dialopre/mi.hpp"
#include "dialopre/model.hpp"
#include "dialopre/objectives.hpp"
#include "dialopre/optimizer.hpp"
#include "dialopre/rng.hpp"
#include "dialopre/run_config.hpp"
#include "dialopre/tasks.hpp"
#include "dialopre/trainer.hpp"
#include "dialopre/vocab.hpp"

namespace fs = std::filesystem;
using namespace dialopre;

namespace {

// ------------------------------------------------------------ file helpers

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) {
        text += l;
        text += '\n';
    }
    write_text(path, text);
}

nlohmann::json parse_json(const std::string& text, const std::string& where) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed json in " + where + ": " + e.what());
    }
}

fs::path require_file(const fs::path& path, const std::string& hint) {
    if (!fs::is_regular_file(path)) throw DataError("missing " + hint + ": " + path.string());
    return path;
}

// --------------------------------------------------------- file discovery
//
// Corpus layout: <movie>.<lang>.jsonl subtitle streams and
// <movie>.<langA>-<langB>.align.jsonl alignment links; movie ids must be
// dot-free. Stage outputs follow the same naming with a stage suffix.

std::vector<std::string> dot_parts(const std::string& filename) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : filename) {
        if (ch == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::optional<std::pair<Lang, Lang>> parse_lang_pair(const std::string& s) {
    const auto dash = s.find('-');
    if (dash == std::string::npos) return std::nullopt;
    const std::string a = s.substr(0, dash), b = s.substr(dash + 1);
    if (!is_lang_tag(a) || !is_lang_tag(b)) return std::nullopt;
    return std::make_pair(lang_from_string(a), lang_from_string(b));
}

struct SubtitleFile {
    fs::path path;
    std::string movie_id;
    Lang lang = Lang::en;
};

struct LangPairFile {
    fs::path path;
    std::string movie_id;
    Lang a = Lang::en;
    Lang b = Lang::fr;
};

std::vector<fs::path> sorted_regular_files(const fs::path& dir, const std::string& hint) {
    if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string() + " (" + hint + ")");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

// <movie>.<lang>.jsonl (and <movie>.<lang>.conversations.jsonl with the
// suffix argument "conversations").
std::vector<SubtitleFile> find_lang_files(const fs::path& dir, const std::string& suffix,
                                          const std::string& hint) {
    std::vector<SubtitleFile> out;
    for (const auto& path : sorted_regular_files(dir, hint)) {
        const auto parts = dot_parts(path.filename().string());
        const bool plain = suffix.empty() && parts.size() == 3;
        const bool suffixed = !suffix.empty() && parts.size() == 4 && parts[2] == suffix;
        if ((plain || suffixed) && parts.back() == "jsonl" && is_lang_tag(parts[1]))
            out.push_back({path, parts[0], lang_from_string(parts[1])});
    }
    return out;
}

// <movie>.<langA>-<langB>.<suffix>.jsonl ("align" in the corpus, "pairs"
// under the output directory).
std::vector<LangPairFile> find_lang_pair_files(const fs::path& dir, const std::string& suffix,
                                               const std::string& hint) {
    std::vector<LangPairFile> out;
    for (const auto& path : sorted_regular_files(dir, hint)) {
        const auto parts = dot_parts(path.filename().string());
        if (parts.size() != 4 || parts[2] != suffix || parts[3] != "jsonl") continue;
        const auto langs = parse_lang_pair(parts[1]);
        if (!langs) continue;
        out.push_back({path, parts[0], langs->first, langs->second});
    }
    return out;
}

std::vector<Conversation> load_conversations(const fs::path& path) {
    std::vector<Conversation> out;
    for (const auto& line : read_lines(path)) out.push_back(conversation_from_json(parse_json(line, path.string())));
    return out;
}

// ------------------------------------------------------------------ stages

// Per-stage plumbing: exclusive output-directory lock plus manifest
// assembly. Files under the output directory are recorded relative to it so
// a replay into a different directory yields comparable records.
class Stage {
public:
    Stage(const std::string& name, const RunConfig& cfg) : out_(cfg.out_dir), lock_(out_) {
        manifest_.subcommand = name;
        manifest_.seed = cfg.seed;
        manifest_.config = cfg.to_json();
    }

    const fs::path& out() const { return out_; }
    void input(const fs::path& p) { manifest_.add_input(p, recorded(p)); }
    void output(const fs::path& p) { manifest_.add_output(p, recorded(p)); }
    void finish(const std::string& manifest_name) const { manifest_.save(out_ / manifest_name); }

private:
    std::string recorded(const fs::path& p) const {
        std::error_code ec;
        const fs::path rel = fs::relative(p, out_, ec);
        if (ec || rel.empty()) return p.generic_string();
        const std::string s = rel.generic_string();
        if (s == ".." || s.rfind("../", 0) == 0) return p.generic_string();
        return s;
    }

    fs::path out_;
    DirectoryLock lock_;
    Manifest manifest_;
};

// ------------------------------------------------------------------ ingest

std::vector<std::string> normalized_subtitle_lines(const std::vector<TimedUtterance>& utts) {
    std::vector<std::string> lines;
    lines.reserve(utts.size());
    for (const auto& u : utts) {
        nlohmann::json j{{"start_ms", u.start_ms}, {"end_ms", u.end_ms}, {"text", u.text}};
        if (!u.speaker.empty()) j["speaker"] = u.speaker;
        lines.push_back(j.dump());
    }
    return lines;
}

int run_ingest(const RunConfig& cfg) {
    Stage st("ingest", cfg);
    const auto subs = find_lang_files(cfg.corpus_dir, "", "corpus directory");
    if (subs.empty())
        throw DataError("no subtitle files (<movie>.<lang>.jsonl) found in " + cfg.corpus_dir);
    for (const auto& s : subs) {
        st.input(s.path);
        const auto parsed = read_subtitle_file(s.path, s.lang, s.movie_id);
        const fs::path dst = st.out() / "ingest" / s.path.filename();
        write_lines(dst, normalized_subtitle_lines(parsed.utterances));
        st.output(dst);
        std::cout << "ingest " << s.movie_id << "." << to_string(s.lang) << ": " << parsed.utterances.size()
                  << " utterances";
        if (parsed.skipped > 0) std::cout << " (" << parsed.skipped << " malformed lines skipped)";
        std::cout << "\n";
    }
    st.finish("ingest.manifest.json");
    return 0;
}

// ----------------------------------------------------------------- segment

int run_segment(const RunConfig& cfg) {
    Stage st("segment", cfg);
    const auto subs = find_lang_files(st.out() / "ingest", "", "run ingest first");
    if (subs.empty())
        throw DataError("no ingested subtitle streams in " + (st.out() / "ingest").string() + " (run ingest first)");
    for (const auto& s : subs) {
        st.input(s.path);
        const auto parsed = read_subtitle_file(s.path, s.lang, s.movie_id);
        const auto convs = segment_conversations(parsed.utterances, cfg.delta_t_ms);
        std::vector<std::string> lines;
        lines.reserve(convs.size());
        for (const auto& conv : convs) lines.push_back(conversation_to_json(conv, s.lang).dump());
        const fs::path dst =
            st.out() / "segment" / (s.movie_id + "." + to_string(s.lang) + ".conversations.jsonl");
        write_lines(dst, lines);
        st.output(dst);
        std::cout << "segment " << s.movie_id << "." << to_string(s.lang) << ": " << convs.size()
                  << " conversations\n";
    }
    st.finish("segment.manifest.json");
    return 0;
}

// ------------------------------------------------------------------- align

int run_align(const RunConfig& cfg) {
    Stage st("align", cfg);
    const auto files = find_lang_pair_files(cfg.corpus_dir, "align", "corpus directory");
    if (files.empty())
        throw DataError("no alignment files (<movie>.<langA>-<langB>.align.jsonl) found in " + cfg.corpus_dir);
    for (const auto& f : files) {
        st.input(f.path);
        const auto links = read_alignment_file(f.path);
        const fs::path conv_a = st.out() / "segment" / (f.movie_id + "." + to_string(f.a) + ".conversations.jsonl");
        const fs::path conv_b = st.out() / "segment" / (f.movie_id + "." + to_string(f.b) + ".conversations.jsonl");
        require_file(conv_a, "conversation shard (run segment first)");
        require_file(conv_b, "conversation shard (run segment first)");
        st.input(conv_a);
        st.input(conv_b);
        const auto rebased = rebase_links(load_conversations(conv_a), load_conversations(conv_b), links);
        std::vector<std::string> lines;
        lines.reserve(rebased.size());
        for (const auto& r : rebased) {
            nlohmann::json jlinks = nlohmann::json::array();
            for (const auto& l : r.links)
                jlinks.push_back(nlohmann::json{{"src", l.src_index}, {"tgt", l.tgt_index}, {"conf", l.confidence}});
            lines.push_back(
                nlohmann::json{{"a_index", r.a_index}, {"b_index", r.b_index}, {"links", jlinks}}.dump());
        }
        const fs::path dst = st.out() / "align" /
                             (f.movie_id + "." + to_string(f.a) + "-" + to_string(f.b) + ".pairs.jsonl");
        write_lines(dst, lines);
        st.output(dst);
        std::cout << "align " << f.movie_id << "." << to_string(f.a) << "-" << to_string(f.b) << ": "
                  << links.size() << " links over " << rebased.size() << " conversation pairs\n";
    }
    st.finish("align.manifest.json");
    return 0;
}

// ------------------------------------------------------------------- vocab

int run_vocab(const RunConfig& cfg) {
    Stage st("vocab", cfg);
    const auto files = find_lang_files(st.out() / "segment", "conversations", "run segment first");
    if (files.empty())
        throw DataError("no conversation shards in " + (st.out() / "segment").string() + " (run segment first)");
    std::vector<std::string> texts;
    for (const auto& f : files) {
        // Held-out movies stay out of the vocabulary, like every other
        // training artifact.
        if (is_holdout_movie(f.movie_id, cfg.holdout, cfg.seed)) continue;
        st.input(f.path);
        for (const auto& conv : load_conversations(f.path))
            for (const auto& u : conv.utterances) texts.push_back(u.text);
    }
    if (texts.empty())
        throw DataError("every movie fell into the holdout split; lower the holdout fraction");
    const Vocabulary vocab = Vocabulary::build(texts, cfg.vocab_max);
    const fs::path dst = st.out() / "vocab" / "vocab.json";
    fs::create_directories(dst.parent_path());
    vocab.save(dst);
    st.output(dst);
    std::cout << "vocab: " << vocab.size() << " entries from " << texts.size() << " utterances\n";
    st.finish("vocab.manifest.json");
    return 0;
}

// ----------------------------------------------------------------- pretrain

int run_pretrain(const RunConfig& cfg) {
    Stage st("pretrain", cfg);
    const auto conv_files = find_lang_files(st.out() / "segment", "conversations", "run segment first");
    if (conv_files.empty())
        throw DataError("no conversation shards in " + (st.out() / "segment").string() + " (run segment first)");
    const fs::path vocab_path = require_file(st.out() / "vocab" / "vocab.json", "vocabulary (run vocab first)");
    st.input(vocab_path);
    const Vocabulary vocab = Vocabulary::load(vocab_path);

    // Window every conversation into fixed-size contexts, split by movie.
    std::vector<Context> train_contexts, eval_contexts;
    std::map<std::string, std::vector<Conversation>> convs_by_key;  // "<movie>.<lang>"
    for (const auto& f : conv_files) {
        st.input(f.path);
        auto convs = load_conversations(f.path);
        auto& dst = is_holdout_movie(f.movie_id, cfg.holdout, cfg.seed) ? eval_contexts : train_contexts;
        for (const auto& conv : convs) {
            auto ctxs = window_contexts(conv, vocab, cfg.context_size, cfg.stride, cfg.max_utt_tokens);
            if (static_cast<int>(ctxs.size()) > cfg.max_contexts_per_conversation)
                ctxs.resize(static_cast<std::size_t>(cfg.max_contexts_per_conversation));
            for (auto& c : ctxs) dst.push_back(std::move(c));
        }
        convs_by_key[f.movie_id + "." + to_string(f.lang)] = std::move(convs);
    }

    // Join alignment links into code-switched context pairs, when align ran.
    std::vector<AlignedContextPair> train_pairs, eval_pairs;
    bool have_align = false;
    if (fs::is_directory(st.out() / "align")) {
        for (const auto& f : find_lang_pair_files(st.out() / "align", "pairs", "run align first")) {
            have_align = true;
            st.input(f.path);
            const auto it_a = convs_by_key.find(f.movie_id + "." + to_string(f.a));
            const auto it_b = convs_by_key.find(f.movie_id + "." + to_string(f.b));
            if (it_a == convs_by_key.end() || it_b == convs_by_key.end())
                throw DataError("pair shard " + f.path.string() + " has no matching conversation shards");
            auto& dst = is_holdout_movie(f.movie_id, cfg.holdout, cfg.seed) ? eval_pairs : train_pairs;
            for (const auto& line : read_lines(f.path)) {
                const auto j = parse_json(line, f.path.string());
                const int ai = j.at("a_index").get<int>();
                const int bi = j.at("b_index").get<int>();
                if (ai < 0 || ai >= static_cast<int>(it_a->second.size()) || bi < 0 ||
                    bi >= static_cast<int>(it_b->second.size()))
                    throw DataError("pair shard " + f.path.string() + ": conversation index out of range");
                std::vector<AlignmentLink> links;
                for (const auto& lj : j.at("links"))
                    links.push_back(
                        {lj.at("src").get<int>(), lj.at("tgt").get<int>(), lj.at("conf").get<double>()});
                auto pairs = join_alignments(it_a->second[static_cast<std::size_t>(ai)],
                                             it_b->second[static_cast<std::size_t>(bi)], links, vocab,
                                             cfg.min_conf, cfg.context_size, cfg.stride, cfg.max_utt_tokens);
                if (static_cast<int>(pairs.size()) > cfg.max_contexts_per_conversation)
                    pairs.resize(static_cast<std::size_t>(cfg.max_contexts_per_conversation));
                for (auto& p : pairs) dst.push_back(std::move(p));
            }
        }
    }

    // Context shards: the training inputs plus the held-out side the task
    // generators draw from.
    const fs::path ctx_dir = st.out() / "contexts";
    const auto dump_contexts = [&](const fs::path& path, const std::vector<Context>& list) {
        std::vector<std::string> lines;
        lines.reserve(list.size());
        for (const auto& c : list) lines.push_back(context_to_json(c).dump());
        write_lines(path, lines);
        st.output(path);
    };
    dump_contexts(ctx_dir / "train.contexts.jsonl", train_contexts);
    dump_contexts(ctx_dir / "eval.contexts.jsonl", eval_contexts);
    if (have_align) {
        const auto dump_pairs = [&](const fs::path& path, const std::vector<AlignedContextPair>& list) {
            std::vector<std::string> lines;
            lines.reserve(list.size());
            for (const auto& p : list) lines.push_back(aligned_pair_to_json(p).dump());
            write_lines(path, lines);
            st.output(path);
        };
        dump_pairs(ctx_dir / "train.pairs.jsonl", train_pairs);
        dump_pairs(ctx_dir / "eval.pairs.jsonl", eval_pairs);
    }

    ModelConfig mc = cfg.model_config(vocab.size());
    mc.validate();
    ModelParams params = ModelParams::init(mc, substream_seed(cfg.seed, "model"));

    TrainerConfig tc;
    tc.steps = cfg.steps;
    tc.batch_contexts = cfg.batch_contexts;
    tc.lr = cfg.lr;
    tc.warmup_steps = cfg.warmup;
    tc.p_omega = cfg.p_omega;
    tc.p_c = cfg.p_c;
    tc.modes = cfg.modes;
    tc.seed = substream_seed(cfg.seed, "pretrain");
    const auto result = pretrain(params, train_contexts, train_pairs, vocab, tc);

    const fs::path ckpt = cfg.checkpoint.empty() ? st.out() / "pretrain" / "model.ckpt" : fs::path(cfg.checkpoint);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    params.save(ckpt);
    st.output(ckpt);

    std::vector<std::string> loss_lines;
    loss_lines.reserve(result.logs.size());
    for (const auto& l : result.logs)
        loss_lines.push_back(
            nlohmann::json{{"step", l.step}, {"mode", to_string(l.mode)}, {"total", l.total}}.dump());
    const fs::path losses = st.out() / "pretrain" / "losses.jsonl";
    write_lines(losses, loss_lines);
    st.output(losses);

    std::cout << "pretrain: " << train_contexts.size() << " train contexts, " << train_pairs.size()
              << " train pairs, " << eval_contexts.size() << " eval contexts, " << params.parameter_count()
              << " parameters\n";
    if (!result.logs.empty())
        std::cout << "pretrain: loss " << result.logs.front().total << " -> " << result.logs.back().total
                  << " over " << result.logs.size() << " steps\n";
    st.finish("pretrain.manifest.json");
    return 0;
}

// --------------------------------------------------------------- make-tasks

int run_make_tasks(const RunConfig& cfg, const std::string& task) {
    Stage st("make-tasks", cfg);
    const bool bilingual = task == "mii" || task == "mnur";
    const fs::path ctx_path = st.out() / "contexts" / "eval.contexts.jsonl";
    const fs::path pairs_path = st.out() / "contexts" / "eval.pairs.jsonl";
    require_file(ctx_path, "held-out context shard (run pretrain first)");
    if (bilingual)
        require_file(pairs_path, "held-out aligned-pair shard (run align before pretrain to produce it)");

    st.input(ctx_path);
    std::vector<Context> contexts;
    for (const auto& line : read_lines(ctx_path)) contexts.push_back(context_from_json(parse_json(line, ctx_path.string())));

    std::vector<AlignedContextPair> pairs;
    if (fs::is_regular_file(pairs_path)) {
        st.input(pairs_path);
        for (const auto& line : read_lines(pairs_path))
            pairs.push_back(aligned_pair_from_json(parse_json(line, pairs_path.string())));
    }

    // Same-movie candidate pools: aligned pairs contribute entries with their
    // translation attached, plain contexts fill in the rest.
    tasks::MoviePool pools;
    std::map<std::string, std::set<std::pair<int, std::vector<int>>>> seen;
    const auto add_entry = [&](const std::string& movie, const TokUtt& utt, std::optional<TokUtt> translated) {
        if (!seen[movie].insert({static_cast<int>(utt.lang), utt.ids}).second) return;
        pools[movie].push_back(tasks::PoolEntry{utt, std::move(translated)});
    };
    for (const auto& p : pairs)
        for (std::size_t i = 0; i < p.base.utterances.size(); ++i) {
            std::optional<TokUtt> translated;
            if (i < p.translated.size() && p.translated[i])
                translated = TokUtt{p.translated[i]->ids, p.translated[i]->lang};
            add_entry(p.base.movie_id, p.base.utterances[i], std::move(translated));
        }
    for (const auto& c : contexts)
        for (const auto& u : c.utterances) add_entry(c.movie_id, u, std::nullopt);

    const double p_lprime = bilingual ? cfg.p_lprime : 0.0;
    const std::uint64_t gen_seed = substream_seed(cfg.seed, task);
    std::vector<std::string> lines;
    if (task == "ii" || task == "mii") {
        for (const auto& inst : tasks::make_ii(contexts, pairs, pools, cfg.n_instances, p_lprime, gen_seed))
            lines.push_back(tasks::instance_to_json(inst).dump());
    } else {
        for (const auto& inst :
             tasks::make_nur(contexts, pairs, pools, cfg.n_instances, cfg.distractors, p_lprime, gen_seed))
            lines.push_back(tasks::instance_to_json(inst).dump());
    }
    const fs::path dst = st.out() / "tasks" / (task + ".jsonl");
    write_lines(dst, lines);
    st.output(dst);
    std::cout << "make-tasks " << task << ": " << lines.size() << " instances\n";
    st.finish("make-tasks." + task + ".manifest.json");
    return 0;
}

// ----------------------------------------------------------------- evaluate

int run_evaluate(const RunConfig& cfg, const std::string& task, const std::string& heads_file) {
    Stage st("evaluate", cfg);
    const fs::path inst_path =
        require_file(st.out() / "tasks" / (task + ".jsonl"), "instance file (run make-tasks first)");
    st.input(inst_path);
    const fs::path ckpt = cfg.checkpoint.empty() ? st.out() / "pretrain" / "model.ckpt" : fs::path(cfg.checkpoint);
    require_file(ckpt, "model checkpoint (run pretrain first)");
    st.input(ckpt);
    const ModelParams params = ModelParams::load(ckpt);

    tasks::TaskHeads heads;
    if (heads_file.empty()) {
        // Freshly initialized probe heads: scores reflect the encoder alone
        // (and give the random baseline on an untrained encoder).
        heads = tasks::TaskHeads::init(params.config, substream_seed(cfg.seed, "heads"));
    } else {
        require_file(heads_file, "task heads file");
        st.input(heads_file);
        heads = tasks::TaskHeads::from_json(parse_json(read_text(heads_file), heads_file));
    }

    const auto lines = read_lines(inst_path);
    if (lines.empty()) throw DataError("no instances in " + inst_path.string());
    std::string kind;  // per-line task tag, uniform across the file
    std::vector<int> predictions, labels;
    std::vector<std::vector<int>> rankings;
    for (const auto& line : lines) {
        const auto j = parse_json(line, inst_path.string());
        try {
            const std::string k = j.at("task").get<std::string>();
            if (kind.empty())
                kind = k;
            else if (kind != k)
                throw DataError("mixed task kinds in " + inst_path.string());
            if (k == "ii") {
                const auto inst = tasks::ii_instance_from_json(j);
                predictions.push_back(tasks::score_ii(params, heads, inst));
                labels.push_back(inst.label);
            } else if (k == "nur") {
                const auto inst = tasks::nur_instance_from_json(j);
                rankings.push_back(tasks::score_nur(params, heads, inst));
                labels.push_back(inst.label);
            } else {
                throw DataError("unknown task kind '" + k + "' in " + inst_path.string());
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed instance in " + inst_path.string() + ": " + e.what());
        }
    }
    const tasks::Metrics metrics =
        kind == "ii" ? tasks::compute_metrics(predictions, labels) : tasks::compute_metrics_ranked(rankings, labels);

    auto j = tasks::metrics_to_json(metrics);
    j["task"] = task;
    const fs::path dst = st.out() / "eval" / (task + ".metrics.json");
    write_text(dst, j.dump(2) + "\n");
    st.output(dst);
    std::cout << "evaluate " << task << " ("
              << (heads_file.empty() ? std::string("untrained heads") : heads_file) << "):\n"
              << tasks::metrics_table(metrics);
    st.finish("evaluate." + task + ".manifest.json");
    return 0;
}

// ----------------------------------------------------------------- mi-check

int run_mi_check(const RunConfig& cfg, int joints) {
    Stage st("mi-check", cfg);
    if (joints < 1) throw DataError("--joints must be >= 1");

    // Validity sweep: on random joints, the exact-expectation contrastive
    // bound must sit below both the true MI and ln of the candidate count
    // for every critic, trained or not.
    Rng rng(substream_seed(cfg.seed, "mi_sweep"));
    int bounds_checked = 0;
    double max_slack = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < joints; ++j) {
        const int a = rng.uniform_int(2, 16);
        const int b = rng.uniform_int(2, 16);
        const auto joint = mi::random_joint(a, b, rng);
        const double exact = mi::true_mi(joint);
        const double cap = std::log(static_cast<double>(b));
        std::vector<mi::Critic> critics;
        critics.push_back(mi::Critic::constant(a, b, 0.7));
        critics.push_back(mi::Critic::full_random(a, b, 0.5, rng));
        critics.push_back(mi::Critic::full_random(a, b, 2.0, rng));
        critics.push_back(mi::Critic::factored_random(a, b, 4, 0.5, rng));
        critics.push_back(mi::optimize_critic(joint, false, 1, 150, 0.5, substream_seed(cfg.seed, "mi_opt", j)));
        for (const auto& critic : critics) {
            const double bound = mi::infonce_bound(joint, critic).value;
            max_slack = std::max(max_slack, bound - std::min(exact, cap));
            if (bound > exact + 1e-9 || bound > cap + 1e-9)
                throw NumericError("mi-check: bound " + std::to_string(bound) + " exceeds its ceiling (MI " +
                                   std::to_string(exact) + ", ln|B| " + std::to_string(cap) + ") on joint " +
                                   std::to_string(j));
            ++bounds_checked;
        }
    }

    nlohmann::json experiments = nlohmann::json::array();
    for (const auto& ec : mi::preset_experiments(substream_seed(cfg.seed, "mi_presets"))) {
        const auto rep = mi::run_experiment(ec);
        experiments.push_back(mi::report_to_json(rep));
        std::cout << "mi-check " << rep.joint_id << ": true MI " << rep.true_mi << " nats, bound "
                  << rep.bound_initial << " -> " << rep.bound_final << " (|B~| = " << rep.candidate_set_size
                  << ")\n";
    }

    const nlohmann::json report{{"joints_checked", joints},
                                {"bounds_checked", bounds_checked},
                                {"max_bound_slack", max_slack},
                                {"experiments", experiments}};
    const fs::path dst = st.out() / "mi" / "report.json";
    write_text(dst, report.dump(2) + "\n");
    st.output(dst);
    std::cout << "mi-check: " << bounds_checked << " bounds over " << joints
              << " joints, all below their ceilings (max slack " << max_slack << ")\n";
    st.finish("mi-check.manifest.json");
    return 0;
}

// ---------------------------------------------------------------- grad-check

int run_grad_check(const RunConfig& cfg, int coords) {
    Stage st("grad-check", cfg);
    if (coords < 1) throw DataError("--coords must be >= 1");

    // A fixed micro fixture: the check diagnoses the backward pass itself,
    // so its geometry is pinned rather than configurable.
    const Vocabulary vocab = Vocabulary::build({"a"}, 11);  // 10 reserved ids + one word
    ModelConfig mc;
    mc.dim = 8;
    mc.heads = 2;
    mc.layers_u = 1;
    mc.layers_d = 1;
    mc.layers_dec = 1;
    mc.max_utt_tokens = 6;
    mc.context_size = 3;
    mc.vocab_size = vocab.size();
    mc.dropout = 0.0;
    ModelParams params = ModelParams::init(mc, substream_seed(cfg.seed, "model"));
    // Fresh-init weights are tiny; at trained-like magnitudes the attention
    // path carries enough signal that a backward-pass defect is visible.
    for (auto& t : params.tensors)
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= 3.0;

    TrainBatch batch;
    MaskPlan p1;
    p1.masked_token_positions = {1};
    p1.target_tokens = {9};
    batch.mum_items.push_back({{10, 9, 8}, p1});
    MaskPlan p2;
    p2.masked_token_positions = {0, 2};
    p2.target_tokens = {7, 10};
    batch.mum_items.push_back({{7, 8, 10, 9}, p2});
    Rng rng(substream_seed(cfg.seed, "gradcheck_batch"));
    Context ctx;
    ctx.movie_id = "m";
    ctx.utterances.push_back(TokUtt{{10, 9}, Lang::en});
    ctx.utterances.push_back(TokUtt{{8, 7, 10}, Lang::en});
    ctx.utterances.push_back(TokUtt{{9, 10}, Lang::en});
    batch.gen_items.push_back(corrupt_context(ctx, CorruptionMode::MUG, 0.34, vocab, rng));
    AlignedContextPair pair;
    pair.base = ctx;
    pair.src_lang = Lang::en;
    pair.tgt_lang = Lang::fr;
    pair.translated.assign(3, std::nullopt);
    pair.translated[1] = TranslatedSlot{{10, 8, 9}, Lang::fr, 0.95};
    batch.gen_items.push_back(corrupt_context(pair, CorruptionMode::TMUG, 0.34, vocab, rng));

    constexpr double kEpsilon = 1e-5;
    constexpr double kThreshold = 1e-4;
    const auto res = gradient_check(params, batch, vocab, kEpsilon, coords, substream_seed(cfg.seed, "gradcheck"));
    const bool passed = res.max_rel_error < kThreshold;

    const nlohmann::json report{{"max_rel_error", res.max_rel_error},
                                {"coords_checked", res.coords_checked},
                                {"epsilon", kEpsilon},
                                {"threshold", kThreshold},
                                {"passed", passed}};
    const fs::path dst = st.out() / "gradcheck" / "report.json";
    write_text(dst, report.dump(2) + "\n");
    st.output(dst);
    std::cout << "grad-check: max relative error " << res.max_rel_error << " over " << res.coords_checked
              << " coordinates\n";
    st.finish("grad-check.manifest.json");
    if (!passed)
        throw NumericError("grad-check: max relative error " + std::to_string(res.max_rel_error) +
                           " is not below " + std::to_string(kThreshold));
    return 0;
}

// ------------------------------------------------------------------- report

struct ReportRow {
    std::string name;
    std::string task;
    double accuracy = 0.0;
    std::map<int, double> recall_at;
    long long n_instances = 0;
};

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

std::string format_report(const std::vector<ReportRow>& rows) {
    const std::vector<int> recall_ns = {5, 2, 1};
    std::vector<std::string> header = {"run", "task", "acc%"};
    for (const int n : recall_ns) header.push_back("R@" + std::to_string(n) + "%");
    header.push_back("n");

    // Cell text first, then a '*' on the best value of each metric column
    // (only meaningful when there is a comparison to make).
    std::vector<std::vector<std::string>> cells;
    const bool mark = rows.size() >= 2;
    std::vector<double> best(1 + recall_ns.size(), -std::numeric_limits<double>::infinity());
    for (const auto& r : rows) {
        best[0] = std::max(best[0], r.accuracy);
        for (std::size_t k = 0; k < recall_ns.size(); ++k) {
            const auto it = r.recall_at.find(recall_ns[k]);
            if (it != r.recall_at.end()) best[1 + k] = std::max(best[1 + k], it->second);
        }
    }
    for (const auto& r : rows) {
        std::vector<std::string> row = {r.name, r.task};
        row.push_back(percent(r.accuracy) + (mark && r.accuracy == best[0] ? "*" : ""));
        for (std::size_t k = 0; k < recall_ns.size(); ++k) {
            const auto it = r.recall_at.find(recall_ns[k]);
            if (it == r.recall_at.end())
                row.push_back("-");
            else
                row.push_back(percent(it->second) + (mark && it->second == best[1 + k] ? "*" : ""));
        }
        row.push_back(std::to_string(r.n_instances));
        cells.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }
    std::string text;
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) text += "  ";
            const std::size_t pad = width[c] - row[c].size();
            if (c < 2) {  // run/task left-aligned, numbers right-aligned
                text += row[c];
                text += std::string(pad, ' ');
            } else {
                text += std::string(pad, ' ');
                text += row[c];
            }
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        text += '\n';
    };
    emit(header);
    std::vector<std::string> rule;
    for (std::size_t c = 0; c < header.size(); ++c) rule.push_back(std::string(width[c], '-'));
    emit(rule);
    for (const auto& row : cells) emit(row);
    if (mark) text += "* best in column\n";
    return text;
}

int run_report(const RunConfig& cfg, const std::vector<std::string>& files) {
    Stage st("report", cfg);
    if (files.empty()) throw DataError("report: no metrics files given");
    std::vector<ReportRow> rows;
    for (const auto& f : files) {
        const fs::path path(f);
        require_file(path, "metrics file");
        st.input(path);
        const auto j = parse_json(read_text(path), path.string());
        ReportRow r;
        std::string stem = path.stem().string();  // "ii.metrics" -> "ii"
        if (stem.ends_with(".metrics")) stem.resize(stem.size() - 8);
        r.name = stem;
        try {
            r.task = j.value("task", stem);
            r.accuracy = j.at("accuracy").get<double>();
            r.n_instances = j.value("n_instances", static_cast<long long>(0));
            for (const auto& e : j.value("recall_at", nlohmann::json::array()))
                r.recall_at[e.at(0).get<int>()] = e.at(1).get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed metrics file " + path.string() + ": " + e.what());
        }
        rows.push_back(std::move(r));
    }

    const std::string text = format_report(rows);
    std::cout << text;
    const fs::path txt = st.out() / "report" / "report.txt";
    write_text(txt, text);
    st.output(txt);

    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json recall = nlohmann::json::object();
        for (const auto& [n, v] : r.recall_at) recall[std::to_string(n)] = v;
        jrows.push_back(nlohmann::json{{"name", r.name},
                                       {"task", r.task},
                                       {"accuracy", r.accuracy},
                                       {"recall_at", recall},
                                       {"n_instances", r.n_instances}});
    }
    const fs::path jsn = st.out() / "report" / "report.json";
    write_text(jsn, nlohmann::json{{"rows", jrows}}.dump(2) + "\n");
    st.output(jsn);
    st.finish("report.manifest.json");
    return 0;
}

// ------------------------------------------------------------ configuration

struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::string corpus_dir;
    std::string out_dir;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

void add_common_flags(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config_file, "flat key = value configuration file");
    sub->add_option("--set", f.sets, "override one configuration key (key=value, repeatable)")
        ->allow_extra_args(false);
    sub->add_option("--corpus-dir", f.corpus_dir,
                    "directory of <movie>.<lang>.jsonl subtitles and <movie>.<a>-<b>.align.jsonl links");
    sub->add_option("--out-dir", f.out_dir, "artifact output directory");
    f.seed_opt = sub->add_option("--seed", f.seed, "root random seed (env DIALOPRE_SEED is the fallback)");
}

RunConfig resolve_config(const CommonFlags& f, const std::vector<std::string>& dedicated = {}) {
    RunConfig c;
    if (const char* env = std::getenv("DIALOPRE_SEED")) c.apply("seed", env);
    if (!f.config_file.empty()) c.apply_file(f.config_file);
    c.apply_overrides(f.sets);
    c.apply_overrides(dedicated);
    if (f.seed_opt != nullptr && f.seed_opt->count() > 0) c.seed = f.seed;
    if (!f.corpus_dir.empty()) c.corpus_dir = f.corpus_dir;
    if (!f.out_dir.empty()) c.out_dir = f.out_dir;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multilingual dialog encoder pipeline: subtitle ingestion, hierarchical pretraining, "
                 "probe tasks and diagnostics",
                 "dialopre"};
    app.require_subcommand(1);

    CommonFlags f_ingest;
    auto* c_ingest = app.add_subcommand("ingest", "normalize raw subtitle streams");
    add_common_flags(c_ingest, f_ingest);

    CommonFlags f_segment;
    auto* c_segment = app.add_subcommand("segment", "split subtitle streams into conversations");
    add_common_flags(c_segment, f_segment);
    long long delta_t_ms = 0;
    auto* delta_opt = c_segment->add_option("--delta-t-ms", delta_t_ms, "conversation gap threshold (ms)");

    CommonFlags f_align;
    auto* c_align = app.add_subcommand("align", "rebase cross-lingual links onto conversations");
    add_common_flags(c_align, f_align);

    CommonFlags f_vocab;
    auto* c_vocab = app.add_subcommand("vocab", "build the shared vocabulary from training movies");
    add_common_flags(c_vocab, f_vocab);

    CommonFlags f_pretrain;
    auto* c_pretrain = app.add_subcommand("pretrain", "window contexts and train the hierarchical encoder");
    add_common_flags(c_pretrain, f_pretrain);

    CommonFlags f_make;
    auto* c_make = app.add_subcommand("make-tasks", "generate probe task instances from held-out movies");
    add_common_flags(c_make, f_make);
    std::string make_task;
    c_make->add_option("--task", make_task, "task to generate")
        ->required()
        ->check(CLI::IsMember({"ii", "nur", "mii", "mnur"}));

    CommonFlags f_eval;
    auto* c_eval = app.add_subcommand("evaluate", "score task instances with a checkpoint");
    add_common_flags(c_eval, f_eval);
    std::string eval_task;
    c_eval->add_option("--task", eval_task, "task to evaluate")
        ->required()
        ->check(CLI::IsMember({"ii", "nur", "mii", "mnur"}));
    std::string heads_file;
    c_eval->add_option("--heads", heads_file, "fine-tuned task heads JSON (default: untrained heads)");

    CommonFlags f_mi;
    auto* c_mi = app.add_subcommand("mi-check", "verify the contrastive bound against exact MI oracles");
    add_common_flags(c_mi, f_mi);
    int joints = 20;
    c_mi->add_option("--joints", joints, "random joints to sweep (default 20)");

    CommonFlags f_grad;
    auto* c_grad = app.add_subcommand("grad-check", "finite-difference check of the backward pass");
    add_common_flags(c_grad, f_grad);
    int coords = 200;
    c_grad->add_option("--coords", coords, "parameter coordinates to sample (default 200)");

    CommonFlags f_report;
    auto* c_report = app.add_subcommand("report", "render metrics files as comparison tables");
    add_common_flags(c_report, f_report);
    std::vector<std::string> metrics_files;
    c_report->add_option("files", metrics_files, "metrics JSON files, one table row each");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*c_ingest) return run_ingest(resolve_config(f_ingest));
        if (*c_segment) {
            std::vector<std::string> dedicated;
            if (delta_opt->count() > 0) dedicated.push_back("delta_t_ms=" + std::to_string(delta_t_ms));
            return run_segment(resolve_config(f_segment, dedicated));
        }
        if (*c_align) return run_align(resolve_config(f_align));
        if (*c_vocab) return run_vocab(resolve_config(f_vocab));
        if (*c_pretrain) return run_pretrain(resolve_config(f_pretrain));
        if (*c_make) return run_make_tasks(resolve_config(f_make), make_task);
        if (*c_eval) return run_evaluate(resolve_config(f_eval), eval_task, heads_file);
        if (*c_mi) return run_mi_check(resolve_config(f_mi), joints);
        if (*c_grad) return run_grad_check(resolve_config(f_grad), coords);
        if (*c_report) return run_report(resolve_config(f_report), metrics_files);
    } catch (const DataError& e) {
        std::cerr << "dialopre: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "dialopre: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "dialopre: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
