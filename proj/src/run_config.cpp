#include "dialopre/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dialopre/errors.hpp"
#include "dialopre/vocab.hpp"

namespace dialopre {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
    T out{};
    const char* begin = value.data();
    const char* end = begin + value.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end)
        throw DataError("config key '" + key + "': not an integer: '" + value + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not a number: '" + value + "'");
    }
    if (used != value.size() || !std::isfinite(out))
        throw DataError("config key '" + key + "': not a finite number: '" + value + "'");
    return out;
}

}  // namespace

std::string modes_to_string(const std::vector<CorruptionMode>& modes) {
    std::string out;
    for (const auto m : modes) {
        if (!out.empty()) out += ',';
        std::string name = to_string(m);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        out += name;
    }
    return out;
}

std::vector<CorruptionMode> modes_from_string(const std::string& s) {
    std::vector<CorruptionMode> out;
    std::set<std::string> seen;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::string name = trim(part);
        if (name.empty()) throw DataError("modes: empty entry in '" + s + "'");
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        if (!seen.insert(name).second) throw DataError("modes: duplicate entry '" + part + "'");
        out.push_back(corruption_mode_from_string(name));
    }
    if (out.empty()) throw DataError("modes: at least one of mug, tmug, mmug required");
    return out;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "seed")
        seed = parse_integer<std::uint64_t>(key, value);
    else if (key == "corpus_dir")
        corpus_dir = value;
    else if (key == "out_dir")
        out_dir = value;
    else if (key == "checkpoint")
        checkpoint = value;
    else if (key == "dim")
        dim = parse_integer<int>(key, value);
    else if (key == "heads")
        heads = parse_integer<int>(key, value);
    else if (key == "layers_u")
        layers_u = parse_integer<int>(key, value);
    else if (key == "layers_d")
        layers_d = parse_integer<int>(key, value);
    else if (key == "layers_dec")
        layers_dec = parse_integer<int>(key, value);
    else if (key == "max_utt_tokens")
        max_utt_tokens = parse_integer<int>(key, value);
    else if (key == "dropout")
        dropout = parse_real(key, value);
    else if (key == "delta_t_ms")
        delta_t_ms = parse_integer<long long>(key, value);
    else if (key == "context_size")
        context_size = parse_integer<int>(key, value);
    else if (key == "stride")
        stride = parse_integer<int>(key, value);
    else if (key == "max_contexts_per_conversation")
        max_contexts_per_conversation = parse_integer<int>(key, value);
    else if (key == "min_conf")
        min_conf = parse_real(key, value);
    else if (key == "vocab_max")
        vocab_max = parse_integer<int>(key, value);
    else if (key == "holdout")
        holdout = parse_real(key, value);
    else if (key == "p_omega")
        p_omega = parse_real(key, value);
    else if (key == "p_c")
        p_c = parse_real(key, value);
    else if (key == "p_lprime")
        p_lprime = parse_real(key, value);
    else if (key == "modes")
        modes = modes_from_string(value);
    else if (key == "lr")
        lr = parse_real(key, value);
    else if (key == "steps")
        steps = parse_integer<int>(key, value);
    else if (key == "warmup")
        warmup = parse_integer<int>(key, value);
    else if (key == "batch_contexts")
        batch_contexts = parse_integer<int>(key, value);
    else if (key == "distractors")
        distractors = parse_integer<int>(key, value);
    else if (key == "n_instances")
        n_instances = parse_integer<int>(key, value);
    else
        throw DataError("unknown config key '" + key + "'");
}

void RunConfig::apply_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw DataError("override must be key=value: '" + a + "'");
        apply(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
    }
}

void RunConfig::validate() const {
    // Geometry checks; the real vocab size comes from the built vocabulary,
    // so any positive stand-in exercises the remaining constraints.
    model_config(/*vocab_size=*/Vocabulary::kNumSpecials + 3).validate();
    if (delta_t_ms <= 0) throw DataError("delta_t_ms must be positive");
    if (stride < 0) throw DataError("stride must be >= 0 (0 = non-overlapping)");
    if (max_contexts_per_conversation < 1) throw DataError("max_contexts_per_conversation must be >= 1");
    if (!(min_conf >= 0.0 && min_conf <= 1.0)) throw DataError("min_conf must lie in [0, 1]");
    if (vocab_max < Vocabulary::kNumSpecials + 3) throw DataError("vocab_max too small");
    if (!(holdout >= 0.0 && holdout < 1.0)) throw DataError("holdout must lie in [0, 1)");
    for (const double p : {p_omega, p_c, p_lprime})
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("corruption proportions must lie in [0, 1]");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw DataError("lr must be positive");
    if (steps < 0) throw DataError("steps must be >= 0");
    if (warmup < 0) throw DataError("warmup must be >= 0");
    if (batch_contexts < 1) throw DataError("batch_contexts must be >= 1");
    if (distractors < 1) throw DataError("distractors must be >= 1");
    if (n_instances < 1) throw DataError("n_instances must be >= 1");
}

ModelConfig RunConfig::model_config(int vocab_size) const {
    ModelConfig m;
    m.dim = dim;
    m.heads = heads;
    m.layers_u = layers_u;
    m.layers_d = layers_d;
    m.layers_dec = layers_dec;
    m.max_utt_tokens = max_utt_tokens;
    m.context_size = context_size;
    m.vocab_size = vocab_size;
    m.dropout = dropout;
    return m;
}

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{
        {"seed", seed},
        {"corpus_dir", corpus_dir},
        {"out_dir", out_dir},
        {"checkpoint", checkpoint},
        {"dim", dim},
        {"heads", heads},
        {"layers_u", layers_u},
        {"layers_d", layers_d},
        {"layers_dec", layers_dec},
        {"max_utt_tokens", max_utt_tokens},
        {"dropout", dropout},
        {"delta_t_ms", delta_t_ms},
        {"context_size", context_size},
        {"stride", stride},
        {"max_contexts_per_conversation", max_contexts_per_conversation},
        {"min_conf", min_conf},
        {"vocab_max", vocab_max},
        {"holdout", holdout},
        {"p_omega", p_omega},
        {"p_c", p_c},
        {"p_lprime", p_lprime},
        {"modes", modes_to_string(modes)},
        {"lr", lr},
        {"steps", steps},
        {"warmup", warmup},
        {"batch_contexts", batch_contexts},
        {"distractors", distractors},
        {"n_instances", n_instances},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("run config json: expected an object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string())
            c.apply(key, value.get<std::string>());
        else
            c.apply(key, value.dump());
    }
    return c;
}

}  // namespace dialopre
