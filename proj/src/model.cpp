#include "dialopre/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dialopre/errors.hpp"

namespace dialopre {

// ------------------------------------------------------------------- config

void ModelConfig::validate() const {
    if (dim < 1 || heads < 1) throw DataError("model config: dim and heads must be positive");
    if (d_k == 0 && dim % heads != 0) throw DataError("model config: dim must be divisible by heads");
    if (head_dim() < 1 || ffn() < 1) throw DataError("model config: derived widths must be positive");
    if (layers_u < 1 || layers_d < 1 || layers_dec < 1) throw DataError("model config: layer counts must be >= 1");
    if (max_utt_tokens < 1 || context_size < 1) throw DataError("model config: sequence limits must be positive");
    if (vocab_size < 1) throw DataError("model config: vocab_size is required");
    if (dropout < 0.0 || dropout >= 1.0) throw DataError("model config: dropout must lie in [0, 1)");
}

ModelConfig ModelConfig::paper_preset(int vocab_size) {
    ModelConfig c;
    c.dim = 768;
    c.heads = 6;
    c.d_k = 64;
    c.ffn_dim = 768;
    c.layers_u = 4;
    c.layers_d = 4;
    c.layers_dec = 4;
    c.max_utt_tokens = 50;
    c.context_size = 5;
    c.vocab_size = vocab_size;
    c.dropout = 0.1;
    c.tied_output = true;
    return c;
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"dim", dim},
                          {"heads", heads},
                          {"d_k", d_k},
                          {"ffn_dim", ffn_dim},
                          {"layers_u", layers_u},
                          {"layers_d", layers_d},
                          {"layers_dec", layers_dec},
                          {"max_utt_tokens", max_utt_tokens},
                          {"context_size", context_size},
                          {"vocab_size", vocab_size},
                          {"dropout", dropout},
                          {"tied_output", tied_output}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.dim = j.at("dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.d_k = j.at("d_k").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.layers_u = j.at("layers_u").get<int>();
    c.layers_d = j.at("layers_d").get<int>();
    c.layers_dec = j.at("layers_dec").get<int>();
    c.max_utt_tokens = j.at("max_utt_tokens").get<int>();
    c.context_size = j.at("context_size").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.tied_output = j.at("tied_output").get<bool>();
    c.validate();
    return c;
}

// --------------------------------------------------------------- parameters

namespace {

enum class TensorKind { weight, ln_gain, zero };

struct TensorDecl {
    std::string name;
    int rows, cols;
    TensorKind kind;
};

void declare_block(std::vector<TensorDecl>& d, const std::string& p, const ModelConfig& c, bool decoder_layer) {
    const int dim = c.dim, dk = c.head_dim(), ffn = c.ffn();
    const auto attn = [&](const std::string& ap) {
        for (int h = 0; h < c.heads; ++h) {
            d.push_back({ap + ".q" + std::to_string(h), dim, dk, TensorKind::weight});
            d.push_back({ap + ".k" + std::to_string(h), dim, dk, TensorKind::weight});
            d.push_back({ap + ".v" + std::to_string(h), dim, dk, TensorKind::weight});
            d.push_back({ap + ".o" + std::to_string(h), dk, dim, TensorKind::weight});
        }
        d.push_back({ap + ".bias", 1, dim, TensorKind::zero});
    };
    const auto ln = [&](const std::string& lp) {
        d.push_back({lp + ".g", 1, dim, TensorKind::ln_gain});
        d.push_back({lp + ".b", 1, dim, TensorKind::zero});
    };
    ln(p + ".ln1");
    attn(p + (decoder_layer ? ".self" : ".att"));
    ln(p + ".ln2");
    if (decoder_layer) {
        attn(p + ".cross");
        ln(p + ".ln3");
    }
    d.push_back({p + ".ffn.w1", dim, ffn, TensorKind::weight});
    d.push_back({p + ".ffn.b1", 1, ffn, TensorKind::zero});
    d.push_back({p + ".ffn.w2", ffn, dim, TensorKind::weight});
    d.push_back({p + ".ffn.b2", 1, dim, TensorKind::zero});
}

std::vector<TensorDecl> declare_tensors(const ModelConfig& c) {
    std::vector<TensorDecl> d;
    d.push_back({"tok_emb", c.vocab_size, c.dim, TensorKind::weight});
    d.push_back({"pos_tok", c.max_utt_tokens, c.dim, TensorKind::weight});
    d.push_back({"pos_dec", c.max_utt_tokens + 1, c.dim, TensorKind::weight});
    d.push_back({"pos_utt", c.context_size, c.dim, TensorKind::weight});
    for (int l = 0; l < c.layers_u; ++l) declare_block(d, "u" + std::to_string(l), c, false);
    d.push_back({"u.lnf.g", 1, c.dim, TensorKind::ln_gain});
    d.push_back({"u.lnf.b", 1, c.dim, TensorKind::zero});
    for (int l = 0; l < c.layers_d; ++l) declare_block(d, "d" + std::to_string(l), c, false);
    d.push_back({"d.lnf.g", 1, c.dim, TensorKind::ln_gain});
    d.push_back({"d.lnf.b", 1, c.dim, TensorKind::zero});
    for (int l = 0; l < c.layers_dec; ++l) declare_block(d, "dec" + std::to_string(l), c, true);
    d.push_back({"dec.lnf.g", 1, c.dim, TensorKind::ln_gain});
    d.push_back({"dec.lnf.b", 1, c.dim, TensorKind::zero});
    if (!c.tied_output) d.push_back({"out_proj", c.vocab_size, c.dim, TensorKind::weight});
    d.push_back({"out_bias", 1, c.vocab_size, TensorKind::zero});
    return d;
}

constexpr char kMagic[8] = {'D', 'L', 'P', 'R', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kInitScale = 0.02;

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    Rng rng(substream_seed(seed, "model_init"));
    for (const auto& decl : declare_tensors(config)) {
        Matrix m(decl.rows, decl.cols);
        switch (decl.kind) {
            case TensorKind::weight: m = Matrix::randn(decl.rows, decl.cols, kInitScale, rng); break;
            case TensorKind::ln_gain:
                for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1.0;
                break;
            case TensorKind::zero: break;
        }
        p.index.emplace(decl.name, static_cast<int>(p.tensors.size()));
        p.names.push_back(decl.name);
        p.tensors.push_back(std::move(m));
    }
    return p;
}

Matrix& ModelParams::t(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("model: unknown tensor " + name);
    return tensors[static_cast<std::size_t>(it->second)];
}

const Matrix& ModelParams::t(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("model: unknown tensor " + name);
    return tensors[static_cast<std::size_t>(it->second)];
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& m : tensors) n += m.size();
    return n;
}

void ModelParams::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(kCheckpointVersion);
    const std::string cfg = config.to_json().dump();
    put_u32(static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put_u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& m : tensors) {
        put_u32(static_cast<std::uint32_t>(m.rows()));
        put_u32(static_cast<std::uint32_t>(m.cols()));
        out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!out) throw DataError("short write while saving checkpoint: " + path.string());
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a model checkpoint: " + path.string());
    const auto get_u32 = [&]() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    if (get_u32() != kCheckpointVersion) throw DataError("unsupported checkpoint version: " + path.string());
    const std::uint32_t cfg_len = get_u32();
    std::string cfg(cfg_len, '\0');
    in.read(cfg.data(), cfg_len);
    if (!in) throw DataError("truncated checkpoint header: " + path.string());
    nlohmann::json j = nlohmann::json::parse(cfg, nullptr, false);
    if (j.is_discarded()) throw DataError("corrupt config in checkpoint: " + path.string());

    ModelParams p;
    p.config = ModelConfig::from_json(j);
    const auto decls = declare_tensors(p.config);
    const std::uint32_t count = get_u32();
    if (count != decls.size()) throw DataError("checkpoint tensor count mismatch: " + path.string());
    for (const auto& decl : decls) {
        const std::uint32_t rows = get_u32(), cols = get_u32();
        if (rows != static_cast<std::uint32_t>(decl.rows) || cols != static_cast<std::uint32_t>(decl.cols))
            throw DataError("checkpoint shape mismatch at " + decl.name + ": " + path.string());
        Matrix m(decl.rows, decl.cols);
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint tensors: " + path.string());
        if (!m.all_finite()) throw NumericError("non-finite values in checkpoint tensor " + decl.name);
        p.index.emplace(decl.name, static_cast<int>(p.tensors.size()));
        p.names.push_back(decl.name);
        p.tensors.push_back(std::move(m));
    }
    return p;
}

// -------------------------------------------------------- graph construction

GraphParams::GraphParams(ad::Tape& tape, const ModelParams& params, bool requires_grad)
    : tape_(&tape), params_(&params), requires_grad_(requires_grad) {}

int GraphParams::n(const std::string& name) {
    auto it = nodes_.find(name);
    if (it != nodes_.end()) return it->second;
    const int id = tape_->leaf(params_->t(name), requires_grad_);
    nodes_.emplace(name, id);
    return id;
}

Gradients GraphParams::collect() const {
    Gradients out;
    out.g.reserve(params_->tensors.size());
    for (std::size_t i = 0; i < params_->tensors.size(); ++i) {
        const auto it = nodes_.find(params_->names[i]);
        if (it == nodes_.end()) {
            out.g.emplace_back(params_->tensors[i].rows(), params_->tensors[i].cols());
            continue;
        }
        const Matrix& g = tape_->grad(it->second);
        if (g.empty()) {
            out.g.emplace_back(params_->tensors[i].rows(), params_->tensors[i].cols());
        } else {
            out.g.push_back(g);
        }
    }
    return out;
}

namespace graph {

namespace {

std::vector<int> iota(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

int dropout(Ctx& c, int x) {
    if (!c.drop_rng || c.config.dropout <= 0.0) return x;
    const double p = c.config.dropout;
    const Matrix& v = c.tape.value(x);
    Matrix mask(v.rows(), v.cols());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = c.drop_rng->bernoulli(1.0 - p) ? 1.0 / (1.0 - p) : 0.0;  // inverted dropout
    return c.tape.mul_const(x, std::move(mask));
}

int layer_norm(Ctx& c, const std::string& prefix, int x) {
    return c.tape.layer_norm(x, c.params.n(prefix + ".g"), c.params.n(prefix + ".b"));
}

// Multi-head attention; per-head outputs are projected back to dim and summed.
int attention(Ctx& c, const std::string& prefix, int q_in, int kv_in, bool causal) {
    ad::Tape& t = c.tape;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(c.config.head_dim()));
    int sum = -1;
    for (int h = 0; h < c.config.heads; ++h) {
        const std::string hs = std::to_string(h);
        int q = t.matmul(q_in, c.params.n(prefix + ".q" + hs));
        int k = t.matmul(kv_in, c.params.n(prefix + ".k" + hs));
        int v = t.matmul(kv_in, c.params.n(prefix + ".v" + hs));
        int att = t.softmax_rows(t.scale(t.matmul_nt(q, k), inv_sqrt_dk), causal);
        int head = t.matmul(t.matmul(att, v), c.params.n(prefix + ".o" + hs));
        sum = sum < 0 ? head : t.add(sum, head);
    }
    return t.add_rowvec(sum, c.params.n(prefix + ".bias"));
}

int ffn(Ctx& c, const std::string& prefix, int x) {
    ad::Tape& t = c.tape;
    int h = t.gelu(t.add_rowvec(t.matmul(x, c.params.n(prefix + ".w1")), c.params.n(prefix + ".b1")));
    return t.add_rowvec(t.matmul(h, c.params.n(prefix + ".w2")), c.params.n(prefix + ".b2"));
}

// Pre-LN encoder block: x + Att(LN(x)); x + FFN(LN(x)).
int encoder_block(Ctx& c, const std::string& prefix, int x) {
    int normed = layer_norm(c, prefix + ".ln1", x);
    x = c.tape.add(x, dropout(c, attention(c, prefix + ".att", normed, normed, false)));
    int f = ffn(c, prefix + ".ffn", layer_norm(c, prefix + ".ln2", x));
    return c.tape.add(x, dropout(c, f));
}

void check_ids(const std::vector<int>& ids, const ModelConfig& cfg, const char* where) {
    if (ids.empty()) throw DataError(std::string(where) + ": empty token sequence");
    if (static_cast<int>(ids.size()) > cfg.max_utt_tokens)
        throw DataError(std::string(where) + ": sequence longer than max_utt_tokens");
    for (int id : ids)
        if (id < 0 || id >= cfg.vocab_size) throw DataError(std::string(where) + ": token id out of vocabulary");
}

}  // namespace

int utterance_states(Ctx& c, const std::vector<int>& ids) {
    check_ids(ids, c.config, "encode_utterance");
    ad::Tape& t = c.tape;
    int x = t.add(t.select_rows(c.params.n("tok_emb"), ids),
                  t.select_rows(c.params.n("pos_tok"), iota(static_cast<int>(ids.size()))));
    for (int l = 0; l < c.config.layers_u; ++l) x = encoder_block(c, "u" + std::to_string(l), x);
    return layer_norm(c, "u.lnf", x);
}

int pooled(Ctx& c, int states) { return c.tape.mean_rows(states); }

int context_states(Ctx& c, const std::vector<int>& pooled_rows) {
    const int k = static_cast<int>(pooled_rows.size());
    if (k < 1 || k > c.config.context_size)
        throw DataError("encode_context: needs between 1 and T utterance embeddings");
    ad::Tape& t = c.tape;
    int x = t.add(t.concat_rows(pooled_rows), t.select_rows(c.params.n("pos_utt"), iota(k)));
    for (int l = 0; l < c.config.layers_d; ++l) x = encoder_block(c, "d" + std::to_string(l), x);
    return layer_norm(c, "d.lnf", x);
}

int decoder_logits(Ctx& c, int enc_states, int lang_token, const std::vector<int>& targets) {
    check_ids(targets, c.config, "decode_masked_utterance");
    if (lang_token < 0 || lang_token >= c.config.vocab_size)
        throw DataError("decode_masked_utterance: language token out of vocabulary");
    ad::Tape& t = c.tape;
    // BOS-free teacher forcing: inputs are [lang, y_0, ..., y_{m-2}];
    // row j of the output predicts y_j.
    std::vector<int> inputs{lang_token};
    inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
    int x = t.add(t.select_rows(c.params.n("tok_emb"), inputs),
                  t.select_rows(c.params.n("pos_dec"), iota(static_cast<int>(inputs.size()))));
    for (int l = 0; l < c.config.layers_dec; ++l) {
        const std::string p = "dec" + std::to_string(l);
        int q1 = layer_norm(c, p + ".ln1", x);
        x = t.add(x, dropout(c, attention(c, p + ".self", q1, q1, /*causal=*/true)));
        x = t.add(x, dropout(c, attention(c, p + ".cross", layer_norm(c, p + ".ln2", x), enc_states, false)));
        x = t.add(x, dropout(c, ffn(c, p + ".ffn", layer_norm(c, p + ".ln3", x))));
    }
    return project_logits(c, layer_norm(c, "dec.lnf", x));
}

int project_logits(Ctx& c, int states) {
    const int table = c.config.tied_output ? c.params.n("tok_emb") : c.params.n("out_proj");
    return c.tape.add_rowvec(c.tape.matmul_nt(states, table), c.params.n("out_bias"));
}

}  // namespace graph

// ------------------------------------------------------ inference operations

namespace {

std::vector<double> row_to_vec(const Matrix& m, int r) {
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (int c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m.at(r, c);
    return v;
}

ContextEncoding run_context(const ModelParams& params, const std::vector<std::vector<double>>& embs) {
    ad::Tape tape;
    GraphParams gp(tape, params, /*requires_grad=*/false);
    graph::Ctx ctx{tape, gp, params.config, nullptr};
    std::vector<int> rows;
    for (const auto& e : embs) {
        if (static_cast<int>(e.size()) != params.config.dim)
            throw DataError("encode_context: embedding width != dim");
        Matrix m(1, params.config.dim);
        for (int c = 0; c < params.config.dim; ++c) m.at(0, c) = e[static_cast<std::size_t>(c)];
        rows.push_back(tape.leaf(std::move(m), false));
    }
    int states = graph::context_states(ctx, rows);
    int pool = graph::pooled(ctx, states);
    ContextEncoding out;
    out.utterance_states = tape.value(states);
    out.embedding = row_to_vec(tape.value(pool), 0);
    return out;
}

}  // namespace

UtteranceEncoding encode_utterance(const ModelParams& params, const std::vector<int>& ids) {
    ad::Tape tape;
    GraphParams gp(tape, params, false);
    graph::Ctx ctx{tape, gp, params.config, nullptr};
    int states = graph::utterance_states(ctx, ids);
    int pool = graph::pooled(ctx, states);
    UtteranceEncoding out;
    out.token_states = tape.value(states);
    out.embedding = row_to_vec(tape.value(pool), 0);
    return out;
}

ContextEncoding encode_context(const ModelParams& params, const std::vector<std::vector<double>>& utt_embeddings) {
    if (static_cast<int>(utt_embeddings.size()) != params.config.context_size)
        throw DataError("encode_context: exactly T utterance embeddings required");
    return run_context(params, utt_embeddings);
}

ContextEncoding encode_context_partial(const ModelParams& params,
                                       const std::vector<std::vector<double>>& utt_embeddings) {
    return run_context(params, utt_embeddings);
}

Matrix decode_masked_utterance(const ModelParams& params, const Matrix& utterance_states, int lang_token,
                               const std::vector<int>& targets) {
    if (utterance_states.cols() != params.config.dim)
        throw DataError("decode_masked_utterance: encoder state width != dim");
    ad::Tape tape;
    GraphParams gp(tape, params, false);
    graph::Ctx ctx{tape, gp, params.config, nullptr};
    int enc = tape.leaf(utterance_states, false);
    return tape.value(graph::decoder_logits(ctx, enc, lang_token, targets));
}

}  // namespace dialopre
