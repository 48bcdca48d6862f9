#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dialopre/autodiff.hpp"
#include "dialopre/matrix.hpp"
#include "dialopre/rng.hpp"

namespace dialopre {

// ------------------------------------------------------------------- config

struct ModelConfig {
    int dim = 32;        // model width (d_u = d_d)
    int heads = 2;
    int d_k = 0;         // per-head key/value width; 0 -> dim / heads
    int ffn_dim = 0;     // feed-forward inner width; 0 -> 2 * dim
    int layers_u = 2;    // N_u: token-level encoder depth
    int layers_d = 2;    // N_d: utterance-level encoder depth
    int layers_dec = 2;  // decoder depth
    int max_utt_tokens = 50;
    int context_size = 5;  // T
    int vocab_size = 0;
    double dropout = 0.1;
    bool tied_output = true;  // logits projection shares the token embedding

    int head_dim() const { return d_k > 0 ? d_k : dim / heads; }
    int ffn() const { return ffn_dim > 0 ? ffn_dim : 2 * dim; }
    void validate() const;  // DataError on violation

    // The published large configuration: width 768, 6 heads of d_k = d_v = 64,
    // 4 + 4 encoder layers, inner dimension 768. Constructible, not trained here.
    static ModelConfig paper_preset(int vocab_size);

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const = default;
};

// --------------------------------------------------------------- parameters

// Named tensors in a canonical declared order (the checkpoint order).
struct ModelParams {
    ModelConfig config;
    std::vector<std::string> names;
    std::vector<Matrix> tensors;
    std::unordered_map<std::string, int> index;

    static ModelParams init(const ModelConfig& config, uint64_t seed);

    Matrix& t(const std::string& name);
    const Matrix& t(const std::string& name) const;
    bool has(const std::string& name) const { return index.count(name) > 0; }
    std::size_t parameter_count() const;

    // Flat binary checkpoint: magic, version, config json, then per tensor
    // (rows, cols, little-endian doubles) in declared order.
    void save(const std::filesystem::path& path) const;
    static ModelParams load(const std::filesystem::path& path);
};

struct Gradients {
    std::vector<Matrix> g;  // parallel to ModelParams::tensors; empty slot = zero
};

// -------------------------------------------------------- graph construction

// Lazily turns named parameter tensors into tape leaves so a loss graph can be
// built; remembers which leaves exist so gradients can be collected after
// backward().
class GraphParams {
public:
    GraphParams(ad::Tape& tape, const ModelParams& params, bool requires_grad = true);

    int n(const std::string& name);  // leaf node id for a named tensor
    const ModelConfig& config() const { return params_->config; }
    Gradients collect() const;       // zero matrices for parameters off the graph

private:
    ad::Tape* tape_;
    const ModelParams* params_;
    bool requires_grad_;
    std::unordered_map<std::string, int> nodes_;
};

namespace graph {

struct Ctx {
    ad::Tape& tape;
    GraphParams& params;
    const ModelConfig& config;
    Rng* drop_rng = nullptr;  // non-null enables dropout (training mode)
};

// Token-level encoder f^u: ids -> final per-token states (n x dim).
int utterance_states(Ctx& ctx, const std::vector<int>& ids);
// Mean pool over rows: states -> 1 x dim.
int pooled(Ctx& ctx, int states);
// Utterance-level encoder f^d over k <= T pooled rows (1 x dim each) -> k x dim.
int context_states(Ctx& ctx, const std::vector<int>& pooled_rows);
// Autoregressive decoder: first input is the language token, then BOS-free
// teacher forcing of targets[0..m-2]; returns m x |V| logits, row j predicting
// targets[j]. Cross-attends over enc_states.
int decoder_logits(Ctx& ctx, int enc_states, int lang_token, const std::vector<int>& targets);
// Tied (or separate) output projection for token-level heads: states -> logits.
int project_logits(Ctx& ctx, int states);

}  // namespace graph

// ------------------------------------------------------ inference operations

struct UtteranceEncoding {
    std::vector<double> embedding;  // dim (the pooled E_u)
    Matrix token_states;            // n x dim
};

struct ContextEncoding {
    std::vector<double> embedding;  // dim (the pooled E_C)
    Matrix utterance_states;        // T x dim
};

// f^u over one utterance. Errors: empty input, id out of vocab, length > max.
UtteranceEncoding encode_utterance(const ModelParams& params, const std::vector<int>& ids);

// f^d over exactly T utterance embeddings (each of length dim).
ContextEncoding encode_context(const ModelParams& params, const std::vector<std::vector<double>>& utt_embeddings);

// Relaxed variant for k in [1, T] slots (next-utterance contexts use T-1).
ContextEncoding encode_context_partial(const ModelParams& params,
                                       const std::vector<std::vector<double>>& utt_embeddings);

// Per-step decoder logits (m x |V|) given frozen encoder states.
Matrix decode_masked_utterance(const ModelParams& params, const Matrix& utterance_states, int lang_token,
                               const std::vector<int>& targets);

}  // namespace dialopre
