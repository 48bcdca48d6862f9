// Python bindings for the dialopre core: corpus operations, the toy corpus,
// vocabulary, corruption objectives, the trainer, task generation/scoring,
// and the mutual-information analysis toolkit.
//
// Matrices cross the boundary as nested lists of floats; everything else maps
// one struct to one Python class. DataError and NumericError surface as
// dialopre.DataError / dialopre.NumericError.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dialopre/corpus.hpp"
#include "dialopre/errors.hpp"
#include "dialopre/matrix.hpp"
#include "dialopre/mi.hpp"
#include "dialopre/model.hpp"
#include "dialopre/objectives.hpp"
#include "dialopre/optimizer.hpp"
#include "dialopre/rng.hpp"
#include "dialopre/tasks.hpp"
#include "dialopre/toy_corpus.hpp"
#include "dialopre/trainer.hpp"
#include "dialopre/vocab.hpp"

namespace py = pybind11;
using namespace dialopre;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.front().size()) : 0;
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != c)
            throw DataError("matrix rows must all have the same length");
        for (int j = 0; j < c; ++j) m.at(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) {
        rows[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.cols()));
        for (int j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m.at(i, j);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_dialopre, m) {
    m.doc() = "Multilingual dialog encoder pretraining toolkit (C++ core)";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    // ------------------------------------------------------------- seeding

    m.def("substream_seed",
          py::overload_cast<std::uint64_t, std::string_view>(&substream_seed),
          py::arg("root"), py::arg("name"));
    m.def("substream_seed",
          py::overload_cast<std::uint64_t, std::string_view, std::uint64_t>(&substream_seed),
          py::arg("root"), py::arg("name"), py::arg("index"));

    py::class_<Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("uniform_int", &Rng::uniform_int, py::arg("lo"), py::arg("hi"))
        .def("uniform01", &Rng::uniform01)
        .def("normal", &Rng::normal, py::arg("mean") = 0.0, py::arg("stddev") = 1.0)
        .def("bernoulli", &Rng::bernoulli, py::arg("p"))
        .def("sample_without_replacement", &Rng::sample_without_replacement, py::arg("n"), py::arg("k"));

    // ------------------------------------------------------------ language

    py::enum_<Lang>(m, "Lang")
        .value("de", Lang::de)
        .value("en", Lang::en)
        .value("es", Lang::es)
        .value("fr", Lang::fr)
        .value("it", Lang::it);
    m.def("lang_from_string", &lang_from_string, py::arg("code"));

    // -------------------------------------------------------------- vocab

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("build", &Vocabulary::build, py::arg("corpus"), py::arg("max_size"))
        .def_static("load", &Vocabulary::load, py::arg("path"))
        .def("save", &Vocabulary::save, py::arg("path"))
        .def("encode", &Vocabulary::encode, py::arg("text"))
        .def("decode", &Vocabulary::decode, py::arg("ids"))
        .def("language_token", &Vocabulary::language_token, py::arg("lang"))
        .def("size", &Vocabulary::size)
        .def("token", &Vocabulary::token, py::arg("id"))
        .def("is_reserved", &Vocabulary::is_reserved, py::arg("id"))
        .def("pad", &Vocabulary::pad)
        .def("unk", &Vocabulary::unk)
        .def("mask", &Vocabulary::mask)
        .def("bos", &Vocabulary::bos)
        .def("eos", &Vocabulary::eos)
        .def_static("tokenize", &Vocabulary::tokenize, py::arg("text"));

    // ------------------------------------------------------------- corpus

    py::class_<TimedUtterance>(m, "TimedUtterance")
        .def(py::init([](std::string text, long long start_ms, long long end_ms, std::string movie_id,
                         Lang lang, std::string speaker) {
                 return TimedUtterance{std::move(text), start_ms, end_ms, std::move(movie_id), lang,
                                       std::move(speaker)};
             }),
             py::arg("text"), py::arg("start_ms"), py::arg("end_ms"), py::arg("movie_id") = "",
             py::arg("lang") = Lang::en, py::arg("speaker") = "")
        .def_readwrite("text", &TimedUtterance::text)
        .def_readwrite("start_ms", &TimedUtterance::start_ms)
        .def_readwrite("end_ms", &TimedUtterance::end_ms)
        .def_readwrite("movie_id", &TimedUtterance::movie_id)
        .def_readwrite("lang", &TimedUtterance::lang)
        .def_readwrite("speaker", &TimedUtterance::speaker);

    py::class_<Conversation>(m, "Conversation")
        .def_readonly("utterances", &Conversation::utterances)
        .def_readonly("movie_id", &Conversation::movie_id);

    py::class_<TokUtt>(m, "TokUtt")
        .def(py::init([](std::vector<int> ids, Lang lang) { return TokUtt{std::move(ids), lang}; }),
             py::arg("ids"), py::arg("lang") = Lang::en)
        .def_readwrite("ids", &TokUtt::ids)
        .def_readwrite("lang", &TokUtt::lang)
        .def(py::self == py::self);

    py::class_<Context>(m, "Context")
        .def(py::init([](std::vector<TokUtt> utterances, std::string movie_id) {
                 return Context{std::move(utterances), std::move(movie_id)};
             }),
             py::arg("utterances"), py::arg("movie_id") = "")
        .def_readwrite("utterances", &Context::utterances)
        .def_readwrite("movie_id", &Context::movie_id)
        .def(py::self == py::self);

    py::class_<AlignmentLink>(m, "AlignmentLink")
        .def(py::init([](int src, int tgt, double conf) { return AlignmentLink{src, tgt, conf}; }),
             py::arg("src_index"), py::arg("tgt_index"), py::arg("confidence"))
        .def_readwrite("src_index", &AlignmentLink::src_index)
        .def_readwrite("tgt_index", &AlignmentLink::tgt_index)
        .def_readwrite("confidence", &AlignmentLink::confidence);

    py::class_<TranslatedSlot>(m, "TranslatedSlot")
        .def(py::init([](std::vector<int> ids, Lang lang, double confidence) {
                 return TranslatedSlot{std::move(ids), lang, confidence};
             }),
             py::arg("ids"), py::arg("lang"), py::arg("confidence") = 1.0)
        .def_readwrite("ids", &TranslatedSlot::ids)
        .def_readwrite("lang", &TranslatedSlot::lang)
        .def_readwrite("confidence", &TranslatedSlot::confidence);

    py::class_<AlignedContextPair>(m, "AlignedContextPair")
        .def(py::init([](Context base, std::vector<std::optional<TranslatedSlot>> translated, Lang src,
                         Lang tgt) {
                 return AlignedContextPair{std::move(base), std::move(translated), src, tgt};
             }),
             py::arg("base"), py::arg("translated"), py::arg("src_lang") = Lang::en,
             py::arg("tgt_lang") = Lang::fr)
        .def_readwrite("base", &AlignedContextPair::base)
        .def_readwrite("translated", &AlignedContextPair::translated)
        .def_readwrite("src_lang", &AlignedContextPair::src_lang)
        .def_readwrite("tgt_lang", &AlignedContextPair::tgt_lang)
        .def("translated_count", &AlignedContextPair::translated_count);

    m.def("segment_conversations", &segment_conversations, py::arg("utterances"),
          py::arg("delta_t_ms") = 6000);
    m.def("window_contexts", &window_contexts, py::arg("conversation"), py::arg("vocab"),
          py::arg("context_size") = 5, py::arg("stride") = 0, py::arg("max_utt_tokens") = 50);
    m.def("join_alignments", &join_alignments, py::arg("conv_a"), py::arg("conv_b"), py::arg("links"),
          py::arg("vocab"), py::arg("min_conf") = 0.9, py::arg("context_size") = 5, py::arg("stride") = 0,
          py::arg("max_utt_tokens") = 50);
    m.def("is_holdout_movie", &is_holdout_movie, py::arg("movie_id"), py::arg("fraction"), py::arg("seed"));

    // --------------------------------------------------------- objectives

    py::class_<MaskPlan>(m, "MaskPlan")
        .def(py::init([](std::vector<int> positions, std::vector<int> targets) {
                 return MaskPlan{std::move(positions), std::move(targets)};
             }),
             py::arg("masked_token_positions"), py::arg("target_tokens"))
        .def_readwrite("masked_token_positions", &MaskPlan::masked_token_positions)
        .def_readwrite("target_tokens", &MaskPlan::target_tokens);

    m.def("plan_token_masks", &plan_token_masks, py::arg("utt"), py::arg("p_omega"), py::arg("rng"));

    py::enum_<CorruptionMode>(m, "CorruptionMode")
        .value("MUG", CorruptionMode::MUG)
        .value("TMUG", CorruptionMode::TMUG)
        .value("MMUG", CorruptionMode::MMUG);

    py::class_<MaskTarget>(m, "MaskTarget")
        .def_readonly("ids", &MaskTarget::ids)
        .def_readonly("lang", &MaskTarget::lang);

    py::class_<CorruptedContext>(m, "CorruptedContext")
        .def_readonly("context", &CorruptedContext::context)
        .def_readonly("masked_positions", &CorruptedContext::masked_positions)
        .def_readonly("targets", &CorruptedContext::targets)
        .def_readonly("pre_corruption", &CorruptedContext::pre_corruption)
        .def_readonly("mode", &CorruptedContext::mode);

    m.def("corrupt_context",
          py::overload_cast<const Context&, CorruptionMode, double, const Vocabulary&, Rng&>(
              &corrupt_context),
          py::arg("context"), py::arg("mode"), py::arg("p_c"), py::arg("vocab"), py::arg("rng"));
    m.def("corrupt_context",
          py::overload_cast<const AlignedContextPair&, CorruptionMode, double, const Vocabulary&, Rng&>(
              &corrupt_context),
          py::arg("pair"), py::arg("mode"), py::arg("p_c"), py::arg("vocab"), py::arg("rng"));

    // -------------------------------------------------------------- model

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("dim", &ModelConfig::dim)
        .def_readwrite("heads", &ModelConfig::heads)
        .def_readwrite("d_k", &ModelConfig::d_k)
        .def_readwrite("ffn_dim", &ModelConfig::ffn_dim)
        .def_readwrite("layers_u", &ModelConfig::layers_u)
        .def_readwrite("layers_d", &ModelConfig::layers_d)
        .def_readwrite("layers_dec", &ModelConfig::layers_dec)
        .def_readwrite("max_utt_tokens", &ModelConfig::max_utt_tokens)
        .def_readwrite("context_size", &ModelConfig::context_size)
        .def_readwrite("vocab_size", &ModelConfig::vocab_size)
        .def_readwrite("dropout", &ModelConfig::dropout)
        .def_readwrite("tied_output", &ModelConfig::tied_output)
        .def("validate", &ModelConfig::validate)
        .def_static("paper_preset", &ModelConfig::paper_preset, py::arg("vocab_size"));

    py::class_<ModelParams>(m, "ModelParams")
        .def_static("init", &ModelParams::init, py::arg("config"), py::arg("seed"))
        .def_static("load", &ModelParams::load, py::arg("path"))
        .def("save", &ModelParams::save, py::arg("path"))
        .def("parameter_count", &ModelParams::parameter_count)
        .def_readonly("config", &ModelParams::config)
        .def_readonly("names", &ModelParams::names);

    m.def("utterance_loss", &utterance_loss, py::arg("params"), py::arg("utt"), py::arg("plan"),
          py::arg("vocab"));
    m.def("context_loss", &context_loss, py::arg("params"), py::arg("corrupted"), py::arg("vocab"));

    // ------------------------------------------------------------ trainer

    py::class_<TrainerConfig>(m, "TrainerConfig")
        .def(py::init<>())
        .def_readwrite("steps", &TrainerConfig::steps)
        .def_readwrite("batch_contexts", &TrainerConfig::batch_contexts)
        .def_readwrite("lr", &TrainerConfig::lr)
        .def_readwrite("warmup_steps", &TrainerConfig::warmup_steps)
        .def_readwrite("lambda_u", &TrainerConfig::lambda_u)
        .def_readwrite("lambda_d", &TrainerConfig::lambda_d)
        .def_readwrite("p_omega", &TrainerConfig::p_omega)
        .def_readwrite("p_c", &TrainerConfig::p_c)
        .def_readwrite("modes", &TrainerConfig::modes)
        .def_readwrite("seed", &TrainerConfig::seed);

    py::class_<StepLog>(m, "StepLog")
        .def_readonly("step", &StepLog::step)
        .def_readonly("mode", &StepLog::mode)
        .def_readonly("total", &StepLog::total);

    py::class_<PretrainResult>(m, "PretrainResult").def_readonly("logs", &PretrainResult::logs);

    m.def("pretrain", &pretrain, py::arg("params"), py::arg("contexts"), py::arg("pairs"), py::arg("vocab"),
          py::arg("config"));
    m.def("eval_mug_loss", &eval_mug_loss, py::arg("params"), py::arg("contexts"), py::arg("vocab"),
          py::arg("p_c"), py::arg("seed"));

    py::class_<TrainBatch>(m, "TrainBatch")
        .def(py::init<>())
        .def_readwrite("mum_items", &TrainBatch::mum_items)
        .def_readwrite("gen_items", &TrainBatch::gen_items);

    py::class_<GradCheckResult>(m, "GradCheckResult")
        .def_readonly("max_rel_error", &GradCheckResult::max_rel_error)
        .def_readonly("coords_checked", &GradCheckResult::coords_checked);

    m.def(
        "gradient_check",
        [](const ModelParams& params, const TrainBatch& batch, const Vocabulary& vocab, double epsilon,
           int min_coords, std::uint64_t seed) {
            return gradient_check(params, batch, vocab, epsilon, min_coords, seed);
        },
        py::arg("params"), py::arg("batch"), py::arg("vocab"), py::arg("epsilon") = 1e-5,
        py::arg("min_coords") = 200, py::arg("seed") = 7);

    // -------------------------------------------------------------- tasks

    auto t = m.def_submodule("tasks", "Probe task generation, heads, scoring, metrics");

    py::class_<tasks::PoolEntry>(t, "PoolEntry")
        .def(py::init([](TokUtt utt, std::optional<TokUtt> translated) {
                 return tasks::PoolEntry{std::move(utt), std::move(translated)};
             }),
             py::arg("utt"), py::arg("translated") = std::nullopt)
        .def_readwrite("utt", &tasks::PoolEntry::utt)
        .def_readwrite("translated", &tasks::PoolEntry::translated);

    py::class_<tasks::InconsistencyInstance>(t, "InconsistencyInstance")
        .def_readonly("context", &tasks::InconsistencyInstance::context)
        .def_readonly("label", &tasks::InconsistencyInstance::label)
        .def_readonly("seed", &tasks::InconsistencyInstance::seed);

    py::class_<tasks::RetrievalInstance>(t, "RetrievalInstance")
        .def_readonly("context", &tasks::RetrievalInstance::context)
        .def_readonly("candidates", &tasks::RetrievalInstance::candidates)
        .def_readonly("label", &tasks::RetrievalInstance::label)
        .def_readonly("seed", &tasks::RetrievalInstance::seed);

    t.def("make_ii", &tasks::make_ii, py::arg("contexts"), py::arg("aligned"), py::arg("pools"),
          py::arg("n_instances"), py::arg("p_lprime"), py::arg("seed"));
    t.def("make_nur", &tasks::make_nur, py::arg("contexts"), py::arg("aligned"), py::arg("pools"),
          py::arg("n_instances"), py::arg("distractors"), py::arg("p_lprime"), py::arg("seed"));

    py::class_<tasks::TaskHeads>(t, "TaskHeads")
        .def_static("init", &tasks::TaskHeads::init, py::arg("config"), py::arg("seed"));

    py::enum_<tasks::FinetuneScope>(t, "FinetuneScope")
        .value("full", tasks::FinetuneScope::full)
        .value("frozen_embeddings", tasks::FinetuneScope::frozen_embeddings)
        .value("head_only", tasks::FinetuneScope::head_only);

    t.def("score_ii", &tasks::score_ii, py::arg("params"), py::arg("heads"), py::arg("instance"));
    t.def("score_nur", &tasks::score_nur, py::arg("params"), py::arg("heads"), py::arg("instance"));
    t.def("random_ranking", &tasks::random_ranking, py::arg("k"), py::arg("rng"));
    t.def("finetune_ii", &tasks::finetune_ii, py::arg("params"), py::arg("start"), py::arg("train"),
          py::arg("steps"), py::arg("batch_size"), py::arg("lr"), py::arg("seed"),
          py::arg("scope") = tasks::FinetuneScope::full);

    py::class_<tasks::Metrics>(t, "Metrics")
        .def_readonly("accuracy", &tasks::Metrics::accuracy)
        .def_readonly("recall_at", &tasks::Metrics::recall_at)
        .def_readonly("n_instances", &tasks::Metrics::n_instances);

    t.def("compute_metrics", &tasks::compute_metrics, py::arg("predicted"), py::arg("labels"));
    t.def("compute_metrics_ranked", &tasks::compute_metrics_ranked, py::arg("rankings"), py::arg("labels"),
          py::arg("ns") = std::vector<int>{1, 2, 5});
    t.def("metrics_table", &tasks::metrics_table, py::arg("metrics"));

    // ----------------------------------------------------------------- mi

    auto mm = m.def_submodule("mi", "Exact MI and the contrastive lower bound on small discrete joints");

    py::class_<mi::DiscreteJoint>(mm, "DiscreteJoint")
        .def_static("from_table",
                    [](const std::vector<std::vector<double>>& rows) {
                        return mi::DiscreteJoint::from_matrix(matrix_from_rows(rows));
                    },
                    py::arg("rows"))
        .def("a_size", &mi::DiscreteJoint::a_size)
        .def("b_size", &mi::DiscreteJoint::b_size)
        .def("marginal_a", &mi::DiscreteJoint::marginal_a)
        .def("marginal_b", &mi::DiscreteJoint::marginal_b)
        .def("table", [](const mi::DiscreteJoint& j) { return matrix_to_rows(j.p); });

    mm.def("random_joint", &mi::random_joint, py::arg("a_size"), py::arg("b_size"), py::arg("rng"));
    mm.def("diagonal_uniform", &mi::diagonal_uniform, py::arg("k"));
    mm.def("product_joint", &mi::product_joint, py::arg("pa"), py::arg("pb"));
    mm.def("mix_joints", &mi::mix_joints, py::arg("x"), py::arg("y"), py::arg("w"));

    py::class_<mi::Critic>(mm, "Critic")
        .def_static("full",
                    [](const std::vector<std::vector<double>>& rows) {
                        return mi::Critic::full(matrix_from_rows(rows));
                    },
                    py::arg("scores"))
        .def_static("constant", &mi::Critic::constant, py::arg("a_size"), py::arg("b_size"), py::arg("c"))
        .def_static("full_random", &mi::Critic::full_random, py::arg("a_size"), py::arg("b_size"),
                    py::arg("sd"), py::arg("rng"))
        .def_static("factored_random", &mi::Critic::factored_random, py::arg("a_size"), py::arg("b_size"),
                    py::arg("d"), py::arg("sd"), py::arg("rng"))
        .def_readonly("factored", &mi::Critic::factored)
        .def("scores", [](const mi::Critic& c) { return matrix_to_rows(c.scores()); });

    py::class_<mi::BoundEstimate>(mm, "BoundEstimate")
        .def_readonly("value", &mi::BoundEstimate::value)
        .def_readonly("candidate_set_size", &mi::BoundEstimate::candidate_set_size)
        .def_readonly("exact", &mi::BoundEstimate::exact)
        .def_readonly("sample_count", &mi::BoundEstimate::sample_count)
        .def_readonly("std_error", &mi::BoundEstimate::std_error);

    mm.def("true_mi", &mi::true_mi, py::arg("joint"));
    mm.def("infonce_bound", &mi::infonce_bound, py::arg("joint"), py::arg("critic"));
    mm.def("infonce_bound_mc", &mi::infonce_bound_mc, py::arg("joint"), py::arg("critic"), py::arg("n"),
           py::arg("rng"));
    mm.def("optimize_critic", &mi::optimize_critic, py::arg("joint"), py::arg("factored"), py::arg("d"),
           py::arg("steps"), py::arg("lr"), py::arg("seed"));
    mm.def("log_candidate_count", &mi::log_candidate_count, py::arg("vocab_size"), py::arg("utterance_len"));

    py::class_<mi::ExperimentConfig>(mm, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("name", &mi::ExperimentConfig::name)
        .def_readwrite("a_size", &mi::ExperimentConfig::a_size)
        .def_readwrite("b_size", &mi::ExperimentConfig::b_size)
        .def_readwrite("factored", &mi::ExperimentConfig::factored)
        .def_readwrite("d", &mi::ExperimentConfig::d)
        .def_readwrite("steps", &mi::ExperimentConfig::steps)
        .def_readwrite("lr", &mi::ExperimentConfig::lr)
        .def_readwrite("seed", &mi::ExperimentConfig::seed);

    py::class_<mi::ExperimentReport>(mm, "ExperimentReport")
        .def_readonly("joint_id", &mi::ExperimentReport::joint_id)
        .def_readonly("true_mi", &mi::ExperimentReport::true_mi)
        .def_readonly("bound_initial", &mi::ExperimentReport::bound_initial)
        .def_readonly("bound_final", &mi::ExperimentReport::bound_final)
        .def_readonly("candidate_set_size", &mi::ExperimentReport::candidate_set_size)
        .def_readonly("steps", &mi::ExperimentReport::steps);

    mm.def("preset_experiments", &mi::preset_experiments, py::arg("root_seed"));
    mm.def("run_experiment", &mi::run_experiment, py::arg("config"));

    // ----------------------------------------------------------------- toy

    auto ty = m.def_submodule("toy", "Deterministic synthetic bilingual corpus");

    py::class_<toy::ToyCorpusConfig>(ty, "ToyCorpusConfig")
        .def(py::init<>())
        .def_readwrite("movies", &toy::ToyCorpusConfig::movies)
        .def_readwrite("conversations_per_movie", &toy::ToyCorpusConfig::conversations_per_movie)
        .def_readwrite("utterances_per_conversation", &toy::ToyCorpusConfig::utterances_per_conversation)
        .def_readwrite("min_tokens", &toy::ToyCorpusConfig::min_tokens)
        .def_readwrite("max_tokens", &toy::ToyCorpusConfig::max_tokens)
        .def_readwrite("translation_rate", &toy::ToyCorpusConfig::translation_rate)
        .def_readwrite("low_conf_rate", &toy::ToyCorpusConfig::low_conf_rate)
        .def_readwrite("link_confidence", &toy::ToyCorpusConfig::link_confidence)
        .def_readwrite("seed", &toy::ToyCorpusConfig::seed);

    py::class_<toy::ToyMovie>(ty, "ToyMovie")
        .def_readonly("movie_id", &toy::ToyMovie::movie_id)
        .def_readonly("en", &toy::ToyMovie::en)
        .def_readonly("fr", &toy::ToyMovie::fr)
        .def_readonly("links", &toy::ToyMovie::links);

    ty.def("generate_toy_corpus", &toy::generate_toy_corpus, py::arg("config"));
    ty.def("subtitle_jsonl_lines", &toy::subtitle_jsonl_lines, py::arg("utterances"));
    ty.def("alignment_jsonl_lines", &toy::alignment_jsonl_lines, py::arg("links"));

    py::class_<toy::ToyDataset>(ty, "ToyDataset")
        .def_readonly("vocab", &toy::ToyDataset::vocab)
        .def_readonly("train_contexts", &toy::ToyDataset::train_contexts)
        .def_readonly("train_pairs", &toy::ToyDataset::train_pairs)
        .def_readonly("eval_contexts", &toy::ToyDataset::eval_contexts)
        .def_readonly("eval_pairs", &toy::ToyDataset::eval_pairs)
        .def_readonly("train_pools", &toy::ToyDataset::train_pools)
        .def_readonly("eval_pools", &toy::ToyDataset::eval_pools);

    ty.def("build_toy_dataset", &toy::build_toy_dataset, py::arg("config"), py::arg("context_size"),
           py::arg("max_utt_tokens"), py::arg("holdout_fraction"));
}
