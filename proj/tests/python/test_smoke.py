"""End-to-end smoke tests for the Python bindings.

Each test drives one main operation group through the bound surface: corpus
segmentation, vocabulary, corruption, a short pretraining run, task
generation and scoring, and the mutual-information toolkit.
"""

import math

import pytest

import dialopre as dl


def timed(text, start, end, movie="m0", lang=dl.Lang.en):
    return dl.TimedUtterance(text=text, start_ms=start, end_ms=end, movie_id=movie, lang=lang)


def small_dataset():
    cfg = dl.toy.ToyCorpusConfig()
    cfg.movies = 4
    cfg.conversations_per_movie = 3
    cfg.utterances_per_conversation = 10
    cfg.seed = 9
    return dl.toy.build_toy_dataset(cfg, 5, 8, 0.25)


def small_model_config(vocab_size):
    cfg = dl.ModelConfig()
    cfg.dim = 16
    cfg.heads = 2
    cfg.layers_u = 1
    cfg.layers_d = 1
    cfg.layers_dec = 1
    cfg.max_utt_tokens = 8
    cfg.context_size = 5
    cfg.vocab_size = vocab_size
    cfg.dropout = 0.0
    return cfg


def test_segmentation_boundary():
    utts = [timed("a", 0, 1000), timed("b", 2000, 3000), timed("c", 9000, 9500)]
    convs = dl.segment_conversations(utts, delta_t_ms=6000)
    assert [len(c.utterances) for c in convs] == [2, 1]
    # A gap of exactly the threshold splits.
    exact = dl.segment_conversations([timed("a", 0, 1000), timed("b", 7000, 8000)], delta_t_ms=6000)
    assert len(exact) == 2


def test_vocab_roundtrip(tmp_path):
    vocab = dl.Vocabulary.build(["the cat sat", "the cat ran"], 50)
    ids = vocab.encode("the cat flew")
    assert len(ids) == 3
    assert ids[-1] == vocab.unk()  # "flew" was never seen
    path = tmp_path / "vocab.json"
    vocab.save(path)
    again = dl.Vocabulary.load(path)
    assert again.size() == vocab.size()
    assert again.encode("the cat sat") == vocab.encode("the cat sat")


def test_corruption_reproduces_original():
    ds = small_dataset()
    ctx = ds.train_contexts[0]
    rng = dl.Rng(dl.substream_seed(3, "corrupt"))
    cc = dl.corrupt_context(ctx, dl.CorruptionMode.MUG, 0.2, ds.vocab, rng)
    assert cc.pre_corruption == ctx
    assert len(cc.masked_positions) == 1  # max(1, round(0.2 * 5))
    slot = cc.context.utterances[cc.masked_positions[0]]
    assert all(i == ds.vocab.mask() for i in slot.ids)
    assert slot.ids != cc.targets[0].ids


def test_pretrain_reduces_eval_loss():
    ds = small_dataset()
    cfg = small_model_config(ds.vocab.size())
    params = dl.ModelParams.init(cfg, dl.substream_seed(3, "model"))
    before = dl.eval_mug_loss(params, ds.train_contexts, ds.vocab, 0.2, 99)
    tcfg = dl.TrainerConfig()
    tcfg.steps = 60
    tcfg.batch_contexts = 8
    tcfg.lr = 1e-2
    tcfg.warmup_steps = 10
    tcfg.modes = [dl.CorruptionMode.MUG, dl.CorruptionMode.TMUG, dl.CorruptionMode.MMUG]
    tcfg.seed = dl.substream_seed(3, "pretrain")
    result = dl.pretrain(params, ds.train_contexts, ds.train_pairs, ds.vocab, tcfg)
    assert len(result.logs) == 60
    after = dl.eval_mug_loss(params, ds.train_contexts, ds.vocab, 0.2, 99)
    assert after < before
    # Near-zero init sits at the uniform-prediction plateau.
    assert before == pytest.approx(math.log(ds.vocab.size()), rel=0.05)


def test_checkpoint_roundtrip(tmp_path):
    ds = small_dataset()
    cfg = small_model_config(ds.vocab.size())
    params = dl.ModelParams.init(cfg, 11)
    path = tmp_path / "model.ckpt"
    params.save(path)
    again = dl.ModelParams.load(path)
    assert again.parameter_count() == params.parameter_count()
    loss_a = dl.eval_mug_loss(params, ds.eval_contexts, ds.vocab, 0.2, 5)
    loss_b = dl.eval_mug_loss(again, ds.eval_contexts, ds.vocab, 0.2, 5)
    assert loss_a == loss_b


def test_tasks_generation_and_scoring():
    ds = small_dataset()
    cfg = small_model_config(ds.vocab.size())
    params = dl.ModelParams.init(cfg, 21)
    heads = dl.tasks.TaskHeads.init(cfg, 22)

    ii = dl.tasks.make_ii(ds.eval_contexts, [], ds.eval_pools, 50, 0.0, 301)
    assert len(ii) == 50
    predictions = [dl.tasks.score_ii(params, heads, ins) for ins in ii]
    metrics = dl.tasks.compute_metrics(predictions, [ins.label for ins in ii])
    assert 0.0 <= metrics.accuracy <= 1.0
    assert metrics.n_instances == 50

    nur = dl.tasks.make_nur(ds.eval_contexts, [], ds.eval_pools, 50, 9, 0.0, 302)
    rankings = [dl.tasks.score_nur(params, heads, ins) for ins in nur]
    ranked = dl.tasks.compute_metrics_ranked(rankings, [ins.label for ins in nur])
    assert ranked.recall_at[10] == 1.0  # the label is always somewhere in the list
    assert ranked.recall_at[1] <= ranked.recall_at[2] <= ranked.recall_at[5]

    # The bilingual variant swaps some slots to the aligned language.
    mii = dl.tasks.make_ii(ds.eval_contexts, ds.eval_pairs, ds.eval_pools, 20, 0.4, 303)
    langs = {u.lang for ins in mii for u in ins.context.utterances}
    assert dl.Lang.fr in langs


def test_mi_bound_respects_truth():
    rng = dl.Rng(dl.substream_seed(7, "mi"))
    joint = dl.mi.random_joint(6, 5, rng)
    exact = dl.mi.true_mi(joint)
    log_b = math.log(joint.b_size())
    for critic in (
        dl.mi.Critic.constant(6, 5, 0.3),
        dl.mi.Critic.full_random(6, 5, 1.0, rng),
        dl.mi.optimize_critic(joint, False, 1, 300, 0.5, 13),
    ):
        bound = dl.mi.infonce_bound(joint, critic).value
        assert bound <= exact + 1e-9
        assert bound <= log_b + 1e-9
    # Perfect dependence: MI = ln k exactly.
    diag = dl.mi.diagonal_uniform(4)
    assert dl.mi.true_mi(diag) == pytest.approx(math.log(4), abs=1e-12)


def test_gradient_check_via_bindings():
    vocab = dl.Vocabulary.build(["a"], 11)
    cfg = dl.ModelConfig()
    cfg.dim = 8
    cfg.heads = 2
    cfg.layers_u = 1
    cfg.layers_d = 1
    cfg.layers_dec = 1
    cfg.max_utt_tokens = 6
    cfg.context_size = 3
    cfg.vocab_size = 11
    cfg.dropout = 0.0
    params = dl.ModelParams.init(cfg, 5)
    batch = dl.TrainBatch()
    batch.mum_items = [([10, 9, 8], dl.MaskPlan([1], [9]))]
    rng = dl.Rng(6)
    ctx = dl.Context([dl.TokUtt([10, 9]), dl.TokUtt([8, 7, 10]), dl.TokUtt([9, 10])], "m0")
    batch.gen_items = [dl.corrupt_context(ctx, dl.CorruptionMode.MUG, 0.34, vocab, rng)]
    result = dl.gradient_check(params, batch, vocab, min_coords=60)
    assert result.coords_checked >= 60
    assert result.max_rel_error < 1e-4


def test_errors_surface_as_python_exceptions():
    with pytest.raises(dl.DataError):
        dl.ModelConfig.paper_preset(0).validate()  # vocab_size must be positive
    cfg = dl.ModelConfig()
    cfg.dim = 30
    cfg.heads = 4  # 30 not divisible by 4
    cfg.vocab_size = 20
    with pytest.raises(dl.DataError):
        cfg.validate()
    with pytest.raises(dl.DataError):
        dl.segment_conversations([timed("b", 5000, 6000), timed("a", 0, 1000)])  # unordered
