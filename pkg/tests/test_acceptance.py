"""Acceptance suite: one test per verification criterion, each printing a
PASS line with its measured numbers. All tolerances are pinned here.

Run with: pytest tests/test_acceptance.py -v -s
"""

import math
import time

import numpy as np
import pytest
import torch

from oracles import (
    class_coded_corpus,
    counting_accuracy,
    enumerate_nbest,
    bleu_bruteforce,
    dist_bruteforce,
    rouge_f_bruteforce,
)
from vidial.adversarial import AdvConfig, adversarial_eval
from vidial.assembly import assemble, assemble_cv, assemble_fv, assemble_nv
from vidial.beam import Hypothesis, beam_nbest
from vidial.checkpoint import load_checkpoint, save_checkpoint
from vidial.config import tiny_config
from vidial.data import Dataset, Episode, Turn
from vidial.featio import CoarseFeatureStore, ObjectFeatureStore
from vidial.gradcheck import grad_check
from vidial.metrics import bleu_n, dist_n, rouge_n_f
from vidial.mi import DiscConfig, MiDiscriminator, pair_accuracy, q_score, train_discriminator
from vidial.model import DialogModel
from vidial.rerank import (
    DecodeConfig,
    MiConfig,
    RerankWeights,
    generate_split,
    mi_scores,
    rerank,
    write_responses,
)
from vidial.synthetic import SyntheticSpec, generate_synthetic
from vidial.training import OptimConfig, next_token_accuracy, train_forward
from vidial.vocab import EOS, SEP

# pinned tolerances and budgets
GRAD_TOL = 1e-4
GRAD_EPSILON = 1e-4
GRAD_COORDS_PER_GROUP = 200
GRAD_RUNTIME_S = 120.0
OVERFIT_FINAL_NLL = 1.0
OVERFIT_START_MARGIN = 0.75  # |start - ln V|
OVERFIT_STEPS = 2000
SINGLE_PAIR_NLL = 0.1
SINGLE_PAIR_STEPS = 500
OVERFIT_RUNTIME_S = 600.0
FUSION_MIN_ACC = 0.90
FUSION_NV_MARGIN = 0.05
FUSION_SEEDS = (0, 1, 2)
LAYOUT_EPISODES = 200
BEAM_DRAWS = 20
BEAM_SIZE = 64
BEAM_MAX_TGT = 3
RERANK_ITEMS = 500
CROSSOVER_TOL = 1e-6
DISC_STEPS = 2000
DISC_PAIR_ACC = 0.95
DISC_LOSS_TARGET = 0.2
ZERO_WEIGHT_TOL = 1e-6
METRIC_ORACLE_TOL = 1e-9
METRIC_ORACLE_PAIRS = 100
ADV_SEEDS = 5
ADV_GOLD_BAND = (0.4, 0.6)
ADV_CONST_MAX = 0.2
CKPT_LOGIT_TOL = 1e-12


def _report(name, detail):
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


# 1 ---------------------------------------------------------------------------


def test_gradient_correctness():
    dataset, coarse, objects, _ = generate_synthetic(
        SyntheticSpec(num_episodes=3, seed=1, vocab_size=18, num_latent_classes=2, coarse_dim=4)
    )
    episode = dataset.episodes[0]
    target = list(episode.turns[2].tokens)
    start = time.monotonic()
    errors = {}
    for mode, d_visual, stores in (
        ("nv", 0, (None, None)),
        ("cv", coarse.dim, (coarse, None)),
        ("fv", objects.dim, (None, objects)),
    ):
        cfg = tiny_config(mode, len(dataset.vocab), d_visual=d_visual)
        model = DialogModel(cfg, seed=0)
        assembly = assemble(episode, 2, cfg, *stores)
        errors[mode] = grad_check(
            model,
            assembly,
            target,
            epsilon=GRAD_EPSILON,
            coords_per_group=GRAD_COORDS_PER_GROUP,
            seed=0,
        )
        assert errors[mode] < GRAD_TOL, f"{mode}: {errors[mode]:.3e}"
    elapsed = time.monotonic() - start
    assert elapsed < GRAD_RUNTIME_S
    _report(
        "gradient-correctness",
        "max rel err " + ", ".join(f"{m}={e:.2e}" for m, e in errors.items()) + f"; {elapsed:.0f}s",
    )


# 2 ---------------------------------------------------------------------------


def test_overfit():
    dataset, coarse, objects, _ = generate_synthetic(SyntheticSpec(num_episodes=50, seed=7))
    ln_v = math.log(len(dataset.vocab))
    start = time.monotonic()
    finals = {}
    optim = OptimConfig(peak_lr=1e-3, warmup_steps=200, max_steps=OVERFIT_STEPS, batch_size=16, seed=0)
    for mode, d_visual, stores in (
        ("nv", 0, (None, None)),
        ("cv", coarse.dim, (coarse, None)),
        ("fv", objects.dim, (None, objects)),
    ):
        cfg = tiny_config(mode, len(dataset.vocab), d_visual=d_visual)
        _, curve = train_forward(dataset, cfg, optim, *stores)
        assert abs(curve[0] - ln_v) < OVERFIT_START_MARGIN, f"{mode} starts at {curve[0]:.3f}"
        assert curve[-1] < OVERFIT_FINAL_NLL, f"{mode} ends at {curve[-1]:.3f}"
        finals[mode] = curve[-1]

    single = Dataset(
        episodes=(Episode(id="pair", turns=dataset.episodes[0].turns[:2]),), vocab=dataset.vocab
    )
    pair_optim = OptimConfig(
        peak_lr=3e-3, warmup_steps=50, max_steps=SINGLE_PAIR_STEPS, batch_size=4, seed=0
    )
    _, pair_curve = train_forward(single, tiny_config("nv", len(dataset.vocab)), pair_optim)
    assert pair_curve[-1] < SINGLE_PAIR_NLL
    elapsed = time.monotonic() - start
    assert elapsed < OVERFIT_RUNTIME_S
    _report(
        "overfit",
        ", ".join(f"{m}->{v:.3f}" for m, v in finals.items())
        + f"; single-pair {pair_curve[-1]:.4f}; {elapsed:.0f}s",
    )


# 3 ---------------------------------------------------------------------------


def test_fusion_signal():
    dataset, coarse, objects, _ = class_coded_corpus(80, num_classes=4, tokens_per_class=4, dim=8)
    train = Dataset(episodes=dataset.episodes[:60], vocab=dataset.vocab)
    held = Dataset(episodes=dataset.episodes[60:], vocab=dataset.vocab)
    train_targets = [list(train.episodes[e].turns[j].tokens) for e, j in train.examples()]
    held_targets = [list(held.episodes[e].turns[j].tokens) for e, j in held.examples()]
    optimum = counting_accuracy(train_targets, held_targets)

    results = {}
    for seed in FUSION_SEEDS:
        optim = OptimConfig(peak_lr=2e-3, warmup_steps=100, max_steps=800, batch_size=16, seed=seed)
        for mode, d_visual, stores in (
            ("nv", 0, (None, None)),
            ("cv", coarse.dim, (coarse, None)),
            ("fv", objects.dim, (None, objects)),
        ):
            cfg = tiny_config(mode, len(dataset.vocab), d_visual=d_visual)
            model, _ = train_forward(train, cfg, optim, *stores)
            acc = next_token_accuracy(model, held, *stores)
            results[(mode, seed)] = acc
            if mode == "nv":
                assert abs(acc - optimum) <= FUSION_NV_MARGIN, f"nv seed {seed}: {acc:.3f} vs {optimum:.3f}"
            else:
                assert acc >= FUSION_MIN_ACC, f"{mode} seed {seed}: {acc:.3f}"
    means = {
        m: np.mean([results[(m, s)] for s in FUSION_SEEDS]) for m in ("nv", "cv", "fv")
    }
    _report(
        "fusion-signal",
        f"counting optimum {optimum:.3f}; mean acc "
        + ", ".join(f"{m}={v:.3f}" for m, v in means.items())
        + f" over {len(FUSION_SEEDS)} seeds",
    )


# 4 ---------------------------------------------------------------------------


def test_layout_exactness():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(LAYOUT_EPISODES):
        n_turns = int(rng.integers(2, 7))
        lengths = [int(rng.integers(1, 8)) for _ in range(n_turns)]
        counts = [int(rng.integers(1, 5)) for _ in range(n_turns)]
        tok = 10
        turns = []
        for i, n in enumerate(lengths):
            turns.append(Turn(tokens=tuple(range(tok, tok + n)), coarse_idx=i, object_idx=i))
            tok += n
        episode = Episode(id="r", turns=tuple(turns))
        coarse = CoarseFeatureStore(data=np.zeros((n_turns, 4), dtype=np.float32))
        objects = ObjectFeatureStore(
            images=tuple(np.zeros((m, 4), dtype=np.float32) for m in counts), dim=4
        )
        j = int(rng.integers(1, n_turns))

        # independent brute-force construction of the expected nv layout
        expected_ids = []
        for k in range(j):
            expected_ids.extend(turns[k].tokens)
            expected_ids.append(SEP)

        cfg_nv = tiny_config("nv", 64, max_src_len=1024, max_turns=16)
        cfg_cv = tiny_config("cv", 64, d_visual=4, max_src_len=1024, max_turns=16)
        cfg_fv = tiny_config("fv", 64, d_visual=4, max_src_len=1024, max_turns=16)
        a_nv = assemble_nv(episode, j, cfg_nv)
        a_cv = assemble_cv(episode, j, cfg_cv, coarse)
        a_fv = assemble_fv(episode, j, cfg_fv, objects)

        text_len = sum(lengths[k] + 1 for k in range(j))
        ok = (
            a_nv.ids.tolist() == expected_ids
            and len(a_nv) == text_len
            and len(a_cv) == text_len + 3
            and len(a_fv) == 2 + sum(counts[: j + 1]) + text_len
        )
        mismatches += 0 if ok else 1
    assert mismatches == 0
    _report("layout-exactness", f"{LAYOUT_EPISODES} random episodes, 0 mismatches")


# 5 ---------------------------------------------------------------------------


def test_beam_matches_exhaustive_search():
    dataset, _, _, _ = generate_synthetic(
        SyntheticSpec(num_episodes=4, seed=2, vocab_size=12, num_latent_classes=2, coarse_dim=4)
    )
    cfg = tiny_config("nv", len(dataset.vocab), max_tgt_len=BEAM_MAX_TGT)
    assembly = assemble_nv(dataset.episodes[0], 1, cfg)
    for draw in range(BEAM_DRAWS):
        model = DialogModel(cfg, seed=100 + draw)
        model.eval()
        nbest = beam_nbest(model, assembly, beam_size=BEAM_SIZE, n_best=5, max_tgt_len=BEAM_MAX_TGT)
        expected = enumerate_nbest(model, assembly, n_best=5, max_tgt_len=BEAM_MAX_TGT)
        assert [h.ids for h in nbest] == [ids for ids, _ in expected], f"draw {draw}"
    _report("beam-nbest", f"{BEAM_DRAWS} random draws match exhaustive top-5 exactly")


# 6 ---------------------------------------------------------------------------


def test_mi_reranking(tmp_path):
    dataset, coarse, objects, _ = generate_synthetic(SyntheticSpec(num_episodes=110, seed=17))
    cfg = tiny_config("nv", len(dataset.vocab), max_tgt_len=6)
    model = DialogModel(cfg, seed=9)
    model.eval()
    bm = DialogModel(tiny_config("nv", len(dataset.vocab)), seed=10)
    bm.eval()
    disc = MiDiscriminator(
        DiscConfig(kind="coarse", vocab_size=len(dataset.vocab), d_visual=coarse.dim), seed=11
    )

    examples = dataset.examples()[:RERANK_ITEMS]
    assert len(examples) == RERANK_ITEMS
    decode_cfg = DecodeConfig(beam_size=5, n_best=5)
    sample = Dataset(episodes=dataset.episodes, vocab=dataset.vocab)
    plain = generate_split(model, sample, decode_cfg)[:RERANK_ITEMS]
    mi_cfg = MiConfig(backward_model=bm, disc=disc, weights=RerankWeights(1.0, 0.0, 0.0))
    with_mi = generate_split(model, sample, decode_cfg, coarse, objects, mi_cfg)[:RERANK_ITEMS]
    p1, p2 = tmp_path / "plain.jsonl", tmp_path / "mi.jsonl"
    write_responses(plain, p1)
    write_responses(with_mi, p2)
    assert p1.read_bytes() == p2.read_bytes()

    # the interpolated score with weights (1,0,0) is the forward score, bit for bit
    episode = dataset.episodes[0]
    assembly = assemble_nv(episode, 1, cfg)
    nbest = beam_nbest(model, assembly, beam_size=5, n_best=5)
    scores = mi_scores(nbest, RerankWeights(1.0, 0.0, 0.0), bm, disc, coarse.vector(0), [10], "cv")
    assert scores == [h.forward_logprob for h in nbest]

    # constructed crossover: the forward-best hypothesis loses to the
    # visually-matched one exactly at visual weight dF / (dF + dQ)
    vec = coarse.vector(1)
    content_a, content_b = (10, 11), (13, 14)
    if q_score(disc, list(content_b), vec) <= q_score(disc, list(content_a), vec):
        content_a, content_b = content_b, content_a
    h_a = Hypothesis(ids=content_a + (EOS,), forward_logprob=-1.0)
    h_b = Hypothesis(ids=content_b + (EOS,), forward_logprob=-2.2)
    q_a = q_score(disc, list(h_a.content), vec)
    q_b = q_score(disc, list(h_b.content), vec)
    delta_f = h_a.forward_logprob - h_b.forward_logprob
    delta_q = q_b - q_a
    assert delta_f > 0 and delta_q > 1e-6
    threshold = delta_f / (delta_f + delta_q)
    assert 0.01 < threshold < 0.99
    pair = [h_a, h_b]

    def picks_b(lam):
        return rerank(pair, RerankWeights(1.0 - lam, 0.0, lam), bm, disc, vec, [10], "cv") is h_b

    assert not picks_b(threshold - CROSSOVER_TOL)
    assert picks_b(threshold + CROSSOVER_TOL)
    lo, hi = 0.0, 1.0
    for _ in range(40):  # empirical flip point by bisection
        mid = (lo + hi) / 2
        if picks_b(mid):
            hi = mid
        else:
            lo = mid
    assert abs(hi - threshold) <= CROSSOVER_TOL
    _report(
        "mi-reranking",
        f"{RERANK_ITEMS} items bit-identical at (1,0,0); "
        f"analytic crossover {threshold:.8f}, empirical {hi:.8f}",
    )


# 7 ---------------------------------------------------------------------------


def test_discriminator():
    spec = SyntheticSpec(
        num_episodes=40, vocab_size=39, num_latent_classes=16, coarse_dim=16,
        noise_scale=0.05, seed=23,
    )
    dataset, coarse, _, manifest = generate_synthetic(spec)

    # zero-weight initialization scores exactly ln(1/2) by the averaging rule
    disc0 = MiDiscriminator(
        DiscConfig(kind="coarse", vocab_size=len(dataset.vocab), d_visual=coarse.dim), seed=0
    )
    with torch.no_grad():
        disc0.fuse_up.weight.zero_()
        disc0.fuse_up.bias.zero_()
        disc0.fuse_out.weight.zero_()
        disc0.fuse_out.bias.zero_()
    zero_score = q_score(disc0, [10, 11, 12], np.zeros(coarse.dim, dtype=np.float32))
    assert abs(zero_score - math.log(0.5)) < ZERO_WEIGHT_TOL

    train = Dataset(episodes=dataset.episodes[:30], vocab=dataset.vocab)
    held = dataset.episodes[30:]
    cfg = DiscConfig(kind="coarse", vocab_size=len(dataset.vocab), d_visual=coarse.dim)
    optim = OptimConfig(peak_lr=2e-3, warmup_steps=100, max_steps=DISC_STEPS, batch_size=16, seed=0)
    disc, losses = train_discriminator(train, cfg, optim, coarse)
    assert min(losses) < DISC_LOSS_TARGET

    class_of = {}
    for ep in dataset.episodes:
        for k, t in enumerate(ep.turns):
            class_of[t.coarse_idx] = manifest["episode_classes"][ep.id][k]
    all_indices = sorted(class_of)
    rng = np.random.default_rng(0)
    pairs = []
    for ep in held:
        for turn in ep.turns:
            c = class_of[turn.coarse_idx]
            others = [i for i in all_indices if class_of[i] != c]
            neg = others[int(rng.choice(len(others)))]
            pairs.append((list(turn.tokens), coarse.vector(turn.coarse_idx), coarse.vector(neg)))
    accuracy = pair_accuracy(disc, pairs)
    assert accuracy >= DISC_PAIR_ACC
    _report(
        "discriminator",
        f"zero-weight score {zero_score:.7f}; min loss {min(losses):.3f}; "
        f"held-out pair accuracy {accuracy:.3f} over {len(pairs)} pairs",
    )


# 8 ---------------------------------------------------------------------------


def test_metrics_oracle():
    import random

    words = ["the", "cat", "sat", "mat", "dog", "ran", "far", "gone", "red", "blue"]
    rng = random.Random(99)
    cands, refs = [], []
    for _ in range(METRIC_ORACLE_PAIRS):
        cands.append(" ".join(rng.choices(words, k=rng.randint(0, 9))))
        refs.append(" ".join(rng.choices(words, k=rng.randint(1, 9))))
    worst = 0.0
    for n in (1, 2, 4):
        worst = max(worst, abs(bleu_n(cands, refs, n) - bleu_bruteforce(cands, refs, n)))
        worst = max(worst, abs(rouge_n_f(cands, refs, n) - rouge_f_bruteforce(cands, refs, n)))
    for n in (1, 2, 3, 4):
        worst = max(worst, abs(dist_n(cands, n) - dist_bruteforce(cands, n)))
    assert worst < METRIC_ORACLE_TOL

    clipped = bleu_n(["the the the"], ["the cat"], 1)
    assert abs(clipped - 100.0 / 3.0) < METRIC_ORACLE_TOL
    assert dist_n(["a b a b"], 1) == 0.5
    _report(
        "metrics-oracle",
        f"{METRIC_ORACLE_PAIRS} random pairs, worst |delta| {worst:.2e}; "
        f"BLEU-1 clipped case {clipped:.6f}; Dist-1 0.5 exact",
    )


# 9 ---------------------------------------------------------------------------


def test_adversarial_evaluator():
    dataset, coarse, _, _ = generate_synthetic(
        SyntheticSpec(num_episodes=40, vocab_size=48, num_latent_classes=4, coarse_dim=8, seed=31)
    )
    ids = [ep.id for ep in dataset.episodes]
    train_ids, test_ids = set(ids[:20]), set(ids[20:])
    gold, const = {}, {}
    w = dataset.vocab.ids["w000"]
    for e, j in dataset.examples():
        ep = dataset.episodes[e]
        gold[(ep.id, j)] = list(ep.turns[j].tokens)
        const[(ep.id, j)] = [w]
    cfg = AdvConfig(vocab_size=len(dataset.vocab), d_visual=coarse.dim, steps=300, batch_size=16)
    gold_vals = [
        adversarial_eval(dataset, gold, coarse, train_ids, test_ids, cfg, seed=s)
        for s in range(ADV_SEEDS)
    ]
    const_vals = [
        adversarial_eval(dataset, const, coarse, train_ids, test_ids, cfg, seed=s)
        for s in range(ADV_SEEDS)
    ]
    gold_mean = float(np.mean(gold_vals))
    const_mean = float(np.mean(const_vals))
    assert ADV_GOLD_BAND[0] <= gold_mean <= ADV_GOLD_BAND[1], gold_vals
    assert const_mean <= ADV_CONST_MAX, const_vals
    assert all(0.0 <= v <= 1.0 for v in gold_vals + const_vals)
    _report(
        "adversarial-evaluator",
        f"gold-copy mean {gold_mean:.3f} over {ADV_SEEDS} seeds; constant-token mean {const_mean:.3f}",
    )


# 10 --------------------------------------------------------------------------


def test_determinism_and_persistence(tmp_path):
    dataset, coarse, objects, _ = generate_synthetic(
        SyntheticSpec(num_episodes=8, seed=5, vocab_size=32)
    )
    cfg = tiny_config("cv", len(dataset.vocab), d_visual=coarse.dim, max_tgt_len=6)
    optim = OptimConfig(peak_lr=1e-3, warmup_steps=20, max_steps=60, batch_size=8, seed=12)
    model1, curve1 = train_forward(dataset, cfg, optim, coarse, None)
    model2, curve2 = train_forward(dataset, cfg, optim, coarse, None)
    assert curve1 == curve2

    decode_cfg = DecodeConfig(beam_size=4, n_best=3)
    p1, p2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    write_responses(generate_split(model1, dataset, decode_cfg, coarse, None), p1)
    write_responses(generate_split(model2, dataset, decode_cfg, coarse, None), p2)
    assert p1.read_bytes() == p2.read_bytes()

    ckpt = tmp_path / "m.vckpt"
    save_checkpoint(model1, ckpt, dataset.vocab)
    loaded, _, _ = load_checkpoint(ckpt, expect_component="forward", expect_mode="cv")
    assembly = assemble(dataset.episodes[0], 1, cfg, coarse, None)
    with torch.no_grad():
        diff = (model1.encode(assembly) - loaded.encode(assembly)).abs().max().item()
    assert diff <= CKPT_LOGIT_TOL
    _report(
        "determinism-persistence",
        f"loss curves identical; responses byte-identical; checkpoint max |delta| {diff:.1e}",
    )