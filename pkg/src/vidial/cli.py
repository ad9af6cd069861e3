"""Command-line entry points: synth, train, generate, eval.

Exit codes: 0 success, 1 usage/validation problems, 2 data or runtime
failures. Every command is a pure function of (arguments, config, input
files, seed): rerunning with identical inputs rewrites identical bytes.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import checkpoint, mi, plots
from .adversarial import adversarial_eval
from .config import MODE_CV, MODE_FV, MODE_NV, MODES
from .data import load_dataset
from .errors import ConfigError, SpecInvalid, VidialError
from .featio import load_coarse_features, load_object_features
from .metrics import evaluate_all, write_report
from .rerank import MiConfig, RerankWeights, generate_split, read_responses, write_responses
from .runcfg import RunConfig
from .synthetic import SyntheticSpec, write_synthetic
from .training import train_backward, train_forward
from .vocab import encode_text

USAGE_EXIT = 1
DATA_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _common_flags(sub):
    sub.add_argument("--config", help="run configuration file")
    sub.add_argument("--seed", type=int, help="overrides config seed and VIDIAL_SEED")
    sub.add_argument("--out", required=True, help="output path")


def build_parser() -> _Parser:
    parser = _Parser(prog="vidial", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="write a synthetic corpus")
    _common_flags(synth)
    synth.add_argument("--episodes", type=int, default=50)
    synth.add_argument("--turns-min", type=int, default=4)
    synth.add_argument("--turns-max", type=int, default=8)
    synth.add_argument("--vocab-size", type=int, default=64)
    synth.add_argument("--classes", type=int, default=4)
    synth.add_argument("--coarse-dim", type=int, default=16)
    synth.add_argument("--objects-per-image", type=int, default=3)
    synth.add_argument("--noise-scale", type=float, default=0.05)

    train = commands.add_parser("train", help="train a model component")
    _common_flags(train)
    train.add_argument("--data", help="episodes JSONL (or data.episodes in config)")
    train.add_argument("--coarse", help="VDF1 coarse feature file")
    train.add_argument("--objects", help="VOF1 object feature file")
    train.add_argument("--target", choices=("forward", "backward", "disc"), default="forward")
    train.add_argument("--mode", choices=MODES, help="fusion mode (overrides config)")
    train.add_argument("--forward-ckpt", help="forward checkpoint (encoder sharing only)")

    gen = commands.add_parser("generate", help="decode responses for every context")
    _common_flags(gen)
    gen.add_argument("--ckpt", required=True, help="forward model checkpoint")
    gen.add_argument("--data", help="episodes JSONL")
    gen.add_argument("--coarse", help="VDF1 coarse feature file")
    gen.add_argument("--objects", help="VOF1 object feature file")
    gen.add_argument("--beam-size", type=int)
    gen.add_argument("--nbest", type=int)
    gen.add_argument("--max-tgt-len", type=int)
    gen.add_argument("--mi", action="store_true", help="rerank the N-best list")
    gen.add_argument("--backward-ckpt")
    gen.add_argument("--disc-ckpt")
    gen.add_argument("--lambdas", help="forward,backward,visual weights, e.g. 0.8,0.1,0.1")

    ev = commands.add_parser("eval", help="score a responses file")
    _common_flags(ev)
    ev.add_argument("--responses", required=True)
    ev.add_argument("--adversarial", action="store_true")
    ev.add_argument("--data", help="episodes JSONL (adversarial only)")
    ev.add_argument("--coarse", help="VDF1 coarse feature file (adversarial only)")
    ev.add_argument("--train-split", help="comma-separated episode ids")
    ev.add_argument("--test-split", help="comma-separated episode ids")
    return parser


def _seed_of(args, cfg: RunConfig) -> int:
    return args.seed if args.seed is not None else cfg.seed


def _data_path(args, cfg: RunConfig, flag: str, key: str, required: bool):
    value = getattr(args, flag, None) or cfg[key]
    if value is None and required:
        raise _UsageError(f"missing --{flag.replace('_', '-')} (or {key} in the config)")
    return value


def _write_loss_sidecar(losses, out_path):
    sidecar = Path(str(out_path) + ".loss.tsv")
    with open(sidecar, "w", encoding="utf-8") as f:
        for step, loss in enumerate(losses, 1):
            f.write(f"{step}\t{loss:.10g}\n")
    plots.save_loss_curve(losses, str(out_path) + ".loss.png")


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        num_episodes=args.episodes,
        turns_min=args.turns_min,
        turns_max=args.turns_max,
        vocab_size=args.vocab_size,
        num_latent_classes=args.classes,
        coarse_dim=args.coarse_dim,
        objects_per_image=args.objects_per_image,
        noise_scale=args.noise_scale,
        seed=_seed_of(args, RunConfig.load(args.config)),
    )
    write_synthetic(spec, args.out)
    return 0


def _load_stores(args, cfg, need_coarse, need_objects):
    coarse_path = _data_path(args, cfg, "coarse", "data.coarse", need_coarse)
    objects_path = _data_path(args, cfg, "objects", "data.objects", need_objects)
    coarse = load_coarse_features(coarse_path) if coarse_path else None
    objects = load_object_features(objects_path) if objects_path else None
    return coarse, objects


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config)
    seed = _seed_of(args, cfg)
    mode = args.mode or cfg["model.mode"]
    episodes_path = _data_path(args, cfg, "data", "data.episodes", required=True)
    if args.target == "disc" and mode == MODE_NV:
        raise _UsageError("--target disc needs --mode cv or fv (a visual kind)")

    need_coarse = mode == MODE_CV
    need_objects = mode == MODE_FV
    if args.target == "backward":
        need_coarse = need_objects = False
        mode = MODE_NV
    coarse, objects = _load_stores(args, cfg, need_coarse, need_objects)
    dataset = load_dataset(episodes_path, coarse, objects, max_vocab=cfg["model.max_vocab"])
    optim = cfg.optim_config(seed)

    if args.target == "forward":
        d_visual = 0
        if mode == MODE_CV:
            d_visual = coarse.dim
        elif mode == MODE_FV:
            d_visual = objects.dim
        model_cfg = cfg.model_config(len(dataset.vocab), d_visual, mode)
        model, losses = train_forward(dataset, model_cfg, optim, coarse, objects)
        checkpoint.save_checkpoint(model, args.out, dataset.vocab, component="forward")
    elif args.target == "backward":
        model_cfg = cfg.model_config(len(dataset.vocab), 0, MODE_NV)
        model, losses = train_backward(dataset, model_cfg, optim)
        checkpoint.save_checkpoint(model, args.out, dataset.vocab, component="backward")
    else:
        kind = mi.KIND_COARSE if mode == MODE_CV else mi.KIND_OBJECT
        store = coarse if kind == mi.KIND_COARSE else objects
        disc_cfg = cfg.disc_config(kind, len(dataset.vocab), store.dim)
        forward_model = None
        if disc_cfg.share_encoder:
            if not args.forward_ckpt:
                raise _UsageError("disc.share_encoder=true needs --forward-ckpt")
            forward_model, _, _ = checkpoint.load_checkpoint(
                args.forward_ckpt, expect_component="forward"
            )
        disc, losses = mi.train_discriminator(
            dataset, disc_cfg, optim, store, objective=cfg["disc.objective"],
            forward_model=forward_model,
        )
        mi.save_discriminator(disc, args.out, dataset.vocab)
    _write_loss_sidecar(losses, args.out)
    return 0


def _parse_lambdas(text: str) -> RerankWeights:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"--lambdas needs three comma-separated values, got {text!r}")
    try:
        f, b, v = (float(p) for p in parts)
    except ValueError:
        raise _UsageError(f"--lambdas values must be numbers, got {text!r}") from None
    return RerankWeights(forward=f, backward=b, visual=v)


def cmd_generate(args) -> int:
    cfg = RunConfig.load(args.config)
    model, model_cfg, vocabulary = checkpoint.load_checkpoint(
        args.ckpt, expect_component="forward"
    )
    episodes_path = _data_path(args, cfg, "data", "data.episodes", required=True)

    mi_config = None
    if args.mi:
        if not (args.backward_ckpt and args.disc_ckpt and args.lambdas):
            raise _UsageError("--mi needs --backward-ckpt, --disc-ckpt and --lambdas")
        weights = _parse_lambdas(args.lambdas)
        backward_model, _, _ = checkpoint.load_checkpoint(
            args.backward_ckpt, expect_component="backward"
        )
        disc, _, _ = mi.load_discriminator(args.disc_ckpt)
        mi_config = MiConfig(backward_model=backward_model, disc=disc, weights=weights)

    need_coarse = model_cfg.mode == MODE_CV or (
        mi_config is not None
        and not mi_config.weights.forward_only
        and mi_config.disc.cfg.kind == mi.KIND_COARSE
    )
    need_objects = model_cfg.mode == MODE_FV or (
        mi_config is not None
        and not mi_config.weights.forward_only
        and mi_config.disc.cfg.kind == mi.KIND_OBJECT
    )
    coarse, objects = _load_stores(args, cfg, need_coarse, need_objects)
    dataset = load_dataset(episodes_path, coarse, objects, vocabulary=vocabulary)

    decode_cfg = cfg.decode_config()
    if args.beam_size is not None:
        decode_cfg = replace(decode_cfg, beam_size=args.beam_size)
    if args.nbest is not None:
        decode_cfg = replace(decode_cfg, n_best=args.nbest)
    if args.max_tgt_len is not None:
        decode_cfg = replace(decode_cfg, max_tgt_len=args.max_tgt_len)

    records = generate_split(model, dataset, decode_cfg, coarse, objects, mi_config)
    write_responses(records, args.out)
    return 0


def cmd_eval(args) -> int:
    cfg = RunConfig.load(args.config)
    report = evaluate_all(args.responses)
    if args.adversarial:
        if not (args.data or cfg["data.episodes"]) or not (args.coarse or cfg["data.coarse"]):
            raise _UsageError("--adversarial needs --data and --coarse")
        if not args.train_split or not args.test_split:
            raise _UsageError("--adversarial needs --train-split and --test-split")
        coarse, _ = _load_stores(args, cfg, need_coarse=True, need_objects=False)
        episodes_path = _data_path(args, cfg, "data", "data.episodes", required=True)
        dataset = load_dataset(episodes_path, coarse, None, max_vocab=cfg["model.max_vocab"])
        generated = {}
        for rec in read_responses(args.responses):
            key = (str(rec["episode"]), int(rec["j"]))
            generated[key] = encode_text(dataset.vocab, rec["hypothesis"])
        adv_cfg = cfg.adv_config(len(dataset.vocab), coarse.dim)
        report.adv_success = adversarial_eval(
            dataset,
            generated,
            coarse,
            set(args.train_split.split(",")),
            set(args.test_split.split(",")),
            adv_cfg,
            seed=_seed_of(args, cfg),
        )
    write_report(report, args.out)
    plots.save_metrics_chart(report, str(args.out) + ".png")
    return 0


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "generate": cmd_generate, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run 'vidial <command> --help' for usage", file=sys.stderr)
        return USAGE_EXIT
    except (ConfigError, SpecInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except VidialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
