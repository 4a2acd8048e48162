"""Command-line surface: train, generate, evaluate, ablate,
inspect-attention.

Exit codes: 0 success, 2 usage/config problems, 3 numeric failure
(training divergence).  The MEMCAP_LOG environment variable sets the
logging level (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_run_config
from .data import (
    BOS,
    EOS,
    Vocabulary,
    generate_synthetic,
    load_features,
    read_caption_sidecar,
    sample_frames,
    tokenize,
)
from .errors import MemcapError, NumericError
from .metrics import EvalPair, bleu, cider_scores
from .model import AblationVariant, build_model, generate
from .training import Trainer, load_checkpoint, model_from_checkpoint, save_checkpoint

log = logging.getLogger("memcap")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _setup_logging() -> None:
    level = os.environ.get("MEMCAP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# dataset assembly


def _resolve_dataset(config: RunConfig):
    """(samples, vocab) from the synthetic generator or manifests."""
    if config.synthetic:
        samples, vocab = generate_synthetic(config.synthetic_spec(),
                                            config.synthetic_count)
        return samples, vocab
    if not config.train_manifest:
        raise MemcapError("config needs synthetic=true or a train_manifest")
    vocab = _manifest_vocab(config.train_manifest)
    samples = load_features(config.train_manifest, vocab=vocab)
    return samples, vocab


def _manifest_vocab(manifest: str) -> Vocabulary:
    from .data import _sidecar_path  # shared path convention

    manifest_path = Path(manifest)
    texts = []
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        target = manifest_path.parent / line if not Path(line).is_absolute() else Path(line)
        for caps in read_caption_sidecar(_sidecar_path(target)).values():
            texts.extend(caps)
    return Vocabulary.from_texts(texts)


def _pairs(samples, config: RunConfig):
    pairs = []
    for sample in samples:
        frames = sample.frames
        if config.frames > 0:
            frames = sample_frames(frames, config.frames)
        for caption in sample.captions:
            pairs.append((frames, caption))
    return pairs


def _split(items, fraction: float):
    if fraction <= 0.0:
        return list(items), []
    cut = max(1, int(round(len(items) * (1.0 - fraction))))
    return list(items[:cut]), list(items[cut:])


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    samples, vocab = _resolve_dataset(config)
    pairs = _pairs(samples, config)
    train_pairs, val_pairs = _split(pairs, config.val_fraction)
    if config.val_manifest:
        val_samples = load_features(config.val_manifest, vocab=vocab)
        val_pairs = _pairs(val_samples, config)

    model = build_model(config.model_config(len(vocab)),
                        config.ablation_variant(), config.seed)
    trainer = Trainer(model, train_pairs, config.train_config(),
                      val_pairs=val_pairs or None,
                      extra_config={"vocab": vocab.tokens,
                                    "run": config.to_dict()})

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = trainer.run()

    with open(out_dir / "log.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "wall_seconds"])
        for entry in result.log:
            writer.writerow([entry.epoch, repr(entry.train_loss),
                             repr(entry.val_loss), f"{entry.wall_seconds:.3f}"])

    trainer.save(out_dir / "last.mckp")
    save_checkpoint(out_dir / "best.mckp", params=result.best_params,
                    moments_m=dict(zip(trainer.adam.names, trainer.adam.m)),
                    moments_v=dict(zip(trainer.adam.names, trainer.adam.v)),
                    step=trainer.adam.t, config=trainer.config_snapshot(),
                    rng_state=trainer.rng.bit_generator.state)
    log.info("wrote %s", out_dir / "best.mckp")

    if result.diverged:
        print("training diverged; last good checkpoint retained", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate / inspect-attention


def _load_model_for_inference(checkpoint_path, features_path):
    cp = load_checkpoint(checkpoint_path)
    model = model_from_checkpoint(cp)
    vocab = Vocabulary()
    for token in cp.config.get("vocab", [])[4:]:
        vocab.add(token)
    run = cp.config.get("run", {})
    samples = load_features(features_path, vocab=vocab)
    want = (model.config.locations, model.config.depth)
    for sample in samples:
        have = sample.frames[0].shape
        if have != want:
            raise MemcapError(
                f"feature maps of shape {have} do not fit a model built for {want}")
    frames_setting = int(run.get("frames", 0))
    if frames_setting > 0:
        for sample in samples:
            sample.frames = sample_frames(sample.frames, frames_setting)
    return model, vocab, samples, run


def _decode(model, sample, vocab, beam: int, max_len: int):
    mode = "beam" if beam and beam > 1 else "greedy"
    return generate(model, sample.frames, BOS, EOS, mode=mode,
                    beam_width=max(1, beam), max_len=max_len)


def _write_attention(fh, sample_id, vocab, gen) -> None:
    writer = csv.writer(fh)
    for step, (token, alpha) in enumerate(zip(gen.tokens, gen.alphas), 1):
        writer.writerow([sample_id, step, vocab.token_of(token)]
                        + [repr(float(a)) for a in alpha])


def cmd_generate(args) -> int:
    model, vocab, samples, run = _load_model_for_inference(args.checkpoint, args.features)
    beam = args.beam if args.beam is not None else int(run.get("beam", 0))
    max_len = args.max_len if args.max_len is not None else int(run.get("max_len", 30))

    dump = open(args.dump_attention, "w", newline="", encoding="utf-8") \
        if args.dump_attention else None
    try:
        if dump:
            n = len(samples[0].frames)
            dump.write(",".join(["id", "step", "token"]
                                + [f"alpha{i}" for i in range(n)]) + "\n")
        for sample in samples:
            gen = _decode(model, sample, vocab, beam, max_len)
            caption = " ".join(vocab.token_of(t) for t in gen.tokens if t != EOS)
            print(f"{sample.id}\t{caption}")
            if dump:
                _write_attention(dump, sample.id, vocab, gen)
    finally:
        if dump:
            dump.close()
    return EXIT_OK


def cmd_inspect_attention(args) -> int:
    model, vocab, samples, run = _load_model_for_inference(args.checkpoint, args.features)
    max_len = args.max_len if args.max_len is not None else int(run.get("max_len", 30))
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        n = len(samples[0].frames)
        out.write(",".join(["id", "step", "token"]
                           + [f"alpha{i}" for i in range(n)]) + "\n")
        for sample in samples:
            gen = _decode(model, sample, vocab, beam=0, max_len=max_len)
            _write_attention(out, sample.id, vocab, gen)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _read_candidates(path) -> dict:
    candidates = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise MemcapError(f"{path}:{lineno}: expected 'id<TAB>caption'")
        vid, caption = line.split("\t", 1)
        candidates[vid] = caption
    return candidates


def _reference_texts(manifest: str) -> dict:
    from .data import _sidecar_path

    manifest_path = Path(manifest)
    refs: dict = {}
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        target = manifest_path.parent / line if not Path(line).is_absolute() else Path(line)
        for vid, texts in read_caption_sidecar(_sidecar_path(target)).items():
            refs.setdefault(vid, []).extend(texts)
    return refs


def cmd_evaluate(args) -> int:
    candidates = _read_candidates(args.candidates)
    references = _reference_texts(args.manifest)
    missing = sorted(set(candidates) - set(references))
    if missing:
        raise MemcapError(f"no references for candidate ids: {', '.join(missing)}")
    if not candidates:
        raise MemcapError("candidate file is empty")

    ids = sorted(candidates)
    pairs = [EvalPair(candidate=tokenize(candidates[vid]),
                      references=[tokenize(t) for t in references[vid]])
             for vid in ids]
    scores = {f"bleu{n}": bleu(pairs, n) for n in (1, 2, 3, 4)}
    cider_mean, per_pair = cider_scores(pairs)
    scores["cider"] = cider_mean
    print(f"pairs={len(pairs)} " + " ".join(f"{k}={v:.6f}" for k, v in scores.items()))

    if args.per_sentence:
        with open(args.per_sentence, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, delimiter="\t")
            writer.writerow(["id", "bleu1", "bleu2", "bleu3", "bleu4", "cider"])
            for vid, pair, pair_cider in zip(ids, pairs, per_pair):
                row = [vid] + [f"{bleu([pair], n, smooth=True):.6f}" for n in (1, 2, 3, 4)]
                writer.writerow(row + [f"{pair_cider:.6f}"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# ablate


def _ablation_job(payload):
    """Train one (variant, seed) cell and score the held-out split."""
    config_dict, variant_name, seed = payload
    config = RunConfig(**config_dict)
    samples, vocab = generate_synthetic(config.synthetic_spec(),
                                        config.synthetic_count)
    pairs = _pairs(samples, config)
    train_pairs, held = _split(pairs, config.eval_fraction)

    model = build_model(config.model_config(len(vocab)),
                        AblationVariant(variant_name), seed)
    Trainer(model, train_pairs, config.train_config(seed=seed)).run()

    evals = []
    for frames, tokens in held:
        gen = generate(model, frames, BOS, EOS, max_len=config.max_len)
        cand = [t for t in gen.tokens if t != EOS]
        ref = [t for t in tokens if t not in (BOS, EOS)]
        evals.append(EvalPair(candidate=cand, references=[ref]))
    row = [bleu(evals, n) for n in (1, 2, 3, 4)]
    row.append(cider_scores(evals)[0])
    return variant_name, seed, row

METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "cider")


def cmd_ablate(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    if not config.synthetic:
        raise MemcapError("the ablation harness runs on the synthetic dataset; "
                          "set synthetic=true in the config")
    seeds = list(range(config.seed, config.seed + args.seeds))
    jobs = [(config.to_dict(), variant.value, seed)
            for variant in AblationVariant for seed in seeds]

    if args.workers > 1:
        import multiprocessing as mp
        with mp.Pool(args.workers) as pool:
            results = pool.map(_ablation_job, jobs)
    else:
        results = [_ablation_job(job) for job in jobs]

    by_variant: dict = {v.value: [] for v in AblationVariant}
    for variant_name, _, row in results:
        by_variant[variant_name].append(row)

    print("\t".join(["variant"] + list(METRIC_NAMES)))
    for variant in AblationVariant:
        rows = np.array(by_variant[variant.value])
        cells = []
        for col in range(rows.shape[1]):
            mean = rows[:, col].mean()
            if len(seeds) > 1:
                cells.append(f"{mean:.4f}±{rows[:, col].std(ddof=1):.4f}")
            else:
                cells.append(f"{mean:.4f}")
        print("\t".join([variant.value] + cells))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing


def _overrides(args) -> dict:
    keys = ("seed", "variant", "frames", "beam", "max_len", "epochs")
    return {k: getattr(args, k, None) for k in keys}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memcap",
        description="Train, run, and evaluate the memory-augmented video captioner.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file path or preset name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--variant", default=None,
                       choices=[v.value for v in AblationVariant])
        p.add_argument("--frames", type=int, default=None, choices=[4, 8, 16, 40])
        p.add_argument("--epochs", type=int, default=None)

    p_train = sub.add_parser("train", help="train a model and write checkpoints")
    common(p_train)
    p_train.add_argument("--out", default="runs/latest", help="output directory")
    p_train.set_defaults(fn=cmd_train)

    p_gen = sub.add_parser("generate", help="decode captions for feature files")
    p_gen.add_argument("--checkpoint", required=True)
    p_gen.add_argument("--features", required=True,
                       help="an .mvfm file or a manifest")
    p_gen.add_argument("--beam", type=int, default=None,
                       help="beam width; omit or 0 for greedy")
    p_gen.add_argument("--max-len", type=int, default=None, dest="max_len")
    p_gen.add_argument("--dump-attention", dest="dump_attention", default=None,
                       help="write per-word attention weights to this CSV")
    p_gen.set_defaults(fn=cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score candidate captions")
    p_eval.add_argument("--candidates", required=True, help="TSV id<TAB>caption")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--per-sentence", dest="per_sentence", default=None)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_abl = sub.add_parser("ablate", help="train and score all five variants")
    common(p_abl)
    p_abl.add_argument("--seeds", type=int, default=1,
                       help="number of seeds per variant (mean±std when >1)")
    p_abl.add_argument("--workers", type=int, default=1,
                       help="parallel worker processes")
    p_abl.set_defaults(fn=cmd_ablate)

    p_insp = sub.add_parser("inspect-attention",
                            help="dump per-word attention for feature files")
    p_insp.add_argument("--checkpoint", required=True)
    p_insp.add_argument("--features", required=True)
    p_insp.add_argument("--max-len", type=int, default=None, dest="max_len")
    p_insp.add_argument("--out", default=None, help="CSV path (default stdout)")
    p_insp.set_defaults(fn=cmd_inspect_attention)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MemcapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
