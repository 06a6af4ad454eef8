"""Command line: ``bowgen {synth,prepare,train,generate,evaluate}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import alignment, io, metrics, pipeline, skeleton, synth
from .audio_features import AudioClip, extract_features
from .config import ProjectConfig
from .exceptions import InvalidInput, ShapeError
from .model import ModelConfig, ModelWeights, generate, init_weights
from .training import fit, save_checkpoint

log = logging.getLogger("bowgen")

CHECKPOINT = "checkpoint.bgw"
SPEEDS = (0.5, 0.75, 1.0, 1.5, 2.0)


class CommandError(Exception):
    pass


def _out_dir(cfg):
    if not cfg.out:
        raise CommandError("no output directory (--out or 'out' in config)")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------- synth

def cmd_synth(cfg, args):
    spec = cfg.synth_spec()
    out = _out_dir(cfg)
    pieces = synth.write_corpus(out, spec)
    print(f"wrote {len(pieces)} synthetic pieces to {out}")
    return 0


# ----------------------------------------------------------------- prepare

def cmd_prepare(cfg, args):
    root = cfg.require_path("data")
    out = _out_dir(cfg)
    pieces, errors = pipeline.prepare_dataset(root, cfg.workers)
    if not pieces and not errors:
        raise CommandError(f"no piece directories under {root}")
    manifest, folds = pipeline.write_prepared(out, pieces, cfg.segment_len, cfg.val_fraction, cfg.seed)
    for pid, warns in manifest["warnings"].items():
        for w in warns:
            print(f"warning: {pid}: {w}", file=sys.stderr)
    print(f"prepared {len(pieces)} pieces, {len(manifest['segments'])} segments, "
          f"{len(folds)} folds -> {out}")
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------------- train

def cmd_train(cfg, args):
    data = cfg.require_path("data")
    out = _out_dir(cfg)
    manifest, pieces = pipeline.load_prepared(data)
    seg_len = manifest["segment_len"]
    fold = pipeline.load_fold(data, cfg.fold)
    xt, yt = pipeline.segment_arrays(pieces, fold["train"], seg_len)
    xv, yv = pipeline.segment_arrays(pieces, fold["val"], seg_len)
    if len(xt) == 0 or len(xv) == 0:
        raise CommandError(f"fold {cfg.fold}: empty train ({len(xt)}) or validation ({len(xv)}) set")
    stats = alignment.zscore_fit(xt)
    mcfg = ModelConfig.from_dict({**cfg.model, "segment_len": seg_len})
    tcfg = cfg.train_config()
    weights = init_weights(mcfg, tcfg.seed)
    log_path = out / "train_log.jsonl"
    log_path.unlink(missing_ok=True)
    result = fit(weights, alignment.zscore_apply(xt, stats), yt,
                 alignment.zscore_apply(xv, stats), yv, tcfg, log_path=log_path)
    extra = {
        "norm": stats.to_dict(),
        "fold": fold["fold"],
        "test_pieces": fold["test_pieces"],
        "train_config": tcfg.to_dict(),
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
    }
    save_checkpoint(out / CHECKPOINT, result.weights, result.optimizer, extra)
    hist = [{k: v for k, v in h.items() if k != "wall_time"} for h in result.history]
    (out / "history.json").write_text(json.dumps(hist, indent=1, default=float) + "\n")
    print(f"trained {result.steps} steps; best epoch {result.best_epoch} "
          f"val L1 {result.best_val_loss:.5f} -> {out / CHECKPOINT}")
    return 0


# ---------------------------------------------------------------- generate

def _load_checkpoint(path, cfg):
    path = Path(path)
    if not path.exists():
        raise CommandError(f"checkpoint {path} does not exist")
    config = None
    if cfg.model:
        manifest, _ = ModelWeights.read_manifest(path)
        config = ModelConfig.from_dict({**manifest["config"], **cfg.model})
    weights, extra = ModelWeights.load(path, config)
    if "norm" not in extra:
        raise CommandError(f"checkpoint {path} has no feature normalisation stats")
    return weights, extra, alignment.NormStats.from_dict(extra["norm"])


def _predict(features, weights, stats, speed=1.0):
    x = alignment.zscore_apply(alignment.resample_features(features, speed), stats)
    return generate(x.astype(np.float32), weights)


def _write_skeleton(out, name, joints):
    seq = skeleton.SkeletonSequence(joints)
    skeleton.write_csv(out / f"{name}.csv", seq)
    skeleton.write_binary(out / f"{name}.bgs", seq)
    skeleton.write_render_json(out / f"{name}.json", seq)


def _pieces_for(args, extra, manifest):
    if args.pieces:
        return list(args.pieces)
    return list(extra.get("test_pieces") or manifest["pieces"])


def cmd_generate(cfg, args):
    weights, extra, stats = _load_checkpoint(args.checkpoint, cfg)
    out = _out_dir(cfg)
    speed = args.speed or 1.0
    if args.audio:
        samples, sr = io.read_wav(args.audio)
        feats = extract_features(AudioClip(samples, sr)).frames
        name = args.name or Path(args.audio).stem
        _write_skeleton(out, name, _predict(feats, weights, stats, speed))
        print(f"generated {name} -> {out}")
        return 0
    data = cfg.require_path("data")
    manifest, pieces = pipeline.load_prepared(data)
    names = _pieces_for(args, extra, manifest)
    for pid in names:
        if pid not in pieces:
            raise CommandError(f"piece {pid!r} not in {data}")
        _write_skeleton(out, pid, _predict(pieces[pid].features, weights, stats, speed))
    print(f"generated {len(names)} pieces -> {out}")
    return 0


# ---------------------------------------------------------------- evaluate

def _gt_path(gt_dir, pid):
    for cand in (gt_dir / "pieces" / pid / "skeleton.csv", gt_dir / pid / "skeleton.csv",
                 gt_dir / f"{pid}.csv"):
        if cand.exists():
            return cand
    return None


def _evaluate_files(pred_dir, gt_dir, names=None):
    preds = sorted(pred_dir.glob("*.csv"))
    if names:
        preds = [p for p in preds if p.stem in set(names)]
    reports, errors = {}, []
    for p in preds:
        g = _gt_path(gt_dir, p.stem)
        if g is None:
            errors.append(f"{p.stem}: no ground truth under {gt_dir}")
            continue
        try:
            reports[p.stem] = metrics.evaluate(skeleton.read_csv(p), skeleton.read_csv(g))
        except (ShapeError, InvalidInput) as e:
            errors.append(f"{p.stem}: {e}")
    return reports, errors


def _write_reports(out, reports):
    (out / "reports").mkdir(exist_ok=True)
    for pid, rep in reports.items():
        metrics.write_report(out / "reports" / f"{pid}.json", rep)
    mean = metrics.aggregate(reports)
    metrics.write_table(out / "metrics.csv", [*sorted(reports.items()), ("mean", mean)])
    (out / "summary.json").write_text(json.dumps(
        {"n_pieces": len(reports), "mean": mean.to_dict()}, indent=1, sort_keys=True) + "\n")
    return mean


def _speed_sweep(cfg, args, out):
    if not args.checkpoint:
        raise CommandError("--speed needs --checkpoint")
    weights, extra, stats = _load_checkpoint(args.checkpoint, cfg)
    data = cfg.require_path("data")
    manifest, pieces = pipeline.load_prepared(data)
    names = _pieces_for(args, extra, manifest)
    rows = []
    for s in args.speed:
        reports = {}
        for pid in names:
            p = pieces[pid]
            pred = _predict(p.features, weights, stats, s)
            gt = alignment.resample_time(p.skeleton, s)
            reports[pid] = metrics.evaluate(pred, gt)
        mean = metrics.aggregate(reports)
        rows.append((s, mean))
        sub = out / f"speed_{s:g}x"
        sub.mkdir(exist_ok=True)
        _write_reports(sub, reports)
    with open(out / "speed_sweep.csv", "w") as fh:
        fh.write("speed,bow_x,bow_y,bow_z,bow_avg,cosine_similarity\n")
        for s, m in rows:
            fh.write(f"{s:g}x,{m.bow_x:.6f},{m.bow_y:.6f},{m.bow_z:.6f},{m.bow_avg:.6f},"
                     f"{m.cosine_similarity:.6f}\n")
    with open(out / "speed_table.csv", "w") as fh:
        fh.write("model," + ",".join(f"{s:g}x" for s, _ in rows) + "\n")
        fh.write("ours," + ",".join(f"{m.bow_avg:.4f}" for _, m in rows) + "\n")
    for s, m in rows:
        print(f"{s:g}x  bow avg {m.bow_avg:.4f}")
    return 0


def cmd_evaluate(cfg, args):
    out = _out_dir(cfg)
    if args.speed:
        return _speed_sweep(cfg, args, out)
    if not args.pred:
        raise CommandError("evaluate needs --pred (or --speed with --checkpoint)")
    gt_dir = Path(args.gt) if args.gt else cfg.require_path("data")
    reports, errors = _evaluate_files(Path(args.pred), gt_dir, args.pieces)
    if reports:
        mean = _write_reports(out, reports)
        print(" ".join(f"{c}={getattr(mean, c):.4f}" for c in metrics.MetricsReport.COLUMNS))
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    if not reports and not errors:
        raise CommandError(f"no predictions found in {args.pred}")
    return 1 if errors else 0


# -------------------------------------------------------------------- main

def build_parser():
    parser = argparse.ArgumentParser(prog="bowgen", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML project config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        return p

    p = common(sub.add_parser("synth", help="write a synthetic corpus"))
    p.add_argument("--n-pieces", type=int, dest="synth.n_pieces")
    p.add_argument("--duration", type=float, dest="synth.duration")
    p.add_argument("--bowing-rate", type=float, dest="synth.bowing_rate")
    p.add_argument("--noise", type=float, dest="synth.noise")
    p.add_argument("--stroke-jitter", type=float, dest="synth.stroke_jitter")
    p.add_argument("--sample-rate", type=int, dest="synth.sample_rate")
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("prepare", help="features, segments and fold manifests"))
    p.add_argument("--data", help="dataset root with one directory per piece")
    p.add_argument("--segment-len", type=int, dest="segment_len")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_prepare)

    p = common(sub.add_parser("train", help="train one fold"))
    p.add_argument("--data", help="prepared directory")
    p.add_argument("--fold", type=int)
    p.add_argument("--epochs", type=int, dest="train.max_epochs")
    p.add_argument("--batch-size", type=int, dest="train.batch_size")
    p.add_argument("--max-steps", type=int, dest="train.max_steps")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("generate", help="skeletons from audio"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--audio", help="single WAV file")
    p.add_argument("--name", help="output name for --audio")
    p.add_argument("--data", help="prepared directory (generate for its pieces)")
    p.add_argument("--pieces", nargs="+")
    p.add_argument("--speed", type=float)
    p.set_defaults(func=cmd_generate)

    p = common(sub.add_parser("evaluate", help="metrics against ground truth"))
    p.add_argument("--pred", help="directory of predicted <piece>.csv")
    p.add_argument("--gt", help="ground-truth directory (defaults to --data)")
    p.add_argument("--data", help="prepared directory")
    p.add_argument("--checkpoint")
    p.add_argument("--pieces", nargs="+")
    p.add_argument("--speed", type=float, nargs="+",
                   help=f"tempo factors, e.g. {' '.join(f'{s:g}' for s in SPEEDS)}")
    p.set_defaults(func=cmd_evaluate)
    return parser


_TOP_LEVEL = ("seed", "out", "data", "fold", "segment_len", "val_fraction", "workers")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ProjectConfig.load(args.config)
        values = {k: v for k, v in vars(args).items() if k in _TOP_LEVEL or "." in k}
        cfg.override(**values)
        return args.func(cfg, args)
    except (CommandError, InvalidInput, ShapeError, pipeline.PieceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
