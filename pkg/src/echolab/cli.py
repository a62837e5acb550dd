"""Command-line entry point: ``echolab <subcommand> ...``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors
(with the message on standard error).
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from echolab.errors import EchoLabError
from echolab.geometry import FAMILIES

SEED_ENV = "ECHO_LAB_SEED"


def resolve_seed(arg_seed, env=None):
    """--seed wins, then $ECHO_LAB_SEED, else None (keep the config value)."""
    if arg_seed is not None:
        return int(arg_seed)
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def _load_cfg(args):
    from echolab.pipeline.config import load_config, with_seed
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed)
    return with_seed(cfg, seed) if seed is not None else cfg


def cmd_gen(args):
    from echolab.pipeline.dataset import DatasetSettings, generate_dataset
    cfg = _load_cfg(args)
    if args.family != "all":
        cfg["dataset"]["families"] = [args.family]
    if args.first_order_only:
        cfg["sim"]["first_order_only"] = True
    settings = DatasetSettings.from_config(cfg)
    count = args.count if args.count is not None else cfg["dataset"]["train_count"]
    workers = args.workers if args.workers is not None else cfg["dataset"]["workers"]
    out = generate_dataset(args.out, cfg["dataset"]["seed"], count, settings, workers)
    print(f"wrote {count} samples to {out}")


def cmd_train(args):
    from echolab.pipeline.train import train
    cfg = _load_cfg(args)
    if args.steps is not None:
        cfg["train"]["steps"] = args.steps
    result = train(cfg, args.dataset, args.out)
    print(json.dumps({"checkpoint": str(result.checkpoint), "validation": result.validation[-1]}))


def cmd_eval(args):
    from echolab.pipeline.train import evaluate
    report = evaluate(args.checkpoint, args.dataset)
    print(report.to_json(indent=1, sort_keys=True))


def cmd_saliency(args):
    from echolab.estimator import EchoScanEstimator
    from echolab.model import grad_cam
    from echolab.pipeline.dataset import load_dataset
    from echolab.pipeline.pgm import render_pgm, saliency_image
    est = EchoScanEstimator.load(args.checkpoint)
    ds = load_dataset(args.dataset)
    x = np.asarray(ds.rirs[args.index])
    cam = grad_cam(x, est.model_)
    render_pgm(saliency_image(x, cam), args.out)
    peak = int(np.argmax(cam))
    print(json.dumps({"out": str(args.out), "peak_sample": peak, "peak_time_s": peak / ds.settings.fs}))


def cmd_ablate(args):
    from echolab.pipeline.ablation import run_ablation
    cfg = _load_cfg(args)
    report = run_ablation(cfg, args.modes, args.orders, args.out)
    summary = report.to_dict()
    for arm in summary["arms"].values():
        arm.pop("per_sample_iou_2d")
    print(json.dumps(summary, indent=1, sort_keys=True))


def cmd_render(args):
    from echolab.pipeline.dataset import load_dataset
    from echolab.pipeline.pgm import composite, render_pgm
    ds = load_dataset(args.dataset)
    gt = ds.floorplans[args.index].astype(np.float64)
    image = gt
    if args.checkpoint:
        from echolab.estimator import EchoScanEstimator
        est = EchoScanEstimator.load(args.checkpoint)
        prob, _ = est.predict_proba(np.asarray(ds.rirs[args.index]))
        image = composite(gt, prob[0] if args.probabilities else (prob[0] >= 0.5).astype(np.float64))
    render_pgm(image, args.out)
    print(f"wrote {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="echolab", description="Room geometry inference from simulated RIRs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", type=Path, help="run-config JSON file")
        sp.add_argument("--seed", type=int, help=f"global seed (falls back to ${SEED_ENV})")

    g = sub.add_parser("gen", help="generate a dataset directory")
    with_config(g)
    g.add_argument("--family", choices=FAMILIES + ("all",), default="all")
    g.add_argument("--count", type=int)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--workers", type=int)
    g.add_argument("--first-order-only", action="store_true")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a model on a dataset")
    with_config(t)
    t.add_argument("--dataset", type=Path)
    t.add_argument("--out", type=Path)
    t.add_argument("--steps", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="print a MetricReport as JSON")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--dataset", type=Path, required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("saliency", help="Grad-CAM temporal saliency image for one sample")
    s.add_argument("--checkpoint", type=Path, required=True)
    s.add_argument("--dataset", type=Path, required=True)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_saliency)

    a = sub.add_parser("ablate", help="paired aggregation/reflection-order ablation")
    with_config(a)
    a.add_argument("--modes", nargs="+", choices=("SP", "GeM", "SP+GeM"))
    a.add_argument("--orders", nargs="+", choices=("full", "first_order_only"))
    a.add_argument("--out", type=Path)
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("render", help="write a floorplan (or GT | prediction) PGM")
    r.add_argument("--dataset", type=Path, required=True)
    r.add_argument("--index", type=int, default=0)
    r.add_argument("--checkpoint", type=Path)
    r.add_argument("--probabilities", action="store_true", help="render probabilities instead of the binary mask")
    r.add_argument("--out", type=Path, required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (EchoLabError, OSError, ValueError, KeyError, IndexError) as exc:
        print(f"echolab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
