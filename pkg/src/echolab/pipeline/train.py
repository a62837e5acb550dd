"""Training loop driver and evaluation over dataset directories."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from echolab.errors import NaNLoss
from echolab.estimator import EchoScanEstimator
from echolab.objective import MetricReport, per_sample_metrics, summarize
from echolab.pipeline.config import save_config
from echolab.pipeline.dataset import Dataset, load_dataset

log = logging.getLogger(__name__)

CHECKPOINT = "model.echk"
LOG_FILE = "train_log.jsonl"


def estimator_from_config(cfg, n_steps=None) -> EchoScanEstimator:
    t, m = cfg["train"], cfg["model"]
    return EchoScanEstimator(
        profile=m["profile"], aggregation_mode=m["aggregation_mode"], model_params=dict(m.get("params") or {}),
        n_steps=int(t["steps"] if n_steps is None else n_steps), batch_size=int(t["batch_size"]),
        lr_max=float(t["lr_max"]), lr_min=float(t["lr_min"]), warmup=int(t["warmup"]),
        cycle_length=int(t["cycle_length"]), cycle_mult=float(t["cycle_mult"]), alpha=float(t["alpha"]),
        beta=float(t["beta"]), time_mask=bool(t["time_mask"]), n_masks=int(t["n_masks"]),
        max_mask_len=int(t["max_mask_len"]), random_state=int(t["seed"]), log_every=0)


def split_indices(n, val_fraction, seed):
    """Fixed train/validation split of ``n`` samples (validation gets at least
    one sample whenever the fraction is positive and n > 1)."""
    order = np.random.default_rng([seed, 95]).permutation(n)
    n_val = int(round(n * val_fraction))
    if val_fraction > 0 and n > 1:
        n_val = min(max(n_val, 1), n - 1)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


@dataclass
class TrainResult:
    estimator: EchoScanEstimator
    checkpoint: Path
    log_path: Path
    validation: list = field(default_factory=list)


def train(cfg, dataset=None, out=None) -> TrainResult:
    """Train on ``dataset`` (default ``<dataset.root>/train``) and write the
    checkpoint, its JSON sidecar, the run config and a JSON-lines log to
    ``out`` (default ``train.out``)."""
    t = cfg["train"]
    ds = dataset if isinstance(dataset, Dataset) else load_dataset(
        dataset if dataset is not None else Path(cfg["dataset"]["root"]) / "train")
    out = Path(out if out is not None else t["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    tr_idx, val_idx = split_indices(len(ds), float(t["val_fraction"]), int(t["seed"]))
    X, y = ds.arrays(tr_idx)
    Xv, yv = ds.arrays(val_idx) if len(val_idx) else (None, None)
    est = estimator_from_config(cfg)
    ckpt = out / CHECKPOINT
    log_path = out / LOG_FILE
    val_every = int(t["val_every"])
    validation = []

    with open(log_path, "w") as fh:
        def write(row):
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.flush()

        def validate(step):
            row = {"step": step}
            if Xv is not None:
                P, ph = est.predict_proba(Xv)
                m = per_sample_metrics(P, ph, *yv)
                row.update({f"val_{k}": float(v.mean()) for k, v in m.items()})
            validation.append(row)
            write(row)
            est.save(ckpt)

        def callback(step, e):
            h = e.history_[-1]
            if step % 50 == 0:
                write(h)
            if val_every and (step + 1) % val_every == 0:
                validate(step + 1)
            return False

        try:
            est.fit(X, y, callback=callback)
        except NaNLoss as exc:
            dump = {"error": str(exc), "history_tail": est.history_[-50:], "train_indices": tr_idx.tolist()}
            (out / "nan_dump.json").write_text(json.dumps(dump, indent=1))
            raise
        if not validation or validation[-1]["step"] != len(est.history_):
            validate(len(est.history_))
    log.info("trained %d steps, checkpoint %s", len(est.history_), ckpt)
    return TrainResult(est, ckpt, log_path, validation)


def _as_estimator(model):
    if isinstance(model, EchoScanEstimator):
        return model
    return EchoScanEstimator.load(model)


def evaluate_arrays(model, ds: Dataset):
    """Per-sample metric arrays of ``model`` on dataset ``ds``."""
    est = _as_estimator(model)
    X, (Y, H) = ds.arrays()
    P, ph = est.predict_proba(X)
    return per_sample_metrics(P, ph, Y, H)


def evaluate(model, dataset) -> MetricReport:
    """MetricReport of ``model`` (estimator or checkpoint path) on a dataset
    (Dataset or directory), broken down by room family and LOS label."""
    ds = dataset if isinstance(dataset, Dataset) else load_dataset(dataset)
    metrics = evaluate_arrays(model, ds)
    return summarize(metrics, ds.families, ds.los_labels)
