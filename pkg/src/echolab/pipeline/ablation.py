"""Paired ablation over aggregation modes and reflection order.

Every arm sees the same rooms (dataset seeds are shared), the same
initialization seed and the same batch order; arms differ only in
``model.aggregation_mode`` and ``sim.first_order_only``. Each arm is
evaluated on the shared test rooms simulated under its own setting.
"""
import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from echolab.geometry import CONVEX_FAMILIES
from echolab.objective import summarize
from echolab.pipeline.config import config_hash
from echolab.pipeline.dataset import DatasetSettings, generate_dataset, load_dataset
from echolab.pipeline.train import evaluate_arrays, train

ORDERS = ("full", "first_order_only")


def arm_name(mode, order):
    return f"{mode}_{order}"


def arm_config(cfg, mode, order):
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    arm = copy.deepcopy(cfg)
    arm["model"]["aggregation_mode"] = mode
    arm["sim"]["first_order_only"] = order == "first_order_only"
    return arm


def prepare_datasets(cfg, order, root=None, workers=None):
    """Generate (or resume) the train/test directories for one reflection order."""
    ds = cfg["dataset"]
    root = Path(root if root is not None else ds["root"]) / order
    arm = arm_config(cfg, cfg["model"]["aggregation_mode"], order)
    settings = DatasetSettings.from_config(arm)
    workers = int(ds["workers"] if workers is None else workers)
    generate_dataset(root / "train", int(ds["seed"]), int(ds["train_count"]), settings, workers)
    generate_dataset(root / "test", int(ds["test_seed"]), int(ds["test_count"]), settings, workers)
    return root / "train", root / "test"


@dataclass
class ArmResult:
    mode: str
    order: str
    config_hash: str
    report: dict
    per_sample: dict = field(repr=False, default_factory=dict)

    def to_dict(self):
        d = {"mode": self.mode, "order": self.order, "config_hash": self.config_hash, "report": self.report}
        d["per_sample_iou_2d"] = [float(v) for v in self.per_sample.get("iou_2d", [])]
        return d


@dataclass
class AblationReport:
    arms: dict
    families: list

    def nonconvex_mask(self):
        return ~np.isin(np.asarray(self.families), CONVEX_FAMILIES)

    def paired_gap(self, mode="SP+GeM", metric="iou_2d", subset="nonconvex"):
        """Mean and standard error of (full - first_order) per-sample metric
        on the selected rooms."""
        full = self.arms[arm_name(mode, "full")].per_sample[metric]
        first = self.arms[arm_name(mode, "first_order_only")].per_sample[metric]
        mask = self.nonconvex_mask() if subset == "nonconvex" else np.ones(len(full), dtype=bool)
        d = np.asarray(full)[mask] - np.asarray(first)[mask]
        se = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else float("inf")
        return {"mean": float(d.mean()), "se": se, "n": int(len(d)),
                "full": float(np.asarray(full)[mask].mean()), "first_order_only": float(np.asarray(first)[mask].mean())}

    def to_dict(self):
        out = {"arms": {k: v.to_dict() for k, v in self.arms.items()}, "families": list(self.families)}
        modes = sorted({a.mode for a in self.arms.values()})
        out["order_gap"] = {m: self.paired_gap(m) for m in modes
                            if all(arm_name(m, o) in self.arms for o in ORDERS)}
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def run_ablation(cfg, modes=None, orders=None, out=None) -> AblationReport:
    ab = cfg["ablation"]
    modes = list(modes or ab["modes"])
    orders = list(orders or ab["orders"])
    out = Path(out if out is not None else ab["out"])
    arms = {}
    families = None
    for order in orders:
        train_dir, test_dir = prepare_datasets(cfg, order)
        test = load_dataset(test_dir)
        families = test.families
        for mode in modes:
            arm = arm_config(cfg, mode, order)
            result = train(arm, train_dir, out / arm_name(mode, order))
            metrics = evaluate_arrays(result.estimator, test)
            report = summarize(metrics, test.families, test.los_labels).to_dict()
            arms[arm_name(mode, order)] = ArmResult(mode, order, config_hash(arm), report, metrics)
    report = AblationReport(arms, list(families or []))
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(report.to_json(indent=1, sort_keys=True))
    return report
