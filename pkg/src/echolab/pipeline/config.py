"""Run configuration: a JSON file with dataset, sim, model, train and
ablation sections. Missing keys take the desk-scale defaults below."""
import copy
import hashlib
import json
from pathlib import Path

from echolab import acoustics
from echolab.errors import ParseError

DEFAULTS = {
    "dataset": {
        "root": "data",
        "train_count": 2000,
        "test_count": 200,
        "families": ["shoebox", "pentagonal", "hexagonal", "L", "T"],
        "seed": 0,
        "test_seed": 1,
        "b": 32,
        "h": 16,
        "pixel_size_lw": 0.625,
        "pixel_size_h": 0.5,
        "workers": 1,
    },
    "sim": {
        "fs": acoustics.FS,
        "N": 512,
        "M": acoustics.N_MICS,
        "order_cap": acoustics.ORDER_CAP,
        "first_order_only": False,
        "noise": True,
    },
    "model": {
        "profile": "desk",
        "aggregation_mode": "SP+GeM",
        "params": {},
    },
    "train": {
        "out": "runs/default",
        "steps": 3000,
        "batch_size": 32,
        "lr_max": 1e-2,
        "lr_min": 1e-6,
        "warmup": 200,
        "cycle_length": 2000,
        "cycle_mult": 2.0,
        "alpha": 0.3,
        "beta": 1.0,
        "time_mask": True,
        "n_masks": 3,
        "max_mask_len": 100,
        "val_fraction": 0.05,
        "val_every": 200,
        "seed": 0,
    },
    "ablation": {
        "out": "runs/ablation",
        "modes": ["SP", "GeM", "SP+GeM"],
        "orders": ["full", "first_order_only"],
    },
}

SECTIONS = tuple(DEFAULTS)


def merge(base, override):
    """Recursive dict merge; unknown sections or keys are an error."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise ParseError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and key != "params":
            if not isinstance(value, dict):
                raise ParseError(f"config section {key!r} must be an object")
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_config():
    return copy.deepcopy(DEFAULTS)


def load_config(path=None, overrides=None):
    cfg = default_config()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ParseError("config file must hold a JSON object")
        cfg = merge(cfg, raw)
    if overrides:
        cfg = merge(cfg, overrides)
    validate(cfg)
    return cfg


def validate(cfg):
    t = cfg["train"]
    if int(t["batch_size"]) < 1:
        raise ValueError("batch_size must be >= 1")
    if int(t["steps"]) < 0:
        raise ValueError("steps must be >= 0")
    if not 0 <= float(t["val_fraction"]) < 1:
        raise ValueError("val_fraction must be in [0, 1)")
    return cfg


def with_seed(cfg, seed):
    """Apply a global seed override to every seeded section."""
    cfg = copy.deepcopy(cfg)
    cfg["dataset"]["seed"] = int(seed)
    cfg["dataset"]["test_seed"] = int(seed) + 1
    cfg["train"]["seed"] = int(seed)
    return cfg


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def save_config(cfg, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True))
