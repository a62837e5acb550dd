import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from echolab.geometry import DevicePose, Polygon2D, RoomSpec
from echolab.materials import MaterialAssignment

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def box_room(lx=4.0, ly=3.0, height=3.0, device=(1.3, 1.1, 1.2), materials=None, family="shoebox"):
    """Axis-aligned [0,lx]x[0,ly] room, counter-clockwise."""
    poly = Polygon2D([(0, 0), (lx, 0), (lx, ly), (0, ly)])
    mats = materials or MaterialAssignment("linoleum_on_concrete", "gypsum_board", "hard_surface")
    return RoomSpec(poly, height, mats, DevicePose(*device), family, "LOS")


@pytest.fixture
def room():
    return box_room()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TINY_MODEL = {"stem_channels": 4, "stages": [[8, 4], [8, 4]], "decoder_channels": [4, 4, 4, 4],
              "skip_channels": 2, "skip_pool": 2}


def small_config(root, **sections):
    """Run config with a short RIR, a tiny network and a few training steps."""
    from echolab.pipeline.config import load_config
    over = {
        "dataset": {"root": str(root), "train_count": 12, "test_count": 6},
        "sim": {"N": 128},
        "model": {"params": TINY_MODEL},
        "train": {"out": str(root / "run"), "steps": 4, "batch_size": 4, "warmup": 1, "cycle_length": 4,
                  "val_every": 2, "val_fraction": 0.25, "max_mask_len": 10},
        "ablation": {"out": str(root / "ablation"), "modes": ["SP+GeM"]},
    }
    for name, values in sections.items():
        over.setdefault(name, {}).update(values)
    return load_config(overrides=over)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A 12-sample training directory generated once per session."""
    from echolab.pipeline.dataset import DatasetSettings, generate_dataset, load_dataset
    root = tmp_path_factory.mktemp("data")
    cfg = small_config(root)
    generate_dataset(root / "train", 0, 12, DatasetSettings.from_config(cfg))
    return load_dataset(root / "train"), cfg


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
