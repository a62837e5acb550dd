"""On-disk RIR datasets.

Layout of a dataset directory::

    manifest.json   settings plus one record per sample
    rirs.f32        packed little-endian float32 RIRs, (M, N) per sample, channel-major
    gt/<id>.pgm     binary floorplan (0 or 255), row-major

Each manifest record stores the room (polygon, device pose, height,
materials), its family and LOS label, the seed triple that produced it, the
SNR, the byte offset/length of its RIR, its PGM name and the height vector as
a string of 0/1 characters. Sample ``i`` is fully determined by
``(seed, i)``, so directories are byte-identical across runs and generation
can resume or fan out over worker processes.
"""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from echolab import acoustics
from echolab.errors import DatasetError, HeightExceedsCanvas, RoomExceedsCanvas, RoomRegenerate
from echolab.geometry import FAMILIES, RoomSpec, sample_standard_room
from echolab.pipeline.pgm import read_pgm, render_pgm
from echolab.raster import rasterize_floorplan, rasterize_height

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RIR_FILE = "rirs.f32"
GT_DIR = "gt"
FORMAT_VERSION = 1
MAX_ATTEMPTS = 1000
FLUSH_EVERY = 64


@dataclass(frozen=True)
class DatasetSettings:
    """Everything besides (seed, index) that shapes a sample's bytes."""
    families: tuple = FAMILIES
    fs: int = acoustics.FS
    N: int = 512
    M: int = acoustics.N_MICS
    order_cap: int = acoustics.ORDER_CAP
    first_order_only: bool = False
    noise: bool = True
    b: int = 32
    h: int = 16
    pixel_size_lw: float = 0.625
    pixel_size_h: float = 0.5

    def to_dict(self):
        d = dict(self.__dict__)
        d["families"] = list(self.families)
        return d

    @classmethod
    def from_config(cls, cfg):
        ds, sim = cfg["dataset"], cfg["sim"]
        return cls(tuple(ds["families"]), int(sim["fs"]), int(sim["N"]), int(sim["M"]), int(sim["order_cap"]),
                   bool(sim["first_order_only"]), bool(sim["noise"]), int(ds["b"]), int(ds["h"]),
                   float(ds["pixel_size_lw"]), float(ds["pixel_size_h"]))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["families"] = tuple(d["families"])
        return cls(**d)


def sample_family(settings: DatasetSettings, index: int) -> str:
    return settings.families[index % len(settings.families)]


def make_sample(settings: DatasetSettings, seed: int, index: int):
    """Build sample ``index``: returns (record, rir (M, N) float32, floorplan, height).

    Attempt ``a`` draws the room from SeedSequence([seed, index, a, 0]) and the
    simulation noise from SeedSequence([seed, index, a, 1]); rooms that fail
    to sample or do not fit the canvas move on to the next attempt.
    """
    family = sample_family(settings, index)
    for attempt in range(MAX_ATTEMPTS):
        room_rng = np.random.default_rng(np.random.SeedSequence([seed, index, attempt, 0]))
        try:
            room = sample_standard_room(family, room_rng)
            fp = rasterize_floorplan(room, settings.b, settings.pixel_size_lw)
            hv = rasterize_height(room, settings.h, settings.pixel_size_h)
        except (RoomRegenerate, RoomExceedsCanvas, HeightExceedsCanvas) as exc:
            log.debug("sample %d attempt %d regenerated: %s", index, attempt, exc)
            continue
        sim_rng = np.random.default_rng(np.random.SeedSequence([seed, index, attempt, 1]))
        rir = acoustics.simulate_room(room, sim_rng, fs=settings.fs, N=settings.N,
                                      first_order_only=settings.first_order_only, order_cap=settings.order_cap,
                                      M=settings.M, noise=settings.noise)
        record = room.to_dict()
        record.update(id=f"{index:06d}", index=index, sample_seed=[seed, index, attempt], snr_db=rir.snr_db,
                      height_vector="".join(str(int(v)) for v in hv.pixels))
        return record, rir.samples.astype("<f4"), fp.pixels, hv.pixels
    raise DatasetError(f"sample {index}: no valid room after {MAX_ATTEMPTS} attempts")


def _make_sample_star(args):
    return make_sample(*args)


def _read_manifest(path):
    try:
        return json.loads((path / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest in {path}: {exc}") from exc


def _write_manifest(path, header, records):
    doc = dict(header)
    doc["count"] = len(records)
    doc["samples"] = records
    tmp = path / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True))
    os.replace(tmp, path / MANIFEST)


def generate_dataset(out, seed: int, count: int, settings: DatasetSettings = DatasetSettings(), workers: int = 1):
    """Create (or resume) a dataset of ``count`` samples in directory ``out``.

    An existing directory built with the same seed and settings is extended
    from its last complete record; anything else there is an error.
    """
    out = Path(out)
    (out / GT_DIR).mkdir(parents=True, exist_ok=True)
    header = {"version": FORMAT_VERSION, "seed": int(seed), "settings": settings.to_dict()}
    records = []
    record_bytes = settings.M * settings.N * 4
    if (out / MANIFEST).exists():
        old = _read_manifest(out)
        if {k: old.get(k) for k in header} != header:
            raise DatasetError(f"{out} holds a dataset with different seed or settings")
        records = old["samples"][:count]
    # drop any RIR bytes written after the last flushed manifest
    with open(out / RIR_FILE, "ab") as fh:
        fh.truncate(len(records) * record_bytes)
    start = len(records)
    if start:
        log.info("resuming %s at sample %d", out, start)
    jobs = [(settings, int(seed), i) for i in range(start, count)]
    pool = ProcessPoolExecutor(workers) if workers > 1 and jobs else None
    results = pool.map(_make_sample_star, jobs, chunksize=8) if pool else map(_make_sample_star, jobs)
    try:
        with open(out / RIR_FILE, "ab") as fh:
            for record, rir, fp, _ in results:
                record["offset"] = fh.tell()
                record["length"] = record_bytes
                record["gt"] = f"{GT_DIR}/{record['id']}.pgm"
                fh.write(rir.tobytes())
                render_pgm(fp, out / record["gt"])
                records.append(record)
                if len(records) % FLUSH_EVERY == 0:
                    fh.flush()
                    _write_manifest(out, header, records)
    finally:
        if pool:
            pool.shutdown()
    _write_manifest(out, header, records)
    return out


class Dataset:
    """Read-only view of a dataset directory. RIRs are memory-mapped."""

    def __init__(self, path):
        self.path = Path(path)
        doc = _read_manifest(self.path)
        self.seed = doc["seed"]
        self.settings = DatasetSettings.from_dict(doc["settings"])
        self.records = doc["samples"]
        if doc.get("count") != len(self.records):
            raise DatasetError("manifest count disagrees with its records")
        s = self.settings
        size = (self.path / RIR_FILE).stat().st_size if (self.path / RIR_FILE).exists() else -1
        record_bytes = s.M * s.N * 4
        for i, r in enumerate(self.records):
            if r["length"] != record_bytes or r["offset"] != i * record_bytes:
                raise DatasetError(f"record {r['id']} has offset/length inconsistent with M*N*4 packing")
        if size != len(self.records) * record_bytes:
            raise DatasetError(f"{RIR_FILE} holds {size} bytes, manifest expects {len(self.records) * record_bytes}")
        if self.records:
            self._rirs = np.memmap(self.path / RIR_FILE, dtype="<f4", mode="r", shape=(len(self.records), s.M, s.N))
        else:
            self._rirs = np.zeros((0, s.M, s.N), dtype="<f4")
        self._floorplans = None

    def __len__(self):
        return len(self.records)

    @property
    def rirs(self):
        """(n, M, N) read-only memmap."""
        return self._rirs

    @property
    def floorplans(self):
        if self._floorplans is None:
            b = self.settings.b
            fps = np.zeros((len(self), b, b), dtype=np.uint8)
            for i, r in enumerate(self.records):
                fps[i] = read_pgm(self.path / r["gt"]) // 255
            self._floorplans = fps
        return self._floorplans

    @property
    def heights(self):
        return np.array([[int(c) for c in r["height_vector"]] for r in self.records], dtype=np.uint8).reshape(
            len(self), self.settings.h)

    @property
    def families(self):
        return [r["family"] for r in self.records]

    @property
    def los_labels(self):
        return [r["los_label"] for r in self.records]

    def room(self, i) -> RoomSpec:
        return RoomSpec.from_dict(self.records[i])

    def arrays(self, indices=None):
        """(X, (floorplans, heights)) for the selected samples."""
        idx = np.arange(len(self)) if indices is None else np.asarray(indices)
        return np.asarray(self.rirs[idx]), (self.floorplans[idx], self.heights[idx])


def load_dataset(path) -> Dataset:
    return Dataset(path)
