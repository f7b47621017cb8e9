"""Replica runs with on-disk checkpoints.

A replica is identified by its ``ReplicaSpec``; its snapshot file name is a
hash of the spec, so a finished replica is reused and an interrupted one
resumes from its last checkpoint.  Because draws are keyed by
(seed, sweep, site), a resumed run is identical to an uninterrupted one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .field import load_snapshot, new_field, save_snapshot
from .params import height_scale
from .sampler import run_sweeps

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplicaSpec:
    beta: float
    L: int
    seed: int
    floor: bool = True
    init: str = "flatH"  # flat0 | flatH | an integer height | file:<snapshot>
    sweeps: int = 0
    boundary: int = 0
    schedule: str = "checkerboard"

    def key(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def init_height(self):
        if self.init == "flat0":
            return 0
        if self.init == "flatH":
            return height_scale(self.beta, self.L)[0]
        if self.init.startswith("file:"):
            start = load_snapshot(self.init[5:]).heights
            if start.shape != (self.L, self.L):
                raise ValueError(f"{self.init[5:]}: snapshot side {start.shape[0]} != {self.L}")
            return start.copy()
        return int(self.init)


def replica_path(cache_dir, spec):
    return Path(cache_dir) / f"L{spec.L}_b{spec.beta:g}_s{spec.seed}_{'f' if spec.floor else 'n'}_{spec.key()}.sos"


def run_replica(spec, cache_dir, checkpoint_every=500, workers=1, provenance=None):
    """Return the field after ``spec.sweeps`` sweeps, using the cache."""
    path = replica_path(cache_dir, spec)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        field = load_snapshot(path, boundary=spec.boundary)
        if field.sweeps > spec.sweeps:
            raise ValueError(f"{path}: snapshot is past the requested sweep count")
    else:
        field = new_field(spec.L, init=spec.init_height(), boundary=spec.boundary,
                          floor=spec.floor, seed=spec.seed)
    extra = {"beta": spec.beta, "init": spec.init, "schedule": spec.schedule,
             "target_sweeps": spec.sweeps, "spec_key": spec.key(), **(provenance or {})}
    t0 = time.time()
    while field.sweeps < spec.sweeps:
        n = min(checkpoint_every, spec.sweeps - field.sweeps)
        run_sweeps(field, n, spec.beta, spec.schedule, workers)
        save_snapshot(field, path, extra)
        log.info("%s: %d/%d sweeps (%.0f s)", path.name, field.sweeps, spec.sweeps, time.time() - t0)
    if not path.exists():
        save_snapshot(field, path, extra)
    return field


def cached_replica(spec, cache_dir):
    """The finished field if it is on disk, else None (never runs)."""
    path = replica_path(cache_dir, spec)
    if not path.exists():
        return None
    field = load_snapshot(path, boundary=spec.boundary)
    return field if field.sweeps == spec.sweeps else None
