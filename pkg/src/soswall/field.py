"""Height field on an L x L box with a fixed boundary ring, plus snapshot I/O."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SOS1"
FLAG_FLOOR = 1
VERSION = "0.1.0"


@dataclass
class HeightField:
    """Heights stored in a padded (L+2) x (L+2) array; the ring is the boundary.

    ``padded[y + 1, x + 1]`` is the height of interior site (x, y).  Rows are y.
    """

    padded: np.ndarray
    floor: bool = True
    seed: int = 0
    sweeps: int = 0
    boundary_spec: str = "constant:0"
    meta: dict = field(default_factory=dict)

    @property
    def L(self):
        return self.padded.shape[0] - 2

    @property
    def heights(self):
        return self.padded[1:-1, 1:-1]

    def ring(self):
        m = np.ones(self.padded.shape, dtype=bool)
        m[1:-1, 1:-1] = False
        return self.padded[m]

    def copy(self):
        return HeightField(self.padded.copy(), self.floor, self.seed, self.sweeps,
                           self.boundary_spec, dict(self.meta))

    def checksum(self):
        return hashlib.sha256(np.ascontiguousarray(self.padded, dtype="<i4").tobytes()).hexdigest()

    def validate(self):
        if self.floor and self.heights.min(initial=0) < 0:
            raise ValueError("floor violated")


def new_field(L, init=0, boundary=0, floor=True, seed=0):
    """Create a field.

    ``init`` is an int (flat start) or an (L, L) array.  ``boundary`` is an int
    or a function f(x, y) -> int evaluated on ring sites, whose coordinates run
    from -1 to L.
    """
    L = int(L)
    if L < 1:
        raise ValueError("L must be positive")
    pad = np.zeros((L + 2, L + 2), dtype=np.int32)
    if callable(boundary):
        spec = "function"
        for yy in range(L + 2):
            for xx in range(L + 2):
                if 1 <= yy <= L and 1 <= xx <= L:
                    continue
                pad[yy, xx] = int(boundary(xx - 1, yy - 1))
    else:
        spec = f"constant:{int(boundary)}"
        pad[:, :] = int(boundary)
    if np.isscalar(init):
        pad[1:-1, 1:-1] = int(init)
    else:
        init = np.asarray(init)
        if init.shape != (L, L):
            raise ValueError("init array has wrong shape")
        pad[1:-1, 1:-1] = init
    f = HeightField(pad, bool(floor), int(seed), 0, spec)
    if floor and (f.ring().min() < 0):
        raise ValueError("boundary heights must be >= 0 with a floor")
    f.validate()
    return f


def max_height(field):
    """Maximum over interior sites."""
    return int(field.heights.max())


# --- snapshot files ------------------------------------------------------------

def save_snapshot(field, path, extra=None):
    """Write the interior heights and a key=value sidecar manifest.

    The boundary ring is not part of the binary format; the manifest records
    its spec.
    """
    path = Path(path)
    L = field.L
    flags = FLAG_FLOOR if field.floor else 0
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<III", L, flags, 0))
        fh.write(np.ascontiguousarray(field.heights, dtype="<i4").tobytes())
    manifest = {
        "side": L,
        "floor": int(field.floor),
        "seed": field.seed,
        "sweeps": field.sweeps,
        "boundary": field.boundary_spec,
        "code_version": VERSION,
        "sha256": field.checksum(),
    }
    manifest.update(field.meta)
    manifest.update(extra or {})
    write_manifest(path.with_suffix(path.suffix + ".manifest"), manifest)
    return path


def load_snapshot(path, boundary=0):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    L, flags, _ = struct.unpack("<III", raw[4:16])
    body = np.frombuffer(raw[16:], dtype="<i4")
    if body.size != L * L:
        raise ValueError(f"{path}: truncated snapshot ({body.size} of {L * L} heights)")
    meta = {}
    mpath = path.with_suffix(path.suffix + ".manifest")
    if mpath.exists():
        meta = read_manifest(mpath)
        spec = meta.get("boundary", "constant:0")
        if spec.startswith("constant:"):
            boundary = int(spec.split(":", 1)[1])
    f = new_field(L, body.reshape(L, L).astype(np.int32), boundary, bool(flags & FLAG_FLOOR))
    f.seed = int(meta.get("seed", 0))
    f.sweeps = int(meta.get("sweeps", 0))
    return f


def write_manifest(path, items):
    lines = [f"{k}={v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out
