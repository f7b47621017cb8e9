"""Replica sets used by the statistical acceptance checks.

``python -m soswall.ensembles [cache_dir]`` fills the cache; the acceptance
tests read finished replicas from it and report missing ones as failures.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

from .runs import ReplicaSpec, run_replica

DEFAULT_CACHE = Path(os.environ.get("SOSWALL_CACHE", Path(__file__).resolve().parents[2] / ".cache" / "ensembles"))

CONCENTRATION_BETA = 0.85
CONCENTRATION_SIZES = (256, 512, 1024)
REPLICAS = 8

# Theorem-2 check: needs beta >= 1 (tension model) and H >= 2, hence L = 4096.
SHAPE_BETA = 1.0
SHAPE_L = 4096
SHAPE_SWEEPS = 2000


def concentration_specs(L, floor=True, beta=CONCENTRATION_BETA, replicas=REPLICAS):
    """Flat-H start with a floor, flat-0 without; 20 L sweeps of burn-in."""
    return [
        ReplicaSpec(beta=beta, L=L, seed=100 * L + i + (0 if floor else 50), floor=floor,
                    init="flatH" if floor else "flat0", sweeps=20 * L)
        for i in range(replicas)
    ]


def shape_specs(replicas=REPLICAS):
    return [
        ReplicaSpec(beta=SHAPE_BETA, L=SHAPE_L, seed=7_000_000 + i, floor=True,
                    init="flatH", sweeps=SHAPE_SWEEPS)
        for i in range(replicas)
    ]


def all_specs():
    out = []
    for L in CONCENTRATION_SIZES[:2]:
        out += concentration_specs(L, True) + concentration_specs(L, False)
    out += shape_specs()
    L = CONCENTRATION_SIZES[2]
    out += concentration_specs(L, True) + concentration_specs(L, False)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    cache = Path(argv[0]) if argv else DEFAULT_CACHE
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for spec in all_specs():
        run_replica(spec, cache)


if __name__ == "__main__":
    main()
