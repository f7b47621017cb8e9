"""Level lines of a height field as closed dual-lattice loops.

Geometry: site (x, y) is the unit cell [x, x+1] x [y, y+1]; dual vertices are
the integer points (i, j), 0 <= i, j <= L, and the ring sites are the cells
just outside the box.  A bond of level h separates a site with height >= h
from a neighbour with height <= h - 1.  Bonds are oriented with the high side
on the left, so a loop around a high region runs counter-clockwise (positive
contour) and a loop around a low pocket runs clockwise (negative contour).

At a dual vertex where four bonds meet, the loop pairs the North arm with the
East arm and the South arm with the West arm (``pairing="NE"``); the other
diagonal convention is ``pairing="NW"``.  Both are symmetric under 180 degree
rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numba as nb
import numpy as np

from .params import macro_threshold

# arm codes at a dual vertex
N, E, S, W = 0, 1, 2, 3
ARM_STEP = ((0, 1), (1, 0), (0, -1), (-1, 0))
PAIRINGS = {"NE": (E, N, W, S), "NW": (W, S, E, N)}  # partner[arm]


class DualBond(NamedTuple):
    """Unit dual segment a -> b and the primal pair it separates (left, right)."""

    a: tuple
    b: tuple
    left: tuple
    right: tuple


@dataclass
class BondSet:
    """Oriented bonds of one level.

    ``vert[y, i]`` is +1 (upward) / -1 (downward) / 0 for the bond from (i, y)
    to (i, y+1), which separates site (i-1, y) from (i, y).  ``horiz[j, x]`` is
    +1 (eastward) / -1 / 0 for the bond from (x, j) to (x+1, j), which
    separates (x, j-1) from (x, j).
    """

    vert: np.ndarray
    horiz: np.ndarray
    level: int

    @property
    def L(self):
        return self.vert.shape[0]

    def __len__(self):
        return int(np.count_nonzero(self.vert) + np.count_nonzero(self.horiz))

    def as_set(self):
        out = set()
        for y, i in zip(*np.nonzero(self.vert)):
            y, i = int(y), int(i)
            if self.vert[y, i] > 0:
                out.add(DualBond((i, y), (i, y + 1), (i - 1, y), (i, y)))
            else:
                out.add(DualBond((i, y + 1), (i, y), (i, y), (i - 1, y)))
        for j, x in zip(*np.nonzero(self.horiz)):
            j, x = int(j), int(x)
            if self.horiz[j, x] > 0:
                out.add(DualBond((x, j), (x + 1, j), (x, j), (x, j - 1)))
            else:
                out.add(DualBond((x + 1, j), (x, j), (x, j - 1), (x, j)))
        return out

    def pairs(self):
        """Unordered separated primal pairs."""
        return {frozenset((b.left, b.right)) for b in self.as_set()}


def level_bonds(field, h):
    """All bonds separating a site >= h from a neighbour <= h - 1.

    Pairs with at least one interior site are scanned, so bonds to the ring
    are included and ring-ring pairs are not.
    """
    pad = field.padded
    L = field.L
    hi = pad >= h
    # vertical bonds: sites (i-1, y) and (i, y) -> padded columns i and i+1
    left = hi[1:-1, 0:-1]
    right = hi[1:-1, 1:]
    vert = left.astype(np.int8) - right.astype(np.int8)
    # horizontal bonds: sites (x, j-1) below and (x, j) above
    below = hi[0:-1, 1:-1]
    above = hi[1:, 1:-1]
    horiz = above.astype(np.int8) - below.astype(np.int8)
    assert vert.shape == (L, L + 1) and horiz.shape == (L + 1, L)
    return BondSet(vert, horiz, int(h))


# --- loop assembly ------------------------------------------------------------------

@nb.njit(cache=True)
def _out_arm(vert, horiz, i, j, arm):
    """True if the bond on ``arm`` of vertex (i, j) points away from it."""
    L = vert.shape[0]
    if arm == 0:
        return j < L and vert[j, i] > 0
    if arm == 2:
        return j > 0 and vert[j - 1, i] < 0
    if arm == 1:
        return i < L and horiz[j, i] > 0
    return i > 0 and horiz[j, i - 1] < 0


@nb.njit(cache=True)
def _bond_id(L, i, j, arm):
    """Index of the bond on ``arm`` of vertex (i, j): vertical first, then horizontal."""
    if arm == 0:
        return j * (L + 1) + i
    if arm == 2:
        return (j - 1) * (L + 1) + i
    if arm == 1:
        return L * (L + 1) + j * L + i
    return L * (L + 1) + j * L + i - 1


@nb.njit(cache=True)
def _trace(vert, horiz, partner):
    """Partition oriented bonds into closed loops.

    Returns (offsets, xs, ys): loop k visits vertices xs[offsets[k]:offsets[k+1]],
    with the starting vertex repeated at the end.  Returns offsets = [-1] on an
    unbalanced vertex.
    """
    L = vert.shape[0]
    n_bonds = 2 * L * (L + 1)
    used = np.zeros(n_bonds, dtype=np.bool_)
    dx = np.array([0, 1, 0, -1])
    dy = np.array([1, 0, -1, 0])
    xs = np.empty(n_bonds + 1 + n_bonds, dtype=np.int32)
    ys = np.empty_like(xs)
    offsets = [0]
    pos = 0
    # every vertex needs in-degree == out-degree
    for j in range(L + 1):
        for i in range(L + 1):
            d_out = 0
            d_in = 0
            for arm in range(4):
                if _out_arm(vert, horiz, i, j, arm):
                    d_out += 1
                else:
                    ni = i + dx[arm]
                    nj = j + dy[arm]
                    if 0 <= ni <= L and 0 <= nj <= L and _out_arm(vert, horiz, ni, nj, (arm + 2) % 4):
                        d_in += 1
            if d_in != d_out:
                return np.array([-1], dtype=np.int64), xs[:0], ys[:0]
    for j in range(L + 1):
        for i in range(L + 1):
            for arm0 in range(4):
                if not _out_arm(vert, horiz, i, j, arm0):
                    continue
                b0 = _bond_id(L, i, j, arm0)
                if used[b0]:
                    continue
                ci, cj, arm = i, j, arm0
                xs[pos] = ci
                ys[pos] = cj
                pos += 1
                while True:
                    used[_bond_id(L, ci, cj, arm)] = True
                    ci += dx[arm]
                    cj += dy[arm]
                    xs[pos] = ci
                    ys[pos] = cj
                    pos += 1
                    incoming = (arm + 2) % 4
                    nxt = -1
                    n_out = 0
                    for a in range(4):
                        if _out_arm(vert, horiz, ci, cj, a):
                            n_out += 1
                            if nxt < 0 or (a == partner[incoming]):
                                nxt = a
                    if n_out == 2:
                        nxt = partner[incoming]
                    if used[_bond_id(L, ci, cj, nxt)]:
                        break
                    arm = nxt
                offsets.append(pos)
    return np.array(offsets, dtype=np.int64), xs[:pos], ys[:pos]


@dataclass
class ContourLoop:
    """A closed level line; ``vertices`` is (n+1, 2) with the first repeated."""

    vertices: np.ndarray
    level: int
    pairing: str = "NE"
    sign: int = 0
    area: int = 0
    id: int = -1
    parent: int = -1
    _mask: tuple | None = field(default=None, repr=False)

    @property
    def length(self):
        return len(self.vertices) - 1

    def signed_area(self):
        x, y = self.vertices[:, 0].astype(np.int64), self.vertices[:, 1].astype(np.int64)
        return int(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])) // 2

    @property
    def orientation(self):
        return 1 if self.signed_area() > 0 else -1

    def bbox(self):
        v = self.vertices
        return int(v[:, 0].min()), int(v[:, 1].min()), int(v[:, 0].max()), int(v[:, 1].max())

    def interior_mask(self):
        """(x0, y0, mask) with mask[y - y0, x - x0] true for enclosed sites."""
        if self._mask is None:
            self._mask = _even_odd_fill(self.vertices)
        return self._mask

    def interior_sites(self):
        x0, y0, m = self.interior_mask()
        ys, xs = np.nonzero(m)
        return set(zip((xs + x0).tolist(), (ys + y0).tolist()))

    def contains_point(self, px, py):
        return point_in_polygon(self.vertices.astype(float), px, py)


def assemble_contours(bonds: BondSet, pairing="NE"):
    """Split a level's bonds into closed loops (see module docstring)."""
    if pairing not in PAIRINGS:
        raise ValueError(f"unknown pairing {pairing!r}")
    partner = np.array(PAIRINGS[pairing], dtype=np.int64)
    offsets, xs, ys = _trace(bonds.vert, bonds.horiz, partner)
    if len(offsets) == 1 and offsets[0] == -1:
        raise AssertionError("bond set has an unbalanced dual vertex")
    loops = []
    for k in range(len(offsets) - 1):
        a, b = offsets[k], offsets[k + 1]
        v = np.stack([xs[a:b], ys[a:b]], axis=1).astype(np.int64)
        loops.append(ContourLoop(v, bonds.level, pairing, id=k))
    return loops


def loop_lengths(bonds: BondSet, pairing="NE"):
    """Lengths of all loops without building loop objects."""
    partner = np.array(PAIRINGS[pairing], dtype=np.int64)
    offsets, _, _ = _trace(bonds.vert, bonds.horiz, partner)
    return np.diff(offsets) - 1


# --- interior and measures ------------------------------------------------------------

def _even_odd_fill(vertices):
    """Scanline fill: a site is inside if an odd number of vertical loop edges lie to its left in its row."""
    v = np.asarray(vertices, dtype=np.int64)
    x0, y0 = int(v[:, 0].min()), int(v[:, 1].min())
    x1, y1 = int(v[:, 0].max()), int(v[:, 1].max())
    mask = np.zeros((max(y1 - y0, 0), max(x1 - x0, 0)), dtype=bool)
    a, b = v[:-1], v[1:]
    vertical = a[:, 0] == b[:, 0]
    if mask.size == 0 or not vertical.any():
        return x0, y0, mask
    ex = a[vertical, 0] - x0
    ey = np.minimum(a[vertical, 1], b[vertical, 1]) - y0
    flips = np.zeros((mask.shape[0], mask.shape[1] + 1), dtype=np.int64)
    np.add.at(flips, (ey, ex), 1)
    mask[:] = (np.cumsum(flips, axis=1)[:, :-1] & 1).astype(bool)
    return x0, y0, mask


def point_in_polygon(poly, px, py):
    """Ray casting; points exactly on an edge are not expected."""
    x, y = poly[:-1, 0], poly[:-1, 1]
    xn, yn = poly[1:, 0], poly[1:, 1]
    cross = (y > py) != (yn > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x + (py - y) * (xn - x) / (yn - y)
    return bool(np.count_nonzero(cross & (px < xi)) & 1)


def boundary_sites(loop: ContourLoop):
    """Sites adjacent to the loop, split into inner and outer (Delta+ / Delta-).

    Besides the sites across each bond, a vertex where the loop turns through
    two non-linked arms contributes its diagonal site, as in the contour
    definition.
    """
    v = loop.vertices
    orient = loop.orientation
    inner, outer = set(), set()
    linked = {frozenset(p) for p in ((N, PAIRINGS[loop.pairing][N]), (S, PAIRINGS[loop.pairing][S]))}
    n = len(v) - 1
    for k in range(n):
        (ax, ay), (bx, by) = v[k], v[k + 1]
        dx, dy = bx - ax, by - ay
        # left and right cells of the directed unit step
        if dx == 1:
            lc, rc = (ax, ay), (ax, ay - 1)
        elif dx == -1:
            lc, rc = (bx, ay - 1), (bx, ay)
        elif dy == 1:
            lc, rc = (ax - 1, ay), (ax, ay)
        else:
            lc, rc = (ax, by), (ax - 1, by)
        lc = (int(lc[0]), int(lc[1]))
        rc = (int(rc[0]), int(rc[1]))
        (inner if orient > 0 else outer).add(lc)
        (outer if orient > 0 else inner).add(rc)
    for k in range(n):
        p_prev, p, p_next = v[k - 1] if k > 0 else v[n - 1], v[k], v[k + 1]
        a_in = _arm_of(p, p_prev)
        a_out = _arm_of(p, p_next)
        if (a_in - a_out) % 2 == 0 or frozenset((a_in, a_out)) in linked:
            continue
        # the cell diagonal to the turn, on the far side of the corner
        cx = p[0] - (1 if E in (a_in, a_out) else 0)
        cy = p[1] - (1 if N in (a_in, a_out) else 0)
        cell = (int(cx), int(cy))
        if cell not in inner and cell not in outer:
            # the corner cell between the two arms lies on one side; its diagonal on the other
            corner = (int(p[0] - (0 if E in (a_in, a_out) else 1)), int(p[1] - (0 if N in (a_in, a_out) else 1)))
            (outer if corner in inner else inner).add(cell)
    return inner, outer


def _arm_of(p, q):
    dx, dy = int(q[0] - p[0]), int(q[1] - p[1])
    return {(0, 1): N, (1, 0): E, (0, -1): S, (-1, 0): W}[(dx, dy)]


@dataclass
class LoopMeasure:
    sign: int
    length: int
    area: int
    bbox: tuple


def classify_and_measure(loop: ContourLoop, field, h):
    """Sign from the heights on both sides of the loop, length, area, bbox.

    Positive: inner sites >= h and outer sites <= h - 1; negative: reversed.
    """
    inner, outer = boundary_sites(loop)
    pad = field.padded

    def heights(cells):
        return np.array([pad[y + 1, x + 1] for x, y in cells])

    hin, hout = heights(inner), heights(outer)
    if hin.min() >= h and hout.max() <= h - 1:
        sign = 1
    elif hin.max() <= h - 1 and hout.min() >= h:
        sign = -1
    else:
        raise AssertionError("loop is not a level line of this field at level h")
    _, _, m = loop.interior_mask()
    area = int(m.sum())
    loop.sign, loop.area = sign, area
    return LoopMeasure(sign, loop.length, area, loop.bbox())


def contour_loops(field, h, pairing="NE", min_length=0):
    """Measured loops of level h, optionally only those at least ``min_length`` long."""
    bonds = level_bonds(field, h)
    partner = np.array(PAIRINGS[pairing], dtype=np.int64)
    offsets, xs, ys = _trace(bonds.vert, bonds.horiz, partner)
    if len(offsets) == 1 and offsets[0] == -1:
        raise AssertionError("bond set has an unbalanced dual vertex")
    out = []
    for k in range(len(offsets) - 1):
        a, b = offsets[k], offsets[k + 1]
        if b - a - 1 < min_length:
            continue
        v = np.stack([xs[a:b], ys[a:b]], axis=1).astype(np.int64)
        lp = ContourLoop(v, int(h), pairing, id=len(out))
        lp.sign = lp.orientation
        _, _, m = lp.interior_mask()
        lp.area = int(m.sum())
        out.append(lp)
    return out


# --- nesting ---------------------------------------------------------------------------

def _contains(outer: ContourLoop, inner: ContourLoop):
    """Interior of ``inner`` is a subset of the interior of ``outer``."""
    ox0, oy0, om = outer.interior_mask()
    ix0, iy0, im = inner.interior_mask()
    if im.size == 0 or not im.any():
        return False
    ys, xs = np.nonzero(im)
    xs = xs + ix0 - ox0
    ys = ys + iy0 - oy0
    ok = (xs >= 0) & (ys >= 0) & (xs < om.shape[1]) & (ys < om.shape[0])
    if not ok.all():
        return False
    return bool(om[ys, xs].all())


def _outer_key(lp, area, idx):
    """Total order in which a container sorts after its contents.

    Identical interiors occur for stacked level lines (a cliff); positive loops
    then nest with the lower level outside, negative ones with the higher.
    """
    return (area, -lp.orientation * lp.level, -idx)


def _boxes_overlap(p, q):
    return not (p[2] <= q[0] or q[2] <= p[0] or p[3] <= q[1] or q[3] <= p[1])


def nesting_forest(loops):
    """Parent of each loop: the smallest loop whose interior contains it.

    Returns the parent index list (-1 for roots) and sets ``loop.parent`` to
    the parent's id.  Partial overlap of two loops at the same level raises.
    """
    n = len(loops)
    areas = [int(lp.interior_mask()[2].sum()) for lp in loops]
    boxes = [lp.bbox() for lp in loops]
    keys = [_outer_key(lp, areas[k], k) for k, lp in enumerate(loops)]
    order = sorted(range(n), key=lambda k: keys[k])
    rank = {k: r for r, k in enumerate(order)}
    parents = [-1] * n
    for a in range(n):
        ba = boxes[a]
        for b in order[rank[a] + 1:]:
            bb = boxes[b]
            if bb[0] <= ba[0] and bb[1] <= ba[1] and bb[2] >= ba[2] and bb[3] >= ba[3] and _contains(loops[b], loops[a]):
                parents[a] = b
                break
        for b in range(a + 1, n):
            if loops[a].level == loops[b].level and _boxes_overlap(ba, boxes[b]):
                _check_no_overlap(loops[a], loops[b])
    for a in range(n):
        loops[a].parent = loops[parents[a]].id if parents[a] >= 0 else -1
    return parents


def _check_no_overlap(p, q):
    px0, py0, pm = p.interior_mask()
    qx0, qy0, qm = q.interior_mask()
    ys, xs = np.nonzero(pm)
    xs = xs + px0 - qx0
    ys = ys + py0 - qy0
    ok = (xs >= 0) & (ys >= 0) & (xs < qm.shape[1]) & (ys < qm.shape[0])
    shared = int(qm[ys[ok], xs[ok]].sum())
    if 0 < shared < min(pm.sum(), qm.sum()):
        raise AssertionError("loops at the same level partially overlap")


# --- ensemble ---------------------------------------------------------------------------

@dataclass
class LoopEnsemble:
    L: int
    H: int
    threshold: int
    levels: dict                      # level -> macroscopic loops (both signs)
    counts: dict = field(default_factory=dict)   # level -> (positive, negative) macroscopic counts
    parents: list = field(default_factory=list)
    pairing: str = "NE"

    def gamma(self, n):
        """Positive macroscopic loops at level H - n."""
        return [lp for lp in self.levels.get(self.H - n, []) if lp.sign > 0]

    def above(self):
        """Positive macroscopic loops at level H + 1."""
        return [lp for lp in self.levels.get(self.H + 1, []) if lp.sign > 0]

    def all_loops(self):
        return [lp for h in sorted(self.levels, reverse=True) for lp in self.levels[h]]


def extract_ensemble(field, params, n_max, pairing="NE", threshold=None):
    """Macroscopic loops at levels H+1, H, ..., H-n_max and their nesting."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    threshold = macro_threshold(field.L) if threshold is None else threshold
    H = params.H
    levels, counts = {}, {}
    for h in range(H + 1, H - n_max - 1, -1):
        loops = contour_loops(field, h, pairing, min_length=threshold)
        levels[h] = loops
        counts[h] = (sum(lp.sign > 0 for lp in loops), sum(lp.sign < 0 for lp in loops))
    ens = LoopEnsemble(field.L, H, threshold, levels, counts, pairing=pairing)
    allp = ens.all_loops()
    for k, lp in enumerate(allp):
        lp.id = k
    ens.parents = nesting_forest(allp)
    return ens


# --- isoperimetry ------------------------------------------------------------------------

@dataclass
class IsoResult:
    applicable: bool
    holds: bool | None = None
    area_bound: float | None = None
    largest_area: int | None = None
    square_side: int | None = None


@nb.njit(cache=True)
def _largest_square(mask):
    ny, nx = mask.shape
    dp = np.zeros((ny + 1, nx + 1), dtype=np.int64)
    best = 0
    for y in range(ny):
        for x in range(nx):
            if mask[y, x]:
                v = 1 + min(dp[y, x + 1], dp[y + 1, x], dp[y, x])
                dp[y + 1, x + 1] = v
                if v > best:
                    best = v
    return best


def largest_square(mask):
    """Side of the largest all-true axis-aligned square in a boolean mask."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if mask.size == 0:
        return 0
    return int(_largest_square(mask))


def isoperimetric_check(loops, L, delta):
    """If total length <= (1+delta) 4L and total area >= (1-2delta) L^2, check the
    area bound for the largest loop and report its largest inscribed square."""
    if not loops:
        return IsoResult(False)
    areas = [lp.area or int(lp.interior_mask()[2].sum()) for lp in loops]
    total_len = sum(lp.length for lp in loops)
    if total_len > (1 + delta) * 4 * L or sum(areas) < (1 - 2 * delta) * L * L:
        return IsoResult(False)
    k = int(np.argmax(areas))
    bound = (1 - 2 * delta) ** 2 / (1 + delta) ** 2 * L * L
    side = largest_square(loops[k].interior_mask()[2])
    return IsoResult(True, areas[k] >= bound - 1e-9, bound, areas[k], side)


# --- output -------------------------------------------------------------------------------

CSV_HEADER = "id,level,sign,length,area,xmin,ymin,xmax,ymax,parent,vertices"


def loops_csv(loops):
    rows = [CSV_HEADER]
    for lp in loops:
        x0, y0, x1, y1 = lp.bbox()
        rows.append(f"{lp.id},{lp.level},{lp.sign},{lp.length},{lp.area},{x0},{y0},{x1},{y1},{lp.parent},{len(lp.vertices)}")
    return "\n".join(rows) + "\n"


def loops_paths(loops):
    """One line per loop: id then the dual-vertex sequence as x:y pairs."""
    lines = []
    for lp in loops:
        pts = " ".join(f"{int(x)}:{int(y)}" for x, y in lp.vertices)
        lines.append(f"{lp.id} {pts}")
    return "\n".join(lines) + "\n"
