"""Plain-text SVG and CSV writers for loops and limit shapes.

Output is a pure function of the inputs (fixed number formatting, no
timestamps), so reruns are byte-identical.
"""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f3b73", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#16a085", "#7f8c8d")


def _comment(provenance):
    if not provenance:
        return ""
    body = " ".join(f"{k}={v}" for k, v in provenance.items())
    return f"<!-- {body} -->\n"


def csv_preamble(provenance):
    """'# key=value' lines placed at the top of CSV outputs."""
    return "".join(f"# {k}={v}\n" for k, v in (provenance or {}).items())


def _path(points, scale, height, close=True):
    pts = np.asarray(points, dtype=float) * scale
    d = " ".join(f"{x:.3f},{height - y:.3f}" for x, y in pts)
    return f"M {d}{' Z' if close else ''}"


def loops_svg(L, loops, min_length=100, provenance=None, size=800):
    """Level lines of one configuration, coloured by level.

    Positive loops are solid, negative loops dashed.  Only loops with at least
    ``min_length`` bonds are drawn.
    """
    s = size / L
    keep = [lp for lp in loops if lp.length >= min_length]
    levels = sorted({lp.level for lp in keep}, reverse=True)
    colour = {h: PALETTE[i % len(PALETTE)] for i, h in enumerate(levels)}
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n',
        _comment(provenance),
        f'<title>level lines, L={L}, loops of length at least {min_length}</title>\n',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black" stroke-width="1"/>\n',
    ]
    for lp in keep:
        dash = "" if lp.sign > 0 else ' stroke-dasharray="4,3"'
        out.append(f'<path d="{_path(lp.vertices, s, size, close=False)}" fill="none" '
                   f'stroke="{colour[lp.level]}" stroke-width="1"{dash}>'
                   f'<title>level {lp.level} length {lp.length}</title></path>\n')
    for i, h in enumerate(levels):
        y = 16 + 14 * i
        out.append(f'<text x="8" y="{y}" font-size="12" fill="{colour[h]}">h = {h}</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def shapes_svg(shapes, labels=None, provenance=None, size=600):
    """Nested limit shapes in the unit square (one closed curve per shape)."""
    pad = 20
    inner = size - 2 * pad
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n',
        _comment(provenance),
        "<title>nested limit shapes</title>\n",
        f'<rect x="{pad}" y="{pad}" width="{inner}" height="{inner}" fill="white" stroke="black" stroke-width="1"/>\n',
    ]
    for i, shape in enumerate(shapes):
        pts = np.asarray(getattr(shape, "boundary", shape), dtype=float)
        pts = pad + pts * inner
        d = " ".join(f"{x:.3f},{size - y:.3f}" for x, y in pts)
        c = PALETTE[i % len(PALETTE)]
        label = labels[i] if labels else f"shape {i}"
        out.append(f'<path d="M {d} Z" fill="none" stroke="{c}" stroke-width="1.5"><title>{label}</title></path>\n')
        out.append(f'<text x="{pad + 4}" y="{size - pad - 6 - 14 * i}" font-size="12" fill="{c}">{label}</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def shapes_csv(rows, provenance=None):
    """rows: iterable of (n, lam, shape).  One line per boundary point."""
    lines = [csv_preamble(provenance) + "n,lambda,index,x,y"]
    for n, lam, shape in rows:
        for i, (x, y) in enumerate(np.asarray(shape.boundary)):
            lines.append(f"{n},{lam:.12g},{i},{x:.12g},{y:.12g}")
    return "\n".join(lines) + "\n"
