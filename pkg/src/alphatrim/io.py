"""File formats: point CSV, JSON documents, mask CSV and SVG plots.

SVG viewport convention: the data bounding box plus a 5% margin on each
side is mapped to the canvas with a uniform scale ``s``, as
``svg_x = s * (x - xmin)`` and ``svg_y = s * (ymax - y)`` so that the y axis
points up.  The bounds and scale are written in a header comment.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .regions import SupportRegion

__all__ = [
    "SCHEMA_VERSION",
    "InputError",
    "mask_to_csv",
    "mask_svg",
    "parse_points",
    "read_json",
    "read_points",
    "region_polygon",
    "region_svg",
    "svg_viewport",
    "write_json",
    "write_text",
]

SCHEMA_VERSION = 1
SVG_WIDTH = 480.0


class InputError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_points(text: str) -> np.ndarray:
    """Parse CSV points, one row per point, with an optional header row.

    LF and CRLF line endings are accepted and blank lines are skipped.
    Rows with a different number of columns from the first data row raise
    :class:`InputError` naming the line.
    """
    rows = []
    width = None
    for lineno, fields in enumerate(csv.reader(io.StringIO(text.replace("\r\n", "\n"))), start=1):
        fields = [f.strip() for f in fields]
        if not fields or all(f == "" for f in fields):
            continue
        numeric = [_is_number(f) for f in fields]
        if not all(numeric):
            if width is None and not rows and not any(numeric):
                width = len(fields)  # header
                continue
            raise InputError("non-numeric value", lineno)
        if width is None:
            width = len(fields)
        if len(fields) != width:
            raise InputError(f"expected {width} columns, found {len(fields)}", lineno)
        vals = [float(f) for f in fields]
        if not all(math.isfinite(v) for v in vals):
            raise InputError("non-finite value", lineno)
        rows.append(vals)
    if not rows:
        raise InputError("empty sample")
    return np.array(rows, dtype=float)


def read_points(path) -> np.ndarray:
    return parse_points(Path(path).read_text())


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc.msg}", exc.lineno) from None


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def write_json(path, data: dict) -> None:
    write_text(path, json.dumps({"schema_version": SCHEMA_VERSION, **data}, indent=2, sort_keys=True) + "\n")


def mask_to_csv(points: np.ndarray, mask: np.ndarray) -> str:
    points = np.atleast_2d(points)
    d = points.shape[1]
    names = ["x", "y"] if d == 2 else [f"x{j + 1}" for j in range(d)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*names, "member"])
    for p, m in zip(points, mask):
        writer.writerow([*(repr(float(v)) for v in p), int(bool(m))])
    return buf.getvalue()


# -- SVG ---------------------------------------------------------------------

def region_polygon(region: SupportRegion) -> np.ndarray:
    """Polygon of a 2-D region: its vertices, or the grid halfspace intersection."""
    if region.dim != 2:
        raise ValueError("only 2-D regions have polygons")
    if region.vertices is not None:
        return region.vertices
    u, h = region.directions, region.h
    order = np.argsort(np.arctan2(u[:, 1], u[:, 0]), kind="stable")
    u, h = u[order], h[order]
    pts = []
    for j in range(len(h)):
        a, b = u[j], u[(j + 1) % len(h)]
        mat = np.array([a, b])
        if abs(np.linalg.det(mat)) < 1e-12:
            continue
        pts.append(np.linalg.solve(mat, [h[j], h[(j + 1) % len(h)]]))
    return np.array(pts)


def svg_viewport(points: np.ndarray) -> dict:
    pts = np.atleast_2d(points)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    scale = SVG_WIDTH / (hi[0] - lo[0])
    return {"xmin": float(lo[0]), "xmax": float(hi[0]), "ymin": float(lo[1]), "ymax": float(hi[1]), "scale": float(scale)}


def _to_canvas(points: np.ndarray, vp: dict) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.column_stack([vp["scale"] * (pts[:, 0] - vp["xmin"]), vp["scale"] * (vp["ymax"] - pts[:, 1])])


def _svg_open(vp: dict) -> list[str]:
    width = vp["scale"] * (vp["xmax"] - vp["xmin"])
    height = vp["scale"] * (vp["ymax"] - vp["ymin"])
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- viewport xmin={vp['xmin']!r} xmax={vp['xmax']!r} ymin={vp['ymin']!r} ymax={vp['ymax']!r} "
        f"scale={vp['scale']!r}; svg_x = scale*(x - xmin), svg_y = scale*(ymax - y) -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.6f}" height="{height:.6f}" '
        f'viewBox="0 0 {width:.6f} {height:.6f}">',
    ]


def _fmt(v: float) -> str:
    return repr(float(v))


def region_svg(region: SupportRegion, sample: np.ndarray | None = None) -> str:
    """Region polygon (and optionally the sample points) as an SVG document."""
    poly = region_polygon(region)
    everything = poly if sample is None else np.vstack([poly, np.atleast_2d(sample)])
    vp = svg_viewport(everything)
    lines = _svg_open(vp)
    if sample is not None:
        for x, y in _to_canvas(sample, vp):
            lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2" fill="#555"/>')
    canvas = _to_canvas(poly, vp)
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in canvas)
    lines.append(f'<polygon id="region" points="{coords}" fill="#3b7dd8" fill-opacity="0.35" stroke="#1d4f91"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def mask_svg(points: np.ndarray, mask: np.ndarray, sample: np.ndarray | None = None) -> str:
    """Member cells of a 2-D lattice mask as small squares."""
    pts = np.atleast_2d(points)
    if pts.shape[1] != 2:
        raise ValueError("mask plots need 2-D points")
    everything = pts if sample is None else np.vstack([pts, np.atleast_2d(sample)])
    vp = svg_viewport(everything)
    xs = np.unique(pts[:, 0])
    cell = vp["scale"] * (float(np.min(np.diff(xs))) if xs.size > 1 else 1.0)
    lines = _svg_open(vp)
    for x, y in _to_canvas(pts[np.asarray(mask, dtype=bool)], vp):
        lines.append(f'<rect x="{_fmt(x - cell / 2)}" y="{_fmt(y - cell / 2)}" width="{_fmt(cell)}" '
                     f'height="{_fmt(cell)}" fill="#3b7dd8" fill-opacity="0.5"/>')
    if sample is not None:
        for x, y in _to_canvas(sample, vp):
            lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="1.5" fill="#555"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
