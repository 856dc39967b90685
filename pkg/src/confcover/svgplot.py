"""Minimal self-contained SVG writers for disk plots and cost curves.

Numbers are printed with fixed precision so repeated runs give identical
bytes.
"""

from __future__ import annotations

import numpy as np

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]

SIZE = 520
MARGIN = 20


class SVG:
    def __init__(self, width: int = SIZE, height: int = SIZE):
        self.width, self.height = width, height
        self.items: list[str] = []

    def add(self, s: str) -> None:
        self.items.append(s)

    def text(self, x, y, s, size=12, anchor="start") -> None:
        s = s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self.add(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{s}</text>')

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>\n'
        )
        return head + "\n".join(self.items) + "\n</svg>\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def _disk_xy(p):
    """Disk coordinates in [-1, 1]^2 to pixels (y up)."""
    p = np.asarray(p, dtype=float)
    half = 0.5 * SIZE - MARGIN
    return np.column_stack([0.5 * SIZE + half * p[:, 0], 0.5 * SIZE - half * p[:, 1]])


def _mesh_edges(svg: SVG, coords, faces, opacity: float = 0.25) -> None:
    xy = _disk_xy(coords)
    e = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    e = np.unique(e, axis=0)
    d = " ".join(
        f"M{xy[a, 0]:.2f} {xy[a, 1]:.2f}L{xy[b, 0]:.2f} {xy[b, 1]:.2f}" for a, b in e
    )
    svg.add(f'<path d="{d}" stroke="black" stroke-width="0.5" fill="none" opacity="{opacity}"/>')


def _star(cx, cy, r=8.0) -> str:
    pts = []
    for k in range(10):
        rad = r if k % 2 == 0 else 0.4 * r
        a = -np.pi / 2 + k * np.pi / 5
        pts.append(f"{cx + rad * np.cos(a):.2f},{cy + rad * np.sin(a):.2f}")
    return " ".join(pts)


def disk_mesh_svg(coords, faces, path, title: str = "disk embedding") -> None:
    svg = SVG()
    _mesh_edges(svg, coords, faces)
    svg.text(MARGIN, 14, title)
    svg.save(path)


def partition_svg(coords, faces, sample_points, labels, sites, path, previous=None, max_dots: int = 6000) -> None:
    """Triangulation, per-sample cell colours, sites as stars, previous sites as hollow circles."""
    svg = SVG()
    _mesh_edges(svg, coords, faces)
    step = max(1, int(np.ceil(len(sample_points) / max_dots)))
    xy = _disk_xy(np.asarray(sample_points)[::step])
    lab = np.asarray(labels)[::step]
    for k in np.unique(lab):
        col = PALETTE[int(k) % len(PALETTE)]
        dots = "".join(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1.2"/>' for x, y in xy[lab == k])
        svg.add(f'<g fill="{col}" opacity="0.6">{dots}</g>')
    if previous is not None:
        for x, y in _disk_xy(previous):
            svg.add(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="6" fill="none" stroke="black" stroke-width="1.5"/>')
    for i, (x, y) in enumerate(_disk_xy(sites)):
        col = PALETTE[i % len(PALETTE)]
        svg.add(f'<polygon points="{_star(x, y)}" fill="{col}" stroke="black" stroke-width="1"/>')
    svg.text(MARGIN, 14, "stars: agents; circles: previous positions")
    svg.save(path)


def cost_curve_svg(H, path, width: int = 560, height: int = 360) -> None:
    """Coverage cost against iteration."""
    H = np.asarray(H, dtype=float)
    svg = SVG(width, height)
    left, right, top, bottom = 70, 20, 30, 50
    x0, x1 = left, width - right
    y0, y1 = height - bottom, top
    n = max(len(H) - 1, 1)
    lo, hi = float(H.min()), float(H.max())
    if hi - lo <= 0:
        hi = lo + 1.0
    xs = x0 + (x1 - x0) * np.arange(len(H)) / n
    ys = y0 + (y1 - y0) * (H - lo) / (hi - lo)
    svg.add(f'<path d="M{x0} {y0}H{x1}M{x0} {y0}V{y1}" stroke="black" fill="none"/>')
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    svg.add(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>')
    svg.text(x0, y0 + 20, "0", anchor="middle")
    svg.text(x1, y0 + 20, str(len(H) - 1), anchor="middle")
    svg.text(x0 - 6, y0, f"{lo:.4g}", anchor="end")
    svg.text(x0 - 6, y1 + 4, f"{hi:.4g}", anchor="end")
    svg.text(0.5 * (x0 + x1), height - 12, "iteration", anchor="middle")
    svg.text(x0, 18, "coverage cost H")
    svg.save(path)


def _heat_colour(t: float) -> str:
    # dark blue -> yellow
    a = np.array([0x20, 0x10, 0x60])
    b = np.array([0xff, 0xe0, 0x30])
    c = (a + (b - a) * float(np.clip(t, 0.0, 1.0))).round().astype(int)
    return "#%02x%02x%02x" % tuple(c)


def heat_svg(coords, faces, vertex_values, path, title: str = "deformation metric") -> None:
    """Faces filled by the mean of their vertex values, normalised to [0, 1]."""
    svg = SVG()
    v = np.asarray(vertex_values, dtype=float)[faces].mean(axis=1)
    top = v.max()
    t = v / top if top > 0 else np.zeros_like(v)
    xy = _disk_xy(coords)
    for f, tf in zip(faces, t):
        p = " ".join(f"{xy[i, 0]:.2f},{xy[i, 1]:.2f}" for i in f)
        col = _heat_colour(tf)
        svg.add(f'<polygon points="{p}" fill="{col}" stroke="{col}" stroke-width="0.3"/>')
    _mesh_edges(svg, coords, faces)
    svg.text(MARGIN, 14, title)
    svg.save(path)
