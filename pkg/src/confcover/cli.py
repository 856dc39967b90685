"""Command-line front end: ``confcover {check,param,cover,deform}``.

Exit codes: 0 success, 1 invalid input (mesh, config, paths), 2 numerical
failure (flipped faces, singular or ill-conditioned solves).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import coverage as cv
from . import svgplot
from .beltrami import BeltramiError
from .deformation import ConnectivityMismatch, density_from_deformation, disk_difference
from .diskmap import DiskMapError, DiskMapOptions, build_disk_map
from .harmonic import HarmonicSolveError
from .mesh_core import MeshError, load_mesh, read_mesh_arrays, validation_report

logger = logging.getLogger("confcover")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

GENERATOR = "numpy PCG64"


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# -- configuration ---------------------------------------------------------------

CONFIG_KEYS = {
    "mesh", "mesh_before", "n_agents", "seed", "gains", "dt", "max_iters", "tol",
    "order", "density", "out", "correction", "law", "initial_positions", "pin_rings",
}
DENSITY_KEYS = {"mode", "floor", "scale"}


@dataclass
class RunConfig:
    """Validated coverage run settings.

    In deformation mode ``mesh`` is the deformed (current) surface and
    ``mesh_before`` its reference state; agents are deployed on ``mesh``.
    """

    mesh: str
    out: str
    n_agents: int = 6
    seed: int = 0
    gains: list = field(default_factory=lambda: [1.0])
    dt: float = 1.0
    max_iters: int = 200
    tol: float = 1e-3
    order: int = 1
    density_mode: str = "uniform"
    floor: float = 0.1
    scale: float = 1.0
    mesh_before: str | None = None
    correction: bool = True
    law: str = "disk"
    initial_positions: list | None = None
    pin_rings: int = 4

    def gain_vector(self) -> np.ndarray:
        g = np.asarray(self.gains, dtype=float)
        return np.broadcast_to(g, (self.n_agents,)).copy() if g.size == 1 else g

    def as_dict(self) -> dict:
        return {
            "mesh": self.mesh, "mesh_before": self.mesh_before, "out": self.out,
            "n_agents": self.n_agents, "seed": self.seed, "gains": list(self.gains),
            "dt": self.dt, "max_iters": self.max_iters, "tol": self.tol, "order": self.order,
            "density": {"mode": self.density_mode, "floor": self.floor, "scale": self.scale},
            "correction": self.correction, "law": self.law,
            "initial_positions": self.initial_positions, "pin_rings": self.pin_rings,
        }


def _typed(d, key, kind, default):
    if key not in d:
        return default
    v = d[key]
    if kind is float and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if (kind is int and isinstance(v, bool)) or not isinstance(v, kind):
        raise ConfigError(f"config key '{key}' must be {kind.__name__}")
    return v


def parse_config(doc: dict, base_dir: str = ".") -> RunConfig:
    """Strict config parsing: unknown keys and wrong types are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("mesh", "out"):
        if key not in doc:
            raise ConfigError(f"missing config key '{key}'")

    def path(p):
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    dens = doc.get("density", {"mode": "uniform"})
    if not isinstance(dens, dict):
        raise ConfigError("config key 'density' must be an object")
    bad = sorted(set(dens) - DENSITY_KEYS)
    if bad:
        raise ConfigError(f"unknown density keys: {', '.join(bad)}")
    mode = _typed(dens, "mode", str, "uniform")
    if mode not in ("uniform", "deformation"):
        raise ConfigError("density mode must be 'uniform' or 'deformation'")

    gains = doc.get("gains", 1.0)
    if isinstance(gains, bool) or not isinstance(gains, (int, float, list)):
        raise ConfigError("config key 'gains' must be a number or a list")
    gains = [float(g) for g in gains] if isinstance(gains, list) else [float(gains)]

    cfg = RunConfig(
        mesh=path(_typed(doc, "mesh", str, None)),
        out=path(_typed(doc, "out", str, None)),
        n_agents=_typed(doc, "n_agents", int, 6),
        seed=_typed(doc, "seed", int, 0),
        gains=gains,
        dt=_typed(doc, "dt", float, 1.0),
        max_iters=_typed(doc, "max_iters", int, 200),
        tol=_typed(doc, "tol", float, 1e-3),
        order=_typed(doc, "order", int, 1),
        density_mode=mode,
        floor=_typed(dens, "floor", float, 0.1),
        scale=_typed(dens, "scale", float, 1.0),
        mesh_before=path(doc["mesh_before"]) if _typed(doc, "mesh_before", str, None) else None,
        correction=_typed(doc, "correction", bool, True),
        law=_typed(doc, "law", str, "disk"),
        initial_positions=doc.get("initial_positions"),
        pin_rings=_typed(doc, "pin_rings", int, 4),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.n_agents < 1:
        raise ConfigError("n_agents must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    g = np.asarray(cfg.gains, dtype=float)
    if g.size not in (1, cfg.n_agents):
        raise ConfigError("gains must be a scalar or one value per agent")
    if np.any(g <= 0):
        raise ConfigError("gains must be positive")
    if cfg.dt <= 0 or cfg.dt * g.max() > 1.0:
        raise ConfigError("dt * max(gains) must lie in (0, 1]")
    if cfg.tol <= 0:
        raise ConfigError("tol must be positive")
    if cfg.max_iters < 0 or cfg.order < 0 or cfg.pin_rings < 0:
        raise ConfigError("max_iters, order and pin_rings must be >= 0")
    if cfg.law not in ("disk", "surface"):
        raise ConfigError("law must be 'disk' or 'surface'")
    if cfg.density_mode == "deformation":
        if cfg.mesh_before is None:
            raise ConfigError("deformation density needs 'mesh_before'")
        if cfg.floor < 0 or cfg.scale <= 0:
            raise ConfigError("density floor must be >= 0 and scale > 0")
    for p in (cfg.mesh, cfg.mesh_before):
        if p is not None and not os.path.isfile(p):
            raise ConfigError(f"mesh file not found: {p}")
    if cfg.initial_positions is not None:
        pts = np.asarray(cfg.initial_positions, dtype=float)
        if pts.shape != (cfg.n_agents, 2):
            raise ConfigError("initial_positions must list n_agents disk points [x, y]")


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc, os.path.dirname(os.path.abspath(path)))


# -- output helpers -----------------------------------------------------------------


class Outputs:
    """Tracks written files so the manifest lists exactly what exists."""

    def __init__(self, out_dir: str):
        self.dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.dir, name)

    def write_manifest(self, command: str, seed, extra: dict | None = None) -> None:
        doc = {
            "command": command,
            "seed": seed,
            "generator": GENERATOR,
            "files": sorted(self.files),
        }
        if extra:
            doc.update(extra)
        with open(os.path.join(self.dir, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _build(mesh, correction=True, pin_rings=4):
    try:
        return build_disk_map(mesh, DiskMapOptions(correction=correction, pin_rings=pin_rings))
    except (DiskMapError, HarmonicSolveError, BeltramiError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(str(exc)) from exc


# -- commands -------------------------------------------------------------------------


def cmd_check(args) -> int:
    try:
        v, f = read_mesh_arrays(args.mesh)
    except MeshError as exc:
        print(f"parse: FAIL {exc}")
        return EXIT_INPUT
    ok = True
    for name, status, detail in validation_report(v, f):
        if status is None:
            print(f"{name}: SKIPPED")
        elif status:
            print(f"{name}: {detail}")
        else:
            ok = False
            print(f"{name}: FAIL {detail}")
    return EXIT_OK if ok else EXIT_INPUT


def cmd_param(args) -> int:
    mesh = load_mesh(args.mesh)
    dmap = _build(mesh, correction=not args.no_correction)
    out = Outputs(args.out)
    dmap.write(out.path("disk.csv"), out.path("diagnostics.json"))
    svgplot.disk_mesh_svg(dmap.coords, mesh.faces, out.path("disk.svg"))
    out.write_manifest("param", None, {"correction": not args.no_correction})
    diag = dmap.diagnostics()
    print(
        "mean|mu| %.6g -> %.6g, flipped faces %d"
        % (diag["mean_abs_mu_before"], diag["mean_abs_mu_after"], diag["flipped_faces"])
    )
    return EXIT_OK


def cmd_cover(args) -> int:
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg.seed = args.seed_override
        validate_config(cfg)
    mesh = load_mesh(cfg.mesh)
    dmap = _build(mesh, cfg.correction, cfg.pin_rings)
    out = Outputs(cfg.out)
    if cfg.density_mode == "deformation":
        before = load_mesh(cfg.mesh_before)
        metric = disk_difference(_build(before, cfg.correction, cfg.pin_rings), dmap)
        density = density_from_deformation(metric, cfg.floor, cfg.scale)
        metric.write_csv(out.path("metric.csv"))
        density.write_csv(out.path("density.csv"))
    else:
        density = cv.DensityField.uniform(mesh.n_vertices)

    gains = cfg.gain_vector()
    if cfg.initial_positions is not None:
        fleet = cv.AgentFleet.from_disk(dmap, cfg.initial_positions, gains)
    else:
        fleet = cv.AgentFleet.random(dmap, cfg.n_agents, cfg.seed, gains)
    trace = cv.lloyd_run(
        dmap, fleet, density,
        cv.LloydConfig(dt=cfg.dt, max_iters=cfg.max_iters, tol=cfg.tol, order=cfg.order, law=cfg.law),
    )
    samples = trace.samples
    labels = cv.pullback_partition(dmap, trace.partition, samples)

    trace.write_csv(out.path("trace.csv"))
    trace.write_positions(out.path("positions.json"))
    cv.write_partition_csv(labels, out.path("partition.csv"))
    disk_paths = np.stack([r.disk for r in trace.records], axis=1)  # (agents, iters, 2)
    cv.write_paths_json([cv.pullback_path(dmap, p) for p in disk_paths], out.path("paths.json"))
    prev = trace.records[-2].disk if len(trace.records) > 1 else None
    svgplot.partition_svg(
        dmap.coords, mesh.faces, samples.points, trace.partition.labels,
        trace.final.disk, out.path("partition.svg"), previous=prev,
    )
    svgplot.cost_curve_svg(trace.H, out.path("cost.svg"))
    out.write_manifest(
        "cover", cfg.seed,
        {"config": cfg.as_dict(), "converged": trace.converged, "iterations": len(trace.records) - 1},
    )
    print(
        "%s after %d iterations, H = %.6g, max centroid distance %.3g"
        % ("converged" if trace.converged else "stopped", len(trace.records) - 1, trace.final.H,
           trace.final.max_centroid_dist)
    )
    return EXIT_OK


def cmd_deform(args) -> int:
    before, after = load_mesh(args.mesh[0]), load_mesh(args.mesh[1])
    if before.n_vertices != after.n_vertices or not np.array_equal(before.faces, after.faces):
        raise ConnectivityMismatch("before and after meshes have different connectivity")
    d0 = _build(before, not args.no_correction)
    d1 = _build(after, not args.no_correction)
    metric = disk_difference(d0, d1)
    out = Outputs(args.out)
    metric.write_csv(out.path("metric.csv"))
    try:
        density = density_from_deformation(metric, args.floor, args.scale)
    except ValueError as exc:
        if "degenerate density" not in str(exc):
            raise
        logger.warning("degenerate density: zero metric and zero floor; no density written")
        density = None
    if density is not None:
        density.write_csv(out.path("density.csv"))
    svgplot.heat_svg(d0.coords, before.faces, metric.values, out.path("metric.svg"))
    am = metric.argmax()
    out.write_manifest(
        "deform", None,
        {"argmax_vertex": am, "max_displacement": float(metric.values[am]),
         "floor": args.floor, "scale": args.scale},
    )
    print(f"argmax vertex {am} displacement {metric.values[am]:.6g}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="confcover", description="Conformal disk maps of surface meshes and multi-agent coverage on the disk.")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="validate a mesh and list each invariant")
    c.add_argument("--mesh", required=True)
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("param", help="build the disk map of a mesh")
    c.add_argument("--mesh", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--no-correction", action="store_true", help="stop at the harmonic map")
    c.set_defaults(func=cmd_param)

    c = sub.add_parser("cover", help="run Lloyd coverage from a JSON config")
    c.add_argument("--config", required=True)
    c.add_argument("--seed-override", type=int, default=None)
    c.set_defaults(func=cmd_cover)

    c = sub.add_parser("deform", help="difference the disk maps of two mesh states")
    c.add_argument("--mesh", nargs=2, required=True, metavar=("BEFORE", "AFTER"))
    c.add_argument("--out", required=True)
    c.add_argument("--floor", type=float, default=0.1)
    c.add_argument("--scale", type=float, default=1.0)
    c.add_argument("--no-correction", action="store_true")
    c.set_defaults(func=cmd_deform)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MeshError, ConfigError, ConnectivityMismatch, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
