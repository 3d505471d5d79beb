"""Command-line front end: ``emeflow <command> --config run.yaml``.

Commands write CSV tables with dimensionless positions (x/d, y/L_T) and a
JSON sidecar; every artifact carries the effective configuration and a
format version.  Numbers are written with 12 significant digits so equal
inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import COMMANDS, ConfigError, RunConfig, load_config, serialize_config
from .ensemble import (
    chi_square,
    order_suppression,
    rayleigh_distance,
    reference_bin_probabilities,
    simulate,
    tv_distance,
)
from .flowline import trajectory_bundle
from .poynting import PhysicalConstants, field_map
from .spectrum import DomainError
from .validate import run_validation
from .wavefield import evaluate_batch, min_nodes_for

CSV_FORMAT = "emeflow-csv/1"
JSON_FORMAT = "emeflow-json/1"

log = logging.getLogger("emeflow")


def _g(v) -> str:
    return format(float(v), ".12g")


class _Outputs:
    """Tracks written files so a failed run leaves nothing behind."""

    def __init__(self, directory: Path):
        self.dir = directory
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.files.append(p)
        return p

    def cleanup(self):
        for p in self.files:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _header(cfg_echo: dict, meta: dict) -> str:
    lines = [f"# format: {CSV_FORMAT}"]
    lines.append("# config: " + json.dumps(cfg_echo, sort_keys=True))
    lines.append("# meta: " + json.dumps(meta, sort_keys=True))
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, echo: dict, meta: dict, columns, rows):
    buf = io.StringIO()
    buf.write(_header(echo, meta))
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(r if isinstance(r, str) else _g(r) for r in row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, echo: dict, payload: dict):
    doc = {"format": JSON_FORMAT, "config": echo}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _scales(cfg: RunConfig) -> dict:
    g = cfg.grating
    return {
        "period_m": g.period,
        "talbot_distance_m": g.talbot_distance,
        "wavelength_m": g.wavelength,
        "x_unit": "d",
        "y_unit": "L_T",
    }


def effective_quadrature(cfg: RunConfig, y_max_lt: float):
    """Quadrature with num_nodes raised to the chirp sampling bound when allowed."""
    g = cfg.grating
    quad = cfg.quadrature
    K = quad.resolved_kx_max(g)
    need = min_nodes_for(g, K, y_max_lt * g.talbot_distance)
    meta = {"kx_max_per_m": K, "kx_max_over_k": K / g.wavenumber, "num_nodes_requested": quad.num_nodes,
            "num_nodes_required": need}
    if need > quad.num_nodes and cfg.auto_raise_nodes:
        quad = replace(quad, num_nodes=int(need + (need % 2)))
    meta["num_nodes_effective"] = quad.num_nodes
    return quad, meta


def _grid(block, g):
    xs = np.linspace(block.x_min_d, block.x_max_d, block.nx)
    ys = np.linspace(block.y_min_lt, block.y_max_lt, block.ny)
    return xs, ys


def cmd_carpet(cfg: RunConfig, out: _Outputs, echo: dict):
    g = cfg.grating
    block = cfg.carpet
    quad, meta = effective_quadrature(cfg, block.y_max_lt)
    xs, ys = _grid(block, g)
    X, Y = np.meshgrid(xs, ys)
    psi = evaluate_batch(g, quad, X * g.period, Y * g.talbot_distance).psi
    if block.quantity == "intensity":
        val = np.abs(psi) ** 2
    elif block.quantity == "real":
        val = psi.real
    else:
        val = psi.imag
    meta.update(_scales(cfg), quantity=block.quantity, value_unit="1/m" if block.quantity == "intensity" else "1/sqrt(m)")
    rows = zip(X.ravel(), Y.ravel(), val.ravel())
    _write_csv(out.path("carpet.csv"), echo, meta, ("x", "y", "value"), rows)


def cmd_field(cfg: RunConfig, out: _Outputs, echo: dict):
    g = cfg.grating
    block = cfg.field
    quad, meta = effective_quadrature(cfg, block.y_max_lt)
    xs, ys = _grid(block, g)
    X, Y = np.meshgrid(xs, ys)
    sx, sy, sz, ue, up = field_map(g, quad, cfg.polarization, X * g.period, Y * g.talbot_distance)
    c = PhysicalConstants()
    fs, es = c.flux_scale(), c.energy_scale()
    meta.update(_scales(cfg), flux_unit="W/m^2 per unit |psi|^2 (psi in m^-1/2)",
                energy_unit="J/m^3 per unit |psi|^2")
    rows = zip(X.ravel(), Y.ravel(), (sx * fs).ravel(), (sy * fs).ravel(), (sz * fs).ravel(),
               (ue * es).ravel(), (up * es).ravel())
    _write_csv(out.path("field.csv"), echo, meta, ("x", "y", "Sx", "Sy", "Sz", "U_exact", "U_paraxial"), rows)


def _launch_points(cfg: RunConfig) -> np.ndarray:
    g = cfg.grating
    if cfg.flowlines.launch_x_d:
        return np.asarray(cfg.flowlines.launch_x_d) * g.period
    n = cfg.flowlines.launches_per_slit
    frac = (np.arange(n) + 0.5) / n
    return np.concatenate([a + frac * g.slit_width for a, _ in g.slit_edges()])


def cmd_flowlines(cfg: RunConfig, out: _Outputs, echo: dict):
    g = cfg.grating
    quad, meta = effective_quadrature(cfg, cfg.integrator.y_target)
    launches = _launch_points(cfg)
    trajs = trajectory_bundle(g, quad, cfg.polarization, cfg.integrator, launches, threads=cfg.threads)
    meta.update(_scales(cfg))

    def rows():
        for i, t in enumerate(trajs):
            for x, y in t.points:
                yield (str(i), x / g.period, y / g.talbot_distance)

    _write_csv(out.path("flowlines.csv"), echo, meta, ("traj_id", "x", "y"), rows())
    _write_json(out.path("flowlines.json"), echo, {
        "meta": meta,
        "trajectories": [
            {
                "traj_id": i,
                "x0": t.start[0] / g.period,
                "termination": t.termination.value,
                "points": int(len(t.points)),
                "x_end": t.points[-1][0] / g.period,
                "y_end": t.points[-1][1] / g.talbot_distance,
            }
            for i, t in enumerate(trajs)
        ],
    })


def cmd_histogram(cfg: RunConfig, out: _Outputs, echo: dict):
    g = cfg.grating
    h = cfg.histogram
    integ = replace(cfg.integrator, y_target=h.y_observation_lt)
    quad, meta = effective_quadrature(cfg, h.y_observation_lt)
    n_max = max(h.num_photons)
    t0 = time.perf_counter()
    run = simulate(g, quad, cfg.polarization, integ, n_max, cfg.seed, threads=cfg.threads)
    log.info("traced %d photons in %.1f s", n_max, time.perf_counter() - t0)
    y_ob = h.y_observation_lt * g.talbot_distance
    width = h.bin_width_d * g.period
    half = h.window_half_width_d * g.period
    meta.update(_scales(cfg), rayleigh_distance_lt=rayleigh_distance(g) / g.talbot_distance)
    probs = None
    for n in sorted(set(h.num_photons)):
        hist = run.histogram(width, half, n)
        if probs is None:
            probs = reference_bin_probabilities(g, quad, y_ob, hist.bin_edges)
            # bin-averaged |psi|^2 per unit x/d, normalized over the binned window
            dens = probs / h.bin_width_d
        tv = tv_distance(hist.counts, probs) if hist.counts.sum() else 1.0
        stem = f"histogram_n{n}"
        rows = zip(hist.bin_centers / g.period, (str(int(c)) for c in hist.counts), dens)
        _write_csv(out.path(stem + ".csv"), echo, dict(meta, n=n), ("bin_center", "count", "reference_density"), rows)
        _write_json(out.path(stem + ".json"), echo, {
            "seed": cfg.seed,
            "n": n,
            "y_ob": h.y_observation_lt,
            "tv_distance": tv,
            "chi_square": chi_square(hist.counts, probs),
            "terminated_elsewhere": hist.terminated_elsewhere,
            "status_counts": {k: int(v) for k, v in _status_counts(run.status[:n]).items()},
            "suppressed_order_ratio": order_suppression(run.end_x[:n], run.status[:n], g, y_ob),
            "meta": meta,
        })


def _status_counts(status):
    from .flowline import _STATUS

    return {t.value: int(np.sum(status == code)) for code, t in _STATUS.items()}


def cmd_validate(cfg: RunConfig, out: _Outputs, echo: dict) -> bool:
    results = run_validation(cfg.grating, cfg.quadrature, cfg.polarization)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {_g(r.value)} ({r.threshold})")
    ok = all(r.passed for r in results)
    _write_json(out.path("validate.json"), echo, {
        "passed": ok,
        "checks": [r.to_dict() for r in results],
    })
    return ok


_COMMANDS = {
    "carpet": cmd_carpet,
    "field": cmd_field,
    "flowlines": cmd_flowlines,
    "histogram": cmd_histogram,
    "validate": cmd_validate,
}


def run_command(cfg: RunConfig, command: str) -> int:
    """Execute ``command``; returns the process exit status."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = _Outputs(out_dir)
    echo = cfg.to_dict()
    # the thread count changes wall time only, so artifacts do not record it
    echo.pop("threads")
    try:
        result = _COMMANDS[command](cfg, outputs, echo)
    except BaseException:
        outputs.cleanup()
        raise
    if result is False:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emeflow", description="Energy flow lines behind an N-slit grating.")
    p.add_argument("command", choices=COMMANDS, help="what to compute")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (wall time only)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.command)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["output_dir"] = args.out
        if args.threads is not None:
            over["threads"] = args.threads
        if over:
            from .config import parse_config

            cfg = parse_config(serialize_config(replace(cfg, **over)), args.command)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return 1
    try:
        return run_command(cfg, args.command)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
