"""Run configuration: YAML text <-> validated :class:`RunConfig`.

Every section is optional except ``grating``.  Unknown sections or keys are
errors, and all problems found in one file are reported together.
"""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Optional

import yaml

from .flowline import IntegratorConfig
from .poynting import Polarization
from .spectrum import GratingSpec
from .wavefield import SCHEMES, QuadratureConfig

FORMAT_VERSION = "emeflow-config/1"


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads YAML 1.2 floats such as ``1e6`` and ``1.0e6``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)
COMMANDS = ("carpet", "field", "flowlines", "histogram", "validate")


class ConfigError(ValueError):
    """Aggregated configuration problems; ``errors`` lists one message per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass(frozen=True)
class GridBlock:
    """Rectangular grid in units of d (x) and L_T (y)."""

    x_min_d: float = -3.0
    x_max_d: float = 3.0
    nx: int = 241
    y_min_lt: float = 0.0
    y_max_lt: float = 2.0
    ny: int = 201
    quantity: str = "intensity"


@dataclass(frozen=True)
class FlowlineBlock:
    launches_per_slit: int = 20
    launch_x_d: Optional[tuple] = None


@dataclass(frozen=True)
class HistogramBlock:
    num_photons: tuple = (100, 1000, 2000, 5000)
    y_observation_lt: float = 4.3
    bin_width_d: float = 0.9
    window_half_width_d: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    grating: GratingSpec
    polarization: Polarization = Polarization()
    quadrature: QuadratureConfig = QuadratureConfig()
    auto_raise_nodes: bool = True
    integrator: IntegratorConfig = IntegratorConfig()
    carpet: GridBlock = GridBlock()
    field: GridBlock = GridBlock(nx=121, ny=101, y_min_lt=0.05, y_max_lt=1.0)
    flowlines: FlowlineBlock = FlowlineBlock()
    histogram: HistogramBlock = HistogramBlock()
    seed: int = 0
    output_dir: str = "out"
    threads: int = 1

    def to_dict(self) -> dict:
        return _to_plain(self)


# section name -> (key -> (expected python types, RunConfig attribute name or None))
_NUM = (int, float)
_SCHEMA = {
    "grating": {
        "num_slits": (int,),
        "period_m": _NUM,
        "slit_width_m": _NUM,
        "wavelength_m": _NUM,
    },
    "polarization": {"amp_h": _NUM, "amp_e": _NUM, "phase": _NUM},
    "quadrature": {
        "num_nodes": (int,),
        "kx_max_per_m": _NUM + (type(None),),
        "kx_max_over_k": _NUM + (type(None),),
        "scheme": (str,),
        "tail": (bool,),
        "auto_raise_nodes": (bool,),
    },
    "integrator": {
        "rel_tol": _NUM,
        "abs_tol": _NUM,
        "max_step": _NUM,
        "stagnation_u_floor": _NUM,
        "y_target": _NUM,
        "y_launch": _NUM,
        "x_window": _NUM + (type(None),),
        "max_steps": (int,),
    },
    "carpet": {f.name: None for f in fields(GridBlock)},
    "field": {f.name: None for f in fields(GridBlock)},
    "flowlines": {"launches_per_slit": (int,), "launch_x_d": (list, type(None))},
    "histogram": {
        "num_photons": (int, list),
        "y_observation_lt": _NUM,
        "bin_width_d": _NUM,
        "window_half_width_d": _NUM,
    },
}
_TOP = ("seed", "output_dir", "threads")
_GRID_TYPES = {"nx": (int,), "ny": (int,), "quantity": (str,)}


def _expected(section, key):
    types = _SCHEMA[section][key]
    if types is None:
        types = _GRID_TYPES.get(key, _NUM)
    return types


def _type_ok(value, types) -> bool:
    if isinstance(value, bool) and bool not in types:
        return False
    return isinstance(value, types)


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Parse and validate YAML configuration text.

    ``command`` enables command-specific checks (linear polarization for
    flow-line commands).
    """
    errors: list[str] = []
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError([f"not valid YAML: {exc}"]) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a mapping of sections"])

    for key in data:
        if key not in _SCHEMA and key not in _TOP:
            errors.append(f"unknown section or key '{key}'")
    sections: dict[str, dict] = {}
    for name in _SCHEMA:
        raw = data.get(name, {})
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            errors.append(f"section '{name}' must be a mapping")
            raw = {}
        clean = {}
        for key, value in raw.items():
            if key not in _SCHEMA[name]:
                errors.append(f"unknown key '{name}.{key}'")
                continue
            types = _expected(name, key)
            if not _type_ok(value, types):
                errors.append(
                    f"'{name}.{key}' has the wrong type ({type(value).__name__}: {value!r})"
                )
                continue
            clean[key] = value
        sections[name] = clean

    if "grating" not in data:
        errors.append("missing required section 'grating'")
    g = sections["grating"]
    for key in _SCHEMA["grating"]:
        if "grating" in data and key not in g and not any(key in e for e in errors):
            errors.append(f"missing required key 'grating.{key}'")

    grating = None
    if all(key in g for key in _SCHEMA["grating"]):
        probe = object.__new__(GratingSpec)
        for attr, key in (
            ("num_slits", "num_slits"),
            ("period", "period_m"),
            ("slit_width", "slit_width_m"),
            ("wavelength", "wavelength_m"),
        ):
            object.__setattr__(probe, attr, g[key])
        problems = probe.problems()
        for p in problems:
            if "must not exceed" in p:
                errors.append(
                    f"grating.slit_width_m ({g['slit_width_m']}) exceeds grating.period_m ({g['period_m']})"
                )
            else:
                errors.append("grating: " + p.replace("period", "period_m", 1)
                              if p.startswith("period") else "grating: " + p)
        if not problems:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                grating = GratingSpec.from_dict(g)

    pol = _build(Polarization, sections["polarization"], "polarization", errors)

    q = dict(sections["quadrature"])
    auto_raise = q.pop("auto_raise_nodes", True)
    if q.get("kx_max_per_m") is not None and q.get("kx_max_over_k") is not None:
        errors.append("give at most one of 'quadrature.kx_max_per_m' and 'quadrature.kx_max_over_k'")
    kx_per_m = q.pop("kx_max_per_m", None)
    kx_over_k = q.pop("kx_max_over_k", None)
    if kx_over_k is not None:
        if grating is not None:
            kx_per_m = kx_over_k * grating.wavenumber
        if not 0 < kx_over_k < 1:
            errors.append(f"'quadrature.kx_max_over_k' must lie in (0, 1), got {kx_over_k}")
    q["kx_max"] = kx_per_m
    quad = _build(QuadratureConfig, q, "quadrature", errors)
    if quad is not None and grating is not None:
        for p in quad.problems(grating):
            errors.append("quadrature: " + p)

    integ = _build(IntegratorConfig, sections["integrator"], "integrator", errors)

    carpet = _grid(sections["carpet"], "carpet", RunConfig.carpet, errors)
    fieldb = _grid(sections["field"], "field", RunConfig.field, errors)

    fl = dict(sections["flowlines"])
    if "launch_x_d" in fl and fl["launch_x_d"] is not None:
        if not all(_type_ok(v, _NUM) for v in fl["launch_x_d"]):
            errors.append("'flowlines.launch_x_d' must be a list of numbers")
        fl["launch_x_d"] = tuple(float(v) for v in fl["launch_x_d"] if _type_ok(v, _NUM))
    if fl.get("launches_per_slit", 1) < 1:
        errors.append("'flowlines.launches_per_slit' must be at least 1")
    flow = FlowlineBlock(**fl)
    if grating is not None and flow.launch_x_d:
        xs = [v * grating.period for v in flow.launch_x_d]
        outside = [v for v, x in zip(flow.launch_x_d, xs) if not grating.inside(x)]
        if outside:
            errors.append(f"'flowlines.launch_x_d' entries {outside} lie outside every slit")

    h = dict(sections["histogram"])
    if "num_photons" in h:
        n = h["num_photons"]
        n = [n] if isinstance(n, int) else n
        if not n or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in n):
            errors.append("'histogram.num_photons' must be a positive integer or a list of them")
            n = [1]
        h["num_photons"] = tuple(n)
    for key in ("y_observation_lt", "bin_width_d", "window_half_width_d"):
        if key in h and not h[key] > 0:
            errors.append(f"'histogram.{key}' must be positive")
    hist = HistogramBlock(**h)
    if hist.bin_width_d > 2 * hist.window_half_width_d:
        errors.append("'histogram.bin_width_d' is wider than the whole window")

    seed = data.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        errors.append(f"'seed' must be an unsigned 64-bit integer, got {seed!r}")
    out_dir = data.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        errors.append("'output_dir' must be a nonempty string")
    threads = data.get("threads", 1)
    if not (isinstance(threads, int) and not isinstance(threads, bool) and threads >= 1):
        errors.append(f"'threads' must be a positive integer, got {threads!r}")

    if pol is not None and command in ("flowlines", "histogram") and not pol.is_linear():
        errors.append(
            f"command '{command}' needs linear polarization (phase 0 or pi, or one of amp_h, amp_e "
            f"zero): flow lines are not planar for phase {pol.phase}"
        )
    if command is not None and command not in COMMANDS:
        errors.append(f"unknown command '{command}'")

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        grating=grating,
        polarization=pol,
        quadrature=quad,
        auto_raise_nodes=auto_raise,
        integrator=integ,
        carpet=carpet,
        field=fieldb,
        flowlines=flow,
        histogram=hist,
        seed=seed,
        output_dir=out_dir,
        threads=threads,
    )


def _build(cls, values: dict, section: str, errors: list):
    probe = object.__new__(cls)
    defaults = cls()
    for f in fields(cls):
        object.__setattr__(probe, f.name, values.get(f.name, getattr(defaults, f.name)))
    problems = probe.problems()
    if problems:
        errors.extend(f"{section}: {p}" for p in problems)
        return None
    return cls(**{f.name: getattr(probe, f.name) for f in fields(cls)})


def _grid(values: dict, section: str, default: GridBlock, errors: list) -> GridBlock:
    g = replace(default, **values)
    if g.nx < 1 or g.ny < 1:
        errors.append(f"'{section}.nx' and '{section}.ny' must be positive")
    if g.x_max_d < g.x_min_d or g.y_max_lt < g.y_min_lt:
        errors.append(f"'{section}' grid bounds are reversed")
    if g.y_min_lt < 0:
        errors.append(f"'{section}.y_min_lt' must be nonnegative (propagation is forward only)")
    if g.quantity not in ("intensity", "real", "imag"):
        errors.append(f"'{section}.quantity' must be intensity, real or imag")
    return g


def _to_plain(cfg: RunConfig) -> dict:
    g = cfg.grating.to_dict()
    q = cfg.quadrature
    return {
        "grating": g,
        "polarization": asdict(cfg.polarization),
        "quadrature": {
            "num_nodes": q.num_nodes,
            "kx_max_per_m": q.kx_max,
            "scheme": q.scheme,
            "tail": q.tail,
            "auto_raise_nodes": cfg.auto_raise_nodes,
        },
        "integrator": asdict(cfg.integrator),
        "carpet": asdict(cfg.carpet),
        "field": asdict(cfg.field),
        "flowlines": {
            "launches_per_slit": cfg.flowlines.launches_per_slit,
            "launch_x_d": None if cfg.flowlines.launch_x_d is None else list(cfg.flowlines.launch_x_d),
        },
        "histogram": {
            "num_photons": list(cfg.histogram.num_photons),
            "y_observation_lt": cfg.histogram.y_observation_lt,
            "bin_width_d": cfg.histogram.bin_width_d,
            "window_half_width_d": cfg.histogram.window_half_width_d,
        },
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "threads": cfg.threads,
    }


def serialize_config(cfg: RunConfig) -> str:
    """YAML text that parses back to an equal :class:`RunConfig`."""
    header = f"# {FORMAT_VERSION}\n"
    return header + yaml.safe_dump(_to_plain(cfg), sort_keys=False, default_flow_style=None)


def load_config(path, command: Optional[str] = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), command)
