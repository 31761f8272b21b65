"""INI-style experiment configuration.

parse_config turns UTF-8 "key = value" text with [sections] and '#'
comments into a fully validated ExperimentSpec: problem parameters, the
grid, initial data, a ready-to-run SolverConfig, and the matching
dichotomy template.  Unknown and duplicate keys are hard errors carrying
line numbers.  Exponent sanity is delegated to ProblemParams and not
re-checked here.

Sections and keys (keys are case-insensitive):

    [problem]   n, m, p
    [grid]      kind = box | radial
                box: lo, hi (scalars or comma pairs), h, boundary
                radial: r_max, h
    [initial]   kind = constant | mu_c | gaussian | barenblatt | csv
                constant: value        mu_c: c
                gaussian: amplitude, width, center
                barenblatt: time, mass          csv: path
    [run]       horizon, safety, u_max, dt_min, source = on|off,
                snapshots, record_stride, max_steps, cap_factor,
                lift_denominator
    [monitors]  <name> = <norm kind> [q=..] [alpha=..] [cap=..] ...

Only [problem], [grid] and a horizon are mandatory; everything else
defaults (safety 0.5, u_max 1e8, dt_min 1e-10, zero-flux boundary, zero
initial data).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .experiments import DichotomyConfig
from .grids import (BoxGeometry, GridField, RadialGeometry, constant_field,
                    gaussian_field, mu_c_field)
from .io import read_field_csv
from .norms import NormSpec
from .params import ProblemParams
from .solver import SolverConfig, barenblatt_field
from .special import PsiSpec

_SECTIONS = ("problem", "grid", "initial", "run", "monitors")
_MISSING = object()


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a CLI subcommand needs, assembled from one config file."""

    params: ProblemParams
    geometry: object
    initial: GridField
    solver: SolverConfig
    dichotomy: DichotomyConfig
    initial_kind: str


class _Section:
    """Key/value bag with line numbers and take-or-default access."""

    def __init__(self, name: str):
        self.name = name
        self.entries = {}            # key -> (raw value, line number)

    def add(self, key: str, value: str, lineno: int):
        if key in self.entries:
            first = self.entries[key][1]
            raise ConfigError(f"duplicate key '{key}' in [{self.name}] "
                              f"(lines {first} and {lineno})")
        self.entries[key] = (value, lineno)

    def take(self, key: str, conv=None, default=_MISSING):
        if key not in self.entries:
            if default is _MISSING:
                raise ConfigError(
                    f"missing mandatory key '{key}' in [{self.name}]")
            return default
        raw, lineno = self.entries.pop(key)
        if conv is None:
            return raw
        try:
            return conv(raw)
        except (ValueError, TypeError, KeyError):
            raise ConfigError(f"bad value {raw!r} for '{key}' in "
                              f"[{self.name}] at line {lineno}") from None

    def finish(self):
        if self.entries:
            key = min(self.entries, key=lambda k: self.entries[k][1])
            raise ConfigError(f"unknown key '{key}' in [{self.name}] "
                              f"at line {self.entries[key][1]}")


def _scan(text: str) -> dict:
    sections = {name: _Section(name) for name in _SECTIONS}
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            name = body[1:-1].strip().lower()
            if name not in sections:
                raise ConfigError(f"unknown section [{name}] at line {lineno}")
            current = sections[name]
            continue
        if current is None:
            raise ConfigError(f"key outside any section at line {lineno}")
        key, eq, value = body.partition("=")
        if not eq:
            raise ConfigError(
                f"expected 'key = value' at line {lineno}: {body!r}")
        current.add(key.strip().lower(), value.strip(), lineno)
    return sections


def _flag(raw: str) -> bool:
    low = raw.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(raw)


def _floats(raw: str) -> tuple:
    if not raw.strip():
        return ()
    return tuple(float(v) for v in raw.split(","))


def _build_params(sec: _Section) -> ProblemParams:
    N = sec.take("n", int)
    m = sec.take("m", float)
    p = sec.take("p", float)
    sec.finish()
    # invalid exponent relations raise here with the invariant spelled out
    return ProblemParams(N, m, p)


def _build_geometry(sec: _Section, params: ProblemParams):
    kind = sec.take("kind", str, default="box").lower()
    if kind == "box":
        lo = sec.take("lo", _floats)
        hi = sec.take("hi", _floats)
        h = sec.take("h", float)
        boundary = sec.take("boundary", str, default="neumann").lower()
        sec.finish()
        if len(lo) == 1 and params.N > 1:
            lo = lo * params.N
        if len(hi) == 1 and params.N > 1:
            hi = hi * params.N
        g = BoxGeometry.from_extent(lo, hi, h, boundary)
        if g.N != params.N:
            raise ConfigError(
                f"grid dimension {g.N} does not match problem n = {params.N}")
        return g
    if kind == "radial":
        r_max = sec.take("r_max", float)
        h = sec.take("h", float)
        sec.finish()
        return RadialGeometry.from_extent(r_max, h, params.N)
    raise ConfigError(f"unknown grid kind {kind!r}")


def _build_initial(sec: _Section, geometry, params: ProblemParams):
    kind = sec.take("kind", str, default="constant").lower()
    if kind == "constant":
        value = sec.take("value", float, default=0.0)
        sec.finish()
        return constant_field(geometry, value), kind
    if kind == "mu_c":
        c = sec.take("c", float)
        sec.finish()
        return mu_c_field(geometry, c, params), kind
    if kind == "gaussian":
        amplitude = sec.take("amplitude", float)
        width = sec.take("width", float)
        center = sec.take("center", _floats, default=None)
        sec.finish()
        return gaussian_field(geometry, amplitude, width, center), kind
    if kind == "barenblatt":
        t0 = sec.take("time", float)
        mass = sec.take("mass", float, default=1.0)
        sec.finish()
        return barenblatt_field(geometry, t0, mass, params), kind
    if kind == "csv":
        path = sec.take("path")
        sec.finish()
        fld, _ = read_field_csv(path)
        if fld.geometry != geometry:
            raise ConfigError(
                f"field file {path!r} geometry does not match [grid]")
        return fld, kind
    raise ConfigError(f"unknown initial kind {kind!r}")


_NORM_FIELDS = {"q": float, "alpha": float, "cap": float, "horizon": float,
                "ratio": float, "count": int, "centers": str}


def _norm_spec(raw: str) -> NormSpec:
    tokens = raw.split()
    if not tokens:
        raise ValueError("empty monitor")
    kind = tokens[0].lower().replace("-", "_")
    kw = {}
    for tok in tokens[1:]:
        key, eq, val = tok.partition("=")
        key = key.lower()
        if not eq or key not in _NORM_FIELDS:
            raise ValueError(f"bad norm option {tok!r}")
        kw[key] = _NORM_FIELDS[key](val)
    if kind == "orlicz_eta":
        kw["psi"] = PsiSpec(kw.pop("alpha", 1.0))
    return NormSpec(kind=kind, **kw)      # NormSpec validates the rest


def _build_monitors(sec: _Section) -> tuple:
    out = []
    for name in list(sec.entries):
        raw, lineno = sec.entries.pop(name)
        try:
            spec = _norm_spec(raw)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad monitor '{name}' in [monitors] at line "
                              f"{lineno}: {exc}") from None
        out.append((name, spec))
    return tuple(out)


def _build_run(sec: _Section) -> dict:
    out = {
        "horizon": sec.take("horizon", float),
        "safety": sec.take("safety", float, default=0.5),
        "u_max": sec.take("u_max", float, default=1e8),
        "dt_min": sec.take("dt_min", float, default=1e-10),
        "source_on": sec.take("source", _flag, default=True),
        "snapshots": sec.take("snapshots", _floats, default=()),
        "record_stride": sec.take("record_stride", int, default=16),
        "max_steps": sec.take("max_steps", int, default=50_000_000),
        "cap_factor": sec.take("cap_factor", float, default=10.0),
        "lift_denominator": sec.take("lift_denominator", int, default=100),
    }
    sec.finish()
    return out


def parse_config(text: str) -> ExperimentSpec:
    sections = _scan(text)
    params = _build_params(sections["problem"])
    geometry = _build_geometry(sections["grid"], params)
    initial, kind = _build_initial(sections["initial"], geometry, params)
    monitors = _build_monitors(sections["monitors"])
    run = _build_run(sections["run"])
    solver = SolverConfig(params=params, initial=initial,
                          horizon=run["horizon"], safety=run["safety"],
                          u_max=run["u_max"], dt_min=run["dt_min"],
                          source_on=run["source_on"],
                          snapshots=run["snapshots"], monitors=monitors,
                          record_stride=run["record_stride"],
                          max_steps=run["max_steps"])
    dichotomy = DichotomyConfig(geometry=geometry, horizon=run["horizon"],
                                safety=run["safety"], u_max=run["u_max"],
                                dt_min=run["dt_min"],
                                cap_factor=run["cap_factor"],
                                lift_denominator=run["lift_denominator"],
                                snapshots=run["snapshots"],
                                record_stride=run["record_stride"],
                                max_steps=run["max_steps"])
    return ExperimentSpec(params=params, geometry=geometry, initial=initial,
                          solver=solver, dichotomy=dichotomy,
                          initial_kind=kind)
