"""Deterministic text serialization: versioned CSV and JSON-lines.

Every formatter is a pure function of its inputs: floats are written with
repr (shortest exact round-trip), rows follow fixed orders, and nothing
stamps times or hostnames into the output, so identical runs produce
identical bytes.  The first line of every CSV names its schema, e.g.
"# field-csv/1"; readers refuse files whose schema line they do not
recognize.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .grids import BoxGeometry, GridField, RadialGeometry
from .params import ProblemParams

FIELD_SCHEMA = "field-csv/1"
SERIES_SCHEMA = "series-csv/1"
DICHOTOMY_SCHEMA = "dichotomy-csv/1"
TRACE_SCHEMA = "trace-csv/1"
CONSTANTS_SCHEMA = "constants-csv/1"
NORM_SCHEMA = "norm-csv/1"


def _r(x) -> str:
    return repr(float(x))


def _params_header(p: ProblemParams) -> str:
    return f"N={p.N} m={_r(p.m)} p={_r(p.p)}"


def _parse_params_header(text: str) -> ProblemParams:
    kv = dict(tok.split("=", 1) for tok in text.split())
    return ProblemParams(int(kv["N"]), float(kv["m"]), float(kv["p"]))


def _geometry_header(g) -> str:
    if isinstance(g, RadialGeometry):
        return f"radial N={g.N} h={_r(g.h)} n={g.n_cells}"
    lo = ",".join(_r(v) for v in g.lo)
    shape = ",".join(str(n) for n in g.shape)
    return f"box N={g.N} lo={lo} h={_r(g.h)} shape={shape} boundary={g.boundary}"


def _parse_geometry_header(text: str):
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty geometry header")
    kind, kv = tokens[0], dict(tok.split("=", 1) for tok in tokens[1:])
    try:
        if kind == "radial":
            return RadialGeometry(int(kv["N"]), int(kv["n"]), float(kv["h"]))
        if kind == "box":
            lo = tuple(float(v) for v in kv["lo"].split(","))
            shape = tuple(int(v) for v in kv["shape"].split(","))
            return BoxGeometry(int(kv["N"]), lo, shape, float(kv["h"]),
                               kv["boundary"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad geometry header {text!r}: {exc}") from None
    raise ConfigError(f"unknown geometry kind {kind!r} in field header")


# ---------------------------------------------------------------------------
# fields

def format_field_csv(field: GridField, t: float = None,
                     params: ProblemParams = None) -> str:
    """One value per cell with its center coordinates, plus enough header
    comments (geometry, time, problem) to reconstruct the field exactly."""
    g = field.geometry
    lines = [f"# {FIELD_SCHEMA}", f"# geometry: {_geometry_header(g)}"]
    if t is not None:
        lines.append(f"# t: {_r(t)}")
    if params is not None:
        lines.append(f"# problem: {_params_header(params)}")
    if isinstance(g, RadialGeometry):
        lines.append("r,value")
        r = g.centers()
        for k in range(g.n_cells):
            lines.append(f"{_r(r[k])},{_r(field.values[k])}")
    elif g.N == 1:
        lines.append("x,value")
        x = g.centers()
        for k in range(g.shape[0]):
            lines.append(f"{_r(x[k])},{_r(field.values[k])}")
    else:
        lines.append("x,y,value")
        xs, ys = g.centers(0), g.centers(1)
        for i in range(g.shape[0]):
            for j in range(g.shape[1]):
                lines.append(f"{_r(xs[i])},{_r(ys[j])},{_r(field.values[i, j])}")
    return "\n".join(lines) + "\n"


def parse_field_csv(text: str):
    """Inverse of format_field_csv: (field, meta) with meta holding any
    't' and 'params' found in the header.  Coordinates are not re-read;
    the geometry header is authoritative."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {FIELD_SCHEMA}":
        raise ConfigError(f"not a {FIELD_SCHEMA} file")
    geometry = None
    meta = {}
    rows = []
    for raw in lines[1:]:
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, _, val = s[1:].partition(":")
            key, val = key.strip(), val.strip()
            if key == "geometry":
                geometry = _parse_geometry_header(val)
            elif key == "t":
                meta["t"] = float(val)
            elif key == "problem":
                meta["params"] = _parse_params_header(val)
            continue
        rows.append(s)
    if geometry is None:
        raise ConfigError("field file has no geometry header")
    if not rows or not rows[0].endswith("value"):
        raise ConfigError("field file has no value column")
    try:
        vals = np.array([float(row.split(",")[-1]) for row in rows[1:]])
    except ValueError as exc:
        raise ConfigError(f"bad field row: {exc}") from None
    expected = int(np.prod(geometry.shape))
    if vals.size != expected:
        raise ConfigError(
            f"field file has {vals.size} rows, geometry needs {expected}")
    return GridField(geometry, vals.reshape(geometry.shape)), meta


def read_field_csv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_field_csv(fh.read())


# ---------------------------------------------------------------------------
# runs and experiments

def format_series_csv(report) -> str:
    """Per-step time series of a solve: t, applied dt, sup norm, mass."""
    lines = [f"# {SERIES_SCHEMA}",
             f"# status: {report.status}",
             f"# t_final: {_r(report.t_final)}",
             f"# steps: {report.steps}"]
    if report.blow_time is not None:
        lines.append(f"# blow_time: {_r(report.blow_time)}")
    if report.params is not None:
        lines.append(f"# problem: {_params_header(report.params)}")
    lines.append("t,dt,linf,mass")
    s = report.series
    for k in range(s["t"].size):
        lines.append(",".join(_r(s[name][k])
                              for name in ("t", "dt", "linf", "mass")))
    return "\n".join(lines) + "\n"


def format_dichotomy_csv(result) -> str:
    lines = [f"# {DICHOTOMY_SCHEMA}",
             f"# problem: {_params_header(result.params)}",
             f"# family: {result.family}",
             f"# c_exist: {_r(result.c_exist)}",
             f"# c_blow: {_r(result.c_blow)}"]
    for key in ("horizon", "h", "bisection_steps"):
        if key in result.meta:
            val = result.meta[key]
            val = str(val) if isinstance(val, int) else _r(val)
            lines.append(f"# {key}: {val}")
    lines.append("c,status,steps,t_final")
    for c, status in result.outcomes:
        rep = result.reports.get(c)
        if rep is None:
            lines.append(f"{_r(c)},{status},,")
        else:
            lines.append(f"{_r(c)},{status},{rep.steps},{_r(rep.t_final)}")
    return "\n".join(lines) + "\n"


def format_trace_csv(est, check=None) -> str:
    """Sup-ball masses over the radius ladder; slope and optional envelope
    verdict in the header."""
    lines = [f"# {TRACE_SCHEMA}",
             f"# tau0: {_r(est.tau0)}",
             f"# slope: {_r(est.slope)}",
             f"# intercept: {_r(est.intercept)}"]
    if check is not None:
        lines += [f"# envelope_margin: {_r(check.margin)}",
                  f"# envelope_passed: {int(check.passed)}",
                  f"# envelope_worst_sigma: {_r(check.worst_sigma)}"]
    lines.append("sigma,mass")
    for s, mass in zip(est.sigmas, est.masses):
        lines.append(f"{_r(s)},{_r(mass)}")
    return "\n".join(lines) + "\n"


def format_constants_csv(const) -> str:
    def opt(x):
        return "" if x is None else _r(x)

    return "\n".join([
        f"# {CONSTANTS_SCHEMA}",
        f"# problem: {_params_header(const.params)}",
        f"# horizon: {_r(const.horizon)}",
        "value,branch,a,b,slope_factor,log_shift,quad_error",
        f"{_r(const.value)},{const.branch},{_r(const.a)},{_r(const.b)},"
        f"{opt(const.slope_factor)},{opt(const.log_shift)},"
        f"{_r(const.quad_error)}",
    ]) + "\n"


def format_norm_csv(kind: str, value: float) -> str:
    return f"# {NORM_SCHEMA}\nkind,value\n{kind},{_r(value)}\n"


def event_line(kind: str, **fields) -> str:
    """One JSON-lines record; keys sorted, values must be JSON-native."""
    rec = {"event": kind}
    rec.update(fields)
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))
