"""Run configuration files and output streams.

A run is described by one JSON document::

    {
      "anisotropy": {"family": "fourier", "a": 0.05, "k": 4, "theta0": 0.0},
      "endpoints": [[0, 1], [-0.9, -0.5], [0.9, -0.5]],
      "initial": {"kind": "straight", "junction": [0.1, 0.0]},
      "flow": {"N": 64, "t_max": 2.0},
      "output": {"csv": "run.csv", "snapshots": "run.jsonl", "snapshot_every": 100}
    }

Only ``anisotropy`` and ``endpoints`` are required.  Output paths are
resolved against the directory of the config file by the command line
front end.  Results are written as CSV (one row per accepted step),
JSON lines (node snapshots) and SVG frames.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .anisotropy import Anisotropy, ellipticity_bounds, wulff_boundary
from .diagnostics import CSV_HEADER, DiagnosticsRecord
from .errors import IoError, NotElliptic, ParseError, TriodFlowError, ValidationError
from .flow import FlowConfig
from .geometry import TriodNetwork
from .reparam import to_constant_speed

__all__ = [
    "InitialData",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "build_network",
    "RunWriter",
]

_FLOW_FIELDS = {f.name: f for f in fields(FlowConfig)}
_INT_FLOW_FIELDS = {"N", "newton_max_iter", "reparam_every"}


@dataclass(frozen=True)
class InitialData:
    kind: str = "straight"
    junction: Optional[tuple] = None
    curves: Optional[tuple] = None

    def to_dict(self) -> dict:
        if self.kind == "straight":
            return {"kind": "straight", "junction": list(self.junction)}
        return {"kind": "polylines", "curves": [[list(p) for p in c] for c in self.curves]}


@dataclass(frozen=True)
class OutputConfig:
    csv: str = "run.csv"
    snapshots: Optional[str] = None
    snapshot_every: int = 100
    svg_every: int = 0
    svg_dir: Optional[str] = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def frames_dir(self) -> str:
        if self.svg_dir is not None:
            return self.svg_dir
        return os.path.splitext(self.csv)[0] + "_frames"


@dataclass(frozen=True)
class RunConfig:
    anisotropy: Anisotropy
    endpoints: tuple
    initial: InitialData = field(default_factory=InitialData)
    flow: FlowConfig = field(default_factory=FlowConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return {
            "anisotropy": self.anisotropy.to_dict(),
            "endpoints": [list(p) for p in self.endpoints],
            "initial": self.initial.to_dict(),
            "flow": self.flow.to_dict(),
            "output": self.output.to_dict(),
        }


def _number(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, "expected a number")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ValidationError(name, "expected an integer")
        return int(value)
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    return float(value)


def _point(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValidationError(name, "expected a point [x, y]")
    return (_number(value[0], f"{name}[0]"), _number(value[1], f"{name}[1]"))


def _object(value, name, allowed):
    if not isinstance(value, dict):
        raise ValidationError(name, "expected an object")
    unknown = sorted(set(value) - set(allowed))
    if unknown:
        raise ValidationError(f"{name}.{unknown[0]}" if name else unknown[0], "unknown field")
    return value


def _parse_anisotropy(d) -> Anisotropy:
    d = _object(d, "anisotropy", {"family", "a", "k", "theta0", "A"})
    family = d.get("family")
    if family == "isotropic":
        a = Anisotropy.isotropic()
    elif family == "fourier":
        for key in ("a", "k"):
            if key not in d:
                raise ValidationError(f"anisotropy.{key}", "required for the fourier family")
        try:
            a = Anisotropy.fourier(_number(d["a"], "anisotropy.a"), _number(d["k"], "anisotropy.k", integer=True),
                                   _number(d.get("theta0", 0.0), "anisotropy.theta0"))
        except ValidationError as exc:
            raise ValidationError(f"anisotropy.{exc.field}", str(exc)) from None
    elif family == "elliptic":
        A = d.get("A")
        if not isinstance(A, list) or len(A) != 2 or any(not isinstance(r, list) or len(r) != 2 for r in A):
            raise ValidationError("anisotropy.A", "expected a 2x2 matrix")
        A = [[_number(v, "anisotropy.A") for v in row] for row in A]
        try:
            a = Anisotropy.elliptic(A)
        except ValidationError as exc:
            raise ValidationError("anisotropy.A", str(exc)) from None
    else:
        raise ValidationError("anisotropy.family", f"unknown family {family!r}")
    try:
        ellipticity_bounds(a)
    except NotElliptic as exc:
        raise ValidationError("anisotropy", str(exc)) from None
    return a


def _parse_initial(d, endpoints) -> InitialData:
    d = _object(d, "initial", {"kind", "junction", "curves"})
    kind = d.get("kind")
    if kind == "straight":
        if "junction" not in d:
            raise ValidationError("initial.junction", "required for a straight initial triod")
        q = _point(d["junction"], "initial.junction")
        if any(q == p for p in endpoints):
            raise ValidationError("initial.junction", "junction coincides with an endpoint")
        return InitialData("straight", junction=q)
    if kind == "polylines":
        curves = d.get("curves")
        if not isinstance(curves, list) or len(curves) != 3:
            raise ValidationError("initial.curves", "expected three node arrays")
        out = []
        for i, c in enumerate(curves):
            name = f"initial.curves[{i}]"
            if not isinstance(c, list) or len(c) < 5:
                raise ValidationError(name, "expected at least 5 nodes")
            out.append(tuple(_point(p, name) for p in c))
        if not (out[0][0] == out[1][0] == out[2][0]):
            raise ValidationError("initial.curves", "curves must start at a common junction")
        for i, c in enumerate(out):
            if c[-1] != endpoints[i]:
                raise ValidationError(f"initial.curves[{i}]", "last node must equal the endpoint")
        return InitialData("polylines", curves=tuple(out))
    raise ValidationError("initial.kind", f"unknown kind {kind!r}")


def _parse_flow(d) -> FlowConfig:
    # flow fields are reported by their bare name, as FlowConfig does
    if not isinstance(d, dict):
        raise ValidationError("flow", "expected an object")
    unknown = sorted(set(d) - set(_FLOW_FIELDS))
    if unknown:
        raise ValidationError(unknown[0], "unknown flow field")
    kwargs = {}
    for key, value in d.items():
        name = key
        if key == "strict":
            if not isinstance(value, bool):
                raise ValidationError(name, "expected true or false")
            kwargs[key] = value
        else:
            kwargs[key] = _number(value, name, integer=key in _INT_FLOW_FIELDS)
    return FlowConfig(**kwargs)


def _parse_output(d) -> OutputConfig:
    d = _object(d, "output", {f.name for f in fields(OutputConfig)})
    kwargs = {}
    for key in ("csv", "snapshots", "svg_dir"):
        if key in d:
            value = d[key]
            if value is not None and (not isinstance(value, str) or not value):
                raise ValidationError(f"output.{key}", "expected a non-empty path or null")
            kwargs[key] = value
    if kwargs.get("csv", "") is None:
        raise ValidationError("output.csv", "a CSV path is required")
    for key in ("snapshot_every", "svg_every"):
        if key in d:
            kwargs[key] = _number(d[key], f"output.{key}", integer=True)
    out = OutputConfig(**kwargs)
    if out.snapshots is not None and out.snapshot_every < 1:
        raise ValidationError("output.snapshot_every", "must be >= 1 when snapshots are enabled")
    if out.snapshot_every < 0:
        raise ValidationError("output.snapshot_every", "must be non-negative")
    if out.svg_every < 0:
        raise ValidationError("output.svg_every", "must be non-negative")
    paths = [p for p in (out.csv, out.snapshots, out.frames_dir if out.svg_every else None) if p is not None]
    if len(set(paths)) != len(paths):
        raise ValidationError("output", "output paths must be distinct")
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration, filling defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    doc = _object(doc, "", {"anisotropy", "endpoints", "initial", "flow", "output"})
    for key in ("anisotropy", "endpoints"):
        if key not in doc:
            raise ValidationError(key, "required")
    a = _parse_anisotropy(doc["anisotropy"])
    P = doc["endpoints"]
    if not isinstance(P, list) or len(P) != 3:
        raise ValidationError("endpoints", "expected three points")
    endpoints = tuple(_point(p, f"endpoints[{i}]") for i, p in enumerate(P))
    if len(set(endpoints)) != 3:
        raise ValidationError("endpoints", "endpoints must be pairwise distinct")
    if "initial" in doc:
        initial = _parse_initial(doc["initial"], endpoints)
    else:
        centroid = tuple(float(v) for v in np.mean(endpoints, axis=0))
        initial = InitialData("straight", junction=centroid)
    flow = _parse_flow(doc.get("flow", {}))
    output = _parse_output(doc.get("output", {}))
    return RunConfig(a, endpoints, initial, flow, output)


def serialize_config(cfg: RunConfig) -> str:
    """JSON text that :func:`parse_config` maps back to an equal config."""
    return json.dumps(cfg.to_dict(), indent=2) + "\n"


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def build_network(cfg: RunConfig) -> TriodNetwork:
    """Initial triod at the configured resolution; polylines are resampled at constant speed."""
    P = np.array(cfg.endpoints)
    N = cfg.flow.N
    if cfg.initial.kind == "straight":
        return TriodNetwork.straight(cfg.initial.junction, P, N)
    try:
        nodes = np.stack([to_constant_speed(np.array(c), N).nodes for c in cfg.initial.curves])
    except TriodFlowError as exc:
        raise ValidationError("initial.curves", str(exc)) from None
    nodes[:, 0] = nodes[0, 0]
    nodes[:, -1] = P
    return TriodNetwork(nodes, P)


def _fmt(x) -> str:
    return format(float(x), ".17g")


class RunWriter:
    """Sink that streams a run to CSV, JSON lines and SVG frames.

    The initial state is always written as the first snapshot (and frame).
    Call :meth:`close` with the stop reason to append the final comment
    line ``# stop: <reason>`` to the CSV.
    """

    def __init__(self, out: OutputConfig, a: Anisotropy, net0: TriodNetwork, base_dir: str = "."):
        self.out = out
        self.a = a
        self.base_dir = base_dir
        lo = net0.nodes.reshape(-1, 2).min(axis=0)
        hi = net0.nodes.reshape(-1, 2).max(axis=0)
        center, half = 0.5 * (lo + hi), 0.6 * max(float((hi - lo).max()), 1e-12)
        self.viewport = (center[0] - half, center[1] - half, 2.0 * half)
        self._snap = None
        try:
            self._csv = open(self._path(out.csv), "w", encoding="utf-8", newline="\n")
            self._csv.write(CSV_HEADER + "\n")
            if out.snapshots is not None:
                self._snap = open(self._path(out.snapshots), "w", encoding="utf-8", newline="\n")
                self._write_snapshot(net0, 0.0, 0)
            if out.svg_every > 0:
                os.makedirs(self._path(out.frames_dir), exist_ok=True)
                self._write_frame(net0, 0.0, 0)
        except OSError as exc:
            self._close_files()
            raise IoError(str(exc)) from None

    def _path(self, p):
        return os.path.join(self.base_dir, p)

    def _write_snapshot(self, net, t, step_index):
        rec = {"step": step_index, "t": float(t), "curves": net.nodes.tolist()}
        self._snap.write(json.dumps(rec) + "\n")

    def _write_frame(self, net, t, step_index):
        path = os.path.join(self._path(self.out.frames_dir), f"frame_{step_index:07d}.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_svg(net, self.a, self.viewport, t))

    def __call__(self, state, record: DiagnosticsRecord):
        try:
            self._csv.write(record.csv_row() + "\n")
            k = state.step_index
            if self._snap is not None and k % self.out.snapshot_every == 0:
                self._write_snapshot(state.net, state.t, k)
            if self.out.svg_every > 0 and k % self.out.svg_every == 0:
                self._write_frame(state.net, state.t, k)
        except OSError as exc:
            raise IoError(str(exc)) from None

    def _close_files(self):
        for fh in (getattr(self, "_csv", None), self._snap):
            if fh is not None and not fh.closed:
                fh.close()

    def close(self, stop=None):
        try:
            if stop is not None:
                self._csv.write(f"# stop: {stop}\n")
        finally:
            self._close_files()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self._close_files()
        return False


def render_svg(net: TriodNetwork, a: Anisotropy, viewport, t: float, size: int = 600) -> str:
    """SVG frame with the three curves and a Wulff-shape inset in the top left corner."""
    x0, y0, w = viewport
    scale = size / w

    def xy(p):
        # flip y so that the picture has the usual orientation
        return f"{(p[0] - x0) * scale:.3f},{size - (p[1] - y0) * scale:.3f}"

    colours = ("#1f77b4", "#d62728", "#2ca02c")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i in range(3):
        pts = " ".join(xy(p) for p in net.nodes[i])
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colours[i]}" stroke-width="2"/>')
    for p in net.endpoints:
        parts.append(f'<circle cx="{xy(p).split(",")[0]}" cy="{xy(p).split(",")[1]}" r="4" fill="black"/>')
    W = wulff_boundary(a, 120)
    r_inset = 0.08 * size / max(float(np.abs(W).max()), 1e-12)
    cx = cy = 0.1 * size
    pts = " ".join(f"{cx + r_inset * p[0]:.3f},{cy - r_inset * p[1]:.3f}" for p in W)
    parts.append(f'<polygon points="{pts}" fill="none" stroke="gray" stroke-width="1"/>')
    parts.append(f'<text x="{0.75 * size:.0f}" y="{0.06 * size:.0f}" font-size="14" font-family="monospace">'
                 f"t = {t:.5f}</text>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
