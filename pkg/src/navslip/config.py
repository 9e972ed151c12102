"""Experiment configuration: INI text with a strict, typed schema.

Every section and key is declared below; unknown sections or keys are
rejected with the offending name so typos never silently fall back to a
default.  Example::

    [experiment]
    kind = steady
    name = disk-steady
    seed = 0

    [domain]
    shape = disk
    R = 1.0

    [alpha]
    value = 1.0

    [mesh]
    level = 6
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError

KINDS = ("mesh", "steady", "resolvent-scan", "evolve", "ns", "eigen", "alpha-limit", "local-est",
         "full-acceptance")


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


def _pieces(text):
    """'chart:s0:s1:value; ...' arcs for a piecewise coefficient."""
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 4:
            raise ValueError(f"piece {item!r} must be chart:s0:s1:value")
        out.append((parts[0].strip(), float(parts[1]), float(parts[2]), float(parts[3])))
    return tuple(out)


def _floor(text):
    t = text.strip()
    if t in ("auto", "none"):
        return t
    v = float(t)
    if v < 0:
        raise ValueError("mesh_floor must be nonnegative")
    return v


# section -> key -> (parser, default)
SCHEMA = {
    "experiment": {
        "kind": (_choice(*KINDS), None),
        "name": (str, None),
        "seed": (int, 0),
    },
    "domain": {
        "shape": (_choice("disk", "annulus", "channel"), "disk"),
        "R": (float, 1.0),
        "R0": (float, 0.5),
        "R1": (float, 1.0),
        "L": (float, 2.0),
        "H": (float, 1.0),
    },
    "alpha": {
        "kind": (_choice("constant", "piecewise"), "constant"),
        "value": (float, 1.0),
        "pieces": (_pieces, ()),
        "grid": (_floats, tuple(10.0 ** (k / 4.0) for k in range(17))),
    },
    "mesh": {
        "level": (int, 4),
        "levels": (_ints, (2, 4, 8)),
        "h": (float, 0.0),
        "isoparametric": (_bool, True),
    },
    "scheme": {
        "theta": (float, 0.5),
        "dt": (float, 0.01),
        "T": (float, 0.5),
        "convection": (_choice("none", "skew"), "none"),
    },
    "data": {
        "field": (str, "smooth"),
        "amplitude": (float, 1.0),
        "vanishing": (_bool, False),
    },
    "resolvent": {
        "rays": (_floats, (0.0, math.pi / 4, math.pi / 2)),
        "magnitudes": (_floats, (10.0, 31.622776601683793, 100.0, 316.22776601683796, 1000.0,
                                 3162.2776601683795, 10000.0)),
        "lambda": (float, 1.0),
        "operator_norms": (_bool, True),
    },
    "eigen": {
        "k": (int, 10),
    },
    "limits": {
        "problem": (_choice("steady", "resolvent", "stokes_evolution", "ns_evolution"), "stokes_evolution"),
        "mesh_floor": (_floor, "auto"),
    },
    "local": {
        "lambdas": (_floats, (1.0, 10.0, 100.0)),
        "exponents": (_floats, (3.0, 4.0, 6.0)),
    },
    "output": {
        "plots": (_bool, True),
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int = 0
    sections: dict = field(default_factory=dict)
    source: str = ""

    def get(self, section, key):
        return self.sections[section][key]

    def __getitem__(self, section):
        return self.sections[section]

    def echo(self) -> str:
        """Canonical text of the fully resolved config (defaults filled in)."""
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key in SCHEMA[sec]:
                lines.append(f"{key} = {_format(self.sections[sec][key])}")
            lines.append("")
        return "\n".join(lines)


def _format(v):
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(":".join(str(x) for x in p) for p in v)
        return ", ".join(_format(x) for x in v)
    return str(v)


def _validate(cfg: ExperimentConfig):
    d, a, m, s = cfg["domain"], cfg["alpha"], cfg["mesh"], cfg["scheme"]
    for key in ("R", "R0", "R1", "L", "H"):
        if not d[key] > 0:
            raise ConfigError(f"domain.{key} must be positive")
    if d["shape"] == "annulus" and not d["R0"] < d["R1"]:
        raise ConfigError("domain.R0 must be smaller than domain.R1")
    if a["value"] < 0 or any(p[3] < 0 for p in a["pieces"]):
        raise ConfigError("alpha values must be nonnegative")
    if any(g < 0 for g in a["grid"]):
        raise ConfigError("alpha.grid must be nonnegative")
    if list(a["grid"]) != sorted(a["grid"]):
        raise ConfigError("alpha.grid must be ascending")
    if cfg.kind == "alpha-limit":
        g = a["grid"]
        if len(g) < 2 or g[0] <= 0 or math.log10(g[-1] / g[0]) < 4 - 1e-9:
            raise ConfigError("alpha.grid must be positive and span at least four decades for alpha-limit")
    if m["level"] < 1 or any(lv < 1 for lv in m["levels"]):
        raise ConfigError("mesh levels must be positive")
    if s["theta"] not in (0.5, 1.0):
        raise ConfigError("scheme.theta must be 0.5 or 1")
    if not 0 < s["dt"] < s["T"]:
        raise ConfigError("scheme.dt must satisfy 0 < dt < T")
    if cfg["eigen"]["k"] < 1 or cfg["eigen"]["k"] > 50:
        raise ConfigError("eigen.k must lie in [1, 50]")


def parse_config(text: str, *, kind: str | None = None, name: str | None = None) -> ExperimentConfig:
    """Parse and validate; `kind`/`name` fill in or must agree with the file."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")
    sections = {}
    for sec, keys in SCHEMA.items():
        vals = {}
        for key, (parser, default) in keys.items():
            if cp.has_option(sec, key):
                raw = cp.get(sec, key)
                try:
                    vals[key] = parser(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {sec}.{key}: {exc}") from exc
            else:
                vals[key] = default
        sections[sec] = vals
    exp = sections["experiment"]
    if kind is not None:
        if exp["kind"] is not None and exp["kind"] != kind:
            raise ConfigError(f"experiment.kind = {exp['kind']} does not match subcommand {kind}")
        exp["kind"] = kind
    if exp["kind"] is None:
        raise ConfigError("experiment.kind is required")
    if name is not None and exp["name"] is None:
        exp["name"] = name
    if not exp["name"]:
        exp["name"] = exp["kind"]
    if any(ch in exp["name"] for ch in "/\\") or exp["name"] in (".", ".."):
        raise ConfigError("experiment.name must be a plain directory name")
    cfg = ExperimentConfig(kind=exp["kind"], name=exp["name"], seed=exp["seed"], sections=sections, source=text)
    _validate(cfg)
    return cfg


def load_config(path, *, kind=None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, kind=kind)


def default_config(kind: str) -> ExperimentConfig:
    return parse_config("", kind=kind)
