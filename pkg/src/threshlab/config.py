"""Strict TOML experiment configuration.

Every section has a fixed key set; unknown keys, wrong types and missing
scientific parameters are rejected with the line of the offending key.
"""
from dataclasses import dataclass, field
import hashlib
import json
import os
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

KINDS = ("numrange", "gevrey", "heat-decay", "schrodinger-decay", "las", "resonances",
         "threshold", "witten-threshold", "report")

F, I, B, S, FL = "float", "int", "bool", "str", "float-list"

SECTIONS = {
    "potential": {"mu": F, "mu_prime": F, "class": S, "c": FL, "R": F,
                  "w_radius": F, "w_amplitude": F},
    "witten": {"rho": F, "u1_amplitude": F, "u2_amplitude": F, "u2_radius": F},
    "barrier": {"V0_re": F, "V0_im": F, "a": F},
    "grid": {"L": F, "point_count": I, "n": I, "radial": B},
    "experiment": {
        "angle_count": I, "N_max": I, "cutoff_radius": F, "M": F, "two_sided": B,
        "a": F, "t_min": F, "t_count": I, "box_factor": F, "threshold": F,
        "R0": F, "theta_im": F, "delta": F, "chi_radius": F, "wedge_ratio": F, "wedge_nodes": I,
        "lambdas": FL, "eps": FL, "s": F, "measure_a": F, "measure_eps": F,
        "thetas_im": FL, "re_window": FL, "im_window": FL, "eig_count": I,
        "radius": F, "z": FL, "probe_radius": F, "runs": "str-list",
    },
    "tolerances": {
        "re_floor": F, "hermitian_imag": F, "gamma_excess": F, "min_window": I, "beta": F,
        "rel_change": F, "drift": F, "oracle": F, "idempotent": F, "gram": F,
        "representation": F, "omega": F, "slope": F, "rank_one": F, "chain": F,
    },
}

# required sections and (section, key) pairs per kind
REQUIRED = {
    "numrange": {"potential": ("mu",), "grid": ("L", "point_count"),
                 "experiment": ("angle_count",), "tolerances": ("re_floor",)},
    "gevrey": {"potential": ("mu",), "grid": ("L", "point_count"),
               "experiment": ("N_max", "cutoff_radius"), "tolerances": ("gamma_excess", "min_window")},
    "heat-decay": {"potential": ("mu",), "grid": ("L", "point_count"),
                   "experiment": ("a", "t_min", "t_count"), "tolerances": ("beta",)},
    "schrodinger-decay": {"potential": ("mu",), "grid": ("L", "point_count", "n"),
                          "experiment": ("R0", "theta_im", "delta", "chi_radius", "t_min", "t_count"),
                          "tolerances": ("beta",)},
    "las": {"potential": ("mu",), "grid": ("L", "point_count"),
            "experiment": ("lambdas", "eps", "s"), "tolerances": ("rel_change",)},
    "resonances": {"grid": ("L", "point_count"),
                   "experiment": ("thetas_im", "re_window", "im_window", "R0"),
                   "tolerances": ("drift",)},
    "threshold": {"witten": ("rho",), "grid": ("L", "point_count"),
                  "experiment": ("radius", "z"),
                  "tolerances": ("idempotent", "gram", "representation", "omega")},
    "witten-threshold": {"witten": ("rho",), "grid": ("L", "point_count"),
                         "experiment": ("z", "probe_radius"),
                         "tolerances": ("slope", "rank_one")},
    "report": {"experiment": ("runs",)},
}

TOP = {"kind": S, "seed": I, "out": S}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    out: str
    sections: dict
    path: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def section(self, name):
        return self.sections.get(name, {})

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def hash(self):
        return config_hash(self.raw)


def config_hash(data):
    """SHA-256 of the canonical JSON form (sorted keys, fixed separators)."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _locate(text, section, key):
    """1-based line of ``key`` inside ``[section]`` (top level when section is None)."""
    current = None
    pat = re.compile(r"^\s*(\"?)" + re.escape(key) + r"\1\s*=") if key is not None else None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[\s*([^\]]+?)\s*\]", line)
        if m:
            current = m.group(1)
            if section is not None and current == section and key is None:
                return i
            continue
        if current == section and key is not None and pat.match(line):
            return i
    return None


def _check_type(value, kind):
    if kind == F:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == I:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == B:
        return isinstance(value, bool)
    if kind == S:
        return isinstance(value, str)
    if kind == FL:
        return isinstance(value, list) and all(_check_type(v, F) for v in value)
    if kind == "str-list":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    return False


def parse_config(text, path=""):
    """Parse and validate config text; raises ConfigError with line/column."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        if line is None:
            m = re.search(r"line (\d+), column (\d+)", str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
        msg = getattr(exc, "msg", str(exc))
        raise ConfigError(f"TOML syntax: {msg}", line, col) from None

    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ConfigError(f"unknown section [{key}]", _locate(text, key, None), 1)
            continue
        if key not in TOP:
            raise ConfigError(f"unknown key {key!r}", _locate(text, None, key), 1)
        if not _check_type(value, TOP[key]):
            raise ConfigError(f"{key!r} must be of type {TOP[key]}", _locate(text, None, key), 1)
    kind = data.get("kind")
    if kind is None:
        raise ConfigError("missing required key 'kind'", 1, 1)
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", _locate(text, None, "kind"), 1)

    sections = {}
    for name, allowed in SECTIONS.items():
        sec = data.get(name)
        if sec is None:
            continue
        for key, value in sec.items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{name}]", _locate(text, name, key), 1)
            if not _check_type(value, allowed[key]):
                raise ConfigError(f"[{name}] {key} must be of type {allowed[key]}",
                                  _locate(text, name, key), 1)
            if name == "tolerances" and value <= 0:
                raise ConfigError(f"tolerance {key} must be positive", _locate(text, name, key), 1)
        sections[name] = dict(sec)

    for name, keys in REQUIRED[kind].items():
        if name not in sections:
            if kind == "resonances" and name == "potential":
                continue
            raise ConfigError(f"kind {kind!r} needs a [{name}] section", None, None)
        for key in keys:
            if key not in sections[name]:
                raise ConfigError(f"kind {kind!r} needs [{name}] {key}", _locate(text, name, None), 1)
    if kind == "resonances" and not ({"potential", "barrier"} & set(sections)):
        raise ConfigError("resonances need a [potential] or [barrier] section", None, None)

    return ExperimentConfig(kind=kind, seed=int(data.get("seed", 0)), out=data.get("out", ""),
                            sections=sections, path=path, raw=data)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, os.path.abspath(path))
