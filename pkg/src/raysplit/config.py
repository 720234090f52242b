"""Typed experiment configuration read from INI-style text.

Every key has a declared type and default; unknown sections or keys are
rejected.  The raw text is kept so manifests can reproduce it exactly.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


def _floats(v: str) -> tuple:
    return tuple(float(x) for x in v.replace(";", ",").split(",") if x.strip())


def _words(v: str) -> tuple:
    return tuple(x.strip().lower() for x in v.split(",") if x.strip())


def _bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _b(v: str):
    return "calibrated" if v.strip().lower() == "calibrated" else _floats(v)


# (type parser, default, check) per key; check returns an error string or None
_POS = lambda x: None if x > 0 else "must be positive"
_NONNEG = lambda x: None if x >= 0 else "must be >= 0"
_POSLIST = lambda xs: None if xs and all(v > 0 for v in xs) else "must be a nonempty list of positive numbers"

SCHEMA = {
    "model": {
        "variant": (str.strip, "layered1d",
                    lambda v: None if v in ("layered1d", "disks", "hemispheres") else "unknown variant"),
        "lengths": (_floats, (1.0, 1.0), _POSLIST),
        "stiffness": (_floats, (1.0, 4.0), _POSLIST),
        "b": (_b, "calibrated", None),
        "ends": (_words, ("dirichlet", "dirichlet"),
                 lambda v: None if len(v) == 2 and set(v) <= {"dirichlet", "neumann"} else "two of dirichlet/neumann"),
        "chi": (str.strip, "sine", lambda v: None if v in ("sine", "identity") else "sine or identity"),
        "eps": (float, 0.3, lambda x: None if abs(x) < 1 else "need |eps| < 1"),
        "phi0": (float, 0.0, None),
        "c_plus": (float, 1.0, _POS),
        "c_minus": (float, 0.5, _POS),
    },
    "dynamics": {
        "eps_amp": (float, 1e-6, _NONNEG),
        "max_branches": (int, 2 ** 16, _POS),
        "max_events": (int, 64, _POS),
        "strict": (_bool, False, None),
        "merge_tol": (float, 1e-7, _POS),
        "grazing_tol": (float, 1e-8, _POS),
        "quad_tol": (float, 1e-3, _POS),
        "tail_tol": (float, 0.05, _POS),
    },
    "run": {
        "seed": (int, 0, _NONNEG),
        "n_samples": (int, 100, _POS),
        "t": (float, 1.0, _NONNEG),
        "s": (float, 0.5, _NONNEG),
        "t_list": (_floats, (20.0, 80.0, 320.0), _POSLIST),
        "method": (str.strip, "sampled", lambda v: None if v in ("sampled", "tree", "diagonal") else "bad method"),
        "n_t": (int, 64, _POS),
        "lambda_max": (float, 2e7, _POS),
        "n_eig": (int, 2000, _POS),
        "n_list": (_floats, (250, 500, 1000, 2000), _POSLIST),
        "window": (_floats, (200, 1200), lambda v: None if len(v) == 2 and 0 <= v[0] < v[1] else "need lo < hi"),
        "band": (int, 200, _POS),
        "panels": (int, 24, _POS),
        "steps": (int, 1000, _POS),
        "start_s": (float, 0.5, None),
        "start_u": (float, 0.3, lambda x: None if abs(x) < 1 else "need |u| < 1"),
        "start_side": (str.strip, "plus", lambda v: None if v in ("plus", "minus") else "plus or minus"),
        "word": (str.strip, "-+", None),
        "resolution": (int, 200, _POS),
        "out": (str.strip, "out", None),
    },
    "observables": {
        "f": (str.strip, "angular_momentum_sq", None),
        "a": (str.strip, "indicator:0", None),
        "b": (str.strip, "one", None),
        "c": (str.strip, "one", None),
        "taper": (float, 0.05, _POS),
    },
}


@dataclass
class ExperimentConfig:
    text: str
    values: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        section, name = key.split(".", 1)
        return self.values[section][name]

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def effective(self) -> dict:
        """Plain-JSON view of every resolved value."""
        return {sec: {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}
                for sec, d in self.values.items()}

    @property
    def tolerances(self) -> dict:
        d = self.values["dynamics"]
        return {k: d[k] for k in ("merge_tol", "grazing_tol", "quad_tol", "tail_tol", "eps_amp")}


def _parse_value(section, key, raw):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {section}.{key}")
    conv, _, check = SCHEMA[section][key]
    try:
        val = conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from None
    if isinstance(val, float) and not math.isfinite(val):
        raise ConfigError(f"{section}.{key}: not finite")
    if check is not None:
        err = check(val)
        if err:
            raise ConfigError(f"{section}.{key} = {raw!r}: {err}")
    return val


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse config text; ``overrides`` maps ``"section.key"`` to raw strings."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {sec: {k: d for k, (_, d, _) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            values.setdefault(sec, {})[key] = _parse_value(sec, key, raw)
    overrides = dict(overrides or {})
    for dotted, raw in overrides.items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        sec, key = dotted.split(".", 1)
        values[sec][key] = _parse_value(sec, key, str(raw))
    return ExperimentConfig(text, values, overrides)


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    if path is None:
        return parse_config("", overrides)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_config(fh.read(), overrides)
