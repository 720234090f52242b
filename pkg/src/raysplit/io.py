"""CSV and JSON manifest writers with a fixed, reproducible format."""
from __future__ import annotations

import json
import os
import platform
from typing import Iterable, Sequence

import numpy as np


def fmt(v) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            fh.write(",".join(fmt(v) for v in row) + "\n")
            n += 1
    return n


def read_csv(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def write_manifest(path: str, config, subcommand: str, seed: int, outputs: dict,
                   lost_mass: float = 0.0, extra: dict | None = None) -> dict:
    from . import __version__

    doc = {
        "subcommand": subcommand,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": seed,
        "config_sha256": config.sha256,
        "config_text": config.text,
        "overrides": config.overrides,
        "effective_config": config.effective(),
        "tolerances": config.tolerances,
        "lost_mass_total": lost_mass,
        "outputs": {k: os.path.basename(v) for k, v in outputs.items()},
        "results": _jsonable(extra or {}),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
