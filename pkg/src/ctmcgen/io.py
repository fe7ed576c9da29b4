"""File formats: matrix CSV, observation JSON, portfolio JSON, run manifests.

Decimal serialization uses ``repr`` (shortest round-trip), so write/read
cycles are bit-exact and regression files can be compared as text.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
import time

import numpy as np

from . import __version__
from .core import ObservationSet
from .datasets import RATINGS
from .risk import Portfolio


def _fmt(x):
    return repr(float(x))


def save_matrix_csv(path, matrix, labels=None):
    """Write a square matrix as CSV, optionally with a label header row."""
    m = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if labels:
            writer.writerow(list(labels))
        for row in m:
            writer.writerow([_fmt(v) for v in row])


def load_matrix_csv(path):
    """Read a square matrix CSV; a non-numeric first row is a label header."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    return np.array([[float(v) for v in row] for row in rows])


def save_observations(path, obs: ObservationSet):
    payload = {
        "dt": obs.dt,
        "obligors": np.asarray(obs.obligors).tolist(),
        "tpms": [np.asarray(t).tolist() for t in obs.tpms],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_observations(path, renormalize=False, exact=False) -> ObservationSet:
    """Observation JSON: ``{"dt": years, "obligors": [...], "tpms": [[[...]]]}``.

    ``obligors`` is either one count per rating or one row per TPM.
    """
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("dt", "obligors", "tpms"):
        if key not in payload:
            raise ValueError(f"{path}: missing key {key!r}")
    return ObservationSet.from_tpms(
        [np.asarray(t, dtype=float) for t in payload["tpms"]],
        obligors=np.asarray(payload["obligors"], dtype=float),
        dt=float(payload["dt"]),
        renormalize=renormalize,
        exact=exact,
    )


def load_portfolio(path) -> Portfolio:
    """Portfolio JSON: ``{"name": ..., "positions": [{"rating", "notional"}]}``."""
    with open(path) as fh:
        payload = json.load(fh)
    if "positions" not in payload:
        raise ValueError(f"{path}: missing key 'positions'")
    positions = []
    for item in payload["positions"]:
        rating = item["rating"]
        idx = RATINGS.index(rating) if isinstance(rating, str) else int(rating)
        positions.append((idx, float(item["notional"])))
    return Portfolio(tuple(positions), name=payload.get("name", "custom"))


def write_manifest(primary_output, command, config, seed, outputs, started):
    """Reproducibility manifest written next to a command's primary output."""
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": [str(o) for o in outputs],
        "wall_time_s": time.time() - started,
        "versions": {
            "ctmcgen": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "platform": platform.platform(),
        },
    }
    try:
        import scipy

        manifest["versions"]["scipy"] = scipy.__version__
    except ImportError:  # pragma: no cover
        pass
    path = f"{primary_output}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return path
