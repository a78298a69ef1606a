"""Trajectory CSV writer and reader.

Layout: ``#`` metadata lines, a header row, then one row per sample.  Columns
are ``t``, the chart coordinates, ``v_<label>`` quasi-velocities, ``E``,
``P_<label>`` momenta, any extra diagnostics and ``res_constraint``.
Values use ``%.17g`` so a round trip is lossless and output is byte-stable.
"""

from __future__ import annotations

import json
from typing import TextIO

import numpy as np

from .dynamics import Trajectory


def _fmt(v: float) -> str:
    return "%.17g" % v


def columns(traj: Trajectory) -> list[str]:
    cols = ["t", *traj.coord_labels, *(f"v_{lab}" for lab in traj.velocity_labels), "E"]
    cols += [f"P_{lab}" for lab in traj.momenta]
    cols += list(traj.extra)
    cols.append("res_constraint")
    return cols


def write_csv(traj: Trajectory, fh: TextIO, meta: dict | None = None) -> None:
    from . import __version__

    info = {"version": __version__, "reduced": traj.reduced, **traj.meta, **(meta or {})}
    for key in sorted(info):
        value = info[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        fh.write(f"# {key}={value}\n")
    fh.write(",".join(columns(traj)) + "\n")
    residual = traj.residual if traj.residual is not None else np.zeros(len(traj))
    blocks = [traj.times[:, None], traj.coords, traj.velocities, traj.energy[:, None]]
    blocks += [np.asarray(v)[:, None] for v in traj.momenta.values()]
    blocks += [np.asarray(v)[:, None] for v in traj.extra.values()]
    blocks.append(np.asarray(residual)[:, None])
    table = np.hstack([b.reshape(len(traj), -1) for b in blocks])
    for row in table:
        fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: str) -> tuple[dict[str, str], list[str], np.ndarray]:
    """Metadata, header and data of a file written by :func:`write_csv`."""
    meta: dict[str, str] = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line:
            body.append(line)
    header = body[0].split(",")
    data = np.array([[float(c) for c in row.split(",")] for row in body[1:]]).reshape(-1, len(header))
    return meta, header, data
