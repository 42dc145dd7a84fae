"""Headered CSV files for vectors, matrices and whole instances."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from ..core import ProblemInstance

__all__ = ["write_vector", "read_vector", "write_matrix", "read_matrix", "write_instance",
           "read_instance"]


def write_vector(path, x):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(x, dtype=np.float64).tolist()):
            w.writerow([i, repr(v)])


def read_vector(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise ValueError(f"{path}: expected columns index,value")
    idx = [int(r["index"]) for r in rows]
    if idx != list(range(len(idx))):
        raise ValueError(f"{path}: indices must run 0..n-1 in order")
    return np.array([float(r["value"]) for r in rows])


def write_matrix(path, a):
    a = np.asarray(a, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"c{j}" for j in range(a.shape[1])])
        for row in a.tolist():
            w.writerow([repr(v) for v in row])


def read_matrix(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if any(len(r) != len(header) for r in rows):
        raise ValueError(f"{path}: ragged matrix")
    return np.array(rows)


def write_instance(directory, inst: ProblemInstance, meta: dict | None = None):
    """Write ``phi.csv``, ``y.csv``, ``x_star.csv``, ``noise.csv`` and ``instance.json``."""
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, "phi.csv"), inst.phi)
    write_vector(os.path.join(directory, "y.csv"), inst.y)
    write_vector(os.path.join(directory, "x_star.csv"), inst.x_star)
    write_vector(os.path.join(directory, "noise.csv"), inst.noise)
    info = {"m": inst.m, "n": inst.n, "seed": inst.seed, "lambda": repr(float(inst.lam)),
            "noise_energy": inst.noise_energy, "support": list(inst.support.indices)}
    info.update(meta or {})
    with open(os.path.join(directory, "instance.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2)


def read_instance(directory) -> dict:
    """Arrays and metadata of an instance directory, as a plain dict."""
    with open(os.path.join(directory, "instance.json"), encoding="utf-8") as fh:
        info = json.load(fh)
    info["phi"] = read_matrix(os.path.join(directory, "phi.csv"))
    for name in ("y", "x_star", "noise"):
        info[name] = read_vector(os.path.join(directory, f"{name}.csv"))
    info["lambda"] = float(info["lambda"])
    return info
