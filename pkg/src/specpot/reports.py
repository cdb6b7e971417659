"""Report and artifact writers: JSON for scalars and verdicts, CSV for vectors.

JSON is written with sorted keys so identical runs produce byte-identical
files (the timestamp field is the one intentional exception).
"""
from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import GapCertificate, GramCertificate
from .domain import DomainGrid
from .spectral import SpectralData


def new_report(command: str, config_echo: dict) -> dict:
    return {
        "command": command,
        "config": config_echo,
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "verdicts": [],
        "artifacts": {},
    }


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def fmt(x) -> str:
    return repr(float(x))


def eigenvalues_payload(spec: SpectralData) -> list[float]:
    return [float(v) for v in spec.eigenvalues]


def write_eigenvectors_csv(grid: DomainGrid, spec: SpectralData, path) -> None:
    modes = spec.eigenvectors.shape[1]
    header = (["x"] if grid.ndim == 1 else ["x", "y"]) + ["w"] + [f"f{i+1}" for i in range(modes)]
    rows = []
    for idx in range(grid.n_nodes):
        coords = [grid.coords[idx]] if grid.ndim == 1 else list(grid.coords[idx])
        rows.append([fmt(c) for c in coords] + [fmt(grid.weights[idx])]
                    + [fmt(spec.eigenvectors[idx, j]) for j in range(modes)])
    write_csv(path, header, rows)


def write_potential_csv(grid: DomainGrid, values: np.ndarray, path) -> None:
    if grid.ndim == 1:
        write_csv(path, ["x", "q"], ([fmt(x), fmt(v)] for x, v in zip(grid.coords, values)))
    else:
        write_csv(path, ["x", "y", "q"],
                  ([fmt(c[0]), fmt(c[1]), fmt(v)] for c, v in zip(grid.coords, values)))


def write_direction_csv(grid: DomainGrid, values: np.ndarray, path) -> None:
    if grid.ndim == 1:
        write_csv(path, ["x", "u"], ([fmt(x), fmt(v)] for x, v in zip(grid.coords, values)))
    else:
        write_csv(path, ["x", "y", "u"],
                  ([fmt(c[0]), fmt(c[1]), fmt(v)] for c, v in zip(grid.coords, values)))


def gram_to_list(G: np.ndarray | None) -> list[float] | None:
    if G is None:
        return None
    return [float(v) for v in np.asarray(G).ravel()]  # row-major


def certificate_payload(cert: GramCertificate, direction_csv: str | None = None) -> dict:
    return {
        "status": cert.status.value,
        "gram_row_major": gram_to_list(cert.gram),
        "residual": float(cert.residual),
        "iterations": cert.iterations,
        "margin": None if cert.margin is None else float(cert.margin),
        "separating_direction_csv": direction_csv,
    }


def gap_certificate_payload(cert: GapCertificate, direction_csv: str | None = None) -> dict:
    return {
        "status": cert.status.value,
        "gram_i_row_major": gram_to_list(cert.gram_i),
        "gram_j_row_major": gram_to_list(cert.gram_j),
        "residual": float(cert.residual),
        "iterations": cert.iterations,
        "margin": None if cert.margin is None else float(cert.margin),
        "degenerate": cert.degenerate,
        "separating_direction_csv": direction_csv,
    }


def verdict(name: str, passed: bool, measured, tolerance) -> dict:
    return {
        "name": name,
        "passed": bool(passed),
        "measured": None if measured is None else float(measured),
        "tolerance": None if tolerance is None else float(tolerance),
    }
