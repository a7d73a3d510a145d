"""Plain-text and CSV formats for samples, packings, estimates and operator dumps."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .pointproc import BoxDomain
from .sampler import SampleBatch

ESTIMATOR_HEADER = ("statistic", "n_or_t", "estimate", "ci_low", "ci_high", "n_samples", "seed")
IDS_HEADER = ("lambda", "n_hat", "ci_low", "ci_high", "L", "h", "replicas", "model_id", "seed")
NORM_HEADER = ("u_id", "S_id", "resolution", "value", "slack", "witness_size")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Comma-separated, header row, LF line endings, UTF-8; floats written round-trip exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def format_points(points: np.ndarray, digits: int) -> str:
    flat = np.asarray(points, float).ravel()
    return " ".join([str(len(points))] + [f"{x:.{digits}f}" for x in flat])


def write_samples(path, batch: SampleBatch, digits: int = 12) -> Path:
    """One configuration per line: ``n`` followed by the n*d coordinates in fixed-point decimal."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for cfg in batch:
            fh.write(format_points(cfg.points, digits) + "\n")
    return path


def read_samples(path, domain: BoxDomain) -> SampleBatch:
    d = domain.dim
    coords, sizes = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        tok = line.split()
        n = int(tok[0])
        vals = np.array(tok[1:], float)
        if len(vals) != n * d:
            raise ValueError(f"line declares {n} points but holds {len(vals)} coordinates")
        coords.append(vals.reshape(n, d))
        sizes.append(n)
    flat = np.concatenate(coords) if coords else np.empty((0, d))
    return SampleBatch(flat, np.asarray(sizes, np.int64), domain)


def write_packings(path, packings, digits: int = 12) -> Path:
    """One packing per line: ``k`` followed by the k*d coordinates."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for p in packings:
            fh.write(format_points(p.points, digits) + "\n")
    return path


def read_packings(path, dim: int) -> list[np.ndarray]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            tok = line.split()
            out.append(np.array(tok[1:], float).reshape(int(tok[0]), dim))
    return out
