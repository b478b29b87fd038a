"""Results CSV: one ranked row per pair, fold errors with 6 decimals."""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .engine import ResultSet
from .errors import MalformedRow


def results_header(k: int) -> list[str]:
    return (
        ["file_a", "index_a", "file_b", "index_b"]
        + [f"err_fold{i}" for i in range(k)]
        + ["mean_error", "consistency", "self_pair"]
    )


def write_results(results: ResultSet, path: str | os.PathLike, order: np.ndarray | None = None) -> Path:
    path = Path(path)
    order = results.ranking() if order is None else order
    means = results.mean_error
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(results_header(results.k))
        for i in order:
            fa, ia, fb, ib = (int(v) for v in results.tasks[i])
            writer.writerow(
                [fa, ia, fb, ib]
                + [f"{e:.6f}" for e in results.fold_errors[i]]
                + [f"{means[i]:.6f}", int(results.consistency[i]), int((fa, ia) == (fb, ib))]
            )
    return path


def read_results(path: str | os.PathLike) -> ResultSet:
    """Read a results CSV back; errors carry only the written 6 decimals."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["file_a", "index_a", "file_b", "index_b"]:
            raise MalformedRow(f"{path}: missing results header")
        k = sum(1 for h in header if h.startswith("err_fold"))
        if header != results_header(k):
            raise MalformedRow(f"{path}: unexpected results header")
        tasks, errs, means, cons = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRow(f"{path} line {lineno}: {len(row)} fields, expected {len(header)}")
            tasks.append([int(v) for v in row[:4]])
            errs.append([float(v) for v in row[4 : 4 + k]])
            means.append(float(row[4 + k]))
            cons.append(int(row[5 + k]))
    return ResultSet(
        tasks=np.array(tasks, dtype=np.int64).reshape(-1, 4),
        fold_errors=np.array(errs, dtype=np.float64).reshape(-1, k),
        consistency=np.array(cons, dtype=np.int64),
        stored_means=np.array(means, dtype=np.float64),
    )
