"""Pair enumeration, partitioning and parallel execution.

Two enumeration modes:

* ``cross``: for every unordered file pair ``i <= j`` (self pairs included)
  the full ``m_i x m_j`` variant cross product in row-major order.
* ``distinct``: every unordered pair of distinct variants once.

The task sequence is split into contiguous partitions that run on a thread
pool. Each partition writes into its own buffer and buffers are concatenated
in partition order, so results never depend on thread count or completion
order.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, RunAborted
from .genotypes import GenotypeFile, PhenotypeLabels, parse_genotype_file, parse_labels
from .mdr import (
    MdrConfig,
    PairResult,
    PreparedBlock,
    PreparedCohort,
    consistency_counts,
    fold_counts,
    fold_errors_from_counts,
    mean_errors,
    ranking_order,
)
from .timing import StageTimings, stage

log = logging.getLogger(__name__)


class PairMode(str, Enum):
    CROSS = "cross"
    DISTINCT = "distinct"


def default_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def count_tasks(sizes: Sequence[int], mode: PairMode | str = PairMode.CROSS) -> int:
    """Task count without materialising anything; exact for any sizes."""
    sizes = [int(m) for m in sizes]
    if PairMode(mode) is PairMode.DISTINCT:
        total = sum(sizes)
        return total * (total - 1) // 2
    return sum(sizes[i] * sizes[j] for i in range(len(sizes)) for j in range(i, len(sizes)))


def _sizes(files) -> list[int]:
    return [f if isinstance(f, (int, np.integer)) else len(f) for f in files]


def enumerate_pairs(files, mode: PairMode | str = PairMode.CROSS) -> np.ndarray:
    """``(T, 4)`` array of ``(file_a, index_a, file_b, index_b)`` in global order.

    ``files`` is a sequence of :class:`GenotypeFile` or plain variant counts.
    """
    sizes = _sizes(files)
    blocks = []
    if PairMode(mode) is PairMode.CROSS:
        for i, mi in enumerate(sizes):
            for j in range(i, len(sizes)):
                mj = sizes[j]
                ia, ib = np.divmod(np.arange(mi * mj, dtype=np.int64), mj)
                block = np.empty((mi * mj, 4), dtype=np.int64)
                block[:, 0], block[:, 1], block[:, 2], block[:, 3] = i, ia, j, ib
                blocks.append(block)
    else:
        fid = np.concatenate([np.full(m, i, dtype=np.int64) for i, m in enumerate(sizes)] or [[]])
        idx = np.concatenate([np.arange(m, dtype=np.int64) for m in sizes] or [[]])
        u, v = np.triu_indices(len(fid), k=1)
        blocks.append(np.stack([fid[u], idx[u], fid[v], idx[v]], axis=1).astype(np.int64))
    if not blocks:
        return np.zeros((0, 4), dtype=np.int64)
    return np.ascontiguousarray(np.concatenate(blocks))


@dataclass(frozen=True)
class Partition:
    partition_id: int
    start: int
    stop: int

    def __len__(self) -> int:
        return self.stop - self.start


def partition_tasks(total: int, n_partitions: int, offset: int = 0) -> list[Partition]:
    """Contiguous near-equal ranges; the first ``total % n`` get one extra task."""
    if n_partitions < 1:
        raise ValueError("n_partitions must be >= 1")
    base, extra = divmod(total, n_partitions)
    parts, start = [], offset
    for pid in range(n_partitions):
        size = base + (pid < extra)
        parts.append(Partition(pid, start, start + size))
        start += size
    return parts


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ResultSet:
    """Pair results in global enumeration order, stored column-wise."""

    tasks: np.ndarray
    fold_errors: np.ndarray
    consistency: np.ndarray = None
    # Means as read from a results file; recomputing them from rounded fold errors can drift.
    stored_means: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.consistency is None:
            self.consistency = np.full(len(self.tasks), -1, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.tasks)

    @property
    def k(self) -> int:
        return self.fold_errors.shape[1]

    @property
    def mean_error(self) -> np.ndarray:
        if self.stored_means is not None:
            return self.stored_means
        return mean_errors(self.fold_errors)

    def __getitem__(self, i: int) -> PairResult:
        return PairResult(
            pair=tuple(int(v) for v in self.tasks[i]),
            fold_errors=tuple(float(e) for e in self.fold_errors[i]),
            mean_error=float(self.mean_error[i]),
            consistency=int(self.consistency[i]),
        )

    def to_list(self) -> list[PairResult]:
        return [self[i] for i in range(len(self))]

    def select(self, top_fraction: float) -> np.ndarray:
        """Fill consistency in place; return ranking order indices."""
        self.consistency = consistency_counts(self.tasks, self.fold_errors, top_fraction)
        return self.ranking()

    def ranking(self) -> np.ndarray:
        return ranking_order(self.tasks, self.mean_error, self.consistency)

    def ranked(self) -> list[PairResult]:
        return [self[i] for i in self.ranking()]

    def checksum(self) -> str:
        """Order-sensitive 64-bit hash of coordinates and fold errors (rounded to 1e-12)."""
        h = hashlib.blake2b(digest_size=8)
        h.update(np.ascontiguousarray(self.tasks, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(np.round(self.fold_errors, 12), dtype="<f8").tobytes())
        return h.hexdigest()

    def identical_to(self, other: "ResultSet") -> bool:
        return (
            np.array_equal(self.tasks, other.tasks)
            and self.fold_errors.tobytes() == other.fold_errors.tobytes()
            and np.array_equal(self.consistency, other.consistency)
        )


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class LoadedCohort:
    files: list[GenotypeFile]
    labels: PhenotypeLabels
    cfg: MdrConfig
    cohort: PreparedCohort = field(init=False)
    blocks: list[PreparedBlock] = field(init=False)

    def __post_init__(self) -> None:
        n = len(self.labels)
        for f in self.files:
            if f.variants and f.n_patients != n:
                raise LengthMismatch(
                    f"{f.source_path}: {f.n_patients} patients but labels list {n}"
                )
        self.cohort = PreparedCohort.build(self.labels, self.cfg)
        self.blocks = [PreparedBlock.from_codes(f.code_matrix(), self.cfg.kernel) for f in self.files]

    @property
    def sizes(self) -> list[int]:
        return [len(f) for f in self.files]


def load_cohort(paths: Sequence[str | os.PathLike], labels_path, cfg: MdrConfig) -> LoadedCohort:
    labels = parse_labels(labels_path)
    files = [
        parse_genotype_file(p, expected_patients=len(labels), file_id=i) for i, p in enumerate(paths)
    ]
    return LoadedCohort(files, labels, cfg)


def score_tasks(data: LoadedCohort, tasks: np.ndarray) -> np.ndarray:
    """``(len(tasks), k)`` fold errors, computed one file-pair segment at a time."""
    out = np.empty((len(tasks), data.cfg.k), dtype=np.float64)
    if len(tasks) == 0:
        return out
    key = tasks[:, 0] * (len(data.files) + 1) + tasks[:, 2]
    cuts = np.flatnonzero(np.diff(key)) + 1
    bounds = np.concatenate([[0], cuts, [len(tasks)]])
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        fa, fb = int(tasks[lo, 0]), int(tasks[lo, 2])
        # the numba kernels do not bounds-check
        seg = tasks[lo:hi]
        if seg[:, [1, 3]].min() < 0 or seg[:, 1].max() >= len(data.files[fa]) or seg[:, 3].max() >= len(
            data.files[fb]
        ):
            raise IndexError(f"variant index out of range for files {fa}/{fb}")
        counts = fold_counts(data.blocks[fa], data.blocks[fb], tasks[lo:hi][:, [1, 3]], data.cohort)
        out[lo:hi] = fold_errors_from_counts(counts, data.cohort.t, data.cfg)
    return out


def compute_range(
    data: LoadedCohort,
    tasks: np.ndarray,
    n_threads: int = 1,
    n_partitions: int | None = None,
) -> np.ndarray:
    """Score ``tasks`` on ``n_threads`` threads over contiguous partitions."""
    n_threads = max(1, int(n_threads))
    n_partitions = n_partitions or 4 * n_threads
    parts = partition_tasks(len(tasks), n_partitions)
    buffers: list[np.ndarray | None] = [None] * len(parts)
    if n_threads == 1:
        for p in parts:
            try:
                buffers[p.partition_id] = score_tasks(data, tasks[p.start : p.stop])
            except Exception as exc:
                raise RunAborted(
                    f"partition {p.partition_id} failed: {exc}", completed=p.start, total=len(tasks)
                ) from exc
    else:
        with ThreadPoolExecutor(max_workers=n_threads, thread_name_prefix="epimdr") as pool:
            futures = {pool.submit(score_tasks, data, tasks[p.start : p.stop]): p for p in parts}
            done, pending = wait(futures, return_when=FIRST_EXCEPTION)
            for fut in pending:
                fut.cancel()
            for fut, p in futures.items():
                if fut in done and fut.exception() is None:
                    buffers[p.partition_id] = fut.result()
            failed = [(futures[f], f.exception()) for f in done if f.exception() is not None]
            if failed:
                p, exc = min(failed, key=lambda item: item[0].partition_id)
                completed = sum(len(q) for q, b in zip(parts, buffers) if b is not None)
                raise RunAborted(
                    f"partition {p.partition_id} failed: {exc}", completed=completed, total=len(tasks)
                ) from exc
    if not parts:
        return np.empty((0, data.cfg.k))
    return np.concatenate(buffers)


@dataclass
class RunManifest:
    files: list[Path]
    labels: Path
    cfg: MdrConfig = field(default_factory=MdrConfig)
    pair_mode: PairMode = PairMode.CROSS
    n_threads: int = field(default_factory=default_threads)
    n_partitions: int | None = None
    out: Path | None = None

    def __post_init__(self) -> None:
        self.files = [Path(p) for p in self.files]
        self.labels = Path(self.labels)
        self.pair_mode = PairMode(self.pair_mode)
        if self.n_threads < 1:
            raise ValueError("n_threads must be >= 1")


@dataclass(eq=False)
class RunOutcome:
    results: ResultSet
    timings: StageTimings
    order: np.ndarray

    def ranked(self) -> list[PairResult]:
        return [self.results[i] for i in self.order]


def run_loaded(
    data: LoadedCohort,
    pair_mode: PairMode | str = PairMode.CROSS,
    n_threads: int = 1,
    n_partitions: int | None = None,
    timings: StageTimings | None = None,
) -> tuple[ResultSet, np.ndarray]:
    timings = timings if timings is not None else StageTimings()
    with stage(timings, "compute"):
        tasks = enumerate_pairs(data.sizes, pair_mode)
        errors = compute_range(data, tasks, n_threads, n_partitions)
        results = ResultSet(tasks, errors)
        order = results.select(data.cfg.top_fraction)
    return results, order


def run_all(manifest: RunManifest) -> RunOutcome:
    """Load, score every enumerated pair, rank, and optionally write results."""
    from .results import write_results

    timings = StageTimings()
    with stage(timings, "load"):
        data = load_cohort(manifest.files, manifest.labels, manifest.cfg)
    log.info("loaded %d files, %d patients", len(data.files), len(data.labels))
    results, order = run_loaded(
        data, manifest.pair_mode, manifest.n_threads, manifest.n_partitions, timings
    )
    if manifest.out is not None:
        with stage(timings, "save"):
            write_results(results, manifest.out, order)
    return RunOutcome(results, timings, order)
