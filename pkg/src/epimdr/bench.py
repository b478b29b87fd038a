"""Scaling-matrix benchmark harness.

A grid sweeps file count x threads x workers x kernel, running each cell
``repetitions`` times strictly one after another. Every record keeps the
load/compute/save split, cycle-normalised totals (seconds x nominal clock
frequency) and a result checksum, so any two cells over the same input can
be checked for identical answers.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
import platform
import statistics
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ._accel import backend_name
from .cohort import read_manifest
from .distributed import DistributionMode, run_local_cluster
from .engine import PairMode, RunManifest, default_threads, run_all
from .errors import ZeroBaseline
from .mdr import Kernel, MdrConfig
from .timing import StageTimings

log = logging.getLogger(__name__)

FREQ_ENV = "EPI_FREQ_HZ"
DEFAULT_FREQ_HZ = 1.0e9

REPORT_COLUMNS = [
    "files", "threads", "workers", "kernel", "rep",
    "load_s", "compute_s", "save_s", "total_s",
    "freq_hz", "cycles_total", "checksum", "status",
]  # fmt: skip


def resolve_frequency(value: float | None = None) -> float:
    """``value`` if given, else ``$EPI_FREQ_HZ``, else 1 GHz."""
    if value is None:
        env = os.environ.get(FREQ_ENV)
        value = float(env) if env else DEFAULT_FREQ_HZ
    if not value > 0:
        raise ValueError(f"frequency must be positive, got {value}")
    return float(value)


@dataclass(frozen=True)
class CycleMetrics:
    frequency_hz: float
    cycles_load: float
    cycles_compute: float
    cycles_save: float

    @property
    def cycles_total(self) -> float:
        return self.cycles_load + self.cycles_compute + self.cycles_save


def to_cycles(timings: StageTimings, frequency_hz: float) -> CycleMetrics:
    if not frequency_hz > 0:
        raise ValueError("frequency_hz must be positive")
    return CycleMetrics(
        frequency_hz=frequency_hz,
        cycles_load=timings.load_seconds * frequency_hz,
        cycles_compute=timings.compute_seconds * frequency_hz,
        cycles_save=timings.save_seconds * frequency_hz,
    )


def slowdown(subject: CycleMetrics, baseline: CycleMetrics) -> float:
    """How many times more cycles ``subject`` needed than ``baseline``."""
    if baseline.cycles_total <= 0:
        raise ZeroBaseline("baseline has no cycles")
    return subject.cycles_total / baseline.cycles_total


@dataclass
class ExperimentGrid:
    data_manifest: Path
    file_counts: list[int] = field(default_factory=lambda: [1, 3, 5])
    thread_counts: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    worker_counts: list[int] = field(default_factory=lambda: [1])
    kernels: list[Kernel] = field(default_factory=lambda: [Kernel.BITPACKED])
    repetitions: int = 3
    cfg: MdrConfig = field(default_factory=MdrConfig)
    pair_mode: PairMode = PairMode.CROSS
    distribution_mode: DistributionMode = DistributionMode.SHIP
    frequency_hz: float = field(default_factory=resolve_frequency)

    def __post_init__(self) -> None:
        self.data_manifest = Path(self.data_manifest)
        self.kernels = [Kernel(k) for k in self.kernels]
        self.distribution_mode = DistributionMode(self.distribution_mode)
        self.pair_mode = PairMode(self.pair_mode)
        for name in ("file_counts", "thread_counts", "worker_counts", "kernels"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"{name} must not be empty")
        if min(self.file_counts + self.thread_counts + self.worker_counts) < 1:
            raise ValueError("grid counts must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def cells(self) -> list[tuple[int, int, int, Kernel]]:
        return [
            (f, t, w, k)
            for f in self.file_counts
            for t in self.thread_counts
            for w in self.worker_counts
            for k in self.kernels
        ]


@dataclass
class BenchRecord:
    files: int
    threads: int
    workers: int
    kernel: str
    rep: int
    load_s: float = 0.0
    compute_s: float = 0.0
    save_s: float = 0.0
    total_s: float = 0.0
    freq_hz: float = 0.0
    cycles_total: float = 0.0
    checksum: str = ""
    status: str = "ok"
    distribute_s: float = 0.0
    error: str = ""

    @property
    def timings(self) -> StageTimings:
        return StageTimings(self.load_s, self.compute_s, self.save_s)

    @property
    def cycles(self) -> CycleMetrics:
        return to_cycles(self.timings, self.freq_hz)


@dataclass
class BenchReport:
    records: list[BenchRecord] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def ok_records(self) -> list[BenchRecord]:
        return [r for r in self.records if r.status == "ok"]

    def checksums_by_files(self) -> dict[int, set[str]]:
        groups: dict[int, set[str]] = {}
        for r in self.ok_records():
            groups.setdefault(r.files, set()).add(r.checksum)
        return groups

    def checksums_consistent(self) -> bool:
        return all(len(s) == 1 for s in self.checksums_by_files().values())

    def median(self, attr: str, **coords) -> float:
        values = [
            getattr(r, attr)
            for r in self.ok_records()
            if all(getattr(r, k) == v for k, v in coords.items())
        ]
        if not values:
            raise KeyError(f"no ok records for {coords}")
        return statistics.median(values)

    def to_dict(self) -> dict:
        return {"environment": self.environment, "records": [asdict(r) for r in self.records]}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls([BenchRecord(**r) for r in d["records"]], dict(d.get("environment", {})))


def environment_block(frequency_hz: float) -> dict:
    return {
        "host": platform.node(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "backend": backend_name(),
        "cpu_count": default_threads(),
        "frequency_hz": frequency_hz,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def run_cell(
    files: Sequence[Path],
    labels: Path,
    cfg: MdrConfig,
    threads: int,
    workers: int,
    pair_mode: PairMode,
    distribution_mode: DistributionMode,
    out: Path | None = None,
):
    """One measured run; returns ``(results, StageTimings, distribution_seconds)``."""
    manifest = RunManifest(list(files), labels, cfg, pair_mode, n_threads=threads, out=out)
    if workers == 1:
        outcome = run_all(manifest)
        return outcome.results, outcome.timings, 0.0
    outcome = run_local_cluster(manifest, workers, distribution_mode, threads_per_worker=threads)
    return outcome.results, outcome.timings, outcome.distribution_seconds


def run_grid(grid: ExperimentGrid, progress=None) -> BenchReport:
    """Execute every grid cell ``repetitions`` times, sequentially.

    A failing cell is recorded with status ``failed`` and the sweep goes on.
    """
    paths, labels = read_manifest(grid.data_manifest)
    report = BenchReport(environment=environment_block(grid.frequency_hz))
    report.environment["grid"] = {
        "file_counts": grid.file_counts,
        "thread_counts": grid.thread_counts,
        "worker_counts": grid.worker_counts,
        "kernels": [k.value for k in grid.kernels],
        "repetitions": grid.repetitions,
        "pair_mode": grid.pair_mode.value,
        "distribution_mode": grid.distribution_mode.value,
        "mdr": grid.cfg.to_dict(),
    }
    with tempfile.TemporaryDirectory(prefix="epimdr-bench-") as scratch:
        for n_files, threads, workers, kernel in grid.cells():
            cfg = MdrConfig(**{**grid.cfg.to_dict(), "kernel": kernel})
            for rep in range(grid.repetitions):
                rec = BenchRecord(n_files, threads, workers, kernel.value, rep, freq_hz=grid.frequency_hz)
                try:
                    if n_files > len(paths):
                        raise ValueError(f"grid asks for {n_files} files, cohort has {len(paths)}")
                    results, timings, dist = run_cell(
                        paths[:n_files],
                        labels,
                        cfg,
                        threads,
                        workers,
                        grid.pair_mode,
                        grid.distribution_mode,
                        out=Path(scratch) / "results.csv",
                    )
                    rec.load_s, rec.compute_s, rec.save_s = (
                        timings.load_seconds,
                        timings.compute_seconds,
                        timings.save_seconds,
                    )
                    rec.total_s = timings.total_seconds
                    rec.cycles_total = to_cycles(timings, grid.frequency_hz).cycles_total
                    rec.checksum = results.checksum()
                    rec.distribute_s = dist
                except Exception as exc:
                    log.warning("cell files=%d threads=%d workers=%d kernel=%s failed: %s",
                                n_files, threads, workers, kernel.value, exc)
                    rec.status = "failed"
                    rec.error = str(exc)
                report.records.append(rec)
                if progress is not None:
                    progress(rec)
    return report


def emit_report(report: BenchReport, fmt: str, path: str | os.PathLike) -> Path:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for r in report.records:
                writer.writerow([getattr(r, c) for c in REPORT_COLUMNS])
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def load_report(path: str | os.PathLike) -> BenchReport:
    path = Path(path)
    if path.suffix == ".json":
        return BenchReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = []
    for row in rows:
        rec = BenchRecord(
            files=int(row["files"]),
            threads=int(row["threads"]),
            workers=int(row["workers"]),
            kernel=row["kernel"],
            rep=int(row["rep"]),
            checksum=row["checksum"],
            status=row["status"],
        )
        for name in ("load_s", "compute_s", "save_s", "total_s", "freq_hz", "cycles_total"):
            setattr(rec, name, float(row[name]))
        records.append(rec)
    return BenchReport(records)


def summarize(report: BenchReport, baseline_kernel: str = Kernel.BITPACKED.value) -> list[dict]:
    """Median per cell plus cycle slow-down against ``baseline_kernel`` at the same coordinates."""
    keys = sorted({(r.files, r.threads, r.workers, r.kernel) for r in report.ok_records()})
    rows = []
    for files, threads, workers, kernel in keys:
        coords = dict(files=files, threads=threads, workers=workers)
        row = {
            **coords,
            "kernel": kernel,
            "median_compute_s": report.median("compute_s", kernel=kernel, **coords),
            "median_total_s": report.median("total_s", kernel=kernel, **coords),
            "median_cycles": report.median("cycles_total", kernel=kernel, **coords),
        }
        try:
            base = report.median("cycles_total", kernel=baseline_kernel, **coords)
            row["slowdown_vs_" + baseline_kernel] = row["median_cycles"] / base if base > 0 else None
        except KeyError:
            pass
        rows.append(row)
    return rows


def iter_summary_lines(rows: Iterable[dict]) -> Iterable[str]:
    for row in rows:
        yield "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items())
