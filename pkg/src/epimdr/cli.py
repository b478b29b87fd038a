"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime or cluster
error. Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import (
    DEFAULT_FREQ_HZ,
    FREQ_ENV,
    ExperimentGrid,
    emit_report,
    iter_summary_lines,
    load_report,
    resolve_frequency,
    run_grid,
    summarize,
)
from .cohort import GeneratorConfig, PlantedSignal, generate_cohort, read_manifest
from .distributed import ClusterConfig, DistributionMode, coordinate, work
from .engine import PairMode, RunManifest, default_threads, run_all
from .errors import DataError, RuntimeFailure
from .mdr import CellPolicy, Kernel, MdrConfig
from .results import read_results, write_results

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("epimdr")

_GEN = GeneratorConfig()
_PLANT = PlantedSignal(0, 0, 0, 1)
_MDR = MdrConfig()
_CLUSTER = ClusterConfig()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _coord(text: str) -> tuple[int, int]:
    try:
        f, i = text.split(":")
        return int(f), int(i)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FILE:INDEX, got {text!r}") from None


def _add_mdr_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("MDR")
    g.add_argument("--k", type=int, default=_MDR.k, help="cross-validation folds")
    g.add_argument("--top-fraction", type=float, default=_MDR.top_fraction,
                   help="fraction of pairs marked per fold")
    g.add_argument("--empty-cell-policy", choices=[c.value for c in CellPolicy],
                   default=_MDR.empty_cell_policy.value, help="risk label for cells with no patients")
    g.add_argument("--tie-policy", choices=[c.value for c in CellPolicy],
                   default=_MDR.tie_policy.value, help="risk label when ratio equals the threshold")
    g.add_argument("--kernel", choices=[k.value for k in Kernel], default=_MDR.kernel.value,
                   help="contingency counting kernel")
    g.add_argument("--seed", type=int, default=_MDR.seed, help="fold assignment seed")
    g.add_argument("--pair-mode", choices=[m.value for m in PairMode], default=PairMode.CROSS.value,
                   help="cross: file-vs-file cross product; distinct: unordered distinct pairs")


def _add_input_flags(p: argparse.ArgumentParser, required_labels: bool = True) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--files", nargs="+", type=Path, default=None,
                   help="genotype files in file-id order")
    g.add_argument("--manifest", type=Path, default=None,
                   help="cohort manifest (genotype files, then label file)")
    g.add_argument("--labels", type=Path, default=None, help="label file (overrides manifest)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="epimdr", description="Pairwise MDR epistasis engine.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", default=False, help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic cohort", formatter_class=fmt)
    p.add_argument("--files", type=int, default=_GEN.n_files, help="genotype files")
    p.add_argument("--variants", type=int, default=_GEN.variants_per_file, help="variants per file")
    p.add_argument("--patients", type=int, default=_GEN.n_patients, help="patients")
    p.add_argument("--case-fraction", type=float, default=_GEN.case_fraction,
                   help="case probability without a planted pair")
    p.add_argument("--seed", type=int, default=_GEN.seed, help="generator seed")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--plant", nargs=2, type=_coord, metavar="FILE:INDEX", default=None,
                   help="plant an interacting pair at these coordinates")
    p.add_argument("--high-risk-cells", type=_int_list, default=sorted(_PLANT.high_risk_cells),
                   help="planted high-risk cells (3*code_a + code_b)")
    p.add_argument("--p-case-high", type=float, default=_PLANT.p_case_high,
                   help="case probability in planted high-risk cells")
    p.add_argument("--p-case-low", type=float, default=_PLANT.p_case_low,
                   help="case probability in other cells")
    p.add_argument("--no-gzip", action="store_true", default=not _GEN.compress,
                   help="write plain .csv instead of .csv.gz")

    p = sub.add_parser("run", help="score all pairs and rank them", formatter_class=fmt)
    _add_input_flags(p)
    _add_mdr_flags(p)
    p.add_argument("--threads", type=int, default=default_threads(), help="worker threads")
    p.add_argument("--partitions", type=int, default=None, help="task partitions (4x threads if unset)")
    p.add_argument("--out", type=Path, default=Path("results.csv"), help="results CSV")

    p = sub.add_parser("select", help="re-rank an existing results CSV", formatter_class=fmt)
    p.add_argument("--results", type=Path, required=True, help="results CSV from 'run'")
    p.add_argument("--top-fraction", type=float, default=_MDR.top_fraction,
                   help="fraction of pairs marked per fold")
    p.add_argument("--out", type=Path, default=None, help="output CSV (stdout if unset)")

    p = sub.add_parser("bench", help="run a scaling matrix", formatter_class=fmt)
    p.add_argument("--data", type=Path, required=True, help="cohort manifest or directory holding manifest.txt")
    p.add_argument("--files-grid", type=_int_list, default=[1, 3, 5], help="file counts")
    p.add_argument("--threads-grid", type=_int_list, default=[1, 2, 3, 4], help="thread counts")
    p.add_argument("--workers-grid", type=_int_list, default=[1], help="worker counts")
    p.add_argument("--kernels", type=lambda s: [Kernel(k) for k in s.split(",")],
                   default=[Kernel.BITPACKED], help="kernels to sweep")
    p.add_argument("--reps", type=int, default=3, help="repetitions per cell")
    p.add_argument("--mode", choices=[m.value for m in DistributionMode],
                   default=DistributionMode.SHIP.value, help="data distribution for multi-worker cells")
    p.add_argument("--freq-hz", type=float, default=None,
                   help=f"nominal clock frequency (falls back to ${FREQ_ENV}, then {DEFAULT_FREQ_HZ:g})")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="report format")
    p.add_argument("--out", type=Path, default=Path("bench.json"), help="report path")
    _add_mdr_flags(p)

    p = sub.add_parser("serve", help="coordinate a worker cluster", formatter_class=fmt)
    p.add_argument("--listen", default="0.0.0.0:7500", help="host:port to listen on")
    p.add_argument("--workers", type=int, default=_CLUSTER.expected_workers, help="workers to wait for")
    p.add_argument("--mode", choices=[m.value for m in DistributionMode],
                   default=_CLUSTER.distribution_mode.value, help="ship data at run time or use preloaded copies")
    p.add_argument("--worker-threads", type=int, default=_CLUSTER.threads_per_worker,
                   help="threads each worker uses")
    p.add_argument("--timeout", type=float, default=_CLUSTER.handshake_timeout,
                   help="seconds to wait for workers to connect")
    p.add_argument("--out", type=Path, default=Path("results.csv"), help="results CSV")
    _add_input_flags(p)
    _add_mdr_flags(p)

    p = sub.add_parser("work", help="run as a cluster worker", formatter_class=fmt)
    p.add_argument("--connect", required=True, help="coordinator host:port")
    p.add_argument("--data", type=Path, default=None, help="local copy of the cohort (preloaded mode)")
    p.add_argument("--threads", type=int, default=1, help="threads offered to the coordinator")

    p = sub.add_parser("report", help="summarise or convert a bench report", formatter_class=fmt)
    p.add_argument("--input", type=Path, required=True, help="bench report (.json or .csv)")
    p.add_argument("--format", choices=["json", "csv"], default=None, help="convert to this format")
    p.add_argument("--out", type=Path, default=None, help="converted report path")
    p.add_argument("--baseline", choices=[k.value for k in Kernel], default=Kernel.BITPACKED.value,
                   help="kernel used as slow-down baseline")
    return parser


def _mdr_from_args(args) -> MdrConfig:
    return MdrConfig(
        k=args.k,
        top_fraction=args.top_fraction,
        empty_cell_policy=args.empty_cell_policy,
        tie_policy=args.tie_policy,
        kernel=args.kernel,
        seed=args.seed,
    )


def _inputs_from_args(args) -> tuple[list[Path], Path]:
    files, labels = args.files, args.labels
    if args.manifest is not None:
        m_files, m_labels = read_manifest(args.manifest)
        files = files or m_files
        labels = labels or m_labels
    if not files:
        raise UsageError("give --files or --manifest")
    if labels is None:
        raise UsageError("give --labels or --manifest")
    for path in [*files, labels]:
        if not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")
    return list(files), labels


def cmd_generate(args) -> int:
    planted = None
    if args.plant:
        (fa, ia), (fb, ib) = args.plant
        planted = PlantedSignal(fa, ia, fb, ib, frozenset(args.high_risk_cells),
                                args.p_case_high, args.p_case_low)
    cfg = GeneratorConfig(args.files, args.variants, args.patients, args.case_fraction,
                          args.seed, planted, compress=not args.no_gzip)
    manifest = generate_cohort(cfg, args.out)
    sys.stdout.write(manifest.text())
    return EXIT_OK


def cmd_run(args) -> int:
    files, labels = _inputs_from_args(args)
    manifest = RunManifest(files, labels, _mdr_from_args(args), args.pair_mode,
                           n_threads=args.threads, n_partitions=args.partitions, out=args.out)
    outcome = run_all(manifest)
    t = outcome.timings
    log.info("%d pairs; load %.3fs compute %.3fs save %.3fs", len(outcome.results),
             t.load_seconds, t.compute_seconds, t.save_seconds)
    best = outcome.ranked()[0]
    log.info("top pair %s consistency %d mean error %.6f", best.pair, best.consistency, best.mean_error)
    return EXIT_OK


def cmd_select(args) -> int:
    results = read_results(args.results)
    order = results.select(args.top_fraction)
    if args.out is None:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            path = write_results(results, Path(tmp) / "r.csv", order)
            sys.stdout.write(path.read_text(encoding="utf-8"))
    else:
        write_results(results, args.out, order)
    return EXIT_OK


def cmd_bench(args) -> int:
    data = args.data / "manifest.txt" if args.data.is_dir() else args.data
    if not data.is_file():
        raise FileNotFoundError(f"cohort manifest not found: {data}")
    grid = ExperimentGrid(
        data_manifest=data,
        file_counts=args.files_grid,
        thread_counts=args.threads_grid,
        worker_counts=args.workers_grid,
        kernels=args.kernels,
        repetitions=args.reps,
        cfg=_mdr_from_args(args),
        pair_mode=args.pair_mode,
        distribution_mode=args.mode,
        frequency_hz=resolve_frequency(args.freq_hz),
    )

    def progress(rec):
        log.info("files=%d threads=%d workers=%d kernel=%s rep=%d %s total=%.3fs",
                 rec.files, rec.threads, rec.workers, rec.kernel, rec.rep, rec.status, rec.total_s)

    report = run_grid(grid, progress)
    emit_report(report, args.format, args.out)
    for line in iter_summary_lines(summarize(report)):
        print(line)
    if not report.checksums_consistent():
        log.error("result checksums differ between cells over the same files")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_serve(args) -> int:
    files, labels = _inputs_from_args(args)
    manifest = RunManifest(files, labels, _mdr_from_args(args), args.pair_mode, n_threads=1, out=args.out)
    cfg = ClusterConfig(listen_address=args.listen, expected_workers=args.workers,
                        distribution_mode=args.mode, threads_per_worker=args.worker_threads,
                        handshake_timeout=args.timeout)
    outcome = coordinate(cfg, manifest)
    t = outcome.timings
    log.info("%d pairs from %d workers; load %.3fs compute %.3fs save %.3fs distribution %.6fs",
             len(outcome.results), len(outcome.workers), t.load_seconds, t.compute_seconds,
             t.save_seconds, outcome.distribution_seconds)
    return EXIT_OK


def cmd_work(args) -> int:
    return work(args.connect, args.data, args.threads)


def cmd_report(args) -> int:
    report = load_report(args.input)
    if args.format is not None:
        if args.out is None:
            raise UsageError("--format needs --out")
        emit_report(report, args.format, args.out)
    for line in iter_summary_lines(summarize(report, args.baseline)):
        print(line)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "select": cmd_select,
    "bench": cmd_bench,
    "serve": cmd_serve,
    "work": cmd_work,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"epimdr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"epimdr {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"epimdr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeFailure, OSError) as exc:
        print(f"epimdr {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
