"""Coordinator and worker for the TCP master/worker execution mode.

The coordinator splits the global task sequence into one contiguous range
per worker, so the assembled result vector is identical to a single-node
run. In ``ship`` mode the input files travel inside a DataBlock at run time;
in ``preloaded`` mode each worker reads them from its own disk and only task
ranges cross the wire. Workers report how long the DataBlock took to arrive,
which is the distribution cost the two modes are meant to contrast.
"""

from __future__ import annotations

import gzip
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..engine import (
    LoadedCohort,
    PairMode,
    ResultSet,
    RunManifest,
    compute_range,
    count_tasks,
    enumerate_pairs,
    partition_tasks,
)
from ..errors import ClusterTimeout, ProtocolError, RuntimeFailure, VersionMismatch, WorkerLost
from ..genotypes import (
    parse_genotype_bytes,
    parse_genotype_file,
    parse_labels,
    parse_labels_bytes,
)
from ..mdr import MdrConfig
from ..timing import StageTimings, stage
from .protocol import (
    PROTOCOL_VERSION,
    Kind,
    ResultBlock,
    decode_assign,
    decode_data_block,
    decode_hello,
    decode_task_range,
    encode_assign,
    encode_data_block,
    encode_hello,
    encode_task_range,
    read_header,
    recv_body,
    recv_message,
    send_message,
)

log = logging.getLogger(__name__)


class DistributionMode(str, Enum):
    SHIP = "ship"
    PRELOADED = "preloaded"


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep:
        raise ValueError(f"address {address!r} is not host:port")
    return host or "127.0.0.1", int(port)


@dataclass
class ClusterConfig:
    listen_address: str = "127.0.0.1:0"
    expected_workers: int = 1
    distribution_mode: DistributionMode = DistributionMode.SHIP
    threads_per_worker: int = 1
    handshake_timeout: float = 60.0
    idle_timeout: float = 3600.0

    def __post_init__(self) -> None:
        self.distribution_mode = DistributionMode(self.distribution_mode)
        if self.expected_workers < 1:
            raise ValueError("expected_workers must be >= 1")


@dataclass
class WorkerReport:
    worker_id: int
    threads: int
    timings: StageTimings
    receive_seconds: float
    n_tasks: int


@dataclass(eq=False)
class ClusterOutcome:
    results: ResultSet
    order: np.ndarray
    timings: StageTimings
    workers: list[WorkerReport] = field(default_factory=list)

    @property
    def distribution_seconds(self) -> float:
        """Slowest worker's DataBlock transfer time; 0.0 when nothing was shipped."""
        return max((w.receive_seconds for w in self.workers), default=0.0)


def count_variants(path: str | Path) -> int:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return sum(1 for line in fh if line.strip())


def _abort(sock: socket.socket, message: str) -> None:
    try:
        send_message(sock, Kind.ABORT, message.encode("utf-8"))
    except OSError:
        pass


class Coordinator:
    def __init__(self, cfg: ClusterConfig, manifest: RunManifest):
        self.cfg = cfg
        self.manifest = manifest
        self._server: socket.socket | None = None
        self._conns: list[socket.socket] = []

    def bind(self) -> tuple[str, int]:
        host, port = parse_address(self.cfg.listen_address)
        server = socket.create_server((host, port), reuse_port=False)
        server.listen(self.cfg.expected_workers)
        self._server = server
        return server.getsockname()[:2]

    @property
    def address(self) -> str:
        host, port = self._server.getsockname()[:2]
        return f"{host}:{port}"

    def close(self) -> None:
        for conn in self._conns:
            try:
                conn.close()
            except OSError:
                pass
        self._conns.clear()
        if self._server is not None:
            self._server.close()
            self._server = None

    def _run_spec(self) -> dict:
        m = self.manifest
        return {
            "mode": self.cfg.distribution_mode.value,
            "files": [p.name for p in m.files],
            "paths": [str(p.resolve()) for p in m.files],
            "labels": m.labels.name,
            "labels_path": str(m.labels.resolve()),
            "cfg": m.cfg.to_dict(),
            "pair_mode": m.pair_mode.value,
            "threads": self.cfg.threads_per_worker,
        }

    def _handshake(self) -> list[int]:
        self._server.settimeout(self.cfg.handshake_timeout)
        spec = self._run_spec()
        threads = []
        for worker_id in range(self.cfg.expected_workers):
            try:
                conn, peer = self._server.accept()
            except socket.timeout:
                raise ClusterTimeout(
                    f"only {worker_id} of {self.cfg.expected_workers} workers connected"
                ) from None
            self._conns.append(conn)
            conn.settimeout(self.cfg.handshake_timeout)
            kind, body = recv_message(conn)
            if kind is not Kind.HELLO:
                _abort(conn, f"expected Hello, got {kind.name}")
                raise ProtocolError(f"worker {peer} opened with {kind.name}")
            version, worker_threads = decode_hello(body)
            if version != PROTOCOL_VERSION:
                _abort(conn, f"protocol version {version} unsupported, need {PROTOCOL_VERSION}")
                raise VersionMismatch(f"worker {peer} speaks protocol {version}")
            send_message(conn, Kind.ASSIGN, encode_assign(worker_id, spec))
            threads.append(worker_threads)
            log.info("worker %d connected from %s (%d threads)", worker_id, peer, worker_threads)
        return threads

    def _ship_data(self) -> None:
        m = self.manifest
        files = [(p.name, p.read_bytes()) for p in m.files]
        body = encode_data_block(files, (m.labels.name, m.labels.read_bytes()))
        for conn in self._conns:
            send_message(conn, Kind.DATA_BLOCK, body)

    def _serve_range(self, worker_id: int, conn: socket.socket, part, out: queue.Queue) -> None:
        try:
            conn.settimeout(self.cfg.idle_timeout)
            send_message(conn, Kind.TASK_RANGE, encode_task_range(part.partition_id, part.start, part.stop))
            kind, body = recv_message(conn)
            if kind is Kind.ABORT:
                raise RuntimeFailure(f"worker {worker_id} aborted: {body.decode('utf-8', 'replace')}")
            if kind is not Kind.RESULT_BLOCK:
                _abort(conn, f"expected ResultBlock, got {kind.name}")
                raise ProtocolError(f"worker {worker_id} sent {kind.name} instead of ResultBlock")
            block = ResultBlock.decode(body)
            if (block.start, block.stop) != (part.start, part.stop):
                raise ProtocolError(f"worker {worker_id} answered the wrong range")
            out.put((worker_id, block, None))
        except socket.timeout:
            out.put((worker_id, None, ClusterTimeout(f"worker {worker_id} idle past deadline")))
        except Exception as exc:  # reported to the aggregator
            out.put((worker_id, None, exc))

    def run(self) -> ClusterOutcome:
        if self._server is None:
            self.bind()
        m = self.manifest
        timings = StageTimings()
        try:
            with stage(timings, "load"):
                labels = parse_labels(m.labels)
                sizes = [count_variants(p) for p in m.files]
                worker_threads = self._handshake()
                if self.cfg.distribution_mode is DistributionMode.SHIP:
                    self._ship_data()
            with stage(timings, "compute"):
                total = count_tasks(sizes, m.pair_mode)
                parts = partition_tasks(total, len(self._conns))
                errors = np.empty((total, m.cfg.k), dtype=np.float64)
                inbox: queue.Queue = queue.Queue()
                handlers = [
                    threading.Thread(
                        target=self._serve_range, args=(wid, conn, part, inbox), daemon=True
                    )
                    for wid, (conn, part) in enumerate(zip(self._conns, parts))
                ]
                for h in handlers:
                    h.start()
                reports: list[WorkerReport] = []
                completed = 0
                for _ in handlers:
                    wid, block, exc = inbox.get()
                    if exc is not None:
                        for conn in self._conns:
                            _abort(conn, f"run aborted: worker {wid} failed")
                        if isinstance(exc, WorkerLost):
                            exc = WorkerLost(f"worker {wid} lost: {exc}")
                        exc.args = (f"{exc} ({completed}/{total} tasks completed)",)
                        raise exc
                    errors[block.start : block.stop] = block.fold_errors
                    completed += block.stop - block.start
                    reports.append(
                        WorkerReport(
                            worker_id=wid,
                            threads=worker_threads[wid],
                            timings=StageTimings(block.load_seconds, block.compute_seconds, 0.0),
                            receive_seconds=block.receive_seconds,
                            n_tasks=block.stop - block.start,
                        )
                    )
                for h in handlers:
                    h.join()
                for conn in self._conns:
                    send_message(conn, Kind.DONE)
                results = ResultSet(enumerate_pairs(sizes, m.pair_mode), errors)
                order = results.select(m.cfg.top_fraction)
            if m.out is not None:
                from ..results import write_results

                with stage(timings, "save"):
                    write_results(results, m.out, order)
        finally:
            self.close()
        reports.sort(key=lambda r: r.worker_id)
        return ClusterOutcome(results, order, timings, reports)


def coordinate(cfg: ClusterConfig, manifest: RunManifest) -> ClusterOutcome:
    coordinator = Coordinator(cfg, manifest)
    coordinator.bind()
    return coordinator.run()


# ---------------------------------------------------------------------------
# worker
# ---------------------------------------------------------------------------


def _connect(address: str, timeout: float) -> socket.socket:
    host, port = parse_address(address)
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection((host, port), timeout=timeout)
        except ConnectionRefusedError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.05)


def _load_shipped(sock: socket.socket, spec: dict) -> tuple[LoadedCohort, float, float]:
    kind, size = read_header(sock)
    if kind is not Kind.DATA_BLOCK:
        _abort(sock, f"expected DataBlock, got {kind.name}")
        raise ProtocolError(f"expected DataBlock, got {kind.name}")
    t0 = time.perf_counter()
    body = recv_body(sock, size)
    received = time.perf_counter() - t0
    files, (lname, lbytes) = decode_data_block(body)
    labels = parse_labels_bytes(lname, lbytes)
    gfiles = [
        parse_genotype_bytes(name, data, expected_patients=len(labels), file_id=i)
        for i, (name, data) in enumerate(files)
    ]
    data = LoadedCohort(gfiles, labels, MdrConfig.from_dict(spec["cfg"]))
    return data, received, time.perf_counter() - t0


def _load_local(spec: dict, data_dir: str | Path | None) -> LoadedCohort:
    if data_dir is not None:
        root = Path(data_dir)
        paths = [root / Path(name).name for name in spec["files"]]
        labels_path = root / Path(spec["labels"]).name
    else:
        paths = [Path(p) for p in spec["paths"]]
        labels_path = Path(spec["labels_path"])
    labels = parse_labels(labels_path)
    gfiles = [
        parse_genotype_file(p, expected_patients=len(labels), file_id=i) for i, p in enumerate(paths)
    ]
    return LoadedCohort(gfiles, labels, MdrConfig.from_dict(spec["cfg"]))


def work(
    connect_address: str,
    local_data_dir: str | Path | None = None,
    threads: int = 1,
    connect_timeout: float = 10.0,
) -> int:
    """Serve one coordinator session; returns 0 after Done, 3 after Abort."""
    sock = _connect(connect_address, connect_timeout)
    sock.settimeout(None)
    try:
        send_message(sock, Kind.HELLO, encode_hello(threads))
        kind, body = recv_message(sock)
        if kind is Kind.ABORT:
            message = body.decode("utf-8", "replace")
            if "protocol version" in message:
                raise VersionMismatch(message)
            raise RuntimeFailure(f"coordinator refused: {message}")
        if kind is not Kind.ASSIGN:
            _abort(sock, f"expected Assign, got {kind.name}")
            raise ProtocolError(f"expected Assign, got {kind.name}")
        worker_id, spec = decode_assign(body)
        n_threads = int(spec.get("threads") or threads)

        t0 = time.perf_counter()
        try:
            if spec["mode"] == DistributionMode.SHIP.value:
                data, received, load_s = _load_shipped(sock, spec)
            else:
                data, received = _load_local(spec, local_data_dir), 0.0
                load_s = time.perf_counter() - t0
        except (ProtocolError, WorkerLost):
            raise
        except Exception as exc:
            _abort(sock, f"worker {worker_id} could not load data: {exc}")
            raise
        tasks = enumerate_pairs(data.sizes, PairMode(spec["pair_mode"]))

        while True:
            kind, body = recv_message(sock)
            if kind is Kind.TASK_RANGE:
                pid, start, stop = decode_task_range(body)
                if not (0 <= start <= stop <= len(tasks)):
                    _abort(sock, f"task range {start}:{stop} outside 0:{len(tasks)}")
                    raise ProtocolError("task range out of bounds")
                c0 = time.perf_counter()
                try:
                    errors = compute_range(data, tasks[start:stop], n_threads)
                except Exception as exc:
                    _abort(sock, f"worker {worker_id}: {exc}")
                    raise
                block = ResultBlock(
                    pid, start, stop, errors, load_s, time.perf_counter() - c0, received
                )
                send_message(sock, Kind.RESULT_BLOCK, block.encode())
            elif kind is Kind.DONE:
                return 0
            elif kind is Kind.ABORT:
                log.warning("coordinator aborted: %s", body.decode("utf-8", "replace"))
                return 3
            else:
                _abort(sock, f"unexpected {kind.name}")
                raise ProtocolError(f"unexpected {kind.name} from coordinator")
    finally:
        sock.close()


def run_local_cluster(
    manifest: RunManifest,
    n_workers: int,
    mode: DistributionMode | str = DistributionMode.SHIP,
    threads_per_worker: int = 1,
    data_dir: str | Path | None = None,
) -> ClusterOutcome:
    """Coordinator plus ``n_workers`` in-process worker threads on loopback."""
    cfg = ClusterConfig(
        listen_address="127.0.0.1:0",
        expected_workers=n_workers,
        distribution_mode=mode,
        threads_per_worker=threads_per_worker,
    )
    coordinator = Coordinator(cfg, manifest)
    coordinator.bind()
    address = coordinator.address
    failures: list[BaseException] = []

    def _worker() -> None:
        try:
            work(address, data_dir, threads_per_worker)
        except BaseException as exc:  # surfaced after the coordinator returns
            failures.append(exc)

    workers = [threading.Thread(target=_worker, daemon=True) for _ in range(n_workers)]
    for w in workers:
        w.start()
    try:
        outcome = coordinator.run()
    finally:
        for w in workers:
            w.join(timeout=30)
    if failures:
        raise RuntimeFailure(f"local worker failed: {failures[0]}") from failures[0]
    return outcome
