"""Binary framing for the coordinator/worker protocol.

Frame layout: 4-byte big-endian length ``L``, then ``L`` bytes made of a
1-byte message kind followed by the kind-specific body.

Bodies (all integers big-endian):

=============  ============================================================
Hello          ``B`` protocol version, ``I`` worker thread count
Assign         ``I`` worker id, then UTF-8 JSON run description
DataBlock      ``I`` header length, JSON header ``{"files": [[name, size],
               ...], "labels": [name, size]}``, then the raw file bytes in
               header order (gzip files are shipped still compressed)
TaskRange      ``QQQ`` partition id, start, stop (global task indices)
ResultBlock    ``QQQI`` partition id, start, stop, k; ``ddd`` worker load,
               compute and data-receive seconds; ``(stop-start)*k`` ``>f8``
               fold errors
Done           empty
Abort          UTF-8 error message
=============  ============================================================
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..errors import ProtocolError, WorkerLost

PROTOCOL_VERSION = 1
MAX_FRAME = 1 << 31

_LEN = struct.Struct(">I")
_HELLO = struct.Struct(">BI")
_ASSIGN = struct.Struct(">I")
_RANGE = struct.Struct(">QQQ")
_RESULT = struct.Struct(">QQQIddd")


class Kind(IntEnum):
    HELLO = 1
    ASSIGN = 2
    DATA_BLOCK = 3
    TASK_RANGE = 4
    RESULT_BLOCK = 5
    DONE = 6
    ABORT = 7


def frame(kind: Kind, body: bytes = b"") -> bytes:
    return _LEN.pack(len(body) + 1) + bytes([kind]) + body


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray(n)
    view = memoryview(buf)
    got = 0
    while got < n:
        chunk = sock.recv_into(view[got:], n - got)
        if chunk == 0:
            raise WorkerLost("connection closed by peer")
        got += chunk
    return bytes(buf)


def send_message(sock: socket.socket, kind: Kind, body: bytes = b"") -> None:
    sock.sendall(frame(kind, body))


def read_header(sock: socket.socket) -> tuple[Kind, int]:
    (length,) = _LEN.unpack(_recv_exact(sock, 4))
    if length < 1 or length > MAX_FRAME:
        raise ProtocolError(f"bad frame length {length}")
    kind_byte = _recv_exact(sock, 1)[0]
    try:
        kind = Kind(kind_byte)
    except ValueError:
        raise ProtocolError(f"unknown message kind {kind_byte}") from None
    return kind, length - 1


def recv_message(sock: socket.socket) -> tuple[Kind, bytes]:
    kind, size = read_header(sock)
    return kind, _recv_exact(sock, size)


def recv_body(sock: socket.socket, size: int) -> bytes:
    return _recv_exact(sock, size)


# -- bodies ------------------------------------------------------------------


def encode_hello(threads: int, version: int = PROTOCOL_VERSION) -> bytes:
    return _HELLO.pack(version, threads)


def decode_hello(body: bytes) -> tuple[int, int]:
    if len(body) != _HELLO.size:
        raise ProtocolError("malformed Hello")
    return _HELLO.unpack(body)


def encode_assign(worker_id: int, spec: dict) -> bytes:
    return _ASSIGN.pack(worker_id) + json.dumps(spec, sort_keys=True).encode("utf-8")


def decode_assign(body: bytes) -> tuple[int, dict]:
    if len(body) < _ASSIGN.size:
        raise ProtocolError("malformed Assign")
    (worker_id,) = _ASSIGN.unpack_from(body)
    return worker_id, json.loads(body[_ASSIGN.size :].decode("utf-8"))


def encode_data_block(files: list[tuple[str, bytes]], labels: tuple[str, bytes]) -> bytes:
    header = {
        "files": [[name, len(data)] for name, data in files],
        "labels": [labels[0], len(labels[1])],
    }
    raw = json.dumps(header).encode("utf-8")
    return b"".join([_LEN.pack(len(raw)), raw, *(data for _, data in files), labels[1]])


def decode_data_block(body: bytes) -> tuple[list[tuple[str, bytes]], tuple[str, bytes]]:
    (hlen,) = _LEN.unpack_from(body)
    header = json.loads(body[4 : 4 + hlen].decode("utf-8"))
    pos = 4 + hlen
    files = []
    for name, size in header["files"]:
        files.append((name, body[pos : pos + size]))
        pos += size
    lname, lsize = header["labels"]
    labels = (lname, body[pos : pos + lsize])
    if pos + lsize != len(body):
        raise ProtocolError("DataBlock sizes do not match its payload")
    return files, labels


def encode_task_range(partition_id: int, start: int, stop: int) -> bytes:
    return _RANGE.pack(partition_id, start, stop)


def decode_task_range(body: bytes) -> tuple[int, int, int]:
    if len(body) != _RANGE.size:
        raise ProtocolError("malformed TaskRange")
    return _RANGE.unpack(body)


@dataclass
class ResultBlock:
    partition_id: int
    start: int
    stop: int
    fold_errors: np.ndarray
    load_seconds: float = 0.0
    compute_seconds: float = 0.0
    receive_seconds: float = 0.0

    def encode(self) -> bytes:
        k = self.fold_errors.shape[1] if self.fold_errors.ndim == 2 else 0
        head = _RESULT.pack(
            self.partition_id,
            self.start,
            self.stop,
            k,
            self.load_seconds,
            self.compute_seconds,
            self.receive_seconds,
        )
        return head + np.ascontiguousarray(self.fold_errors, dtype=">f8").tobytes()

    @classmethod
    def decode(cls, body: bytes) -> "ResultBlock":
        if len(body) < _RESULT.size:
            raise ProtocolError("malformed ResultBlock")
        pid, start, stop, k, load_s, comp_s, recv_s = _RESULT.unpack_from(body)
        n = stop - start
        payload = body[_RESULT.size :]
        if len(payload) != n * k * 8:
            raise ProtocolError("ResultBlock payload size mismatch")
        errors = np.frombuffer(payload, dtype=">f8").astype(np.float64).reshape(n, k)
        return cls(pid, start, stop, errors, load_s, comp_s, recv_s)
