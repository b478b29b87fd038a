"""Genotype and phenotype file formats.

Genotype files are header-less CSV rows: identification columns (4 or 5)
followed by one one-hot ``AA,Aa,aa`` triple per patient. A ``.gz`` suffix
selects gzip. Label files are ``patient_id,status`` rows with status 0/1.

Genotypes are held as ``int8`` code vectors using :class:`GenotypeCode`
values, with ``MISSING`` for all-zero triples.
"""

from __future__ import annotations

import gzip
import io
import os
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateCohort,
    DuplicatePatient,
    LengthMismatch,
    MalformedGenotype,
    MalformedLabel,
    MalformedRow,
)


class GenotypeCode(IntEnum):
    HOM_REF = 0
    HET = 1
    HOM_ALT = 2
    MISSING = 3


class Status(IntEnum):
    CONTROL = 0
    CASE = 1


_ONE_HOT = {
    (1, 0, 0): GenotypeCode.HOM_REF,
    (0, 1, 0): GenotypeCode.HET,
    (0, 0, 1): GenotypeCode.HOM_ALT,
    (0, 0, 0): GenotypeCode.MISSING,
}
_TRIPLES = {code: triple for triple, code in _ONE_HOT.items()}


def decode_genotype(triple: Sequence[int]) -> GenotypeCode:
    """Map a one-hot ``(AA, Aa, aa)`` triple to its code.

    Raises
    ------
    MalformedGenotype
        For entries outside {0, 1}, multi-hot triples, or a wrong length.
    """
    key = tuple(int(v) for v in triple)
    try:
        return _ONE_HOT[key]
    except KeyError:
        raise MalformedGenotype(f"invalid genotype triple {key!r}") from None


def encode_genotype(code: int) -> tuple[int, int, int]:
    return _TRIPLES[GenotypeCode(code)]


def decode_block(values: np.ndarray) -> np.ndarray:
    """Vectorised :func:`decode_genotype` over a flat ``3*n`` integer array."""
    if values.size % 3:
        raise MalformedRow(f"genotype field count {values.size} is not a multiple of 3")
    triples = values.reshape(-1, 3)
    if np.any((triples != 0) & (triples != 1)):
        bad = triples[np.any((triples != 0) & (triples != 1), axis=1)][0]
        raise MalformedGenotype(f"invalid genotype triple {tuple(int(v) for v in bad)!r}")
    hot = triples.sum(axis=1)
    if np.any(hot > 1):
        bad = triples[hot > 1][0]
        raise MalformedGenotype(f"invalid genotype triple {tuple(int(v) for v in bad)!r}")
    codes = np.argmax(triples, axis=1).astype(np.int8)
    codes[hot == 0] = GenotypeCode.MISSING
    return codes


def encode_block(codes: np.ndarray) -> np.ndarray:
    """Inverse of :func:`decode_block`: ``(n,)`` codes to ``(3n,)`` one-hot ints."""
    table = np.array([_TRIPLES[GenotypeCode(c)] for c in range(4)], dtype=np.int8)
    return table[np.asarray(codes, dtype=np.int64)].reshape(-1)


@dataclass(frozen=True, eq=False)
class VariantRecord:
    chromosome: str
    position: int
    ref_allele: str
    alt_allele: str
    genotypes: np.ndarray
    variant_id: str | None = None

    @property
    def n_patients(self) -> int:
        return int(self.genotypes.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VariantRecord):
            return NotImplemented
        return (
            self.chromosome == other.chromosome
            and self.position == other.position
            and self.ref_allele == other.ref_allele
            and self.alt_allele == other.alt_allele
            and self.variant_id == other.variant_id
            and np.array_equal(self.genotypes, other.genotypes)
        )


@dataclass(frozen=True)
class GenotypeFile:
    file_id: int
    source_path: str
    variants: tuple[VariantRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.variants)

    @property
    def n_patients(self) -> int:
        return self.variants[0].n_patients if self.variants else 0

    def code_matrix(self) -> np.ndarray:
        """``(n_variants, n_patients)`` int8 code matrix."""
        if not self.variants:
            return np.zeros((0, 0), dtype=np.int8)
        return np.stack([v.genotypes for v in self.variants]).astype(np.int8, copy=False)


@dataclass(frozen=True, eq=False)
class PhenotypeLabels:
    patient_ids: tuple[str, ...]
    status: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        status = np.asarray(self.status, dtype=np.int8)
        object.__setattr__(self, "status", status)
        if len(self.patient_ids) != status.shape[0]:
            raise LengthMismatch("patient_ids and status differ in length")
        if np.any((status != 0) & (status != 1)):
            raise MalformedLabel("status values must be 0 or 1")
        seen: set[str] = set()
        for pid in self.patient_ids:
            if pid in seen:
                raise DuplicatePatient(f"duplicate patient id {pid!r}")
            seen.add(pid)
        if self.n_cases == 0 or self.n_controls == 0:
            raise DegenerateCohort(
                f"cohort needs cases and controls (cases={self.n_cases}, controls={self.n_controls})"
            )

    def __len__(self) -> int:
        return len(self.patient_ids)

    @property
    def n_cases(self) -> int:
        return int(np.count_nonzero(self.status == Status.CASE))

    @property
    def n_controls(self) -> int:
        return int(np.count_nonzero(self.status == Status.CONTROL))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhenotypeLabels):
            return NotImplemented
        return self.patient_ids == other.patient_ids and np.array_equal(self.status, other.status)


def _open_text(path: str | os.PathLike, mode: str = "rt"):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def _detect_id_columns(n_fields: int, lineno: int) -> int:
    for k in (5, 4):
        if n_fields >= k and (n_fields - k) % 3 == 0:
            return k
    raise MalformedRow(f"line {lineno}: {n_fields} columns fit neither 4 nor 5 id columns")


def _parse_record(fields: list[str], id_columns: int, lineno: int) -> VariantRecord:
    chrom = fields[0]
    try:
        position = int(fields[1])
    except ValueError:
        raise MalformedRow(f"line {lineno}: position {fields[1]!r} is not an integer") from None
    if position < 0:
        raise MalformedRow(f"line {lineno}: negative position {position}")
    if id_columns == 5:
        variant_id, ref, alt = fields[2], fields[3], fields[4]
    else:
        variant_id, ref, alt = None, fields[2], fields[3]
    if ref == alt:
        raise MalformedRow(f"line {lineno}: ref and alt allele are both {ref!r}")
    try:
        values = np.array(fields[id_columns:], dtype=np.int64)
    except ValueError:
        raise MalformedGenotype(f"line {lineno}: non-integer genotype field") from None
    try:
        codes = decode_block(values)
    except MalformedGenotype as exc:
        raise MalformedGenotype(f"line {lineno}: {exc}") from None
    return VariantRecord(chrom, position, ref, alt, codes, variant_id)


def parse_genotype_lines(
    lines: Iterable[str],
    *,
    file_id: int = 0,
    source_path: str = "<memory>",
    expected_patients: int | None = None,
) -> GenotypeFile:
    records: list[VariantRecord] = []
    n_fields = id_columns = None
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        fields = line.split(",")
        if n_fields is None:
            n_fields = len(fields)
            id_columns = _detect_id_columns(n_fields, lineno)
            n_patients = (n_fields - id_columns) // 3
            if expected_patients is not None and n_patients != expected_patients:
                raise MalformedRow(
                    f"{source_path}: {n_patients} patients, expected {expected_patients}"
                )
        elif len(fields) != n_fields:
            raise MalformedRow(
                f"{source_path} line {lineno}: {len(fields)} columns, first row had {n_fields}"
            )
        records.append(_parse_record(fields, id_columns, lineno))
    return GenotypeFile(file_id=file_id, source_path=source_path, variants=tuple(records))


def parse_genotype_file(
    path: str | os.PathLike, expected_patients: int | None = None, *, file_id: int = 0
) -> GenotypeFile:
    """Read a (possibly gzipped) genotype CSV into a :class:`GenotypeFile`."""
    with _open_text(path) as fh:
        return parse_genotype_lines(
            fh, file_id=file_id, source_path=str(path), expected_patients=expected_patients
        )


def parse_genotype_bytes(
    name: str, payload: bytes, expected_patients: int | None = None, *, file_id: int = 0
) -> GenotypeFile:
    """Parse raw file bytes as they would appear on disk under ``name``."""
    if name.endswith(".gz"):
        payload = gzip.decompress(payload)
    text = io.StringIO(payload.decode("utf-8"), newline="")
    return parse_genotype_lines(
        text, file_id=file_id, source_path=name, expected_patients=expected_patients
    )


def format_genotype_file(gfile: GenotypeFile) -> str:
    with_id = any(v.variant_id is not None for v in gfile.variants)
    out = io.StringIO()
    for v in gfile.variants:
        ids = [v.chromosome, str(v.position)]
        if with_id:
            ids.append(v.variant_id if v.variant_id is not None else ".")
        ids += [v.ref_allele, v.alt_allele]
        out.write(",".join(ids))
        out.write(",")
        out.write(",".join(map(str, encode_block(v.genotypes).tolist())))
        out.write("\n")
    return out.getvalue()


def write_genotype_file(gfile: GenotypeFile, path: str | os.PathLike) -> Path:
    """Write ``gfile``; ``.gz`` paths are gzipped with a zero mtime for reproducibility."""
    path = Path(path)
    data = format_genotype_file(gfile).encode("utf-8")
    if path.name.endswith(".gz"):
        with open(path, "wb") as raw, gzip.GzipFile(
            filename="", mode="wb", fileobj=raw, mtime=0, compresslevel=6
        ) as gz:
            gz.write(data)
    else:
        path.write_bytes(data)
    return path


def parse_label_lines(lines: Iterable[str], source: str = "<memory>") -> PhenotypeLabels:
    ids: list[str] = []
    status: list[int] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise MalformedLabel(f"{source} line {lineno}: expected 'patient_id,status'")
        pid, marker = parts
        if marker not in ("0", "1"):
            raise MalformedLabel(f"{source} line {lineno}: status {marker!r} is not 0 or 1")
        ids.append(pid)
        status.append(int(marker))
    return PhenotypeLabels(tuple(ids), np.array(status, dtype=np.int8))


def parse_labels(path: str | os.PathLike) -> PhenotypeLabels:
    with _open_text(path) as fh:
        return parse_label_lines(fh, source=str(path))


def parse_labels_bytes(name: str, payload: bytes) -> PhenotypeLabels:
    if name.endswith(".gz"):
        payload = gzip.decompress(payload)
    return parse_label_lines(io.StringIO(payload.decode("utf-8")), source=name)


def write_labels(labels: PhenotypeLabels, path: str | os.PathLike) -> Path:
    path = Path(path)
    text = "".join(f"{pid},{int(s)}\n" for pid, s in zip(labels.patient_ids, labels.status))
    path.write_bytes(text.encode("utf-8"))
    return path
