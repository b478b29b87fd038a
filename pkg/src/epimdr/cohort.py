"""Synthetic cohort generator.

Background variants follow Hardy-Weinberg proportions with a per-variant
minor-allele frequency. An optional planted pair is drawn uniformly over the
nine joint genotype cells and drives case status through cell-based
penetrance, which is exactly the structure MDR is built to find.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .genotypes import (
    GenotypeFile,
    PhenotypeLabels,
    VariantRecord,
    write_genotype_file,
    write_labels,
)
from .rng import SplitMix64, derive_seed

_BASES = np.array(list("ACGT"))
_CHROMOSOME = "22"
_START_POSITION = 16_050_000

# stream labels for derive_seed
_S_VARIANT, _S_PLANTED, _S_STATUS = 1, 2, 3


@dataclass(frozen=True)
class PlantedSignal:
    file_a: int
    index_a: int
    file_b: int
    index_b: int
    high_risk_cells: frozenset[int] = frozenset({0, 4, 8})
    p_case_high: float = 0.9
    p_case_low: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "high_risk_cells", frozenset(int(c) for c in self.high_risk_cells))
        if not all(0 <= c <= 8 for c in self.high_risk_cells):
            raise ValueError("high_risk_cells must lie in 0..8")
        if not (0 < self.p_case_low < self.p_case_high < 1):
            raise ValueError("need 0 < p_case_low < p_case_high < 1")
        if (self.file_a, self.index_a) == (self.file_b, self.index_b):
            raise ValueError("planted pair must join two distinct variants")


@dataclass(frozen=True)
class GeneratorConfig:
    n_files: int = 10
    variants_per_file: int = 50
    n_patients: int = 1128
    case_fraction: float = 0.5
    seed: int = 7
    planted: PlantedSignal | None = None
    compress: bool = True

    def __post_init__(self) -> None:
        if min(self.n_files, self.variants_per_file, self.n_patients) < 1:
            raise ValueError("n_files, variants_per_file and n_patients must be positive")
        if not (0.0 < self.case_fraction < 1.0):
            raise ValueError("case_fraction must lie strictly inside (0, 1)")
        p = self.planted
        if p is not None:
            for f, i in ((p.file_a, p.index_a), (p.file_b, p.index_b)):
                if not (0 <= f < self.n_files and 0 <= i < self.variants_per_file):
                    raise ValueError(f"planted coordinate ({f}, {i}) outside the generated range")


@dataclass
class CohortManifest:
    root: Path
    genotype_files: list[Path] = field(default_factory=list)
    label_file: Path | None = None

    def relative_lines(self) -> list[str]:
        paths = [*sorted(self.genotype_files), self.label_file]
        return [os.path.relpath(p, self.root) for p in paths]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.relative_lines())


def genotype_file_name(file_id: int, compress: bool = True) -> str:
    return f"f{file_id:03d}.csv" + (".gz" if compress else "")


LABEL_FILE_NAME = "labels.csv"
MANIFEST_NAME = "manifest.txt"


def _hwe_codes(rng: SplitMix64, n: int) -> np.ndarray:
    maf = 0.05 + 0.45 * rng.uniform(1)[0]
    p_ref, p_het = (1 - maf) ** 2, 2 * maf * (1 - maf)
    u = rng.uniform(n)
    return np.where(u < p_ref, 0, np.where(u < p_ref + p_het, 1, 2)).astype(np.int8)


def _alleles(rng: SplitMix64) -> tuple[str, str]:
    ref = int(rng.integers(1, 4)[0])
    alt = (ref + 1 + int(rng.integers(1, 3)[0])) % 4
    return str(_BASES[ref]), str(_BASES[alt])


def simulate_cohort(cfg: GeneratorConfig) -> tuple[list[GenotypeFile], PhenotypeLabels]:
    """Build the cohort in memory; :func:`generate_cohort` writes it out."""
    n = cfg.n_patients
    planted_codes: dict[tuple[int, int], np.ndarray] = {}
    if cfg.planted is not None:
        p = cfg.planted
        cells = SplitMix64(derive_seed(cfg.seed, _S_PLANTED)).integers(n, 9)
        planted_codes[(p.file_a, p.index_a)] = (cells // 3).astype(np.int8)
        planted_codes[(p.file_b, p.index_b)] = (cells % 3).astype(np.int8)

    files: list[GenotypeFile] = []
    position = _START_POSITION
    for f in range(cfg.n_files):
        records = []
        for i in range(cfg.variants_per_file):
            rng = SplitMix64(derive_seed(cfg.seed, _S_VARIANT, f, i))
            position += 1 + int(rng.integers(1, 5000)[0])
            ref, alt = _alleles(rng)
            codes = planted_codes.get((f, i))
            if codes is None:
                codes = _hwe_codes(rng, n)
            records.append(
                VariantRecord(_CHROMOSOME, position, ref, alt, codes, f"rs{f:03d}{i:05d}")
            )
        name = genotype_file_name(f, cfg.compress)
        files.append(GenotypeFile(file_id=f, source_path=name, variants=tuple(records)))

    u = SplitMix64(derive_seed(cfg.seed, _S_STATUS)).uniform(n)
    if cfg.planted is None:
        status = u < cfg.case_fraction
    else:
        p = cfg.planted
        cell = 3 * planted_codes[(p.file_a, p.index_a)] + planted_codes[(p.file_b, p.index_b)]
        high = np.isin(cell, sorted(p.high_risk_cells))
        status = np.where(high, u < p.p_case_high, u < p.p_case_low)
    width = max(4, len(str(n)))
    ids = tuple(f"P{j:0{width}d}" for j in range(1, n + 1))
    return files, PhenotypeLabels(ids, status.astype(np.int8))


def generate_cohort(cfg: GeneratorConfig, out_dir: str | os.PathLike) -> CohortManifest:
    """Write genotype files, the label file and ``manifest.txt`` into ``out_dir``.

    Output is a deterministic function of ``cfg``: rerunning with the same
    seed rewrites byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, labels = simulate_cohort(cfg)
    manifest = CohortManifest(root=out)
    for gfile in files:
        manifest.genotype_files.append(write_genotype_file(gfile, out / gfile.source_path))
    manifest.label_file = write_labels(labels, out / LABEL_FILE_NAME)
    (out / MANIFEST_NAME).write_text(manifest.text(), encoding="utf-8")
    return manifest


def read_manifest(path: str | os.PathLike) -> tuple[list[Path], Path]:
    """Return ``(genotype_paths, label_path)`` from a manifest file."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty manifest")
    resolved = [path.parent / ln for ln in lines]
    return resolved[:-1], resolved[-1]
