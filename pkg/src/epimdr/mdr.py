"""Multifactor dimensionality reduction for variant pairs.

Per pair and cross-validation fold: count training patients into the 3x3
joint-genotype table, label each cell high risk when its case/control ratio
exceeds the cohort-wide ratio ``t``, predict the held-out fold from those
labels and score the misclassification rate. Pairs are then ranked by how
many folds place them in the best ``top_fraction``.

The single-pair functions (:func:`build_contingency`, :func:`reduce_risk`,
:func:`classify_and_error`, :func:`mdr_pair`) are the reference path. The
batched :func:`fold_counts` + :func:`fold_errors_from_counts` pair is what
the engine runs; it evaluates all folds from one count tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .errors import EmptyResults, EmptyTestSet, LengthMismatch, TooFewPatients
from .genotypes import PhenotypeLabels, VariantRecord
from .rng import SplitMix64, derive_seed


class Kernel(str, Enum):
    SCALAR = "scalar"
    BITPACKED = "bitpacked"


class CellPolicy(str, Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class MdrConfig:
    k: int = 5
    top_fraction: float = 0.2
    empty_cell_policy: CellPolicy = CellPolicy.LOW
    tie_policy: CellPolicy = CellPolicy.LOW
    kernel: Kernel = Kernel.BITPACKED
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        object.__setattr__(self, "empty_cell_policy", CellPolicy(self.empty_cell_policy))
        object.__setattr__(self, "tie_policy", CellPolicy(self.tie_policy))
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not (0.0 < self.top_fraction <= 1.0):
            raise ValueError("top_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "top_fraction": self.top_fraction,
            "empty_cell_policy": self.empty_cell_policy.value,
            "tie_policy": self.tie_policy.value,
            "kernel": self.kernel.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MdrConfig":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray = field(repr=False)
    seed: int = 0

    def test_mask(self, fold: int) -> np.ndarray:
        return self.assignment == fold

    def train_mask(self, fold: int) -> np.ndarray:
        return self.assignment != fold


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """``cases[a, b]`` / ``controls[a, b]`` for genotype codes ``a``, ``b`` in 0..2."""

    cases: np.ndarray
    controls: np.ndarray

    @property
    def counted_patients(self) -> int:
        return int(self.cases.sum() + self.controls.sum())

    def cell(self, a: int, b: int) -> tuple[int, int]:
        return int(self.cases[a, b]), int(self.controls[a, b])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return np.array_equal(self.cases, other.cases) and np.array_equal(
            self.controls, other.controls
        )


@dataclass(frozen=True, eq=False)
class RiskTable:
    """``high[a, b]`` is True for high-risk cells."""

    high: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RiskTable):
            return NotImplemented
        return np.array_equal(self.high, other.high)


Pair = tuple[int, int, int, int]


@dataclass
class PairResult:
    pair: Pair
    fold_errors: tuple[float, ...]
    mean_error: float
    consistency: int = -1

    @property
    def self_pair(self) -> bool:
        return self.pair[:2] == self.pair[2:]


def compute_threshold(labels: PhenotypeLabels) -> float:
    """Cohort-wide cases-to-controls ratio."""
    return labels.n_cases / labels.n_controls


def make_folds(labels: PhenotypeLabels, k: int, seed: int) -> FoldPlan:
    """Stratified fold assignment.

    Within each status class the patients are shuffled with a seeded stream
    and dealt round-robin, so per-class fold sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    assignment = np.full(len(labels), -1, dtype=np.int64)
    for cls in (1, 0):
        members = np.flatnonzero(labels.status == cls)
        if members.size < k:
            name = "cases" if cls else "controls"
            raise TooFewPatients(f"{members.size} {name} cannot fill {k} folds")
        order = SplitMix64(derive_seed(seed, 0xF01D, cls)).permutation(members.size)
        assignment[members[order]] = np.arange(members.size) % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def _check_lengths(*arrays: np.ndarray) -> None:
    sizes = {a.shape[0] for a in arrays}
    if len(sizes) != 1:
        raise LengthMismatch(f"patient vectors have different lengths {sorted(sizes)}")


def build_contingency(
    var_a: VariantRecord,
    var_b: VariantRecord,
    labels: PhenotypeLabels,
    train_mask: np.ndarray,
    kernel: Kernel | str = Kernel.BITPACKED,
) -> ContingencyTable:
    train_mask = np.asarray(train_mask, dtype=bool)
    _check_lengths(var_a.genotypes, var_b.genotypes, labels.status, train_mask)
    groups = np.where(train_mask, 0, -1)
    pair = np.zeros((1, 2), dtype=np.int64)
    if Kernel(kernel) is Kernel.SCALAR:
        counts = kernels.count_pairs_scalar(
            var_a.genotypes[None], var_b.genotypes[None], pair, groups, labels.status, 1
        )
    else:
        counts = kernels.count_pairs_bitpacked(
            kernels.pack_codes(var_a.genotypes[None]),
            kernels.pack_codes(var_b.genotypes[None]),
            pair,
            kernels.pack_groups(groups, labels.status, 1),
        )
    cells = counts[0, 0]
    return ContingencyTable(
        cases=cells[:, 1].reshape(3, 3).copy(), controls=cells[:, 0].reshape(3, 3).copy()
    )


def _high_mask(cases, controls, t: float, cfg: MdrConfig) -> np.ndarray:
    """Elementwise risk rule over broadcastable count arrays."""
    cases = np.asarray(cases)
    controls = np.asarray(controls)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = cases / np.where(controls > 0, controls, 1)
    high = np.where(ratio > t, True, False)
    if cfg.tie_policy is CellPolicy.HIGH:
        high |= ratio == t
    high = np.where(controls > 0, high, cases > 0)
    empty = (cases == 0) & (controls == 0)
    return np.where(empty, cfg.empty_cell_policy is CellPolicy.HIGH, high)


def reduce_risk(table: ContingencyTable, t: float, cfg: MdrConfig | None = None) -> RiskTable:
    if t <= 0:
        raise ValueError("threshold must be positive")
    cfg = cfg or MdrConfig()
    return RiskTable(high=_high_mask(table.cases, table.controls, t, cfg))


def classify_and_error(
    risk: RiskTable,
    var_a: VariantRecord,
    var_b: VariantRecord,
    labels: PhenotypeLabels,
    test_mask: np.ndarray,
) -> float:
    """Misclassification rate over evaluable (non-missing) test patients."""
    test_mask = np.asarray(test_mask, dtype=bool)
    _check_lengths(var_a.genotypes, var_b.genotypes, labels.status, test_mask)
    a, b = var_a.genotypes, var_b.genotypes
    evaluable = test_mask & (a != kernels.MISSING) & (b != kernels.MISSING)
    n = int(evaluable.sum())
    if n == 0:
        raise EmptyTestSet("no test patient has both genotypes observed")
    predicted_case = risk.high[a[evaluable], b[evaluable]]
    actual_case = labels.status[evaluable] == 1
    return int(np.count_nonzero(predicted_case != actual_case)) / n


def mdr_pair(
    var_a: VariantRecord,
    var_b: VariantRecord,
    labels: PhenotypeLabels,
    folds: FoldPlan,
    t: float,
    cfg: MdrConfig | None = None,
    pair: Pair = (0, 0, 0, 0),
) -> PairResult:
    cfg = cfg or MdrConfig(k=folds.k)
    errors = []
    for f in range(folds.k):
        table = build_contingency(var_a, var_b, labels, folds.train_mask(f), cfg.kernel)
        risk = reduce_risk(table, t, cfg)
        errors.append(classify_and_error(risk, var_a, var_b, labels, folds.test_mask(f)))
    return PairResult(pair=tuple(pair), fold_errors=tuple(errors), mean_error=sum(errors) / len(errors))


# ---------------------------------------------------------------------------
# batched path
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PreparedBlock:
    """Kernel-ready view of one genotype file."""

    codes: np.ndarray
    packed: np.ndarray | None

    @classmethod
    def from_codes(cls, codes: np.ndarray, kernel: Kernel) -> "PreparedBlock":
        codes = np.ascontiguousarray(codes, dtype=np.int8)
        packed = kernels.pack_codes(codes) if kernel is Kernel.BITPACKED else None
        return cls(codes=codes, packed=packed)


@dataclass(frozen=True, eq=False)
class PreparedCohort:
    """Everything pair scoring needs besides the genotype blocks."""

    status: np.ndarray
    folds: FoldPlan
    t: float
    cfg: MdrConfig
    group_masks: np.ndarray | None

    @classmethod
    def build(cls, labels: PhenotypeLabels, cfg: MdrConfig) -> "PreparedCohort":
        folds = make_folds(labels, cfg.k, cfg.seed)
        masks = None
        if cfg.kernel is Kernel.BITPACKED:
            masks = kernels.pack_groups(folds.assignment, labels.status, cfg.k)
        return cls(labels.status, folds, compute_threshold(labels), cfg, masks)


def fold_counts(
    block_a: PreparedBlock, block_b: PreparedBlock, pairs: np.ndarray, cohort: PreparedCohort
) -> np.ndarray:
    """``(P, k, 9, 2)`` per-fold cell counts for index pairs into two blocks."""
    if cohort.cfg.kernel is Kernel.BITPACKED:
        return kernels.count_pairs_bitpacked(block_a.packed, block_b.packed, pairs, cohort.group_masks)
    return kernels.count_pairs_scalar(
        block_a.codes, block_b.codes, pairs, cohort.folds.assignment, cohort.status, cohort.cfg.k
    )


def fold_errors_from_counts(counts: np.ndarray, t: float, cfg: MdrConfig) -> np.ndarray:
    """``(P, k)`` test errors; training counts for fold f are the total minus fold f."""
    total = counts.sum(axis=1, keepdims=True)
    train = total - counts
    high = _high_mask(train[..., 1], train[..., 0], t, cfg)
    wrong = np.where(high, counts[..., 0], counts[..., 1]).sum(axis=-1)
    evaluated = counts.sum(axis=(-1, -2))
    if np.any(evaluated == 0):
        p, f = np.argwhere(evaluated == 0)[0]
        raise EmptyTestSet(f"pair row {p} has no evaluable patient in test fold {f}")
    return wrong / evaluated


def mean_errors(fold_errors: np.ndarray) -> np.ndarray:
    return fold_errors.sum(axis=-1) / fold_errors.shape[-1]


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------


def top_count(n: int, top_fraction: float) -> int:
    # round first so 0.2 * 2500 does not become 501 through float fuzz
    return max(1, math.ceil(round(top_fraction * n, 9)))


def consistency_counts(pairs: np.ndarray, fold_errors: np.ndarray, top_fraction: float) -> np.ndarray:
    """Number of folds where each pair falls in the best ``top_fraction``."""
    n, k = fold_errors.shape
    m = min(n, top_count(n, top_fraction))
    consistency = np.zeros(n, dtype=np.int64)
    coord_keys = [pairs[:, j] for j in (3, 2, 1, 0)]
    for f in range(k):
        order = np.lexsort((*coord_keys, fold_errors[:, f]))
        consistency[order[:m]] += 1
    return consistency


def ranking_order(pairs: np.ndarray, mean_error: np.ndarray, consistency: np.ndarray) -> np.ndarray:
    """Indices sorted by consistency desc, mean error asc, coordinates asc."""
    return np.lexsort((pairs[:, 3], pairs[:, 2], pairs[:, 1], pairs[:, 0], mean_error, -consistency))


def select_top_pairs(results: Sequence[PairResult], cfg: MdrConfig | None = None) -> list[PairResult]:
    """Fill ``consistency`` and return the results in ranked order."""
    if not results:
        raise EmptyResults("no pair results to rank")
    cfg = cfg or MdrConfig(k=len(results[0].fold_errors))
    ks = {len(r.fold_errors) for r in results}
    if len(ks) != 1:
        raise ValueError("results disagree on the number of folds")
    pairs = np.array([r.pair for r in results], dtype=np.int64)
    errs = np.array([r.fold_errors for r in results], dtype=np.float64)
    means = np.array([r.mean_error for r in results], dtype=np.float64)
    consistency = consistency_counts(pairs, errs, cfg.top_fraction)
    order = ranking_order(pairs, means, consistency)
    return [replace(results[i], consistency=int(consistency[i])) for i in order]
