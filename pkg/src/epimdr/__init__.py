"""Pairwise epistasis detection with multifactor dimensionality reduction."""

from __future__ import annotations

__version__ = "0.1.0"

from .cohort import GeneratorConfig, PlantedSignal, generate_cohort
from .engine import PairMode, RunManifest, count_tasks, enumerate_pairs, partition_tasks, run_all
from .genotypes import (
    GenotypeCode,
    GenotypeFile,
    PhenotypeLabels,
    VariantRecord,
    decode_genotype,
    parse_genotype_file,
    parse_labels,
)
from .mdr import (
    CellPolicy,
    ContingencyTable,
    FoldPlan,
    Kernel,
    MdrConfig,
    PairResult,
    RiskTable,
    build_contingency,
    classify_and_error,
    compute_threshold,
    make_folds,
    mdr_pair,
    reduce_risk,
    select_top_pairs,
)

__all__ = [
    "CellPolicy",
    "ContingencyTable",
    "FoldPlan",
    "GeneratorConfig",
    "GenotypeCode",
    "GenotypeFile",
    "Kernel",
    "MdrConfig",
    "PairMode",
    "PairResult",
    "PhenotypeLabels",
    "PlantedSignal",
    "RiskTable",
    "RunManifest",
    "VariantRecord",
    "build_contingency",
    "classify_and_error",
    "compute_threshold",
    "count_tasks",
    "decode_genotype",
    "enumerate_pairs",
    "generate_cohort",
    "make_folds",
    "mdr_pair",
    "parse_genotype_file",
    "parse_labels",
    "partition_tasks",
    "reduce_risk",
    "run_all",
    "select_top_pairs",
]
