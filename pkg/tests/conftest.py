from __future__ import annotations

import numpy as np
import pytest

from epimdr.cohort import GeneratorConfig, PlantedSignal, generate_cohort
from epimdr.genotypes import PhenotypeLabels, VariantRecord


def make_variant(codes, chrom="22", position=100, ref="A", alt="G", variant_id=None):
    return VariantRecord(chrom, position, ref, alt, np.asarray(codes, dtype=np.int8), variant_id)


def make_labels(status):
    status = np.asarray(status, dtype=np.int8)
    return PhenotypeLabels(tuple(f"P{i}" for i in range(len(status))), status)


def random_instance(rng: np.random.Generator, n_patients: int, n_variants: int, p_missing: float):
    """Random codes (with missingness) and a status vector with both classes present."""
    codes = rng.integers(0, 3, size=(n_variants, n_patients)).astype(np.int8)
    codes[rng.random(codes.shape) < p_missing] = 3
    status = rng.integers(0, 2, size=n_patients).astype(np.int8)
    status[0], status[1] = 0, 1
    return codes, status


@pytest.fixture(scope="session")
def cohort5(tmp_path_factory):
    """5 files x 50 variants x 1,128 patients, the reference benchmark manifest."""
    out = tmp_path_factory.mktemp("cohort5")
    return generate_cohort(GeneratorConfig(n_files=5, variants_per_file=50, n_patients=1128, seed=7), out)


@pytest.fixture(scope="session")
def small_cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    return generate_cohort(GeneratorConfig(n_files=2, variants_per_file=6, n_patients=60, seed=3), out)


PLANTED = PlantedSignal(0, 12, 0, 37, frozenset({0, 4, 8}), 0.9, 0.1)


@pytest.fixture(scope="session")
def planted_cohort(tmp_path_factory):
    out = tmp_path_factory.mktemp("planted")
    cfg = GeneratorConfig(n_files=1, variants_per_file=50, n_patients=2000, seed=2024, planted=PLANTED)
    return generate_cohort(cfg, out)
