from __future__ import annotations

import gzip
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epimdr.errors import (
    DegenerateCohort,
    DuplicatePatient,
    MalformedGenotype,
    MalformedLabel,
    MalformedRow,
)
from epimdr.genotypes import (
    GenotypeCode,
    GenotypeFile,
    decode_block,
    decode_genotype,
    parse_genotype_bytes,
    parse_genotype_file,
    parse_labels,
    write_genotype_file,
)

from conftest import make_variant

TABLE1_ROWS = [
    "22,16231367,A,G,1,0,0,1,0,0,0,1,0",
    "22,17052123,G,A,0,1,0,0,0,1,0,0,1",
    "22,17055458,G,A,0,1,0,1,0,0,0,1,0",
]


class TestDecodeGenotype:
    def test_table_row_one_patient_one(self):
        assert decode_genotype((1, 0, 0)) is GenotypeCode.HOM_REF

    def test_all_zero_is_missing(self):
        assert decode_genotype((0, 0, 0)) is GenotypeCode.MISSING

    def test_multi_hot_rejected(self):
        with pytest.raises(MalformedGenotype):
            decode_genotype((1, 1, 0))

    @pytest.mark.parametrize("triple", [(2, 0, 0), (0, -1, 0), (0, 0, 7)])
    def test_out_of_range_rejected(self, triple):
        with pytest.raises(MalformedGenotype):
            decode_genotype(triple)

    def test_total_on_valid_triples_and_covers_all_codes(self):
        image = set()
        for triple in itertools.product((0, 1), repeat=3):
            if sum(triple) > 1:
                with pytest.raises(MalformedGenotype):
                    decode_genotype(triple)
            else:
                image.add(decode_genotype(triple))
        assert image == set(GenotypeCode)

    def test_vectorised_decode_agrees(self):
        triples = [t for t in itertools.product((0, 1), repeat=3) if sum(t) <= 1]
        flat = np.array([v for t in triples for v in t])
        assert decode_block(flat).tolist() == [int(decode_genotype(t)) for t in triples]


class TestParseGenotypeFile:
    def test_four_id_columns_from_table(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("\n".join(TABLE1_ROWS) + "\n")
        gfile = parse_genotype_file(path)
        assert len(gfile) == 3 and gfile.n_patients == 3
        first = gfile.variants[0]
        assert (first.chromosome, first.position, first.ref_allele, first.alt_allele) == (
            "22", 16231367, "A", "G")
        assert first.variant_id is None
        assert first.genotypes.tolist() == [0, 0, 1]

    def test_full_width_row(self, tmp_path):
        n = 1128
        row = "22,16231367,A,G," + ",".join(["1,0,0"] * n)
        path = tmp_path / "wide.csv"
        path.write_text(row + "\n")
        gfile = parse_genotype_file(path, expected_patients=n)
        assert gfile.n_patients == 1128

    def test_five_id_columns(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("22,100,rs1,A,G,0,0,1,1,0,0\n")
        v = parse_genotype_file(path).variants[0]
        assert v.variant_id == "rs1" and v.ref_allele == "A" and v.genotypes.tolist() == [2, 0]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        gfile = parse_genotype_file(path)
        assert len(gfile) == 0 and gfile.n_patients == 0

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("22,1,A,G," + ",".join(["1,0,0"] * 5) + "\n" + "22,2,A,G," + ",".join(["1,0,0"] * 4) + "\n")
        with pytest.raises(MalformedRow):
            parse_genotype_file(path)

    def test_header_row_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("chromosome,position,ref,alt,AA,Aa,aa\n22,1,A,G,1,0,0\n")
        with pytest.raises(MalformedRow):
            parse_genotype_file(path)

    def test_expected_patients_mismatch(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("\n".join(TABLE1_ROWS) + "\n")
        with pytest.raises(MalformedRow):
            parse_genotype_file(path, expected_patients=4)

    def test_multi_hot_cell_propagates(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("22,1,A,G,1,1,0\n")
        with pytest.raises(MalformedGenotype):
            parse_genotype_file(path)

    def test_ref_equal_alt_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("22,1,A,A,1,0,0\n")
        with pytest.raises(MalformedRow):
            parse_genotype_file(path)

    def test_gzip_by_suffix(self, tmp_path):
        path = tmp_path / "t.csv.gz"
        with gzip.open(path, "wt") as fh:
            fh.write("\n".join(TABLE1_ROWS) + "\n")
        assert len(parse_genotype_file(path)) == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_genotype_file(tmp_path / "nope.csv")


codes_strategy = st.lists(st.integers(0, 3), min_size=1, max_size=40)


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 6).flatmap(
        lambda n: st.lists(
            st.lists(st.integers(0, 3), min_size=n, max_size=n), min_size=0, max_size=6
        )
    ),
    suffix=st.sampled_from([".csv", ".csv.gz"]),
    with_id=st.booleans(),
)
def test_round_trip(tmp_path_factory, rows, suffix, with_id):
    variants = tuple(
        make_variant(r, position=10 * i, variant_id=f"rs{i}" if with_id else None)
        for i, r in enumerate(rows)
    )
    gfile = GenotypeFile(file_id=0, source_path="x", variants=variants)
    path = tmp_path_factory.mktemp("rt") / f"g{suffix}"
    write_genotype_file(gfile, path)
    back = parse_genotype_file(path)
    assert back.variants == variants
    assert len({v.n_patients for v in back.variants}) <= 1
    assert parse_genotype_bytes(path.name, path.read_bytes()).variants == variants


class TestParseLabels:
    def test_minimal(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("P1,1\nP2,0\n")
        labels = parse_labels(path)
        assert labels.patient_ids == ("P1", "P2")
        assert (labels.n_cases, labels.n_controls) == (1, 1)

    def test_duplicate(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("P1,1\nP1,0\n")
        with pytest.raises(DuplicatePatient):
            parse_labels(path)

    def test_degenerate(self, tmp_path):
        path = tmp_path / "l.csv"
        path.write_text("P1,1\nP2,1\n")
        with pytest.raises(DegenerateCohort):
            parse_labels(path)

    @pytest.mark.parametrize("marker", ["2", "yes", "-1"])
    def test_bad_marker(self, tmp_path, marker):
        path = tmp_path / "l.csv"
        path.write_text(f"P1,1\nP2,{marker}\n")
        with pytest.raises(MalformedLabel):
            parse_labels(path)
