import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_sf
from sfsearch.blocks import (
    KNOWN_SFS,
    BlockSF,
    EmbeddingTable,
    SFParseError,
    format_sf,
    known_sf,
    parse_sf,
    relation_col_vector,
    relation_row_vector,
    resolve_sf,
    score,
    score_all_heads,
    score_all_tails,
)

entries_st = st.lists(st.integers(-4, 4), min_size=16, max_size=16).map(
    lambda xs: BlockSF(tuple(xs))
)


def chunks(v):
    return np.split(np.asarray(v, dtype=np.float64), 4)


# direct formulas, written independently of the block machinery
def direct_distmult(h, r, t):
    return float(np.sum(h * r * t))


def direct_complex(h, r, t):
    h1, h2, h3, h4 = chunks(h)
    r1, r2, r3, r4 = chunks(r)
    t1, t2, t3, t4 = chunks(t)
    hc = np.concatenate([h1, h2]) + 1j * np.concatenate([h3, h4])
    rc = np.concatenate([r1, r2]) + 1j * np.concatenate([r3, r4])
    tc = np.concatenate([t1, t2]) + 1j * np.concatenate([t3, t4])
    return float(np.real(np.sum(hc * rc * np.conj(tc))))


def direct_analogy(h, r, t):
    h1, h2, h3, h4 = chunks(h)
    r1, r2, r3, r4 = chunks(r)
    t1, t2, t3, t4 = chunks(t)
    real_part = np.sum(np.concatenate([h1, h2]) * np.concatenate([r1, r2]) * np.concatenate([t1, t2]))
    complex_part = np.real(np.sum((h3 + 1j * h4) * (r3 + 1j * r4) * np.conj(t3 + 1j * t4)))
    return float(real_part + complex_part)


def direct_simple(h, r, t):
    h1, h2, h3, h4 = chunks(h)
    r1, r2, r3, r4 = chunks(r)
    t1, t2, t3, t4 = chunks(t)
    hat = lambda a, b: np.concatenate([a, b])  # noqa: E731
    return float(
        np.sum(hat(h1, h2) * hat(r1, r2) * hat(t3, t4))
        + np.sum(hat(h3, h4) * hat(r3, r4) * hat(t1, t2))
    )


DIRECT = {
    "distmult": direct_distmult,
    "complex": direct_complex,
    "analogy": direct_analogy,
    "simple": direct_simple,
}


class TestKnownLayouts:
    def test_distmult_layout(self):
        sf = known_sf("distmult")
        assert sf.block_count == 4
        assert np.array_equal(sf.matrix, np.diag([1, 2, 3, 4]))

    def test_complex_layout(self):
        m = known_sf("complex").matrix
        expected = {(1, 1): 1, (1, 3): 3, (3, 1): -3, (3, 3): 1,
                    (2, 2): 2, (2, 4): 4, (4, 2): -4, (4, 4): 2}
        for (i, j), v in expected.items():
            assert m[i - 1, j - 1] == v
        assert known_sf("complex").block_count == 8

    def test_analogy_and_simple_counts(self):
        assert known_sf("analogy").block_count == 6
        assert known_sf("simple").block_count == 4
        assert not np.diag(known_sf("simple").matrix).any()

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            known_sf("transe")

    @pytest.mark.parametrize("name", sorted(DIRECT))
    def test_matches_direct_formula(self, name, rng):
        sf = known_sf(name)
        for _ in range(50):
            h, r, t = rng.normal(size=(3, 64))
            expected = DIRECT[name](h, r, t)
            assert score(sf, h, r, t) == pytest.approx(expected, rel=1e-9, abs=1e-12)


class TestScore:
    def test_zero_embeddings(self, rng):
        sf = random_sf(rng)
        z = np.zeros(16)
        assert score(sf, z, z, z) == 0.0

    def test_distmult_all_ones(self):
        ones = np.ones(4)
        assert score(known_sf("distmult"), ones, ones, ones) == 4.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score(known_sf("distmult"), np.ones(8), np.ones(4), np.ones(8))
        with pytest.raises(ValueError):
            score(known_sf("distmult"), np.ones(6), np.ones(6), np.ones(6))

    def test_bilinearity(self, rng):
        for _ in range(20):
            sf = random_sf(rng)
            h, h2, r, t, t2 = rng.normal(size=(5, 16))
            a = rng.normal()
            assert score(sf, a * h, r, t) == pytest.approx(a * score(sf, h, r, t), rel=1e-9, abs=1e-12)
            assert score(sf, h + h2, r, t) == pytest.approx(
                score(sf, h, r, t) + score(sf, h2, r, t), rel=1e-9, abs=1e-12
            )
            assert score(sf, h, r, t + t2) == pytest.approx(
                score(sf, h, r, t) + score(sf, h, r, t2), rel=1e-9, abs=1e-12
            )

    def test_transpose_swaps_head_and_tail(self, rng):
        for _ in range(20):
            sf = random_sf(rng)
            h, r, t = rng.normal(size=(3, 16))
            assert score(sf, h, r, t) == pytest.approx(
                score(sf.transpose(), t, r, h), rel=1e-12, abs=1e-12
            )

    def test_against_dense_relation_matrix(self, rng):
        # oracle: build h^T R t with R assembled block by block
        for _ in range(20):
            sf = random_sf(rng)
            h, r, t = rng.normal(size=(3, 12))
            c = 3
            R = np.zeros((12, 12))
            for i in range(4):
                for j in range(4):
                    v = sf.matrix[i, j]
                    if v:
                        R[i * c:(i + 1) * c, j * c:(j + 1) * c] = np.sign(v) * np.diag(
                            r[(abs(v) - 1) * c:abs(v) * c]
                        )
            assert score(sf, h, r, t) == pytest.approx(h @ R @ t, rel=1e-10, abs=1e-12)


class TestRowColVectors:
    def test_distmult_ones(self):
        q = relation_row_vector(known_sf("distmult"), np.ones(4), np.ones(4))
        assert np.array_equal(q, np.ones(4))

    def test_self_consistency(self, rng):
        for _ in range(100):
            sf = random_sf(rng)
            h, r, t = rng.normal(size=(3, 20))
            s = score(sf, h, r, t)
            assert relation_row_vector(sf, h, r) @ t == pytest.approx(s, rel=1e-12, abs=1e-12)
            assert h @ relation_col_vector(sf, t, r) == pytest.approx(s, rel=1e-12, abs=1e-12)

    def test_single_block(self, rng):
        sf = BlockSF.from_terms([(1, 3, 2)])
        h, r = rng.normal(size=(2, 8))
        q = relation_row_vector(sf, h, r)
        hc, rc = chunks(h), chunks(r)
        qc = chunks(q)
        assert np.allclose(qc[2], hc[0] * rc[1])
        for n in (0, 1, 3):
            assert not qc[n].any()


class TestAllScores:
    def test_tiny_table_matches_individual_scores(self, rng):
        table = EmbeddingTable(rng.normal(size=(3, 8)), rng.normal(size=(2, 8)))
        for _ in range(10):
            sf = random_sf(rng)
            h, r = rng.normal(size=(2, 8))
            tails = score_all_tails(sf, h, r, table)
            heads = score_all_heads(sf, h, r, table)
            for e in range(3):
                assert tails[e] == pytest.approx(score(sf, h, r, table.entity[e]), rel=1e-12, abs=1e-12)
                assert heads[e] == pytest.approx(score(sf, table.entity[e], r, h), rel=1e-12, abs=1e-12)

    def test_zero_head(self, rng):
        table = EmbeddingTable(rng.normal(size=(5, 8)), rng.normal(size=(2, 8)))
        out = score_all_tails(known_sf("complex"), np.zeros(8), table.relation[0], table)
        assert np.array_equal(out, np.zeros(5))

    def test_distmult_head_tail_symmetry(self, rng):
        table = EmbeddingTable(rng.normal(size=(30, 16)), rng.normal(size=(2, 16)))
        h, r = table.entity[3], table.relation[1]
        sf = known_sf("distmult")
        assert np.allclose(score_all_tails(sf, h, r, table), score_all_heads(sf, h, r, table), rtol=1e-12)

    def test_width_mismatch(self, rng):
        table = EmbeddingTable(rng.normal(size=(5, 8)), rng.normal(size=(2, 8)))
        with pytest.raises(ValueError):
            score_all_tails(known_sf("distmult"), np.ones(12), np.ones(12), table)

    def test_table_requires_multiple_of_four(self):
        with pytest.raises(ValueError):
            EmbeddingTable(np.zeros((3, 6)), np.zeros((2, 6)))


class TestText:
    def test_distmult_string(self):
        text = "1,1,+1;2,2,+2;3,3,+3;4,4,+4"
        assert format_sf(known_sf("distmult")) == text
        assert parse_sf(text) == known_sf("distmult")

    def test_empty(self):
        assert parse_sf("") == BlockSF.zeros()
        assert format_sf(BlockSF.zeros()) == ""

    def test_unsorted_input_accepted(self):
        assert parse_sf("4,4,+4;1,1,+1;3,3,+3;2,2,+2") == known_sf("distmult")

    @pytest.mark.parametrize(
        "bad",
        ["1,1,+1;1,1,-2", "0,1,+1", "5,1,+1", "1,1,+5", "1,1,+0", "1,1", "a,b,c"],
    )
    def test_parse_errors(self, bad):
        with pytest.raises(SFParseError):
            parse_sf(bad)

    @given(entries_st)
    @settings(max_examples=200)
    def test_round_trip(self, sf):
        assert parse_sf(format_sf(sf)) == sf

    def test_resolve(self):
        for name, sf in KNOWN_SFS.items():
            assert resolve_sf(name.upper()) == sf
        assert resolve_sf("1,2,-3") == BlockSF.from_terms([(1, 2, -3)])
