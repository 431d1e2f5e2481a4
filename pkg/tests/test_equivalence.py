import itertools

import numpy as np
import pytest

from conftest import random_sf
from sfsearch.blocks import BlockSF, format_sf, known_sf, score
from sfsearch.equivalence import (
    GROUP_SIZE,
    GroupElement,
    all_elements,
    apply,
    canonical_form,
    canonical_key,
    check_c2,
    enumerate_b4,
    filter_accept,
    orbit,
    orbit_size,
    random_element,
)


def brute_canonical(sf):
    """Independent oracle: min over formatted images via per-element apply."""
    return min(format_sf(apply(e, sf)) for e in all_elements())


class TestGroup:
    def test_size(self):
        assert GROUP_SIZE == 9216
        assert len(set(all_elements())) == 9216

    def test_identity(self, rng):
        sf = random_sf(rng)
        assert apply(GroupElement(), sf) == sf

    def test_relabel_distmult(self):
        e = GroupElement(relation_perm=(1, 0, 2, 3))
        assert np.array_equal(np.diag(apply(e, known_sf("distmult")).matrix), [2, 1, 3, 4])

    def test_sign_flip_on_simple(self):
        simple = known_sf("simple")
        e = GroupElement(sign_flips=(False, True, False, True))
        out = apply(e, simple).matrix
        assert out[1, 3] == -simple.matrix[1, 3]
        assert out[3, 1] == -simple.matrix[3, 1]
        assert out[0, 2] == simple.matrix[0, 2] and out[2, 0] == simple.matrix[2, 0]

    def test_entity_perm_moves_blocks(self):
        sf = BlockSF.from_terms([(1, 2, 3)])
        e = GroupElement(entity_perm=(2, 0, 1, 3))
        assert apply(e, sf) == BlockSF.from_terms([(3, 1, 3)])

    def test_inverse(self, rng):
        for _ in range(200):
            sf, e = random_sf(rng), random_element(rng)
            assert apply(e.inverse(), apply(e, sf)) == sf

    def test_closure(self, rng):
        # composition of two elements equals some single element
        for _ in range(10):
            sf = random_sf(rng, 6)
            e1, e2 = random_element(rng), random_element(rng)
            twice = apply(e2, apply(e1, sf))
            assert any(np.array_equal(row, twice.entries) for row in orbit(sf))

    def test_orbit_rows_match_apply(self, rng):
        sf = random_sf(rng, 7)
        images = orbit(sf)
        elems = all_elements()
        for n in rng.choice(GROUP_SIZE, size=100, replace=False):
            assert tuple(images[n]) == apply(elems[n], sf).entries

    def test_invariance_preserves_scores(self, rng):
        # transformed SF with transformed embeddings scores identically
        d, c = 16, 4
        for _ in range(20):
            sf, e = random_sf(rng), random_element(rng)
            h, r, t = rng.normal(size=(3, d))
            hc, rc, tc = (x.reshape(4, c) for x in (h, r, t))
            h2, t2, r2 = np.empty_like(hc), np.empty_like(tc), np.empty_like(rc)
            for i in range(4):
                h2[e.entity_perm[i]] = hc[i]
                t2[e.entity_perm[i]] = tc[i]
                r2[e.relation_perm[i]] = -rc[i] if e.sign_flips[i] else rc[i]
            got = score(apply(e, sf), h2.ravel(), r2.ravel(), t2.ravel())
            assert got == pytest.approx(score(sf, h, r, t), rel=1e-12, abs=1e-12)


class TestC2:
    def test_distmult(self):
        assert check_c2(known_sf("distmult"))

    @pytest.mark.parametrize("name", ["complex", "analogy", "simple"])
    def test_classics(self, name):
        assert check_c2(known_sf(name))

    def test_zero_row(self):
        sf = BlockSF.from_terms([(1, 1, 1), (1, 2, 2), (3, 3, 3), (4, 4, 4)])
        assert not check_c2(sf)

    def test_missing_label(self):
        sf = BlockSF.from_matrix(np.diag([1, 1, 2, 3]))
        assert not check_c2(sf)

    def test_repeated_row(self):
        sf = BlockSF.from_terms(
            [(1, 1, 1), (1, 2, 2), (2, 1, 1), (2, 2, 2), (3, 3, 3), (4, 4, 4)]
        )
        assert not check_c2(sf)

    def test_negated_row_counts_as_repeated(self):
        sf = BlockSF.from_terms(
            [(1, 1, 1), (1, 2, 2), (2, 1, -1), (2, 2, -2), (3, 3, 3), (4, 4, 4)]
        )
        assert not check_c2(sf)

    def test_invariant_under_group(self, rng):
        for _ in range(200):
            sf, e = random_sf(rng, int(rng.integers(4, 9))), random_element(rng)
            assert check_c2(apply(e, sf)) == check_c2(sf)


class TestCanonical:
    def test_matches_brute_force(self, rng):
        for n in (0, 1, 4, 6, 9):
            sf = random_sf(rng, n)
            assert canonical_key(sf) == brute_canonical(sf)

    def test_group_action_property(self, rng):
        for _ in range(100):
            sf, e = random_sf(rng), random_element(rng)
            assert canonical_form(apply(e, sf)) == canonical_form(sf)

    def test_idempotent(self, rng):
        for _ in range(50):
            c = canonical_form(random_sf(rng))
            assert canonical_form(c) == c

    def test_distmult_orbit(self):
        images = {apply(e, known_sf("distmult")) for e in all_elements()}
        assert len(images) == 384
        assert orbit_size(known_sf("distmult")) == 384

    def test_orbit_sizes_divide_group(self, rng):
        for _ in range(20):
            assert GROUP_SIZE % orbit_size(random_sf(rng)) == 0

    def test_inequivalent_differ(self):
        assert canonical_form(known_sf("distmult")) != canonical_form(known_sf("simple"))


class TestFilter:
    def test_accepts_fresh(self):
        assert filter_accept(known_sf("distmult"), set(), set())

    def test_rejects_equivalent(self, rng):
        sf = known_sf("complex")
        pending = {canonical_key(sf)}
        for _ in range(10):
            assert not filter_accept(apply(random_element(rng), sf), pending, set())
            assert not filter_accept(apply(random_element(rng), sf), set(), pending)

    def test_rejects_c2_violation(self):
        assert not filter_accept(BlockSF.from_matrix(np.diag([1, 1, 2, 3])), set(), set())


class TestEnumerateB4:
    def test_five_classes(self):
        found = enumerate_b4()
        assert len(found) == 5
        assert known_sf("distmult") in found
        for sf in found:
            assert sf.block_count == 4 and check_c2(sf)
            assert canonical_form(sf) == sf
        assert [format_sf(s) for s in found] == sorted(format_sf(s) for s in found)

    def test_matches_naive_dedup(self):
        # oracle: permutation-matrix supports with distinct labels; dedup by
        # brute-force canonical strings over a reduced but complete family
        keys = set()
        for perm in itertools.permutations(range(4)):
            for labels in itertools.permutations(range(1, 5)):
                sf = BlockSF.from_terms([(i + 1, perm[i] + 1, labels[i]) for i in range(4)])
                keys.add(canonical_key(sf))
        assert keys == {format_sf(s) for s in enumerate_b4()}
