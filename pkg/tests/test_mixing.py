import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

from mpelab import corpus
from mpelab.errors import DomainError
from mpelab.kernel import iterate_kernel
from mpelab.mixing import (check_relations, dobrushin_coefficient, minorization, mixing_report,
                           strong_mixing_ratio, supports_equivalent)

from strategies import kernels


def subset_sup(P):
    """sup over pairs (x, y) and sets A of P(x,A) - P(y,A), by enumeration."""
    n = P.shape[0]
    best = 0.0
    for mask in itertools.product((False, True), repeat=n):
        mass = P[:, np.array(mask)].sum(axis=1)
        best = max(best, float(mass.max() - mass.min()))
    return best


class TestDobrushin:

    def test_two_state(self, two_state):
        assert dobrushin_coefficient(two_state) == 0.5

    def test_rank_one_mixes_at_once(self, rank_one):
        assert dobrushin_coefficient(rank_one) == pytest.approx(0.0, abs=1e-15)

    def test_power_of_two_state(self):
        K = corpus.two_state(0.5).kernel
        assert dobrushin_coefficient(K, 3) == pytest.approx(0.125)

    @settings(max_examples=40, deadline=None)
    @given(kernels(min_n=2, max_n=7, allow_zeros=True))
    def test_pairwise_equals_subset_sup(self, K):
        assert dobrushin_coefficient(K) == pytest.approx(subset_sup(K.matrix), abs=1e-12)

    def test_shift_chain_exact_half(self):
        assert dobrushin_coefficient(corpus.shift_chain(64).kernel) == 0.5


class TestMinorization:

    def test_two_state(self, two_state):
        m = minorization(two_state)
        assert m.d == pytest.approx(0.5)
        np.testing.assert_allclose(m.eta.weights, [1.0, 0.0])

    def test_no_common_mass(self, flip):
        m = minorization(flip)
        assert m.d == 0.0 and m.eta is None

    @settings(max_examples=40, deadline=None)
    @given(kernels(min_n=2, max_n=6, allow_zeros=True))
    def test_minorizing_measure_is_below_every_row(self, K):
        m = minorization(K, 2)
        if m.d > 0:
            P2 = iterate_kernel(K, 2).matrix
            assert np.all(P2 >= m.d * m.eta.weights[None, :] - 1e-15)


class TestStrongMixing:

    def test_rank_one(self, rank_one):
        assert strong_mixing_ratio(rank_one) == pytest.approx(1.0)

    def test_missing_support_is_infinite(self, two_state):
        assert strong_mixing_ratio(two_state) == math.inf

    def test_shift_chain_never_strongly_mixing(self):
        report = mixing_report(corpus.shift_chain(64).kernel, 62)
        assert all(math.isinf(r) for r in report.strong_ratio_n.values())

    @settings(max_examples=40, deadline=None)
    @given(kernels(min_n=2, max_n=6, allow_zeros=True))
    def test_finite_ratio_means_equal_supports(self, K):
        for n in (1, 2, 3):
            if math.isfinite(strong_mixing_ratio(K, n)):
                assert supports_equivalent(K, n)

    def test_supports_equivalent(self, two_state, rank_one):
        assert supports_equivalent(rank_one)
        assert not supports_equivalent(two_state)


class TestRelations:

    @settings(max_examples=60, deadline=None)
    @given(kernels(min_n=2, max_n=8, allow_zeros=True))
    def test_relations_hold(self, K):
        rep = check_relations(K, 4)
        assert rep.max_violation <= 1e-12
        assert rep.checks == 4 * 2 + 16

    def test_report_serialises_infinity(self, two_state):
        doc = mixing_report(two_state, 2).to_dict()
        assert doc["strong_ratio"]["1"] == "inf"
        assert doc["lambda"]["2"] == pytest.approx(0.25)
        assert doc["minorization"]["1"]["eta"] == [1.0, 0.0]

    def test_bad_horizon(self, two_state):
        with pytest.raises(DomainError):
            mixing_report(two_state, 0)
