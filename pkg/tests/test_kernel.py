import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings

from mpelab import corpus
from mpelab.errors import (DomainError, EmptyTaboo, InvalidInput, NegativeEntry,
                           NonStochasticRow, NonUniqueInvariant)
from mpelab.kernel import (build_kernel, class_period, communicating_classes, hahn_decomposition,
                           invariant_measure, iterate_kernel, iterate_kernel_log, taboo_tail,
                           taboo_tails, total_variation)
from mpelab.models import Distribution, FiniteKernel, StateSpace

from strategies import kernels


class TestBuildKernel:

    def test_rejects_row_not_summing_to_one(self):
        with pytest.raises(NonStochasticRow) as err:
            build_kernel(StateSpace.integer(2), [[0.6, 0.5], [0.5, 0.5]])
        assert err.value.row == 0
        assert err.value.total == pytest.approx(1.1)

    def test_rejects_negative_entry(self):
        with pytest.raises(NegativeEntry) as err:
            build_kernel(StateSpace.integer(2), [[1.5, -0.5], [0.5, 0.5]])
        assert (err.value.row, err.value.col) == (0, 1)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            build_kernel(StateSpace.integer(3), [[1.0, 0.0], [0.0, 1.0]])

    def test_renormalises_within_tolerance(self):
        K = build_kernel(StateSpace.integer(2), [[0.5, 0.5 + 1e-14], [0.25, 0.75]])
        np.testing.assert_allclose(K.matrix.sum(axis=1), 1.0, atol=1e-15)

    def test_matrix_is_read_only(self, two_state):
        with pytest.raises(ValueError):
            two_state.matrix[0, 0] = 0.5


class TestStateSpace:

    def test_duplicate_labels(self):
        with pytest.raises(InvalidInput):
            StateSpace(("a", "b", "a"))

    def test_integer_distances(self):
        D = StateSpace((1, 4, 6)).distances()
        np.testing.assert_array_equal(D, [[0, 3, 5], [3, 0, 2], [5, 2, 0]])

    def test_explicit_metric_must_satisfy_triangle(self):
        bad = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
        with pytest.raises(InvalidInput):
            StateSpace(("a", "b", "c"), np.array(bad, dtype=float))

    def test_text_labels_need_a_metric(self):
        with pytest.raises(InvalidInput):
            StateSpace(("a", "b")).distances()

    def test_unknown_state(self):
        with pytest.raises(InvalidInput):
            StateSpace.integer(3).index(7)


class TestIterate:

    def test_first_power_is_kernel(self, two_state):
        assert iterate_kernel(two_state, 1) is two_state

    def test_matches_matrix_power(self, random_kernel):
        K = random_kernel(5, 0)
        np.testing.assert_allclose(iterate_kernel(K, 7).matrix, np.linalg.matrix_power(K.matrix, 7), atol=1e-14)

    @pytest.mark.parametrize("n", [0, -1, 10**6 + 1])
    def test_power_guard(self, two_state, n):
        with pytest.raises(DomainError):
            iterate_kernel(two_state, n)

    def test_log_power_agrees_with_linear_power(self, random_kernel):
        K = random_kernel(6, 1)
        np.testing.assert_allclose(np.exp(iterate_kernel_log(K, 9)), iterate_kernel(K, 9).matrix, rtol=1e-10)

    def test_log_power_keeps_underflowing_support(self):
        """2 -> 52 in 50 steps has probability 2^-1275, below the smallest double."""
        K = corpus.shift_chain(64).kernel
        assert iterate_kernel(K, 50).matrix[1, 51] == 0.0
        L = iterate_kernel_log(K, 50)
        assert L[1, 51] == pytest.approx(-1275 * math.log(2.0), rel=1e-10)
        assert L[0, 51] == -math.inf


class TestInvariantMeasure:

    def test_absorbing_state(self, two_state):
        np.testing.assert_allclose(invariant_measure(two_state).weights, [1.0, 0.0], atol=1e-14)

    def test_doubly_stochastic_is_uniform(self, cyclic):
        np.testing.assert_allclose(invariant_measure(cyclic).weights, np.full(3, 1 / 3), atol=1e-14)

    def test_two_closed_classes(self):
        with pytest.raises(NonUniqueInvariant) as err:
            invariant_measure(build_kernel(StateSpace.integer(2), np.eye(2)))
        assert err.value.n_closed == 2

    @settings(max_examples=50, deadline=None)
    @given(kernels(min_n=2, max_n=8))
    def test_stationary(self, K):
        nu = invariant_measure(K).weights
        np.testing.assert_allclose(nu @ K.matrix, nu, atol=1e-12)

    def test_periodic_chain(self, flip):
        np.testing.assert_allclose(invariant_measure(flip).weights, [0.5, 0.5], atol=1e-14)


class TestSignedMeasures:

    def test_hahn_decomposition(self):
        mu1 = Distribution([0.5, 0.5, 0.0])
        mu2 = Distribution([0.25, 0.25, 0.5])
        dec = hahn_decomposition(mu1, mu2)
        assert dec.positive_set == frozenset({0, 1})
        assert dec.tv_norm == pytest.approx(0.5)

    def test_total_variation(self):
        assert total_variation([1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5)


class TestHittingTimes:

    def test_two_state_tails(self, two_state):
        T = taboo_tails(two_state, [0], 10)
        np.testing.assert_allclose(T[1], 0.5 ** np.arange(11))
        # tau >= 1: starting inside B does not count as a hit
        np.testing.assert_array_equal(T[0], [1.0] + [0.0] * 10)

    def test_single_tail(self, two_state):
        assert taboo_tail(two_state, [0], 1, 3) == pytest.approx(0.125)

    def test_empty_taboo_set(self, two_state):
        with pytest.raises(EmptyTaboo):
            taboo_tails(two_state, [], 3)

    @settings(max_examples=30, deadline=None)
    @given(kernels(min_n=3, max_n=6, allow_zeros=True))
    def test_tails_nonincreasing(self, K):
        T = taboo_tails(K, [0], 20)
        assert np.all(np.diff(T, axis=1) <= 1e-12)
        assert np.all((T >= 0) & (T <= 1))

    def test_drift_is_reported_and_clipped(self, caplog):
        K = FiniteKernel(StateSpace.integer(2), np.array([[1.0, 0.0], [0.0, 1.0 + 1e-9]]))
        with caplog.at_level(logging.WARNING):
            T = taboo_tails(K, [0], 5, logging.getLogger("mpelab.tests"))
        assert "Taboo tails drift" in caplog.text
        np.testing.assert_array_equal(T[1], 1.0)

    def test_clean_tails_are_quiet(self, random_kernel, caplog):
        with caplog.at_level(logging.WARNING):
            taboo_tails(random_kernel(6, 4), [0, 1], 50, logging.getLogger("mpelab.tests"))
        assert caplog.text == ""


class TestClasses:

    def test_two_state_classes(self, two_state):
        classes = communicating_classes(two_state)
        assert [(c.states, c.recurrent) for c in classes] == [((0,), True), ((1,), False)]

    def test_period(self, cyclic, flip):
        assert class_period(cyclic, (0, 1, 2)) == 1
        assert class_period(flip, (0, 1)) == 2

    def test_irreducible_single_class(self, random_kernel):
        classes = communicating_classes(random_kernel(5, 3))
        assert len(classes) == 1 and classes[0].recurrent
