import math

import numpy as np
import pytest

from mpelab import corpus
from mpelab.errors import DomainError, InvalidInput
from mpelab.ergodic import (bump_tail_check, escape_geometric_test, lambda_convergence_check,
                            risk_sensitive_average, risk_sensitive_averages, stay_lower_bound,
                            visit_count_tail)
from mpelab.kernel import build_kernel
from mpelab.models import StateSpace
from mpelab.mpe import solve_mpe


class TestAverages:

    def test_constant_reward(self, cyclic):
        trace = risk_sensitive_averages(cyclic, np.full(3, 0.7), 25)
        np.testing.assert_allclose(trace.averages, 0.7, atol=1e-12)
        assert trace.lam is None and trace.bounds is None

    def test_single_value_matches_trace(self, random_kernel):
        K = random_kernel(4, 9)
        g = np.array([0.5, -0.2, 1.0, 0.0])
        assert risk_sensitive_average(K, g, 2, 12) == risk_sensitive_averages(K, g, 12).averages[11, 2]

    def test_converges_inside_envelope(self, cyclic):
        g = np.array([1.0, 0.0, 0.0])
        sol = solve_mpe(cyclic, g)
        assert lambda_convergence_check(cyclic, g, sol, 200) <= 1e-9
        trace = risk_sensitive_averages(cyclic, g, 200, sol)
        assert trace.averages[-1] == pytest.approx(np.full(3, sol.lam), abs=2e-2)

    def test_horizon_guard(self, cyclic):
        with pytest.raises(DomainError):
            risk_sensitive_averages(cyclic, [0.0, 0.0, 0.0], 0)


class TestEscape:

    def test_two_state(self, two_state):
        rep = escape_geometric_test(two_state, [0], [0.9, 0.5, 0.1], 30)
        assert rep.first_n == {0.9: 1, 0.5: 1, 0.1: None}
        assert not rep.passed and not rep.vacuous

    def test_acyclic_transient_part_passes_everything(self):
        K = build_kernel(StateSpace.integer(3), [[1.0, 0.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
        rep = escape_geometric_test(K, [0], [0.9, 0.5, 0.1], 20)
        assert rep.passed
        assert rep.first_n[0.1] == 2

    def test_vacuous_when_support_is_everything(self, two_state):
        rep = escape_geometric_test(two_state, [0, 1], [0.5], 10)
        assert rep.vacuous and rep.passed

    def test_alpha_range(self, two_state):
        with pytest.raises(DomainError):
            escape_geometric_test(two_state, [0], [1.0], 10)


class TestVisitCounts:

    def test_two_state_law(self, two_state):
        np.testing.assert_allclose(visit_count_tail(two_state, [1], 1, 3), [0.5, 0.25, 0.125, 0.125])

    def test_sums_to_one(self, random_kernel):
        law = visit_count_tail(random_kernel(5, 2), [0, 3], 1, 40)
        assert law.sum() == pytest.approx(1.0)
        assert np.all(law >= 0)

    def test_zero_horizon(self, cyclic):
        np.testing.assert_array_equal(visit_count_tail(cyclic, [0], 0, 0), [1.0])

    def test_horizon_guard(self, cyclic):
        with pytest.raises(DomainError):
            visit_count_tail(cyclic, [0], 0, 1001)


class TestStayBound:

    def test_bound_when_stay_is_slow(self, two_state):
        assert stay_lower_bound(two_state, [0.0, 3.0], [1], 0.4, 20) == pytest.approx(3.0 + math.log(0.4))

    def test_no_bound_when_escape_is_fast(self, two_state):
        assert stay_lower_bound(two_state, [0.0, 3.0], [1], 0.6, 20) is None

    def test_negative_reward(self, two_state):
        assert stay_lower_bound(two_state, [-1.0, 3.0], [1], 0.4, 20) is None

    def test_empty_set(self, two_state):
        with pytest.raises(InvalidInput):
            stay_lower_bound(two_state, [0.0, 3.0], [], 0.4, 20)

    def test_whole_space(self, cyclic):
        bound = stay_lower_bound(cyclic, [1.0, 2.0, 3.0], [0, 1, 2], 0.5, 5)
        assert bound == pytest.approx(1.0 + math.log(0.5))
        assert solve_mpe(cyclic, [1.0, 2.0, 3.0]).lam >= bound - 1e-8


class TestBumpTails:

    @pytest.mark.parametrize("N,x_bar", [(15, 8), (20, 6)])
    def test_hitting_tail_bound(self, N, x_bar):
        chain = corpus.lazy_walk(N, x_bar=x_bar, eta=2.5, m=4)
        sol = solve_mpe(chain.kernel, chain.rewards["bump"])
        assert sol.solved and sol.lam < 1.0
        ball = corpus.bump_ball(x_bar, 2.5, N)
        assert bump_tail_check(chain.kernel, sol, ball, 100) <= 1e-10
