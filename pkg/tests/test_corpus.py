import math

import numpy as np
import pytest

from mpelab import corpus
from mpelab.errors import BadParameters
from mpelab.mpe import existence_certificate, solve_mpe


class TestConstructors:

    def test_two_state_matrix(self):
        chain = corpus.two_state(0.3, 1.0, 2.0)
        np.testing.assert_allclose(chain.kernel.matrix, [[1.0, 0.0], [0.7, 0.3]])
        np.testing.assert_array_equal(chain.rewards["g"].values, [1.0, 2.0])
        assert chain.kernel.space.labels == (1, 2)

    @pytest.mark.parametrize("lam", [0.0, 1.0, 1.5])
    def test_two_state_rejects_lambda(self, lam):
        with pytest.raises(BadParameters):
            corpus.two_state(lam)

    @pytest.mark.parametrize("N", [4, 7, 8.5])
    def test_truncation_size(self, N):
        with pytest.raises(BadParameters):
            corpus.shift_chain(N)

    def test_shift_chain(self):
        chain = corpus.shift_chain(16)
        P = chain.kernel.matrix
        assert P[0, 0] == 1.0
        assert P[3, 4] == 0.125 and P[3, 0] == 0.875
        assert P[15, 0] == 1.0
        assert chain.truncation.error_bound == 2.0 ** -15

    def test_full_support_shift(self):
        chain = corpus.full_support_shift(16, eps=0.25)
        assert np.all(chain.kernel.matrix[:15, 0] == 0.5)
        level = 2.0 * (math.log(2.0) + 0.25)
        assert set(np.flatnonzero(chain.rewards["block"].values)) == {2, 5, 6, 11, 12, 13, 14}
        assert chain.rewards["block"].values.max() == pytest.approx(level)

    def test_recurrent_shift_rewards(self):
        chain = corpus.recurrent_shift(16, k=1.5)
        g1 = chain.rewards["g1"].values
        assert set(np.flatnonzero(g1) + 1) == {3, 5, 7, 9, 11, 13, 15}
        assert g1.max() == 1.5
        np.testing.assert_allclose(chain.kernel.matrix[4, [0, 4, 5]], [0.5, 0.25, 0.25])

    def test_recurrent_shift_rejects_negative_k(self):
        with pytest.raises(BadParameters):
            corpus.recurrent_shift(16, k=-1.0)

    def test_branching_chain_keeps_whole_blocks(self):
        chain = corpus.branching_chain(20)
        assert chain.kernel.n == 15
        assert chain.meta["blocks"] == 4 and chain.meta["requested_N"] == 20
        assert chain.truncation.error_bound == pytest.approx(sum(math.exp(-2.0 ** i) for i in range(5, 64)))
        np.testing.assert_allclose(chain.kernel.matrix.sum(axis=1), 1.0, atol=1e-15)

    def test_local_geometric(self):
        chain = corpus.local_geometric(16)
        P = chain.kernel.matrix
        assert P[0, 0] == 0.5 and P[0, 1:].sum() == pytest.approx(0.5)
        assert np.all(P[1:, 0] == 0.5)
        g = chain.rewards["g"].values
        assert g[0] == 0.0 and np.count_nonzero(g) >= 1
        assert np.all(g < 2.0 * math.log(2.0))

    def test_local_geometric_needs_enough_probabilities(self):
        with pytest.raises(BadParameters):
            corpus.local_geometric(10, a=[0.1, 0.1])

    def test_dirichlet(self):
        chain = corpus.dirichlet_kernel(6, np.random.default_rng(0))
        assert np.all(chain.kernel.matrix > 0)
        with pytest.raises(BadParameters):
            corpus.dirichlet_kernel(1, np.random.default_rng(0))

    def test_every_registered_constructor_builds(self):
        defaults = {"two_state": {"lam": 0.5}}
        for name, ctor in corpus.CONSTRUCTORS.items():
            kwargs = defaults.get(name, {} if name == "cyclic_three" else {"N": 16})
            chain = ctor(**kwargs)
            assert chain.name == name
            np.testing.assert_allclose(chain.kernel.matrix.sum(axis=1), 1.0, atol=1e-12)


class TestRewards:

    def test_block_reward_positions(self):
        g = corpus.block_reward(16, 1.0)
        assert set(np.flatnonzero(g)) == {2, 5, 6, 11, 12, 13, 14}

    def test_bump_reward(self):
        g = corpus.bump_reward(8, 2.5, 4, 15).values
        assert np.all((g >= 0) & (g <= 1))
        np.testing.assert_array_equal(g[5:10], 0.0)
        np.testing.assert_array_equal(g[[0, 4, 10, 14]], 1.0)

    def test_bump_reward_decreases_to_outer_indicator(self):
        outside = np.ones(15)
        outside[corpus.bump_ball(8, 2.5, 15)] = 0.0
        prev = None
        for m in range(1, 9):
            g = corpus.bump_reward(8, 2.5, m, 15).values
            assert np.all(g >= outside)
            if prev is not None:
                assert np.all(g <= prev)
            prev = g
        np.testing.assert_array_equal(prev, outside)

    def test_bump_ball(self):
        assert corpus.bump_ball(8, 2.5, 15) == [5, 6, 7, 8, 9]
        assert corpus.bump_ball(1, 1.0, 10) == [0, 1]

    @pytest.mark.parametrize("kwargs", [{"m": 0}, {"eta": 0.1}, {"x_bar": 0}, {"x_bar": 16}])
    def test_bump_parameters(self, kwargs):
        args = {"x_bar": 8, "eta": 2.5, "m": 4, "N": 15}
        args.update(kwargs)
        with pytest.raises(BadParameters):
            corpus.bump_reward(**args)


class TestClosedForms:

    @pytest.mark.parametrize("lam,g,want", [
        (0.5, (0.0, math.log(1.9)), True),
        (0.5, (0.0, math.log(2.1)), False),
        (0.5, (1.0, 0.0), True),
        (0.25, (0.0, math.log(3.9)), True),
        (0.25, (0.0, math.log(4.1)), False),
    ])
    def test_two_state_exists(self, lam, g, want):
        assert corpus.two_state_exists(lam, g) is want
        K = corpus.two_state(lam).kernel
        assert existence_certificate(K, g).exists is want

    def test_two_state_closed_form_missing_when_no_solution(self):
        assert corpus.two_state_closed_form(0.5, (0.0, math.log(3.0))) is None

    def test_recurrent_shift_lambda1(self):
        assert corpus.recurrent_shift_lambda1(0.0) == pytest.approx(0.0, abs=1e-15)
        values = [corpus.recurrent_shift_lambda1(k) for k in (0.5, 1.0, 2.0, 4.0)]
        assert values == sorted(values)
        with pytest.raises(BadParameters):
            corpus.recurrent_shift_lambda1(-1.0)

    def test_recurrent_shift_lambda1_solves_quadratic(self):
        for k in (0.5, 1.0, 2.0):
            rho, E = math.exp(corpus.recurrent_shift_lambda1(k)), math.exp(k)
            assert 4 * rho ** 2 - (4 + E) * rho + (0.75 * E + 0.25) == pytest.approx(0.0, abs=1e-12)

    def test_branching_z_entropy(self):
        ent, stay = corpus.branching_z_entropy(2.0, 30)
        assert ent <= math.log(3.15) < stay
        assert stay == pytest.approx(2.0 - math.log(2.0))

    def test_block_gaps_on_zero_vector(self):
        gaps = corpus.full_support_block_gaps(np.zeros(32), 0.5)
        assert [j for j, _, _ in gaps] == [1, 2, 3, 4]
        assert [b for _, _, b in gaps] == [0.5, 1.0, 2.0, 4.0]

    @pytest.mark.slow
    def test_full_support_shift_gaps(self):
        chain = corpus.full_support_shift(64, 0.5)
        sol = solve_mpe(chain.kernel, chain.rewards["block"])
        assert sol.solved
        for j, gap, bound in corpus.full_support_block_gaps(sol.w, 0.5):
            assert gap >= bound - 1e-8, f"block {j}"

    @pytest.mark.slow
    @pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
    def test_recurrent_shift_lambda(self, k):
        chain = corpus.recurrent_shift(200, k)
        sol = solve_mpe(chain.kernel, chain.rewards["g1"])
        assert sol.solved
        assert sol.lam == pytest.approx(corpus.recurrent_shift_lambda1(k), abs=1e-6)
        for i in range(2, 41, 2):
            assert sol.w[i - 1] - sol.w[i] == pytest.approx(-k, abs=1e-6)
