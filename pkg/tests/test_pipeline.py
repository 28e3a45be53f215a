import json
import logging
import math

import numpy as np
import pytest

from mpelab import pipeline
from mpelab.errors import BadParameters, InvalidInput
from mpelab.mixing import dobrushin_coefficient
from mpelab.models import RunConfig
from mpelab.mpe import SolveOptions, span_seminorm
from mpelab.pipeline import (CRITERIA, GROUPS, Criterion, _brute_dobrushin, _corpus_params, _enumerate_law,
                             build_corpus_chain, load_inputs, pick_reward, run_verification,
                             truncation_span_growth)
from mpelab.reporting import build_document, verification_rows
from mpelab.simulate import partial_sum_distribution
from mpelab.utils import inputs_digest


@pytest.fixture
def quiet():
    return logging.getLogger("mpelab.tests")


class TestCorpusParams:

    def test_aliases_and_types(self):
        params = _corpus_params({"Λ": "0.25", "N": "16", "g": "(0, ln 2)", "ε": "0.1"})
        assert params == {"lam": 0.25, "N": 16, "g1": 0.0, "g2": pytest.approx(math.log(2.0)), "eps": 0.1}

    def test_integer_parameter(self):
        with pytest.raises(BadParameters):
            _corpus_params({"N": "sixteen"})

    def test_g_needs_two_values(self):
        with pytest.raises(BadParameters):
            _corpus_params({"g": "1,2,3"})

    def test_jump_probabilities_list(self):
        assert _corpus_params({"a": "[0.25, 0.125]"})["a"] == [0.25, 0.125]

    def test_unknown_chain(self):
        with pytest.raises(InvalidInput):
            build_corpus_chain("nope", {})

    def test_unknown_keyword(self):
        with pytest.raises(BadParameters):
            build_corpus_chain("shift_chain", {"N": "16", "colour": "1"})


class TestInputs:

    def test_inline_reward_wins(self, quiet):
        cfg = RunConfig(subcommand="solve", corpus="cyclic_three", inline_g=[1.0, 2.0, 3.0])
        K, g, chain = load_inputs(cfg, quiet)
        np.testing.assert_array_equal(g.values, [1.0, 2.0, 3.0])
        assert chain.name == "cyclic_three" and K.n == 3

    def test_inline_reward_length(self, quiet):
        cfg = RunConfig(subcommand="solve", corpus="cyclic_three", inline_g=[1.0])
        with pytest.raises(InvalidInput):
            load_inputs(cfg, quiet)

    def test_named_corpus_reward(self, quiet):
        cfg = RunConfig(subcommand="solve", corpus="recurrent_shift", params={"N": "16"}, reward_name="g2")
        K, g, chain = load_inputs(cfg, quiet)
        np.testing.assert_array_equal(g.values, chain.rewards["g2"].values)
        with pytest.raises(InvalidInput):
            pick_reward(cfg, K, chain, "g3", quiet)

    def test_no_kernel(self, quiet):
        with pytest.raises(InvalidInput):
            load_inputs(RunConfig(subcommand="mixing"), quiet, need_reward=False)

    def test_no_reward(self, quiet):
        with pytest.raises(InvalidInput):
            load_inputs(RunConfig(subcommand="solve", corpus="shift_chain", params={"N": "16"}), quiet)


class TestOracles:

    def test_brute_dobrushin(self, random_kernel, two_state):
        assert _brute_dobrushin(two_state.matrix) == pytest.approx(0.5)
        K = random_kernel(6, 3)
        assert _brute_dobrushin(K.matrix) == pytest.approx(dobrushin_coefficient(K), abs=1e-12)

    def test_enumerated_law_matches_dp(self, random_kernel):
        K = random_kernel(3, 12)
        g = np.array([0.0, 1.0, 2.0])
        F = partial_sum_distribution(K, g, 1, 5)
        law = _enumerate_law(K.matrix, g, 1, 5)
        assert sum(law.values()) == pytest.approx(1.0)
        for v, p in law.items():
            assert F.prob_at(v) == pytest.approx(p, abs=1e-12)


class TestVerification:

    def test_registry(self):
        assert [c.cid for c in CRITERIA] == list(range(1, 20))
        assert GROUPS == sorted(GROUPS)
        assert {"solve", "mixing", "entropy", "examples"} <= set(GROUPS)

    def test_unknown_group(self, quiet):
        with pytest.raises(InvalidInput):
            run_verification(RunConfig(subcommand="verify-paper", filter="nonsense"), quiet)

    def test_documents_repeat_apart_from_timestamp(self, quiet):
        cfg = RunConfig(subcommand="verify-paper", filter="entropy", workers=2)
        docs = []
        for _ in range(2):
            doc = build_document(cfg, inputs_digest(cfg.public_dict()), run_verification(cfg, quiet))
            doc.pop("generated_at")
            docs.append(json.dumps(doc, sort_keys=True))
        assert docs[0] == docs[1]
        assert "timings" not in json.loads(docs[0])["results"]

    def test_raising_criterion_becomes_error_row(self, quiet, monkeypatch):
        def broken(c, ctx):
            raise ValueError("singular matrix")
        duality = next(c for c in CRITERIA if c.cid == 6)
        monkeypatch.setattr(pipeline, "CRITERIA", [duality, Criterion(90, "entropy", "broken", broken)])
        res = run_verification(RunConfig(subcommand="verify-paper", workers=2), quiet)
        assert res.errors == {90: "ValueError: singular matrix"}
        assert {c.criterion for c in res.checks} == {6}
        assert not res.passed
        assert verification_rows(res)[-1]["status"] == "ERROR"

    def test_workers_reach_criteria(self, quiet, monkeypatch):
        seen = []
        def record(c, ctx):
            seen.append(ctx.workers)
            return []
        monkeypatch.setattr(pipeline, "CRITERIA", [Criterion(1, "entropy", "workers", record)])
        run_verification(RunConfig(subcommand="verify-paper", workers=3), quiet)
        assert seen == [3]

    @pytest.mark.parametrize("group", ["entropy", "classify", "escape", "contraction"])
    def test_fast_groups_pass(self, group, quiet):
        res = run_verification(RunConfig(subcommand="verify-paper", filter=group, workers=2), quiet)
        failed = [(c.criterion, c.name, c.actual) for c in res.checks if not c.passed]
        assert res.passed, failed or res.errors
        assert set(res.timings.per_criterion) == {c.cid for c in CRITERIA if c.group == group}

    @pytest.mark.slow
    @pytest.mark.parametrize("group", ["solve", "examples", "tail", "simulate", "mixing"])
    def test_acceptance_groups_pass(self, group, quiet):
        res = run_verification(RunConfig(subcommand="verify-paper", filter=group, workers=4), quiet)
        failed = [(c.criterion, c.name, c.actual) for c in res.checks if not c.passed]
        assert res.passed, failed or res.errors


class TestSpanGrowth:

    def test_truncations_grow(self):
        rows = truncation_span_growth((16, 32), 0.5, SolveOptions())
        assert [N for N, _, _ in rows] == [16, 32]
        for _, sol, low in rows:
            assert sol.solved and span_seminorm(sol.w) >= low - 1e-8
        assert span_seminorm(rows[1][1].w) > span_seminorm(rows[0][1].w)
