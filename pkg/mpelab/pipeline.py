import itertools, logging, math, time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import corpus
from .errors import BadParameters, InvalidInput, RelationViolated
from .entropy import check_rescale_identity, dual_gap, esscher_measure
from .ergodic import (bump_tail_check, escape_geometric_test, lambda_convergence_check,
                      risk_sensitive_average, risk_sensitive_averages)
from .input_parser import _label, dump_kernel, dump_reward, parse_kernel_file, parse_reward_file
from .kernel import build_kernel
from .mixing import check_relations, dobrushin_coefficient, minorization, mixing_report
from .models import (CheckResult, ClassifierKind, CorpusChain, Dominance, FiniteKernel, MpeSolution,
                     Results, RewardFunction, RunConfig, SolveStatus, StateSpace, Timings)
from .mpe import (SolveOptions, existence_certificate, finite_existence_classifier,
                  guaranteed_existence, local_contraction_estimate, minorization_case_trace,
                  risk_aversion_sweep, sharp_bound, solve_ape, solve_mpe, span_seminorm,
                  span_trace_bound_check, verify_mpe)
from .simulate import (mc_entropic_estimate, partial_sum_distribution, path_sums, sample_paths,
                       stochastic_dominance)
from .utils import inputs_digest, parse_number, parse_number_list, thread_count

# ---------- Input assembly ----------

_INT_PARAMS = {"N", "x_bar", "m", "n0"}
_PARAM_ALIASES = {"Λ": "lam", "Lambda": "lam", "d": "lam", "ε": "eps"}


def _corpus_params(raw: Dict[str, str]) -> Dict:
    out = {}
    for key, val in raw.items():
        key = _PARAM_ALIASES.get(key, key)
        if key in _INT_PARAMS:
            try:
                out[key] = int(val)
            except ValueError:
                raise BadParameters(f"--param {key} needs an integer, got {val!r}") from None
        elif key == "a":
            out[key] = parse_number_list(val)
        elif key == "g":
            g = parse_number_list(val)
            if len(g) != 2:
                raise BadParameters("g=(g1,g2) needs exactly two values")
            out["g1"], out["g2"] = g
        else:
            out[key] = parse_number(val)
    return out


def build_corpus_chain(name: str, params: Dict[str, str]) -> CorpusChain:
    ctor = corpus.CONSTRUCTORS.get(name)
    if ctor is None:
        raise InvalidInput(f"Unknown corpus chain {name!r} (choose from {', '.join(sorted(corpus.CONSTRUCTORS))})")
    kwargs = _corpus_params(params)
    try:
        return ctor(**kwargs)
    except TypeError as e:
        raise BadParameters(f"{name}: {e}") from None


def load_inputs(cfg: RunConfig, logger: logging.Logger, need_reward: bool = True
                ) -> Tuple[FiniteKernel, Optional[RewardFunction], Optional[CorpusChain]]:
    chain = None
    if cfg.corpus:
        chain = build_corpus_chain(cfg.corpus, cfg.params)
        K = chain.kernel
        logger.info(f"Built corpus chain {chain.name} with {K.n} state(s)")
    elif cfg.kernel_path:
        logger.info(f"Reading kernel from: {cfg.kernel_path}")
        K = parse_kernel_file(str(cfg.kernel_path), str(cfg.labels_path) if cfg.labels_path else None, logger)
    else:
        raise InvalidInput("No kernel given: use --kernel FILE or --corpus NAME")

    if not need_reward:
        return K, None, chain
    return K, pick_reward(cfg, K, chain, cfg.reward_name, logger), chain


def pick_reward(cfg: RunConfig, K: FiniteKernel, chain: Optional[CorpusChain], name: Optional[str],
                logger: logging.Logger) -> RewardFunction:
    if cfg.inline_g is not None and name == cfg.reward_name:
        if len(cfg.inline_g) != K.n:
            raise InvalidInput(f"--g has {len(cfg.inline_g)} value(s) for {K.n} state(s)")
        return RewardFunction(cfg.inline_g)
    if cfg.reward_path and name == cfg.reward_name:
        return parse_reward_file(str(cfg.reward_path), K.space, logger)
    if chain is not None and chain.rewards:
        if name is None:
            if len(chain.rewards) > 1:
                raise InvalidInput(f"{chain.name} carries rewards {sorted(chain.rewards)}; pick one with --reward-name")
            return next(iter(chain.rewards.values()))
        if name not in chain.rewards:
            raise InvalidInput(f"{chain.name} has no reward {name!r} (has {sorted(chain.rewards)})")
        return chain.rewards[name]
    raise InvalidInput("No reward given: use --g, --reward FILE or a corpus chain with --reward-name")


def _state(K: FiniteKernel, label: Optional[str], default: Optional[int] = 0) -> Optional[int]:
    if label is None:
        return default
    return K.space.index(_label(str(label)))


def solve_options(cfg: RunConfig, K: FiniteKernel) -> SolveOptions:
    return SolveOptions(tol=cfg.tol, max_iter=cfg.max_iter, span_cap=cfg.span_cap,
                        anchor=_state(K, cfg.anchor, None))


# ---------- Subcommands ----------
# Each returns (payload, csv_rows, exit_code, inputs_digest); reporting turns payload into JSON
# and rows into CSV.

Outcome = Tuple[Dict, List[Dict], int, str]


def _digest(cfg: RunConfig, K: FiniteKernel, *rewards: RewardFunction) -> str:
    return inputs_digest(list(K.space.labels), K.matrix, [g.values for g in rewards], cfg.public_dict())


def run_mixing(cfg: RunConfig, logger) -> Outcome:
    K, _, _ = load_inputs(cfg, logger, need_reward=False)
    report = mixing_report(K, cfg.n_max)
    relations = check_relations(K, cfg.n_max)
    rows = [{"n": n, "lambda": report.lambda_n[n], "d": report.minorization_n[n].d,
             "strong_ratio": report.strong_ratio_n[n]} for n in sorted(report.lambda_n)]
    payload = {"mixing": report.to_dict(),
               "relations": {"max_violation": relations.max_violation, "checks": relations.checks}}
    return payload, rows, 0, _digest(cfg, K)


def run_solve(cfg: RunConfig, logger) -> Outcome:
    K, g, _ = load_inputs(cfg, logger)
    sol = solve_mpe(K, g, solve_options(cfg, K), logger)
    cert = existence_certificate(K, g)
    verdict = guaranteed_existence(K, g, cfg.n_max)
    labels = K.space.labels
    payload = {
        "status": sol.status, "lambda": sol.lam, "residual": sol.residual,
        "iterations": sol.iterations, "method": sol.method, "reason": sol.reason,
        "w": {str(lab): v for lab, v in zip(labels, sol.w.tolist())},
        "span_trace_tail": list(sol.trace[-10:]),
        "certificate": {"exists": cert.exists, "lambda_star": cert.lambda_star, "reason": cert.reason},
        "bound": {"kind": verdict.kind, "n": verdict.n},
    }
    rows = [{"state": lab, "w": v} for lab, v in zip(labels, sol.w.tolist())]
    logger.info(f"solve: {sol.status.value} lambda={sol.lam:.12g} residual={sol.residual:.3e}")
    return payload, rows, sol.status.exit_code, _digest(cfg, K, g)


def run_ape(cfg: RunConfig, logger) -> Outcome:
    K, g, _ = load_inputs(cfg, logger)
    ape = solve_ape(K, g)
    labels = K.space.labels
    payload = {"lambda0": ape.lam0, "residual": ape.residual,
               "w0": {str(lab): v for lab, v in zip(labels, ape.w0.tolist())}}
    return payload, [{"state": lab, "w0": v} for lab, v in zip(labels, ape.w0.tolist())], 0, _digest(cfg, K, g)


def run_average(cfg: RunConfig, logger) -> Outcome:
    K, g, _ = load_inputs(cfg, logger)
    sol = solve_mpe(K, g, solve_options(cfg, K), logger)
    trace = risk_sensitive_averages(K, g, cfg.horizon, sol if sol.solved else None)
    labels = K.space.labels
    rows = [{"n": int(n), "state": lab, "average": float(trace.averages[i, j])}
            for i, n in enumerate(trace.n_values) for j, lab in enumerate(labels)]
    payload = {"lambda": trace.lam, "status": sol.status, "horizon": cfg.horizon,
               "final": {str(lab): float(v) for lab, v in zip(labels, trace.averages[-1])}}
    return payload, rows, 0, _digest(cfg, K, g)


def run_classify(cfg: RunConfig, logger) -> Outcome:
    K, _, _ = load_inputs(cfg, logger, need_reward=False)
    v = finite_existence_classifier(K)
    witness = None if v.witness is None else {str(lab): x for lab, x in zip(K.space.labels, v.witness.values.tolist())}
    payload = {"kind": v.kind, "detail": v.detail, "power": v.power, "witness": witness}
    return payload, [{"kind": v.kind.value, "detail": v.detail, "power": v.power}], 0, _digest(cfg, K)


def run_escape(cfg: RunConfig, logger) -> Outcome:
    K, _, _ = load_inputs(cfg, logger, need_reward=False)
    if not cfg.support:
        raise InvalidInput("escape-test needs --support")
    support = K.space.indices([_label(s) for s in cfg.support])
    rep = escape_geometric_test(K, support, cfg.alphas, cfg.n_max, logger)
    rows = [{"alpha": a, "first_n": n, "verdict": "Pass" if n is not None else "Fail"}
            for a, n in rep.first_n.items()]
    return {"passed": rep.passed, "vacuous": rep.vacuous, "n_max": rep.n_max, "results": rows}, rows, 0, _digest(cfg, K)


def run_simulate(cfg: RunConfig, logger) -> Outcome:
    K, g, _ = load_inputs(cfg, logger)
    x0 = _state(K, cfg.start)
    est = mc_entropic_estimate(K, g, x0, cfg.horizon, cfg.paths, cfg.seed, workers=cfg.workers, logger=logger)
    exact = risk_sensitive_average(K, g, x0, cfg.horizon)
    payload = {"estimate": est, "exact": exact, "rng_algorithm": "Philox"}
    rows = []
    if cfg.out_format == "csv":
        batch = sample_paths(K, x0, cfg.horizon, cfg.paths, cfg.seed, cfg.workers, logger)
        rows = [{"path": i, "sum": s} for i, s in enumerate(path_sums(g, batch).tolist())]
    return payload, rows, 0, _digest(cfg, K, g)


def run_dominance(cfg: RunConfig, logger) -> Outcome:
    K, g1, chain = load_inputs(cfg, logger)
    if cfg.compare_reward is None:
        raise InvalidInput("dominance needs --compare-reward NAME")
    g2 = pick_reward(cfg, K, chain, cfg.compare_reward, logger)
    x0 = _state(K, cfg.start)
    F1 = partial_sum_distribution(K, g1, x0, cfg.horizon)
    F2 = partial_sum_distribution(K, g2, x0, cfg.horizon)
    verdict = stochastic_dominance(F1, F2)
    rows = [{"reward": name, "value": float(v), "prob": float(p)}
            for name, F in ((cfg.reward_name or "first", F1), (cfg.compare_reward, F2))
            for v, p in zip(F.support(), F.probs)]
    return {"verdict": verdict, "horizon": cfg.horizon}, rows, 0, _digest(cfg, K, g1, g2)


def run_corpus(cfg: RunConfig, logger) -> Outcome:
    if not cfg.corpus:
        raise InvalidInput("corpus needs a chain name")
    chain = build_corpus_chain(cfg.corpus, cfg.params)
    prefix = str(cfg.out_path) if cfg.out_path else chain.name
    written = {"kernel": str(dump_kernel(chain.kernel, Path(f"{prefix}.kernel.json")))}
    for name, g in sorted(chain.rewards.items()):
        written[f"reward.{name}"] = str(dump_reward(g, Path(f"{prefix}.reward.{name}.json")))
    logger.info(f"Wrote {len(written)} file(s) for {chain.name} with prefix {prefix}")
    rows = [{"file": k, "path": v} for k, v in written.items()]
    payload = {"chain": chain.name, "states": chain.kernel.n, "files": written,
               "truncation": chain.truncation, "meta": chain.meta}
    return payload, rows, 0, _digest(cfg, chain.kernel, *chain.rewards.values())


COMMANDS: Dict[str, Callable[[RunConfig, logging.Logger], Outcome]] = {
    "mixing": run_mixing,
    "solve": run_solve,
    "ape": run_ape,
    "average": run_average,
    "classify": run_classify,
    "escape-test": run_escape,
    "simulate": run_simulate,
    "dominance": run_dominance,
    "corpus": run_corpus,
}


# ---------- Verification ----------

@dataclass(frozen=True)
class VerifyContext:
    tol: float
    seed: int
    workers: int
    logger: logging.Logger


@dataclass(frozen=True)
class Criterion:
    cid: int
    group: str
    name: str
    run: Callable[["Criterion", VerifyContext], List[CheckResult]]


def _opts(ctx: VerifyContext, **kw) -> SolveOptions:
    return SolveOptions(tol=ctx.tol, **kw)


def _check(c: Criterion, expected: str, actual: str, tolerance: str, passed: bool, name: str = None) -> CheckResult:
    return CheckResult(c.cid, c.group, name or c.name, expected, actual, tolerance, bool(passed))


def _two_state_g(k: float) -> np.ndarray:
    return np.array([0.0, math.log(k)])


@lru_cache(maxsize=None)
def _threshold_solutions(tol: float):
    K = corpus.two_state(0.5).kernel
    opts = SolveOptions(tol=tol, max_iter=10_000, span_cap=1e4)
    return K, {k: solve_mpe(K, _two_state_g(k), opts) for k in (0.5, 1.0, 1.5, 1.9, 2.0, 2.1, 4.0)}


@lru_cache(maxsize=None)
def _sharp_bound_instances(tol: float, seed: int):
    rng = np.random.default_rng([seed, 3])
    out = []
    for _ in range(200):
        n = int(rng.integers(3, 11))
        K = corpus.dirichlet_kernel(n, rng).kernel
        raw = rng.normal(size=n)
        g = raw * (0.99 * sharp_bound(dobrushin_coefficient(K)) / span_seminorm(raw))
        out.append((K, g, solve_mpe(K, g, SolveOptions(tol=tol))))
    return out


def _crit_threshold(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    K, sols = _threshold_solutions(ctx.tol)
    out = []
    for k in (0.5, 1.0, 1.9):
        s = sols[k]
        res = verify_mpe(K, _two_state_g(k), s.w, s.lam)
        ok = s.solved and abs(s.lam) <= 1e-8 and res < 1e-8
        out.append(_check(c, "Solved, lambda=0, residual<1e-8", f"{s.status.value}, lambda={s.lam:.3e}, residual={res:.1e}",
                          "1e-8", ok, f"{c.name} k={k}"))
    for k in (2.0, 2.1, 4.0):
        s = sols[k]
        out.append(_check(c, "Diverged", f"{s.status.value} after {s.iterations} it", "-",
                          s.status is SolveStatus.DIVERGED, f"{c.name} k={k}"))
    return out


def _crit_closed_form_w(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    _, sols = _threshold_solutions(ctx.tol)
    s = sols[1.5]
    w_ref, _ = corpus.two_state_closed_form(0.5, _two_state_g(1.5))
    want = float(w_ref[0] - w_ref[1])
    got = float(s.w[0] - s.w[1])
    return [_check(c, f"w(x1)-w(x2)={want:.10f}", f"{got:.10f} ({s.status.value})", "1e-8",
                   s.solved and abs(got - want) <= 1e-8)]


def _crit_sharp_bound(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    inst = _sharp_bound_instances(ctx.tol, ctx.seed)
    good = sum(1 for K, g, s in inst if s.solved and verify_mpe(K, g, s.w, s.lam) < 1e-8)
    return [_check(c, "200/200 Solved, residual<1e-8", f"{good}/{len(inst)}", "1e-8", good == len(inst))]


def _crit_envelope(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    K2, sols = _threshold_solutions(ctx.tol)
    cases = [(K2, _two_state_g(k), s) for k, s in sols.items() if s.solved]
    cases += [(K, g, s) for K, g, s in _sharp_bound_instances(ctx.tol, ctx.seed) if s.solved]
    worst = max(lambda_convergence_check(K, g, s, 200) for K, g, s in cases)
    return [_check(c, "|lambda - T^n0/n| <= 2||w||/n", f"max excess {worst:.2e} over {len(cases)} instance(s)",
                   "1e-8", worst <= 1e-8)]


def _brute_dobrushin(P: np.ndarray) -> float:
    n = P.shape[0]
    subsets = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    mass = subsets @ P.T                       # mass[A, x] = P(x, A)
    return float((mass[:, :, None] - mass[:, None, :]).max())


def _crit_mixing(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    rng = np.random.default_rng([ctx.seed, 5])
    worst, bad, brute_gap = 0.0, 0, 0.0
    for _ in range(200):
        K = corpus.dirichlet_kernel(int(rng.integers(2, 11)), rng, concentration=0.5).kernel
        try:
            worst = max(worst, check_relations(K, 4).max_violation)
        except RelationViolated as e:
            bad += 1
            worst = max(worst, e.magnitude)
        brute_gap = max(brute_gap, abs(dobrushin_coefficient(K) - _brute_dobrushin(K.matrix)))
    return [
        _check(c, "relations hold on 200 kernels", f"{200 - bad}/200, worst {worst:.1e}", "1e-12", bad == 0,
               f"{c.name}: submultiplicativity and 1-d bound"),
        _check(c, "pairwise == subset sup", f"max gap {brute_gap:.1e}", "1e-12", brute_gap <= 1e-12,
               f"{c.name}: brute-force Dobrushin"),
    ]


def _crit_duality(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    rng = np.random.default_rng([ctx.seed, 6])
    low, at_esscher = math.inf, 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        K = corpus.dirichlet_kernel(n, rng).kernel
        x = int(rng.integers(n))
        f = rng.uniform(-5.0, 5.0, n)
        low = min(low, dual_gap(K, x, f, rng.dirichlet(np.ones(n))))
        at_esscher = max(at_esscher, abs(dual_gap(K, x, f, esscher_measure(K, x, f))))
    return [
        _check(c, "gap >= 0", f"min {low:.2e}", "1e-10", low >= -1e-10, f"{c.name}: nonnegative gap"),
        _check(c, "gap = 0 at Esscher measure", f"max {at_esscher:.2e}", "1e-10", at_esscher <= 1e-10,
               f"{c.name}: attained"),
    ]


def _crit_contraction(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    K = corpus.two_state(0.5).kernel
    out = []
    for M in (0.5, 1.0, 2.0):
        est = local_contraction_estimate(K, _two_state_g(1.9), M, 10_000, ctx.seed)
        cap = 1.0 / (1.0 + math.exp(-M))
        out.append(_check(c, f"< 1 and <= {cap:.6f}", f"{est.alpha_hat:.6f}", "1e-6",
                          est.alpha_hat < 1.0 and est.alpha_hat <= cap + 1e-6, f"{c.name} M={M}"))
    return out


def _crit_shift(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    K = corpus.shift_chain(64).kernel
    lam1 = dobrushin_coefficient(K)
    ratios = mixing_report(K, 62).strong_ratio_n
    finite = [n for n, r in ratios.items() if math.isfinite(r)]
    rng = np.random.default_rng([ctx.seed, 8])
    solved = 0
    for _ in range(5):
        g = rng.uniform(-2.0, 2.0, K.n)
        s = solve_mpe(K, g, _opts(ctx))
        solved += int(s.solved and verify_mpe(K, g, s.w, s.lam) < 1e-8)
    return [
        _check(c, "Lambda_1 = 0.5", repr(lam1), "exact", lam1 == 0.5, f"{c.name}: Dobrushin"),
        _check(c, "L_n = inf for n <= 62", "all inf" if not finite else f"finite at {finite[:5]}", "-",
               not finite, f"{c.name}: strong mixing fails"),
        _check(c, "5/5 Solved, residual<1e-8", f"{solved}/5", "1e-8", solved == 5, f"{c.name}: solutions exist"),
    ]


def truncation_span_growth(sizes: Sequence[int], eps: float, opts: SolveOptions
                           ) -> List[Tuple[int, MpeSolution, float]]:
    """(N, solution, lower bound on ||w_N||_sp) for the full-support shift truncated at each N."""
    out = []
    for N in sizes:
        chain = corpus.full_support_shift(N, eps)
        sol = solve_mpe(chain.kernel, chain.rewards["block"], opts)
        top = max(bound for _, _, bound in corpus.full_support_block_gaps(np.zeros(N), eps))
        out.append((N, sol, top / 2.0))
    return out


def _crit_full_support(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    eps = 0.5
    growth = truncation_span_growth((32, 64, 128, 256), eps, _opts(ctx, max_iter=20_000))
    s = growth[-1][1]
    gaps = corpus.full_support_block_gaps(s.w, eps) if s.solved else []
    short = [j for j, gap, bound in gaps if gap < bound - 1e-8]
    spans = [(N, span_seminorm(sol.w) if sol.solved else math.nan, low) for N, sol, low in growth]
    grows = all(sp >= low - 1e-8 for _, sp, low in spans)
    return [
        _check(c, "block gaps >= 2^(j-1) eps", f"{len(gaps) - len(short)}/{len(gaps)} blocks ({s.status.value})",
               "1e-8", s.solved and gaps and not short, f"{c.name}: growth bound"),
        _check(c, "span_N >= 2^(jmax-2) eps, unbounded in N -> Diverged",
               ", ".join(f"N={N}:{sp:.2f}" for N, sp, _ in spans), "1e-8", grows,
               f"{c.name}: truncation span growth"),
    ]


def _crit_recurrent_shift(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    out = []
    for k in (0.5, 1.0, 2.0):
        chain = corpus.recurrent_shift(200, k)
        s = solve_mpe(chain.kernel, chain.rewards["g1"], _opts(ctx))
        want = corpus.recurrent_shift_lambda1(k)
        diffs = [s.w[i - 1] - s.w[i] for i in range(2, 41, 2)]
        dev = max(abs(d + k) for d in diffs)
        out.append(_check(c, f"lambda={want:.8f}, w(i)-w(i+1)=-{k}", f"lambda={s.lam:.8f}, max dev {dev:.1e}",
                          "1e-6", s.solved and abs(s.lam - want) <= 1e-6 and dev <= 1e-6, f"{c.name} k={k}"))
    chain = corpus.recurrent_shift(200, 0.0)
    s = solve_mpe(chain.kernel, chain.rewards["g1"], _opts(ctx))
    out.append(_check(c, "lambda=0", f"{s.lam:.2e}", "1e-6", s.solved and abs(s.lam) <= 1e-6, f"{c.name} k=0"))
    return out


def _enumerate_law(P: np.ndarray, g: np.ndarray, x0: int, n: int) -> Dict[float, float]:
    law: Dict[float, float] = {}
    for tail in itertools.product(range(P.shape[0]), repeat=n - 1):
        path = (x0,) + tail
        p = float(np.prod([P[a, b] for a, b in zip(path, path[1:])]))
        if p > 0:
            s = round(float(sum(g[x] for x in path)), 9)
            law[s] = law.get(s, 0.0) + p
    return law


def _crit_dominance(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    chain = corpus.recurrent_shift(64, 1.0)
    F1 = partial_sum_distribution(chain.kernel, chain.rewards["g1"], 0, 10)
    F2 = partial_sum_distribution(chain.kernel, chain.rewards["g2"], 0, 10)
    verdict = stochastic_dominance(F1, F2)

    rng = np.random.default_rng([ctx.seed, 11])
    rows = rng.dirichlet(np.ones(4), size=4)
    rows[0] = [0.5, 0.5, 0.0, 0.0]
    K = build_kernel(StateSpace.integer(4), rows)
    g = np.array([0.0, 1.0, 2.0, 1.0])
    F = partial_sum_distribution(K, g, 0, 6)
    law = _enumerate_law(K.matrix, g, 0, 6)
    gap = max(abs(F.prob_at(v) - p) for v, p in law.items())
    gap = max(gap, abs(1.0 - sum(law.values())))
    return [
        _check(c, "Dominates", verdict.value, "1e-12", verdict is Dominance.DOMINATES, f"{c.name}: g1 over g2"),
        _check(c, "DP law == path enumeration", f"max gap {gap:.1e}", "1e-12", gap <= 1e-12,
               f"{c.name}: exact law"),
    ]


def _crit_ape(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    _, sols = _threshold_solutions(ctx.tol)
    K = corpus.two_state(0.5).kernel
    g = _two_state_g(4.0)
    ape = solve_ape(K, g)
    return [_check(c, "MPE Diverged, APE lambda0=g(x1)=0, residual<1e-10",
                   f"MPE {sols[4.0].status.value}, lambda0={ape.lam0:.2e}, residual={ape.residual:.1e}", "1e-10",
                   sols[4.0].status is SolveStatus.DIVERGED and abs(ape.lam0 - g[0]) <= 1e-10 and ape.residual < 1e-10)]


def _crit_classifier(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    two = corpus.two_state(0.5).kernel
    v = finite_existence_classifier(two)
    wit = solve_mpe(two, v.witness, _opts(ctx, max_iter=10_000)) if v.witness is not None else None
    rank_one = build_kernel(StateSpace.integer(4), np.tile([0.1, 0.2, 0.3, 0.4], (4, 1)))
    cyc = finite_existence_classifier(corpus.cyclic_three().kernel)
    r1 = finite_existence_classifier(rank_one)
    return [
        _check(c, "NotAllG, witness Diverged",
               f"{v.kind.value}, witness {wit.status.value if wit else 'missing'}", "-",
               v.kind is ClassifierKind.NOT_ALL_G and wit is not None and wit.status is SolveStatus.DIVERGED,
               f"{c.name}: two_state"),
        _check(c, "AllG", cyc.kind.value, "-", cyc.kind is ClassifierKind.ALL_G, f"{c.name}: cyclic_three"),
        _check(c, "AllG", r1.kind.value, "-", r1.kind is ClassifierKind.ALL_G, f"{c.name}: rank one"),
    ]


def _crit_escape(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    two = escape_geometric_test(corpus.two_state(0.5).kernel, [0], [0.25], 50, ctx.logger)
    acyclic = build_kernel(StateSpace.integer(3), [[1.0, 0.0, 0.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
    rep = escape_geometric_test(acyclic, [0], [0.9, 0.5, 0.1], 50, ctx.logger)
    return [
        _check(c, "Fail at alpha=0.25", "Pass" if two.passed else "Fail", "-", not two.passed, f"{c.name}: two_state"),
        _check(c, "Pass for 0.9, 0.5, 0.1", str(rep.first_n), "-", rep.passed, f"{c.name}: acyclic transient"),
    ]


def _crit_tail(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    out = []
    for N, x_bar in ((15, 8), (20, 6)):
        chain = corpus.lazy_walk(N, x_bar=x_bar, eta=2.5, m=4)
        s = solve_mpe(chain.kernel, chain.rewards["bump"], _opts(ctx))
        ball = corpus.bump_ball(x_bar, 2.5, N)
        excess = bump_tail_check(chain.kernel, s, ball, 100) if s.solved else math.inf
        out.append(_check(c, "P[tau_B>n] <= e^{2||w||+1} e^{-(1-lambda)n}",
                          f"lambda={s.lam:.4f}, max excess {excess:.1e}", "1e-10",
                          s.solved and s.lam < 1.0 and excess <= 1e-10, f"{c.name} N={N}"))
    return out


def _crit_monte_carlo(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    K = corpus.cyclic_three().kernel
    g = np.random.default_rng([ctx.seed, 16]).uniform(0.0, 1.0, 3)
    exact = risk_sensitive_average(K, g, 0, 20)
    inside = 0
    for i in range(20):
        est = mc_entropic_estimate(K, g, 0, 20, 100_000, ctx.seed + i, workers=ctx.workers)
        inside += int(abs(est.estimate - exact) <= 3.0 * est.std_err)
    return [_check(c, ">= 18/20 within 3 sigma", f"{inside}/20 (exact {exact:.6f})", "3 sigma", inside >= 18)]


def _crit_z_entropy(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    ent, stay = corpus.branching_z_entropy(2.0, 30)
    return [
        _check(c, f"entropy <= ln 3.15 < {stay:.4f}", f"{ent:.4f}", "-",
               ent <= math.log(3.15) < stay, f"{c.name}: block-entry entropy"),
    ]


def _crit_span_bounds(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    rng = np.random.default_rng([ctx.seed, 18])
    worst_growth, failed_cases = -math.inf, 0
    for _ in range(50):
        n = int(rng.integers(3, 9))
        K = corpus.dirichlet_kernel(n, rng).kernel
        raw = rng.normal(size=n)
        lam = dobrushin_coefficient(K)
        worst_growth = max(worst_growth, span_trace_bound_check(K, raw * (0.9 * sharp_bound(lam) / span_seminorm(raw)), 60))
        d = minorization(K).d
        g = raw * (0.9 * -0.5 * math.log(1.0 - d) / span_seminorm(raw))
        failed_cases += sum(not r.holds for r in minorization_case_trace(K, g, 60))
    return [
        _check(c, "||T^n 0||_sp <= growth bound", f"max excess {worst_growth:.1e}", "1e-12", worst_growth <= 1e-12,
               f"{c.name}: Dobrushin"),
        _check(c, "every case bound holds", f"{failed_cases} violation(s)", "1e-10", failed_cases == 0,
               f"{c.name}: minorization"),
    ]


def _crit_risk_sweep(c: Criterion, ctx: VerifyContext) -> List[CheckResult]:
    rng = np.random.default_rng([ctx.seed, 20])
    K = corpus.dirichlet_kernel(5, rng).kernel
    g = rng.uniform(0.0, 1.0, 5)
    neutral, rows = risk_aversion_sweep(K, g, [1e-3, 0.1, 0.5, 1.0, 2.0], _opts(ctx))
    vals = [v for _, v, _ in rows]
    mono = all(v is not None for v in vals) and all(b >= a - 1e-8 for a, b in zip(vals, vals[1:]))
    rescale = check_rescale_identity(K, g, 2.0)
    return [
        _check(c, "lambda(gamma g)/gamma nondecreasing", ", ".join(f"{v:.5f}" for v in vals if v is not None), "1e-8",
               mono, f"{c.name}: monotone"),
        _check(c, f"-> nu(g)={neutral:.5f} as gamma->0", f"{vals[0]:.5f}" if vals[0] is not None else "None", "1e-2",
               vals[0] is not None and abs(vals[0] - neutral) <= 1e-2, f"{c.name}: risk-neutral limit"),
        _check(c, "mu^gamma = mu(gamma f)/gamma", f"max dev {rescale:.1e}", "1e-12", rescale <= 1e-12,
               f"{c.name}: rescaling identity"),
    ]


CRITERIA: List[Criterion] = [Criterion(*spec) for spec in (
    (1, "solve", "two-state existence threshold", _crit_threshold),
    (2, "solve", "two-state closed-form w", _crit_closed_form_w),
    (3, "solve", "sharp-bound random kernels", _crit_sharp_bound),
    (4, "solve", "long-run average envelope", _crit_envelope),
    (5, "mixing", "mixing coefficient relations", _crit_mixing),
    (6, "entropy", "entropic duality", _crit_duality),
    (7, "contraction", "local span contraction", _crit_contraction),
    (8, "examples", "shift chain", _crit_shift),
    (9, "examples", "full-support shift divergence", _crit_full_support),
    (10, "examples", "one-step recurrent closed form", _crit_recurrent_shift),
    (11, "examples", "stochastic dominance", _crit_dominance),
    (12, "solve", "additive equation contrast", _crit_ape),
    (13, "classify", "finite classifier", _crit_classifier),
    (14, "escape", "geometric escape test", _crit_escape),
    (15, "tail", "bump-reward hitting tails", _crit_tail),
    (16, "simulate", "Monte Carlo consistency", _crit_monte_carlo),
    (17, "examples", "disjoint geometric propagation", _crit_z_entropy),
    (18, "solve", "explicit span bounds", _crit_span_bounds),
    (19, "entropy", "risk-aversion sweep", _crit_risk_sweep),
)]

GROUPS = sorted({c.group for c in CRITERIA})


def run_verification(cfg: RunConfig, logger: logging.Logger) -> Results:
    timings = Timings()
    selected = CRITERIA
    if cfg.filter:
        if cfg.filter not in GROUPS:
            raise InvalidInput(f"Unknown group {cfg.filter!r} (choose from {', '.join(GROUPS)})")
        selected = [c for c in CRITERIA if c.group == cfg.filter]
    workers = min(cfg.workers if cfg.workers > 1 else thread_count(), len(selected))
    ctx = VerifyContext(cfg.tol, cfg.seed, max(1, cfg.workers), logger)

    logger.info(f"Running {len(selected)} criterion group(s) on {workers} worker(s)…")
    total_t0 = time.perf_counter()
    checks: Dict[int, List[CheckResult]] = {}
    errors: Dict[int, str] = {}

    def run_one(crit: Criterion):
        t0 = time.perf_counter()
        try:
            return crit.run(crit, ctx), None, time.perf_counter() - t0
        except Exception as e:   # becomes an ERROR row
            return [], f"{type(e).__name__}: {e}", time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        futs = {ex.submit(run_one, crit): crit for crit in selected}
        done = 0
        for fut in as_completed(futs):
            crit = futs[fut]
            res, err, secs = fut.result()
            checks[crit.cid] = res
            timings.per_criterion[crit.cid] = secs
            if err:
                errors[crit.cid] = err
                logger.warning(f"[{crit.cid}] {crit.name} raised {err}")
            done += 1
            logger.info(f"  …verify progress: {done}/{len(futs)} ({crit.cid} {crit.name}: {secs:.2f}s)")

    timings.total = time.perf_counter() - total_t0
    ordered = [chk for cid in sorted(checks) for chk in checks[cid]]
    return Results(checks=ordered, timings=timings, errors=dict(sorted(errors.items())))
