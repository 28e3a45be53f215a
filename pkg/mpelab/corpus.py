"""
Reference chains with known behaviour, truncated to N states where the natural
chain is denumerable. States are labelled 1..N; state 1 is the reset state and
receives any mass that would leave the truncation.
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import zeta

from .errors import BadParameters
from .kernel import build_kernel
from .models import CorpusChain, RewardFunction, StateSpace, TruncationPolicy

MIN_TRUNCATION = 8


def _check_size(N: int):
    if int(N) != N or N < MIN_TRUNCATION:
        raise BadParameters(f"truncation size must be an integer >= {MIN_TRUNCATION}, got {N!r}")


def _chain(name: str, rows: np.ndarray, rewards: Dict[str, np.ndarray] = None,
           truncation: Optional[TruncationPolicy] = None, **meta) -> CorpusChain:
    K = build_kernel(StateSpace.integer(rows.shape[0]), rows)
    rw = {k: RewardFunction(v) for k, v in (rewards or {}).items()}
    return CorpusChain(name, K, rw, truncation, dict(meta))


def block_reward(N: int, level: float) -> np.ndarray:
    """level on the upper half [2^j + 2^(j-1), 2^(j+1)) of every dyadic block, 0 elsewhere."""
    g = np.zeros(N)
    for i in range(2, N + 1):
        j = i.bit_length() - 1
        if i >= 2**j + 2**(j - 1):
            g[i - 1] = level
    return g


# ---------- Finite examples ----------

def two_state(lam: float, g1: float = 0.0, g2: float = 0.0) -> CorpusChain:
    """x1 absorbing, x2 stays with probability lam."""
    if not 0.0 < lam < 1.0:
        raise BadParameters(f"lam must lie in (0,1), got {lam!r}")
    rows = np.array([[1.0, 0.0], [1.0 - lam, lam]])
    return _chain("two_state", rows, {"g": np.array([g1, g2])}, lam=lam)


def cyclic_three() -> CorpusChain:
    rows = np.full((3, 3), 0.5) - 0.5 * np.eye(3)
    return _chain("cyclic_three", rows, {"indicator": np.array([1.0, 0.0, 0.0])})


def lazy_walk(N: int, x_bar: int = None, eta: float = 2.5, m: int = 4) -> CorpusChain:
    """Lazy reflecting walk on 1..N carrying a bump reward around x_bar."""
    _check_size(N)
    rows = np.zeros((N, N))
    for i in range(N):
        rows[i, i] = 0.5
        rows[i, max(i - 1, 0)] += 0.25
        rows[i, min(i + 1, N - 1)] += 0.25
    x_bar = (N + 1) // 2 if x_bar is None else x_bar
    return _chain("lazy_walk", rows, {"bump": bump_reward(x_bar, eta, m, N).values},
                  x_bar=x_bar, eta=eta, m=m)


# ---------- Shift-type chains ----------

def shift_chain(N: int) -> CorpusChain:
    """State 1 absorbing; state i >= 2 moves forward with probability 2^-(i-1), else resets to 1."""
    _check_size(N)
    rows = np.zeros((N, N))
    rows[0, 0] = 1.0
    for i in range(2, N):
        fwd = 2.0 ** -(i - 1)
        rows[i - 1, 0] = 1.0 - fwd
        rows[i - 1, i] = fwd
    rows[N - 1, 0] = 1.0
    moved = 2.0 ** -(N - 1)
    trunc = TruncationPolicy(N, 1, {N: moved}, moved)
    return _chain("shift_chain", rows, truncation=trunc)


def full_support_shift(N: int, eps: float = 0.5) -> CorpusChain:
    """Every state resets to 1 or moves forward with probability 1/2 each."""
    _check_size(N)
    if eps <= 0:
        raise BadParameters("eps must be positive")
    rows = np.zeros((N, N))
    for i in range(N - 1):
        rows[i, 0] += 0.5
        rows[i, i + 1] += 0.5
    rows[N - 1, 0] = 1.0
    trunc = TruncationPolicy(N, 1, {N: 0.5}, 0.5)
    level = 2.0 * (math.log(2.0) + eps)
    return _chain("full_support_shift", rows, {"block": block_reward(N, level)}, trunc, eps=eps)


def recurrent_shift(N: int, k: float = 1.0) -> CorpusChain:
    """Row 1 = (3/4, 1/4); state i >= 2 resets w.p. 1/2, stays w.p. 1/4, moves forward w.p. 1/4."""
    _check_size(N)
    if k < 0:
        raise BadParameters("k must be nonnegative")
    rows = np.zeros((N, N))
    rows[0, 0], rows[0, 1] = 0.75, 0.25
    for i in range(1, N - 1):
        rows[i, 0], rows[i, i], rows[i, i + 1] = 0.5, 0.25, 0.25
    rows[N - 1, 0], rows[N - 1, N - 1] = 0.75, 0.25
    labels = np.arange(1, N + 1)
    g1 = np.where((labels % 2 == 1) & (labels >= 3), k, 0.0)
    trunc = TruncationPolicy(N, 1, {N: 0.25}, 0.25)
    return _chain("recurrent_shift", rows, {"g1": g1, "g2": block_reward(N, k)}, trunc, k=k)


# ---------- Geometric propagation ----------

def branching_chain(N: int, k: float = 2.0) -> CorpusChain:
    """
    State 1 enters block A_i = (a_1 .. a_{i+1}) with total probability e^{-2^i}, uniformly
    over the block; inside a block each state moves on or resets with probability 1/2,
    the last one resets. Only complete blocks that fit in N states are kept.
    """
    _check_size(N)
    sizes: List[int] = []
    used = 1
    while used + len(sizes) + 2 <= N:
        sizes.append(len(sizes) + 2)
        used += sizes[-1]
    size = used
    rows = np.zeros((size, size))
    g = np.zeros(size)
    kept = sum(math.exp(-2.0**i) for i in range(1, len(sizes) + 1))
    rows[0, 0] = 0.5 + (0.5 - kept)
    start = 1
    for i, blk in enumerate(sizes, 1):
        for j in range(blk):
            s = start + j
            rows[0, s] = math.exp(-2.0**i) / blk
            if j < blk - 1:
                rows[s, 0], rows[s, s + 1] = 0.5, 0.5
                g[s] = k
            else:
                rows[s, 0] = 1.0
        start += blk
    # entry mass of the dropped blocks now stays on state 1
    dropped = sum(math.exp(-2.0**i) for i in range(len(sizes) + 1, 64))
    trunc = TruncationPolicy(size, 1, {1: dropped}, dropped)
    return _chain("branching_chain", rows, {"g": g}, trunc, k=k, blocks=len(sizes), requested_N=N)


def branching_z_entropy(k: float, b_max: int) -> Tuple[float, float]:
    """(ln(1 + sum_i e^{ik - 2^i}), k + ln 1/2): block-entry reward entropy vs. the geometric-stay bound."""
    total = 1.0 + sum(math.exp(i * k - 2.0**i) for i in range(1, b_max + 1))
    return math.log(total), k + math.log(0.5)


def local_geometric(N: int, a: Optional[Sequence[float]] = None, n0: int = 0) -> CorpusChain:
    """State 1 jumps to state i+1 with probability a_i; every other state stays or resets w.p. 1/2."""
    _check_size(N)
    seq = np.array([2.0 ** -(i + 1) for i in range(1, N)] if a is None else a, dtype=float)
    if len(seq) < N - 1:
        raise BadParameters(f"need at least {N - 1} jump probabilities, got {len(seq)}")
    head = seq[:N - 1]
    if np.any(head <= 0):
        raise BadParameters("jump probabilities must be positive")
    moved = 0.5 - float(head.sum())
    head = head * (0.5 / head.sum())
    rows = np.zeros((N, N))
    rows[0, 0] = 0.5
    rows[0, 1:] = head
    for i in range(1, N):
        rows[i, 0], rows[i, i] = 0.5, 0.5

    # rewards on a decreasing subsequence a_{i_j} < zeta(3) / (1+j)^3
    g = np.zeros(N)
    z3 = float(zeta(3))
    prev = math.inf
    j = 0
    for i, ai in enumerate(head):
        if ai < prev and ai < z3 / (1 + j) ** 3:
            if j >= n0:
                g[i + 1] = 2.0 * (math.log(2.0) + math.log(1.0 - 1.0 / (j + 2)))
            prev = ai
            j += 1
    trunc = TruncationPolicy(N, 1, {1: abs(moved)}, abs(moved))
    return _chain("local_geometric", rows, {"g": g}, trunc, n0=n0)


# ---------- Random fixtures ----------

def dirichlet_kernel(n: int, rng: np.random.Generator, concentration: float = 1.0) -> CorpusChain:
    """Rows drawn iid from a symmetric Dirichlet; every entry positive almost surely."""
    if n < 2 or concentration <= 0:
        raise BadParameters("need n >= 2 and a positive concentration")
    rows = rng.dirichlet(np.full(n, concentration), size=n)
    return _chain("dirichlet", rows, concentration=concentration)


# ---------- Rewards ----------

def bump_reward(x_bar: int, eta: float, m: int, N: int) -> RewardFunction:
    """g_m(x) = min(m * rho(x, B(x_bar, eta - 1/m)), 1) on the integer states 1..N."""
    if m < 1 or eta <= 1.0 / m:
        raise BadParameters("need m >= 1 and eta > 1/m")
    if not 1 <= x_bar <= N:
        raise BadParameters(f"centre {x_bar} outside 1..{N}")
    D = StateSpace.integer(N).distances()
    inner = D[x_bar - 1] <= eta - 1.0 / m
    return RewardFunction(np.minimum(m * D[:, inner].min(axis=1), 1.0))


def bump_ball(x_bar: int, eta: float, N: int) -> List[int]:
    """Indices of the closed ball B(x_bar, eta) in 1..N."""
    return [i for i in range(N) if abs(i + 1 - x_bar) <= eta]


# ---------- Closed forms ----------

def two_state_exists(lam: float, g: Sequence[float]) -> bool:
    g1, g2 = float(g[0]), float(g[1])
    return g1 > g2 or 0.5 * abs(g1 - g2) < -0.5 * math.log(lam)


def two_state_closed_form(lam: float, g: Sequence[float]) -> Optional[Tuple[np.ndarray, float]]:
    """(w, lambda) with lambda = g(x1) and w(x1) - w(x2) solving g1 - g2 = ln[(1-lam) e^{gap} + lam]."""
    if not two_state_exists(lam, g):
        return None
    g1, g2 = float(g[0]), float(g[1])
    gap = math.log((math.exp(g1 - g2) - lam) / (1.0 - lam))
    w = np.array([gap, 0.0])
    return w - w.min(), g1


def recurrent_shift_lambda1(k: float) -> float:
    if k < 0:
        raise BadParameters("k must be nonnegative")
    ek = math.exp(k)
    return math.log(0.5 + 0.125 * (math.sqrt(12.0 + ek * ek - 4.0 * ek) + ek))


def full_support_block_gaps(w: Sequence[float], eps: float) -> List[Tuple[int, float, float]]:
    """(j, w(3*2^(j-1)) - w(2^(j+1)), 2^(j-1)*eps) for every block contained in the truncation."""
    w = np.asarray(w, dtype=float)
    out = []
    j = 1
    while 2 ** (j + 1) <= len(w):
        a, b = 3 * 2 ** (j - 1), 2 ** (j + 1)
        out.append((j, float(w[a - 1] - w[b - 1]), 2 ** (j - 1) * eps))
        j += 1
    return out


CONSTRUCTORS = {
    "two_state": two_state,
    "cyclic_three": cyclic_three,
    "lazy_walk": lazy_walk,
    "shift_chain": shift_chain,
    "full_support_shift": full_support_shift,
    "recurrent_shift": recurrent_shift,
    "branching_chain": branching_chain,
    "local_geometric": local_geometric,
}
