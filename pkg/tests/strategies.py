"""Hypothesis strategies shared by the test modules."""
import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mpelab.kernel import build_kernel
from mpelab.models import StateSpace


@st.composite
def kernels(draw, min_n=2, max_n=6, allow_zeros=False):
    n = draw(st.integers(min_n, max_n))
    lo = 0.0 if allow_zeros else 1e-3
    raw = draw(arrays(np.float64, (n, n), elements=st.floats(lo, 1.0, allow_nan=False, allow_subnormal=False)))
    empty = raw.sum(axis=1) == 0
    raw[empty, np.flatnonzero(empty)] = 1.0
    return build_kernel(StateSpace.integer(n), raw / raw.sum(axis=1, keepdims=True))


def vectors(n, lo=-5.0, hi=5.0):
    return arrays(np.float64, (n,), elements=st.floats(lo, hi, allow_nan=False))
