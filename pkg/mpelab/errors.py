from typing import Dict, Optional


class MpeLabError(Exception):
    """Base class for every error raised by mpelab."""


class NonStochasticRow(MpeLabError):
    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(f"Row {row} sums to {total!r} (must be 1 within 1e-12)")


class NegativeEntry(MpeLabError):
    def __init__(self, row: int, col: int, value: float):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"Entry ({row}, {col}) is negative: {value!r}")


class NonUniqueInvariant(MpeLabError):
    def __init__(self, n_closed: int):
        self.n_closed = n_closed
        super().__init__(f"Kernel has {n_closed} recurrent classes; invariant measure is not unique")


class EmptyTaboo(MpeLabError):
    pass


class RelationViolated(MpeLabError):
    def __init__(self, relation: str, magnitude: float, witness: Optional[Dict] = None):
        self.relation = relation
        self.magnitude = magnitude
        self.witness = witness or {}
        super().__init__(f"{relation} violated by {magnitude:.3e} at {self.witness}")


class ZeroGamma(MpeLabError):
    pass


class DomainError(MpeLabError, ValueError):
    pass


class NonLatticeReward(MpeLabError):
    pass


class BadParameters(MpeLabError, ValueError):
    pass


class InvalidInput(MpeLabError, ValueError):
    pass
