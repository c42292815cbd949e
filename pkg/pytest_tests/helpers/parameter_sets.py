"""
    Coupling sets shared by the test suites, with the reference values they are checked against.
"""

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class CouplingSet:
    name: str
    A: float
    B: float
    levels: int
    edge: float
    ground_energy: Optional[float] = None


# single level close to the right continuum edge
SINGLE_LEVEL = CouplingSet(
    "single-level", A=10.25, B=12.5, levels=1, edge=-3.0, ground_energy=-3.197
)
TWO_LEVELS = CouplingSet("two-levels", A=36.0, B=42.0, levels=2, edge=-6.75)
FOUR_LEVELS = CouplingSet("four-levels", A=45.0, B=42.0, levels=4, edge=0.0)
NO_LEVELS = CouplingSet("no-levels", A=1.0, B=12.5, levels=0, edge=-12.25)

ALL_SETS = [SINGLE_LEVEL, TWO_LEVELS, FOUR_LEVELS, NO_LEVELS]
BOUND_SETS = [SINGLE_LEVEL, TWO_LEVELS, FOUR_LEVELS]

SINGLE_LEVEL_ROOTS = (-1.834, 2.288, 9.296)
SINGLE_LEVEL_ALPHA = 0.444
SINGLE_LEVEL_BETA = -5.020

# logistic Natanzon potential 1 - f z(1 - z) with R = 1
LOGISTIC = dict(f=40.0, h0=0.0, h1=0.0, a=0.0, c0=1.0, c1=1.0)
LOGISTIC_LEVELS = 3


def logistic_energy(n: int, f: float = 40.0, c: float = 1.0) -> float:
    beta = ((f + 1) ** 0.5 - 2 * n - 1) / 2
    return (1 - beta**2) / c
