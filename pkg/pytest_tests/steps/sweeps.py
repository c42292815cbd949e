import logging
import math
from dataclasses import dataclass

import allure
import numpy as np
from ces_spectra.potential import DkvParams
from ces_spectra.spectrum import BoundState, coupling_from_root, coupling_window, enumerate_levels

logger = logging.getLogger("CesLogger")

SWEEP_SEED = 1337
B_RANGE = (1.0, 60.0)
N_SCAN = 40


@dataclass(frozen=True)
class RootInstance:
    n: int
    b: float
    t: float
    A: float


@dataclass(frozen=True)
class SweepPoint:
    params: DkvParams
    states: list[BoundState]


@allure.title("Sample couplings with a root inside the level window")
def middle_root_instances(count: int, seed: int = SWEEP_SEED) -> list[RootInstance]:
    """
    Instances (n, b, t) with t strictly inside (n + 1/2, sqrt(b)) and the coupling A for which
    t solves the level-n cubic.
    """
    rng = np.random.default_rng(seed)
    instances = []
    while len(instances) < count:
        b = float(rng.uniform(0.3, 400.0))
        top = math.ceil(math.sqrt(b) - 0.5) - 1
        if top < 0:
            continue
        n = int(rng.integers(0, top + 1))
        lo, hi = n + 0.5, math.sqrt(b)
        t = float(lo + (hi - lo) * rng.uniform(1e-6, 1 - 1e-6))
        instances.append(RootInstance(n=n, b=b, t=t, A=coupling_from_root(n, b, t)))
    return instances


def _slowest_rate(states: list[BoundState]) -> float:
    return min(min(state.left_rate, state.right_rate) for state in states)


@allure.title("Sample admissible couplings for the level count sweep")
def admissible_sweep(
    count: int, seed: int = SWEEP_SEED, min_rate: float = 0.25
) -> list[SweepPoint]:
    """
    Couplings around the ground-level window, keeping only points whose levels decay at least
    as fast as exp(-min_rate |x|) on both sides.
    """
    rng = np.random.default_rng(seed)
    points = []
    rejected = 0
    while len(points) < count:
        B = float(rng.uniform(*B_RANGE))
        window = coupling_window(B / 2, 0)
        if window is None:
            rejected += 1
            continue
        A_low, _ = window
        A = float(rng.uniform(A_low - 5.0, A_low + 40.0))
        p = DkvParams(A=A, B=B)
        states = enumerate_levels(p, N_SCAN)
        if states and _slowest_rate(states) < min_rate:
            rejected += 1
            continue
        points.append(SweepPoint(params=p, states=states))
    logger.info(f"Sweep of {count} couplings, {rejected} sample(s) rejected")
    return points
