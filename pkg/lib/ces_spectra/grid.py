from dataclasses import dataclass

import numpy as np

from ces_spectra.common import MIN_GRID_POINTS, STEP, X_MAX, X_MIN


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [x_min, x_max] with both end points included.

    The step is adjusted so that the end points are hit exactly; `h` is the effective step.
    """

    x_min: float
    x_max: float
    h: float
    n_points: int

    @classmethod
    def from_step(cls, x_min: float = X_MIN, x_max: float = X_MAX, h: float = STEP) -> "Grid":
        if not x_max > x_min:
            raise ValueError(f"Grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]")
        if h <= 0:
            raise ValueError(f"Grid step must be positive, got {h}")
        n_points = int(round((x_max - x_min) / h)) + 1
        if n_points < MIN_GRID_POINTS:
            raise ValueError(
                f"Grid [{x_min}, {x_max}] with step {h} has {n_points} points, "
                f"at least {MIN_GRID_POINTS} are required"
            )
        return cls(x_min, x_max, (x_max - x_min) / (n_points - 1), n_points)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def widened(self, margin: float) -> "Grid":
        return Grid.from_step(self.x_min - margin, self.x_max + margin, self.h)
