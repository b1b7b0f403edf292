"""
Post-hoc quantile calibration
Per-arm monotone maps from nominal to calibrated quantile levels, fitted
on validation PITs and applied to generated batches through their ranks.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
from sklearn.isotonic import IsotonicRegression

from config.experiment_config import CalibrationConfig
from core.errors import ContractError

logger = logging.getLogger(__name__)

# (X, T, n_draws, rng) -> (S, n_draws) uncalibrated draws
RawSampler = Callable[[np.ndarray, np.ndarray, int, np.random.Generator], np.ndarray]


def randomized_pit(draws: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """u = (R + V)/(k + 1), R the number of draws below y and V ~ U(0, 1)."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    k = draws.shape[1]
    ranks = np.sum(draws < y[:, None], axis=1)
    return (ranks + rng.random(y.size)) / (k + 1)


def level_grid(size: int) -> np.ndarray:
    return (np.arange(size) + 0.5) / size


def fit_level_map(pits: np.ndarray, grid_size: int) -> np.ndarray:
    """phi(tau) = PIT quantile at tau on the level grid, projected to be nondecreasing."""
    levels = level_grid(grid_size)
    raw = np.quantile(np.asarray(pits, dtype=float), levels, method='inverted_cdf')
    iso = IsotonicRegression(y_min=0.0, y_max=1.0, increasing=True)
    return iso.fit_transform(levels, raw)


@dataclass
class CalibrationTables:
    """Per-arm level maps phi on their grids, blended with the raw draws."""
    maps: Dict[int, np.ndarray] = field(default_factory=dict)
    blend: float = 0.75

    def level_map(self, arm: int) -> Optional[np.ndarray]:
        return self.maps.get(int(arm))

    def calibrated_levels(self, arm: int, tau: np.ndarray) -> np.ndarray:
        phi = self.level_map(arm)
        if phi is None:
            return tau
        return np.interp(tau, level_grid(phi.size), phi)

    def apply(self, draws: np.ndarray, arms: np.ndarray) -> np.ndarray:
        """
        Calibrate each row of draws.

        A draw of within-row rank r among n sits at level (r + 0.5)/n; it is
        replaced by the row's empirical quantile at phi of that level.
        """
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        arms = np.asarray(arms).astype(int).ravel()
        if self.blend == 0.0:
            return draws.copy()
        n = draws.shape[1]
        order = np.argsort(draws, axis=1, kind='stable')
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(n)[None, :].repeat(draws.shape[0], axis=0), axis=1)
        tau = (ranks + 0.5) / n
        sorted_draws = np.take_along_axis(draws, order, axis=1)
        out = draws.copy()
        for arm in np.unique(arms):
            rows = arms == arm
            if self.level_map(arm) is None:
                continue
            target = self.calibrated_levels(arm, tau[rows])
            # inverted-cdf quantile: smallest order statistic with rank/n >= level
            idx = np.clip(np.ceil(target * n).astype(int) - 1, 0, n - 1)
            calibrated = np.take_along_axis(sorted_draws[rows], idx, axis=1)
            out[rows] = self.blend * calibrated + (1.0 - self.blend) * draws[rows]
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {'blend': self.blend, 'maps': {str(k): v.tolist() for k, v in self.maps.items()}}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CalibrationTables':
        return cls({int(k): np.asarray(v, dtype=float) for k, v in data['maps'].items()}, float(data['blend']))


def calibrate_quantiles(
    sampler: RawSampler,
    X: np.ndarray,
    T: np.ndarray,
    y: np.ndarray,
    arms: np.ndarray,
    config: CalibrationConfig,
    rng: np.random.Generator,
) -> CalibrationTables:
    """
    Fit per-arm level maps on validation units.

    Arms with fewer validation points than the grid use a grid coarsened
    to that many levels; arms without validation points keep the identity.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise ContractError("Quantile calibration needs a nonempty validation split")
    arms = np.asarray(arms).astype(int).ravel()
    draws = sampler(X, T, config.samples_per_obs, rng)
    pits = randomized_pit(draws, y, rng)
    maps: Dict[int, np.ndarray] = {}
    for arm in np.unique(arms):
        arm_pits = pits[arms == arm]
        grid_size = min(config.grid_size, arm_pits.size)
        if grid_size < config.grid_size:
            logger.warning(
                f"Arm {arm}: {arm_pits.size} validation points for grid size {config.grid_size}; "
                f"coarsening the calibration grid to {grid_size}"
            )
        if grid_size < 2:
            continue
        maps[int(arm)] = fit_level_map(arm_pits, grid_size)
    return CalibrationTables(maps, config.blend)


__all__ = [
    'randomized_pit',
    'level_grid',
    'fit_level_map',
    'CalibrationTables',
    'calibrate_quantiles',
]
