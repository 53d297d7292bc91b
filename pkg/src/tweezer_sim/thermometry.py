"""Release-and-recapture thermometry.

The trap is switched off for a variable time, the atom flies ballistically
(gravity on), the trap is restored and the atom counts as recaptured when
its total energy in the restored potential is negative.  A temperature is
extracted from a measured recapture curve by least-squares comparison with
Monte Carlo model curves on a temperature grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .dynamics import _sample_states
from .physics import TrapConfig, potential_energy

__all__ = [
    "RecaptureCurve",
    "TemperatureFit",
    "FitRangeError",
    "simulate_release_recapture",
    "recapture_fraction_of_states",
    "fit_temperature",
    "default_temperature_grid",
    "write_curve_csv",
    "read_curve_csv",
    "write_fit_json",
]

MAX_OFF_TIME = 100e-6  # s


class FitRangeError(ValueError):
    """The chi^2 minimum sits on the temperature-grid boundary."""


@dataclass
class RecaptureCurve:
    off_times: np.ndarray      # (m,) s, strictly increasing
    probabilities: np.ndarray  # (m,) in [0, 1]
    shots_per_point: int

    def __post_init__(self):
        self.off_times = np.asarray(self.off_times, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.off_times.ndim != 1 or self.off_times.shape != self.probabilities.shape:
            raise ValueError("off_times and probabilities must be equal-length 1-D")
        if np.any(np.diff(self.off_times) <= 0.0):
            raise ValueError("off_times must be strictly increasing")
        if np.any((self.probabilities < 0.0) | (self.probabilities > 1.0)):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.shots_per_point < 1:
            raise ValueError("shots_per_point must be >= 1")


@dataclass
class TemperatureFit:
    temperature: float  # K
    sigma: float        # K, one standard deviation
    chi2_curve: list    # [(T [K], chi2), ...]

    def __post_init__(self):
        if not self.temperature > 0.0:
            raise ValueError("fitted temperature must be > 0")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be > 0")


def _free_flight(positions, velocities, t_off: float, cfg: TrapConfig,
                 include_gravity: bool):
    g = np.array([-cfg.constants.g, 0.0, 0.0]) if include_gravity else np.zeros(3)
    p = positions + velocities * t_off + 0.5 * g * t_off**2
    v = velocities + g * t_off
    return p, v


def _recaptured_fraction(positions, velocities, cfg: TrapConfig) -> float:
    # energy criterion in the restored trap potential (gravity excluded)
    pot = potential_energy(cfg, positions)
    kin = 0.5 * cfg.constants.atom_mass * np.sum(velocities**2, axis=1)
    return float(np.mean(pot + kin < 0.0))


def _validate_off_times(off_times) -> np.ndarray:
    off = np.asarray(off_times, dtype=float)
    if np.any(off < 0.0) or np.any(off > MAX_OFF_TIME):
        raise ValueError(f"off times must lie in [0, {MAX_OFF_TIME*1e6:.0f} us]")
    return off


def simulate_release_recapture(temperature: float, cfg: TrapConfig, off_times,
                               shots: int, seed: int,
                               include_gravity: bool = True) -> RecaptureCurve:
    """Monte Carlo recapture curve for a thermal ensemble at `temperature`.

    Each curve point uses `shots` freshly sampled atoms from its own
    substream of `seed`, so the whole curve is deterministic for any
    partitioning of the work.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    off = _validate_off_times(off_times)
    probs = np.empty(len(off))
    for j, t_off in enumerate(off):
        gen = _rng.substream(seed, _rng.RELEASE, j)
        pos, vel = _sample_states(temperature, cfg, shots, gen)
        pos, vel = _free_flight(pos, vel, t_off, cfg, include_gravity)
        probs[j] = _recaptured_fraction(pos, vel, cfg)
    return RecaptureCurve(off, probs, shots)


def recapture_fraction_of_states(positions, velocities, cfg: TrapConfig,
                                 off_times,
                                 include_gravity: bool = True) -> np.ndarray:
    """Recapture probabilities of an existing ensemble for each off time."""
    off = _validate_off_times(off_times)
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    out = np.empty(len(off))
    for j, t_off in enumerate(off):
        p, v = _free_flight(positions, velocities, t_off, cfg, include_gravity)
        out[j] = _recaptured_fraction(p, v, cfg)
    return out


def default_temperature_grid(t_expected: float, points: int = 25) -> np.ndarray:
    """Grid spanning roughly [0.55, 1.6] x the expected temperature."""
    return np.linspace(0.55 * t_expected, 1.6 * t_expected, points)


def fit_temperature(curve: RecaptureCurve, cfg: TrapConfig, grid,
                    shots_per_model_point: int, seed: int,
                    include_gravity: bool = True) -> TemperatureFit:
    """Least-squares temperature fit of a recapture curve.

    chi2(T) = sum_i (p_data,i - p_model,i(T))^2 with model curves generated
    by simulate_release_recapture at a fixed seed, so the fit is
    deterministic.  The reported temperature interpolates the chi2 minimum
    parabolically; sigma is the width of the interval where
    chi2 <= chi2_min (1 + 1/(N-1)), the unweighted least-squares
    one-standard-deviation rule (N = number of curve points).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 5:
        raise ValueError("grid must contain at least 5 temperatures")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")

    chi2 = np.empty(len(grid))
    for i, t_model in enumerate(grid):
        model = simulate_release_recapture(t_model, cfg, curve.off_times,
                                           shots_per_model_point, seed,
                                           include_gravity)
        chi2[i] = float(np.sum((curve.probabilities - model.probabilities) ** 2))
    chi2_curve = list(zip(grid.tolist(), chi2.tolist()))

    i0 = int(np.argmin(chi2))
    if i0 == 0 or i0 == len(grid) - 1:
        raise FitRangeError(
            f"chi2 minimum at grid boundary (T = {grid[i0]*1e6:.1f} uK); "
            "widen the temperature grid")

    if chi2[i0] == 0.0:
        # the curve is one of the model curves; the fit is exact
        return TemperatureFit(float(grid[i0]), 1e-12, chi2_curve)

    lo = max(0, i0 - 4)
    hi = min(len(grid), i0 + 5)
    a, b, c = np.polyfit(grid[lo:hi], chi2[lo:hi], 2)
    if a <= 0.0:  # noise-dominated window; use the full grid curvature
        a, b, c = np.polyfit(grid, chi2, 2)
    if a <= 0.0:
        raise FitRangeError("chi2 curve has no usable minimum")
    t_fit = -b / (2.0 * a)
    if not grid[0] <= t_fit <= grid[-1]:
        raise FitRangeError("interpolated minimum outside the grid")
    chi2_min = max(float(np.polyval([a, b, c], t_fit)), 0.0)
    n_pts = len(curve.off_times)
    s2 = max(chi2_min, 1e-300) / max(n_pts - 1, 1)
    sigma = 2.0 * np.sqrt(s2 / a)  # full width of the delta-chi2 interval
    return TemperatureFit(float(t_fit), float(max(sigma, 1e-12)), chi2_curve)


def write_curve_csv(curve: RecaptureCurve, path) -> None:
    """CSV columns: t_off_us, probability, shots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_off_us", "probability", "shots"])
        for t, p in zip(curve.off_times, curve.probabilities):
            writer.writerow([f"{t*1e6:.9g}", f"{p:.9g}", curve.shots_per_point])


def read_curve_csv(path) -> RecaptureCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"empty recapture curve file: {path}")
    off = np.array([float(r["t_off_us"]) * 1e-6 for r in rows])
    probs = np.array([float(r["probability"]) for r in rows])
    shots = int(rows[0]["shots"])
    return RecaptureCurve(off, probs, shots)


def write_fit_json(fit: TemperatureFit, path) -> None:
    doc = {
        "temperature_uK": fit.temperature * 1e6,
        "sigma_uK": fit.sigma * 1e6,
        "chi2_curve": [[t * 1e6, x] for t, x in fit.chi2_curve],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
