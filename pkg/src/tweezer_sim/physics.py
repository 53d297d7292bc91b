"""Gaussian-beam tweezer potential and derived trap quantities.

Conventions used throughout the package (SI units unless noted):
  z  -- optical axis of the trapping beam
  y  -- transverse axis along which the tweezer is scanned
  x  -- remaining transverse axis; gravity points along -x
Trap depths are quoted in kelvin (U0/kB), the convention of the
cold-atom literature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .profiles import MotionProfile

__all__ = [
    "PhysConstants",
    "RB87",
    "TrapConfig",
    "depth_from_power",
    "potential_energy",
    "local_trap_depth",
    "trap_frequencies",
    "ground_state_extent",
    "adiabatic_accel_limit",
    "vibrational_quantum",
]


@dataclass(frozen=True)
class PhysConstants:
    """Physical constants for one atomic species (defaults: 87Rb)."""

    atom_mass: float = 1.44316e-25      # kg
    kb: float = 1.380649e-23            # J/K
    hbar: float = 1.054571817e-34       # J s
    g: float = 9.81                     # m/s^2
    omega_hf: float = 2 * np.pi * 6.8347e9  # rad/s, qubit hyperfine splitting

    def __post_init__(self):
        for name in ("atom_mass", "kb", "hbar", "g", "omega_hf"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"PhysConstants.{name} must be strictly positive")


RB87 = PhysConstants()


@dataclass(frozen=True)
class TrapConfig:
    """Geometry and strength of one Gaussian-beam tweezer.

    Attributes:
        wavelength: trap light wavelength [m]
        waist: 1/e^2 intensity radius at focus [m]
        depth_K: trap depth U0/kB [K]
        power_to_depth: linear power calibration [K/W]; the default maps
            400 uW to 500 uK
        beta: fractional depth loss per squared transverse displacement of
            the trap center off the optical axis [1/m^2]; models the waist
            growth of the scanned beam.  Default: 3% loss at 16 um.
        center: optional motion profile of the trap center; None means a
            static trap at the origin
        constants: atomic species constants
    """

    wavelength: float = 810e-9
    waist: float = 0.9e-6
    depth_K: float = 500e-6
    power_to_depth: float = 1.25
    beta: float = 0.03 / (16e-6) ** 2
    center: "MotionProfile | None" = field(default=None, compare=False)
    constants: PhysConstants = RB87

    def __post_init__(self):
        if not self.wavelength > 0.0:
            raise ValueError("wavelength must be > 0")
        if not self.waist > 0.0:
            raise ValueError("waist must be > 0")
        if not self.depth_K > 0.0:
            raise ValueError("depth_K must be > 0")
        if not self.power_to_depth > 0.0:
            raise ValueError("power_to_depth must be > 0")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")

    @property
    def rayleigh_range(self) -> float:
        """zR = pi w0^2 / lambda [m], derived, never stored."""
        return np.pi * self.waist**2 / self.wavelength

    @property
    def depth_J(self) -> float:
        return self.constants.kb * self.depth_K


def depth_from_power(power: float, cfg: TrapConfig) -> float:
    """Trap depth [K] for a given optical power [W].

    Single linear calibration constant; the default reproduces the
    400 uW -> 500 uK operating point.
    """
    if power < 0.0:
        raise ValueError("power must be >= 0")
    return cfg.power_to_depth * power


def _as_xyz(r):
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise ValueError("positions must have a trailing axis of length 3")
    return r[..., 0], r[..., 1], r[..., 2]


def local_trap_depth(cfg: TrapConfig, r, trap_center=(0.0, 0.0, 0.0),
                     depth_K: float | None = None):
    """Local light-shift depth |U|/kB [K] at position(s) r.

    This is the binding energy of the trap light at the atom's position:
    depth at the focus, falling off with the Gaussian intensity profile.
    The nominal depth is reduced by the off-axis falloff
    U0 (1 - beta d^2), clamped at zero, where d is the transverse
    displacement of the trap center itself.  Gravity never enters.
    """
    x, y, z = _as_xyz(r)
    cx, cy, cz = _as_xyz(np.asarray(trap_center, dtype=float))
    u0 = cfg.depth_K if depth_K is None else depth_K
    u0 = u0 * np.maximum(1.0 - cfg.beta * (cx**2 + cy**2), 0.0)
    dx, dy, dz = x - cx, y - cy, z - cz
    zr2 = cfg.rayleigh_range**2
    q = 1.0 + dz**2 / zr2
    return u0 / q * np.exp(-2.0 * (dx**2 + dy**2) / (cfg.waist**2 * q))


def potential_energy(cfg: TrapConfig, r, trap_center=(0.0, 0.0, 0.0),
                     include_gravity: bool = False,
                     depth_K: float | None = None):
    """Potential energy [J] of the atom at r for a trap centered at trap_center.

    U = -kB U0_eff / (1 + (dz/zR)^2) * exp(-2 (dx^2+dy^2) / w(dz)^2)
        (+ m g x when include_gravity is set)

    Gravity is negligible inside the trap but matters in free flight, so it
    is switchable per call.
    """
    u = -cfg.constants.kb * local_trap_depth(cfg, r, trap_center, depth_K)
    if include_gravity:
        x = _as_xyz(r)[0]
        u = u + cfg.constants.atom_mass * cfg.constants.g * x
    return u


def trap_frequencies(cfg: TrapConfig) -> tuple[float, float]:
    """Harmonic oscillation frequencies (omega_radial, omega_axial) [rad/s].

    From the quadratic expansion of the Gaussian-beam potential at the
    focus: omega_r = sqrt(4 U0 / (m w0^2)), omega_z = sqrt(2 U0 / (m zR^2)).
    """
    u0 = cfg.depth_J
    m = cfg.constants.atom_mass
    omega_r = np.sqrt(4.0 * u0 / (m * cfg.waist**2))
    omega_z = np.sqrt(2.0 * u0 / (m * cfg.rayleigh_range**2))
    return omega_r, omega_z


def ground_state_extent(cfg: TrapConfig) -> float:
    """Radial ground-state wave-packet size sigma = sqrt(hbar/(2 m omega_r)) [m]."""
    omega_r, _ = trap_frequencies(cfg)
    return np.sqrt(cfg.constants.hbar / (2.0 * cfg.constants.atom_mass * omega_r))


def adiabatic_accel_limit(cfg: TrapConfig) -> float:
    """Acceleration scale [m/s^2] above which transport excites the atom.

    Transport is adiabatic while m a sigma << hbar Omega; the returned value
    is the equality point hbar Omega / (m sigma) with Omega the radial
    frequency and sigma the ground-state extent.
    """
    omega_r, _ = trap_frequencies(cfg)
    sigma = ground_state_extent(cfg)
    return cfg.constants.hbar * omega_r / (cfg.constants.atom_mass * sigma)


def vibrational_quantum(cfg: TrapConfig) -> float:
    """One radial vibrational quantum hbar omega_r / kB, in K."""
    omega_r, _ = trap_frequencies(cfg)
    return cfg.constants.hbar * omega_r / cfg.constants.kb
