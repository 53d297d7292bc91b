"""Classical atom dynamics in the moving tweezer.

Thermal-state sampling, velocity-Verlet trajectory integration against the
time-dependent Gaussian-beam potential, and ensemble diagnostics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from ._kernels import evolve_ensemble_kernel
from .physics import TrapConfig, local_trap_depth, potential_energy, trap_frequencies
from .profiles import MotionProfile, motion_profile_round_trip, static_profile

__all__ = [
    "AtomState",
    "Ensemble",
    "Trajectory",
    "DEFAULT_DT",
    "SAMPLER_REGION_CHI",
    "sample_thermal_state",
    "sample_ensemble",
    "integrate",
    "evolve_ensemble",
    "ensemble_temperature",
    "total_energy",
    "write_trajectory_csv",
    "motion_profile_round_trip",
    "static_profile",
]

DEFAULT_DT = 20e-9  # s, ~1/600 of the radial period of the default trap

# Thermal sampling region: harmonic-energy ellipsoid
#   2(x^2+y^2)/w0^2 + z^2/zR^2 <= min(CHI kT, U0) / U0.
# The Boltzmann-weighted bound-state measure of a Gaussian beam diverges
# (logarithmically) along the axial skirt, so the sampled support must be
# bounded.  CHI = 6 keeps all but ~e^-6 of the core Boltzmann density while
# excluding the weakly-bound skirt states that laser cooling does not
# populate; the min with U0 keeps the region inside the physical well.
SAMPLER_REGION_CHI = 6.0

_LOSS_RADII = 10.0  # transverse excursion, in waists, that flags an atom lost


@dataclass
class AtomState:
    """Classical point-particle state of the atom."""

    position: np.ndarray  # (3,) m
    velocity: np.ndarray  # (3,) m/s
    time: float = 0.0     # s

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("AtomState components must be finite")


@dataclass
class Ensemble:
    """A set of atoms sharing one time stamp."""

    positions: np.ndarray   # (n, 3) m
    velocities: np.ndarray  # (n, 3) m/s
    time: float = 0.0
    source_temperature: float | None = None  # K
    seed: int | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (n, 3)")
        if self.velocities.shape != self.positions.shape:
            raise ValueError("velocities must match positions in shape")
        if self.positions.shape[0] == 0:
            raise ValueError("ensemble must not be empty")

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass
class Trajectory:
    """Sampled states of one integrated atom."""

    times: np.ndarray          # (m,) s
    positions: np.ndarray      # (m, 3) m
    velocities: np.ndarray     # (m, 3) m/s
    local_depth_K: np.ndarray  # (m,) K, |trap potential|/kB at the atom
    energies: np.ndarray       # (m,) J, kinetic + potential (incl. gravity if on)
    lost: bool
    dt: float


def _harmonic_sigmas(cfg: TrapConfig, temperature: float) -> tuple[float, float]:
    ratio = temperature / cfg.depth_K
    sigma_x = 0.5 * cfg.waist * np.sqrt(ratio)
    sigma_z = cfg.rayleigh_range * np.sqrt(0.5 * ratio)
    return sigma_x, sigma_z


def _sample_states(temperature: float, cfg: TrapConfig, n: int,
                   gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rejection sampler for bound thermal states.

    Positions follow the Boltzmann weight exp(-(U - U_min)/kB T) of the full
    Gaussian-beam potential on the sampling region; velocities are
    Maxwell-Boltzmann; (position, velocity) pairs with total energy >= 0 are
    resampled so only bound atoms are returned.

    The proposal is a per-axis Gaussian with variance (1 + m*) times the
    harmonic one, where m* = min(CHI kT, U0)/U0 caps the region.  On the
    region dU >= dU_harm/(1 + m*) holds exactly (1 - e^-s >= s/(1+s)), so
    accepting with exp(-(dU - dU_harm/(1+m*))/kB T) is a valid envelope.
    """
    if not 0.0 < temperature:
        raise ValueError("temperature must be > 0")
    if temperature >= cfg.depth_K:
        raise ValueError("no bound thermal state: temperature >= trap depth")

    beta = cfg.depth_K / temperature
    m_star = min(SAMPLER_REGION_CHI / beta, 1.0)
    c_prop = 1.0 + m_star
    sigma_x, sigma_z = _harmonic_sigmas(cfg, temperature)
    scale = np.array([sigma_x, sigma_x, sigma_z]) * np.sqrt(c_prop)
    v_scale = np.sqrt(cfg.constants.kb * temperature / cfg.constants.atom_mass)

    pos = np.empty((n, 3))
    vel = np.empty((n, 3))
    filled = 0
    while filled < n:
        k = max(2 * (n - filled), 256)
        cand = gen.normal(size=(k, 3)) * scale
        p = 2.0 * (cand[:, 0] ** 2 + cand[:, 1] ** 2) / cfg.waist**2
        v = (cand[:, 2] / cfg.rayleigh_range) ** 2
        du = 1.0 - np.exp(-p / (1.0 + v)) / (1.0 + v)       # (U-U_min)/U0
        accept = np.exp(-beta * (du - (p + v) / c_prop))
        u = gen.random(k)
        vels = gen.normal(size=(k, 3)) * v_scale
        kinetic = 0.5 * cfg.constants.atom_mass * np.sum(vels**2, axis=1)
        bound = kinetic / cfg.constants.kb < cfg.depth_K * (1.0 - du)
        ok = ((p + v) <= m_star) & (u < accept) & bound
        sel = np.flatnonzero(ok)[: n - filled]
        pos[filled:filled + len(sel)] = cand[sel]
        vel[filled:filled + len(sel)] = vels[sel]
        filled += len(sel)
    return pos, vel


def sample_thermal_state(temperature: float, cfg: TrapConfig,
                         stream_id: int) -> AtomState:
    """Draw one bound thermal atom from the substream labeled stream_id."""
    pos, vel = _sample_states(temperature, cfg, 1,
                              _rng.substream(stream_id, _rng.SAMPLER))
    return AtomState(pos[0], vel[0], 0.0)


def sample_ensemble(temperature: float, cfg: TrapConfig, n: int,
                    seed: int) -> Ensemble:
    """Draw n bound thermal atoms; bit-reproducible for a given seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pos, vel = _sample_states(temperature, cfg, n,
                              _rng.substream(seed, _rng.SAMPLER))
    return Ensemble(pos, vel, 0.0, source_temperature=temperature, seed=seed)


def _check_dt(cfg: TrapConfig, dt: float, max_depth_K: float | None = None):
    depth = cfg.depth_K if max_depth_K is None else max(max_depth_K, cfg.depth_K)
    omega_r, _ = trap_frequencies(cfg)
    omega_r = omega_r * np.sqrt(depth / cfg.depth_K)
    f_r = omega_r / (2.0 * np.pi)
    if dt > 1.0 / (20.0 * f_r) * (1.0 + 1e-12):
        raise ValueError(
            f"dt = {dt:g} s too large; need dt <= 1/(20 f_radial) = "
            f"{1.0/(20.0*f_r):g} s")
    if not dt > 0.0:
        raise ValueError("dt must be > 0")


def _step_grid(cfg: TrapConfig, profile: MotionProfile | None, duration: float,
               dt: float, depth_schedule=None):
    """Precompute center path and depth on the Verlet step edges."""
    n_steps = max(int(np.ceil(duration / dt - 1e-9)), 1)
    dt_eff = duration / n_steps
    t_rel = np.arange(n_steps + 1) * dt_eff
    if profile is None:
        centers = np.zeros((n_steps + 1, 3))
    else:
        centers = profile.position(t_rel)
    if depth_schedule is None:
        depth_k = np.full(n_steps + 1, cfg.depth_K)
    else:
        depth_k = np.asarray(depth_schedule(t_rel), dtype=float)
        if depth_k.shape != t_rel.shape:
            raise ValueError("depth_schedule must map times to one depth per time")
    return n_steps, dt_eff, centers, depth_k


def _run_kernel(cfg: TrapConfig, pos, vel, centers, depth_k, dt, n_steps,
                include_gravity, lost, cp_steps=None):
    ncp = 0 if cp_steps is None else len(cp_steps)
    phase_int = np.zeros((pos.shape[0], max(ncp, 1)))
    cps = np.asarray(cp_steps if cp_steps is not None else [-1], dtype=np.int64)
    evolve_ensemble_kernel(
        pos, vel,
        np.ascontiguousarray(centers[:, 0]),
        np.ascontiguousarray(centers[:, 1]),
        np.ascontiguousarray(centers[:, 2]),
        np.ascontiguousarray(depth_k),
        dt, cfg.constants.kb, 1.0 / cfg.constants.atom_mass,
        1.0 / cfg.waist**2, 1.0 / cfg.rayleigh_range**2, cfg.beta,
        -cfg.constants.g if include_gravity else 0.0,
        n_steps, (_LOSS_RADII * cfg.waist) ** 2, lost, cps, phase_int)
    return phase_int[:, :ncp] if ncp else None


def evolve_ensemble(ens: Ensemble, cfg: TrapConfig,
                    profile: MotionProfile | None = None,
                    duration: float | None = None,
                    dt: float = DEFAULT_DT,
                    phase_times=None,
                    depth_schedule=None,
                    include_gravity: bool = True):
    """Integrate every atom through the moving trap.

    The profile clock starts at the beginning of the evolution.  Returns
    (evolved ensemble, lost flags, phase integrals), where the phase
    integrals are the cumulative integral of the local trap depth [K s] at
    the requested phase_times (snapped to the step grid).
    """
    if profile is None:
        profile = cfg.center
    if duration is None:
        if profile is None:
            raise ValueError("duration must be given for a static trap")
        duration = profile.duration
    if not duration > 0.0:
        raise ValueError("duration must be > 0")
    depth_max = None
    if depth_schedule is not None:
        depth_max = float(np.max(depth_schedule(np.linspace(0.0, duration, 1001))))
    _check_dt(cfg, dt, depth_max)

    n_steps, dt_eff, centers, depth_k = _step_grid(cfg, profile, duration, dt,
                                                   depth_schedule)
    cp_steps = None
    if phase_times is not None:
        cp_steps = np.clip(np.rint(np.asarray(phase_times, float) / dt_eff),
                           0, n_steps).astype(np.int64)
        if np.any(np.diff(cp_steps) < 0):
            raise ValueError("phase_times must be ascending")

    pos = ens.positions.copy()
    vel = ens.velocities.copy()
    lost = np.zeros(ens.n, dtype=np.uint8)
    phase_int = _run_kernel(cfg, pos, vel, centers, depth_k, dt_eff, n_steps,
                            include_gravity, lost, cp_steps)
    out = Ensemble(pos, vel, ens.time + duration,
                   source_temperature=ens.source_temperature, seed=ens.seed)
    return out, lost.astype(bool), phase_int


def integrate(state: AtomState, cfg: TrapConfig,
              profile: MotionProfile | None = None,
              t_end: float | None = None,
              dt: float = DEFAULT_DT,
              sample_every: int = 1,
              depth_schedule=None,
              include_gravity: bool = True) -> Trajectory:
    """Velocity-Verlet trajectory of one atom, sampled every sample_every steps.

    m r'' = -grad U(r - c(t)) - m g x_hat, with c(t) the profile position
    (profile clock starting at state.time).  Requires dt <= 1/(20 f_radial).
    """
    if profile is None:
        profile = cfg.center
    if t_end is None or not t_end > state.time:
        raise ValueError("t_end must exceed state.time")
    duration = t_end - state.time
    depth_max = None
    if depth_schedule is not None:
        depth_max = float(np.max(depth_schedule(np.linspace(0.0, duration, 1001))))
    _check_dt(cfg, dt, depth_max)
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")

    n_steps, dt_eff, centers, depth_k = _step_grid(cfg, profile, duration, dt,
                                                   depth_schedule)
    sample_steps = np.arange(0, n_steps + 1, sample_every, dtype=np.int64)
    if sample_steps[-1] != n_steps:
        sample_steps = np.append(sample_steps, n_steps)

    pos = state.position.reshape(1, 3).copy()
    vel = state.velocity.reshape(1, 3).copy()
    lost = np.zeros(1, dtype=np.uint8)
    m_samp = len(sample_steps)
    out_pos = np.empty((m_samp, 3))
    out_vel = np.empty((m_samp, 3))
    out_pos[0] = pos[0]
    out_vel[0] = vel[0]
    for j in range(1, m_samp):
        s0, s1 = sample_steps[j - 1], sample_steps[j]
        _run_kernel(cfg, pos, vel, centers[s0:s1 + 1], depth_k[s0:s1 + 1],
                    dt_eff, int(s1 - s0), include_gravity, lost)
        out_pos[j] = pos[0]
        out_vel[j] = vel[0]

    times = state.time + sample_steps * dt_eff
    c_s = centers[sample_steps]
    d_s = depth_k[sample_steps]
    depth_loc = np.array([
        local_trap_depth(cfg, out_pos[j], c_s[j], depth_K=d_s[j])
        for j in range(m_samp)])
    pot = np.array([
        potential_energy(cfg, out_pos[j], c_s[j], include_gravity, d_s[j])
        for j in range(m_samp)])
    kinetic = 0.5 * cfg.constants.atom_mass * np.sum(out_vel**2, axis=1)
    return Trajectory(times, out_pos, out_vel, depth_loc, kinetic + pot,
                      bool(lost[0]), dt_eff)


def total_energy(ens: Ensemble, cfg: TrapConfig, trap_center=(0.0, 0.0, 0.0),
                 include_gravity: bool = False) -> np.ndarray:
    """Per-atom total energy [J] in the trap frame (bound atoms have E < 0)."""
    pot = potential_energy(cfg, ens.positions, trap_center, include_gravity)
    kin = 0.5 * cfg.constants.atom_mass * np.sum(ens.velocities**2, axis=1)
    return pot + kin


def ensemble_temperature(ens: Ensemble, cfg: TrapConfig,
                         trap_center=(0.0, 0.0, 0.0)) -> float:
    """Harmonic-equipartition temperature estimate <E - E_min>/(3 kB) [K].

    E is the total (kinetic plus potential above the trap bottom) energy in
    a static trap at trap_center.  All atoms must be bound.
    """
    energy = total_energy(ens, cfg, trap_center)
    if np.any(energy >= 0.0):
        raise ValueError("ensemble contains unbound atoms")
    cx, cy, _ = np.asarray(trap_center, dtype=float).reshape(3)
    depth_eff = cfg.depth_K * max(1.0 - cfg.beta * (cx**2 + cy**2), 0.0)
    above = energy + cfg.constants.kb * depth_eff
    return float(np.mean(above) / (3.0 * cfg.constants.kb))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Dump a trajectory as CSV with header t,x,y,z,vx,vy,vz,E (SI units)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "z", "vx", "vy", "vz", "E"])
        for j in range(len(traj.times)):
            row = [traj.times[j], *traj.positions[j], *traj.velocities[j],
                   traj.energies[j]]
            writer.writerow([f"{v:.9g}" for v in row])
