"""Qubit phase evolution under the differential light shift.

The two hyperfine qubit states see slightly different trap potentials, so
the qubit frequency is shifted by eta U / hbar at local light-shift depth
U.  Sequences of instantaneous pi/2 and pi pulses (Ramsey, spin echo,
transfer Ramsey) are simulated by accumulating that phase along each
atom's classical trajectory; an echo pi pulse negates the phase collected
before it.  Fringes are synthesized against the analysis-pulse phase and
fitted to A cos(theta - phi) + B.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .dynamics import Ensemble, evolve_ensemble
from .physics import RB87, PhysConstants, TrapConfig, trap_frequencies
from .profiles import (Dwell, EllipseArc, MinimumJerkLine, MotionProfile,
                       TrapezoidLine, motion_profile_round_trip)

__all__ = [
    "QubitParams",
    "PulseEvent",
    "PulseSequence",
    "TransferSchedule",
    "FringeRecord",
    "FringeFit",
    "light_shift_phase_rate",
    "accumulate_phase",
    "run_sequence",
    "echo_phase_prediction",
    "transfer_phase_prediction",
    "fit_fringes",
    "measure_t2star",
    "ramsey_sequence",
    "echo_sequence",
    "transfer_ramsey_sequence",
    "pinned_ensemble",
    "default_analysis_phases",
    "write_fringe_csv",
    "read_fringe_csv",
    "sequence_to_json",
    "sequence_from_json",
]


@dataclass(frozen=True)
class QubitParams:
    """Differential-light-shift qubit parameters."""

    eta: float = 7e-4                 # differential light-shift factor
    t2_irreversible: float = 34e-3    # s, echo-resistant dephasing time
    omega_hf: float = RB87.omega_hf   # rad/s
    constants: PhysConstants = RB87

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not self.t2_irreversible > 0.0:
            raise ValueError("t2_irreversible must be > 0")


def light_shift_phase_rate(qp: QubitParams, local_depth_K) :
    """Qubit frequency offset eta kB U / hbar [rad/s] at local depth U [K]."""
    local_depth_K = np.asarray(local_depth_K, dtype=float)
    if np.any(local_depth_K < 0.0):
        raise ValueError("local depth must be >= 0")
    rate = qp.eta * qp.constants.kb * local_depth_K / qp.constants.hbar
    return float(rate) if rate.ndim == 0 else rate


def accumulate_phase(trajectory, cfg: TrapConfig, qp: QubitParams,
                     t0: float, t1: float) -> float:
    """Integral of the light-shift phase rate over [t0, t1] of a trajectory.

    Trapezoidal quadrature over the stored samples, with linear
    interpolation of the local depth at the interval ends.
    """
    times = trajectory.times
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t0 < times[0] - 1e-15 or t1 > times[-1] + 1e-15:
        raise ValueError("phase interval outside the trajectory span")
    rate = light_shift_phase_rate(qp, trajectory.local_depth_K)
    grid = np.unique(np.clip(np.concatenate([[t0], times[(times > t0) & (times < t1)], [t1]]),
                             times[0], times[-1]))
    vals = np.interp(grid, times, rate)
    return float(np.trapezoid(vals, grid))


@dataclass(frozen=True)
class PulseEvent:
    time: float
    kind: str          # "pi_half" | "pi" | "analysis_pi_half"
    phase: float = 0.0


@dataclass(frozen=True)
class TransferSchedule:
    """Double transfer to a second superimposed tweezer and back.

    Linear depth ramp to depth2 over ramp_duration, hold for hold_duration,
    linear ramp back.  start_time is relative to the sequence start.
    """

    depth2_K: float
    ramp_duration: float = 20e-6
    hold_duration: float = 160e-6
    start_time: float = 0.0

    def __post_init__(self):
        if not self.depth2_K > 0.0:
            raise ValueError("depth2_K must be > 0")
        if not (self.ramp_duration > 0.0 and self.hold_duration > 0.0):
            raise ValueError("transfer durations must be > 0")
        if self.start_time < 0.0:
            raise ValueError("start_time must be >= 0")

    @property
    def span(self) -> float:
        return 2.0 * self.ramp_duration + self.hold_duration

    def depth_schedule(self, depth1_K: float):
        """Vectorized depth(t) [K] for sequence-relative times t."""
        t0, ramp, hold = self.start_time, self.ramp_duration, self.hold_duration
        d1, d2 = depth1_K, self.depth2_K

        def depth(t):
            t = np.asarray(t, dtype=float)
            out = np.full(t.shape, d1)
            up = (t >= t0) & (t < t0 + ramp)
            out[up] = d1 + (d2 - d1) * (t[up] - t0) / ramp
            mid = (t >= t0 + ramp) & (t < t0 + ramp + hold)
            out[mid] = d2
            down = (t >= t0 + ramp + hold) & (t < t0 + 2 * ramp + hold)
            out[down] = d2 + (d1 - d2) * (t[down] - (t0 + ramp + hold)) / ramp
            return out

        return depth


@dataclass(frozen=True)
class PulseSequence:
    """Pulse timing plus the motion and transfer spanning the sequence.

    Pulses are treated as instantaneous; the recorded pi/2 and pi pulse
    durations are bookkeeping metadata only.
    """

    events: tuple
    profile: MotionProfile | None = None
    transfer: TransferSchedule | None = None
    pi_half_duration: float = 2e-6
    pi_duration: float = 4e-6

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        if len(events) < 2:
            raise ValueError("sequence needs at least an initial pi/2 and an analysis pulse")
        times = [e.time for e in events]
        if any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise ValueError("pulse times must be strictly increasing")
        if events[0].kind != "pi_half":
            raise ValueError("sequence must start with a pi/2 pulse")
        if events[-1].kind != "analysis_pi_half":
            raise ValueError("sequence must end with the analysis pi/2 pulse")
        inner = [e.kind for e in events[1:-1]]
        if any(k != "pi" for k in inner) or len(inner) > 1:
            raise ValueError("only a single optional echo pi pulse is allowed inside")
        if self.transfer is not None:
            if self.transfer.start_time + self.transfer.span > self.duration + 1e-12:
                raise ValueError("transfer schedule extends past the sequence")

    @property
    def t_start(self) -> float:
        return self.events[0].time

    @property
    def t_end(self) -> float:
        return self.events[-1].time

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def pi_time(self) -> float | None:
        for e in self.events:
            if e.kind == "pi":
                return e.time
        return None


def ramsey_sequence(delay: float, profile: MotionProfile | None = None,
                    transfer: TransferSchedule | None = None) -> PulseSequence:
    if not delay > 0.0:
        raise ValueError("delay must be > 0")
    return PulseSequence(
        (PulseEvent(0.0, "pi_half"), PulseEvent(delay, "analysis_pi_half")),
        profile=profile, transfer=transfer)


def echo_sequence(duration: float, profile: MotionProfile | None = None,
                  t_pi: float | None = None) -> PulseSequence:
    if not duration > 0.0:
        raise ValueError("duration must be > 0")
    t_pi = 0.5 * duration if t_pi is None else t_pi
    if not 0.0 < t_pi < duration:
        raise ValueError("t_pi must fall inside the sequence")
    return PulseSequence(
        (PulseEvent(0.0, "pi_half"), PulseEvent(t_pi, "pi"),
         PulseEvent(duration, "analysis_pi_half")),
        profile=profile)


def transfer_ramsey_sequence(transfer: TransferSchedule,
                             guard: float = 10e-6) -> PulseSequence:
    """Ramsey sequence enclosing a double transfer, with guard time on each side."""
    if guard < 0.0:
        raise ValueError("guard must be >= 0")
    ts = TransferSchedule(transfer.depth2_K, transfer.ramp_duration,
                          transfer.hold_duration, start_time=guard)
    total = ts.span + 2.0 * guard
    return ramsey_sequence(total, transfer=ts)


def pinned_ensemble(n: int = 1) -> Ensemble:
    """Zero-temperature carrier: atom(s) at rest at the trap center."""
    return Ensemble(np.zeros((n, 3)), np.zeros((n, 3)), 0.0,
                    source_temperature=0.0)


@dataclass
class FringeFit:
    amplitude: float
    phase: float
    offset: float
    amplitude_sigma: float
    phase_sigma: float
    phase_defined: bool


@dataclass
class FringeRecord:
    """Sampled interferometer fringe and its cosine fit."""

    analysis_phases: np.ndarray
    populations: np.ndarray
    fitted_amplitude: float
    fitted_phase: float
    amplitude_sigma: float
    phase_sigma: float
    offset: float
    phase_defined: bool
    t_total: float
    n_atoms: int
    shots_per_phase: int | None

    def __post_init__(self):
        if np.any((self.populations < 0.0) | (self.populations > 1.0)):
            raise ValueError("populations must lie in [0, 1]")
        if not 0.0 <= self.fitted_amplitude <= 1.0:
            raise ValueError("fitted amplitude must lie in [0, 1]")


def default_analysis_phases(n: int = 13) -> np.ndarray:
    """Analysis phases spanning a full turn, endpoints included."""
    return np.linspace(0.0, 2.0 * np.pi, n)


def fit_fringes(phases, populations) -> FringeFit:
    """Least-squares fit of populations(theta) to A cos(theta - phi) + B.

    Linear in (A cos phi, A sin phi, B); sigmas follow from the residual
    covariance.  Requires >= 4 phases spanning a full 2 pi.
    """
    theta = np.asarray(phases, dtype=float)
    pop = np.asarray(populations, dtype=float)
    if theta.ndim != 1 or theta.shape != pop.shape:
        raise ValueError("phases and populations must be equal-length 1-D")
    if len(theta) < 4:
        raise ValueError("need at least 4 analysis phases")
    if np.ptp(theta) < 2.0 * np.pi - 1e-9:
        raise ValueError("analysis phases must span at least 2 pi")

    design = np.column_stack([np.cos(theta), np.sin(theta), np.ones_like(theta)])
    coef, *_ = np.linalg.lstsq(design, pop, rcond=None)
    a, b, offset = coef
    amp = float(np.hypot(a, b))
    residuals = pop - design @ coef
    dof = max(len(theta) - 3, 1)
    s2 = float(residuals @ residuals) / dof
    cov = s2 * np.linalg.inv(design.T @ design)

    if amp < 1e-14:
        return FringeFit(0.0, 0.0, float(offset), float(np.sqrt(cov[0, 0])),
                         np.inf, False)
    phase = float(np.arctan2(b, a))
    ca, sa = a / amp, b / amp
    amp_sigma = float(np.sqrt(max(ca**2 * cov[0, 0] + sa**2 * cov[1, 1]
                                  + 2 * ca * sa * cov[0, 1], 0.0)))
    phase_sigma = float(np.sqrt(max(sa**2 * cov[0, 0] + ca**2 * cov[1, 1]
                                    - 2 * sa * ca * cov[0, 1], 0.0)) / amp)
    defined = amp > amp_sigma
    return FringeFit(amp, phase, float(offset), amp_sigma, phase_sigma, defined)


def _sequence_dt(cfg: TrapConfig, seq: PulseSequence, dt: float | None) -> float:
    depth_max = cfg.depth_K
    if seq.transfer is not None:
        depth_max = max(depth_max, seq.transfer.depth2_K)
    omega_r, _ = trap_frequencies(cfg)
    f_r_max = omega_r * np.sqrt(depth_max / cfg.depth_K) / (2.0 * np.pi)
    return min(dt, 1.0 / (40.0 * f_r_max)) if dt else 1.0 / (40.0 * f_r_max)


def run_sequence(seq: PulseSequence, ensemble: Ensemble, cfg: TrapConfig,
                 qp: QubitParams, analysis_phases=None,
                 shots_per_phase: int | None = None, seed: int = 0,
                 dt: float | None = None,
                 include_gravity: bool = True) -> FringeRecord:
    """Monte Carlo interferometer fringe for a pulse sequence.

    Each atom is integrated through the sequence's motion and transfer; its
    light-shift phase is accumulated at the local (position-dependent) trap
    depth, negated by the echo pi pulse if present.  The final population at
    analysis phase theta is (1 + C cos(phi_net - theta))/2 with the
    irreversible contrast C = exp(-t_total / t2).  Ensemble-averaged
    populations, optionally resampled with binomial shot noise, are fitted
    to a cosine.
    """
    duration = seq.duration
    dt_target = _sequence_dt(cfg, seq, dt)
    # an even step count puts the default mid-sequence echo pulse exactly
    # on the step grid
    n_steps = 2 * max(int(np.ceil(duration / (2.0 * dt_target))), 1)
    dt_eff = duration / n_steps

    phase_times = []
    if seq.pi_time is not None:
        phase_times.append(seq.pi_time - seq.t_start)
    phase_times.append(duration)

    depth_schedule = (seq.transfer.depth_schedule(cfg.depth_K)
                      if seq.transfer is not None else None)
    _, lost, integrals = evolve_ensemble(
        ensemble, cfg, profile=seq.profile, duration=duration, dt=dt_eff,
        phase_times=phase_times, depth_schedule=depth_schedule,
        include_gravity=include_gravity)

    k = qp.eta * qp.constants.kb / qp.constants.hbar
    if seq.pi_time is not None:
        phi = k * (integrals[:, 1] - 2.0 * integrals[:, 0])
    else:
        phi = k * integrals[:, 0]

    contrast = np.exp(-duration / qp.t2_irreversible)
    theta = (default_analysis_phases() if analysis_phases is None
             else np.asarray(analysis_phases, dtype=float))
    populations = 0.5 * (1.0 + contrast * np.mean(np.cos(phi[:, None] - theta[None, :]),
                                                  axis=0))
    if shots_per_phase is not None:
        if shots_per_phase < 1:
            raise ValueError("shots_per_phase must be >= 1")
        sampled = np.empty_like(populations)
        for j, p in enumerate(populations):
            gen = _rng.substream(seed, _rng.FRINGE, j)
            sampled[j] = gen.binomial(shots_per_phase, min(max(p, 0.0), 1.0)) / shots_per_phase
        populations = sampled

    fit = fit_fringes(theta, populations)
    return FringeRecord(
        theta, populations, min(fit.amplitude, 1.0), fit.phase,
        fit.amplitude_sigma, fit.phase_sigma, fit.offset, fit.phase_defined,
        duration, ensemble.n, shots_per_phase)


def _bottom_follower_depth(profile: MotionProfile, cfg: TrapConfig, times):
    c = profile.position(times)
    return cfg.depth_K * np.maximum(1.0 - cfg.beta * (c[:, 0]**2 + c[:, 1]**2), 0.0)


def echo_phase_prediction(profile: MotionProfile, cfg: TrapConfig,
                          qp: QubitParams, t_pi: float | None = None,
                          n_quad: int = 100001) -> float:
    """Echo fringe phase for an atom glued to the trap bottom.

    phi_half2 - phi_half1 with the pi pulse at t_pi (profile midpoint by
    default); the only depth variation is the off-axis falloff along the
    path, so a symmetric path with beta = 0 predicts exactly zero.
    """
    total = profile.duration
    t_pi = 0.5 * total if t_pi is None else t_pi
    if not 0.0 < t_pi < total:
        raise ValueError("t_pi must fall inside the profile")
    k = qp.eta * qp.constants.kb / qp.constants.hbar
    halves = []
    for lo, hi in ((0.0, t_pi), (t_pi, total)):
        t = np.linspace(lo, hi, n_quad)
        halves.append(np.trapezoid(k * _bottom_follower_depth(profile, cfg, t), t))
    return float(halves[1] - halves[0])


def transfer_phase_prediction(ts: TransferSchedule, cfg: TrapConfig,
                              qp: QubitParams) -> float:
    """Ramsey phase of a double transfer relative to the no-transfer reference.

    eta kB (depth2 - depth1) (hold + ramp) / hbar: the hold counts in full,
    the two linear ramps contribute their time-averaged depth (half weight
    each).
    """
    delta_u = ts.depth2_K - cfg.depth_K
    k = qp.eta * qp.constants.kb / qp.constants.hbar
    return float(k * delta_u * (ts.hold_duration + ts.ramp_duration))


def measure_t2star(cfg: TrapConfig, qp: QubitParams, temperature: float,
                   n_atoms: int = 1500, seed: int = 0, delays=None,
                   dt: float | None = None):
    """Emergent Ramsey dephasing time from thermal motion.

    Integrates a thermal ensemble in the static trap, reads the fringe
    amplitude C(tau) |<exp(i phi(tau))>| at each delay and returns the
    linearly interpolated 1/e point (plus the scan itself).
    """
    from .dynamics import sample_ensemble

    delays = (np.linspace(25e-6, 1.2e-3, 25) if delays is None
              else np.asarray(delays, dtype=float))
    ens = sample_ensemble(temperature, cfg, n_atoms, seed)
    dt_eff = dt if dt else 1.0 / (40.0 * trap_frequencies(cfg)[0] / (2 * np.pi))
    _, _, integrals = evolve_ensemble(ens, cfg, profile=None,
                                      duration=float(delays[-1]), dt=dt_eff,
                                      phase_times=delays)
    k = qp.eta * qp.constants.kb / qp.constants.hbar
    phi = k * integrals
    amp = np.abs(np.mean(np.exp(1j * phi), axis=0)) * np.exp(-delays / qp.t2_irreversible)
    target = 1.0 / np.e
    below = np.flatnonzero(amp < target)
    if len(below) == 0:
        return float("inf"), delays, amp
    j = below[0]
    if j == 0:
        return float(delays[0]), delays, amp
    t_lo, t_hi = delays[j - 1], delays[j]
    a_lo, a_hi = amp[j - 1], amp[j]
    t2s = t_lo + (a_lo - target) / (a_lo - a_hi) * (t_hi - t_lo)
    return float(t2s), delays, amp


def write_fringe_csv(record: FringeRecord, path) -> None:
    """CSV columns: analysis_phase_rad, population."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["analysis_phase_rad", "population"])
        for t, p in zip(record.analysis_phases, record.populations):
            writer.writerow([f"{t:.9g}", f"{p:.9g}"])


def read_fringe_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    theta = np.array([float(r["analysis_phase_rad"]) for r in rows])
    pop = np.array([float(r["population"]) for r in rows])
    return theta, pop


_SEGMENT_CODECS = {
    "dwell": (Dwell, lambda s: {"duration_s": s.duration, "point_m": s.point.tolist()},
              lambda d: Dwell(d["duration_s"], d["point_m"])),
    "min_jerk": (MinimumJerkLine,
                 lambda s: {"duration_s": s.duration, "start_m": s.start.tolist(),
                            "end_m": s.end.tolist()},
                 lambda d: MinimumJerkLine(d["duration_s"], d["start_m"], d["end_m"])),
    "trapezoid": (TrapezoidLine,
                  lambda s: {"duration_s": s.duration, "start_m": s.start.tolist(),
                             "end_m": s.end.tolist(), "accel_fraction": s.accel_fraction},
                  lambda d: TrapezoidLine(d["duration_s"], d["start_m"], d["end_m"],
                                          d.get("accel_fraction", 0.25))),
    "ellipse": (EllipseArc,
                lambda s: {"duration_s": s.duration, "center_m": s.center.tolist(),
                           "u_axis_m": s.u_axis.tolist(), "v_axis_m": s.v_axis.tolist(),
                           "turns": s.turns, "phase0_rad": s.phase0},
                lambda d: EllipseArc(d["duration_s"], d["center_m"], d["u_axis_m"],
                                     d["v_axis_m"], d.get("turns", 1.0),
                                     d.get("phase0_rad", 0.0))),
}


def sequence_to_json(seq: PulseSequence) -> str:
    """Serialize a PulseSequence (pulses, motion, transfer) as JSON."""
    motion = None
    if seq.profile is not None:
        segs = []
        for s in seq.profile.segments:
            for kind, (cls, enc, _) in _SEGMENT_CODECS.items():
                if type(s) is cls:
                    segs.append({"kind": kind, **enc(s)})
                    break
            else:
                raise ValueError(f"unknown segment type {type(s).__name__}")
        motion = {"segments": segs}
    transfer = None
    if seq.transfer is not None:
        transfer = {"depth2_K": seq.transfer.depth2_K,
                    "ramp_s": seq.transfer.ramp_duration,
                    "hold_s": seq.transfer.hold_duration,
                    "start_s": seq.transfer.start_time}
    doc = {
        "events": [{"time_s": e.time, "kind": e.kind, "phase_rad": e.phase}
                   for e in seq.events],
        "motion": motion,
        "transfer": transfer,
        "pi_half_duration_s": seq.pi_half_duration,
        "pi_duration_s": seq.pi_duration,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def sequence_from_json(text: str) -> PulseSequence:
    doc = json.loads(text)
    events = tuple(PulseEvent(e["time_s"], e["kind"], e.get("phase_rad", 0.0))
                   for e in doc["events"])
    profile = None
    if doc.get("motion"):
        segs = []
        for d in doc["motion"]["segments"]:
            kind = d["kind"]
            if kind not in _SEGMENT_CODECS:
                raise ValueError(f"unknown motion segment kind {kind!r}")
            segs.append(_SEGMENT_CODECS[kind][2](d))
        profile = MotionProfile(tuple(segs))
    transfer = None
    if doc.get("transfer"):
        t = doc["transfer"]
        transfer = TransferSchedule(t["depth2_K"], t["ramp_s"], t["hold_s"],
                                    t.get("start_s", 0.0))
    return PulseSequence(events, profile=profile, transfer=transfer,
                         pi_half_duration=doc.get("pi_half_duration_s", 2e-6),
                         pi_duration=doc.get("pi_duration_s", 4e-6))
