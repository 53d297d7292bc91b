"""Time-parameterized paths for the tweezer center.

A MotionProfile is an ordered list of segments (dwell, minimum-jerk line,
trapezoidal line, elliptical arc).  Segments must join continuously; the
minimum-jerk segments additionally start and end with zero velocity and
acceleration, which is what keeps paper-scale transport adiabatic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dwell",
    "MinimumJerkLine",
    "TrapezoidLine",
    "EllipseArc",
    "MotionProfile",
    "static_profile",
    "motion_profile_round_trip",
    "MAX_SCAN_DISTANCE",
]

# Field-of-view limit of the scanning optics: the maximum platform angle
# corresponds to an 18 um total displacement of the tweezer.
MAX_SCAN_DISTANCE = 18e-6  # m

_JOIN_TOL = 1e-12  # m, segment endpoint continuity tolerance


def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("profile points must be finite")
    return a


@dataclass(frozen=True)
class Dwell:
    duration: float
    point: np.ndarray

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("segment duration must be > 0")
        object.__setattr__(self, "point", _vec3(self.point))

    @property
    def start(self):
        return self.point

    @property
    def end(self):
        return self.point

    def position(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.broadcast_to(self.point, tau.shape + (3,)).copy()

    def peak_acceleration(self) -> float:
        return 0.0


@dataclass(frozen=True)
class MinimumJerkLine:
    """Straight move with s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5.

    Zero velocity and acceleration at both endpoints (C2); peak
    acceleration 10 d / (sqrt(3) T^2).
    """

    duration: float
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("segment duration must be > 0")
        object.__setattr__(self, "start", _vec3(self.start))
        object.__setattr__(self, "end", _vec3(self.end))

    def position(self, tau):
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
        s = tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)
        return self.start + s[..., None] * (self.end - self.start)

    def peak_acceleration(self) -> float:
        d = float(np.linalg.norm(self.end - self.start))
        return 10.0 * d / (np.sqrt(3.0) * self.duration**2)


@dataclass(frozen=True)
class TrapezoidLine:
    """Straight move with a trapezoidal velocity profile.

    Constant acceleration for accel_fraction * duration, coast, then the
    mirror-image deceleration.
    """

    duration: float
    start: np.ndarray
    end: np.ndarray
    accel_fraction: float = 0.25

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("segment duration must be > 0")
        if not 0.0 < self.accel_fraction <= 0.5:
            raise ValueError("accel_fraction must lie in (0, 0.5]")
        object.__setattr__(self, "start", _vec3(self.start))
        object.__setattr__(self, "end", _vec3(self.end))

    def position(self, tau):
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
        f = self.accel_fraction
        # unit-distance profile: a = 1/(f(1-f)) in normalized time
        a = 1.0 / (f * (1.0 - f))
        vp = a * f
        s = np.where(
            tau < f,
            0.5 * a * tau**2,
            np.where(
                tau < 1.0 - f,
                0.5 * a * f**2 + vp * (tau - f),
                1.0 - 0.5 * a * (1.0 - tau) ** 2,
            ),
        )
        return self.start + s[..., None] * (self.end - self.start)

    def peak_acceleration(self) -> float:
        d = float(np.linalg.norm(self.end - self.start))
        f = self.accel_fraction
        return d / (f * (1.0 - f) * self.duration**2)


@dataclass(frozen=True)
class EllipseArc:
    """Elliptical arc r(tau) = center + cos(phi) u + sin(phi) v.

    phi runs from phase0 through `turns` full revolutions over the segment.
    """

    duration: float
    center: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    turns: float = 1.0
    phase0: float = 0.0

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("segment duration must be > 0")
        if not self.turns > 0.0:
            raise ValueError("turns must be > 0")
        object.__setattr__(self, "center", _vec3(self.center))
        object.__setattr__(self, "u_axis", _vec3(self.u_axis))
        object.__setattr__(self, "v_axis", _vec3(self.v_axis))

    def _phase(self, tau):
        return self.phase0 + 2.0 * np.pi * self.turns * np.asarray(tau, dtype=float)

    @property
    def start(self):
        p = self._phase(0.0)
        return self.center + np.cos(p) * self.u_axis + np.sin(p) * self.v_axis

    @property
    def end(self):
        p = self._phase(1.0)
        return self.center + np.cos(p) * self.u_axis + np.sin(p) * self.v_axis

    def position(self, tau):
        p = self._phase(np.clip(tau, 0.0, 1.0))
        return (self.center
                + np.cos(p)[..., None] * self.u_axis
                + np.sin(p)[..., None] * self.v_axis)

    def peak_acceleration(self) -> float:
        omega = 2.0 * np.pi * self.turns / self.duration
        return omega**2 * max(float(np.linalg.norm(self.u_axis)),
                              float(np.linalg.norm(self.v_axis)))


@dataclass(frozen=True)
class MotionProfile:
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        for a, b in zip(segs[:-1], segs[1:]):
            gap = float(np.linalg.norm(np.asarray(b.start) - np.asarray(a.end)))
            if gap > _JOIN_TOL:
                raise ValueError(f"discontinuous profile: segment join gap {gap:g} m")
        bounds = np.cumsum([0.0] + [s.duration for s in segs])
        object.__setattr__(self, "_bounds", bounds)

    @property
    def duration(self) -> float:
        return float(self._bounds[-1])

    def position(self, t):
        """Trap-center position(s) [m] at time(s) t; clamped outside [0, duration]."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty(t.shape + (3,))
        if not self.segments:
            out[...] = 0.0
            return out[0] if scalar else out
        idx = np.clip(np.searchsorted(self._bounds, t, side="right") - 1,
                      0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            m = idx == k
            if not np.any(m):
                continue
            tau = (t[m] - self._bounds[k]) / seg.duration
            out[m] = seg.position(tau)
        return out[0] if scalar else out

    def peak_acceleration(self) -> float:
        if not self.segments:
            return 0.0
        return max(s.peak_acceleration() for s in self.segments)

    @property
    def end_position(self):
        if not self.segments:
            return np.zeros(3)
        return np.asarray(self.segments[-1].end, dtype=float)


def static_profile(point=(0.0, 0.0, 0.0), duration: float = np.inf) -> MotionProfile:
    """A trap that sits at `point` forever (position() clamps past `duration`)."""
    dur = 1.0 if not np.isfinite(duration) else duration
    return MotionProfile((Dwell(dur, _vec3(point)),))


def motion_profile_round_trip(distance: float, axis, half_duration: float,
                              dwell_at_target: float = 0.0,
                              dwell_at_origin: float = 0.0,
                              start=(0.0, 0.0, 0.0)) -> MotionProfile:
    """Out-and-back scan: minimum-jerk out, dwell, minimum-jerk back, dwell.

    The outbound leg plus the target dwell fill the first half_duration, the
    return leg plus the origin dwell fill the second, so the temporal
    midpoint sits at the target-dwell / return boundary.

    Args:
        distance: one-way displacement [m], at most the 18 um field of view
        axis: direction of the move (any nonzero 3-vector, normalized here)
        half_duration: duration of each half of the round trip [s]
        dwell_at_target: hold at the target inside the first half [s]
        dwell_at_origin: hold at the origin closing the second half [s]
    """
    if distance < 0.0:
        raise ValueError("distance must be >= 0")
    if distance > MAX_SCAN_DISTANCE * (1.0 + 1e-9):
        raise ValueError(f"distance {distance*1e6:.2f} um exceeds the "
                         f"{MAX_SCAN_DISTANCE*1e6:.0f} um field of view")
    if not half_duration > 0.0:
        raise ValueError("half_duration must be > 0")
    if dwell_at_target < 0.0 or dwell_at_origin < 0.0:
        raise ValueError("dwell times must be >= 0")
    if dwell_at_target >= half_duration or dwell_at_origin >= half_duration:
        raise ValueError("dwell time must be shorter than half_duration")

    start = _vec3(start)
    axis = _vec3(axis)
    norm = float(np.linalg.norm(axis))
    if norm == 0.0:
        raise ValueError("axis must be a nonzero vector")
    target = start + (distance / norm) * axis

    if distance == 0.0:
        return MotionProfile((Dwell(2.0 * half_duration, start),))

    segs = [MinimumJerkLine(half_duration - dwell_at_target, start, target)]
    if dwell_at_target > 0.0:
        segs.append(Dwell(dwell_at_target, target))
    segs.append(MinimumJerkLine(half_duration - dwell_at_origin, target, start))
    if dwell_at_origin > 0.0:
        segs.append(Dwell(dwell_at_origin, start))
    return MotionProfile(tuple(segs))
