"""Velocity-Verlet integration kernels.

The hot loops are JIT-compiled with numba and parallelized over atoms.
Per-atom arithmetic is strictly sequential and writes only to that atom's
own output slots, so results are bit-identical for any thread count.

The trap-center path c(t) and depth schedule D(t) are precomputed on the
step grid by the caller; kernels only index arrays.
"""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

__all__ = ["set_workers", "evolve_ensemble_kernel", "evolve_ensemble_reference"]


def set_workers(n: int | None = None) -> int:
    """Cap the number of integration threads (TWEEZER_SIM_WORKERS honors this)."""
    if n is None:
        env = os.environ.get("TWEEZER_SIM_WORKERS")
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


@njit(cache=True, parallel=True)
def evolve_ensemble_kernel(pos, vel, cx, cy, cz, depth_k, dt, kb, inv_m,
                           inv_w0sq, inv_zrsq, beta, gx, n_steps,
                           loss_rho2, lost, cp_steps, phase_int):
    """Advance all atoms by n_steps of velocity Verlet.

    pos, vel: (n, 3), updated in place.
    cx, cy, cz, depth_k: trap center [m] and depth [K] at each step edge,
        length n_steps + 1.
    lost: (n,) uint8, set to 1 when an atom's excursion from the trap
        center exceeds loss_rho2 (radially, in the transverse plane).
    cp_steps: int64 step indices (ascending) at which the running integral
        of the local trap depth [K s] is recorded into phase_int (n, ncp).
    """
    half_dt = 0.5 * dt
    n = pos.shape[0]
    ncp = cp_steps.shape[0]
    for i in prange(n):
        x = pos[i, 0]; y = pos[i, 1]; z = pos[i, 2]
        vx = vel[i, 0]; vy = vel[i, 1]; vz = vel[i, 2]
        is_lost = lost[i]

        dxc = x - cx[0]; dyc = y - cy[0]; dzc = z - cz[0]
        dep = depth_k[0] * (1.0 - beta * (cx[0] * cx[0] + cy[0] * cy[0]))
        if dep < 0.0:
            dep = 0.0
        iq = 1.0 / (1.0 + dzc * dzc * inv_zrsq)
        rho2 = dxc * dxc + dyc * dyc
        e = rho2 * inv_w0sq * iq
        uloc = dep * iq * np.exp(-2.0 * e)            # local depth, K
        uj = -kb * uloc                               # potential, J
        f = -4.0 * uj * inv_w0sq * iq * inv_m
        ax = f * dxc + gx
        ay = f * dyc
        az = -uj * inv_m * (2.0 * dzc * inv_zrsq) * iq * (1.0 - 2.0 * e * iq)

        acc = 0.0          # running integral of local depth, K s
        icp = 0
        while icp < ncp and cp_steps[icp] == 0:
            phase_int[i, icp] = 0.0
            icp += 1

        for s in range(n_steps):
            x += (vx + ax * half_dt) * dt
            y += (vy + ay * half_dt) * dt
            z += (vz + az * half_dt) * dt
            dxc = x - cx[s + 1]; dyc = y - cy[s + 1]; dzc = z - cz[s + 1]
            dep = depth_k[s + 1] * (1.0 - beta * (cx[s + 1] * cx[s + 1]
                                                  + cy[s + 1] * cy[s + 1]))
            if dep < 0.0:
                dep = 0.0
            iq = 1.0 / (1.0 + dzc * dzc * inv_zrsq)
            rho2 = dxc * dxc + dyc * dyc
            e = rho2 * inv_w0sq * iq
            new_uloc = dep * iq * np.exp(-2.0 * e)
            uj = -kb * new_uloc
            f = -4.0 * uj * inv_w0sq * iq * inv_m
            nax = f * dxc + gx
            nay = f * dyc
            naz = -uj * inv_m * (2.0 * dzc * inv_zrsq) * iq * (1.0 - 2.0 * e * iq)
            vx += (ax + nax) * half_dt
            vy += (ay + nay) * half_dt
            vz += (az + naz) * half_dt
            ax = nax; ay = nay; az = naz

            acc += half_dt * (uloc + new_uloc)
            uloc = new_uloc
            if rho2 > loss_rho2:
                is_lost = 1
            while icp < ncp and cp_steps[icp] == s + 1:
                phase_int[i, icp] = acc
                icp += 1

        pos[i, 0] = x; pos[i, 1] = y; pos[i, 2] = z
        vel[i, 0] = vx; vel[i, 1] = vy; vel[i, 2] = vz
        lost[i] = is_lost


def evolve_ensemble_reference(pos, vel, cx, cy, cz, depth_k, dt, kb, inv_m,
                              inv_w0sq, inv_zrsq, beta, gx, n_steps,
                              loss_rho2, lost, cp_steps, phase_int):
    """Plain-numpy twin of evolve_ensemble_kernel, used as a cross-check oracle."""

    def accel_and_depth(p, s):
        dxc = p[:, 0] - cx[s]; dyc = p[:, 1] - cy[s]; dzc = p[:, 2] - cz[s]
        dep = max(depth_k[s] * (1.0 - beta * (cx[s]**2 + cy[s]**2)), 0.0)
        iq = 1.0 / (1.0 + dzc**2 * inv_zrsq)
        rho2 = dxc**2 + dyc**2
        e = rho2 * inv_w0sq * iq
        uloc = dep * iq * np.exp(-2.0 * e)
        uj = -kb * uloc
        f = -4.0 * uj * inv_w0sq * iq * inv_m
        a = np.stack([f * dxc + gx, f * dyc,
                      -uj * inv_m * (2.0 * dzc * inv_zrsq) * iq * (1.0 - 2.0 * e * iq)],
                     axis=1)
        return a, uloc, rho2

    a, uloc, _ = accel_and_depth(pos, 0)
    acc = np.zeros(pos.shape[0])
    icp = 0
    ncp = cp_steps.shape[0]
    while icp < ncp and cp_steps[icp] == 0:
        phase_int[:, icp] = 0.0
        icp += 1
    for s in range(n_steps):
        pos += (vel + 0.5 * dt * a) * dt
        na, new_uloc, rho2 = accel_and_depth(pos, s + 1)
        vel += 0.5 * dt * (a + na)
        a = na
        acc += 0.5 * dt * (uloc + new_uloc)
        uloc = new_uloc
        lost[rho2 > loss_rho2] = 1
        while icp < ncp and cp_steps[icp] == s + 1:
            phase_int[:, icp] = acc
            icp += 1
