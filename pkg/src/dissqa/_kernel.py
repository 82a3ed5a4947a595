"""Compiled RK4 integration of the rotated-frame Bloch equations.

The right-hand side is affine in r with coefficients that depend on time only,
so the coefficients evaluated at the two RK4 midpoint stages are shared and the
end-of-step coefficients are carried into the next step (same time instant,
same values).
"""
from __future__ import annotations

import math

from numba import njit

COTH_SERIES_CUT = 1e-4
TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def coefficients(h, h_dot, cosk, delta, alpha, omega_c, beta_b, coh, diss):
    """Return (axx, axz, bx, ayy, ayz, azx, azy, azz, bz) of dr/dt = A r + b."""
    xi = 2.0 * (h - cosk)
    e2 = xi * xi + delta * delta
    eps = math.sqrt(e2)
    axx = 0.0
    axz = 0.0
    bx = 0.0
    ayy = 0.0
    ayz = 0.0
    azx = 0.0
    azy = 0.0
    azz = 0.0
    bz = 0.0
    if coh:
        phid = 2.0 * h_dot * delta / e2
        axz += phid
        azx -= phid
        ayz -= 2.0 * eps
        azy += 2.0 * eps
    if diss and alpha > 0.0:
        cphi = delta / eps
        sphi = xi / eps
        s2 = 2.0 * sphi * cphi
        x = beta_b * eps
        th = math.tanh(x)
        damp = math.exp(-2.0 * eps / omega_c)
        if x < COTH_SERIES_CUT:
            cj = 4.0 * alpha * (1.0 / beta_b + x * eps / 3.0) * damp
        else:
            cj = 4.0 * alpha * eps * damp / th
        g_r = TWO_PI * cj * cphi * cphi
        g_phi = 8.0 * math.pi * alpha / beta_b * sphi * sphi
        g_d = g_phi + 0.5 * g_r
        g_zx = -math.pi * cj * s2
        g_xz = 4.0 * math.pi * alpha / beta_b * s2
        rbar = -th
        axx -= g_r
        axz += g_xz
        bx += g_r * rbar
        ayy -= g_d + 0.5 * g_r
        azx -= g_zx
        azz -= g_d - 0.5 * g_r
        bz += g_zx * rbar
    return axx, axz, bx, ayy, ayz, azx, azy, azz, bz


@njit(cache=True, inline="always")
def _apply(c, rx, ry, rz):
    return (c[0] * rx + c[1] * rz + c[2],
            c[3] * ry + c[4] * rz,
            c[5] * rx + c[6] * ry + c[7] * rz + c[8])


@njit(cache=True)
def integrate_modes(ks, h_start, h_end, t_total, n_steps, alpha, omega_c, beta_b,
                    coh, diss, r0, sample_steps, norm_limit, finals, samples, status):
    """Integrate each mode in ``ks`` from r0 over [0, t_total] with n_steps RK4 steps.

    The field moves linearly from h_start to h_end. ``samples[m, j]`` receives the
    state after step ``sample_steps[j]`` (0 = initial). On blowup ``status`` gets
    (mode index, step, squared norm) and integration stops; otherwise status[0] = -1.
    """
    dt = t_total / n_steps
    h_dot = (h_end - h_start) / t_total
    dh = h_end - h_start
    n_samp = sample_steps.shape[0]
    lim2 = norm_limit * norm_limit
    status[0] = -1.0
    for m in range(ks.shape[0]):
        cosk = math.cos(ks[m])
        delta = 2.0 * math.sin(ks[m])
        rx = r0[0]
        ry = r0[1]
        rz = r0[2]
        js = 0
        while js < n_samp and sample_steps[js] == 0:
            samples[m, js, 0] = rx
            samples[m, js, 1] = ry
            samples[m, js, 2] = rz
            js += 1
        c0 = coefficients(h_start, h_dot, cosk, delta, alpha, omega_c, beta_b, coh, diss)
        for i in range(n_steps):
            s_mid = (i + 0.5) / n_steps
            s_end = (i + 1.0) / n_steps
            cm = coefficients(h_start + dh * s_mid, h_dot, cosk, delta, alpha, omega_c, beta_b, coh, diss)
            c1 = coefficients(h_start + dh * s_end, h_dot, cosk, delta, alpha, omega_c, beta_b, coh, diss)
            k1x, k1y, k1z = _apply(c0, rx, ry, rz)
            k2x, k2y, k2z = _apply(cm, rx + 0.5 * dt * k1x, ry + 0.5 * dt * k1y, rz + 0.5 * dt * k1z)
            k3x, k3y, k3z = _apply(cm, rx + 0.5 * dt * k2x, ry + 0.5 * dt * k2y, rz + 0.5 * dt * k2z)
            k4x, k4y, k4z = _apply(c1, rx + dt * k3x, ry + dt * k3y, rz + dt * k3z)
            rx += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            ry += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            rz += dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            c0 = c1
            n2 = rx * rx + ry * ry + rz * rz
            if not n2 <= lim2:
                status[0] = m
                status[1] = i + 1
                status[2] = n2
                return
            while js < n_samp and sample_steps[js] == i + 1:
                samples[m, js, 0] = rx
                samples[m, js, 1] = ry
                samples[m, js, 2] = rz
                js += 1
        finals[m, 0] = rx
        finals[m, 1] = ry
        finals[m, 2] = rz
