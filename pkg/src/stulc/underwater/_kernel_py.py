"""numpy implementation of the photon-transport kernel.

Vectorised over the photons of a batch; receivers are processed in blocks
to bound memory.  Mirrors ``_kernel.pyx`` operation for operation.
"""
from __future__ import annotations

import math

import numpy as np

from .photon import rotate_cs

RECEIVER_BLOCK = 64


def _ln_m2(d, p):
    """ln M2 of legs of length ``d``; dense table first, memo beyond it."""
    if p.rytov_null:
        return np.zeros_like(d)
    if not p.leg_step:
        return _ln_m2_memo(d, p)
    t = p.leg_table
    u = d / p.leg_step
    i = np.minimum(np.floor(u).astype(np.int64), len(t) - 2)
    dense = t[i] + (u - i) * (t[i + 1] - t[i])
    far = u >= len(t) - 1
    if far.any():
        dense[far] = _ln_m2_memo(d[far], p)
    return dense


def _ln_m2_memo(d, p):
    """ln M2 from the log-log Rytov memo."""
    if p.rytov_null:
        return np.zeros_like(d)
    table = p.rytov_log_sigma
    u = (np.log(np.maximum(d, 1e-300)) - p.rytov_log_d_min) / p.rytov_log_d_step
    i = np.clip(np.floor(u).astype(np.int64), 0, len(table) - 2)
    s2 = np.exp(table[i] + (u - i) * (table[i + 1] - table[i]))
    q = s2**1.2
    sat = 0.49 * s2 / (1.0 + 1.11 * q) ** (7.0 / 6.0) + 0.51 * s2 / (1.0 + 0.69 * q) ** (5.0 / 6.0)
    return np.where(s2 <= 1.0, s2, sat)


def _propagate(r0, mu0, w0, U, p):
    """Scattering points, incoming directions, weights and ln-M2 prefixes per order."""
    n = w0.shape[0]
    K = p.n_orders
    pos = np.empty((K + 1, n, 3))
    inc = np.empty((K + 1, n, 3))
    wt = np.zeros((K + 1, n))
    lnm = np.empty((K + 1, n))
    pos[0] = r0
    inc[0] = p.mu_T
    alive = w0 > 0.0
    wt[0] = np.where(alive, w0, 0.0)
    lnm[0] = p.ln_m2_atm
    mu = mu0.copy()
    x = r0.copy()
    s = np.full(n, p.ln_m2_atm)
    w = wt[0].copy()
    escaped = 0
    g = p.g
    for k in range(1, K + 1):
        u_step = U[:, 3 * (k - 1)]
        u_hg = U[:, 3 * (k - 1) + 1]
        u_phi = U[:, 3 * (k - 1) + 2]
        step = -np.log(1.0 - u_step) / p.k_e
        x = x + mu * step[:, None]
        up = alive & (x[:, 2] > p.surface_z)
        escaped += int(np.count_nonzero(up))
        alive = alive & ~up
        # the albedo of this event is applied inside p_d; earlier ones ride on w
        alive = alive & (w * p.albedo >= p.weight_floor)
        s = s + _ln_m2(step, p)
        pos[k] = x
        inc[k] = mu
        wt[k] = np.where(alive, w, 0.0)
        lnm[k] = s
        if g == 0.0:
            ct = 2.0 * u_hg - 1.0
        else:
            frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u_hg)
            ct = np.clip((1.0 + g * g - frac * frac) / (2.0 * g), -1.0, 1.0)
        st = np.sqrt(np.maximum(1.0 - ct * ct, 0.0))
        phi = 2.0 * math.pi * u_phi
        mu = rotate_cs(mu, ct, st, np.cos(phi), np.sin(phi))
        w = w * p.albedo
    return pos, inc, wt, lnm, escaped


def transport_batch(r0, mu0, w0, U, receivers, p):
    K = p.n_orders
    R = receivers.shape[0]
    pos, inc, wt, lnm, escaped = _propagate(r0, mu0, w0, U, p)
    live = wt > 0.0
    power = np.zeros((R, K + 1))
    sq = np.zeros(R)
    count = np.zeros((R, K + 1), dtype=np.int64)
    m2 = np.zeros((R, K + 1))
    degenerate = 0
    rA2 = p.aperture_radius**2
    g = p.g
    hg_norm = (1.0 - g * g) / (4.0 * math.pi)
    n_cells = len(p.theta0_density)
    for lo in range(0, R, RECEIVER_BLOCK):
        rc = receivers[lo:lo + RECEIVER_BLOCK]
        total = np.zeros((pos.shape[1], rc.shape[0]))
        for k in range(K + 1):
            v = pos[k][:, None, :] - rc[None, :, :]
            d = np.sqrt(np.sum(v * v, axis=-1))
            zero = d == 0.0
            degenerate += int(np.count_nonzero(zero & live[k][:, None]))
            dsafe = np.where(zero, 1.0, d)
            cos_fov = (v @ p.mu_R) / dsafe
            in_fov = (cos_fov >= p.cos_beta_R) & ~zero & live[k][:, None]
            cos_sc = -np.einsum("prc,pc->pr", v, inc[k]) / dsafe
            if k == 0:
                theta = np.arccos(np.clip(cos_sc, -1.0, 1.0))
                idx = np.floor(theta / p.theta0_step).astype(np.int64)
                dens = np.where(idx < n_cells, p.theta0_density[np.minimum(idx, n_cells - 1)], 0.0)
                scale = 1.0
            else:
                dens = hg_norm / (1.0 + g * g - 2.0 * g * cos_sc) ** 1.5
                scale = p.albedo
            h = np.sqrt(d * d + rA2)
            omega = 2.0 * math.pi * rA2 / (h * (h + d))
            pd = scale * np.exp(-p.k_e * d) * np.maximum(cos_fov, 0.0) * np.minimum(1.0, dens * omega)
            contrib = np.where(in_fov, wt[k][:, None] * pd, 0.0)
            power[lo:lo + rc.shape[0], k] = contrib.sum(axis=0)
            total += contrib
            count[lo:lo + rc.shape[0], k] = np.count_nonzero(in_fov, axis=0)
            bracket = np.expm1(lnm[k][:, None] + _ln_m2(dsafe, p))
            m2[lo:lo + rc.shape[0], k] = np.where(in_fov, bracket, 0.0).sum(axis=0)
        sq[lo:lo + rc.shape[0]] = np.sum(total * total, axis=0)
    alive = np.count_nonzero(live, axis=1).astype(np.int64)
    return power, sq, count, m2, alive, escaped, degenerate


def rotate_chain(mu0, cos_theta, phi):
    mu = np.asarray(mu0, dtype=float).reshape(1, 3)
    ct = np.asarray(cos_theta, dtype=float)
    st = np.sqrt(np.maximum(1.0 - ct * ct, 0.0))
    cp, sp = np.cos(phi), np.sin(phi)
    out = np.empty((len(ct), 3))
    for i in range(len(ct)):
        j = slice(i, i + 1)
        mu = rotate_cs(mu, ct[j], st[j], cp[j], sp[j])
        out[i] = mu[0]
    return out
