# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled photon-transport kernel; same contract as ``_kernel_py``."""

import numpy as np

from libc.math cimport exp, expm1, log, sqrt, acos, cos, sin, floor, pow, M_PI


cdef struct Params:
    int n_orders
    double k_e
    double albedo
    double g
    double surface_z
    double mu_T[3]
    double mu_R[3]
    double cos_beta_R
    double rA2
    double theta0_step
    int theta0_cells
    double rytov_log_d_min
    double rytov_log_d_step
    int rytov_nodes
    int rytov_null
    double ln_m2_atm
    double weight_floor
    double leg_step
    int leg_size


cdef inline double ln_m2(double d, const double[::1] table, const double[::1] leg, Params* p) noexcept nogil:
    cdef double u, t, s2, q
    cdef Py_ssize_t i
    if p.rytov_null:
        return 0.0
    if p.leg_size > 1:
        u = d / p.leg_step
        if u < p.leg_size - 1:
            i = <Py_ssize_t>u
            return leg[i] + (u - i) * (leg[i + 1] - leg[i])
    if d < 1e-300:
        d = 1e-300
    u = (log(d) - p.rytov_log_d_min) / p.rytov_log_d_step
    t = floor(u)
    if t < 0:
        i = 0
    elif t > p.rytov_nodes - 2:
        i = p.rytov_nodes - 2
    else:
        i = <Py_ssize_t>t
    s2 = exp(table[i] + (u - i) * (table[i + 1] - table[i]))
    if s2 <= 1.0:
        return s2
    q = pow(s2, 1.2)
    return 0.49 * s2 / pow(1.0 + 1.11 * q, 7.0 / 6.0) + 0.51 * s2 / pow(1.0 + 0.69 * q, 5.0 / 6.0)


cdef inline void rotate(double* mu, double ct, double st, double phi) noexcept nogil:
    cdef double cp = cos(phi), sp = sin(phi)
    cdef double mx = mu[0], my = mu[1], mz = mu[2]
    cdef double den = sqrt(max(1.0 - mz * mz, 0.0))
    cdef double ox, oy, oz, nrm
    if den < 1e-10:
        ox = st * cp
        oy = st * sp
        oz = ct if mz >= 0 else -ct
    else:
        ox = ct * mx + st * (mx * mz * cp - my * sp) / den
        oy = ct * my + st * (my * mz * cp + mx * sp) / den
        oz = ct * mz - st * cp * den
    nrm = sqrt(ox * ox + oy * oy + oz * oz)
    mu[0] = ox / nrm
    mu[1] = oy / nrm
    mu[2] = oz / nrm


cdef void score(double* x, double* inc, double w, double lnm, int k,
                const double[:, ::1] rec, const double[::1] t0, const double[::1] ryt, const double[::1] leg, Params* p,
                double[:, ::1] power, double[::1] total, long long[:, ::1] count, double[:, ::1] m2,
                long long* degenerate) noexcept nogil:
    cdef Py_ssize_t r, idx
    cdef Py_ssize_t R = rec.shape[0]
    cdef double vx, vy, vz, d, cos_fov, cos_sc, dens, h, omega, pd, scale, theta, c
    cdef double g = p.g
    for r in range(R):
        vx = x[0] - rec[r, 0]
        vy = x[1] - rec[r, 1]
        vz = x[2] - rec[r, 2]
        d = sqrt(vx * vx + vy * vy + vz * vz)
        if d == 0.0:
            degenerate[0] += 1
            continue
        cos_fov = (vx * p.mu_R[0] + vy * p.mu_R[1] + vz * p.mu_R[2]) / d
        if not (cos_fov >= p.cos_beta_R):
            continue
        cos_sc = -(vx * inc[0] + vy * inc[1] + vz * inc[2]) / d
        if k == 0:
            c = cos_sc
            if c > 1.0:
                c = 1.0
            elif c < -1.0:
                c = -1.0
            theta = acos(c)
            idx = <Py_ssize_t>floor(theta / p.theta0_step)
            dens = t0[idx] if idx < p.theta0_cells else 0.0
            scale = 1.0
        else:
            h = 1.0 + g * g - 2.0 * g * cos_sc
            dens = (1.0 - g * g) / (4.0 * M_PI) / (h * sqrt(h))
            scale = p.albedo
        h = sqrt(d * d + p.rA2)
        omega = 2.0 * M_PI * p.rA2 / (h * (h + d))
        pd = dens * omega
        if pd > 1.0:
            pd = 1.0
        pd = scale * exp(-p.k_e * d) * (cos_fov if cos_fov > 0.0 else 0.0) * pd
        power[r, k] += w * pd
        total[r] += w * pd
        count[r, k] += 1
        m2[r, k] += expm1(lnm + ln_m2(d, ryt, leg, p))


cdef void run_photons(const double[:, ::1] r0, const double[:, ::1] mu0, const double[::1] w0,
                      const double[:, ::1] U, const double[:, ::1] rec, const double[::1] t0,
                      const double[::1] ryt, const double[::1] leg, Params* p,
                      double[:, ::1] power, double[::1] sq, double[::1] total,
                      long long[:, ::1] count, double[:, ::1] m2, long long[::1] alive,
                      long long* escaped, long long* degenerate) noexcept nogil:
    cdef Py_ssize_t i, r, k
    cdef Py_ssize_t n = w0.shape[0]
    cdef Py_ssize_t R = rec.shape[0]
    cdef double x[3]
    cdef double mu[3]
    cdef double w, s, step, ct, st, frac, g = p.g
    for i in range(n):
        w = w0[i]
        if not (w > 0.0):
            continue
        for r in range(R):
            total[r] = 0.0
        x[0] = r0[i, 0]
        x[1] = r0[i, 1]
        x[2] = r0[i, 2]
        alive[0] += 1
        score(x, p.mu_T, w, p.ln_m2_atm, 0, rec, t0, ryt, leg, p, power, total, count, m2, degenerate)
        mu[0] = mu0[i, 0]
        mu[1] = mu0[i, 1]
        mu[2] = mu0[i, 2]
        s = p.ln_m2_atm
        for k in range(1, p.n_orders + 1):
            step = -log(1.0 - U[i, 3 * (k - 1)]) / p.k_e
            x[0] = x[0] + mu[0] * step
            x[1] = x[1] + mu[1] * step
            x[2] = x[2] + mu[2] * step
            if x[2] > p.surface_z:
                escaped[0] += 1
                break
            if not (w * p.albedo >= p.weight_floor):
                break
            s = s + ln_m2(step, ryt, leg, p)
            alive[k] += 1
            score(x, mu, w, s, <int>k, rec, t0, ryt, leg, p, power, total, count, m2, degenerate)
            if g == 0.0:
                ct = 2.0 * U[i, 3 * (k - 1) + 1] - 1.0
            else:
                frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * U[i, 3 * (k - 1) + 1])
                ct = (1.0 + g * g - frac * frac) / (2.0 * g)
                if ct > 1.0:
                    ct = 1.0
                elif ct < -1.0:
                    ct = -1.0
            st = sqrt(max(1.0 - ct * ct, 0.0))
            rotate(mu, ct, st, 2.0 * M_PI * U[i, 3 * (k - 1) + 2])
            w = w * p.albedo
        for r in range(R):
            sq[r] += total[r] * total[r]


def transport_batch(r0, mu0, w0, U, receivers, params):
    """Score a photon batch; returns ``(power, sq, count, m2, alive, escaped, degenerate)``."""
    cdef Params p
    cdef int K = int(params.n_orders)
    cdef Py_ssize_t R = receivers.shape[0]
    p.n_orders = K
    p.k_e = params.k_e
    p.albedo = params.albedo
    p.g = params.g
    p.surface_z = params.surface_z
    for j in range(3):
        p.mu_T[j] = params.mu_T[j]
        p.mu_R[j] = params.mu_R[j]
    p.cos_beta_R = params.cos_beta_R
    p.rA2 = params.aperture_radius ** 2
    p.theta0_step = params.theta0_step
    p.theta0_cells = len(params.theta0_density)
    p.rytov_log_d_min = params.rytov_log_d_min
    p.rytov_log_d_step = params.rytov_log_d_step
    p.rytov_nodes = len(params.rytov_log_sigma)
    p.rytov_null = 1 if params.rytov_null else 0
    p.ln_m2_atm = params.ln_m2_atm
    p.weight_floor = params.weight_floor
    p.leg_step = params.leg_step
    if params.leg_step and params.leg_table is not None:
        leg_arr = np.ascontiguousarray(params.leg_table, dtype=np.float64)
    else:
        leg_arr = np.zeros(1)
    p.leg_size = len(leg_arr)
    cdef const double[::1] legv = leg_arr

    cdef const double[:, ::1] r0v = r0
    cdef const double[:, ::1] mu0v = mu0
    cdef const double[::1] w0v = w0
    cdef const double[:, ::1] Uv = U
    cdef const double[:, ::1] recv = receivers
    t0_arr = np.ascontiguousarray(params.theta0_density, dtype=np.float64)
    ryt_arr = np.ascontiguousarray(params.rytov_log_sigma, dtype=np.float64)
    cdef const double[::1] t0v = t0_arr
    cdef const double[::1] rytv = ryt_arr

    power = np.zeros((R, K + 1))
    sq = np.zeros(R)
    total = np.zeros(R)
    count = np.zeros((R, K + 1), dtype=np.int64)
    m2 = np.zeros((R, K + 1))
    alive = np.zeros(K + 1, dtype=np.int64)
    cdef double[:, ::1] pv = power
    cdef double[::1] sqv = sq
    cdef double[::1] totv = total
    cdef long long[:, ::1] cv = count
    cdef double[:, ::1] m2v = m2
    cdef long long[::1] av = alive
    cdef long long escaped = 0, degenerate = 0
    with nogil:
        run_photons(r0v, mu0v, w0v, Uv, recv, t0v, rytv, legv, &p, pv, sqv, totv, cv, m2v, av,
                    &escaped, &degenerate)
    return power, sq, count, m2, alive, int(escaped), int(degenerate)


def rotate_chain(mu0, cos_theta, phi):
    """Apply the rotations one after another to ``mu0``; returns every direction."""
    cdef const double[::1] ct = cos_theta
    cdef const double[::1] ph = phi
    cdef Py_ssize_t n = ct.shape[0], i
    out = np.empty((n, 3))
    cdef double[:, ::1] o = out
    cdef double mu[3]
    cdef double st
    mu[0] = mu0[0]
    mu[1] = mu0[1]
    mu[2] = mu0[2]
    with nogil:
        for i in range(n):
            st = sqrt(max(1.0 - ct[i] * ct[i], 0.0))
            rotate(mu, ct[i], st, ph[i])
            o[i, 0] = mu[0]
            o[i, 1] = mu[1]
            o[i, 2] = mu[2]
    return out
