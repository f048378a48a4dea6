"""Special functions, quadrature and reproducible random streams.

Everything here is pure and reentrant.  Random numbers flow exclusively
through :class:`RngStream`, a counter-based (Philox) generator keyed by a
``(seed, stream_id)`` pair so that any unit of parallel work can rebuild its
own sequence without coordinating with other workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special


class NumericError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""


class IntegrationError(NumericError):
    """Adaptive quadrature ran out of budget.

    The best estimate and its error bound are kept on the exception so that
    callers can decide whether the partial answer is still usable.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


# ---------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    """Identifier of an independent random stream.

    Parameters
    ----------
    seed : int
        Run seed (64-bit unsigned).
    stream_id : int
        Index of the unit of work (photon batch, fading draw, sea surface).
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64) or not (0 <= self.stream_id < 2**64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    relative_tolerance: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSpec()


def adaptive_integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    points: Optional[Sequence[float]] = None,
) -> float:
    """Integrate ``f`` over ``[lo, hi]`` with adaptive Gauss-Kronrod.

    A semi-infinite upper bound is mapped onto ``[0, 1)`` with
    ``x = lo + t / (1 - t)``.  The rule never samples the endpoints, so
    integrable endpoint singularities are fine.
    """
    if hi < lo:
        return -adaptive_integrate(f, hi, lo, spec, points)
    if math.isinf(lo):
        raise ValueError("lower bound must be finite")

    if math.isinf(hi):
        def g(t):
            s = 1.0 - t
            return f(lo + t / s) / (s * s)

        a, b = 0.0, 1.0
        pts = None
        if points:
            pts = [(p - lo) / (1.0 + p - lo) for p in points if p > lo]
    else:
        g, a, b = f, lo, hi
        pts = [p for p in points if lo < p < hi] if points else None

    res, err, _info, *message = integrate.quad(
        g, a, b,
        epsabs=0.0,
        epsrel=spec.relative_tolerance,
        limit=spec.max_subdivisions,
        points=pts or None,
        full_output=1,
    )
    # QUADPACK only returns a message when it flagged a problem
    if message and not err <= spec.relative_tolerance * abs(res):
        raise IntegrationError(f"adaptive quadrature did not converge: {message[0]}", res, err)
    return float(res)


def composite_gauss_legendre(edges: np.ndarray, order: int = 16):
    """Nodes and weights of a panel-wise Gauss-Legendre rule."""
    edges = np.asarray(edges, dtype=float)
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# special functions

_SERIES_MAX_TERMS = 4000
_ASYMPTOTIC_SWITCH = 50.0


def _kummer_series(a: float, c: float, z: np.ndarray) -> np.ndarray:
    total = np.ones_like(z)
    term = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for n in range(_SERIES_MAX_TERMS):
        term = np.where(active, term * ((a + n) / (c + n)) * z / (n + 1), 0.0)
        total = total + term
        # the term ratio tends to z/n, so once n > |z| the tail is geometric
        small = np.abs(term) <= 1e-17 * np.abs(total)
        active &= ~(small & (n + 1 > np.abs(z)))
        active &= term != 0.0
        if not active.any():
            return total
    raise NumericError(f"1F1({a}; {c}; z) series did not converge")


def _asymptotic_sum(p: float, q: float, x: np.ndarray) -> np.ndarray:
    """sum_s (p)_s (q)_s / s! * x**-s, truncated at its smallest term."""
    total = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for s in range(200):
        nxt = term * (p + s) * (q + s) / ((s + 1) * x)
        growing = np.abs(nxt) > np.abs(term)
        active &= ~growing
        nxt = np.where(active, nxt, 0.0)
        total = total + nxt
        term = nxt
        active &= np.abs(nxt) > 1e-17 * np.abs(total)
        if not active.any():
            break
    return total


def hyp1f1(a: float, c: float, z):
    """Confluent hypergeometric function 1F1(a; c; z) for real arguments.

    Kummer series for ``|z| <= 50`` (via Kummer's transformation when
    ``z < 0`` so that no alternating cancellation occurs) and the leading
    asymptotic expansion beyond.  Accepts scalars or arrays in ``z``.
    """
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a non-positive integer")
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise ValueError("z must be finite")
    zf = np.atleast_1d(z_arr).astype(float)
    out = np.empty_like(zf)

    near = np.abs(zf) <= _ASYMPTOTIC_SWITCH
    pos = near & (zf >= 0)
    neg = near & (zf < 0)
    if pos.any():
        out[pos] = _kummer_series(a, c, zf[pos])
    if neg.any():
        out[neg] = np.exp(zf[neg]) * _kummer_series(c - a, c, -zf[neg])

    far_pos = ~near & (zf > 0)
    far_neg = ~near & (zf < 0)
    if far_pos.any():
        x = zf[far_pos]
        if special.rgamma(a) == 0.0:
            out[far_pos] = _kummer_series(a, c, x)
        else:
            out[far_pos] = (
                special.gamma(c) * special.rgamma(a)
                * np.exp(x + (a - c) * np.log(x))
                * _asymptotic_sum(c - a, 1.0 - a, x)
            )
    if far_neg.any():
        x = -zf[far_neg]
        if special.rgamma(c - a) == 0.0:
            out[far_neg] = np.exp(-x) * _kummer_series(c - a, c, x)
        else:
            out[far_neg] = (
                special.gamma(c) * special.rgamma(c - a)
                * x ** (-a)
                * _asymptotic_sum(a, a - c + 1.0, x)
            )

    if np.ndim(z_arr) == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def bessel_k(order: float, x):
    """Modified Bessel function of the second kind, K_order(x), for x > 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ValueError("bessel_k requires x > 0")
    val = special.kv(order, x_arr)
    return float(val) if np.ndim(val) == 0 else val


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return special.ndtr(-np.asarray(x, dtype=float)) if np.ndim(x) else float(special.ndtr(-x))
