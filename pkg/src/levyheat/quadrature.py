"""Quadrature helpers: singular time integrals and heavy-tail space grids."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss01", "split_time_quadrature", "power_interval_quadrature",
           "tail_resolving_grid", "trapezoid_weights"]


@lru_cache(maxsize=32)
def gauss01(n):
    """Gauss-Legendre nodes/weights mapped to (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def power_interval_quadrature(length, exp_at_zero, n):
    """Nodes/weights for int_0^L F(s) ds with F ~ s^(exp-1) at 0.

    Uses the substitution s = L u^(1/p), p = min(exp, 1), which turns the
    endpoint singularity into a bounded integrand.
    """
    p = min(max(exp_at_zero, 1e-3), 1.0)
    u, w = gauss01(n)
    nodes = length * u ** (1.0 / p)
    weights = w * (length / p) * u ** (1.0 / p - 1.0)
    return nodes, weights


def split_time_quadrature(t, exp_at_zero, exp_at_t, n_half):
    """Nodes/weights for int_0^t F(s) ds with power singularities at both ends.

    Splits at t/2 and maps each half by the power substitution matching its
    endpoint exponent.
    """
    s_lo, w_lo = power_interval_quadrature(t / 2.0, exp_at_zero, n_half)
    s_hi, w_hi = power_interval_quadrature(t / 2.0, exp_at_t, n_half)
    return np.concatenate([s_lo, t - s_hi]), np.concatenate([w_lo, w_hi])


def trapezoid_weights(nodes):
    w = np.empty_like(nodes)
    w[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
    w[0] = 0.5 * (nodes[1] - nodes[0])
    w[-1] = 0.5 * (nodes[-1] - nodes[-2])
    return w


@lru_cache(maxsize=8)
def tail_resolving_grid(core_half=8.0, core_step=0.2, tail_ratio=1.08, cap=1e6):
    """Symmetric grid resolving a unit-width kernel with power-law tails.

    Uniform core on [-core_half, core_half], geometric tails out to ``cap``.
    Returns (nodes, trapezoid weights).  Used for integrals of the form
    int K((z - A)/h) f(z) dz / h after the substitution z = A + h w.
    """
    n_core = int(round(2 * core_half / core_step)) + 1
    core = np.linspace(-core_half, core_half, n_core)
    n_tail = int(np.ceil(np.log(cap / core_half) / np.log(tail_ratio)))
    tail = core_half * tail_ratio ** np.arange(1, n_tail + 1)
    nodes = np.concatenate([-tail[::-1], core, tail])
    return nodes, trapezoid_weights(nodes)
