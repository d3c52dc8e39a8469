"""Coefficient models a(x), b(x) with regularity metadata and drift flows.

A model is parsed from key-value configuration text (keys ``a``, ``b``,
``alpha``, ``gamma``, ``regime``, ``domain_lo``, ``domain_hi``; expression
values quoted).  Ellipticity and regime admissibility are checked by dense
sampling; Hoelder/Lipschitz constants are estimated from difference
quotients unless supplied.

The FlowSolver integrates dv = b(v) dt (and the reversed equation) with an
embedded Runge-Kutta-Fehlberg 4(5) scheme, vectorized over initial points,
plus the scalar flow Jacobian D_t(x) solving dD/dt = b'(chi_t(x)) D.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, parse_config_text
from .expressions import Expression

__all__ = [
    "CoefficientModel",
    "FlowSolver",
    "EllipticityError",
    "RegimeError",
    "parse_coefficients",
    "flow_forward",
    "flow_backward",
    "flow_jacobian",
]

REGIMES = ("A", "B", "C")


class EllipticityError(ValueError):
    pass


class RegimeError(ValueError):
    pass


@dataclass
class CoefficientModel:
    a_expr: Expression
    b_expr: Expression
    alpha: float
    gamma: float
    regime: str
    a_bounds: tuple
    b_bound: float
    holder_a: float
    holder_b: float | None = None
    lipschitz_b: float | None = None
    domain: tuple = (-20.0, 20.0)
    estimated: tuple = ()

    def a(self, x):
        return self.a_expr(x)

    def b(self, x):
        return self.b_expr(x)

    def sigma(self, x):
        """Noise coefficient sigma(x) = a(x)^(1/alpha)."""
        return self.a_expr(x) ** (1.0 / self.alpha)

    def b_prime(self, x):
        return self.b_expr.derivative(x)

    @property
    def is_constant(self):
        return self.a_expr.is_constant and self.b_expr.is_constant

    @property
    def has_drift(self):
        if self.b_expr.is_constant:
            return abs(float(self.b_expr(0.0))) > 0.0
        return True


def _estimate_holder(values, xs, gamma):
    """sup |f(x)-f(y)| / |x-y|^gamma over lagged pairs of a sampled lattice."""
    best = 0.0
    n = len(xs)
    lag = 1
    while lag < n:
        num = np.abs(values[lag:] - values[:-lag])
        den = np.abs(xs[lag:] - xs[:-lag]) ** gamma
        best = max(best, float(np.max(num / den)))
        lag *= 2
    return best


def regime_admissible(regime, alpha, gamma, lipschitz_b):
    if regime == "A":
        return 1.0 < alpha < 2.0
    if regime == "B":
        return alpha > 1.0 / (1.0 + gamma)
    if regime == "C":
        return lipschitz_b is not None
    raise RegimeError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def parse_coefficients(source):
    """Build a validated CoefficientModel from configuration text."""
    cfg = parse_config_text(source) if isinstance(source, str) else dict(source)
    for key in ("a", "b", "alpha"):
        if key not in cfg:
            raise ConfigError(f"missing required key {key!r}")
    a_expr = Expression(str(cfg["a"]))
    b_expr = Expression(str(cfg["b"]))
    alpha = float(cfg["alpha"])
    if not 0.0 < alpha < 2.0:
        raise ConfigError(f"alpha must lie in (0, 2), got {alpha}")
    gamma = float(cfg.get("gamma", 1.0))
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must lie in (0, 1], got {gamma}")
    lo = float(cfg.get("domain_lo", -20.0))
    hi = float(cfg.get("domain_hi", 20.0))
    if hi <= lo:
        raise ConfigError("domain_hi must exceed domain_lo")

    xs = np.linspace(lo, hi, 10001)
    a_vals = a_expr(xs)
    b_vals = b_expr(xs)
    if not (np.all(np.isfinite(a_vals)) and np.all(np.isfinite(b_vals))):
        raise ConfigError("coefficients must be finite on the working domain")
    c1, c2 = float(np.min(a_vals)), float(np.max(a_vals))
    if c1 <= 0.0:
        raise EllipticityError(
            f"a(x) is not uniformly elliptic: sampled minimum {c1:.3g} <= 0")

    estimated = []
    if "a_lo" in cfg and "a_hi" in cfg:
        a_bounds = (float(cfg["a_lo"]), float(cfg["a_hi"]))
    else:
        a_bounds = (c1, c2)
        estimated.append("a_bounds")

    inflate = 1.25
    if "holder_a" in cfg:
        holder_a = float(cfg["holder_a"])
    else:
        holder_a = inflate * _estimate_holder(a_vals, xs, gamma)
        estimated.append("holder_a")
    if "holder_b" in cfg:
        holder_b = float(cfg["holder_b"])
    else:
        holder_b = inflate * _estimate_holder(b_vals, xs, gamma)
        estimated.append("holder_b")
    if "lipschitz_b" in cfg:
        lipschitz_b = float(cfg["lipschitz_b"])
    else:
        lipschitz_b = inflate * _estimate_holder(b_vals, xs, 1.0)
        estimated.append("lipschitz_b")

    regime = str(cfg.get("regime", "")).strip().upper()
    if regime:
        if regime not in REGIMES:
            raise RegimeError(f"unknown regime {regime!r}; expected one of {REGIMES}")
        if not regime_admissible(regime, alpha, gamma, lipschitz_b):
            raise RegimeError(
                f"regime {regime} inadmissible for alpha={alpha}, gamma={gamma}")
    else:
        regime = next((r for r in ("C", "B", "A")
                       if regime_admissible(r, alpha, gamma, lipschitz_b)), "")
        if not regime:
            raise RegimeError(f"no admissible regime for alpha={alpha}, gamma={gamma}")

    return CoefficientModel(
        a_expr=a_expr, b_expr=b_expr, alpha=alpha, gamma=gamma, regime=regime,
        a_bounds=a_bounds, b_bound=float(np.max(np.abs(b_vals))),
        holder_a=holder_a, holder_b=holder_b, lipschitz_b=lipschitz_b,
        domain=(lo, hi), estimated=tuple(estimated),
    )


# ---------------------------------------------------------------------------
# drift flows
# ---------------------------------------------------------------------------

# Cash-Karp embedded RK4(5) tableau
_CK_COEF = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [3 / 10, -9 / 10, 6 / 5],
    [-11 / 54, 5 / 2, -70 / 27, 35 / 27],
    [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096],
]
_CK_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_CK_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296,
                   277 / 14336, 1 / 4])


class FlowBudgetError(RuntimeError):
    pass


def _rk45(func, horizon, y0, tol, h0, max_steps=100000):
    """Vectorized Cash-Karp RK4(5) from time 0 to `horizon` (>= 0)."""
    y = np.array(y0, dtype=float, copy=True)
    if horizon == 0.0:
        return y
    t = 0.0
    h = min(h0, horizon)
    steps = 0
    while t < horizon:
        h = min(h, horizon - t)
        k = [func(y)]
        for i in range(1, 6):
            yi = y + h * sum(c * k[j] for j, c in enumerate(_CK_COEF[i]))
            k.append(func(yi))
        inc5 = h * sum(b * ki for b, ki in zip(_CK_B5, k))
        inc4 = h * sum(b * ki for b, ki in zip(_CK_B4, k))
        err = float(np.max(np.abs(inc5 - inc4)))
        if err <= tol or h <= 1e-13 * max(1.0, horizon):
            y = y + inc5
            t += h
        # standard step-size controller, order-5 local error
        scale = 0.9 * (tol / err) ** 0.2 if err > 0 else 2.0
        h *= min(4.0, max(0.2, scale))
        steps += 1
        if steps > max_steps:
            raise FlowBudgetError(
                f"flow integration exceeded {max_steps} steps (t={t:.3g})")
    return y


@dataclass
class FlowSolver:
    """Forward flow chi_t, inverse flow theta_t, and the flow Jacobian."""

    model: CoefficientModel
    integrator_step: float = 0.05
    tolerance: float = 1e-10

    def forward(self, t, x):
        """chi_t(x): solve dv = b(v) dt from v_0 = x up to time t >= 0."""
        x = np.asarray(x, dtype=float)
        if t == 0.0 or not self.model.has_drift:
            return x.copy() if x.ndim else float(x)
        out = _rk45(self.model.b, float(t), np.atleast_1d(x),
                    self.tolerance, self.integrator_step)
        return out if x.ndim else float(out[0])

    def backward(self, t, y):
        """theta_t(y): solve dv = -b(v) dt from v_0 = y up to time t >= 0."""
        y = np.asarray(y, dtype=float)
        if t == 0.0 or not self.model.has_drift:
            return y.copy() if y.ndim else float(y)
        out = _rk45(lambda v: -self.model.b(v), float(t), np.atleast_1d(y),
                    self.tolerance, self.integrator_step)
        return out if y.ndim else float(out[0])

    def jacobian(self, t, x, check_bound=True):
        """Scalar D_t(x) = d chi_t(x)/dx via dD/dt = b'(chi_t(x)) D, D_0 = 1."""
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x)
        n = flat.size
        if t == 0.0 or not self.model.has_drift:
            ones = np.ones_like(flat)
            return ones if x.ndim else 1.0
        state0 = np.concatenate([flat, np.ones(n)])

        def rhs(state):
            pos, jac = state[:n], state[n:]
            return np.concatenate([self.model.b(pos),
                                   self.model.b_prime(pos) * jac])

        out = _rk45(rhs, float(t), state0, self.tolerance, self.integrator_step)
        jac = out[n:]
        if check_bound and self.model.lipschitz_b is not None:
            limit = math.exp(self.model.lipschitz_b * t) * 1.05 + 1e-9
            worst = float(np.max(np.maximum(np.abs(jac), 1.0 / np.abs(jac))))
            if worst > limit:
                warnings.warn(
                    f"flow Jacobian bound violated: max(|D|, |D|^-1) = "
                    f"{worst:.4g} > e^(L t) allowance {limit:.4g}", stacklevel=2)
        return jac if x.ndim else float(jac[0])


def flow_forward(solver, t, x):
    return solver.forward(t, x)


def flow_backward(solver, t, y):
    return solver.backward(t, y)


def flow_jacobian(solver, t, x):
    return solver.jacobian(t, x)
