"""Parametrix construction of the transition density p_t(x,y).

The density is assembled as p = p0 + p0 (*) Psi where p0 is the
frozen-coefficient kernel of the active regime, Psi = sum_k Phi^(*k) is the
series of time-space convolution powers of the defect kernel Phi, and (*)
denotes the time-space convolution.  Truncation of the series is certified
two ways: by the Gamma-function bound with measured constants, and by the
measured geometric decay of the computed powers.

Numerical layout.  Convolution powers live on a geometric time grid whose
floor is set by the spatial lattice resolution: below the floor the kernels
are narrower than the lattice can resolve, and the convolutions switch to
anchored sub-lattice quadrature (pointwise paths) or mass/dipole shortcuts
(field paths).  Singular time integrals use the power substitution
s = (t/2) u^(1/delta) on each half with Gauss-Legendre nodes.
"""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .coefficients import FlowSolver
from .hull import HullKernel, freeze_argument, freeze_argument_rate
from .quadrature import (gauss01, power_interval_quadrature,
                         split_time_quadrature, tail_resolving_grid,
                         trapezoid_weights)

__all__ = [
    "Lattice1D", "KernelField", "TruncationCertificate", "SeriesBudgetError",
    "ParametrixSolver", "p0_kernel", "phi_kernel", "convolve_space",
    "convolve_timespace", "psi_series", "density", "density_eps", "dt_density",
]


class SeriesBudgetError(RuntimeError):
    """Series truncation certificate unreachable within the power budget."""


class Lattice1D:
    """Uniform spatial lattice with trapezoid quadrature weights."""

    def __init__(self, lo, hi, n):
        if n < 8 or hi <= lo:
            raise ValueError("lattice needs hi > lo and at least 8 nodes")
        self.lo, self.hi, self.n = float(lo), float(hi), int(n)
        self.nodes = np.linspace(lo, hi, n)
        self.spacing = self.nodes[1] - self.nodes[0]
        self.weights = trapezoid_weights(self.nodes)

    @classmethod
    def from_box(cls, box, n=513):
        return cls(box[0], box[1], n)

    def refined(self, factor=2):
        return Lattice1D(self.lo, self.hi, factor * (self.n - 1) + 1)

    def interp_columns(self, values, y_req):
        """Linear interp of a (n, n) slice along axis 1 at arbitrary y."""
        y = np.asarray(y_req, dtype=float)
        pos = np.clip((y - self.lo) / self.spacing, 0.0, self.n - 1 - 1e-12)
        idx = pos.astype(np.int64)
        frac = pos - idx
        return values[:, idx] * (1.0 - frac) + values[:, idx + 1] * frac

    def interp_rows(self, values, x_req):
        return self.interp_columns(values.T, x_req).T


@dataclass
class KernelField:
    """Space-time kernel values on a (t, x, y) lattice."""

    times: np.ndarray
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray          # (nt, nx, ny)
    quad_weights: np.ndarray    # y-quadrature weights
    kind: str

    def __post_init__(self):
        if self.values.shape != (len(self.times), len(self.x_nodes), len(self.y_nodes)):
            raise ValueError("KernelField shape mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite values in {self.kind} field")
        if np.any(self.quad_weights <= 0):
            raise ValueError("quadrature weights must be positive")

    def slice_at(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        return self.values[i]

    def validate_density(self, floor):
        """Density fields must stay above -floor (positivity tolerance)."""
        worst = float(self.values.min())
        if worst < -floor:
            raise ValueError(
                f"density field dips to {worst:.3e}, below -{floor:.3e}")
        return worst


@dataclass
class TruncationCertificate:
    regime: str
    alpha: float
    kappa: float
    delta: float
    horizon: float
    c_phi: float                # measured sup |Phi| t^(1-delta) / H
    c_hull: float               # measured sub-convolution constant
    inflation: float
    k_max: int
    tail_bound: float           # Gamma-series remainder, inflated constants
    empirical_tail: float       # geometric extrapolation of measured terms
    term_norms: tuple           # sup |Phi^(*k)| t^(1-k delta) / H
    term_contribs: tuple        # sup |Phi^(*k)| t / p0 scale
    tolerance: float
    stopped_by: str
    notes: str = ""

    def to_dict(self):
        return {
            "regime": self.regime, "alpha": self.alpha, "kappa": self.kappa,
            "delta": self.delta, "horizon": self.horizon, "c_phi": self.c_phi,
            "c_hull": self.c_hull, "inflation": self.inflation,
            "k_max": self.k_max, "tail_bound": self.tail_bound,
            "empirical_tail": self.empirical_tail,
            "term_norms": list(self.term_norms),
            "term_contribs": list(self.term_contribs),
            "tolerance": self.tolerance, "stopped_by": self.stopped_by,
            "notes": self.notes,
        }


def gamma_series_tail(c_phi, c_hull, delta, horizon, k_max, inflation=1.5):
    """sum_{k > k_max} (C_phi Gamma(d))^k C_hull^(k-1) T^(k d) / Gamma(k d)."""
    if c_phi <= 0.0:
        return 0.0
    log_a = math.log(inflation * c_phi) + gammaln(delta) + delta * math.log(horizon)
    log_h = math.log(max(inflation * c_hull, 1e-300))
    total = 0.0
    for k in range(k_max + 1, k_max + 100001):
        log_term = k * log_a + (k - 1) * log_h - gammaln(k * delta)
        if log_term > 700.0:
            return math.inf
        term = math.exp(log_term)
        total += term
        if term < 1e-22 * max(total, 1e-280) and k > k_max + 4:
            break
    return total


# ---------------------------------------------------------------------------
# kernel formulas shared by the free operations and the solver
# ---------------------------------------------------------------------------

def _p0_formula(profile, t, a_y, arg, x):
    alpha = profile.alpha
    tau = t * a_y
    inv = tau ** (-1.0 / alpha)
    return inv * profile.eval("g", (arg - x) * inv)


def _phi_formula(profile, t, a_x, a_y, drift_coef, arg, x):
    alpha = profile.alpha
    tau = t * a_y
    inv = tau ** (-1.0 / alpha)
    u = (arg - x) * inv
    jump_k, drift_k = profile.eval_jump_drift(u)
    return ((a_x - a_y) * tau ** (-1.0 - 1.0 / alpha) * jump_k
            + drift_coef * inv * inv * drift_k)


def _dtp0_formula(profile, t, a_y, arg, arg_rate, x):
    alpha = profile.alpha
    tau = t * a_y
    inv = tau ** (-1.0 / alpha)
    u = (arg - x) * inv
    return (a_y * tau ** (-1.0 - 1.0 / alpha) * profile.eval("fraclap_g", u)
            + inv * inv * profile.eval("grad_g", u) * arg_rate)


def _drift_coefficient(regime, model, x, y, arg):
    # coefficient of tau^(-2/alpha) grad_g(u) in Phi, per regime
    if regime == "A":
        return -model.b(x)
    if regime == "B":
        return model.b(y) - model.b(x)
    # regime C: arg = theta_t(y)
    return model.b(arg) - model.b(x)


def p0_kernel(regime, model, profile, flows, t, x, y):
    """Frozen-coefficient kernel p0_t(x, y) for the given regime."""
    if t <= 0:
        raise ValueError("p0 requires t > 0")
    y = np.asarray(y, dtype=float)
    arg = freeze_argument(regime, model, flows, t, y)
    return _p0_formula(profile, t, model.a(y), arg, np.asarray(x, dtype=float))


def phi_kernel(regime, model, profile, flows, t, x, y):
    """Defect kernel Phi_t(x, y) = -(d_t - L_x) p0_t(x, y)."""
    if t <= 0:
        raise ValueError("Phi requires t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    arg = freeze_argument(regime, model, flows, t, y)
    return _phi_formula(profile, t, model.a(x), model.a(y),
                        _drift_coefficient(regime, model, x, y, arg), arg, x)


# ---------------------------------------------------------------------------
# generic spec-level convolution operations
# ---------------------------------------------------------------------------

def convolve_space(f_slice, g_slice, z_weights, tail_betas=None, z_nodes=None):
    """(f * g)(x, y) = int f(x, z) g(z, y) dz by lattice quadrature.

    With tail_betas = (beta_f, beta_g) a power-law estimate of the mass
    beyond the lattice edges is added, matching the integrand decay orders.
    """
    f_slice = np.asarray(f_slice, dtype=float)
    g_slice = np.asarray(g_slice, dtype=float)
    if f_slice.shape[1] != g_slice.shape[0] or len(z_weights) != g_slice.shape[0]:
        raise ValueError("incompatible lattices in convolve_space")
    out = f_slice @ (np.asarray(z_weights)[:, None] * g_slice)
    if tail_betas is not None:
        beta_f, beta_g = tail_betas
        span = abs(z_nodes[-1] - z_nodes[0]) if z_nodes is not None else len(z_weights)
        decay = beta_f + beta_g + 1.0
        edge = (np.abs(f_slice[:, -1:]) * np.abs(g_slice[-1:, :]) +
                np.abs(f_slice[:, :1]) * np.abs(g_slice[:1, :]))
        out = out + edge * span / (2.0 * decay)
    return out


def _envelope_exponent(kind, delta):
    if kind in ("phi", "psi"):
        return delta - 1.0
    if kind.startswith("phi_power:"):
        return int(kind.split(":")[1]) * delta - 1.0
    if kind in ("p0", "density"):
        return 0.0
    return 0.0


class PowerField:
    """Time interpolation of gridded kernels against a power-law envelope.

    Values behave like N(log t) * t^envelope with N interpolated linearly in
    log t; below the grid floor N is held constant (exact envelope decay).
    """

    def __init__(self, times, values, envelope):
        self.times = np.asarray(times, dtype=float)
        self.envelope = float(envelope)
        self.log_t = np.log(self.times)
        shape = (len(times),) + (1,) * (values.ndim - 1)
        self.norm = values * (self.times ** (-envelope)).reshape(shape)

    def at(self, s):
        s = float(s)
        ls = np.clip(math.log(s), self.log_t[0], self.log_t[-1])
        j = min(max(int(np.searchsorted(self.log_t, ls) - 1), 0), len(self.times) - 2)
        u = (ls - self.log_t[j]) / (self.log_t[j + 1] - self.log_t[j])
        return (self.norm[j] * (1.0 - u) + self.norm[j + 1] * u) * s ** self.envelope


def convolve_timespace(f_field, g_field, t, delta, z_weights, n_half=32,
                       f_kind=None, g_kind=None):
    """(f (*) g)_t = int_0^t (f_(t-s) * g_s) ds with singular endpoint maps.

    f_field, g_field are KernelFields; their endpoint exponents are derived
    from the kind tags (phi ~ s^(delta-1), phi_power:k ~ s^(k delta - 1)).
    Pure lattice quadrature: callers are responsible for lattice-resolved
    inputs (the solver's internal paths add narrow-kernel handling).
    """
    ef = _envelope_exponent(f_kind or f_field.kind, delta)
    eg = _envelope_exponent(g_kind or g_field.kind, delta)
    fp = PowerField(f_field.times, f_field.values, ef)
    gp = PowerField(g_field.times, g_field.values, eg)
    s_nodes, s_w = split_time_quadrature(t, eg + 1.0, ef + 1.0, n_half)
    acc = np.zeros((f_field.values.shape[1], g_field.values.shape[2]))
    for s, w in zip(s_nodes, s_w):
        acc += w * (fp.at(t - s) @ (z_weights[:, None] * gp.at(s)))
    return acc


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

class ParametrixSolver:
    """Assembles p0, Phi, the certified series Psi, and the density.

    Heavy state (power fields, row masses, slice caches) is built lazily on
    first use and reused across evaluations; instances are effectively
    immutable after the series build and safe for read-only sharing.
    """

    def __init__(self, model, profile, flows=None, regime=None, lattice=None,
                 horizon=1.0, kappa=None, tol=1e-6, time_nodes=14,
                 quad_half_nodes=32, field_quad_half=12, narrow_mult=2.5,
                 k_cap=40, slice_cache=48):
        self.model = model
        self.profile = profile
        self.flows = flows if flows is not None else FlowSolver(model)
        self.regime = (regime or model.regime).upper()
        self.alpha = model.alpha
        self.horizon = float(horizon)
        if lattice is None:
            half = 20.0 * self.horizon ** (1.0 / self.alpha)
            lattice = Lattice1D(-half, half, 513)
        self.lattice = lattice
        self.kappa = kappa if kappa is not None else min(model.gamma, 0.9 * self.alpha)
        self.hull = HullKernel(self.regime, self.kappa, model, self.flows)
        self.delta = self.hull.delta
        self.tol = float(tol)
        self.time_nodes = int(time_nodes)
        self.quad_half = int(quad_half_nodes)
        self.field_quad_half = int(field_quad_half)
        self.k_cap = int(k_cap)
        c1, c2 = model.a_bounds
        self.a_gm = math.sqrt(c1 * c2)
        self.narrow_width = narrow_mult * lattice.spacing
        # series floor: smallest time with lattice-resolved kernel rows
        self.floor = min(self.narrow_width ** self.alpha / self.a_gm,
                         0.25 * self.horizon)
        ratio = (self.horizon / self.floor) ** (1.0 / (self.time_nodes - 1))
        self.tgrid = self.floor * ratio ** np.arange(self.time_nodes)
        self.tgrid[-1] = self.horizon
        self._wgrid = tail_resolving_grid()
        self._theta_cache = OrderedDict()
        self._chi_cache = OrderedDict()
        self._slice_cache = OrderedDict()
        self._slice_cache_cap = int(slice_cache)
        self._rowmass_cache = OrderedDict()
        self._series = None

    # -- coefficient/flow helpers ------------------------------------------

    def _flow_interp(self, cache, t, backward):
        key = round(t, 12)
        if key not in cache:
            pad = 0.5 * (self.lattice.hi - self.lattice.lo)
            grid = np.linspace(self.lattice.lo - pad, self.lattice.hi + pad, 4097)
            vals = (self.flows.backward if backward else self.flows.forward)(t, grid)
            cache[key] = (grid, vals)
            if len(cache) > 24:
                cache.popitem(last=False)
        return cache[key]

    def _flow_eval(self, cache, t, pts, backward):
        grid, vals = self._flow_interp(cache, t, backward)
        pts = np.asarray(pts, dtype=float)
        step = grid[1] - grid[0]
        pos = (pts - grid[0]) / step
        inside = (pos >= 0) & (pos <= len(grid) - 1)
        pos_c = np.clip(pos, 0.0, len(grid) - 1 - 1e-9)
        idx = pos_c.astype(np.int64)
        frac = pos_c - idx
        out = vals[idx] * (1.0 - frac) + vals[idx + 1] * frac
        if not np.all(inside):
            # shift extension: flow displacement is bounded by t sup|b|
            low = pos < 0
            high = pos > len(grid) - 1
            out = np.where(low, pts + (vals[0] - grid[0]), out)
            out = np.where(high, pts + (vals[-1] - grid[-1]), out)
        return out

    def freeze(self, t, y):
        """Cached frozen argument A_t(y)."""
        y = np.asarray(y, dtype=float)
        if self.regime == "A" or t == 0.0 or not self.model.has_drift:
            return y
        if self.regime == "B":
            return y - t * self.model.b(y)
        return self._flow_eval(self._theta_cache, t, y, backward=True)

    def z_star(self, t, x):
        """Peak z of p0_t(x, .) rows: solves A_t(z) = x."""
        x = np.asarray(x, dtype=float)
        if self.regime == "A" or t == 0.0 or not self.model.has_drift:
            return x
        if self.regime == "B":
            z = x + t * self.model.b(x)
            return x + t * self.model.b(z)
        return self._flow_eval(self._chi_cache, t, x, backward=False)

    def p0_row_mass(self, t, x):
        """int p0_t(x, z) dz ~ 1/A_t'(z*) (narrow-kernel approximation)."""
        x = np.asarray(x, dtype=float)
        if self.regime == "A" or not self.model.has_drift:
            return np.ones_like(x)
        z = self.z_star(t, x)
        eps = 1e-5 * max(1.0, float(np.max(np.abs(z))))
        darg = (self.freeze(t, z + eps) - self.freeze(t, z - eps)) / (2 * eps)
        return 1.0 / darg

    def kernel_width(self, t):
        return (max(t, 0.0) * self.a_gm) ** (1.0 / self.alpha)

    def p0_ref(self, t):
        """Local p0 scale: the largest row maximum at time t."""
        return self.profile.g(0.0) * (t * self.model.a_bounds[0]) ** (-1.0 / self.alpha)

    # -- pointwise kernel evaluations --------------------------------------

    def p0_at(self, t, x, y):
        y = np.asarray(y, dtype=float)
        return _p0_formula(self.profile, t, self.model.a(y), self.freeze(t, y),
                           np.asarray(x, dtype=float))

    def phi_at(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        arg = self.freeze(t, y)
        return _phi_formula(self.profile, t, self.model.a(x), self.model.a(y),
                            _drift_coefficient(self.regime, self.model, x, y, arg),
                            arg, x)

    def dtp0_at(self, t, x, y):
        y = np.asarray(y, dtype=float)
        arg = self.freeze(t, y)
        if self.regime == "A":
            rate = 0.0
        elif self.regime == "B":
            rate = -self.model.b(y)
        else:
            rate = -self.model.b(arg)
        return _dtp0_formula(self.profile, t, self.model.a(y), arg, rate,
                             np.asarray(x, dtype=float))

    def _p_eval(self, kind, t, x, y):
        return self.p0_at(t, x, y) if kind == "p0" else self.dtp0_at(t, x, y)

    # -- lattice slices ------------------------------------------------------

    def p0_slice(self, t):
        lat = self.lattice.nodes
        return self.p0_at(t, lat[:, None], lat[None, :])

    def phi_slice(self, t):
        key = round(t, 12)
        cache = self._slice_cache
        if key not in cache:
            lat = self.lattice.nodes
            cache[key] = self.phi_at(t, lat[:, None], lat[None, :])
            if len(cache) > self._slice_cache_cap:
                cache.popitem(last=False)
        return cache[key]

    def hull_slice(self, t):
        lat = self.lattice.nodes
        return self.hull.eval(t, lat[:, None], lat[None, :])

    # -- Phi masses on the anchored tail grid --------------------------------

    def phi_col_local(self, s, y_arr, bounds=None):
        """(int Phi_s(z, y) dz, int (z - A) Phi_s(z, y) dz) per y.

        With ``bounds = (lo, hi)`` the z-integral is restricted to the
        cell-aligned core interval; without it the full line is taken.
        """
        w, ww = self._wgrid
        y = np.asarray(y_arr, dtype=float)
        A = self.freeze(s, y)
        h = (s * self.model.a(y)) ** (1.0 / self.alpha)
        z = A[None, :] + h[None, :] * w[:, None]
        vals = self.phi_at(s, z, y[None, :]) * ww[:, None]
        if bounds is not None:
            vals = vals * ((z >= bounds[0][None, :]) & (z <= bounds[1][None, :]))
        mass = h * vals.sum(axis=0)
        dip = h * h * np.einsum("q,qj->j", w, vals)
        return mass, dip

    def phi_row_local(self, s, x_arr, bounds=None):
        """Row-side analogue of phi_col_local: integrals over the y slot."""
        w, ww = self._wgrid
        x = np.asarray(x_arr, dtype=float)
        y_star = self.z_star(s, x)
        h = (s * self.model.a(y_star)) ** (1.0 / self.alpha)
        y = y_star[None, :] + h[None, :] * w[:, None]
        vals = self.phi_at(s, x[None, :], y) * ww[:, None]
        if bounds is not None:
            vals = vals * ((y >= bounds[0][None, :]) & (y <= bounds[1][None, :]))
        mass = h * vals.sum(axis=0)
        dip = h * h * np.einsum("q,qj->j", w, vals)
        return mass, dip

    def phi_row_mass(self, s, x_arr=None):
        """int Phi_s(x, y) dy on the lattice (cached) or at given points."""
        if x_arr is None:
            key = round(s, 12)
            cache = self._rowmass_cache
            if key not in cache:
                cache[key] = self.phi_row_local(s, self.lattice.nodes)[0]
                if len(cache) > 128:
                    cache.popitem(last=False)
            return cache[key]
        return self.phi_row_local(s, np.asarray(x_arr, dtype=float))[0]

    def p0_row_local(self, t, x_arr, window):
        """(mass, dipole) of p0_t(x, .) restricted to |z - z*| <= window."""
        w, ww = self._wgrid
        x = np.asarray(x_arr, dtype=float)
        zs = self.z_star(t, x)
        h = (t * self.model.a(zs)) ** (1.0 / self.alpha)
        z = zs[None, :] + h[None, :] * w[:, None]
        vals = self.p0_at(t, x[None, :], z) * ww[:, None]
        vals = vals * (np.abs(w[:, None] * h[None, :]) <= window)
        mass = h * vals.sum(axis=0)
        dip = h * h * np.einsum("q,qj->j", w, vals)
        return mass, dip

    def _core_mask(self, anchors, window, axis):
        """Boolean (n, n) mask of lattice nodes within ``window`` of anchors.

        axis=1: anchors indexed by column (mask[i, j] on |z_i - a_j|);
        axis=0: anchors indexed by row (mask[i, j] on |z_j - a_i|).
        """
        pos = (np.asarray(anchors) - self.lattice.lo) / self.lattice.spacing
        cells = window / self.lattice.spacing
        idx = np.arange(self.lattice.n)
        if axis == 1:
            return np.abs(idx[:, None] - pos[None, :]) <= cells
        return np.abs(idx[None, :] - pos[:, None]) <= cells

    def _local_window(self, s):
        return max(3.0 * self.lattice.spacing, 4.0 * self.kernel_width(s))

    # -- narrow-row p0 pairings (shared by field and scalar paths) -----------

    def _p0_rows_field(self, sig, Kvals):
        """int p0_sig(x_i, z) K(z, y_j) dz with heavy-tail-aware rows.

        When the p0 rows are narrower than the lattice, the resolved far
        field is integrated by masked matmul and the core analytically by
        local mass/dipole against interpolated K.
        """
        lat = self.lattice.nodes
        wlat = self.lattice.weights
        P = self.p0_at(sig, lat[:, None], lat[None, :])
        if self.kernel_width(sig) >= self.narrow_width:
            return P @ (wlat[:, None] * Kvals)
        window = self._local_window(sig)
        zs = self.z_star(sig, lat)
        P = P * ~self._core_mask(zs, window, axis=0)
        mloc, dloc = self.p0_row_local(sig, lat, window)
        dz = self.lattice.spacing
        Krow = self.lattice.interp_rows(Kvals, zs)
        dKrow = (self.lattice.interp_rows(Kvals, zs + dz)
                 - self.lattice.interp_rows(Kvals, zs - dz)) / (2 * dz)
        return (P * wlat[None, :]) @ Kvals + mloc[:, None] * Krow \
            + dloc[:, None] * dKrow

    def _p0_row_dot_point(self, sig, x, Kcols):
        """int p0_sig(x, z) K(z, .) dz for scalar x; Kcols (n, ...) in z."""
        lat = self.lattice.nodes
        wlat = self.lattice.weights
        prow = self.p0_at(sig, float(x), lat)
        if self.kernel_width(sig) >= self.narrow_width:
            return (prow * wlat) @ Kcols
        window = self._local_window(sig)
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        zs = float(self.z_star(sig, xa)[0])
        far = ((prow * wlat) * (np.abs(lat - zs) > window)) @ Kcols
        mloc, dloc = self.p0_row_local(sig, xa, window)
        dz = self.lattice.spacing
        k0 = self._interp_z(Kcols, zs)
        dk = (self._interp_z(Kcols, zs + dz) - self._interp_z(Kcols, zs - dz)) / (2 * dz)
        return far + mloc[0] * k0 + dloc[0] * dk

    def _interp_z(self, Kcols, z):
        pos = np.clip((z - self.lattice.lo) / self.lattice.spacing, 0.0,
                      self.lattice.n - 1 - 1e-9)
        i0 = int(pos)
        fr = pos - i0
        return Kcols[i0] * (1 - fr) + Kcols[i0 + 1] * fr

    # -- series build --------------------------------------------------------

    @property
    def series(self):
        if self._series is None:
            self._build_series()
        return self._series

    def psi_field(self):
        return self.series["psi_field"]

    def certificate(self):
        return self.series["certificate"]

    def _measure_c_phi(self):
        """sup |Phi_t| t^(1-delta) / H_t over the grid and smaller times."""
        t_sample = np.concatenate([
            self.floor * (1e-3) ** (1.0 - np.linspace(0, 1, 6)[:-1]), self.tgrid])
        worst = 0.0
        lat = self.lattice.nodes
        for t in t_sample:
            ratio = np.abs(self.phi_at(t, lat[:, None], lat[None, :])) \
                * t ** (1.0 - self.delta) / self.hull.eval(t, lat[:, None], lat[None, :])
            worst = max(worst, float(ratio.max()))
        return worst

    def _measure_c_hull(self):
        from .hull import _subconvolution_sup
        nodes = self.lattice.nodes[::2] if self.lattice.n > 300 else self.lattice.nodes
        worst = 0.0
        for t in (self.horizon, 0.5 * self.horizon):
            sup, _ = _subconvolution_sup(self.hull, t, (0.1, 0.3, 0.5, 0.7, 0.9), nodes)
            worst = max(worst, sup)
        return worst

    def _build_series(self):
        tg = self.tgrid
        n, M = self.lattice.n, len(tg)
        delta = self.delta
        inflation = 1.5

        phi_vals = np.stack([self.phi_slice(t) for t in tg])
        hull_vals = np.stack([self.hull_slice(t) for t in tg])
        p0ref = np.array([self.p0_ref(t) for t in tg])

        def norm_of(vals, k):
            env = tg ** (1.0 - k * delta)
            return float(max(
                np.max(np.abs(vals[i]) * env[i] / hull_vals[i]) for i in range(M)))

        def contrib_of(vals):
            return float(max(
                np.max(np.abs(vals[i])) * tg[i] / p0ref[i] for i in range(M)))

        norms = [norm_of(phi_vals, 1)]
        contribs = [contrib_of(phi_vals)]
        c_phi = self._measure_c_phi()

        if norms[0] == 0.0:
            # constant coefficients: Phi vanishes identically
            psi_vals = np.zeros_like(phi_vals)
            cert = TruncationCertificate(
                regime=self.regime, alpha=self.alpha, kappa=self.kappa,
                delta=delta, horizon=self.horizon, c_phi=0.0, c_hull=0.0,
                inflation=inflation, k_max=1, tail_bound=0.0, empirical_tail=0.0,
                term_norms=(0.0,), term_contribs=(0.0,), tolerance=self.tol,
                stopped_by="zero", notes="Phi identically zero")
            self._finish_series(phi_vals, psi_vals, cert,
                                np.zeros((M, n)), np.zeros((M, n)))
            return

        c_hull = self._measure_c_hull()
        m_phi = np.stack([self.phi_row_mass(t) for t in tg])
        psi_vals = phi_vals.copy()
        m_psi = m_phi.copy()
        cur_vals, cur_m = phi_vals, m_phi
        # Phi is interpolated from an extended grid inside the power stages;
        # sub-floor slices hold exact point values whose unresolved cores are
        # masked out at use (the core is integrated analytically instead)
        sub = self.floor * 0.5 ** np.arange(4, 0, -1)
        phi_times = np.concatenate([sub, tg])
        phi_ext = np.concatenate([
            np.stack([self.phi_slice(t) for t in sub]), phi_vals])
        self._phi_pf = PowerField(phi_times, phi_ext, delta - 1.0)
        self._mphi_pf = PowerField(
            phi_times,
            np.concatenate([np.stack([self.phi_row_mass(t) for t in sub]), m_phi]),
            0.0)
        stopped_by = None
        k = 1
        grow = 0
        while True:
            gamma_tail = gamma_series_tail(c_phi, c_hull, delta, self.horizon,
                                           k, inflation)
            ratio = contribs[-1] / contribs[-2] if k >= 2 else None
            if ratio is not None:
                rho = min(ratio, 0.95)
                empirical_tail = contribs[-1] * rho / (1.0 - rho)
            else:
                empirical_tail = math.inf
            if gamma_tail <= self.tol:
                stopped_by = "gamma"
            elif empirical_tail <= self.tol:
                stopped_by = "empirical"
            elif k >= self.k_cap:
                raise SeriesBudgetError(
                    f"series tolerance {self.tol:g} unreachable by k={self.k_cap}: "
                    f"gamma tail {gamma_tail:.3g}, empirical tail {empirical_tail:.3g}")
            if stopped_by:
                break
            if ratio is not None and ratio >= 1.0:
                grow += 1
                if grow >= 3:
                    raise SeriesBudgetError(
                        "series terms growing for 3 consecutive powers; "
                        "horizon too large for convergence at this tolerance")
            k += 1
            Kf = PowerField(tg, cur_vals, (k - 1) * delta - 1.0)
            mK = PowerField(tg, cur_m, 0.0)
            new_vals = np.empty_like(phi_vals)
            new_m = np.empty((M, n))
            for i, t in enumerate(tg):
                new_vals[i], new_m[i] = self._power_stage_at(t, Kf, mK, k)
            norms.append(norm_of(new_vals, k))
            contribs.append(contrib_of(new_vals))
            psi_vals += new_vals
            m_psi += new_m
            cur_vals, cur_m = new_vals, new_m

        cert = TruncationCertificate(
            regime=self.regime, alpha=self.alpha, kappa=self.kappa, delta=delta,
            horizon=self.horizon, c_phi=c_phi, c_hull=c_hull, inflation=inflation,
            k_max=k, tail_bound=gamma_series_tail(c_phi, c_hull, delta,
                                                  self.horizon, k, inflation),
            empirical_tail=0.0 if stopped_by == "zero" else empirical_tail,
            term_norms=tuple(norms), term_contribs=tuple(contribs),
            tolerance=self.tol, stopped_by=stopped_by)
        self._finish_series(phi_vals, psi_vals, cert, m_phi, m_psi)

    def _finish_series(self, phi_vals, psi_vals, cert, m_phi, m_psi):
        tg = self.tgrid
        delta = self.delta
        lat = self.lattice.nodes
        psi_field = KernelField(
            times=tg, x_nodes=lat, y_nodes=lat, values=psi_vals,
            quad_weights=self.lattice.weights, kind="psi")
        tail_vals = psi_vals - phi_vals
        self._series = {
            "psi_field": psi_field,
            "certificate": cert,
            "tail": PowerField(tg, tail_vals, 2.0 * delta - 1.0),
            "psi": PowerField(tg, psi_vals, delta - 1.0),
            "m_phi": PowerField(tg, m_phi, 0.0),
            "m_psi": PowerField(tg, m_psi, 0.0),
        }

    def _power_stage_at(self, t, Kf, mK, k):
        """One node of Phi^(*k) = Phi (*) Phi^(*(k-1)) plus its row mass.

        Phi sits on the singular left side, where its sub-floor slices are
        convolved by masked-core matmul (resolved far field) plus an analytic
        local mass/dipole term.
        """
        lat = self.lattice.nodes
        wlat = self.lattice.weights
        delta = self.delta
        dz = self.lattice.spacing
        s_nodes, s_w = split_time_quadrature(
            t, min((k - 1) * delta, 1.0), delta, self.field_quad_half)
        acc = np.zeros((self.lattice.n, self.lattice.n))
        accm = np.zeros(self.lattice.n)
        for s, wq in zip(s_nodes, s_w):
            sig = t - s
            Ks = Kf.at(s)
            mKs = mK.at(s)
            if k == 2 and s < self.floor:
                # right factor is Phi itself with an unresolved core
                Ks, mKs = self._masked_phi_as_right(s, Ks, mKs)
            Ph = self._phi_pf.at(sig)
            if sig < self.floor:
                zh = self.z_star(sig, lat)
                window = self._local_window(sig)
                far = Ph * ~self._core_mask(zh, window, axis=0)
                mloc, dloc = self.phi_row_local(sig, lat, window)
                Krow = self.lattice.interp_rows(Ks, zh)
                dKrow = (self.lattice.interp_rows(Ks, zh + dz)
                         - self.lattice.interp_rows(Ks, zh - dz)) / (2 * dz)
                vals = (far * wlat[None, :]) @ Ks \
                    + mloc[:, None] * Krow + dloc[:, None] * dKrow
                mloc_v = self._interp_vec(mKs, zh)
                mrow = (far * wlat[None, :]) @ mKs + mloc * mloc_v
            else:
                vals = (Ph * wlat[None, :]) @ Ks
                mrow = (Ph * wlat[None, :]) @ mKs
            acc += wq * vals
            accm += wq * mrow
        return acc, accm

    def _masked_phi_as_right(self, s, Ks, mKs):
        """Stage-2 correction: replace the unresolved Phi_s core on the right
        factor by zero; the local part is restored via phi_col_local by the
        caller through the returned adjusted slice."""
        lat = self.lattice.nodes
        window = self._local_window(s)
        zc = self.freeze(s, lat)
        mask = self._core_mask(zc, window, axis=1)
        Ks = np.where(mask, 0.0, Ks)
        # local core re-added as a band around the anchor: spread the
        # analytic core mass over the masked cells so downstream matmuls
        # integrate it correctly
        mass, dip = self.phi_col_local(s, lat, window)
        counts = mask.sum(axis=0)
        dzw = self.lattice.weights
        with np.errstate(divide="ignore", invalid="ignore"):
            fill = np.where(counts > 0, mass / (counts * self.lattice.spacing), 0.0)
        Ks = Ks + mask * fill[None, :]
        return Ks, mKs

    def _interp_vec(self, vec, pts):
        pos = np.clip((np.asarray(pts) - self.lattice.lo) / self.lattice.spacing,
                      0.0, self.lattice.n - 1 - 1e-9)
        idx = pos.astype(np.int64)
        fr = pos - idx
        return vec[idx] * (1.0 - fr) + vec[idx + 1] * fr

    # -- residue convolutions: pointwise ------------------------------------

    def _z_integral_point(self, s, sig, x, y_arr, p_kind="p0", t_p=None):
        """int P_(t_p)(x, z) Phi_s(z, y) dz for scalar x, vector y."""
        t_p = sig if t_p is None else t_p
        lat = self.lattice.nodes
        wlat = self.lattice.weights
        thr = self.narrow_width
        w, ww = self._wgrid
        y = np.asarray(y_arr, dtype=float)
        narrow_f = self.kernel_width(s) < thr
        narrow_p = self.kernel_width(t_p) < thr
        if not narrow_f and not narrow_p:
            prow = self._p_eval(p_kind, t_p, x, lat)
            return (prow * wlat) @ self.phi_at(s, lat[:, None], y[None, :])
        if narrow_f:
            A = self.freeze(s, y)
            h = (s * self.model.a(y)) ** (1.0 / self.alpha)
            z = A[None, :] + h[None, :] * w[:, None]
            core = self.phi_at(s, z, y[None, :]) * self._p_eval(p_kind, t_p, x, z)
            if not narrow_p:
                return h * np.einsum("q,qj->j", ww, core)
            # both kernels narrow: split the line at the midpoint and anchor
            # each side on its own peak (masked weights; cut crosses only
            # tail-by-tail regions when the peaks are separated)
            zs = float(self.z_star(t_p, np.asarray(x, dtype=float)))
            hx = float((t_p * self.model.a(self.z_star(t_p, np.asarray(x))))
                       ** (1.0 / self.alpha))
            sep = np.abs(A - zs) > 6.0 * (h + hx)
            vals_near = h * np.einsum("q,qj->j", ww, core)
            if not np.any(sep):
                return vals_near
            mid = 0.5 * (A + zs)
            side = np.sign(A - zs)
            mask1 = (z - mid[None, :]) * side[None, :] >= 0
            piece1 = h * np.einsum("q,qj->j", ww, core * mask1)
            z2 = zs + hx * w[:, None]
            core2 = self.phi_at(s, z2, y[None, :]) * self._p_eval(p_kind, t_p, x, z2)
            mask2 = (z2 - mid[None, :]) * side[None, :] < 0
            piece2 = hx * np.einsum("q,qj->j", ww, core2 * mask2)
            return np.where(sep, piece1 + piece2, vals_near)
        # P narrow only: anchor on the p0 row peak
        zs = self.z_star(t_p, np.asarray(x, dtype=float))
        hx = (t_p * self.model.a(self.z_star(t_p, np.asarray(x)))) ** (1.0 / self.alpha)
        z = (zs + hx * w)[:, None]
        prow = self._p_eval(p_kind, t_p, x, z[:, 0])
        vals = self.phi_at(s, z, y[None, :])
        return float(hx) * np.einsum("q,q,qj->j", ww, prow, vals)

    def _conv_phi_point(self, t, x, y_arr, *, shift=0.0, upper=None, p_kind="p0",
                        n_half=None):
        """int_0^upper (P_(t-s+shift) * Phi_s)(x, y) ds."""
        upper = t if upper is None else upper
        n_half = n_half or self.quad_half
        if upper >= t:
            s_nodes, s_w = split_time_quadrature(t, self.delta, 1.0, n_half)
        else:
            s_nodes, s_w = power_interval_quadrature(upper, self.delta, 2 * n_half)
        acc = np.zeros(np.asarray(y_arr).shape)
        for s, wq in zip(s_nodes, s_w):
            acc += wq * self._z_integral_point(s, t - s, x, y_arr,
                                               p_kind=p_kind, t_p=t - s + shift)
        return acc

    def _conv_tail_point(self, t, x, y_arr, *, shift=0.0, upper=None,
                         field=None, env2=True):
        """int_0^upper (p0_(t-s+shift) * tail_s)(x, y) ds, tail from the grid."""
        if self._series is None:
            self._build_series()
        fld = field if field is not None else self._series["tail"]
        upper = t if upper is None else upper
        exp0 = 2.0 * self.delta if env2 else self.delta
        if upper >= t:
            s_nodes, s_w = split_time_quadrature(t, exp0, 1.0, self.quad_half)
        else:
            s_nodes, s_w = power_interval_quadrature(upper, exp0, 2 * self.quad_half)
        lat = self.lattice.nodes
        y = np.asarray(y_arr, dtype=float)
        acc = np.zeros(y.shape)
        same_grid = y.shape == lat.shape and np.allclose(y, lat)
        for s, wq in zip(s_nodes, s_w):
            if s < self.floor:
                continue  # below the lattice resolution floor (error budget)
            Ts = fld.at(s)
            Ty = Ts if same_grid else self.lattice.interp_columns(Ts, y)
            acc += wq * self._p0_row_dot_point(t - s + shift, x, Ty)
        return acc

    # -- residue convolutions: full lattice ----------------------------------

    def _conv_phi_field(self, t, shift=0.0):
        """Lattice slice of int_0^t (p0_(t-s+shift) * Phi_s) ds.

        Bilinear far/local decomposition: with P = Pfar + Ploc (p0 rows) and
        F = Ffar + Floc (Phi columns), the integral is assembled exactly as
        Pfar@Ffar + P@Floc + Ploc@Ffar; the core-core pairing enters through
        the analytic p0 factor of the P@Floc term.
        """
        lat = self.lattice.nodes
        wlat = self.lattice.weights
        thr = self.narrow_width
        dzs = self.lattice.spacing
        s_nodes, s_w = split_time_quadrature(t, self.delta, 1.0, self.quad_half)
        acc = np.zeros((self.lattice.n, self.lattice.n))
        for s, wq in zip(s_nodes, s_w):
            sig = t - s + shift
            F = self.phi_slice(s)
            phi_narrow = self.kernel_width(s) < thr
            p_narrow = self.kernel_width(sig) < thr
            if not phi_narrow and not p_narrow:
                P = self.p0_at(sig, lat[:, None], lat[None, :])
                acc += wq * (P @ (wlat[:, None] * F))
                continue
            vals = np.zeros_like(acc)
            Ffar = F
            if phi_narrow:
                win_c = self._local_window(s)
                zc = self.freeze(s, lat)
                Ffar = F * ~self._core_mask(zc, win_c, axis=1)
                mc, dc = self.phi_col_local(s, lat, win_c)
                Pzc = self.p0_at(sig, lat[:, None], zc[None, :])
                dPzc = (self.p0_at(sig, lat[:, None], (zc + dzs)[None, :])
                        - self.p0_at(sig, lat[:, None], (zc - dzs)[None, :])) / (2 * dzs)
                vals += Pzc * mc[None, :] + dPzc * dc[None, :]
            P = self.p0_at(sig, lat[:, None], lat[None, :])
            if p_narrow:
                win_r = self._local_window(sig)
                zs = self.z_star(sig, lat)
                P = P * ~self._core_mask(zs, win_r, axis=0)
                mr, dr = self.p0_row_local(sig, lat, win_r)
                Krow = self.lattice.interp_rows(Ffar, zs)
                dKrow = (self.lattice.interp_rows(Ffar, zs + dzs)
                         - self.lattice.interp_rows(Ffar, zs - dzs)) / (2 * dzs)
                vals += mr[:, None] * Krow + dr[:, None] * dKrow
            vals += (P * wlat[None, :]) @ Ffar
            acc += wq * vals
        return acc

    def _conv_tail_field(self, t, shift=0.0):
        if self._series is None:
            self._build_series()
        fld = self._series["tail"]
        s_nodes, s_w = split_time_quadrature(t, 2.0 * self.delta, 1.0, self.quad_half)
        acc = np.zeros((self.lattice.n, self.lattice.n))
        for s, wq in zip(s_nodes, s_w):
            if s < self.floor:
                continue  # below the lattice resolution floor (error budget)
            acc += wq * self._p0_rows_field(t - s + shift, fld.at(s))
        return acc

    # -- public density operations -------------------------------------------

    def residue_point(self, t, x, y_arr):
        if self.series["certificate"].stopped_by == "zero":
            return np.zeros(np.asarray(y_arr, dtype=float).shape)
        return (self._conv_phi_point(t, x, y_arr)
                + self._conv_tail_point(t, x, y_arr))

    def density(self, t, x, y):
        """Pointwise transition density p_t(x, y), y scalar or vector."""
        if not 0.0 < t <= self.horizon:
            raise ValueError(f"t must lie in (0, {self.horizon}], got {t}")
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        vals = self.p0_at(t, x, y_arr) + self.residue_point(t, x, y_arr)
        return float(vals[0]) if np.ndim(y) == 0 else vals

    def residue_slice(self, t):
        if self.series["certificate"].stopped_by == "zero":
            return np.zeros((self.lattice.n, self.lattice.n))
        return self._conv_phi_field(t) + self._conv_tail_field(t)

    def density_field(self, times):
        """Density KernelField on the lattice at the requested times."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        lat = self.lattice.nodes
        vals = np.stack([self.p0_slice(t) + self.residue_slice(t) for t in times])
        return KernelField(times=times, x_nodes=lat, y_nodes=lat, values=vals,
                           quad_weights=self.lattice.weights, kind="density")

    def density_eps(self, t, eps, x, y):
        """Approximative fundamental solution p_(t,eps)(x, y)."""
        if eps <= 0.0:
            raise ValueError("eps must be positive (eps = 0 is the singular limit)")
        if not 0.0 < t <= self.horizon:
            raise ValueError(f"t must lie in (0, {self.horizon}], got {t}")
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        vals = self.p0_at(t + eps, x, y_arr)
        if self.series["certificate"].stopped_by != "zero":
            vals = vals + self._conv_phi_point(t, x, y_arr, shift=eps) \
                + self._conv_tail_point(t, x, y_arr, shift=eps)
        return float(vals[0]) if np.ndim(y) == 0 else vals

    def psi_at_point(self, t, x, y_arr):
        """Psi_t(x, y) = Phi_t (analytic) + gridded tail, y on arbitrary points."""
        y = np.atleast_1d(np.asarray(y_arr, dtype=float))
        vals = self.phi_at(t, np.asarray(x, dtype=float), y)
        if self.series["certificate"].stopped_by != "zero" and t >= self.floor:
            tail = self._series["tail"].at(t)
            rows = self.lattice.interp_columns(tail, y)
            pos = np.clip((float(x) - self.lattice.lo) / self.lattice.spacing,
                          0.0, self.lattice.n - 1 - 1e-9)
            i0 = int(pos)
            fr = pos - i0
            vals = vals + rows[i0] * (1 - fr) + rows[i0 + 1] * fr
        return vals

    def dt_density(self, t, x, y, fd_frac=0.06):
        """d/dt p_t(x,y) via the split representation with a finite-difference
        time derivative of the series tail; returns (value, bound_ratio)."""
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        fd_step = fd_frac * t
        if t <= 2 * fd_step:
            raise ValueError("t too small for the finite-difference step")
        out = self.dtp0_at(t, x, y_arr)
        if self.series["certificate"].stopped_by != "zero":
            half = 0.5 * t
            # d_t acting on p0 inside int_0^(t/2) p0_(t-s) Psi_s ds
            out = out + self._conv_phi_point(t, x, y_arr, upper=half, p_kind="dtp0")
            out = out + self._conv_dtp0_tail(t, x, y_arr, half)
            # boundary term p0_(t/2) * Psi_(t/2)
            out = out + self._z_psi_integral(half, half, x, y_arr)
            # second half: int_0^(t/2) p0_s * (d_t Psi)_(t-s) ds
            out = out + self._dt_psi_half(t, x, y_arr, fd_step)
        vals = out
        hull_vals = self.hull.eval(t, np.asarray(x, dtype=float), y_arr)
        bound = max(t ** (-1.0), t ** (-1.0 / self.alpha)) * hull_vals
        ratio = float(np.max(np.abs(vals) / bound))
        if np.ndim(y) == 0:
            return float(vals[0]), ratio
        return vals, ratio

    def _conv_dtp0_tail(self, t, x, y_arr, upper):
        """int_0^upper ((d_t p0)_(t-s) * tail_s)(x, y) ds."""
        fld = self._series["tail"]
        s_nodes, s_w = power_interval_quadrature(upper, 2.0 * self.delta,
                                                 2 * self.quad_half)
        lat = self.lattice.nodes
        wlat = self.lattice.weights
        y = np.asarray(y_arr, dtype=float)
        acc = np.zeros(y.shape)
        for s, wq in zip(s_nodes, s_w):
            if s < self.floor:
                continue
            Ty = self.lattice.interp_columns(fld.at(s), y)
            prow = self.dtp0_at(t - s, x, lat)
            acc += wq * ((prow * wlat) @ Ty)
        return acc

    def _z_psi_integral(self, t_p, s, x, y_arr):
        """(p0_(t_p) * Psi_s)(x, y) pointwise."""
        y = np.asarray(y_arr, dtype=float)
        vals = self._z_integral_point(s, t_p, x, y, p_kind="p0", t_p=t_p)
        if self.series["certificate"].stopped_by != "zero" and s >= self.floor:
            Ty = self.lattice.interp_columns(self._series["tail"].at(s), y)
            vals = vals + self._p0_row_dot_point(t_p, x, Ty)
        return vals

    def _dt_psi_half(self, t, x, y_arr, fd_step):
        """int_0^(t/2) (p0_s * (d_t Psi)_(t-s))(x, y) ds, tail derivative by
        central differences of the gridded field, Phi part analytic."""
        half = 0.5 * t
        s_nodes, s_w = power_interval_quadrature(half, 1.0, 2 * self.quad_half)
        y = np.asarray(y_arr, dtype=float)
        acc = np.zeros(y.shape)
        lat = self.lattice.nodes
        same_grid = y.shape == lat.shape and np.allclose(y, lat)
        for s, wq in zip(s_nodes, s_w):
            tau = t - s
            h = max(min(fd_step, 0.45 * tau), 1e-4 * t)
            dpsi = (self._psi_slice_interp(tau + h)
                    - self._psi_slice_interp(tau - h)) / (2 * h)
            dpsi_y = dpsi if same_grid else self.lattice.interp_columns(dpsi, y)
            acc += wq * self._p0_row_dot_point(s, x, dpsi_y)
        return acc

    def _psi_slice_interp(self, t):
        """Psi slice at arbitrary t: analytic Phi plus interpolated tail."""
        vals = self.phi_slice(t)
        if self.series["certificate"].stopped_by != "zero":
            vals = vals + self._series["tail"].at(t)
        return vals

    # -- mass ------------------------------------------------------------------

    def p0_mass(self, t, x):
        """int p0_t(x, y) dy on an anchored heavy-tail grid."""
        w, ww = self._wgrid
        xs = float(x)
        y_star = float(self.z_star(t, np.asarray(xs)))
        h = float((t * self.model.a(y_star)) ** (1.0 / self.alpha))
        y = y_star + h * w
        vals = self.p0_at(t, xs, y)
        body = h * float(np.sum(ww * vals))
        # analytic continuation beyond the grid: p0 ~ C_g tau |y - x|^(-1-a)
        w_cap = abs(w[-1])
        cg = self.profile.tail_coeffs["g"]
        a_edge = 0.5 * (self.model.a(y[-1]) + self.model.a(y[0]))
        tail = 2.0 * cg * t * a_edge * (w_cap * h) ** (-self.alpha) / self.alpha
        return body + tail

    def residue_mass(self, t, x):
        """int r_t(x, y) dy via the row-mass recursion."""
        if self.series["certificate"].stopped_by == "zero":
            return 0.0
        m_psi = self._series["m_psi"]
        lat = self.lattice.nodes
        s_nodes, s_w = split_time_quadrature(t, self.delta, 1.0, self.quad_half)
        acc = 0.0
        for s, wq in zip(s_nodes, s_w):
            if s < self.floor:
                mvec = self.phi_row_mass(s, lat)  # k = 1 part only below floor
            else:
                mvec = m_psi.at(s)
            acc += wq * float(self._p0_row_dot_point(t - s, x, mvec))
        return acc

    def mass(self, t, x):
        """int p_t(x, y) dy including analytic tail compensation."""
        return self.p0_mass(t, x) + self.residue_mass(t, x)


# ---------------------------------------------------------------------------
# spec-level operation wrappers
# ---------------------------------------------------------------------------

def psi_series(regime, model, profile, flows, horizon, lattice, tol=1e-6,
               **solver_kwargs):
    """Build the certified series field; returns (KernelField, certificate)."""
    solver = ParametrixSolver(model, profile, flows=flows, regime=regime,
                              lattice=lattice, horizon=horizon, tol=tol,
                              **solver_kwargs)
    return solver.psi_field(), solver.certificate()


def density(regime, model, profile, flows, t, x, y, tol=1e-6, solver=None,
            **solver_kwargs):
    s = solver or ParametrixSolver(model, profile, flows=flows, regime=regime,
                                   horizon=max(t, 1.0), tol=tol, **solver_kwargs)
    return s.density(t, x, y)


def density_eps(regime, model, profile, flows, t, eps, x, y, tol=1e-6,
                solver=None, **solver_kwargs):
    s = solver or ParametrixSolver(model, profile, flows=flows, regime=regime,
                                   horizon=max(t, 1.0), tol=tol, **solver_kwargs)
    return s.density_eps(t, eps, x, y)


def dt_density(regime, model, profile, flows, t, x, y, solver=None,
               **solver_kwargs):
    s = solver or ParametrixSolver(model, profile, flows=flows, regime=regime,
                                   horizon=max(t, 1.0), **solver_kwargs)
    return s.dt_density(t, x, y)
