"""Smooth planar scalar fields with analytic first and second derivatives.

All callables are vectorised over leading axes: a point array of shape
``(..., 2)`` maps to values ``(...)``, gradients ``(..., 2)`` and Hessians
``(..., 2, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import BadCutoff, BadParameter, SingularPoint

SINGULAR_TOL = 1e-12

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarField:
    eval_fn: ArrayFn
    grad_fn: ArrayFn
    hess_fn: ArrayFn
    singular_set: tuple = ()
    descriptor: str = ""

    def _check(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != 2:
            raise ValueError(f"points must have trailing dimension 2, got {q.shape}")
        for p in self.singular_set:
            if np.any(np.hypot(q[..., 0] - p[0], q[..., 1] - p[1]) <= SINGULAR_TOL):
                raise SingularPoint(f"{self.descriptor or 'field'} is singular at {tuple(p)}")
        return q

    def value(self, q):
        return self.eval_fn(self._check(q))

    def grad(self, q):
        return self.grad_fn(self._check(q))

    def hessian(self, q):
        return self.hess_fn(self._check(q))

    def distance_to_singularity(self, q):
        """Distance from ``q`` to the nearest singular point (inf if none)."""
        q = np.asarray(q, dtype=float)
        if not self.singular_set:
            return np.full(q.shape[:-1], np.inf)
        d = [np.hypot(q[..., 0] - p[0], q[..., 1] - p[1]) for p in self.singular_set]
        return np.min(d, axis=0)


@dataclass(frozen=True)
class Ball:
    center: tuple
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise BadParameter(f"ball radius must be positive, got {self.delta}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def c(self):
        return np.array(self.center)

    def dist(self, q):
        q = np.asarray(q, dtype=float)
        return np.hypot(q[..., 0] - self.center[0], q[..., 1] - self.center[1])

    def clear_of(self, fld: ScalarField) -> bool:
        """True when B_{2δ} contains none of the field's singularities."""
        return all(self.dist(np.asarray(p)) > 2 * self.delta for p in fld.singular_set)

    def grid(self, n, radius_factor=1.0):
        """Points of an n×n grid over the bounding square of B_{radius_factor·δ}, clipped to the disk."""
        r = radius_factor * self.delta
        ax = np.linspace(-r, r, n)
        X, Y = np.meshgrid(ax + self.center[0], ax + self.center[1], indexing="xy")
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        return pts[self.dist(pts) <= r]


# --- smooth cutoff ------------------------------------------------------------------

_PSI_FLOOR = 1e-3  # exp(-1/t) underflows to exactly 0.0 below this


def _psi(t):
    """e^{-1/t} for t > 0, zero otherwise, with first two derivatives."""
    t = np.asarray(t, dtype=float)
    live = t > _PSI_FLOOR
    ts = np.where(live, t, 1.0)
    p = np.where(live, np.exp(-1.0 / ts), 0.0)
    p1 = p / ts**2
    p2 = p * (1.0 / ts**4 - 2.0 / ts**3)
    return p, p1, p2


class BumpProfile:
    """C^∞ radial cutoff: 1 for r ≤ 1/2, 0 for r ≥ 1, built from e^{-1/t}."""

    inner = 0.5
    outer = 1.0

    def __call__(self, r):
        return self.derivatives(r)[0]

    def derivatives(self, r):
        r = np.asarray(r, dtype=float)
        w = self.outer - self.inner
        u = (self.outer - r) / w  # u=1 at inner edge, 0 at outer
        a, a1, a2 = _psi(u)
        b, b1, b2 = _psi(1.0 - u)
        # d/du of b(1-u) flips the sign of odd derivatives
        b1 = -b1
        d = a + b
        d1 = a1 + b1
        d2 = a2 + b2
        s = a / d
        s1 = (a1 * d - a * d1) / d**2
        s2 = (a2 * d - a * d2) / d**2 - 2 * d1 * (a1 * d - a * d1) / d**3
        du = -1.0 / w
        return s, s1 * du, s2 * du**2


BUMP = BumpProfile()


@dataclass(frozen=True)
class Perturbation:
    amplitude: float
    direction: tuple | None = None
    seed: int = 0
    cutoff: object = dc_field(default=BUMP, repr=False, compare=False)

    def unit_direction(self):
        if self.direction is not None:
            a = np.asarray(self.direction, dtype=float)
            n = np.linalg.norm(a)
            if n == 0:
                raise BadParameter("perturbation direction must be nonzero")
            return a / n
        theta = np.random.default_rng(self.seed).uniform(0.0, 2.0 * np.pi)
        return np.array([np.cos(theta), np.sin(theta)])


def _validate_cutoff(chi):
    inside = chi(np.linspace(0.0, 0.5, 51))
    outside = chi(np.linspace(1.0, 4.0, 61))
    if not (np.all(inside == 1.0) and np.all(outside == 0.0)):
        raise BadCutoff("cutoff must equal 1 on r <= 1/2 and 0 on r >= 1")


def perturb(base: ScalarField, ball: Ball, pert: Perturbation) -> ScalarField:
    """Add λ·χ(|q−x₀|/δ)·⟨a, q−x₀⟩ to ``base``; identical to ``base`` outside B_δ."""
    if pert.amplitude < 0:
        raise BadParameter("perturbation amplitude must be non-negative")
    chi = pert.cutoff
    _validate_cutoff(chi)
    lam = float(pert.amplitude)
    a = pert.unit_direction()
    x0 = ball.c
    delta = ball.delta

    def parts(q):
        d = q - x0
        rho = np.hypot(d[..., 0], d[..., 1])
        # χ is exactly 1 inside δ/2 and 0 outside δ; only the annulus needs the bump
        c0 = np.where(rho <= 0.5 * delta, 1.0, 0.0)
        c1 = np.zeros_like(rho)
        c2 = np.zeros_like(rho)
        mid = (rho > 0.5 * delta) & (rho < delta)
        if np.any(mid):
            b0, b1, b2 = chi.derivatives(rho[mid] / delta)
            c0[mid], c1[mid], c2[mid] = b0, b1, b2
        return d, rho, c0, c1, c2

    def ev(q):
        base_v = base.eval_fn(q)
        d, rho, c0, _, _ = parts(q)
        return np.where(rho >= delta, base_v, base_v + lam * c0 * (d @ a))

    def gr(q):
        base_g = base.grad_fn(q)
        d, rho, c0, c1, _ = parts(q)
        safe = np.where(rho > 0, rho, 1.0)
        radial = (c1 / (delta * safe))[..., None] * d
        extra = lam * (c0[..., None] * a + (d @ a)[..., None] * radial)
        return np.where((rho >= delta)[..., None], base_g, base_g + extra)

    def he(q):
        base_h = base.hess_fn(q)
        d, rho, c0, c1, c2 = parts(q)
        safe = np.where(rho > 0, rho, 1.0)
        ad = d @ a
        unit = d / safe[..., None]
        uu = unit[..., :, None] * unit[..., None, :]
        eye = np.eye(2)
        # ∇χ = χ' u/δ ;  ∇²χ = χ'' uuᵀ/δ² + χ' (I − uuᵀ)/(δρ)
        gchi = (c1 / delta)[..., None] * unit
        hchi = (c2 / delta**2)[..., None, None] * uu + (c1 / (delta * safe))[..., None, None] * (eye - uu)
        sym = gchi[..., :, None] * a[None, :] + a[:, None] * gchi[..., None, :]
        extra = lam * (sym + ad[..., None, None] * hchi)
        return np.where((rho >= delta)[..., None, None], base_h, base_h + extra)

    desc = f"{base.descriptor} + perturbation(λ={lam:.6g}, a=({a[0]:.6g},{a[1]:.6g}), seed={pert.seed})"
    return ScalarField(ev, gr, he, base.singular_set, desc)


# --- derivative checks --------------------------------------------------------------


@dataclass
class DerivativeReport:
    probes: np.ndarray
    grad_errors: np.ndarray
    hess_errors: np.ndarray
    grad_tol: float = 1e-5
    hess_tol: float = 1e-4

    @property
    def failures(self):
        bad = (self.grad_errors > self.grad_tol) | (self.hess_errors > self.hess_tol)
        return np.flatnonzero(bad)

    @property
    def ok(self):
        return self.failures.size == 0

    def __len__(self):
        return len(self.grad_errors)


def _rel(err, ref):
    return err / max(ref, 1.0)


def check_derivatives(fld: ScalarField, probes, step=1e-5, scale=1.0) -> DerivativeReport:
    """Compare analytic derivatives with central differences at each probe.

    ``step`` is relative to ``scale`` (the local length scale). Errors are
    relative to the magnitude of the analytic quantity (floored at 1).
    """
    probes = np.asarray(probes, dtype=float).reshape(-1, 2)
    h = step * scale
    ge, he = [], []
    for p in probes:
        g = fld.grad(p)
        H = fld.hessian(p)
        fd_g = np.empty(2)
        fd_h = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd_g[i] = (fld.value(p + e) - fld.value(p - e)) / (2 * h)
            fd_h[:, i] = (fld.grad(p + e) - fld.grad(p - e)) / (2 * h)
        ge.append(_rel(np.max(np.abs(g - fd_g)), np.max(np.abs(g))))
        he.append(_rel(np.max(np.abs(H - fd_h)), np.max(np.abs(H))))
    return DerivativeReport(probes, np.array(ge), np.array(he))


# --- elementary fields ----------------------------------------------------------------


def polynomial_field(coeffs: dict, descriptor: str) -> ScalarField:
    """Field Σ c_{ij} x^i y^j from a ``{(i, j): c}`` mapping."""
    terms = [(int(i), int(j), float(c)) for (i, j), c in coeffs.items()]

    I = np.array([t[0] for t in terms], dtype=float)
    J = np.array([t[1] for t in terms], dtype=float)
    C = np.array([t[2] for t in terms], dtype=float)
    # derivative coefficients; exponents clipped at 0 where the coefficient vanishes anyway
    Im1, Jm1 = np.maximum(I - 1, 0), np.maximum(J - 1, 0)
    Im2, Jm2 = np.maximum(I - 2, 0), np.maximum(J - 2, 0)

    def _mono(q, a, b):
        x, y = q[..., 0:1], q[..., 1:2]
        return x**a * y**b

    def ev(q):
        return _mono(q, I, J) @ C

    def gr(q):
        return np.stack([_mono(q, Im1, J) @ (C * I), _mono(q, I, Jm1) @ (C * J)], axis=-1)

    def he(q):
        hxx = _mono(q, Im2, J) @ (C * I * (I - 1))
        hyy = _mono(q, I, Jm2) @ (C * J * (J - 1))
        hxy = _mono(q, Im1, Jm1) @ (C * I * J)
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)

    return ScalarField(ev, gr, he, (), descriptor)


def lagrange_potential(m1: float, m2: float, eps: float) -> ScalarField:
    """V = −m₁/r₁ − m₂/r₂ − (ε/2)|q|² with centres at (∓½, 0).

    This is minus the force function U, so the off-axis equilibria are maxima.
    """
    for name, v in (("m1", m1), ("m2", m2), ("eps", eps)):
        if not (np.isfinite(v) and v > 0):
            raise BadParameter(f"{name} must be positive, got {v}")
    centers = np.array([[-0.5, 0.0], [0.5, 0.0]])
    masses = np.array([m1, m2], dtype=float)

    def ev(q):
        out = -0.5 * eps * np.sum(q * q, axis=-1)
        for m, c in zip(masses, centers):
            out = out - m / np.linalg.norm(q - c, axis=-1)
        return out

    def gr(q):
        out = -eps * q
        for m, c in zip(masses, centers):
            d = q - c
            r = np.linalg.norm(d, axis=-1)[..., None]
            out = out + m * d / r**3
        return out

    def he(q):
        out = -eps * np.broadcast_to(np.eye(2), q.shape[:-1] + (2, 2)).copy()
        eye = np.eye(2)
        for m, c in zip(masses, centers):
            d = q - c
            r = np.linalg.norm(d, axis=-1)[..., None, None]
            out = out + m * (eye / r**3 - 3 * (d[..., :, None] * d[..., None, :]) / r**5)
        return out

    desc = f"lagrange(m1={m1:.12g}, m2={m2:.12g}, eps={eps:.12g})"
    return ScalarField(ev, gr, he, ((-0.5, 0.0), (0.5, 0.0)), desc)


def gradient_scale(fld: ScalarField, ball: Ball, n=32) -> float:
    """max |∇f| over an n×n grid on B_δ, skipping points next to singularities."""
    pts = ball.grid(n)
    pts = pts[fld.distance_to_singularity(pts) > 1e-3 * ball.delta]
    with np.errstate(all="ignore"):
        g = np.linalg.norm(fld.grad_fn(pts), axis=-1)
    g = g[np.isfinite(g)]
    # a field with nothing to measure (empty grid, or identically flat) falls back to unit scale
    return float(g.max()) if g.size and g.max() > 0 else 1.0


def hessian_scale(fld: ScalarField, ball: Ball, n=32) -> float:
    pts = ball.grid(n)
    pts = pts[fld.distance_to_singularity(pts) > 1e-3 * ball.delta]
    with np.errstate(all="ignore"):
        h = np.linalg.norm(fld.hess_fn(pts), ord=2, axis=(-2, -1))
    h = h[np.isfinite(h)]
    return float(h.max()) if h.size and h.max() > 0 else 1.0


def default_amplitude(fld: ScalarField, ball: Ball) -> float:
    return 1e-3 * gradient_scale(fld, ball)
