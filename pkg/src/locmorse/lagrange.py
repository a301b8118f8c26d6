"""Equilibria of the two-fixed-centres problem with an elastic force, and their local homology.

The analysed field is V = −m₁/r₁ − m₂/r₂ − (ε/2)|q|² with the centres at
(∓½, 0). Its five critical points are the three collinear points l₁, l₂, l₃
(l₁ between the centres, l₂ to the right, l₃ to the left) and the off-axis
pair l₄ (upper) and l₅ (lower).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .critpoints import CriticalPoint, ToleranceSet, classify, find_critical_points, newton_batch, validate_isolation
from .errors import BadParameter, CensusMismatch, IsolationLost, RootCountMismatch, SingularPoint
from .field import Ball, ScalarField, lagrange_potential
from .pipeline import local_homology

log = logging.getLogger(__name__)

AXIS_WINDOW = 5.0
OFF_AXIS_WINDOW = 3.0
MIN_STEP = 1.0 / 256
LABELS = ("l1", "l2", "l3", "l4", "l5")
EXPECTED_BETTI = {"l1": (0, 1, 0), "l2": (0, 1, 0), "l3": (0, 1, 0), "l4": (0, 0, 1), "l5": (0, 0, 1)}


@dataclass(frozen=True)
class LagrangeParams:
    m1: float
    m2: float
    eps: float

    def __post_init__(self):
        for name in ("m1", "m2", "eps"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise BadParameter(f"{name} must be positive, got {v}")

    @property
    def reference_mass(self):
        return max(self.m1, self.m2, self.eps / 8)

    def field(self) -> ScalarField:
        return lagrange_potential(self.m1, self.m2, self.eps)

    def as_dict(self):
        return {"m1": self.m1, "m2": self.m2, "eps": self.eps}

    def off_axis_admissible(self) -> bool:
        """Whether the off-axis pair exists: r₁ = (2m₁/ε)^⅓ and r₂ = (2m₂/ε)^⅓ must form a triangle with side 1."""
        r1, r2 = (2 * self.m1 / self.eps) ** (1 / 3), (2 * self.m2 / self.eps) ** (1 / 3)
        return r1 + r2 > 1 and abs(r1 - r2) < 1


# --- collinear points ---------------------------------------------------------------


def _axis_slope(p: LagrangeParams, x):
    """∂V/∂q₁ on the axis; strictly decreasing on each of the three intervals."""
    a, b = x + 0.5, x - 0.5
    return p.m1 * np.sign(a) / a**2 + p.m2 * np.sign(b) / b**2 - p.eps * x


def _axis_curvature(p: LagrangeParams, x):
    return -2 * p.m1 / abs(x + 0.5) ** 3 - 2 * p.m2 / abs(x - 0.5) ** 3 - p.eps


def collinear_points(params: LagrangeParams, window: float = AXIS_WINDOW):
    """The axis critical points as [l₁, l₂, l₃] = [middle, right, left], each a 2-vector."""
    gap = 1e-9
    intervals = {"l1": (-0.5 + gap, 0.5 - gap), "l2": (0.5 + gap, window), "l3": (-window, -0.5 - gap)}
    roots = {}
    for name, (lo, hi) in intervals.items():
        flo, fhi = _axis_slope(params, lo), _axis_slope(params, hi)
        if not (flo > 0 > fhi):
            raise RootCountMismatch(f"no sign change of dV/dq1 on [{lo:g}, {hi:g}] for {name}")
        x = brentq(lambda s: _axis_slope(params, s), lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        for _ in range(3):
            x_new = x - _axis_slope(params, x) / _axis_curvature(params, x)
            if not lo < x_new < hi:
                break
            x = x_new
        roots[name] = np.array([x, 0.0])
    return [roots["l1"], roots["l2"], roots["l3"]]


def collinear_hessian(params: LagrangeParams, q1: float):
    """Closed-form Hessian of V at (q₁, 0); diagonal because V is even in q₂."""
    a, b = abs(q1 + 0.5), abs(q1 - 0.5)
    if min(a, b) < 1e-12:
        raise SingularPoint(f"q1 = {q1} is a centre")
    h11 = -2 * params.m1 / a**3 - 2 * params.m2 / b**3 - params.eps
    h22 = params.m1 / a**3 + params.m2 / b**3 - params.eps
    return np.array([[h11, 0.0], [0.0, h22]])


# --- census -------------------------------------------------------------------------


def _search_tolerances(params: LagrangeParams):
    ref = max(params.m1, params.m2, params.eps)
    return ToleranceSet(grad_tol=1e-11 * ref, merge_tol=1e-8, degen_tol=1e-8 * ref)


def _off_axis_points(fld: ScalarField, params: LagrangeParams, window: float, n=24):
    """Off-axis critical points: Newton over the upper half of the window, then mirrored."""
    tols = _search_tolerances(params)
    xs = np.linspace(-window, window, 2 * n)
    ys = np.linspace(window / n, window, n)
    X, Y = np.meshgrid(xs, ys)
    seeds = np.stack([X.ravel(), Y.ravel()], axis=-1)
    seeds = seeds[fld.distance_to_singularity(seeds) > 1e-3]
    search = Ball((0.0, 0.0), window)  # B_{2δ} covers the square
    found = find_critical_points(fld, search, 8, tols, seeds=seeds)
    upper = [c.q for c in found if c.location[1] > 1e-6 and np.all(np.abs(c.q) <= window)]
    return upper + [u * np.array([1.0, -1.0]) for u in upper]


def locate_all(params: LagrangeParams, window: float = OFF_AXIS_WINDOW, fld: ScalarField | None = None):
    """All five critical points, classified, in the order l₁…l₅."""
    fld = fld or params.field()
    tols = _search_tolerances(params)
    pts = collinear_points(params)
    pts += _off_axis_points(fld, params, window)
    crits = [classify(fld, p, tols, check=False, id=i) for i, p in enumerate(pts)]
    if len(crits) != 5:
        raise CensusMismatch(
            f"found {len(crits)} critical points for {params.as_dict()}, expected 5",
            found=[c.as_dict() for c in crits],
        )
    return crits


def equal_mass_homotopy(params: LagrangeParams, t: float) -> ScalarField:
    """Masses m + t(m₁ − m), m + t(m₂ − m) with m the reference mass; t = 1 is the target field."""
    m = params.reference_mass
    m1, m2 = m + t * (params.m1 - m), m + t * (params.m2 - m)
    if m1 <= 0 or m2 <= 0:
        raise BadParameter(f"interpolated masses ({m1}, {m2}) at t={t} are not positive")
    if t == 1:
        return params.field()
    return lagrange_potential(m1, m2, params.eps)


def _params_at(params: LagrangeParams, t: float) -> LagrangeParams:
    m = params.reference_mass
    return LagrangeParams(m + t * (params.m1 - m), m + t * (params.m2 - m), params.eps)


# --- five-point pipeline -------------------------------------------------------------


@dataclass
class PointReport:
    label: str
    start: CriticalPoint
    end: CriticalPoint
    betti_start: tuple
    betti_end: tuple
    checks: dict = dc_field(default_factory=dict)
    path: list = dc_field(default_factory=list)  # (t, q1, q2)

    @property
    def classification(self):
        if self.betti_end == (0, 1, 0):
            return "saddle or degenerate" if self.end.degenerate else "saddle"
        if self.betti_end == (0, 0, 1):
            return "maximum"
        return "other"

    def as_dict(self):
        return {
            "label": self.label,
            "start": self.start.as_dict(),
            "end": self.end.as_dict(),
            "betti_start": list(self.betti_start),
            "betti_end": list(self.betti_end),
            "classification": self.classification,
            "checks": self.checks,
        }


@dataclass
class LagrangeReport:
    params: LagrangeParams
    delta: float
    seed: int
    points: list
    trace: list  # per accepted step: {"t", "step", "isolated"}
    expected: dict = dc_field(default_factory=lambda: dict(EXPECTED_BETTI))

    @property
    def betti(self):
        return {p.label: p.betti_end for p in self.points}

    @property
    def matches_theorem(self) -> bool:
        return all(tuple(self.expected[p.label]) == p.betti_end for p in self.points)

    @property
    def checks(self):
        out = {"theorem_a": self.matches_theorem,
               "betti_constant": all(p.betti_start == p.betti_end for p in self.points)}
        for p in self.points:
            for k, v in p.checks.items():
                out[k] = out.get(k, True) and bool(v)
        return out

    def as_dict(self):
        return {
            "params": self.params.as_dict(),
            "delta": self.delta,
            "seed": self.seed,
            "points": [p.as_dict() for p in self.points],
            "trace": self.trace,
            "expected": {k: list(v) for k, v in self.expected.items()},
            "checks": self.checks,
        }

    def to_json(self, path=None):
        text = json.dumps(self.as_dict(), sort_keys=True, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def write_paths(self, directory):
        """One CSV per point with header ``s,q1,q2`` where s is the homotopy parameter."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for p in self.points:
            f = directory / f"{p.label}_path.csv"
            with open(f, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["s", "q1", "q2"])
                for row in p.path:
                    w.writerow([repr(float(v)) for v in row])
            written.append(f)
        return written


def _min_separation(locs):
    d = np.hypot(*(locs[:, None, :] - locs[None, :, :]).transpose(2, 0, 1))
    return float(d[~np.eye(len(locs), dtype=bool)].min())


def _try_step(params, locs, indices, t_new, delta):
    """Track every point to ``t_new``; None when isolation cannot be certified."""
    fld = equal_mass_homotopy(params, t_new)
    tols = _search_tolerances(_params_at(params, t_new))
    radius = _min_separation(locs) / 3
    new, status = newton_batch(fld, locs, tols.grad_tol, 1e-3 * tols.merge_tol)
    if not np.all(status == "converged"):
        return None
    if np.any(np.hypot(*(new - locs).T) > radius):
        return None
    for p, k in zip(new, indices):
        c = classify(fld, p, tols, check=False)
        if c.degenerate or c.morse_index != k:
            return None
        ball = Ball(tuple(p), min(delta, radius / 2))
        if not validate_isolation(fld, ball, tols=ToleranceSet.for_field(fld, ball)):
            return None
    return new


def march(params: LagrangeParams, start_locs, indices, delta, t_steps):
    """Continue the points from t = 0 to 1, halving the step on failure down to ``MIN_STEP``."""
    base = 1.0 / t_steps
    t = 0.0
    locs = np.array(start_locs, dtype=float)
    path = [(0.0, locs.copy())]
    trace = [{"t": 0.0, "step": 0.0, "isolated": True}]
    while t < 1.0 - 1e-15:
        next_node = min(1.0, (np.floor(t / base + 1e-9) + 1) * base)
        h = next_node - t
        while True:
            t_new = 1.0 if t + h > 1.0 - 1e-15 else t + h
            new = _try_step(params, locs, indices, t_new, delta)
            if new is not None:
                break
            log.info("isolation not certified at t=%.6g with step %.3g; halving", t_new, h)
            trace.append({"t": t_new, "step": h, "isolated": False})
            h *= 0.5
            if h < MIN_STEP:
                raise IsolationLost(f"isolation lost near t={t_new:.6g}", t=t_new)
        t, locs = t_new, new
        path.append((t, locs.copy()))
        trace.append({"t": t, "step": h, "isolated": True})
    return path, trace


def theorem_a_pipeline(params: LagrangeParams, delta: float = 0.05, t_steps: int = 8, seed: int = 0,
                       grid_n: int = 16) -> LagrangeReport:
    """Local homology of l₁…l₅ at both ends of the equal-mass homotopy, with the points tracked between."""
    if t_steps < 2:
        raise BadParameter("t_steps must be at least 2")
    start_params = _params_at(params, 0.0)
    start = locate_all(start_params, fld=equal_mass_homotopy(params, 0.0))
    indices = [c.morse_index for c in start]
    path, trace = march(params, [c.q for c in start], indices, delta, t_steps)

    end_field = params.field()
    end = locate_all(params, fld=end_field)
    tracked = path[-1][1]
    for c, q in zip(end, tracked):
        if np.hypot(*(c.q - q)) > 1e-8:
            raise CensusMismatch("tracked points do not match the census at t=1",
                                 found=[e.as_dict() for e in end])

    cache = {}

    def homology_at(fld, c):
        key = (fld.descriptor, round(c.location[0], 10), round(c.location[1], 10))
        if key not in cache:
            cache[key] = local_homology(fld, Ball(c.location, delta), seed=seed, grid_n=grid_n)
        return cache[key]

    fld0 = equal_mass_homotopy(params, 0.0)
    points = []
    for i, label in enumerate(LABELS):
        r0 = homology_at(fld0, start[i])
        r1 = homology_at(end_field, end[i])
        checks = {}
        for r in (r0, r1):
            for k, v in r.checks.items():
                checks[k] = checks.get(k, True) and bool(v)
        p_path = [(t, q[i, 0], q[i, 1]) for t, q in path]
        points.append(PointReport(label, start[i], end[i], tuple(r0.betti), tuple(r1.betti), checks, p_path))
    return LagrangeReport(params, delta, seed, points, trace)
