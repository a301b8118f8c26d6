"""Critical-point search, Morse classification and the isolation test."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, asdict

import numpy as np

from .errors import BadParameter, NotCritical
from .field import Ball, ScalarField, gradient_scale, hessian_scale

MAX_NEWTON_ITER = 100
MAX_HALVINGS = 40


@dataclass(frozen=True)
class ToleranceSet:
    grad_tol: float
    merge_tol: float
    degen_tol: float

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise BadParameter(f"tolerance {k} must be positive, got {v}")

    @classmethod
    def for_field(cls, fld: ScalarField, ball: Ball, **overrides):
        """Defaults scaled to the field's gradient/Hessian magnitude on B_δ."""
        tols = dict(
            grad_tol=1e-10 * gradient_scale(fld, ball),
            merge_tol=1e-6 * ball.delta,
            degen_tol=1e-6 * hessian_scale(fld, ball),
        )
        tols.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**tols)

    def as_dict(self):
        return asdict(self)


def sym2_eig(H):
    """Closed-form eigen-decomposition of a symmetric 2×2 matrix.

    Returns ascending eigenvalues and a matrix whose columns are the
    corresponding unit eigenvectors.
    """
    a, b, c = float(H[0, 0]), float(0.5 * (H[0, 1] + H[1, 0])), float(H[1, 1])
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    lo, hi = mean - rad, mean + rad
    if rad == 0.0:
        return np.array([lo, hi]), np.eye(2)
    # two algebraically equivalent candidates; keep the better conditioned
    v1 = np.array([b, lo - a])
    v2 = np.array([lo - c, b])
    v = v1 if np.hypot(*v1) >= np.hypot(*v2) else v2
    v = v / np.hypot(*v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    w = np.array([-v[1], v[0]])
    return np.array([lo, hi]), np.column_stack([v, w])


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value: float
    hess_eigenvalues: tuple
    morse_index: int
    degenerate: bool
    id: int = -1
    eigenvectors: tuple = dc_field(default=(), repr=False, compare=False)

    @property
    def q(self):
        return np.array(self.location)

    def direction(self, which):
        """Unit eigenvector for the 'negative' (lower) or 'positive' (upper) eigenvalue."""
        V = np.array(self.eigenvectors)
        return V[:, 0] if which == "negative" else V[:, 1]

    def as_dict(self):
        return dict(
            id=self.id,
            location=list(self.location),
            value=self.value,
            hess_eigenvalues=list(self.hess_eigenvalues),
            morse_index=self.morse_index,
            degenerate=self.degenerate,
        )


def classify(fld: ScalarField, p, tols: ToleranceSet, check=True, id=-1) -> CriticalPoint:
    p = np.asarray(p, dtype=float)
    g = fld.grad(p)
    if check and np.hypot(*g) > tols.grad_tol:
        raise NotCritical(f"|grad f| = {np.hypot(*g):.3e} exceeds grad_tol at {tuple(p)}")
    vals, vecs = sym2_eig(fld.hessian(p))
    index = int(np.sum(vals < -tols.degen_tol))
    degenerate = bool(np.min(np.abs(vals)) < tols.degen_tol)
    return CriticalPoint(
        location=(float(p[0]), float(p[1])),
        value=float(fld.value(p)),
        hess_eigenvalues=(float(vals[0]), float(vals[1])),
        morse_index=index,
        degenerate=degenerate,
        id=id,
        eigenvectors=tuple(map(tuple, vecs)),
    )


@dataclass
class CriticalSet:
    points: list
    field_descriptor: str = ""
    budget_exceeded: list = dc_field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def by_index(self, k):
        return [c for c in self.points if c.morse_index == k]

    def nearest(self, q):
        if not self.points:
            return None, np.inf
        locs = np.array([c.location for c in self.points])
        d = np.hypot(*(locs - np.asarray(q)).T)
        i = int(np.argmin(d))
        return self.points[i], float(d[i])

    @property
    def degenerate(self):
        return [c for c in self.points if c.degenerate]

    def counts(self):
        return tuple(len(self.by_index(k)) for k in range(3))


def _solve_steps(H, g):
    """Newton steps H⁻¹g for a batch, falling back to least squares on singular H."""
    det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
    scale = np.maximum(np.abs(H).reshape(len(H), -1).max(axis=1), 1e-300)
    ok = np.abs(det) > 1e-14 * scale**2
    step = np.empty_like(g)
    if ok.any():
        step[ok] = np.linalg.solve(H[ok], g[ok][..., None])[..., 0]
    for i in np.flatnonzero(~ok):
        step[i] = np.linalg.lstsq(H[i], g[i], rcond=None)[0]
    return step


def newton_batch(fld: ScalarField, seeds, grad_tol, step_tol, max_iter=MAX_NEWTON_ITER, max_radius=None, center=None):
    """Damped Newton on ∇f = 0 from each seed (vectorised).

    Returns (points, status) where status is 'converged', 'diverged' or
    'budget'. A seed converges once |∇f| ≤ grad_tol and the last Newton step
    is below ``step_tol`` (the second condition lets degenerate roots, where
    Newton is only linear, settle before merging).
    """
    x = np.array(seeds, dtype=float).reshape(-1, 2)
    n = len(x)
    status = np.full(n, "budget", dtype=object)
    active = np.ones(n, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            xa = x[idx]
            g = fld.grad_fn(xa)
            gn = np.hypot(g[:, 0], g[:, 1])
            H = fld.hess_fn(xa)
            bad = ~np.isfinite(gn) | ~np.isfinite(H).all(axis=(1, 2))
            step = np.zeros_like(xa)
            good = ~bad
            if good.any():
                step[good] = _solve_steps(H[good], g[good])
            snorm = np.hypot(step[:, 0], step[:, 1])
            done = good & (gn <= grad_tol) & (snorm <= step_tol)
            # backtracking: halve until |∇f| decreases
            t = np.ones(len(idx))
            trial = xa - step
            pending = good & ~done
            for _ in range(MAX_HALVINGS):
                if not pending.any():
                    break
                gt = fld.grad_fn(trial[pending])
                gtn = np.hypot(gt[:, 0], gt[:, 1])
                better = np.isfinite(gtn) & (gtn < gn[pending])
                sub = np.flatnonzero(pending)
                pending[sub[better]] = False
                t[sub[~better]] *= 0.5
                trial[sub[~better]] = xa[sub[~better]] - t[sub[~better], None] * step[sub[~better]]
            stuck = pending  # no decrease after all halvings
            newx = np.where((good & ~done & ~stuck)[:, None], trial, xa)
            # a stuck seed that already meets grad_tol is as converged as it gets
            done = done | (stuck & (gn <= grad_tol))
            x[idx] = newx
            status[idx[done]] = "converged"
            dead = bad | (stuck & ~done)
            if max_radius is not None:
                far = np.hypot(*(newx - center).T) > max_radius
                dead |= far & ~done
            status[idx[dead]] = "diverged"
            active[idx[done | dead]] = False
    return x, status


def find_critical_points(fld: ScalarField, ball: Ball, grid_n: int, tols: ToleranceSet, seeds=None) -> CriticalSet:
    """All critical points of ``fld`` in B_{2δ}, found by Newton from a dense seed grid."""
    if grid_n < 8:
        raise ValueError("grid_n must be at least 8")
    if seeds is None:
        seeds = ball.grid(grid_n, radius_factor=2.0)
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    seeds = seeds[fld.distance_to_singularity(seeds) > 1e-3 * ball.delta]
    pts, status = newton_batch(
        fld, seeds, tols.grad_tol, step_tol=1e-3 * tols.merge_tol,
        max_radius=10 * 2 * ball.delta, center=ball.c,
    )
    accepted = []
    budget = []
    for i in range(len(pts)):
        if status[i] == "budget":
            budget.append(tuple(seeds[i]))
            continue
        if status[i] != "converged":
            continue
        p = pts[i]
        if ball.dist(p) > 2 * ball.delta + tols.merge_tol:
            continue
        if any(np.hypot(*(p - a)) <= tols.merge_tol for a in accepted):
            continue
        accepted.append(p)
    crits = []
    for p in accepted:
        g = fld.grad(p)
        if np.hypot(*g) <= tols.grad_tol:
            crits.append(classify(fld, p, tols, check=False))
    crits.sort(key=lambda c: (c.morse_index, c.location[0], c.location[1]))
    crits = [CriticalPoint(**{**c.__dict__, "id": i}) for i, c in enumerate(crits)]
    return CriticalSet(crits, fld.descriptor, budget)


def validate_isolation(base: ScalarField, ball: Ball, grid_n: int = 16, tols: ToleranceSet | None = None) -> bool:
    """Δ(f̃, x₀) membership: x₀ is the only critical point of ``base`` in B_{2δ}."""
    if not ball.clear_of(base):
        return False
    tols = tols or ToleranceSet.for_field(base, ball)
    crits = find_critical_points(base, ball, grid_n, tols)
    return bool(len(crits) == 1 and ball.dist(crits[0].q) <= tols.merge_tol)
