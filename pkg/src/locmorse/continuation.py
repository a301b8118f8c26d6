"""Continuation maps between the Morse complexes of two perturbations.

The time-dependent function switches from f_α to f_β over s ∈ (−T, T)
through a smooth monotone profile γ with max γ′ = 1/T. Index-preserving
flow lines of the resulting non-autonomous gradient flow are counted mod 2.

Counting strategy in the plane:

* index 0 → 0: the only line leaving a minimum c₁ sits at c₁ until s = −T;
  integrate it forward and see which minimum of f_β it reaches.
* index 2 → 2: symmetric; integrate backward from each maximum of f_β.
* index 1 → 1: push the unstable curve of c₁ (an f_α separatrix pair)
  through the switching window and count its crossings with the stable
  curve of c₂ under f_β.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import complex as cx
from .critpoints import CriticalSet
from .errors import BadParameter, ShapeMismatch, TransversalityFailure, UndecidedBranch
from .field import BUMP, Ball, ScalarField
from .flow import FlowParams, Trajectory, integrate, integrate_flow, run_flow

_E2 = np.exp(2.0)


def gamma(s, T):
    """Switching profile: 0 for s ≤ −T, 1 for s ≥ T, γ(0) = ½."""
    s = np.asarray(s, dtype=float)
    left = (s > -T) & (s <= 0)
    right = (s > 0) & (s < T)
    with np.errstate(divide="ignore", over="ignore"):
        gl = 0.5 * _E2 * np.exp(-2.0 * T / np.where(left, s + T, 1.0))
        gr = 1.0 - 0.5 * _E2 * np.exp(-2.0 * T / np.where(right, T - s, 1.0))
    out = np.where(s >= T, 1.0, 0.0)
    out = np.where(left, gl, out)
    out = np.where(right, gr, out)
    return out if out.ndim else float(out)


def gamma_prime(s, T):
    s = np.asarray(s, dtype=float)
    inside = (s > -T) & (s < T)
    u = np.where(s <= 0, s + T, T - s)
    u = np.where(inside, u, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        d = 0.5 * _E2 * np.exp(-2.0 * T / u) * 2.0 * T / u**2
    out = np.where(inside, d, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HomotopyFamily:
    f_alpha: ScalarField
    f_beta: ScalarField
    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise BadParameter("T must be positive")

    def weight(self, s):
        return gamma(s, self.T)

    def grad_at(self, s, q):
        if s <= -self.T:
            return self.f_alpha.grad_fn(q)
        if s >= self.T:
            return self.f_beta.grad_fn(q)
        w = gamma(s, self.T)
        return (1.0 - w) * self.f_alpha.grad_fn(q) + w * self.f_beta.grad_fn(q)

    def with_T(self, T):
        return HomotopyFamily(self.f_alpha, self.f_beta, T)


def homotopy_field(fam: HomotopyFamily, s: float) -> ScalarField:
    """f_s = (1 − γ(s))·f_α + γ(s)·f_β; exactly f_α for s ≤ −T and f_β for s ≥ T."""
    if s <= -fam.T:
        return fam.f_alpha
    if s >= fam.T:
        return fam.f_beta
    w = float(gamma(s, fam.T))
    a, b = fam.f_alpha, fam.f_beta
    return ScalarField(
        lambda q: (1 - w) * a.eval_fn(q) + w * b.eval_fn(q),
        lambda q: (1 - w) * a.grad_fn(q) + w * b.grad_fn(q),
        lambda q: (1 - w) * a.hess_fn(q) + w * b.hess_fn(q),
        tuple(dict.fromkeys(a.singular_set + b.singular_set)),
        f"homotopy(s={s:.6g}, T={fam.T:.6g})",
    )


def integrate_nonautonomous(fam: HomotopyFamily, x_init, crits_alpha: CriticalSet, crits_beta: CriticalSet,
                            ball: Ball, params: FlowParams, direction="forward", s_start=None) -> Trajectory:
    """Flow line of ∂ₛx + ∇f_s(x) = 0.

    Forward runs start at ``s_start`` (default −T) and may only converge to
    critical points of f_β once s ≥ T; backward runs start at +T and may
    only converge to critical points of f_α once s ≤ −T.
    """
    T = fam.T
    if direction == "forward":
        s0 = -T if s_start is None else s_start
        crits, ready = crits_beta, (lambda s: s >= T)
    else:
        s0 = T if s_start is None else s_start
        crits, ready = crits_alpha, (lambda s: s <= -T)
    sing = fam.f_alpha if fam.f_alpha.singular_set else None
    return run_flow(fam.grad_at, np.asarray(x_init, dtype=float), crits, ball, params, direction,
                    s0=s0, converge_after=ready, fld_for_sing=sing)


# --- index 1 → 1: curve crossings -------------------------------------------------------


def _separatrix_polyline(fld, crit, crits, ball, params, offset, which, direction):
    """Both branches of a saddle's unstable ('negative') or stable ('positive') curve.

    The saddle itself is omitted; the two seeds are joined by a straight
    segment through it, which keeps crossings at the saddle transversal.
    """
    v = crit.direction(which)
    trajs = [integrate_flow(fld, crit.q + sg * offset * v, direction, crits, ball, params) for sg in (-1, 1)]
    pts = np.vstack([trajs[0].q[::-1], trajs[1].q])
    return pts, trajs


def _freeze_outside(grad_at, ball: Ball, radius):
    """Damp the gradient smoothly to zero between ``radius`` and ``2*radius``.

    Inside ``radius`` the field is untouched; points that wander further
    out stop moving, which keeps the batch map bounded without making the
    right-hand side discontinuous.
    """
    def g(s, q):
        out = grad_at(s, q)
        r = ball.dist(q) / (2.0 * radius)
        far = r > 0.5
        if np.any(far):
            out = out * BUMP.derivatives(np.maximum(r, 0.5))[0][:, None]
        return out

    return g


def _thin(pts, spacing):
    """Drop interior vertices closer than ``spacing`` to the last kept one."""
    keep = [0]
    for i in range(1, len(pts) - 1):
        if np.hypot(*(pts[i] - pts[keep[-1]])) >= spacing:
            keep.append(i)
    keep.append(len(pts) - 1)
    return pts[keep]


def _push(fam, pts, params, ball):
    radius = params.escape_margin * 2 * ball.delta
    grad = _freeze_outside(fam.grad_at, ball, radius)
    # batch map: position accuracy ~1e-8 δ is plenty for counting crossings
    batch = params.with_(rel_tol=max(params.rel_tol, 1e-8), abs_tol=max(params.abs_tol, 1e-10 * ball.delta))

    def rhs(t, y):
        return -grad(-fam.T + t, y)

    _, ys, _, _ = integrate(rhs, pts, batch, t_end=2 * fam.T, scale_floor=batch.abs_tol)
    return ys[-1]


def _pushed_curve(fam, src, params, ball, h_max, max_rounds=12):
    """Image of the polyline ``src`` under the switching-window flow map, refined until segments are short."""
    img = _push(fam, src, params, ball)
    for _ in range(max_rounds):
        seg = np.hypot(*(np.diff(img, axis=0)).T)
        long_ = np.flatnonzero(seg > h_max)
        if long_.size == 0:
            break
        mids = 0.5 * (src[long_] + src[long_ + 1])
        mid_img = _push(fam, mids, params, ball)
        src = np.insert(src, long_ + 1, mids, axis=0)
        img = np.insert(img, long_ + 1, mid_img, axis=0)
    return src, img


def _crossings(P, Q):
    """Index pairs (i, j) and parameters (t, u) of proper crossings of segments P_i P_{i+1} and Q_j Q_{j+1}."""
    a0, a1 = P[:-1, None, :], P[1:, None, :]
    b0, b1 = Q[None, :-1, :], Q[None, 1:, :]
    r = a1 - a0
    sv = b1 - b0
    denom = r[..., 0] * sv[..., 1] - r[..., 1] * sv[..., 0]
    w = b0 - a0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[..., 0] * sv[..., 1] - w[..., 1] * sv[..., 0]) / denom
        u = (w[..., 0] * r[..., 1] - w[..., 1] * r[..., 0]) / denom
    # half-open on both parameters so a crossing through a shared vertex counts once
    hit = (denom != 0) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
    ii, jj = np.nonzero(hit)
    return ii, jj, t[ii, jj], u[ii, jj]


def _inside(pts, ball, radius):
    return ball.dist(pts) <= radius


@dataclass
class ChainMapResult:
    matrices: dict  # degree -> |Crit_k(f_β)| x |Crit_k(f_α)|
    generators_alpha: dict
    generators_beta: dict
    T: float
    witnesses: dict = dc_field(default_factory=dict)
    energy_margins: list = dc_field(default_factory=list)
    unresolved: dict = dc_field(default_factory=dict)  # (c1, c2) -> crossings on chords too long to witness

    def __getitem__(self, k):
        return self.matrices[k]

    @property
    def energy_bound_ok(self):
        return all(m >= 0 for m in self.energy_margins)


def _sup_difference(fam, ball, n=48):
    pts = ball.grid(n, radius_factor=2.0)
    with np.errstate(all="ignore"):
        d = np.abs(fam.f_beta.eval_fn(pts) - fam.f_alpha.eval_fn(pts))
    d = d[np.isfinite(d)]
    return float(d.max()) if d.size else 0.0


def _chain_map_once(fam, crits_alpha, crits_beta, ball, params, offset):
    T = fam.T
    ga = {k: [c.id for c in crits_alpha.by_index(k)] for k in range(3)}
    gb = {k: [c.id for c in crits_beta.by_index(k)] for k in range(3)}
    A = {c.id: c for c in crits_alpha}
    B = {c.id: c for c in crits_beta}
    mats = {k: np.zeros((len(gb[k]), len(ga[k])), dtype=np.uint8) for k in range(3)}
    witnesses = {}
    margins = []
    sup = _sup_difference(fam, ball)
    # the switching term contributes at most sup|f_β − f_α| · 2T · max γ′ = 2·sup
    slack = 2.0 * sup

    def bound_margin(c1, c2, energy):
        allowed = A[c1].value - B[c2].value + slack
        return allowed + 1e-9 * max(1.0, abs(allowed)) - energy

    def settle(traj, pool, want, what):
        lim = traj.limit
        if lim.kind == "undecided":
            raise UndecidedBranch(f"{what}: continuation trajectory undecided")
        if lim.kind != "converged":
            return None
        tgt = pool[lim.point_id]
        if tgt.morse_index != want:
            raise TransversalityFailure(f"{what}: lands on index-{tgt.morse_index} point {tgt.id}")
        return tgt

    for c1 in crits_alpha.by_index(0):
        tr = integrate_nonautonomous(fam, c1.q, crits_alpha, crits_beta, ball, params, "forward")
        c2 = settle(tr, B, 0, f"min {c1.id}")
        if c2 is not None:
            mats[0][gb[0].index(c2.id), ga[0].index(c1.id)] ^= 1
            witnesses.setdefault((0, c1.id, c2.id), []).append(tr)
            margins.append(bound_margin(c1.id, c2.id, tr.energy))

    for c2 in crits_beta.by_index(2):
        tr = integrate_nonautonomous(fam, c2.q, crits_alpha, crits_beta, ball, params, "backward")
        c1 = settle(tr, A, 2, f"max {c2.id}")
        if c1 is not None:
            mats[2][gb[2].index(c2.id), ga[2].index(c1.id)] ^= 1
            witnesses.setdefault((2, c1.id, c2.id), []).append(tr)
            margins.append(bound_margin(c1.id, c2.id, tr.energy))

    radius = params.escape_margin * 2 * ball.delta
    h_max = 2e-2 * ball.delta
    stable_curves = {}
    unresolved = {}
    for c2 in crits_beta.by_index(1):
        S, trajs = _separatrix_polyline(fam.f_beta, c2, crits_beta, ball, params, offset, "positive", "backward")
        for tr in trajs:
            settle(tr, B, 2, f"stable branch of {c2.id}")
        stable_curves[c2.id] = _thin(S, 0.25 * h_max)
    for c1 in crits_alpha.by_index(1):
        P, trajs = _separatrix_polyline(fam.f_alpha, c1, crits_alpha, ball, params, offset, "negative", "forward")
        for tr in trajs:
            settle(tr, A, 0, f"unstable branch of {c1.id}")
        src, img = _pushed_curve(fam, _thin(P, 0.25 * h_max), params, ball, h_max)
        for c2 in crits_beta.by_index(1):
            S = stable_curves[c2.id]
            ii, jj, tt, _ = _crossings(img, S)
            # judge each crossing by where it happens: under strong expansion a chord with both
            # ends in the damped zone can still be the only piece of the image that meets S
            hit = img[ii] + tt[:, None] * (img[ii + 1] - img[ii])
            ok = _inside(hit, ball, radius * 0.999)
            ii, tt = ii[ok], tt[ok]
            if ii.size % 2:
                mats[1][gb[1].index(c2.id), ga[1].index(c1.id)] ^= 1
            # energy witnesses only where the segment is resolved; a long chord has no usable preimage
            seg = np.hypot(*(img[ii + 1] - img[ii]).T)
            resolved = seg <= h_max
            unresolved[(c1.id, c2.id)] = unresolved.get((c1.id, c2.id), 0) + int((~resolved).sum())
            for i, t in zip(ii[resolved], tt[resolved]):
                p = src[i] + t * (src[i + 1] - src[i])
                run = integrate(lambda s, y: _energy_rhs(fam, s, y), np.array([p[0], p[1], 0.0]), params,
                                t_end=2 * T, scale_floor=np.array([params.abs_tol] * 2 + [params.abs_tol * 1e-3]))
                y_end = run[1][-1]
                energy = (A[c1.id].value - float(fam.f_alpha.eval_fn(p))) + y_end[2] + (
                    float(fam.f_beta.eval_fn(y_end[:2])) - B[c2.id].value)
                witnesses.setdefault((1, c1.id, c2.id), []).append(p)
                margins.append(bound_margin(c1.id, c2.id, energy))
    return ChainMapResult(mats, ga, gb, T, witnesses, margins, {k: v for k, v in unresolved.items() if v})


def _energy_rhs(fam, t, y):
    v = -fam.grad_at(-fam.T + t, y[:2])
    return np.array([v[0], v[1], v @ v])


def chain_map(fam: HomotopyFamily, crits_alpha: CriticalSet, crits_beta: CriticalSet, ball: Ball,
              params: FlowParams, offset=None, max_retries=3) -> ChainMapResult:
    """φ^{βα}: counts of index-preserving switching-flow lines, per degree."""
    if crits_alpha.degenerate or crits_beta.degenerate:
        raise TransversalityFailure("continuation needs nondegenerate critical sets")
    offset = 1e-6 * ball.delta if offset is None else offset
    last = None
    for attempt in range(max_retries + 1):
        try:
            return _chain_map_once(fam, crits_alpha, crits_beta, ball, params, offset)
        except TransversalityFailure as exc:
            last = exc
            fam = fam.with_T(fam.T * 1.5)
    raise last


def verify_chain_map(phi, d_alpha: cx.ChainComplex, d_beta: cx.ChainComplex) -> bool:
    """φ ∂_α = ∂_β φ over GF(2) in degrees 1 and 2."""
    mats = phi.matrices if isinstance(phi, ChainMapResult) else phi
    for k in (0, 1, 2):
        m = np.asarray(mats[k])
        if m.shape != (d_beta.dim(k), d_alpha.dim(k)):
            raise ShapeMismatch(f"phi_{k} has shape {m.shape}, expected {(d_beta.dim(k), d_alpha.dim(k))}")
    for k in (1, 2):
        lhs = cx.matmul(mats[k - 1], d_alpha.d(k))
        rhs = cx.matmul(d_beta.d(k), mats[k])
        if not np.array_equal(lhs, rhs):
            return False
    return True


def induces_isomorphism(phi, d_alpha: cx.ChainComplex, d_beta: cx.ChainComplex) -> bool:
    mats = phi.matrices if isinstance(phi, ChainMapResult) else phi
    ha = cx.homology(d_alpha).betti
    hb = cx.homology(d_beta).betti
    if ha != hb:
        return False
    return all(cx.induced_rank(mats[k], d_alpha, d_beta, k) == ha[k] for k in range(3))
