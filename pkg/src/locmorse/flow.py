"""Negative gradient flow: adaptive integration, limit classification, energy.

The integrator is the Dormand-Prince 5(4) pair with a PI step controller.
The energy ∫|∂ₛx|² ds rides along as an extra state component, so it is
integrated by the same quadrature as the trajectory itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadParameter, StepUnderflow
from .field import Ball, ScalarField

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4

MIN_STEP = 1e-14
SAFETY = 0.9
# PI controller exponents (Gustafsson), order 5 error estimate of a 4th order pair
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


@dataclass(frozen=True)
class FlowParams:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_time: float = 1e4
    converge_radius: float = 1e-5
    escape_margin: float = 1.5
    grad_tol: float = 1e-10
    singular_guard: float = 1e-3

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise BadParameter(f"FlowParams.{k} must be positive, got {v}")

    @classmethod
    def for_ball(cls, ball: Ball, grad_tol: float, grad_scale: float, **overrides):
        """Defaults in the ball's natural units (length δ, time δ/|∇f|)."""
        tau = ball.delta / grad_scale
        kw = dict(
            rel_tol=1e-10,
            abs_tol=1e-13 * ball.delta,
            max_time=1e5 * tau,
            converge_radius=1e-5 * ball.delta,
            escape_margin=1.5,
            grad_tol=grad_tol,
            singular_guard=1e-2 * ball.delta,
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def with_(self, **kw):
        return FlowParams(**{**self.__dict__, **kw})


@dataclass(frozen=True)
class Limit:
    kind: str  # 'converged' | 'escaped' | 'undecided'
    point_id: int | None = None

    def __str__(self):
        return f"Converged({self.point_id})" if self.kind == "converged" else self.kind.capitalize()


@dataclass(frozen=True)
class Trajectory:
    """Accepted integrator samples of a (possibly time-dependent) flow line.

    ``s`` is the integration variable (always increasing from 0); for
    backward trajectories ``q`` follows the reversed field. ``v`` holds
    dq/ds at each sample for Hermite dense output.
    """

    s: np.ndarray
    q: np.ndarray
    v: np.ndarray
    direction: str
    limit: Limit
    energy: float
    start_time: float = 0.0

    def __len__(self):
        return len(self.s)

    @property
    def start(self):
        return self.q[0]

    @property
    def end(self):
        return self.q[-1]

    def at(self, s):
        """Cubic Hermite interpolation between accepted steps."""
        s = float(s)
        k = int(np.clip(np.searchsorted(self.s, s) - 1, 0, len(self.s) - 2))
        h = self.s[k + 1] - self.s[k]
        t = (s - self.s[k]) / h
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        return h00 * self.q[k] + h10 * h * self.v[k] + h01 * self.q[k + 1] + h11 * h * self.v[k + 1]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("s,q1,q2\n")
            for s, (a, b) in zip(self.s.tolist(), self.q.tolist()):
                fh.write(f"{s!r},{a!r},{b!r}\n")


_A_FULL = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _A_FULL[_i, : len(_row)] = _row


def _dp_step(rhs, s, y, k1, h):
    K = np.empty((7, y.size))
    K[0] = k1.ravel()
    yf = y.ravel()
    for i in range(1, 7):
        yi = yf + h * (_A_FULL[i, :i] @ K[:i])
        K[i] = rhs(s + _C[i] * h, yi.reshape(y.shape)).ravel()
    y5 = yf + h * (_B @ K)
    err = h * (_E @ K)
    return y5.reshape(y.shape), err.reshape(y.shape), K[6].reshape(y.shape)


def integrate(rhs, y0, params: FlowParams, monitor=None, t_end=None, scale_floor=None, h0=None):
    """Adaptive DP5(4) integration of y' = rhs(s, y) from s = 0.

    ``monitor(s, y)`` may return a ``Limit`` to stop. Integration also stops
    at ``t_end`` (exactly) or at ``params.max_time`` (Limit 'undecided').
    ``y`` may be any float array; the error norm is the max over entries.
    Returns (s_samples, y_samples, dy_samples, limit).
    """
    y = np.array(y0, dtype=float)
    atol = params.abs_tol if scale_floor is None else scale_floor
    horizon = params.max_time if t_end is None else t_end
    s = 0.0
    f = rhs(s, y)
    if h0 is None:
        fn = np.max(np.abs(f))
        h = 1e-3 * horizon if fn == 0 else min(1e-2 * max(np.max(np.abs(y)), 1.0) / fn, 1e-3 * horizon)
        h = max(h, 1e3 * MIN_STEP)
    else:
        h = h0
    ss, ys, fs = [s], [y.copy()], [f]
    err_prev = 1e-4
    limit = None
    if monitor is not None:
        limit = monitor(s, y)
    while limit is None:
        if s >= horizon:
            limit = Limit("undecided") if t_end is None else Limit("end")
            break
        last = False
        if s + h >= horizon:
            h = horizon - s
            last = True
        # an oversized trial step may overflow; it is rejected below and h shrinks
        with np.errstate(over="ignore", invalid="ignore"):
            y_new, err, f_new = _dp_step(rhs, s, y, f, h)
        sc = atol + params.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore"):
            en = float(np.max(np.abs(err) / sc))
        if not np.isfinite(en):
            en = 1e10
        if en <= 1.0:
            s = horizon if last else s + h
            y, f = y_new, f_new
            ss.append(s)
            ys.append(y.copy())
            fs.append(f)
            en = max(en, 1e-10)
            fac = SAFETY * en ** (-_ALPHA) * err_prev**_BETA
            err_prev = en
            h *= min(5.0, max(0.2, fac))
            if monitor is not None:
                limit = monitor(s, y)
        else:
            h *= max(0.1, SAFETY * en ** (-1 / 5))
        if h < MIN_STEP and limit is None and not (last and en <= 1.0):
            raise StepUnderflow(f"adaptive step collapsed to {h:.3e} at s={s:.6g}, y={y}")
    return np.array(ss), np.array(ys), np.array(fs), limit


def _make_monitor(grad_at, crits, ball: Ball, params: FlowParams, fld_for_sing=None, converge_after=None, sign=1.0, s0=0.0):
    escape = params.escape_margin * 2 * ball.delta
    locs = np.array([c.location for c in crits]) if crits is not None and len(crits) else None
    ids = [c.id for c in crits] if locs is not None else []

    def monitor(t, y):
        q = y[:2]
        if ball.dist(q) > escape:
            return Limit("escaped")
        if fld_for_sing is not None and fld_for_sing.singular_set:
            if fld_for_sing.distance_to_singularity(q) < params.singular_guard:
                return Limit("escaped")
        if locs is None:
            return None
        s_phys = s0 + sign * t
        if converge_after is not None and not converge_after(s_phys):
            return None
        d = np.hypot(locs[:, 0] - q[0], locs[:, 1] - q[1])
        i = int(np.argmin(d))
        if d[i] <= params.converge_radius:
            if np.hypot(*grad_at(s_phys, q)) < 10 * params.grad_tol:
                return Limit("converged", ids[i])
        return None

    return monitor


def _flow_rhs(grad_at, sign, s0):
    def rhs(t, y):
        g = grad_at(s0 + sign * t, y[:2])
        v = -sign * g
        return np.array([v[0], v[1], v[0] * v[0] + v[1] * v[1]])

    return rhs


def run_flow(grad_at: Callable, x_init, crits, ball: Ball, params: FlowParams, direction="forward",
             s0=0.0, converge_after=None, fld_for_sing=None) -> Trajectory:
    """Integrate ∂ₛx = ∓∇f_s(x) with time-dependent gradient ``grad_at(s, q)``.

    For ``direction='backward'`` the physical time runs s0, s0 − t, ...
    and the reversed field is followed.
    """
    sign = 1.0 if direction == "forward" else -1.0
    rhs = _flow_rhs(grad_at, sign, s0)
    monitor = _make_monitor(grad_at, crits, ball, params, fld_for_sing, converge_after, sign, s0)
    y0 = np.array([x_init[0], x_init[1], 0.0])
    # energy is judged relative to its own size; positions relative to δ
    floor = np.array([params.abs_tol, params.abs_tol, params.abs_tol * 1e-3])
    ss, ys, fs, limit = integrate(rhs, y0, params, monitor, scale_floor=floor)
    return Trajectory(ss, ys[:, :2], fs[:, :2], direction, limit, float(ys[-1, 2]), s0)


def integrate_flow(fld: ScalarField, x_init, direction, crits, ball: Ball, params: FlowParams) -> Trajectory:
    """Autonomous flow line of −∇f (or +∇f when ``direction='backward'``)."""
    x_init = np.asarray(x_init, dtype=float)
    fld._check(x_init)
    return run_flow(lambda s, q: fld.grad_fn(q), x_init, crits, ball, params, direction, fld_for_sing=fld)


def trajectory_energy(traj: Trajectory) -> float:
    """∫|∂ₛx|² ds over the samples, by exact integration of the Hermite interpolant's derivative squared."""
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two samples")
    # 3-point Gauss-Legendre is exact for the quartic |p'(t)|²
    nodes = np.array([-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)])
    weights = np.array([5 / 9, 8 / 9, 5 / 9])
    t = 0.5 * (nodes + 1)
    h = np.diff(traj.s)[:, None, None]
    q0, q1 = traj.q[:-1, None, :], traj.q[1:, None, :]
    v0, v1 = traj.v[:-1, None, :], traj.v[1:, None, :]
    tt = t[None, :, None]
    dh00 = (6 * tt**2 - 6 * tt) / h
    dh10 = 3 * tt**2 - 4 * tt + 1
    dh01 = (-6 * tt**2 + 6 * tt) / h
    dh11 = 3 * tt**2 - 2 * tt
    dp = dh00 * q0 + dh10 * v0 + dh01 * q1 + dh11 * v1
    integrand = np.sum(dp**2, axis=-1)
    return float(np.sum(0.5 * h[:, 0, 0] * (integrand @ weights)))


def locality_check(traj: Trajectory, ball: Ball) -> bool:
    """Every sample lies in B_{2δ}."""
    return bool(np.all(ball.dist(traj.q) <= 2 * ball.delta))


def constant_trajectory(point, direction="forward") -> Trajectory:
    q = np.array([point, point], dtype=float)
    return Trajectory(np.array([0.0, 1.0]), q, np.zeros_like(q), direction, Limit("converged", None), 0.0)


def flow_map(grad_at: Callable, points, s_from: float, s_to: float, params: FlowParams):
    """Push a batch of points along ∂ₛx = −∇f_s(x) from s_from to s_to (s_to > s_from).

    One adaptive integration with a shared step serves the whole batch.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)

    def rhs(t, y):
        return -grad_at(s_from + t, y)

    _, ys, _, _ = integrate(rhs, pts, params, t_end=s_to - s_from)
    return ys[-1]
