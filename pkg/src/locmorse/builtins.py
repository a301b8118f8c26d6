"""Named test fields used by the CLI and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadParameter
from .field import Ball, ScalarField, lagrange_potential, polynomial_field


@dataclass(frozen=True)
class Builtin:
    name: str
    field: ScalarField
    ball: Ball
    isolated: bool = True  # False: the ball deliberately holds several critical points


_POLYS = {
    # name: (coefficients, default ball, isolated)
    "quadratic-saddle": ({(2, 0): 1.0, (0, 2): -1.0}, Ball((0, 0), 0.5), True),
    "quadratic-min": ({(2, 0): 1.0, (0, 2): 1.0}, Ball((0, 0), 0.5), True),
    "quadratic-max": ({(2, 0): -1.0, (0, 2): -1.0}, Ball((0, 0), 0.5), True),
    "monkey-saddle": ({(3, 0): 1.0, (1, 2): -3.0}, Ball((0, 0), 0.5), True),
    "degenerate-saddle": ({(2, 0): 1.0, (0, 4): -1.0}, Ball((0, 0), 0.5), True),
    # (x²−1)² + y²
    "double-well": ({(4, 0): 1.0, (2, 0): -2.0, (0, 0): 1.0, (0, 2): 1.0}, Ball((0, 0), 1.5), False),
    # (x²−1)² + (y²−1)²
    "four-well": (
        {(4, 0): 1.0, (2, 0): -2.0, (0, 4): 1.0, (0, 2): -2.0, (0, 0): 2.0},
        Ball((0, 0), 1.6),
        False,
    ),
}

NAMES = tuple(_POLYS) + ("lagrange",)


def builtin(name: str, params: dict | None = None, ball: Ball | None = None) -> Builtin:
    params = dict(params or {})
    if name == "lagrange":
        try:
            m1, m2, eps = (float(params.pop(k)) for k in ("m1", "m2", "eps"))
        except KeyError as exc:
            raise BadParameter(f"lagrange field needs m1, m2, eps (missing {exc})") from None
        if params:
            raise BadParameter(f"unknown lagrange parameters {sorted(params)}")
        if ball is None:
            raise BadParameter("lagrange field needs an explicit ball")
        return Builtin(name, lagrange_potential(m1, m2, eps), ball, True)
    if name not in _POLYS:
        raise BadParameter(f"unknown builtin field {name!r}; choose from {', '.join(NAMES)}")
    if params:
        raise BadParameter(f"builtin {name!r} takes no parameters")
    coeffs, default_ball, isolated = _POLYS[name]
    return Builtin(name, polynomial_field(coeffs, name), ball or default_ball, isolated)
