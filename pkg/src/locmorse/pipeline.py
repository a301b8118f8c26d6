"""End-to-end local Morse homology of one isolated critical point (or isolating ball)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

from . import complex as cx
from .critpoints import CriticalSet, ToleranceSet, find_critical_points, validate_isolation
from .errors import Retryable, SaddleSaddleConnection, ValidationFailure
from .field import Ball, Perturbation, ScalarField, default_amplitude, gradient_scale, perturb
from .flow import FlowParams, locality_check
from .moduli import ConnectionMatrix, count_connections

log = logging.getLogger(__name__)

MAX_RETRIES = 5


class SpawnedOutside(ValidationFailure):
    """A critical point of the perturbed field lies outside B_δ."""


@dataclass
class LocalHomology:
    homology: cx.HomologyResult
    crits: CriticalSet
    connections: ConnectionMatrix
    chain_complex: cx.ChainComplex
    perturbed: ScalarField
    ball: Ball
    tolerances: ToleranceSet
    flow: FlowParams
    seed: int
    amplitude: float
    checks: dict = dc_field(default_factory=dict)
    attempts: list = dc_field(default_factory=list)

    @property
    def betti(self):
        return self.homology.betti


def analysis_settings(base: ScalarField, ball: Ball, tolerances=None, flow=None):
    tols = ToleranceSet.for_field(base, ball, **(tolerances or {}))
    params = FlowParams.for_ball(ball, tols.grad_tol, gradient_scale(base, ball), **(flow or {}))
    return tols, params


def perturbed_critical_set(base, ball, amplitude, seed, tols, grid_n=16):
    fld = perturb(base, ball, Perturbation(amplitude, seed=seed))
    return fld, find_critical_points(fld, ball, grid_n, tols)


def local_homology(base: ScalarField, ball: Ball, *, amplitude=None, seed=0, grid_n=16,
                   tolerances=None, flow=None, isolated=True, max_retries=MAX_RETRIES,
                   offset_check=True) -> LocalHomology:
    """Perturb → find → count → complex → homology, re-drawing the direction on generic-position failures."""
    if not ball.clear_of(base):
        raise ValidationFailure("B_2delta contains a singularity of the field")
    tols, params = analysis_settings(base, ball, tolerances, flow)
    checks = {}
    if isolated:
        checks["isolation"] = validate_isolation(base, ball, grid_n, tols)
        if not checks["isolation"]:
            raise ValidationFailure(f"{ball} is not an isolating ball of {base.descriptor}")
    if amplitude is None:
        amplitude = default_amplitude(base, ball)
    attempts = []
    for attempt in range(max_retries + 1):
        s = seed + attempt
        fld, crits = perturbed_critical_set(base, ball, amplitude, s, tols, grid_n)
        if crits.degenerate:
            attempts.append((s, "degenerate critical point"))
            continue
        if isolated:
            outside = [c.id for c in crits if ball.dist(c.q) >= ball.delta]
            if outside:
                raise SpawnedOutside(
                    f"perturbed critical points {outside} lie outside B_delta; shrink the amplitude"
                )
        try:
            conns = count_connections(fld, crits, ball, params)
            if offset_check:
                half = count_connections(fld, crits, ball, params, offset=0.5e-6 * ball.delta)
                checks["offset_stability"] = conns.same_counts(half)
        except SaddleSaddleConnection as exc:
            attempts.append((s, str(exc)))
            log.info("seed %d: %s", s, exc)
            continue
        break
    else:
        raise Retryable(f"no generic perturbation after {max_retries + 1} seeds: {attempts}")

    complex_ = cx.build_complex(crits, conns)
    checks["d_squared"] = cx.verify_d_squared(complex_)
    residuals = conns.energy_residuals(crits)
    checks["energy_identity"] = all(r <= allow for r, allow in residuals)
    checks["locality"] = all(locality_check(t, ball) for ts in conns.witnesses.values() for t in ts)
    prov = {
        "field": base.descriptor,
        "ball": {"center": list(ball.center), "delta": ball.delta},
        "seed": s,
        "amplitude": amplitude,
        "tolerances": tols.as_dict(),
    }
    hom = cx.homology(complex_, prov)
    checks["euler"] = cx.euler_characteristic(hom.betti) == cx.euler_characteristic(crits.counts())
    return LocalHomology(hom, crits, conns, complex_, fld, ball, tols, params, s, amplitude, checks, attempts)
