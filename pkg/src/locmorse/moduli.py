"""Mod-2 counts of isolated flow lines between critical points of adjacent index.

In the plane the only such lines are saddle separatrices: the two unstable
branches of an index-1 point (flowing down to minima) and its two stable
branches (flowing up, in reversed time, to maxima).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .critpoints import CriticalPoint, CriticalSet
from .errors import DegeneratePoint, LocalityViolation, SaddleSaddleConnection, UndecidedBranch
from .field import Ball, ScalarField
from .flow import FlowParams, Trajectory, integrate_flow, locality_check


def _branches(saddle: CriticalPoint, offset: float, which: str):
    if saddle.morse_index != 1:
        raise ValueError(f"critical point {saddle.id} has index {saddle.morse_index}, not 1")
    if saddle.degenerate:
        raise DegeneratePoint(f"critical point {saddle.id} is degenerate")
    v = saddle.direction(which)
    x = saddle.q
    return x + offset * v, x - offset * v


def unstable_branches(fld: ScalarField, saddle: CriticalPoint, offset: float):
    """Seeds displaced along the eigenvector of the negative Hessian eigenvalue."""
    return _branches(saddle, offset, "negative")


def stable_branches(fld: ScalarField, saddle: CriticalPoint, offset: float):
    """Seeds displaced along the eigenvector of the positive Hessian eigenvalue."""
    return _branches(saddle, offset, "positive")


@dataclass
class Branch:
    saddle_id: int
    kind: str  # 'unstable' (forward) | 'stable' (backward)
    sign: int
    trajectory: Trajectory

    @property
    def target(self):
        lim = self.trajectory.limit
        return lim.point_id if lim.kind == "converged" else None


@dataclass
class ConnectionMatrix:
    """GF(2) boundary data: ``matrices[k]`` is |Crit_{k-1}| × |Crit_k|.

    Rows/columns follow the order of ``generators[k-1]`` / ``generators[k]``.
    """

    generators: dict
    matrices: dict
    tallies: dict
    witnesses: dict = dc_field(default_factory=dict)
    branches: list = dc_field(default_factory=list)

    def entry(self, k, target_id, source_id):
        i = self.generators[k - 1].index(target_id)
        j = self.generators[k].index(source_id)
        return int(self.matrices[k][i, j])

    def same_counts(self, other) -> bool:
        return all(np.array_equal(self.matrices[k], other.matrices[k]) for k in (1, 2))

    def energy_residuals(self, crits: CriticalSet):
        """|E − (f(x⁻) − f(x⁺))| and its allowance for every witness trajectory."""
        by_id = {c.id: c for c in crits}
        out = []
        for (k, hi, lo), trajs in self.witnesses.items():
            drop = by_id[hi].value - by_id[lo].value
            for tr in trajs:
                out.append((abs(tr.energy - drop), 1e-6 * abs(drop) + 1e-9))
        return out


def _check_branch(br: Branch, crits_by_id, ball: Ball, want_index: int):
    lim = br.trajectory.limit
    if lim.kind == "undecided":
        raise UndecidedBranch(
            f"branch {br.kind}{br.sign:+d} of saddle {br.saddle_id} neither converged nor escaped; "
            "raise max_time or re-perturb"
        )
    if lim.kind != "converged":
        return None
    target = crits_by_id[lim.point_id]
    if target.morse_index == 1:
        raise SaddleSaddleConnection(
            f"saddle {br.saddle_id} connects to saddle {target.id}; re-perturb with a fresh seed"
        )
    if target.morse_index != want_index:
        raise RuntimeError(f"branch reached index {target.morse_index}, expected {want_index}")
    if not locality_check(br.trajectory, ball):
        raise LocalityViolation(
            f"connection {br.saddle_id}->{target.id} leaves B_2delta; shrink the perturbation amplitude"
        )
    return target


def count_connections(fld: ScalarField, crits: CriticalSet, ball: Ball, params: FlowParams,
                      offset: float | None = None) -> ConnectionMatrix:
    if offset is None:
        offset = 1e-6 * ball.delta
    if crits.degenerate:
        raise DegeneratePoint(f"degenerate critical points {[c.id for c in crits.degenerate]}")
    gens = {k: [c.id for c in crits.by_index(k)] for k in range(3)}
    by_id = {c.id: c for c in crits}
    mats = {k: np.zeros((len(gens[k - 1]), len(gens[k])), dtype=np.uint8) for k in (1, 2)}
    tallies = {}
    witnesses = {}
    branches = []
    for saddle in crits.by_index(1):
        for kind, seeds, direction, want in (
            ("unstable", unstable_branches(fld, saddle, offset), "forward", 0),
            ("stable", stable_branches(fld, saddle, offset), "backward", 2),
        ):
            for sign, seed in zip((+1, -1), seeds):
                tr = integrate_flow(fld, seed, direction, crits, ball, params)
                br = Branch(saddle.id, kind, sign, tr)
                branches.append(br)
                target = _check_branch(br, by_id, ball, want)
                if target is None:
                    continue
                if kind == "unstable":
                    key = (1, saddle.id, target.id)
                    i, j = gens[0].index(target.id), gens[1].index(saddle.id)
                    mats[1][i, j] ^= 1
                else:
                    key = (2, target.id, saddle.id)
                    i, j = gens[1].index(saddle.id), gens[2].index(target.id)
                    mats[2][i, j] ^= 1
                tallies[key] = tallies.get(key, 0) + 1
                witnesses.setdefault(key, []).append(tr)
    return ConnectionMatrix(gens, mats, tallies, witnesses, branches)
