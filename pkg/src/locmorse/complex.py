"""GF(2) chain complexes of planar Morse functions and their homology."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DegenerateGenerator, NotAComplex, ShapeMismatch

DEGREES = (0, 1, 2)


# --- dense GF(2) linear algebra -----------------------------------------------------


def gf2(M):
    return (np.asarray(M, dtype=np.int64) % 2).astype(np.uint8)


def row_reduce(M):
    """Reduced row-echelon form over GF(2) and the pivot columns."""
    R = gf2(M).copy()
    m, n = R.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(R[row:, col])
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    return R, pivots


def rank(M) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return len(row_reduce(M)[1])


def nullspace(M):
    """Columns spanning ker M over GF(2)."""
    M = gf2(M)
    m, n = M.shape
    if n == 0:
        return np.zeros((0, 0), dtype=np.uint8)
    if m == 0:
        return np.eye(n, dtype=np.uint8)
    R, pivots = row_reduce(M)
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((n, len(free)), dtype=np.uint8)
    for j, fcol in enumerate(free):
        basis[fcol, j] = 1
        for r, pcol in enumerate(pivots):
            basis[pcol, j] = R[r, fcol]
    return basis


def matmul(A, B):
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.shape[1] != B.shape[0]:
        raise ShapeMismatch(f"cannot compose {A.shape} with {B.shape}")
    return gf2(A @ B)


# --- chain complexes ----------------------------------------------------------------


@dataclass
class ChainComplex:
    generators: dict  # degree -> list of critical-point ids
    boundary: dict  # degree k (1, 2) -> |C_{k-1}| x |C_k| GF(2) matrix

    def dim(self, k):
        return len(self.generators.get(k, []))

    def d(self, k):
        if k in self.boundary:
            return self.boundary[k]
        return np.zeros((self.dim(k - 1), self.dim(k)), dtype=np.uint8)


def build_complex(crits, conns) -> ChainComplex:
    bad = [c.id for c in crits if c.degenerate]
    if bad:
        raise DegenerateGenerator(f"degenerate generators {bad}: re-perturb with a fresh seed")
    gens = {k: [c.id for c in crits.by_index(k)] for k in DEGREES}
    for k in DEGREES:
        if gens[k] != list(conns.generators[k]):
            raise ShapeMismatch("connection matrix does not match the critical set")
    return ChainComplex(gens, {k: gf2(conns.matrices[k]) for k in (1, 2)})


def verify_d_squared(cx: ChainComplex) -> bool:
    return not matmul(cx.d(1), cx.d(2)).any()


@dataclass
class HomologyResult:
    betti: tuple
    generators: dict = dc_field(default_factory=dict)
    provenance: dict = dc_field(default_factory=dict)

    def as_dict(self):
        return {
            "betti": list(self.betti),
            "generators": [list(self.generators.get(k, [])) for k in DEGREES],
            "provenance": self.provenance,
        }


def homology(cx: ChainComplex, provenance=None) -> HomologyResult:
    if not verify_d_squared(cx):
        raise NotAComplex("boundary operator does not square to zero")
    ranks = {k: rank(cx.d(k)) for k in (1, 2)}
    ranks[0] = ranks[3] = 0
    betti = tuple(cx.dim(k) - ranks[k] - ranks[k + 1] for k in DEGREES)
    return HomologyResult(betti, dict(cx.generators), dict(provenance or {}))


def euler_characteristic(values) -> int:
    return sum((-1) ** k * v for k, v in enumerate(values))


# --- induced maps -------------------------------------------------------------------


def cycles(cx: ChainComplex, k):
    return nullspace(cx.d(k)) if k > 0 else np.eye(cx.dim(0), dtype=np.uint8)


def boundaries(cx: ChainComplex, k):
    return cx.d(k + 1) if k < 2 else np.zeros((cx.dim(2), 0), dtype=np.uint8)


def induced_rank(phi_k, src: ChainComplex, dst: ChainComplex, k) -> int:
    """Rank of the map H_k(src) → H_k(dst) induced by the chain map component ``phi_k``."""
    Z = cycles(src, k)
    B = boundaries(dst, k)
    if Z.shape[1] == 0:
        return 0
    img = matmul(phi_k, Z)
    return rank(np.hstack([B, img])) - rank(B)


def same_induced_map(phi_a, phi_b, src: ChainComplex, dst: ChainComplex, k) -> bool:
    """True when two chain maps agree on H_k: (φ_a − φ_b)(Z_k) ⊂ B_k."""
    Z = cycles(src, k)
    if Z.shape[1] == 0:
        return True
    B = boundaries(dst, k)
    diff = matmul(gf2(np.asarray(phi_a, dtype=np.int64) + phi_b), Z)
    return rank(np.hstack([B, diff])) == rank(B)
