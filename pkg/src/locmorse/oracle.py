"""Brute-force local homology from cubical sublevel sets.

For an isolated critical point x₀ with value c, the local homology is
H(X, X∖{x₀}) with X = B ∩ {f ≤ c}. On an (N+1)×(N+1) vertex grid over the
disk B of radius R (so x₀ is a grid vertex), X is the cubical complex of
cells whose vertices all satisfy f ≤ c, and the punctured set is replaced by
the subcomplex A of cells with every vertex at distance ≥ R/2 from x₀.

The relative complex C(X)/C(A) is spanned by cells of X∖A. Its Betti
numbers are read off combinatorially so large grids stay cheap:

* β₀ counts components of X that avoid A entirely;
* β₂ counts closed sheets: components of X∖A squares, glued along edges
  outside A, in which every such edge borders exactly two squares of X;
* β₁ follows from the relative Euler characteristic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import complex as cx
from .errors import BadParameter, GridBudgetExceeded
from .field import ScalarField

MAX_GRID = 4096


@dataclass
class CubicalComplex:
    """Cells of X on the grid, with a flag for membership in A."""

    vertices: np.ndarray  # (nv, 2) integer grid coordinates
    vertex_in_A: np.ndarray
    edges: np.ndarray  # (ne, 2) vertex indices
    edge_in_A: np.ndarray
    squares: np.ndarray  # (nf, 4) edge indices: bottom, top, left, right
    square_in_A: np.ndarray

    def relative_euler(self):
        return int((~self.vertex_in_A).sum() - (~self.edge_in_A).sum() + (~self.square_in_A).sum())


@dataclass
class OracleResult:
    betti: tuple
    n: int
    radius: float
    level: float

    def as_dict(self):
        return {"betti": list(self.betti), "n": self.n, "radius": self.radius, "level": self.level}


def sublevel_complex(fld: ScalarField, center, radius: float, n: int, level: float | None = None,
                     inner: float | None = None) -> CubicalComplex:
    """Cubical sublevel complex of ``fld`` on an n×n-cell grid over the disk of ``radius`` about ``center``."""
    if n < 2 or n % 2:
        raise BadParameter("n must be an even number of cells per side (so the centre is a vertex)")
    if n > MAX_GRID:
        raise GridBudgetExceeded(f"n={n} exceeds the grid budget of {MAX_GRID}")
    center = np.asarray(center, dtype=float)
    inner = radius / 2 if inner is None else inner
    h = 2 * radius / n
    ij = np.arange(n + 1) - n // 2
    I, J = np.meshgrid(ij, ij, indexing="ij")
    pts = center + h * np.stack([I, J], axis=-1)
    with np.errstate(all="ignore"):
        vals = fld.eval_fn(pts)
    if level is None:
        level = float(fld.eval_fn(center))
    rho = h * np.hypot(I, J)
    # the 1e-12 slack keeps the exactly-level vertices on symmetric grids inside X
    in_x = (rho <= radius * (1 + 1e-12)) & np.isfinite(vals) & (vals <= level + 1e-12 * max(1.0, abs(level)))
    far = rho >= inner

    vid = -np.ones(I.shape, dtype=np.int64)
    vid[in_x] = np.arange(in_x.sum())
    verts = np.stack([I[in_x], J[in_x]], axis=-1)

    # horizontal edges (i,j)-(i+1,j) then vertical (i,j)-(i,j+1)
    h_ok = in_x[:-1, :] & in_x[1:, :]
    v_ok = in_x[:, :-1] & in_x[:, 1:]
    hid = -np.ones(h_ok.shape, dtype=np.int64)
    hid[h_ok] = np.arange(h_ok.sum())
    vid_e = -np.ones(v_ok.shape, dtype=np.int64)
    vid_e[v_ok] = h_ok.sum() + np.arange(v_ok.sum())
    edges = np.concatenate([
        np.stack([vid[:-1, :][h_ok], vid[1:, :][h_ok]], axis=-1),
        np.stack([vid[:, :-1][v_ok], vid[:, 1:][v_ok]], axis=-1),
    ]).reshape(-1, 2)
    edge_far = np.concatenate([(far[:-1, :] & far[1:, :])[h_ok], (far[:, :-1] & far[:, 1:])[v_ok]])

    s_ok = in_x[:-1, :-1] & in_x[1:, :-1] & in_x[:-1, 1:] & in_x[1:, 1:]
    squares = np.stack([hid[:, :-1][s_ok], hid[:, 1:][s_ok], vid_e[:-1, :][s_ok], vid_e[1:, :][s_ok]], axis=-1)
    square_far = (far[:-1, :-1] & far[1:, :-1] & far[:-1, 1:] & far[1:, 1:])[s_ok]
    return CubicalComplex(verts, far[in_x], edges, edge_far, squares.reshape(-1, 4), square_far)


def _components(n_nodes, pairs):
    if n_nodes == 0:
        return 0, np.zeros(0, dtype=np.int64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n_nodes, n_nodes))
    return connected_components(g, directed=False)


def relative_betti(K: CubicalComplex) -> tuple:
    nv, ne = len(K.vertices), len(K.edges)
    # β₀: components of X without an A vertex
    n0, lab = _components(nv, K.edges)
    touches = np.zeros(n0, dtype=bool)
    touches[lab[K.vertex_in_A]] = True
    b0 = int((~touches).sum())

    # β₂: closed sheets of non-A squares
    live = np.flatnonzero(~K.square_in_A)
    b2 = 0
    if live.size:
        incid = np.zeros(ne, dtype=np.int64)
        np.add.at(incid, K.squares.ravel(), 1)
        inner_edge = ~K.edge_in_A
        free = (inner_edge & (incid == 1))[K.squares[live]].any(axis=1)
        # squares glued along a shared non-A edge
        sq = np.repeat(np.arange(live.size), 4)
        ed = K.squares[live].ravel()
        keep = inner_edge[ed]
        sq, ed = sq[keep], ed[keep]
        order = np.argsort(ed, kind="stable")
        sq, ed = sq[order], ed[order]
        same = ed[1:] == ed[:-1]
        pairs = np.stack([sq[:-1][same], sq[1:][same]], axis=-1)
        nc, slab = _components(live.size, pairs)
        open_ = np.zeros(nc, dtype=bool)
        open_[slab[free]] = True
        b2 = int((~open_).sum())

    b1 = b0 + b2 - K.relative_euler()
    return (b0, b1, b2)


def relative_betti_dense(K: CubicalComplex) -> tuple:
    """The same numbers from GF(2) ranks of the relative boundary matrices (small grids only)."""
    V = np.flatnonzero(~K.vertex_in_A)
    E = np.flatnonzero(~K.edge_in_A)
    F = np.flatnonzero(~K.square_in_A)
    vpos = -np.ones(len(K.vertices), dtype=np.int64)
    vpos[V] = np.arange(V.size)
    epos = -np.ones(len(K.edges), dtype=np.int64)
    epos[E] = np.arange(E.size)
    d1 = np.zeros((V.size, E.size), dtype=np.uint8)
    for col, e in enumerate(E):
        for v in K.edges[e]:
            if vpos[v] >= 0:
                d1[vpos[v], col] ^= 1
    d2 = np.zeros((E.size, F.size), dtype=np.uint8)
    for col, f in enumerate(F):
        for e in K.squares[f]:
            if epos[e] >= 0:
                d2[epos[e], col] ^= 1
    r1, r2 = cx.rank(d1), cx.rank(d2)
    return (V.size - r1, E.size - r1 - r2, F.size - r2)


def oracle_homology(fld: ScalarField, center, radius: float, n: int = 128, level: float | None = None) -> OracleResult:
    """Local homology ranks of ``fld`` at ``center`` from an n×n-cell cubical grid."""
    K = sublevel_complex(fld, center, radius, n, level)
    lvl = float(fld.eval_fn(np.asarray(center, dtype=float))) if level is None else level
    return OracleResult(relative_betti(K), n, radius, lvl)
