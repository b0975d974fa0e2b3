"""One-dimensional ingredients of the tensor-product discretization.

Quadrature rules and Lagrange bases on Gauss-Lobatto points over the unit
interval, the per-cell mass/stiffness matrices, and the two-cell patch
matrices with interior-penalty face coupling and weak (Nitsche) boundary
terms.  Everything here is exact-quadrature double precision; the cheap
construction cost is paid once per mesh level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

BOUNDARY_KINDS = ("interior", "left", "right", "both")


@dataclass
class QuadratureRule:
    points: np.ndarray  # strictly increasing, inside [0, 1]
    weights: np.ndarray  # positive, summing to the interval length 1

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("quadrature points must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")


def gauss_rule(q: int) -> QuadratureRule:
    """Gauss-Legendre rule with q points on [0, 1], exact to degree 2q-1."""
    if q < 1:
        raise ValueError("need at least one quadrature point")
    x, w = np.polynomial.legendre.leggauss(q)
    return QuadratureRule((x + 1.0) / 2.0, w / 2.0)


def gauss_lobatto_points(k: int) -> np.ndarray:
    """The k+1 Gauss-Lobatto points on [0, 1] (endpoints included)."""
    if k < 1:
        raise ValueError("Lobatto points need degree k >= 1")
    if k == 1:
        return np.array([0.0, 1.0])
    interior, _ = roots_jacobi(k - 1, 1.0, 1.0)
    return np.concatenate(([0.0], (interior + 1.0) / 2.0, [1.0]))


def lagrange_values(nodes: np.ndarray, points) -> np.ndarray:
    """Values of the Lagrange basis over ``nodes`` at ``points`` (rows)."""
    nodes = np.asarray(nodes, dtype=float)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    n = len(nodes)
    V = np.ones((len(pts), n))
    for j in range(n):
        for m in range(n):
            if m != j:
                V[:, j] *= (pts - nodes[m]) / (nodes[j] - nodes[m])
    return V


def lagrange_derivatives(nodes: np.ndarray, points) -> np.ndarray:
    """First derivatives of the Lagrange basis at ``points`` (rows)."""
    nodes = np.asarray(nodes, dtype=float)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    n = len(nodes)
    D = np.zeros((len(pts), n))
    for j in range(n):
        for l in range(n):
            if l == j:
                continue
            term = np.full(len(pts), 1.0 / (nodes[j] - nodes[l]))
            for m in range(n):
                if m != j and m != l:
                    term *= (pts - nodes[m]) / (nodes[j] - nodes[m])
            D[:, j] += term
    return D


@dataclass
class Basis1D:
    """Lagrange basis of degree k on Gauss-Lobatto nodes with bound quadrature.

    S and D hold basis values and derivatives at the quadrature points of
    ``rule`` (one row per point).
    """

    degree: int
    nodes: np.ndarray
    rule: QuadratureRule
    S: np.ndarray
    D: np.ndarray

    def values_at(self, points) -> np.ndarray:
        return lagrange_values(self.nodes, points)

    def derivatives_at(self, points) -> np.ndarray:
        return lagrange_derivatives(self.nodes, points)


def basis_1d(k: int, rule: QuadratureRule | None = None) -> Basis1D:
    rule = rule or gauss_rule(k + 1)
    nodes = gauss_lobatto_points(k)
    return Basis1D(
        degree=k,
        nodes=nodes,
        rule=rule,
        S=lagrange_values(nodes, rule.points),
        D=lagrange_derivatives(nodes, rule.points),
    )


def penalty(k: int, h_plus: float, h_minus: float) -> float:
    """Interior-penalty coefficient k(k+1)(1/h+ + 1/h-)."""
    if h_plus <= 0 or h_minus <= 0:
        raise ValueError("cell sizes must be positive")
    return k * (k + 1) * (1.0 / h_plus + 1.0 / h_minus)


def cell_matrices_1d(k: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Mass and stiffness of one cell of size h: h*int(phi phi), (1/h)*int(phi' phi')."""
    if h <= 0:
        raise ValueError("cell size must be positive")
    rule = gauss_rule(k + 1)  # exact for the degree-2k mass integrand
    b = basis_1d(k, rule)
    W = rule.weights
    M = h * (b.S.T * W) @ b.S
    L = (1.0 / h) * (b.D.T * W) @ b.D
    return M, L


@dataclass
class PatchMatrices1D:
    """Mass and interior-penalty stiffness of a two-cell 1D patch.

    ``M`` is block-diagonal (two cell masses), ``L`` couples the cells
    through the shared face; boundary_kind selects which patch ends carry
    weak Dirichlet terms.
    """

    M: np.ndarray
    L: np.ndarray
    boundary_kind: str


class _PatchPieces:
    """Shared building blocks of every 1D patch/smoother matrix at (k, h)."""

    def __init__(self, k: int, h: float):
        self.k, self.h = k, h
        K = k + 1
        self.K = K
        b = basis_1d(k)
        M_cell, L_cell = cell_matrices_1d(k, h)
        self.M = np.zeros((2 * K, 2 * K))
        self.M[:K, :K] = M_cell
        self.M[K:, K:] = M_cell
        self.L_cells = np.zeros((2 * K, 2 * K))
        self.L_cells[:K, :K] = L_cell
        self.L_cells[K:, K:] = L_cell

        gamma = penalty(k, h, h)
        d_at = lambda x: lagrange_derivatives(b.nodes, [x])[0] / h
        v_at = lambda x: lagrange_values(b.nodes, [x])[0]

        # shared face: jump = (left trace) - (right trace), averaged slope
        jump = np.zeros(2 * K)
        jump[:K] = v_at(1.0)
        jump[K:] = -v_at(0.0)
        avg = np.zeros(2 * K)
        avg[:K] = 0.5 * d_at(1.0)
        avg[K:] = 0.5 * d_at(0.0)
        self.F_center = (
            gamma * np.outer(jump, jump) - np.outer(avg, jump) - np.outer(jump, avg)
        )

        # weak Dirichlet ends (outward normal flips the derivative sign on the left)
        e0 = np.zeros(2 * K)
        e0[:K] = v_at(0.0)
        d0 = np.zeros(2 * K)
        d0[:K] = d_at(0.0)
        self.B_left = gamma * np.outer(e0, e0) + np.outer(d0, e0) + np.outer(e0, d0)
        e1 = np.zeros(2 * K)
        e1[K:] = v_at(1.0)
        d1 = np.zeros(2 * K)
        d1[K:] = d_at(1.0)
        self.B_right = gamma * np.outer(e1, e1) - np.outer(d1, e1) - np.outer(e1, d1)

        # self-coupling halves of the faces shared with the neighbouring
        # patches; these make the smoother matrix the exact principal
        # submatrix of the global 1D operator
        self.H_left = gamma * np.outer(e0, e0) + 0.5 * (np.outer(d0, e0) + np.outer(e0, d0))
        self.H_right = gamma * np.outer(e1, e1) - 0.5 * (np.outer(d1, e1) + np.outer(e1, d1))


def patch_matrices_1d(k: int, h: float, boundary_kind: str = "interior") -> PatchMatrices1D:
    """Two-cell mass and stiffness for the disjoint-tiling operator pass.

    The stiffness holds both cell integrals plus the shared interior face;
    patch ends marked as domain boundary add the Nitsche terms.  Faces
    shared with neighbouring patches are applied in separate shifted
    passes and are deliberately absent here.
    """
    if boundary_kind not in BOUNDARY_KINDS:
        raise ValueError(f"unknown boundary kind {boundary_kind!r}")
    p = _PatchPieces(k, h)
    L = p.L_cells + p.F_center
    if boundary_kind in ("left", "both"):
        L = L + p.B_left
    if boundary_kind in ("right", "both"):
        L = L + p.B_right
    return PatchMatrices1D(M=p.M, L=L, boundary_kind=boundary_kind)


def smoother_matrices_1d(k: int, h: float, boundary_kind: str = "interior") -> PatchMatrices1D:
    """Principal-submatrix variant used by the vertex-patch smoother.

    Interior patch ends carry the self-coupling half of the neighbouring
    face terms, so L equals the restriction of the global 1D operator to
    the patch.
    """
    if boundary_kind not in BOUNDARY_KINDS:
        raise ValueError(f"unknown boundary kind {boundary_kind!r}")
    p = _PatchPieces(k, h)
    L = p.L_cells + p.F_center
    L = L + (p.B_left if boundary_kind in ("left", "both") else p.H_left)
    L = L + (p.B_right if boundary_kind in ("right", "both") else p.H_right)
    return PatchMatrices1D(M=p.M, L=L, boundary_kind=boundary_kind)


def face_coupling_1d(k: int, h: float) -> np.ndarray:
    """Face-only stiffness of a two-cell pair: the terms of the shared face.

    Used by the shifted operator passes that pick up the faces between
    tiling patches.
    """
    return _PatchPieces(k, h).F_center


def embedding_1d(k: int) -> np.ndarray:
    """Coarse-cell polynomials expressed on the two children, (2K x K).

    Row block 0 evaluates the coarse basis at the left child's nodes,
    block 1 at the right child's; prolongation of a polynomial is exact.
    """
    nodes = gauss_lobatto_points(k)
    upper = lagrange_values(nodes, nodes / 2.0)
    lower = lagrange_values(nodes, (nodes + 1.0) / 2.0)
    return np.vstack([upper, lower])
