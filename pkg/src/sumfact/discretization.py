"""Interior-penalty discretization of the Poisson problem on nested grids.

The mesh is the unit cube split into 2^level cells per axis.  With a
tensor-product Lagrange basis on a constant-coefficient Cartesian grid the
global operator separates per axis, so the matrix-free apply works on
two-cell-per-axis patches with one-dimensional matrices only:

* one aligned pass over the disjoint patch tiling applies both cell
  integrals, the faces interior to each patch, and the weak Dirichlet
  boundary terms;
* one shifted pass per axis applies the faces between tiling patches
  (a single Kronecker term: face coupling along the axis, mass across).

Every integral is counted exactly once; the split is validated against a
direct cell/face assembly in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._core import contract_batch
from .basis import (
    Basis1D,
    basis_1d,
    cell_matrices_1d,
    embedding_1d,
    face_coupling_1d,
    gauss_rule,
    lagrange_derivatives,
    lagrange_values,
    patch_matrices_1d,
    penalty,
    smoother_matrices_1d,
)
from .precision import PrecisionMode, contract_mode


@dataclass
class LevelMatrices:
    """Per-level one-dimensional matrices shared by all axes."""

    h: float
    n_cells: int
    M_cell: np.ndarray
    L_cell: np.ndarray
    M_patch: np.ndarray
    L_tile: np.ndarray  # interior-kind two-cell stiffness (cells + center face)
    B_left: np.ndarray  # weak Dirichlet corrections for boundary patches
    B_right: np.ndarray
    F_cross: np.ndarray  # face-only coupling for the shifted passes
    L_smooth: dict = field(default_factory=dict)  # (left_bnd, right_bnd) -> matrix


class MeshHierarchy:
    """Nested uniform DG levels on [0,1]^dim with per-level 1D matrices."""

    def __init__(self, max_level: int, degree: int, dim: int = 3,
                 min_level: int = 1, max_dofs: int = 2**24):
        if max_level < 1:
            raise ValueError("need max_level >= 1 (vertex patches want 2 cells per axis)")
        if degree < 1:
            raise ValueError("degree must be at least 1")
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if min_level < 1 or min_level > max_level:
            raise ValueError("need 1 <= min_level <= max_level")
        self.max_level = max_level
        self.min_level = min_level
        self.degree = degree
        self.dim = dim
        if self.n_dofs(max_level) > max_dofs:
            raise ValueError(
                f"level {max_level} has {self.n_dofs(max_level)} DoFs, cap is {max_dofs}"
            )
        self.basis: Basis1D = basis_1d(degree)
        self.embedding = embedding_1d(degree)
        self._levels: dict[int, LevelMatrices] = {}
        for lvl in range(min_level, max_level + 1):
            self._levels[lvl] = self._build_level(lvl)

    # ----------------------------------------------------------- geometry

    def n_cells(self, level: int) -> int:
        return 2**level

    def h(self, level: int) -> float:
        return 2.0**-level

    def axis_dofs(self, level: int) -> int:
        return self.n_cells(level) * (self.degree + 1)

    def n_dofs(self, level: int) -> int:
        return self.axis_dofs(level) ** self.dim

    def shape(self, level: int) -> tuple[int, ...]:
        return (self.axis_dofs(level),) * self.dim

    def levels(self):
        return range(self.min_level, self.max_level + 1)

    def matrices(self, level: int) -> LevelMatrices:
        return self._levels[level]

    def _build_level(self, level: int) -> LevelMatrices:
        k, h = self.degree, self.h(level)
        M_cell, L_cell = cell_matrices_1d(k, h)
        interior = patch_matrices_1d(k, h, "interior")
        left = patch_matrices_1d(k, h, "left")
        right = patch_matrices_1d(k, h, "right")
        smooth = {}
        for lb in (False, True):
            for rb in (False, True):
                kind = {(False, False): "interior", (True, False): "left",
                        (False, True): "right", (True, True): "both"}[(lb, rb)]
                smooth[(lb, rb)] = smoother_matrices_1d(k, h, kind).L
        return LevelMatrices(
            h=h,
            n_cells=self.n_cells(level),
            M_cell=M_cell,
            L_cell=L_cell,
            M_patch=interior.M,
            L_tile=interior.L,
            B_left=left.L - interior.L,
            B_right=right.L - interior.L,
            F_cross=face_coupling_1d(k, h),
            L_smooth=smooth,
        )

    # -------------------------------------------------------- index maps

    def cell_dof_indices(self, level: int, cell: tuple[int, ...]) -> np.ndarray:
        """Global indices of one cell's DoFs, local lexicographic order."""
        K = self.degree + 1
        A = self.axis_dofs(level)
        idx = np.zeros((K,) * self.dim, dtype=np.int64)
        for a in range(self.dim):
            axis_idx = cell[a] * K + np.arange(K, dtype=np.int64)
            shape = [1] * self.dim
            shape[self.dim - 1 - a] = K  # numpy axis dim-1-a holds tensor axis a
            idx = idx + (axis_idx * A**a).reshape(shape)
        return idx.reshape(-1)

    def patch_dof_indices(self, level: int, shift: tuple[int, ...],
                          patch: tuple[int, ...]) -> np.ndarray:
        """Global indices of a two-cell-per-axis patch, local lexicographic order."""
        K = self.degree + 1
        A = self.axis_dofs(level)
        B = 2 * K
        idx = np.zeros((B,) * self.dim, dtype=np.int64)
        for a in range(self.dim):
            first_cell = 2 * patch[a] + shift[a]
            axis_idx = first_cell * K + np.arange(B, dtype=np.int64)
            shape = [1] * self.dim
            shape[self.dim - 1 - a] = B
            idx = idx + (axis_idx * A**a).reshape(shape)
        return idx.reshape(-1)

    def patch_counts(self, level: int, shift: tuple[int, ...]) -> tuple[int, ...]:
        """Patches per tensor axis for one tiling shift."""
        pairs = self.n_cells(level) // 2
        return tuple(pairs - s for s in shift)


def build_hierarchy(max_level: int, degree: int, dim: int = 3,
                    min_level: int = 1, max_dofs: int = 2**24) -> MeshHierarchy:
    return MeshHierarchy(max_level, degree, dim=dim, min_level=min_level, max_dofs=max_dofs)


# ------------------------------------------------------- gather / scatter


def _gather(arr: np.ndarray, starts, counts, block: int) -> np.ndarray:
    """Extract (counts..., block...) patch batches from a level array."""
    dim = arr.ndim
    sl = tuple(slice(starts[d], starts[d] + counts[d] * block) for d in range(dim))
    shape = []
    for d in range(dim):
        shape += [counts[d], block]
    w = arr[sl].reshape(shape)
    perm = list(range(0, 2 * dim, 2)) + list(range(1, 2 * dim, 2))
    return np.ascontiguousarray(w.transpose(perm))


def _scatter_add(v: np.ndarray, contrib: np.ndarray, starts, counts, block: int):
    """Accumulate patch batches back into a level array."""
    dim = v.ndim
    inv = []
    for d in range(dim):
        inv += [d, dim + d]
    back = contrib.transpose(inv).reshape(
        tuple(counts[d] * block for d in range(dim))
    )
    sl = tuple(slice(starts[d], starts[d] + counts[d] * block) for d in range(dim))
    v[sl] += back


def _contract_block_axes(w: np.ndarray, mats, mode: PrecisionMode) -> np.ndarray:
    """Contract the trailing block axes of a patch batch, tensor axis 0 first.

    ``mats[b]`` applies along numpy block axis ``b`` (tensor axis dim-1-b).
    """
    dim = w.ndim // 2
    out = w
    for b in reversed(range(dim)):
        out = contract_mode(mats[b], out, dim + b, mode)
    return out


# ------------------------------------------------------------ the operator


def apply_operator(hier: MeshHierarchy, level: int, u: np.ndarray,
                   mode: PrecisionMode = PrecisionMode.FP64) -> np.ndarray:
    """Matrix-free interior-penalty Laplacian at one level.

    Patch-tiled evaluation: the aligned disjoint tiling applies the
    separable two-cell operator (stiffness along one axis, mass along the
    others, summed over axes) plus weak boundary terms on boundary
    patches; one shifted pass per axis adds the cross-patch face coupling.
    Contraction arithmetic runs in ``mode``; low-precision modes store
    vectors in fp32.
    """
    u = np.asarray(u)
    if u.size != hier.n_dofs(level):
        raise ValueError(f"expected {hier.n_dofs(level)} entries, got {u.size}")
    lm = hier.matrices(level)
    dim = hier.dim
    K = hier.degree + 1
    B = 2 * K
    pairs = lm.n_cells // 2
    dtype = mode.storage_dtype
    arr = u.reshape(hier.shape(level)).astype(dtype, copy=False)
    v = np.zeros(hier.shape(level), dtype=dtype)

    # aligned pass: cells + interior faces (+ boundary terms on the rim)
    starts = (0,) * dim
    counts = (pairs,) * dim
    w = _gather(arr, starts, counts, B)
    out = np.zeros_like(w)
    for t in range(dim):
        mats = [lm.L_tile if b == t else lm.M_patch for b in range(dim)]
        out += _contract_block_axes(w, mats, mode)
    for t in range(dim):
        for lo, Bmat in ((True, lm.B_left), (False, lm.B_right)):
            idx = [slice(None)] * (2 * dim)
            idx[t] = slice(0, 1) if lo else slice(pairs - 1, pairs)
            idx = tuple(idx)
            mats = [Bmat if b == t else lm.M_patch for b in range(dim)]
            out[idx] += _contract_block_axes(w[idx], mats, mode)
    _scatter_add(v, out, starts, counts, B)

    # shifted passes: one per axis for the faces between tiling patches
    for t in range(dim):
        if pairs < 2:
            break
        starts = tuple(K if d == t else 0 for d in range(dim))
        counts = tuple(pairs - 1 if d == t else pairs for d in range(dim))
        w = _gather(arr, starts, counts, B)
        mats = [lm.F_cross if b == t else lm.M_patch for b in range(dim)]
        _scatter_add(v, _contract_block_axes(w, mats, mode), starts, counts, B)

    return v.reshape(-1)


def materialize_operator(hier: MeshHierarchy, level: int,
                         mode: PrecisionMode = PrecisionMode.FP64) -> np.ndarray:
    """Dense operator matrix, column by column.  Small levels only."""
    n = hier.n_dofs(level)
    A = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        A[:, j] = apply_operator(hier, level, e, mode).astype(np.float64)
        e[j] = 0.0
    return A


# ----------------------------------------------------------- quadrature ops


def _axis_points(hier, level, rule) -> np.ndarray:
    n, h = hier.n_cells(level), hier.h(level)
    return ((np.arange(n)[:, None] + rule.points[None, :]) * h).ravel()


def _grid_coords(hier, level, axis_pts):
    """Meshgrid over the level, returned in call order (x, y[, z])."""
    grids = np.meshgrid(*([axis_pts] * hier.dim), indexing="ij")
    return tuple(reversed(grids))  # numpy axis order is (slow..fast) = (z, y, x)


def _evaluate(func, coords, shape) -> np.ndarray:
    vals = np.asarray(func(*coords), dtype=np.float64)
    return np.broadcast_to(vals, shape).copy() if vals.shape != shape else vals


def _cells_view(arr, n, per_cell, dim):
    shape = []
    for _ in range(dim):
        shape += [n, per_cell]
    w = arr.reshape(shape)
    perm = list(range(0, 2 * dim, 2)) + list(range(1, 2 * dim, 2))
    return np.ascontiguousarray(w.transpose(perm))


def _cells_back(w, n, per_cell, dim):
    inv = []
    for d in range(dim):
        inv += [d, dim + d]
    return w.transpose(inv).reshape((n * per_cell,) * dim)


def assemble_rhs(hier: MeshHierarchy, level: int, f, g=None,
                 quad_points: int | None = None) -> np.ndarray:
    """Load vector: cell integrals of f v plus weak Dirichlet data terms.

    ``f`` (and ``g`` when given) are vectorized callables of the
    coordinates, f(x, y) in 2D and f(x, y, z) in 3D.  The boundary data
    contributes penalty and adjoint-consistency terms on the domain faces.
    """
    k, dim = hier.degree, hier.dim
    K = k + 1
    n, h = hier.n_cells(level), hier.h(level)
    q = quad_points or (k + 2)
    rule = gauss_rule(q)
    nodes = hier.basis.nodes
    S = lagrange_values(nodes, rule.points)  # (q, K)

    axis_pts = _axis_points(hier, level, rule)
    coords = _grid_coords(hier, level, axis_pts)
    shape = (n * q,) * dim
    vals = _evaluate(f, coords, shape)
    w_axis = np.tile(rule.weights, n) * h
    for d in range(dim):
        vals *= w_axis.reshape([-1 if i == d else 1 for i in range(dim)])

    w = _cells_view(vals, n, q, dim)
    for b in reversed(range(dim)):
        w = contract_batch(np.ascontiguousarray(S.T), w, dim + b)
    b_vec = _cells_back(w, n, K, dim)

    if g is not None:
        b_vec = b_vec + _rhs_boundary(hier, level, g, rule, S)
    return b_vec.reshape(-1)


def _rhs_boundary(hier, level, g, rule, S) -> np.ndarray:
    """Nitsche data terms integral g*(gamma v - dn v) over each domain face."""
    k, dim = hier.degree, hier.dim
    K = k + 1
    n, h = hier.n_cells(level), hier.h(level)
    q = len(rule.points)
    nodes = hier.basis.nodes
    gamma = penalty(k, h, h)
    e0 = lagrange_values(nodes, [0.0])[0]
    d0 = lagrange_derivatives(nodes, [0.0])[0] / h
    e1 = lagrange_values(nodes, [1.0])[0]
    d1 = lagrange_derivatives(nodes, [1.0])[0] / h
    normal_coef = {0: gamma * e0 + d0, 1: gamma * e1 - d1}

    out = np.zeros(hier.shape(level))
    axis_pts = _axis_points(hier, level, rule)
    w_axis = np.tile(rule.weights, n) * h
    for a in range(dim):  # tensor axis of the face normal
        d_np = dim - 1 - a
        for side in (0, 1):
            tang_axes = [b for b in range(dim) if b != a]
            grids = np.meshgrid(*([axis_pts] * (dim - 1)), indexing="ij")
            # call-order coordinates with the normal coordinate pinned
            coords = [None] * dim
            const = 0.0 if side == 0 else 1.0
            for i, b in enumerate(sorted(tang_axes, reverse=True)):
                coords[b] = grids[i]
            coords[a] = np.full_like(grids[0], const)
            vals = _evaluate(g, tuple(coords), (n * q,) * (dim - 1))
            for i in range(dim - 1):
                vals = vals * w_axis.reshape([-1 if j == i else 1 for j in range(dim - 1)])
            w = _cells_view(vals, n, q, dim - 1)
            for b in reversed(range(dim - 1)):
                w = contract_batch(np.ascontiguousarray(S.T), w, (dim - 1) + b)
            tang = _cells_back(w, n, K, dim - 1)  # (A,)*(dim-1) tangential load
            coef = normal_coef[side]
            sl = [slice(None)] * dim
            sl[d_np] = slice(0, K) if side == 0 else slice(out.shape[d_np] - K, None)
            cshape = [1] * dim
            cshape[d_np] = K
            tshape = list(tang.shape)
            tshape.insert(d_np, 1)
            out[tuple(sl)] += coef.reshape(cshape) * tang.reshape(tshape)
    return out


def interpolate(hier: MeshHierarchy, level: int, func) -> np.ndarray:
    """Nodal interpolant on the level's Gauss-Lobatto product grid."""
    n, h, K = hier.n_cells(level), hier.h(level), hier.degree + 1
    axis_pts = ((np.arange(n)[:, None] + hier.basis.nodes[None, :]) * h).ravel()
    coords = _grid_coords(hier, level, axis_pts)
    return _evaluate(func, coords, hier.shape(level)).reshape(-1)


def _quadrature_values(hier, level, u, rule, derivative_axis=None):
    """Evaluate a DoF vector (or one gradient component) at quadrature points."""
    k, dim = hier.degree, hier.dim
    K = k + 1
    n, h = hier.n_cells(level), hier.h(level)
    nodes = hier.basis.nodes
    S = lagrange_values(nodes, rule.points)
    D = lagrange_derivatives(nodes, rule.points) / h
    w = _cells_view(u.reshape(hier.shape(level)), n, K, dim)
    for b in reversed(range(dim)):
        a_field = dim - 1 - b
        mat = D if derivative_axis == a_field else S
        w = contract_batch(np.ascontiguousarray(mat), w, dim + b)
    return _cells_back(w, n, len(rule.points), dim)


def _quadrature_weight(hier, level, rule):
    n, h, dim = hier.n_cells(level), hier.h(level), hier.dim
    w_axis = np.tile(rule.weights, n) * h
    total = np.ones((len(w_axis),) * dim)
    for d in range(dim):
        total *= w_axis.reshape([-1 if i == d else 1 for i in range(dim)])
    return total


def l2_error(hier: MeshHierarchy, level: int, u_h: np.ndarray, exact,
             quad_points: int | None = None) -> float:
    """L2 distance between a DoF vector and a callable reference."""
    q = quad_points or (hier.degree + 3)
    rule = gauss_rule(q)
    axis_pts = _axis_points(hier, level, rule)
    coords = _grid_coords(hier, level, axis_pts)
    shape = (len(axis_pts),) * hier.dim
    diff = _quadrature_values(hier, level, np.asarray(u_h, float), rule)
    diff -= _evaluate(exact, coords, shape)
    return float(math.sqrt(np.sum(_quadrature_weight(hier, level, rule) * diff**2)))


def h1_seminorm_error(hier: MeshHierarchy, level: int, u_h: np.ndarray, grad_exact,
                      quad_points: int | None = None) -> float:
    """Broken H1 seminorm distance; grad_exact returns the gradient components."""
    q = quad_points or (hier.degree + 3)
    rule = gauss_rule(q)
    axis_pts = _axis_points(hier, level, rule)
    coords = _grid_coords(hier, level, axis_pts)
    shape = (len(axis_pts),) * hier.dim
    weight = _quadrature_weight(hier, level, rule)
    exact_grads = grad_exact(*coords)
    total = 0.0
    for a in range(hier.dim):
        comp = _quadrature_values(hier, level, np.asarray(u_h, float), rule,
                                  derivative_axis=a)
        comp -= np.broadcast_to(np.asarray(exact_grads[a], float), shape)
        total += float(np.sum(weight * comp**2))
    return math.sqrt(total)


# ---------------------------------------------------------- serialization


def save_vector(path, u: np.ndarray, fmt: str = "csv"):
    """Dump a level vector for debugging: CSV (index,value) or flat binary."""
    u = np.asarray(u, dtype=np.float64).ravel()
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write("index,value\n")
            for i, v in enumerate(u):
                fh.write(f"{i},{v:.17g}\n")
    elif fmt == "bin":
        u.tofile(path)
    else:
        raise ValueError(f"unknown vector format {fmt!r}")


def load_vector(path, fmt: str = "csv") -> np.ndarray:
    if fmt == "csv":
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        if data.ndim == 1:  # single row
            data = data.reshape(1, -1)
        order = np.argsort(data[:, 0])
        return data[order, 1].copy()
    if fmt == "bin":
        return np.fromfile(path, dtype=np.float64)
    raise ValueError(f"unknown vector format {fmt!r}")


# -------------------------------------------------------- model problems


@dataclass
class ModelProblem:
    """Manufactured Poisson problem: exact solution, source, gradient, data."""

    exact: callable
    rhs: callable
    gradient: callable
    boundary: callable | None = None  # None means homogeneous Dirichlet


def sine_product_problem(dim: int = 3) -> ModelProblem:
    """Product-of-sines solution; the data vanishes on the cube boundary."""
    pi = np.pi

    if dim == 3:
        exact = lambda x, y, z: np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z)
        rhs = lambda x, y, z: 3.0 * pi**2 * exact(x, y, z)

        def gradient(x, y, z):
            return (
                pi * np.cos(pi * x) * np.sin(pi * y) * np.sin(pi * z),
                pi * np.sin(pi * x) * np.cos(pi * y) * np.sin(pi * z),
                pi * np.sin(pi * x) * np.sin(pi * y) * np.cos(pi * z),
            )

    elif dim == 2:
        exact = lambda x, y: np.sin(pi * x) * np.sin(pi * y)
        rhs = lambda x, y: 2.0 * pi**2 * exact(x, y)

        def gradient(x, y):
            return (
                pi * np.cos(pi * x) * np.sin(pi * y),
                pi * np.sin(pi * x) * np.cos(pi * y),
            )

    else:
        raise ValueError("dim must be 2 or 3")
    return ModelProblem(exact=exact, rhs=rhs, gradient=gradient)
