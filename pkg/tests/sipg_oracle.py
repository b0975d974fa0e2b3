"""Direct dense assembly of the interior-penalty Laplacian.

Deliberately independent of the package's separable/patch evaluation:
basis polynomials are built as explicit polynomial objects, and the cell
and face integrals are pointwise quadrature sums over the full tensor
grid of each cell or face.  Small meshes only.
"""

from itertools import product

import numpy as np

from sumfact.basis import gauss_lobatto_points, gauss_rule, penalty


def _lagrange_polys(nodes):
    polys = []
    for j, xj in enumerate(nodes):
        p = np.poly1d([1.0])
        for m, xm in enumerate(nodes):
            if m != j:
                p = p * np.poly1d([1.0, -xm]) / (xj - xm)
        polys.append(p)
    return polys


def assemble_sipg_dense(k: int, level: int, dim: int) -> np.ndarray:
    n = 2**level
    h = 2.0**-level
    K = k + 1
    axis_dofs = n * K
    N = axis_dofs**dim
    gamma = penalty(k, h, h)

    nodes = gauss_lobatto_points(k)
    polys = _lagrange_polys(nodes)
    dpolys = [p.deriv() for p in polys]
    rule = gauss_rule(k + 2)
    qp, qw = rule.points, rule.weights
    q = len(qp)

    val = np.array([[p(x) for x in qp] for p in polys])  # (K, q)
    der = np.array([[p(x) for x in qp] for p in dpolys]) / h  # physical slope
    val0 = np.array([p(0.0) for p in polys])
    val1 = np.array([p(1.0) for p in polys])
    der0 = np.array([p(0.0) for p in dpolys]) / h
    der1 = np.array([p(1.0) for p in dpolys]) / h

    locals_ = list(product(range(K), repeat=dim))

    def dof(cell, local):
        return sum((cell[a] * K + local[a]) * axis_dofs**a for a in range(dim))

    def tensor_grid(vecs):
        # outer product over tensor axes 0..dim-1 (grid axes in that order)
        g = np.array(1.0)
        for v in vecs:
            g = np.multiply.outer(g, v)
        return g

    w_cell = tensor_grid([qw] * dim) * h**dim
    w_face = tensor_grid([qw] * (dim - 1)) * h ** (dim - 1)

    # one local cell block, shared by every cell of the uniform mesh
    vals = {l: tensor_grid([val[l[a]] for a in range(dim)]) for l in locals_}
    grads = {
        l: [
            tensor_grid([der[l[a]] if a == b else val[l[a]] for a in range(dim)])
            for b in range(dim)
        ]
        for l in locals_
    }
    cell_block = np.zeros((len(locals_), len(locals_)))
    for i, li in enumerate(locals_):
        for j, lj in enumerate(locals_):
            integrand = sum(grads[li][b] * grads[lj][b] for b in range(dim))
            cell_block[i, j] = np.sum(w_cell * integrand)

    A = np.zeros((N, N))
    for cell in product(range(n), repeat=dim):
        idx = [dof(cell, l) for l in locals_]
        A[np.ix_(idx, idx)] += cell_block

    # face terms: traces and average slopes on the tangential quadrature grid
    def tangential(l, axis):
        return tensor_grid([val[l[a]] for a in range(dim) if a != axis])

    for axis in range(dim):
        # interior faces between cells (c) and (c+1) along `axis`
        for cell in product(range(n), repeat=dim):
            if cell[axis] == n - 1:
                continue
            left = cell
            right = tuple(c + 1 if a == axis else c for a, c in enumerate(cell))
            entries = []  # (dof, jump trace, average slope) on the face grid
            for l in locals_:
                t = tangential(l, axis)
                entries.append((dof(left, l), val1[l[axis]] * t, 0.5 * der1[l[axis]] * t))
                entries.append((dof(right, l), -val0[l[axis]] * t, 0.5 * der0[l[axis]] * t))
            for di, jump_i, avg_i in entries:
                for dj, jump_j, avg_j in entries:
                    A[di, dj] += np.sum(
                        w_face * (gamma * jump_i * jump_j - avg_i * jump_j - jump_i * avg_j)
                    )
        # domain boundary faces: full outward-normal slope, no jump partner
        for cell in product(range(n), repeat=dim):
            for side in (0, 1):
                if cell[axis] != (0 if side == 0 else n - 1):
                    continue
                trace_v = val0 if side == 0 else val1
                # outward normal flips the slope sign on the low side
                trace_d = -der0 if side == 0 else der1
                entries = []
                for l in locals_:
                    t = tangential(l, axis)
                    entries.append(
                        (dof(cell, l), trace_v[l[axis]] * t, trace_d[l[axis]] * t)
                    )
                for di, u_i, dn_i in entries:
                    for dj, u_j, dn_j in entries:
                        A[di, dj] += np.sum(
                            w_face * (gamma * u_i * u_j - dn_i * u_j - u_i * dn_j)
                        )
    return A
