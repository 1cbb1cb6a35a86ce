"""Interior Neumann solver for non-radial conductivities.

The unknown is expanded as ``u(r, theta) = sum_a phi_a(theta) U_a(r)`` with
the angular basis ``phi = [1, cos k theta (k=1..K), sin k theta (k=1..K)]``
and continuous piecewise-linear ``U_a`` on the radial panels of the
conductivity's :class:`~gptlab.basis.DiskGrid`. The Galerkin system uses the
grid's own quadrature, so ``sigma`` is only ever needed at the grid nodes and
the discrete energy is exactly ``volume_integrate(grid, sigma |grad u|^2)``.

Regularity at the origin is imposed by ``U_a(0) = 0`` for ``a >= 1``; the
constant null space is removed by ``U_0(R) = 0``, which makes the trace
zero-mean.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .basis import BoundaryFunction
from .errors import SolverError
from .ntd import NtDOperator


def angular_basis(order, theta):
    """Values and derivatives of ``[1, cos k t, sin k t]``, each of shape ``(2K+1, len(theta))``."""
    k = np.arange(1, order + 1)[:, None]
    kt = k * theta[None, :]
    phi = np.vstack([np.ones((1, theta.size)), np.cos(kt), np.sin(kt)])
    dphi = np.vstack([np.zeros((1, theta.size)), -k * np.sin(kt), k * np.cos(kt)])
    return phi, dphi


class FourierGalerkinSolver:
    """Factorised Galerkin system for ``div(sigma grad u) = 0`` with Neumann data on ``|x| = R``."""

    def __init__(self, grid, sigma_values):
        self.grid = grid
        self.order = K = grid.angular_order
        self.n_ang = M = 2 * K + 1
        sigma_values = np.asarray(sigma_values, dtype=float)
        if sigma_values.shape != grid.shape:
            raise ValueError("sigma values must live on the grid nodes")
        edges = grid.panel_edges
        self.n_panels = P = edges.size - 1
        g = grid.gauss_order
        self.phi, self.dphi = angular_basis(K, grid.theta)
        wt = 2 * np.pi / grid.n_theta

        rho = grid.r.reshape(P, g)
        wq = grid.radial_weights.reshape(P, g)
        a, b = edges[:-1, None], edges[1:, None]
        h = b - a
        psi_l, psi_r = (b - rho) / h, (rho - a) / h
        dpsi_l, dpsi_r = -1.0 / h, 1.0 / h
        self._psi = (psi_l, psi_r, h)

        sv = sigma_values.reshape(P, g, grid.n_theta) * wt
        A = np.einsum("al,pgl,bl->pgab", self.phi, sv, self.phi, optimize=True)
        B = np.einsum("al,pgl,bl->pgab", self.dphi, sv, self.dphi, optimize=True)
        inv_r2 = wq / rho**2

        def block(dx, dy, x, y):
            return np.einsum("pg,pgab->pab", wq * dx * dy * np.ones_like(rho), A) + np.einsum(
                "pg,pgab->pab", inv_r2 * x * y, B
            )

        k_ll = block(dpsi_l, dpsi_l, psi_l, psi_l)
        k_lr = block(dpsi_l, dpsi_r, psi_l, psi_r)
        k_rr = block(dpsi_r, dpsi_r, psi_r, psi_r)

        ia, ib = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
        rows, cols, vals = [], [], []
        p = np.arange(P)[:, None, None]
        for (ni, nj), blk in (((0, 0), k_ll), ((0, 1), k_lr), ((1, 0), np.transpose(k_lr, (0, 2, 1))), ((1, 1), k_rr)):
            rows.append(((p + ni) * M + ia).ravel())
            cols.append(((p + nj) * M + ib).ravel())
            vals.append(blk.ravel())
        n_dof = (P + 1) * M
        stiff = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_dof, n_dof)
        ).tocsc()

        keep = np.ones(n_dof, dtype=bool)
        keep[1:M] = False  # U_a(0) = 0 for a >= 1
        keep[P * M] = False  # U_0(R) = 0
        self._keep = np.flatnonzero(keep)
        self.n_dof = n_dof
        try:
            self._lu = splu(stiff[self._keep][:, self._keep].tocsc())
        except RuntimeError as exc:
            raise SolverError(f"singular Galerkin stiffness matrix: {exc}") from exc

    @classmethod
    def for_conductivity(cls, sigma):
        return cls(sigma.grid, sigma.values)

    def _boundary_dofs(self, max_order):
        K, M, P = self.order, self.n_ang, self.n_panels
        if max_order > K:
            raise ValueError(f"order {max_order} exceeds the grid's angular order {K}")
        n = np.arange(1, max_order + 1)
        return P * M + np.concatenate([n, K + n])

    def solve(self, data):
        """Nodal coefficients ``U`` of shape ``(P+1, 2K+1[, m])`` for Neumann data.

        ``data`` is a :class:`BoundaryFunction` or an array of flat coefficient
        vectors (columns) of order at most ``K``.
        """
        vec = data.vector if isinstance(data, BoundaryFunction) else np.asarray(data, dtype=float)
        cols = vec.reshape(vec.shape[0], -1)
        n_data = cols.shape[0] // 2
        rhs = np.zeros((self.n_dof, cols.shape[1]))
        rhs[self._boundary_dofs(n_data)] = np.pi * self.grid.radius * cols
        sol = np.zeros_like(rhs)
        sol[self._keep] = self._lu.solve(rhs[self._keep])
        if not np.all(np.isfinite(sol)):
            raise SolverError("non-finite Galerkin solution")
        shape = (self.n_panels + 1, self.n_ang) + ((cols.shape[1],) if vec.ndim > 1 else ())
        return sol.reshape(shape)

    def trace(self, U, max_order=None):
        """Flat trace coefficients ``[c_1..c_N, s_1..s_N]`` of a solution."""
        N = self.order if max_order is None else max_order
        K = self.order
        n = np.arange(1, N + 1)
        return U[-1][np.concatenate([n, K + n])]

    def ntd(self):
        """Dense ``Lambda_sigma`` of order ``K``; symmetric because ``Lambda[i, j] = pi R e_i^T S^-1 e_j``."""
        eye = np.eye(2 * self.order)
        U = self.solve(eye)
        return NtDOperator(self.grid.radius, dense=self.trace(U))

    def gradient(self, U):
        """Polar gradient components ``(u_r, u_theta / r)`` at the grid nodes (single solution)."""
        psi_l, psi_r, h = self._psi
        P, g = psi_l.shape
        U0, U1 = U[:-1], U[1:]
        du = ((U1 - U0) / h)[:, None, :] * np.ones((1, g, 1))
        uq = psi_l[..., None] * U0[:, None, :] + psi_r[..., None] * U1[:, None, :]
        rho = self.grid.r.reshape(P, g)
        gr = du.reshape(P * g, -1) @ self.phi
        gt = (uq / rho[..., None]).reshape(P * g, -1) @ self.dphi
        return gr, gt

    def values(self, U):
        psi_l, psi_r, _ = self._psi
        uq = psi_l[..., None] * U[:-1][:, None, :] + psi_r[..., None] * U[1:][:, None, :]
        return uq.reshape(-1, self.n_ang) @ self.phi
