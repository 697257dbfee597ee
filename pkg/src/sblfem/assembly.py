"""Element integrals and global assembly of the coupled two-field system.

The weak form couples the primary field u (Dirichlet constrained) and the
auxiliary field w through

    <c u, psi> + eps2^2 <grad u, grad psi> + <w, phi>
                + eps1 <grad u, grad phi> - eps1 <grad w, grad psi> = <f, psi>

for all test pairs (psi, phi).  With u unknowns ordered before w unknowns the
assembled matrix has block form

    [ M_c + eps2^2 K   -eps1 K ]
    [ eps1 K            M_1    ]

so the cross blocks cancel exactly in the quadratic form, which is the
discrete coercivity mechanism the tests probe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse

from .errors import ConfigError, MeshError
from .geometry import BoundaryCurve, ElementMap
from .refspace import tensor_quad


def unit_coefficient(x, y):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass
class ProblemConfig:
    """Continuous problem data plus the discretization parameters."""

    eps1: float
    eps2: float
    curve: BoundaryCurve
    f: Callable
    c: Callable = unit_coefficient
    kappa: float = 1.0
    p: int = 4
    quad_order: int | None = None  # Gauss points per direction, default p+3
    m: int = 2
    strip_fraction: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.eps1 <= self.eps2 <= 1.0):
            raise ConfigError(
                f"need 0 < eps1 <= eps2 <= 1, got eps1={self.eps1}, eps2={self.eps2}"
            )
        if self.p < 1:
            raise ConfigError(f"polynomial degree must be >= 1, got {self.p}")
        if self.kappa <= 0.0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if self.eps1 > self.eps2**2:
            warnings.warn(
                f"eps1={self.eps1} exceeds eps2^2={self.eps2**2}; outside the "
                "two-parameter regime eps1 <~ eps2^2 the layer structure "
                "assumed by the mesh does not apply",
                stacklevel=2,
            )

    @property
    def n_quad(self) -> int:
        return self.quad_order if self.quad_order is not None else self.p + 3


def _element_data(emap: ElementMap, p: int, nq: int, c_fn, f_fn):
    xi, eta, w_ref, vals, grads = tensor_quad(p, nq)
    pts = emap(xi, eta)
    jac = emap.jacobian(xi, eta)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if det.min() <= 0.0:
        raise MeshError(
            f"nonpositive Jacobian determinant {det.min():.3e} at a quadrature point"
        )
    w = w_ref * det
    cvals = np.asarray(c_fn(pts[:, 0], pts[:, 1]), dtype=float)
    fvals = np.asarray(f_fn(pts[:, 0], pts[:, 1]), dtype=float)
    cvals = np.broadcast_to(cvals, w.shape)
    fvals = np.broadcast_to(fvals, w.shape)

    # Physical gradients: grad_x = J^{-T} grad_ref, expanded per component.
    gxi = grads[..., 0]
    geta = grads[..., 1]
    x_xi, x_eta = jac[..., 0, 0], jac[..., 0, 1]
    y_xi, y_eta = jac[..., 1, 0], jac[..., 1, 1]
    gx = (y_eta[:, None] * gxi - y_xi[:, None] * geta) / det[:, None]
    gy = (-x_eta[:, None] * gxi + x_xi[:, None] * geta) / det[:, None]

    mass_c = vals.T @ (vals * (w * cvals)[:, None])
    mass_1 = vals.T @ (vals * w[:, None])
    stiff = gx.T @ (gx * w[:, None]) + gy.T @ (gy * w[:, None])
    load = vals.T @ (w * fvals)
    return mass_c, mass_1, stiff, load, float(cvals.min())


def element_matrices(emap: ElementMap, p: int, nq: int, c_fn, f_fn):
    """Local weighted mass, plain mass, stiffness and load for one element.

    All integrals use tensor Gauss quadrature with nq points per direction and
    physical gradients; the gradient coupling blocks of the global system
    reuse the stiffness matrix, so nothing else is needed per element.
    """
    mass_c, mass_1, stiff, load, _ = _element_data(emap, p, nq, c_fn, f_fn)
    return mass_c, mass_1, stiff, load


@dataclass
class LinearSystem:
    """Sparse system over the free dofs, u block first, then w block."""

    matrix: scipy.sparse.csr_matrix
    rhs: np.ndarray
    n_u: int
    n_w: int

    @property
    def size(self) -> int:
        return self.n_u + self.n_w


def assemble_system(mesh, dofmap_u, dofmap_w, config: ProblemConfig) -> LinearSystem:
    """Assemble the coupled system with Dirichlet rows and columns eliminated.

    Element contributions are collected as coordinate triplets in element-id
    order and summed on conversion, so the result does not depend on how the
    element loop is scheduled.  The reaction coefficient is sampled at every
    quadrature point and must stay positive.
    """
    p = config.p
    nq = config.n_quad
    n_u = dofmap_u.n_free
    n_w = dofmap_w.n_free

    rows, cols, vals = [], [], []
    rhs = np.zeros(n_u + n_w)
    c_min = np.inf
    edofs_u = dofmap_u.element_dofs
    edofs_w = dofmap_w.element_dofs

    for e in range(mesh.n_elements):
        mass_c, mass_1, stiff, load, c_lo = _element_data(
            mesh.element_map(e), p, nq, config.c, config.f
        )
        c_min = min(c_min, c_lo)
        gu = edofs_u[e]
        gw = edofs_w[e] + n_u

        uu = mass_c + config.eps2**2 * stiff
        uw = -config.eps1 * stiff
        wu = config.eps1 * stiff
        ww = mass_1

        free_u = gu >= 0
        # u-test rows
        ru = np.repeat(gu, gu.size)
        cu = np.tile(gu, gu.size)
        keep = np.repeat(free_u, gu.size) & np.tile(free_u, gu.size)
        rows.append(ru[keep])
        cols.append(cu[keep])
        vals.append(uu.ravel()[keep])

        keep = np.repeat(free_u, gw.size)
        rows.append(np.repeat(gu, gw.size)[keep])
        cols.append(np.tile(gw, gu.size)[keep])
        vals.append(uw.ravel()[keep])

        # w-test rows
        keep = np.tile(free_u, gw.size)
        rows.append(np.repeat(gw, gu.size)[keep])
        cols.append(np.tile(gu, gw.size)[keep])
        vals.append(wu.ravel()[keep])

        rows.append(np.repeat(gw, gw.size))
        cols.append(np.tile(gw, gw.size))
        vals.append(ww.ravel())

        np.add.at(rhs, gu[free_u], load[free_u])

    if not c_min > 0.0:
        raise ConfigError(
            f"reaction coefficient must satisfy c >= gamma > 0; sampled "
            f"minimum over all quadrature points is {c_min:.6g}"
        )

    n = n_u + n_w
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    if not np.all(np.isfinite(matrix.data)):
        raise MeshError("assembled matrix contains non-finite entries")
    return LinearSystem(matrix=matrix, rhs=rhs, n_u=n_u, n_w=n_w)


def dump_matrix(system: LinearSystem, path: str):
    """Write the assembled matrix in MatrixMarket coordinate format."""
    scipy.io.mmwrite(path, system.matrix.tocoo())
