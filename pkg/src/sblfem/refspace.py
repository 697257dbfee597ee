"""Gauss quadrature, Gauss-Lobatto-Legendre nodes, and tensor Lagrange bases.

Everything lives on the reference interval [0, 1] and the reference square
[0, 1]^2.  The nodal basis is the Lagrange basis at the GLL nodes, evaluated
with the barycentric formula so that degrees up to ~20 stay well conditioned.
"""

from __future__ import annotations

import functools
from typing import Callable, NamedTuple

import numpy as np


class QuadratureRule(NamedTuple):
    """A 1D quadrature rule on [0, 1], exact for polynomials of degree <= 2n-1."""

    points: np.ndarray
    weights: np.ndarray


def _legendre(p: int, x: np.ndarray):
    """Values of P_p, P_p' and P_p'' at x (on [-1, 1]) via the three-term recurrence.

    The derivative recurrences are obtained by differentiating
    (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}, so they are stable for every x,
    including the endpoints.
    """
    x = np.asarray(x, dtype=float)
    pk_m1 = np.ones_like(x)
    pk = x.copy()
    dk_m1 = np.zeros_like(x)
    dk = np.ones_like(x)
    sk_m1 = np.zeros_like(x)
    sk = np.zeros_like(x)
    if p == 0:
        return pk_m1, dk_m1, sk_m1
    for k in range(1, p):
        pk_p1 = ((2 * k + 1) * x * pk - k * pk_m1) / (k + 1)
        dk_p1 = ((2 * k + 1) * (pk + x * dk) - k * dk_m1) / (k + 1)
        sk_p1 = ((2 * k + 1) * (2 * dk + x * sk) - k * sk_m1) / (k + 1)
        pk_m1, pk = pk, pk_p1
        dk_m1, dk = dk, dk_p1
        sk_m1, sk = sk, sk_p1
    return pk, dk, sk


def legendre_deriv(p: int, x) -> np.ndarray:
    """P_p'(x) on [-1, 1] (used by tests as the defining equation of GLL nodes)."""
    return _legendre(p, np.asarray(x, dtype=float))[1]


@functools.lru_cache(maxsize=None)
def gll_nodes(p: int) -> np.ndarray:
    """Gauss-Lobatto-Legendre nodes of degree p, ascending on [0, 1].

    The p+1 nodes are the endpoints plus the roots of P_p', found by a
    Newton iteration with bisection safeguard inside the brackets provided
    by the Gauss nodes of P_p (the roots of P_p' interlace them).
    """
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if p == 1:
        return np.array([0.0, 1.0])
    # Brackets: consecutive roots of P_p enclose exactly one root of P_p'.
    gauss, _ = np.polynomial.legendre.leggauss(p)
    roots = np.empty(p - 1)
    for k in range(p - 1):
        lo, hi = gauss[k], gauss[k + 1]
        flo = _legendre(p, np.array(lo))[1]
        x = 0.5 * (lo + hi)
        for _ in range(100):
            f, df = _legendre(p, np.array(x))[1:3]
            step = f / df
            x_new = x - step
            if not (lo < x_new < hi):
                x_new = 0.5 * (lo + hi)  # bisect when Newton leaves the bracket
            if f * flo > 0:
                lo = x
            else:
                hi = x
            if abs(x_new - x) <= 1e-15:
                x = x_new
                break
            x = x_new
        roots[k] = x
    roots = 0.5 * (roots - roots[::-1])  # enforce exact antisymmetry
    nodes = np.concatenate(([0.0], 0.5 * (1.0 + roots), [1.0]))
    return nodes


@functools.lru_cache(maxsize=None)
def gauss_rule(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n points on [0, 1]; weights sum to one."""
    if n < 1:
        raise ValueError(f"need at least one point, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


class TensorBasis:
    """Nodal Lagrange tensor-product basis of degree p on the reference square.

    Local (flattened) numbering is row major in (eta, xi): index
    l = i_eta * (p+1) + i_xi.  All evaluators are vectorized over points and
    use barycentric weights; points that coincide with a node fall back to the
    Kronecker property and the spectral differentiation matrix.
    """

    # Points closer than this to a node take the Taylor path below; the
    # barycentric derivative formula loses ~eps/|x - x_j| digits there.
    NODE_SNAP = 1e-8

    def __init__(self, p: int):
        self.p = int(p)
        self.nodes = gll_nodes(p)
        diff = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        self.bary = 1.0 / np.prod(diff, axis=1)
        # Differentiation matrix at the nodes and its powers; since the basis
        # is polynomial, Taylor series in D^m are exact.
        d = (self.bary[None, :] / self.bary[:, None]) / (
            self.nodes[:, None] - self.nodes[None, :] + np.eye(p + 1)
        )
        np.fill_diagonal(d, 0.0)
        np.fill_diagonal(d, -d.sum(axis=1))
        self.diff_matrix = d
        self._dpow = [np.eye(p + 1), d, d @ d, d @ d @ d, d @ d @ d @ d]

    @property
    def n_basis(self) -> int:
        return (self.p + 1) ** 2

    def eval_1d(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives of all p+1 Lagrange polynomials at points x.

        Returns arrays of shape (npts, p+1).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = x[:, None] - self.nodes[None, :]
        near = np.abs(d) < self.NODE_SNAP
        hit = near.any(axis=1)
        d_safe = np.where(near, 1.0, d)
        q = self.bary[None, :] / d_safe
        s = q.sum(axis=1)
        vals = q / s[:, None]
        # l_j'(x) = -l_j(x) * (1/d_j + s'/s) with s' = -sum_k q_k / d_k
        sp = -(q / d_safe).sum(axis=1)
        ders = -vals * (1.0 / d_safe + (sp / s)[:, None])
        if hit.any():
            rows = np.flatnonzero(hit)
            idx = np.argmax(near[rows], axis=1)
            delta = x[rows] - self.nodes[idx]
            i0, d1, d2, d3, d4 = self._dpow
            dl = delta[:, None]
            vals[rows] = i0[idx] + dl * d1[idx] + dl**2 / 2 * d2[idx] + dl**3 / 6 * d3[idx]
            ders[rows] = d1[idx] + dl * d2[idx] + dl**2 / 2 * d3[idx] + dl**3 / 6 * d4[idx]
        return vals, ders

    def eval(self, xi, eta) -> tuple[np.ndarray, np.ndarray]:
        """All basis values and reference gradients at scattered points.

        Returns (values, grads) of shapes (npts, (p+1)^2) and
        (npts, (p+1)^2, 2); gradients are with respect to (xi, eta).
        """
        vx, dx = self.eval_1d(xi)
        vy, dy = self.eval_1d(eta)
        n = vx.shape[0]
        vals = np.einsum("na,nb->nab", vy, vx).reshape(n, -1)
        gxi = np.einsum("na,nb->nab", vy, dx).reshape(n, -1)
        geta = np.einsum("na,nb->nab", dy, vx).reshape(n, -1)
        return vals, np.stack([gxi, geta], axis=-1)

    def node_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Tensor node coordinates (Xi, Eta), each of shape (p+1, p+1)."""
        return np.meshgrid(self.nodes, self.nodes, indexing="xy")


@functools.lru_cache(maxsize=None)
def tensor_basis(p: int) -> TensorBasis:
    return TensorBasis(p)


def gll_interpolate(f: Callable, p: int) -> np.ndarray:
    """Coefficients (nodal values) of the tensor GLL interpolant of f.

    Returns the (p+1, p+1) grid indexed [i_eta, i_xi]; flattening it row major
    matches the local numbering of :class:`TensorBasis`.
    """
    xi, eta = tensor_basis(p).node_grid()
    return np.asarray(f(xi, eta), dtype=float)


@functools.lru_cache(maxsize=None)
def tensor_quad(p: int, nq: int):
    """Reference-square tables for degree-p basis at an nq x nq Gauss grid.

    Returns (xi, eta, w, V, G): flattened quad coordinates and weights plus
    basis values (nq^2, nb) and reference gradients (nq^2, nb, 2), with the
    quadrature points ordered row major in (eta, xi).
    """
    rule = gauss_rule(nq)
    xi, eta = np.meshgrid(rule.points, rule.points, indexing="xy")
    w = np.outer(rule.weights, rule.weights)
    xi, eta, w = xi.ravel(), eta.ravel(), w.ravel()
    vals, grads = tensor_basis(p).eval(xi, eta)
    return xi, eta, w, vals, grads
