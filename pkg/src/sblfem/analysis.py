"""Energy and balanced norms, manufactured validation case, error reports.

The energy norm of a field pair is
    |||(u, w)|||^2 = ||u||_0^2 + eps2^2 ||grad u||_0^2 + ||w||_0^2
and the balanced norm reweights it as
    |||(u, w)|||_B^2 = ||u||_0^2 + eps2 ||grad u||_0^2 + (eps2/eps1) ||w||_0^2,
which keeps the boundary-layer components O(1) as the parameters vanish.
Both are evaluated by element-wise tensor Gauss quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ProblemConfig, assemble_system
from .errors import ConfigError
from .femspace import Solution, evaluate_field
from .geometry import Circle, inv_transpose_2x2
from .refspace import gauss_rule, tensor_basis


# ---------------------------------------------------------------------------
# Field samplers: anything with .sample(mesh, elem, xi, eta, pts) -> (val, grad)
# ---------------------------------------------------------------------------


class ExactField:
    """A closed-form scalar field with optional gradient."""

    def __init__(self, fn=None, grad=None):
        self.fn = fn
        self.grad = grad

    def sample(self, mesh, elem, xi, eta, pts):
        n = pts.shape[0]
        vals = np.zeros(n) if self.fn is None else np.broadcast_to(
            np.asarray(self.fn(pts[:, 0], pts[:, 1]), dtype=float), (n,)
        )
        if self.grad is None:
            grads = np.zeros((n, 2))
        else:
            grads = np.asarray(self.grad(pts[:, 0], pts[:, 1]), dtype=float)
            grads = np.broadcast_to(grads, (n, 2))
        return vals, grads


ZERO_FIELD = ExactField()


class SolutionField:
    """One field of a discrete solution, sampled on an arbitrary target mesh.

    On the solution's own mesh the element coefficients are evaluated
    directly; on a different mesh each point goes through Newton point
    location, seeded with the target element's parent when the two meshes
    share the same asymptotic base.
    """

    def __init__(self, sol: Solution, which: str):
        self.sol = sol
        self.which = which
        self._basis = tensor_basis(sol.p)

    def _same_base(self, mesh) -> bool:
        own = self.sol.mesh.base
        other = mesh.base
        if own is other:
            return True
        if own.n_elements != other.n_elements or own.n_boundary != other.n_boundary:
            return False
        for a, b in zip(own.elements, other.elements):
            if not np.allclose(a.corners, b.corners, atol=1e-12, rtol=0.0):
                return False
        return True

    def sample(self, mesh, elem, xi, eta, pts):
        if mesh is self.sol.mesh:
            vals_b, grads_b = self._basis.eval(xi, eta)
            coefs = self.sol.coef_grids(self.which)[elem].ravel()
            vals = vals_b @ coefs
            jac = mesh.element_map(elem).jacobian(xi, eta)
            _, inv_t = inv_transpose_2x2(jac)
            g_ref = grads_b.transpose(0, 2, 1) @ coefs
            return vals, np.einsum("nij,nj->ni", inv_t, g_ref)
        if not hasattr(self, "_compatible"):
            self._compatible = self._same_base(mesh)
        hint = mesh.elements[elem].parent if self._compatible else None
        return evaluate_field(self.sol, self.which, pts, parent_hint=hint)


class DifferenceField:
    def __init__(self, left, right):
        self.left = left
        self.right = right

    def sample(self, mesh, elem, xi, eta, pts):
        lv, lg = self.left.sample(mesh, elem, xi, eta, pts)
        rv, rg = self.right.sample(mesh, elem, xi, eta, pts)
        return lv - rv, lg - rg


def field_norms(mesh, quad_order: int, u_field, w_field, c_fn=None):
    """Squared component integrals (||u||^2, ||grad u||^2, ||w||^2[, ||c^1/2 u||^2]).

    Integration runs element by element in id order with tensor Gauss
    quadrature of the given order, so results are deterministic.
    """
    rule = gauss_rule(quad_order)
    xi_q, eta_q = np.meshgrid(rule.points, rule.points, indexing="xy")
    w_ref = np.outer(rule.weights, rule.weights).ravel()
    xi_q, eta_q = xi_q.ravel(), eta_q.ravel()
    l2u = h1u = l2w = l2cu = 0.0
    for e in range(mesh.n_elements):
        emap = mesh.element_map(e)
        pts = emap(xi_q, eta_q)
        jac = emap.jacobian(xi_q, eta_q)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        w = w_ref * det
        uv, ug = u_field.sample(mesh, e, xi_q, eta_q, pts)
        wv, _ = w_field.sample(mesh, e, xi_q, eta_q, pts)
        l2u += float(w @ uv**2)
        h1u += float(w @ (ug[:, 0] ** 2 + ug[:, 1] ** 2))
        l2w += float(w @ wv**2)
        if c_fn is not None:
            cv = np.broadcast_to(np.asarray(c_fn(pts[:, 0], pts[:, 1]), float), w.shape)
            l2cu += float(w @ (cv * uv**2))
    if c_fn is not None:
        return l2u, h1u, l2w, l2cu
    return l2u, h1u, l2w


def energy_norm(mesh, quad_order: int, eps2: float, u_field=ZERO_FIELD, w_field=ZERO_FIELD) -> float:
    l2u, h1u, l2w = field_norms(mesh, quad_order, u_field, w_field)
    return float(np.sqrt(l2u + eps2**2 * h1u + l2w))


def balanced_norm(
    mesh, quad_order: int, eps1: float, eps2: float, u_field=ZERO_FIELD, w_field=ZERO_FIELD
) -> float:
    if eps1 <= 0.0:
        raise ConfigError("the balanced norm requires eps1 > 0")
    l2u, h1u, l2w = field_norms(mesh, quad_order, u_field, w_field)
    return float(np.sqrt(l2u + eps2 * h1u + (eps2 / eps1) * l2w))


@dataclass
class ErrorReport:
    l2_u_error: float
    h1semi_u_error: float
    l2_w_error: float
    energy_error: float
    balanced_error: float
    quad_order: int
    kind: str  # 'exact' | 'reference'
    eps1: float
    eps2: float

    def __post_init__(self):
        composed = np.sqrt(
            self.l2_u_error**2
            + self.eps2**2 * self.h1semi_u_error**2
            + self.l2_w_error**2
        )
        if not np.isclose(composed, self.energy_error, rtol=1e-12, atol=1e-300):
            raise AssertionError("energy error does not match its components")
        if self.eps1 <= self.eps2 <= 1.0 and self.balanced_error < self.energy_error * (1 - 1e-12):
            raise AssertionError(
                "balanced error fell below the energy error in the eps1 <= eps2 regime"
            )


def _make_report(mesh, quad_order, u_diff, w_diff, kind, eps1, eps2) -> ErrorReport:
    l2u, h1u, l2w = field_norms(mesh, quad_order, u_diff, w_diff)
    return ErrorReport(
        l2_u_error=float(np.sqrt(l2u)),
        h1semi_u_error=float(np.sqrt(h1u)),
        l2_w_error=float(np.sqrt(l2w)),
        energy_error=float(np.sqrt(l2u + eps2**2 * h1u + l2w)),
        balanced_error=float(np.sqrt(l2u + eps2 * h1u + (eps2 / eps1) * l2w)),
        quad_order=quad_order,
        kind=kind,
        eps1=eps1,
        eps2=eps2,
    )


# ---------------------------------------------------------------------------
# Manufactured validation case on the unit disk
# ---------------------------------------------------------------------------


@dataclass
class ManufacturedCase:
    """Closed-form clamped solution with its induced data, for validation."""

    eps1: float
    eps2: float
    u: callable
    grad_u: callable
    lap_u: callable
    bilap_u: callable
    w: callable
    grad_w: callable
    f: callable
    c: callable

    def __post_init__(self):
        th = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
        x, y = np.cos(th), np.sin(th)
        if np.abs(self.u(x, y)).max() > 1e-12:
            raise AssertionError("manufactured u does not vanish on the boundary")
        gu = self.grad_u(x, y)
        normal_deriv = gu[:, 0] * x + gu[:, 1] * y
        if np.abs(normal_deriv).max() > 1e-12:
            raise AssertionError("manufactured du/dn does not vanish on the boundary")


def disk_case(eps1: float, eps2: float) -> ManufacturedCase:
    """u = (1 - x^2 - y^2)^2 on the unit disk with c = 1.

    Then lap u = 16 r^2 - 8, bilap u = 64, w = eps1 (16 r^2 - 8) and
    f = 64 eps1^2 - eps2^2 (16 r^2 - 8) + (1 - r^2)^2; both clamped
    conditions hold exactly on the unit circle.
    """

    def u(x, y):
        return (1.0 - x**2 - y**2) ** 2

    def grad_u(x, y):
        common = -4.0 * (1.0 - x**2 - y**2)
        return np.stack([common * x, common * y], axis=-1)

    def lap_u(x, y):
        return 16.0 * (x**2 + y**2) - 8.0

    def bilap_u(x, y):
        return np.full_like(np.asarray(x, dtype=float), 64.0)

    def w(x, y):
        return eps1 * lap_u(x, y)

    def grad_w(x, y):
        return eps1 * 32.0 * np.stack([np.asarray(x, float), np.asarray(y, float)], axis=-1)

    def c(x, y):
        return np.ones_like(np.asarray(x, dtype=float))

    def f(x, y):
        return eps1**2 * bilap_u(x, y) - eps2**2 * lap_u(x, y) + c(x, y) * u(x, y)

    return ManufacturedCase(
        eps1=eps1, eps2=eps2, u=u, grad_u=grad_u, lap_u=lap_u,
        bilap_u=bilap_u, w=w, grad_w=grad_w, f=f, c=c,
    )


def disk_config(eps1: float, eps2: float, p: int, **kwargs) -> ProblemConfig:
    """ProblemConfig for the manufactured disk case."""
    case = disk_case(eps1, eps2)
    return ProblemConfig(
        eps1=eps1, eps2=eps2, curve=Circle(1.0), f=case.f, c=case.c, p=p, **kwargs
    )


def error_against_exact(sol: Solution, case: ManufacturedCase, quad_order: int | None = None) -> ErrorReport:
    """Energy and balanced errors of a solution against a closed-form case.

    Integrated on the solution's own mesh at quadrature order p+3 unless
    overridden.
    """
    quad = quad_order if quad_order is not None else sol.p + 3
    u_diff = DifferenceField(SolutionField(sol, "u"), ExactField(case.u, case.grad_u))
    w_diff = DifferenceField(SolutionField(sol, "w"), ExactField(case.w, case.grad_w))
    return _make_report(sol.mesh, quad, u_diff, w_diff, "exact", sol.eps1, sol.eps2)


def error_against_reference(sol: Solution, ref: Solution, quad_order: int | None = None) -> ErrorReport:
    """Cross-mesh error of a solution against a finer-degree reference.

    The difference is integrated on the reference mesh (which resolves both
    layer scales at the higher degree) with quadrature order ref.p + 3; the
    coarse solution is evaluated at the reference quadrature points by parent
    map inversion and breakpoint lookup.
    """
    if (sol.eps1, sol.eps2, sol.kappa) != (ref.eps1, ref.eps2, ref.kappa):
        raise ConfigError("solution and reference were computed for different problems")
    quad = quad_order if quad_order is not None else ref.p + 3
    u_diff = DifferenceField(SolutionField(sol, "u"), SolutionField(ref, "u"))
    w_diff = DifferenceField(SolutionField(sol, "w"), SolutionField(ref, "w"))
    return _make_report(ref.mesh, quad, u_diff, w_diff, "reference", sol.eps1, sol.eps2)


def coercivity_probe(mesh, dofmap_u, dofmap_w, config: ProblemConfig, trials: int = 100, seed: int = 0) -> float:
    """Maximum relative defect between v'Av and its quadrature evaluation.

    For random coefficient vectors v = (u, w) the quadratic form of the
    assembled system must equal <c u, u> + eps2^2 ||grad u||^2 + ||w||^2
    up to roundoff (the cross blocks cancel exactly); the defect is
    normalized by the squared energy norm of v.
    """
    system = assemble_system(mesh, dofmap_u, dofmap_w, config)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(system.size)
        sol = Solution(
            mesh=mesh, p=config.p, dofmap_u=dofmap_u, dofmap_w=dofmap_w,
            u=v[: system.n_u], w=v[system.n_u :], residual=0.0,
            eps1=config.eps1, eps2=config.eps2, kappa=config.kappa,
        )
        l2u, h1u, l2w, l2cu = field_norms(
            mesh, config.n_quad,
            SolutionField(sol, "u"), SolutionField(sol, "w"), c_fn=config.c,
        )
        denom = l2u + config.eps2**2 * h1u + l2w
        if denom == 0.0:
            continue
        quad_form = float(v @ (system.matrix @ v))
        expected = l2cu + config.eps2**2 * h1u + l2w
        worst = max(worst, abs(quad_form - expected) / denom)
    return worst
