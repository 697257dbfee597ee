"""Analytic closed boundary curves and curvilinear quadrilateral element maps.

Curves are traversed counterclockwise in their native parameter; frames,
curvature and inward offsets are parametrization invariant.  Element maps
send the reference square [0, 1]^2 to physical curvilinear quadrilaterals via
Gordon-Hall blending of four analytic edge curves, so curved domain edges are
represented exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError, PointLocationError

TWO_PI = 2.0 * np.pi

# Tolerance below which an inverse-map result counts as inside the square.
INSIDE_SLACK = 1e-9


def inv_transpose_2x2(jac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Determinant and inverse transpose of a stack of 2x2 Jacobians.

    jac has shape (..., 2, 2); returns (det, inv_t) with inv_t shaped like jac.
    """
    a = jac[..., 0, 0]
    b = jac[..., 0, 1]
    c = jac[..., 1, 0]
    d = jac[..., 1, 1]
    det = a * d - b * c
    inv_t = np.empty_like(jac)
    inv_t[..., 0, 0] = d / det
    inv_t[..., 0, 1] = -c / det
    inv_t[..., 1, 0] = -b / det
    inv_t[..., 1, 1] = a / det
    return det, inv_t


class BoundaryCurve:
    """Closed analytic parametric curve with derivatives up to third order.

    Subclasses implement ``_pos`` and ``_der`` in the native parameter;
    evaluation wraps the parameter modulo ``period``.  Construction validates
    closure (position(0) == position(period) to 1e-12) and regularity
    (|tangent| > 0 on a dense sample).
    """

    kind = "parametric"

    def __init__(self, period: float = TWO_PI):
        self.period = float(period)
        self._min_radius = None
        self._validate()

    # -- subclass surface --------------------------------------------------
    def _pos(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _der(self, theta: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    # -- public surface ----------------------------------------------------
    def position(self, theta) -> np.ndarray:
        """Point on the curve; theta is any real, wrapped modulo the period."""
        th = np.mod(np.asarray(theta, dtype=float), self.period)
        return self._pos(th)

    def derivative(self, theta, order: int = 1) -> np.ndarray:
        if order not in (1, 2, 3):
            raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
        th = np.mod(np.asarray(theta, dtype=float), self.period)
        return self._der(th, order)

    def frame(self, theta):
        """Unit tangent, inward unit normal and signed curvature at theta.

        The inward normal is the tangent rotated by +90 degrees, which points
        into the domain for a counterclockwise boundary.  Curvature uses the
        standard parametric formula (x'y'' - y'x'') / |gamma'|^3.
        """
        g1 = self.derivative(theta, 1)
        g2 = self.derivative(theta, 2)
        speed = np.linalg.norm(g1, axis=-1)
        if np.any(speed < 1e-12):
            raise GeometryError("degenerate tangent: |gamma'| < 1e-12")
        tangent = g1 / speed[..., None]
        normal = np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)
        curvature = (g1[..., 0] * g2[..., 1] - g1[..., 1] * g2[..., 0]) / speed**3
        return tangent, normal, curvature

    def curvature(self, theta) -> np.ndarray:
        return self.frame(theta)[2]

    def min_curvature_radius(self, samples: int = 10000) -> float:
        """Sampled estimate of the minimal radius of curvature.

        Minimum of 1/|curvature| over a dense parameter sample (>= 10^4
        points); an estimate, so callers keep a safety margin.
        """
        if self._min_radius is None:
            th = np.linspace(0.0, self.period, max(samples, 10000), endpoint=False)
            kap = np.abs(self.curvature(th))
            kmax = kap.max()
            self._min_radius = np.inf if kmax == 0.0 else 1.0 / kmax
        return self._min_radius

    def offset(self, theta, rho) -> np.ndarray:
        """Point moved inward from the curve by distance rho along the normal.

        Valid for 0 <= rho < the minimal radius of curvature (tubular
        neighborhood); violating that raises :class:`GeometryError`.
        """
        rho = np.asarray(rho, dtype=float)
        rho0 = self.min_curvature_radius()
        if np.any(rho < 0.0) or np.any(rho >= rho0):
            raise GeometryError(
                f"offset distance must lie in [0, {rho0:.6g}) to stay inside "
                "the tubular neighborhood"
            )
        _, normal, _ = self.frame(theta)
        return self.position(theta) + rho[..., None] * normal

    # -- construction checks -------------------------------------------------
    def _validate(self):
        gap = self._pos(np.asarray(0.0)) - self._pos(np.asarray(self.period))
        if np.any(np.abs(gap) > 1e-12):
            raise GeometryError(f"curve is not closed: endpoint gap {gap}")
        th = np.linspace(0.0, self.period, 10000, endpoint=False)
        speed = np.linalg.norm(self._der(th, 1), axis=-1)
        if speed.min() <= 1e-12:
            raise GeometryError("curve is not regular: vanishing tangent found")


class Circle(BoundaryCurve):
    """Counterclockwise circle of given radius centered at the origin."""

    kind = "circle"

    def __init__(self, radius: float = 1.0):
        if radius <= 0.0:
            raise GeometryError("circle radius must be positive")
        self.radius = float(radius)
        super().__init__(TWO_PI)

    def _pos(self, theta):
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def _der(self, theta, order):
        shifted = theta + order * (np.pi / 2.0)
        return self.radius * np.stack([np.cos(shifted), np.sin(shifted)], axis=-1)


def _sqrt_term(a: float, theta: np.ndarray):
    """g = sqrt(1 - a cos^2), with derivatives g', g'', g''' in theta."""
    u = 1.0 - a * np.cos(theta) ** 2
    u1 = a * np.sin(2.0 * theta)
    u2 = 2.0 * a * np.cos(2.0 * theta)
    u3 = -4.0 * a * np.sin(2.0 * theta)
    g = np.sqrt(u)
    g1 = 0.5 * u1 / g
    g2 = 0.5 * u2 / g - 0.25 * u1**2 / u**1.5
    g3 = 0.5 * u3 / g - 0.75 * u1 * u2 / u**1.5 + 0.375 * u1**3 / u**2.5
    return g, g1, g2, g3


class Cranioid(BoundaryCurve):
    """The cranioid curve bounding the experimental domain.

    Polar form r(t) = sin(t)/4 + sqrt(1 - 0.9 cos^2 t)/2 + sqrt(1 - 0.7 cos^2 t)/2,
    traversed counterclockwise over [0, 2*pi).
    """

    kind = "cranioid"

    def __init__(self):
        super().__init__(TWO_PI)

    @staticmethod
    def _radial(theta):
        g9 = _sqrt_term(0.9, theta)
        g7 = _sqrt_term(0.7, theta)
        r = 0.25 * np.sin(theta) + 0.5 * (g9[0] + g7[0])
        r1 = 0.25 * np.cos(theta) + 0.5 * (g9[1] + g7[1])
        r2 = -0.25 * np.sin(theta) + 0.5 * (g9[2] + g7[2])
        r3 = -0.25 * np.cos(theta) + 0.5 * (g9[3] + g7[3])
        return r, r1, r2, r3

    def _pos(self, theta):
        r = self._radial(theta)[0]
        return r[..., None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def _der(self, theta, order):
        r, r1, r2, r3 = self._radial(theta)
        e_r = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        e_t = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        if order == 1:
            return r1[..., None] * e_r + r[..., None] * e_t
        if order == 2:
            return (r2 - r)[..., None] * e_r + (2.0 * r1)[..., None] * e_t
        return (r3 - 3.0 * r1)[..., None] * e_r + (3.0 * r2 - r)[..., None] * e_t


class ParametricCurve(BoundaryCurve):
    """User-supplied closed curve from a vectorized position callable.

    Derivative callables are optional; missing orders fall back to fourth-order
    central finite differences of the position (adequate for mesh generation,
    not for tight derivative tolerances).
    """

    kind = "parametric"

    def __init__(self, position, period: float, d1=None, d2=None, d3=None):
        self._user_pos = position
        self._user_der = {1: d1, 2: d2, 3: d3}
        self._fd_step = period * 1e-4
        super().__init__(period)

    def _pos(self, theta):
        return np.asarray(self._user_pos(theta), dtype=float)

    def _der(self, theta, order):
        fn = self._user_der[order]
        if fn is not None:
            return np.asarray(fn(theta), dtype=float)
        h = self._fd_step
        if order == 1:
            lower = self._pos(theta - 2 * h) - 8 * self._pos(theta - h)
            upper = 8 * self._pos(theta + h) - self._pos(theta + 2 * h)
            return (lower + upper) / (12.0 * h)
        # Higher orders differentiate the next-lower FD derivative.
        lower = self._der(theta - 2 * h, order - 1) - 8 * self._der(theta - h, order - 1)
        upper = 8 * self._der(theta + h, order - 1) - self._der(theta + 2 * h, order - 1)
        return (lower + upper) / (12.0 * h)


# ---------------------------------------------------------------------------
# Edge curves: parametric maps [0, 1] -> R^2 used as element sides.
# ---------------------------------------------------------------------------


class StraightEdge:
    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.a + t[..., None] * (self.b - self.a)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.b - self.a, t.shape + (2,)).copy()


class CurveArc:
    """Restriction of a boundary curve to a parameter interval, on t in [0, 1].

    th0 > th1 is allowed and traverses the arc backwards.
    """

    def __init__(self, curve: BoundaryCurve, th0: float, th1: float):
        self.curve = curve
        self.th0 = float(th0)
        self.th1 = float(th1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.curve.position(self.th0 + t * (self.th1 - self.th0))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        span = self.th1 - self.th0
        return span * self.curve.derivative(self.th0 + t * span, 1)


class MappedEdge:
    """An element-map restriction along a straight segment in reference space."""

    def __init__(self, emap: "ElementMap", r0, r1):
        self.emap = emap
        self.r0 = np.asarray(r0, dtype=float)
        self.r1 = np.asarray(r1, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        ref = self.r0 + t[..., None] * (self.r1 - self.r0)
        return self.emap(ref[..., 0], ref[..., 1])

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        ref = self.r0 + t[..., None] * (self.r1 - self.r0)
        jac = self.emap.jacobian(ref[..., 0], ref[..., 1])
        return jac @ (self.r1 - self.r0)


# Side numbering: 0 = south (eta=0), 1 = east (xi=1), 2 = north (eta=1),
# 3 = west (xi=0); side parameters run with increasing xi or eta.
SIDE_ENDPOINTS = {
    0: ((0.0, 0.0), (1.0, 0.0)),
    1: ((1.0, 0.0), (1.0, 1.0)),
    2: ((0.0, 1.0), (1.0, 1.0)),
    3: ((0.0, 0.0), (0.0, 1.0)),
}


class ElementMap:
    """Smooth bijection from the reference square to a physical quadrilateral."""

    def __call__(self, xi, eta) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, xi, eta) -> np.ndarray:
        raise NotImplementedError

    @property
    def corners(self) -> np.ndarray:
        """Physical corners at reference (0,0), (1,0), (1,1), (0,1)."""
        xi = np.array([0.0, 1.0, 1.0, 0.0])
        eta = np.array([0.0, 0.0, 1.0, 1.0])
        return self(xi, eta)

    def side_curve(self, side: int) -> MappedEdge:
        r0, r1 = SIDE_ENDPOINTS[side]
        return MappedEdge(self, r0, r1)

    # -- Newton point inversion ---------------------------------------------
    def invert_batch(self, points, tol: float = 1e-12, max_iter: int = 50):
        """Reference coordinates of physical points by damped-free Newton.

        Iterates start at (1/2, 1/2) with a 5x5 coarse-grid restart for
        stragglers.  Returns (xi, eta, inside) where inside marks points whose
        converged preimage lies in [-1e-9, 1+1e-9]^2; converged preimages
        outside the square are reported as not-in-element (inside False).
        Points that fail to converge at all raise
        :class:`PointLocationError`.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        xi = np.full(n, np.nan)
        eta = np.full(n, np.nan)
        done = np.zeros(n, dtype=bool)

        seeds = [(0.5, 0.5)]
        grid = np.linspace(0.1, 0.9, 5)
        seeds += [(a, b) for b in grid for a in grid if (a, b) != (0.5, 0.5)]

        for sx, sy in seeds:
            idx = np.flatnonzero(~done)
            if idx.size == 0:
                break
            x = np.full(idx.size, sx)
            y = np.full(idx.size, sy)
            target = pts[idx]
            active = np.ones(idx.size, dtype=bool)
            for _ in range(max_iter):
                res = self(x[active], y[active]) - target[active]
                jac = self.jacobian(x[active], y[active])
                det, inv_t = inv_transpose_2x2(jac)
                if np.any(det == 0.0) or not np.all(np.isfinite(inv_t)):
                    break
                # delta = J^{-1} res; inv_t is J^{-T}
                dx = inv_t[..., 0, 0] * res[..., 0] + inv_t[..., 1, 0] * res[..., 1]
                dy = inv_t[..., 0, 1] * res[..., 0] + inv_t[..., 1, 1] * res[..., 1]
                sub = np.flatnonzero(active)
                x[sub] = np.clip(x[sub] - dx, -0.5, 1.5)
                y[sub] = np.clip(y[sub] - dy, -0.5, 1.5)
                res_new = self(x[sub], y[sub]) - target[sub]
                conv = np.linalg.norm(res_new, axis=-1) <= tol
                active[sub[conv]] = False
                if not active.any():
                    break
            newly = np.flatnonzero(~active)
            xi[idx[newly]] = x[newly]
            eta[idx[newly]] = y[newly]
            done[idx[newly]] = True

        if not done.all():
            # Stalled iterates pinned outside the square are a clean
            # "not in this element"; anything else is a numerical failure.
            bad = np.flatnonzero(~done)
            for k in bad:
                xk, yk, ok = self._single_probe(pts[k], tol, max_iter)
                if ok is None:
                    raise PointLocationError(
                        f"Newton inversion failed for physical point {pts[k]}"
                    )
                xi[k], eta[k], done[k] = xk, yk, True

        lo, hi = -INSIDE_SLACK, 1.0 + INSIDE_SLACK
        inside = (xi >= lo) & (xi <= hi) & (eta >= lo) & (eta <= hi)
        return xi, eta, inside

    def _single_probe(self, pt, tol, max_iter):
        """Last-resort classification of a non-converged point."""
        best = None
        for sx in np.linspace(0.0, 1.0, 5):
            for sy in np.linspace(0.0, 1.0, 5):
                x, y = sx, sy
                for _ in range(max_iter):
                    res = self(np.array([x]), np.array([y]))[0] - pt
                    if np.hypot(*res) <= tol:
                        return x, y, True
                    jac = self.jacobian(np.array([x]), np.array([y]))[0]
                    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
                    if det == 0.0 or not np.isfinite(det):
                        break
                    dx = (jac[1, 1] * res[0] - jac[0, 1] * res[1]) / det
                    dy = (-jac[1, 0] * res[0] + jac[0, 0] * res[1]) / det
                    x = min(max(x - dx, -0.5), 1.5)
                    y = min(max(y - dy, -0.5), 1.5)
                out = not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0)
                if out:
                    best = (x, y, False)
        if best is not None:
            return best[0], best[1], False
        return np.nan, np.nan, None

    def invert(self, point, tol: float = 1e-12):
        """Single-point inversion: (xi, eta) if inside, None if not in element."""
        xi, eta, inside = self.invert_batch(np.asarray(point, float)[None, :], tol)
        if not inside[0]:
            return None
        return float(xi[0]), float(eta[0])


class TransfiniteMap(ElementMap):
    """Gordon-Hall bilinear blending of four edge curves.

    Edges are given in side order (south, east, north, west); the blending
    interpolates all four exactly, so an edge lying on the boundary curve is
    reproduced to machine precision.  Corners are taken from the south/north
    edges and must match the east/west endpoints to 1e-10.
    """

    def __init__(self, south, east, north, west, corner_tol: float = 1e-10):
        self.edges = (south, east, north, west)
        zero = np.asarray(0.0)
        one = np.asarray(1.0)
        self.c00 = south(zero)
        self.c10 = south(one)
        self.c01 = north(zero)
        self.c11 = north(one)
        gaps = [
            self.c00 - west(zero),
            self.c10 - east(zero),
            self.c01 - west(one),
            self.c11 - east(one),
        ]
        worst = max(np.max(np.abs(g)) for g in gaps)
        if worst > corner_tol:
            raise GeometryError(
                f"edge curves do not close into a quadrilateral: corner "
                f"mismatch {worst:.3e} exceeds {corner_tol:.1e}"
            )

    def __call__(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        south, east, north, west = self.edges
        sxi = south(xi)
        nxi = north(xi)
        weta = west(eta)
        eeta = east(eta)
        xi_ = xi[..., None]
        eta_ = eta[..., None]
        blend = (1.0 - eta_) * sxi + eta_ * nxi + (1.0 - xi_) * weta + xi_ * eeta
        corner = (
            (1.0 - xi_) * (1.0 - eta_) * self.c00
            + xi_ * (1.0 - eta_) * self.c10
            + (1.0 - xi_) * eta_ * self.c01
            + xi_ * eta_ * self.c11
        )
        return blend - corner

    def jacobian(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        south, east, north, west = self.edges
        sxi = south(xi)
        nxi = north(xi)
        weta = west(eta)
        eeta = east(eta)
        ds = south.derivative(xi)
        dn = north.derivative(xi)
        dw = west.derivative(eta)
        de = east.derivative(eta)
        xi_ = xi[..., None]
        eta_ = eta[..., None]
        d_xi = (
            (1.0 - eta_) * ds
            + eta_ * dn
            - weta
            + eeta
            - (-(1.0 - eta_) * self.c00 + (1.0 - eta_) * self.c10
               - eta_ * self.c01 + eta_ * self.c11)
        )
        d_eta = (
            -sxi
            + nxi
            + (1.0 - xi_) * dw
            + xi_ * de
            - (-(1.0 - xi_) * self.c00 - xi_ * self.c10
               + (1.0 - xi_) * self.c01 + xi_ * self.c11)
        )
        return np.stack([d_xi, d_eta], axis=-1)


class SubIntervalMap(ElementMap):
    """Parent map composed with an affine split in the xi direction."""

    def __init__(self, parent: ElementMap, xi_lo: float, xi_hi: float):
        if not xi_lo < xi_hi:
            raise GeometryError(f"empty xi interval [{xi_lo}, {xi_hi}]")
        self.parent = parent
        self.xi_lo = float(xi_lo)
        self.xi_hi = float(xi_hi)
        self.width = self.xi_hi - self.xi_lo

    def __call__(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        return self.parent(self.xi_lo + self.width * xi, eta)

    def jacobian(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        jac = self.parent.jacobian(self.xi_lo + self.width * xi, eta).copy()
        jac[..., 0] *= self.width
        return jac


def transfinite_map(south, east, north, west) -> TransfiniteMap:
    """Build the blended element map of four edge curves (south, east, north, west)."""
    return TransfiniteMap(south, east, north, west)
