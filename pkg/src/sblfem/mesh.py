"""Butterfly asymptotic meshes and p-dependent boundary-layer split meshes.

The asymptotic mesh is a fixed O-grid decomposition of a smooth star-shaped
domain: one ring of 4m boundary-fitted curvilinear quadrilaterals whose outer
(xi = 0) edges partition the boundary curve, around an m x m block of
straight-edged cells inscribed through the inward offset curve.  Boundary
elements are numbered first and have xi increasing inward.

The boundary-layer mesh splits each boundary element in xi at
kappa*p*eps1/eps2 and min(kappa*p*eps2, 1/2) whenever kappa*p*eps1/eps2 < 1/2
(the pre-asymptotic regime); otherwise the asymptotic mesh is used unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .geometry import (
    BoundaryCurve,
    CurveArc,
    ElementMap,
    StraightEdge,
    SubIntervalMap,
    TransfiniteMap,
)
from .refspace import gauss_rule, gll_nodes

EDGE_MATCH_TOL = 1e-10


@dataclass
class EdgeLink:
    """Identification of two element sides, as (element id, side id) pairs.

    orientation +1 means the side parameters agree, -1 that they are reversed.
    """

    a: tuple[int, int]
    b: tuple[int, int]
    orientation: int


@dataclass
class AsymptoticMesh:
    curve: BoundaryCurve | None
    elements: list[ElementMap]
    n_boundary: int
    edges: list[EdgeLink]
    boundary_sides: list[tuple[int, int]]
    m: int = 0
    strip_fraction: float = 0.0
    rho0: float = 0.0

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def centroids(self) -> np.ndarray:
        if not hasattr(self, "_centroids"):
            mid = np.array([0.5])
            self._centroids = np.array(
                [emap(mid, mid)[0] for emap in self.elements]
            )
        return self._centroids


@dataclass
class SBLElement:
    map: ElementMap
    tag: str  # 'BL1' | 'BL2' | 'regular' | 'interior'
    parent: int
    xi_interval: tuple[float, float]


@dataclass
class SBLMesh:
    base: AsymptoticMesh
    elements: list[SBLElement]
    kappa: float
    p: int
    eps1: float
    eps2: float
    regime: str  # 'asymptotic' | 'pre-asymptotic'
    clamped: bool
    edges: list[EdgeLink]
    boundary_sides: list[tuple[int, int]]
    sub_of_parent: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_map(self, i: int) -> ElementMap:
        return self.elements[i].map


def sbl_breakpoints(kappa: float, p: int, eps1: float, eps2: float):
    """The xi breakpoints of the three-way boundary split, plus the clamp flag.

    Returns (b1, b2, clamped) with b1 = kappa*p*eps1/eps2 and
    b2 = min(kappa*p*eps2, 1/2); the definition never guards kappa*p*eps2
    itself, so b2 is clamped at 1/2 to keep the outer piece non-degenerate.
    """
    b1 = kappa * p * eps1 / eps2
    b2 = min(kappa * p * eps2, 0.5)
    return b1, b2, kappa * p * eps2 > 0.5


def _check_star_shaped(curve: BoundaryCurve):
    th = np.linspace(0.0, curve.period, 40000, endpoint=False)
    pts = curve.position(th)
    radius = np.hypot(pts[:, 0], pts[:, 1])
    if radius.min() <= 0.0:
        raise MeshError("boundary curve passes through the origin")
    ang = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
    if not np.all(np.diff(ang) > 0.0) or abs((ang[-1] - ang[0]) - 2.0 * np.pi * (1 - 1 / len(th))) > 0.1:
        raise MeshError(
            "domain is not star-shaped with respect to the origin "
            "(sampled polar angle is not strictly increasing)"
        )


def _corner_shift(inner: np.ndarray, m: int) -> int:
    """Pick the logical-corner placement on the offset polygon.

    The four logical corners of the central block sit at polygon vertices
    s, s+m, s+2m, s+3m.  A corner at a reflex polygon vertex (concave pinch
    of the domain) forces an inverted cell, so choose the shift s whose worst
    corner is most convex (normalized chord cross product).
    """
    n = len(inner)
    fwd = np.roll(inner, -1, axis=0) - inner
    bwd = inner - np.roll(inner, 1, axis=0)
    cross = bwd[:, 0] * fwd[:, 1] - bwd[:, 1] * fwd[:, 0]
    convexity = cross / (np.linalg.norm(bwd, axis=1) * np.linalg.norm(fwd, axis=1))
    scores = [
        min(convexity[(s + k * m) % n] for k in range(4)) for s in range(m)
    ]
    return int(np.argmax(scores))


def _smooth_grid(g: np.ndarray, max_sweeps: int = 500) -> np.ndarray:
    """Laplace-smooth interior grid nodes with the boundary held fixed."""
    if g.shape[0] < 3:
        return g
    scale = np.abs(g).max()
    for _ in range(max_sweeps):
        new = 0.25 * (g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:])
        move = np.abs(new - g[1:-1, 1:-1]).max()
        g[1:-1, 1:-1] = new
        if move <= 1e-13 * scale:
            break
    return g


def _central_grid(inner: np.ndarray, m: int, shift: int) -> np.ndarray:
    """Grid nodes for the central block, inscribed through the offset polygon.

    inner holds the 4m offset-polygon vertices (counterclockwise); the grid
    corners are the polygon vertices shift, shift+m, shift+2m, shift+3m.
    Interior nodes start from a discrete Coons patch and are Laplace smoothed.
    Returns nodes g[a, b] for a, b = 0..m.
    """
    poly = np.roll(inner, -shift, axis=0)
    g = np.zeros((m + 1, m + 1, 2))
    bottom = poly[0 : m + 1]
    right = poly[m : 2 * m + 1]
    top = poly[2 * m : 3 * m + 1][::-1]  # runs with increasing a
    left = np.concatenate([poly[3 * m :], poly[:1]])[::-1]  # increasing b
    for a in range(m + 1):
        for b in range(m + 1):
            u, v = a / m, b / m
            g[a, b] = (
                (1 - v) * bottom[a]
                + v * top[a]
                + (1 - u) * left[b]
                + u * right[b]
                - (
                    (1 - u) * (1 - v) * poly[0]
                    + u * (1 - v) * poly[m]
                    + u * v * poly[2 * m]
                    + (1 - u) * v * poly[3 * m]
                )
            )
    return _smooth_grid(g)


def build_asymptotic_mesh(
    curve: BoundaryCurve, m: int = 2, strip_fraction: float = 0.5
) -> AsymptoticMesh:
    """Butterfly (O-grid) decomposition of a star-shaped smooth domain.

    4m boundary-fitted ring elements (numbered first) with their xi=0 edge on
    the boundary curve, plus an m x m central block of straight-edged cells
    inscribed via the inward offset at strip_fraction times the minimal
    radius of curvature.
    """
    if m < 1:
        raise MeshError(f"angular refinement must be >= 1, got {m}")
    if not 0.0 < strip_fraction <= 0.5:
        raise MeshError("strip_fraction must lie in (0, 1/2]")
    _check_star_shaped(curve)

    rho0 = strip_fraction * curve.min_curvature_radius()
    n_ring = 4 * m
    theta = curve.period * np.arange(n_ring + 1) / n_ring
    outer = curve.position(theta)  # outer[j] = B_j, with B_{4m} = B_0
    inner = curve.offset(theta[:-1], rho0)  # inner[j] = I_j

    def inner_pt(j):
        return inner[j % n_ring]

    elements: list[ElementMap] = []
    # Ring elements: (xi, eta) corners (0,0)=B_{j+1}, (0,1)=B_j,
    # (1,0)=I_{j+1}, (1,1)=I_j, so eta runs against the boundary orientation
    # and det J stays positive with xi pointing inward.
    for j in range(n_ring):
        south = StraightEdge(outer[j + 1], inner_pt(j + 1))
        east = StraightEdge(inner_pt(j + 1), inner_pt(j))
        north = StraightEdge(outer[j], inner_pt(j))
        west = CurveArc(curve, theta[j + 1], theta[j])
        elements.append(TransfiniteMap(south, east, north, west))

    shift = _corner_shift(inner, m)
    grid = _central_grid(inner, m, shift)

    def cell_id(a, b):
        return n_ring + b * m + a

    for b in range(m):
        for a in range(m):
            c00, c10 = grid[a, b], grid[a + 1, b]
            c01, c11 = grid[a, b + 1], grid[a + 1, b + 1]
            elements.append(
                TransfiniteMap(
                    StraightEdge(c00, c10),
                    StraightEdge(c10, c11),
                    StraightEdge(c01, c11),
                    StraightEdge(c00, c01),
                )
            )

    edges: list[EdgeLink] = []
    for j in range(n_ring):
        edges.append(EdgeLink((j, 0), ((j + 1) % n_ring, 2), +1))
    # Ring inner edges against the central block's boundary cells; k is the
    # ring position in the shifted (logical) frame.
    for j in range(n_ring):
        k = (j - shift) % n_ring
        if k < m:
            link = (cell_id(k, 0), 0, -1)
        elif k < 2 * m:
            link = (cell_id(m - 1, k - m), 1, -1)
        elif k < 3 * m:
            link = (cell_id(3 * m - 1 - k, m - 1), 2, +1)
        else:
            link = (cell_id(0, 4 * m - 1 - k), 3, +1)
        edges.append(EdgeLink((j, 1), (link[0], link[1]), link[2]))
    # Central block interior edges.
    for b in range(m):
        for a in range(m):
            if a + 1 < m:
                edges.append(EdgeLink((cell_id(a, b), 1), (cell_id(a + 1, b), 3), +1))
            if b + 1 < m:
                edges.append(EdgeLink((cell_id(a, b), 2), (cell_id(a, b + 1), 0), +1))

    boundary_sides = [(j, 3) for j in range(n_ring)]
    mesh = AsymptoticMesh(
        curve=curve,
        elements=elements,
        n_boundary=n_ring,
        edges=edges,
        boundary_sides=boundary_sides,
        m=m,
        strip_fraction=strip_fraction,
        rho0=rho0,
    )
    _quick_jacobian_check(mesh)
    return mesh


def _quick_jacobian_check(mesh: AsymptoticMesh, nq: int = 6):
    rule = gauss_rule(nq)
    xi, eta = np.meshgrid(rule.points, rule.points, indexing="xy")
    xi, eta = xi.ravel(), eta.ravel()
    for i, emap in enumerate(mesh.elements):
        jac = emap.jacobian(xi, eta)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if det.min() <= 0.0:
            raise MeshError(
                f"element {i} of the asymptotic mesh has nonpositive Jacobian "
                f"(min det J = {det.min():.3e}); refine m or reduce strip_fraction"
            )


def build_sbl_mesh(
    base: AsymptoticMesh, kappa: float, p: int, eps1: float, eps2: float
) -> SBLMesh:
    """The boundary-layer mesh for degree p and perturbation pair (eps1, eps2).

    In the asymptotic regime (kappa*p*eps1/eps2 >= 1/2) the base mesh is used
    unchanged; otherwise every boundary element is split into three at the
    breakpoints of :func:`sbl_breakpoints`, giving N1 + 2*N2 elements, and the
    edge topology is updated so all shared edges stay conforming.
    """
    if not (0.0 < eps1 <= eps2 <= 1.0):
        raise MeshError(f"need 0 < eps1 <= eps2 <= 1, got eps1={eps1}, eps2={eps2}")
    if kappa <= 0.0:
        raise MeshError(f"kappa must be positive, got {kappa}")
    if p < 1:
        raise MeshError(f"degree must be >= 1, got {p}")

    n2 = base.n_boundary
    b1, b2, clamped = sbl_breakpoints(kappa, p, eps1, eps2)

    if b1 >= 0.5:
        elements = [
            SBLElement(emap, "regular" if i < n2 else "interior", i, (0.0, 1.0))
            for i, emap in enumerate(base.elements)
        ]
        return SBLMesh(
            base=base,
            elements=elements,
            kappa=kappa,
            p=p,
            eps1=eps1,
            eps2=eps2,
            regime="asymptotic",
            clamped=False,
            edges=list(base.edges),
            boundary_sides=list(base.boundary_sides),
            sub_of_parent={i: [i] for i in range(base.n_elements)},
        )

    if b1 >= b2:
        raise MeshError(
            f"degenerate boundary-layer split: kappa*p*eps1/eps2 = {b1:.3e} is "
            f"not below min(kappa*p*eps2, 1/2) = {b2:.3e}; this happens only "
            "for eps1 >= eps2^2, outside the intended parameter regime"
        )

    elements: list[SBLElement] = []
    sub_of_parent: dict[int, list[int]] = {}
    for i in range(n2):  # BL1 layer, ids 0 .. n2-1
        elements.append(
            SBLElement(SubIntervalMap(base.elements[i], 0.0, b1), "BL1", i, (0.0, b1))
        )
    for i in range(n2):  # BL2 layer, ids n2 .. 2*n2-1
        elements.append(
            SBLElement(SubIntervalMap(base.elements[i], b1, b2), "BL2", i, (b1, b2))
        )
    for i in range(n2):  # outer piece of each split element
        elements.append(
            SBLElement(SubIntervalMap(base.elements[i], b2, 1.0), "regular", i, (b2, 1.0))
        )
    for i in range(n2, base.n_elements):
        elements.append(SBLElement(base.elements[i], "interior", i, (0.0, 1.0)))

    for i in range(n2):
        sub_of_parent[i] = [i, n2 + i, 2 * n2 + i]
    for i in range(n2, base.n_elements):
        sub_of_parent[i] = [2 * n2 + i]

    def new_id(parent, which):
        # which: 0 = BL1, 1 = BL2, 2 = reg/unsplit
        if parent >= n2:
            return 2 * n2 + parent
        return which * n2 + parent

    def side_owners(parent, side):
        if parent >= n2:
            return [(new_id(parent, 2), side)]
        if side == 3:
            return [(new_id(parent, 0), side)]
        if side == 1:
            return [(new_id(parent, 2), side)]
        return [(new_id(parent, k), side) for k in range(3)]

    edges: list[EdgeLink] = []
    for link in base.edges:
        owners_a = side_owners(*link.a)
        owners_b = side_owners(*link.b)
        if len(owners_a) == 1 and len(owners_b) == 1:
            edges.append(EdgeLink(owners_a[0], owners_b[0], link.orientation))
        elif len(owners_a) == 3 and len(owners_b) == 3:
            if link.orientation != +1:
                raise MeshError(
                    "split sides with reversed orientation cannot conform; "
                    "unexpected base-mesh topology"
                )
            for oa, ob in zip(owners_a, owners_b):
                edges.append(EdgeLink(oa, ob, +1))
        else:
            raise MeshError("a split side faces an unsplit one; mesh would hang")
    # The two interior interfaces created inside each split boundary element.
    for i in range(n2):
        edges.append(EdgeLink((new_id(i, 0), 1), (new_id(i, 1), 3), +1))
        edges.append(EdgeLink((new_id(i, 1), 1), (new_id(i, 2), 3), +1))

    boundary_sides = [(new_id(i, 0), 3) for i, _ in base.boundary_sides]

    return SBLMesh(
        base=base,
        elements=elements,
        kappa=kappa,
        p=p,
        eps1=eps1,
        eps2=eps2,
        regime="pre-asymptotic",
        clamped=clamped,
        edges=edges,
        boundary_sides=boundary_sides,
        sub_of_parent=sub_of_parent,
    )


def mesh_from_elements(element_maps, edges=None, boundary_sides=None) -> SBLMesh:
    """Wrap explicit element maps as a single-layer mesh (tooling and tests)."""
    maps = list(element_maps)
    base = AsymptoticMesh(
        curve=None,
        elements=maps,
        n_boundary=0,
        edges=list(edges or []),
        boundary_sides=list(boundary_sides or []),
    )
    elements = [SBLElement(emap, "interior", i, (0.0, 1.0)) for i, emap in enumerate(maps)]
    return SBLMesh(
        base=base,
        elements=elements,
        kappa=1.0,
        p=1,
        eps1=1.0,
        eps2=1.0,
        regime="asymptotic",
        clamped=False,
        edges=list(edges or []),
        boundary_sides=list(boundary_sides or []),
        sub_of_parent={i: [i] for i in range(len(maps))},
    )


@dataclass
class AdmissibilityReport:
    min_det_j: np.ndarray
    max_det_j: np.ndarray
    worst_edge_mismatch: float
    jacobians_positive: bool
    conforming: bool
    second_breakpoint_clamped: bool

    @property
    def ok(self) -> bool:
        return self.jacobians_positive and self.conforming


def check_admissibility(mesh: SBLMesh, quad_order: int) -> AdmissibilityReport:
    """Report-only mesh verification.

    Checks det J > 0 at all tensor Gauss points of the given order and the
    pointwise agreement of shared edges at the GLL points of the same degree.
    """
    rule = gauss_rule(quad_order)
    xi, eta = np.meshgrid(rule.points, rule.points, indexing="xy")
    xi, eta = xi.ravel(), eta.ravel()
    mins = np.empty(mesh.n_elements)
    maxs = np.empty(mesh.n_elements)
    for i in range(mesh.n_elements):
        jac = mesh.element_map(i).jacobian(xi, eta)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        mins[i] = det.min()
        maxs[i] = det.max()

    t = gll_nodes(max(quad_order, 1))
    worst = 0.0
    for link in mesh.edges:
        ea, sa = link.a
        eb, sb = link.b
        ca = mesh.element_map(ea).side_curve(sa)(t)
        tb = t if link.orientation == +1 else 1.0 - t
        cb = mesh.element_map(eb).side_curve(sb)(tb)
        worst = max(worst, float(np.max(np.abs(ca - cb))))

    return AdmissibilityReport(
        min_det_j=mins,
        max_det_j=maxs,
        worst_edge_mismatch=worst,
        jacobians_positive=bool(mins.min() > 0.0),
        conforming=worst <= EDGE_MATCH_TOL,
        second_breakpoint_clamped=mesh.clamped,
    )


def mesh_area(mesh: SBLMesh, quad_order: int = 10) -> float:
    """Sum of integral det J over all elements."""
    rule = gauss_rule(quad_order)
    xi, eta = np.meshgrid(rule.points, rule.points, indexing="xy")
    w = np.outer(rule.weights, rule.weights).ravel()
    xi, eta = xi.ravel(), eta.ravel()
    total = 0.0
    for i in range(mesh.n_elements):
        jac = mesh.element_map(i).jacobian(xi, eta)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        total += float(w @ det)
    return total


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

_TAG_COLORS = {
    "BL1": "#d62728",
    "BL2": "#ff7f0e",
    "regular": "#2ca02c",
    "interior": "#9ecae1",
}


def mesh_to_dict(mesh: SBLMesh) -> dict:
    return {
        "regime": mesh.regime,
        "kappa": mesh.kappa,
        "p": mesh.p,
        "eps1": mesh.eps1,
        "eps2": mesh.eps2,
        "elements": [
            {
                "id": i,
                "tag": el.tag,
                "parent": el.parent,
                "xi_interval": [el.xi_interval[0], el.xi_interval[1]],
                "corners": el.map.corners.tolist(),
            }
            for i, el in enumerate(mesh.elements)
        ],
        "edges": [
            {"a": list(link.a), "b": list(link.b), "orientation": link.orientation}
            for link in mesh.edges
        ],
    }


def _mesh_svg(mesh: SBLMesh, samples_per_edge: int = 16) -> str:
    t = np.linspace(0.0, 1.0, samples_per_edge)
    paths = []
    all_pts = []
    for i, el in enumerate(mesh.elements):
        loops = []
        for side, reverse in ((0, False), (1, False), (2, True), (3, True)):
            pts = el.map.side_curve(side)(t)
            loops.append(pts[::-1] if reverse else pts)
        pts = np.concatenate(loops)
        all_pts.append(pts)
        coords = " ".join(f"{x:.6g},{y:.6g}" for x, y in pts)
        color = _TAG_COLORS.get(el.tag, "#cccccc")
        paths.append(
            f'<path d="M {coords} Z" fill="{color}" fill-opacity="0.35" '
            f'stroke="black" stroke-width="0.25%" />'
        )
    pts = np.concatenate(all_pts)
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    pad = 0.05 * max(x1 - x0, y1 - y0)
    view = f"{x0 - pad:.6g} {-(y1 + pad):.6g} {x1 - x0 + 2 * pad:.6g} {y1 - y0 + 2 * pad:.6g}"
    body = "\n".join(paths)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{view}">\n'
        f'<g transform="scale(1,-1)">\n{body}\n</g>\n</svg>\n'
    )


def export_mesh(mesh: SBLMesh, fmt: str = "json") -> str:
    """Serialize the mesh as JSON (schema as in :func:`mesh_to_dict`) or SVG."""
    if fmt == "json":
        return json.dumps(mesh_to_dict(mesh), indent=1)
    if fmt == "svg":
        return _mesh_svg(mesh)
    raise ValueError(f"unknown mesh export format {fmt!r}")


def load_mesh_json(text: str) -> dict:
    """Parse a mesh JSON export back into its schema dict."""
    data = json.loads(text)
    for key in ("regime", "kappa", "p", "eps1", "eps2", "elements", "edges"):
        if key not in data:
            raise ValueError(f"mesh JSON is missing the {key!r} field")
    return data
