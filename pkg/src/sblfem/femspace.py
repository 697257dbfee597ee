"""Global C0 degree-of-freedom numbering and point evaluation of solutions.

Two discrete fields share the same nodal tensor GLL basis: the u field
carries homogeneous Dirichlet constraints on boundary edges, the w field is
unconstrained.  Shared edge and vertex nodes are identified topologically
through the mesh's edge links (never by coordinate matching, which the
boundary-layer elements of reference width ~1e-8 would defeat).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError, PointLocationError
from .geometry import inv_transpose_2x2
from .refspace import tensor_basis


def side_local_indices(p: int, side: int) -> np.ndarray:
    """Local node indices along a side, ordered by the side parameter."""
    k = np.arange(p + 1)
    if side == 0:
        return k
    if side == 1:
        return k * (p + 1) + p
    if side == 2:
        return p * (p + 1) + k
    if side == 3:
        return k * (p + 1)
    raise ValueError(f"side must be 0..3, got {side}")


@dataclass
class DofMap:
    field: str  # 'u' | 'w'
    p: int
    element_nodes: np.ndarray  # (n_elems, (p+1)^2) global node ids
    node_to_dof: np.ndarray  # (n_nodes,) free dof index, -1 if constrained
    n_free: int
    constrained_nodes: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_to_dof)

    @property
    def element_dofs(self) -> np.ndarray:
        return self.node_to_dof[self.element_nodes]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, k: int) -> int:
        parent = self.parent
        root = k
        while parent[root] != root:
            root = parent[root]
        while parent[k] != root:
            parent[k], k = root, parent[k]
        return root

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # Keep the smaller key as the root so numbering is deterministic.
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb


def build_dof_map(mesh, p: int, field: str) -> DofMap:
    """Deterministic global numbering of the tensor GLL nodes.

    Nodes are numbered by first occurrence, scanning elements in id order and
    local nodes lexicographically; edge links identify shared nodes honoring
    the stored orientation.  For the u field every node on a boundary side is
    constrained to zero.
    """
    if field not in ("u", "w"):
        raise ValueError(f"field must be 'u' or 'w', got {field!r}")
    nb = (p + 1) ** 2
    n_elems = mesh.n_elements
    uf = _UnionFind(n_elems * nb)
    for link in mesh.edges:
        ea, sa = link.a
        eb, sb = link.b
        if not (0 <= ea < n_elems and 0 <= eb < n_elems):
            raise MeshError(f"edge link {link} references a missing element")
        loc_a = side_local_indices(p, sa)
        loc_b = side_local_indices(p, sb)
        if link.orientation == -1:
            loc_b = loc_b[::-1]
        for la, lb in zip(loc_a, loc_b):
            uf.union(ea * nb + la, eb * nb + lb)

    node_of_key = np.full(n_elems * nb, -1, dtype=np.int64)
    n_nodes = 0
    for key in range(n_elems * nb):
        root = uf.find(key)
        if node_of_key[root] == -1:
            node_of_key[root] = n_nodes
            n_nodes += 1
        node_of_key[key] = node_of_key[root]
    element_nodes = node_of_key.reshape(n_elems, nb)

    constrained = np.zeros(n_nodes, dtype=bool)
    if field == "u":
        for elem, side in mesh.boundary_sides:
            constrained[element_nodes[elem, side_local_indices(p, side)]] = True

    node_to_dof = np.full(n_nodes, -1, dtype=np.int64)
    node_to_dof[~constrained] = np.arange(int((~constrained).sum()))
    return DofMap(
        field=field,
        p=p,
        element_nodes=element_nodes,
        node_to_dof=node_to_dof,
        n_free=int((~constrained).sum()),
        constrained_nodes=np.flatnonzero(constrained),
    )


def node_positions(mesh, dofmap: DofMap) -> np.ndarray:
    """Physical coordinates of every global node (first-occurrence element)."""
    p = dofmap.p
    basis = tensor_basis(p)
    xi, eta = basis.node_grid()
    xi, eta = xi.ravel(), eta.ravel()
    pos = np.zeros((dofmap.n_nodes, 2))
    seen = np.zeros(dofmap.n_nodes, dtype=bool)
    for e in range(mesh.n_elements):
        pts = mesh.element_map(e)(xi, eta)
        ids = dofmap.element_nodes[e]
        fresh = ~seen[ids]
        pos[ids[fresh]] = pts[fresh]
        seen[ids[fresh]] = True
    return pos


def interpolate_nodal(mesh, dofmap: DofMap, fn) -> np.ndarray:
    """Free-dof coefficients of the nodal interpolant of fn(x, y)."""
    pos = node_positions(mesh, dofmap)
    values = np.asarray(fn(pos[:, 0], pos[:, 1]), dtype=float)
    return values[dofmap.node_to_dof >= 0]


@dataclass
class Solution:
    """Discrete two-field solution with everything needed for evaluation."""

    mesh: object
    p: int
    dofmap_u: DofMap
    dofmap_w: DofMap
    u: np.ndarray
    w: np.ndarray
    residual: float
    eps1: float
    eps2: float
    kappa: float
    _grids: dict = field(default_factory=dict, repr=False)

    def coef_grids(self, which: str) -> np.ndarray:
        """(n_elems, p+1, p+1) nodal values per element, zeros where constrained."""
        if which not in self._grids:
            dofmap = self.dofmap_u if which == "u" else self.dofmap_w
            coefs = self.u if which == "u" else self.w
            dofs = dofmap.element_dofs
            vals = np.where(dofs >= 0, coefs[np.clip(dofs, 0, None)], 0.0)
            self._grids[which] = vals.reshape(self.mesh.n_elements, self.p + 1, self.p + 1)
        return self._grids[which]


def _locate(mesh, points: np.ndarray, parent_hint=None, tol: float = 1e-12):
    """Assign each physical point to a parent element of the base mesh."""
    base = mesh.base
    n = points.shape[0]
    parent = np.full(n, -1, dtype=np.int64)
    xi = np.full(n, np.nan)
    eta = np.full(n, np.nan)

    candidates = list(range(base.n_elements))
    if parent_hint is not None:
        candidates.remove(parent_hint)
        candidates.insert(0, parent_hint)

    for cand in candidates:
        pending = np.flatnonzero(parent < 0)
        if pending.size == 0:
            break
        x, y, inside = base.elements[cand].invert_batch(points[pending], tol=tol)
        hit = pending[inside]
        parent[hit] = cand
        xi[hit] = x[inside]
        eta[hit] = y[inside]

    if np.any(parent < 0):
        missing = points[parent < 0][0]
        raise PointLocationError(
            f"physical point ({missing[0]:.12g}, {missing[1]:.12g}) was not "
            "found in any element"
        )
    return parent, xi, eta


def evaluate_field(sol: Solution, which: str, points, parent_hint=None, tol: float = 1e-12):
    """Field value and physical gradient at arbitrary physical points.

    Locates each point in a parent element by Newton inversion of its map,
    picks the sub-element from the stored xi breakpoints, evaluates the
    tensor basis there and maps the reference gradient with the inverse
    Jacobian transpose.  Returns (values, gradients) with shapes (n,), (n, 2).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mesh = sol.mesh
    parent, pxi, peta = _locate(mesh, pts, parent_hint=parent_hint, tol=tol)

    basis = tensor_basis(sol.p)
    grids = sol.coef_grids(which)
    values = np.empty(pts.shape[0])
    grads = np.empty((pts.shape[0], 2))

    for par in np.unique(parent):
        in_par = np.flatnonzero(parent == par)
        subs = mesh.sub_of_parent[par]
        intervals = np.array([mesh.elements[s].xi_interval for s in subs])
        # Right-open interval lookup; the last sub-element absorbs xi = 1.
        pick = np.searchsorted(intervals[:, 1], pxi[in_par], side="left")
        pick = np.clip(pick, 0, len(subs) - 1)
        for k, sub in enumerate(subs):
            sel = in_par[pick == k]
            if sel.size == 0:
                continue
            lo, hi = intervals[k]
            loc_xi = np.clip((pxi[sel] - lo) / (hi - lo), 0.0, 1.0)
            loc_eta = np.clip(peta[sel], 0.0, 1.0)
            vals, ref_grads = basis.eval(loc_xi, loc_eta)
            coefs = grids[sub].ravel()
            values[sel] = vals @ coefs
            jac = mesh.element_map(sub).jacobian(loc_xi, loc_eta)
            _, inv_t = inv_transpose_2x2(jac)
            g_ref = ref_grads.transpose(0, 2, 1) @ coefs  # (n, 2)
            grads[sel] = np.einsum("nij,nj->ni", inv_t, g_ref)
    return values, grads
