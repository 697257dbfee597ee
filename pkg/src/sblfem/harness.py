"""Configuration-driven orchestration: solves, sweeps and reference solutions.

Config files are INI-style with sections [domain], [problem], [mesh], [sweep]
and [output]; the CLI in :mod:`sblfem.cli` wires the pieces together.  Sweep
results are written as CSV rows with the fixed header

    p,dofs,eps1,eps2,energy_error,balanced_error,solve_seconds,regime
"""

from __future__ import annotations

import configparser
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    ErrorReport,
    disk_case,
    error_against_exact,
    error_against_reference,
)
from .assembly import ProblemConfig, unit_coefficient
from .errors import ConfigError
from .femspace import Solution, build_dof_map
from .geometry import Circle, Cranioid
from .mesh import build_asymptotic_mesh, build_sbl_mesh
from .solver import timed_solve

CSV_HEADER = "p,dofs,eps1,eps2,energy_error,balanced_error,solve_seconds,regime"
MAX_DEGREE = 20
FORCING_NAMES = ("10x", "inverse-distance", "manufactured-disk")


def regime_of(kappa: float, p: int, eps1: float, eps2: float) -> str:
    """The mesh regime implied by the split criterion, recomputed from scratch."""
    return "asymptotic" if kappa * p * eps1 / eps2 >= 0.5 else "pre-asymptotic"


def forcing_10x(x, y):
    return 10.0 * np.asarray(x, dtype=float)


def forcing_inverse_distance(x, y):
    return 1.0 / np.sqrt((np.asarray(x, dtype=float) + 0.5) ** 2 + np.asarray(y, dtype=float) ** 2)


def _constant_coefficient(value: float):
    def c(x, y):
        return np.full_like(np.asarray(x, dtype=float), value)

    c.constant = value
    return c


def _check_singularity_outside(curve, point=(-0.5, 0.0)):
    th = np.linspace(0.0, curve.period, 10000, endpoint=False)
    pts = curve.position(th)
    dist = np.hypot(pts[:, 0] - point[0], pts[:, 1] - point[1])
    if dist.min() < 1e-6:
        raise ConfigError(
            "the inverse-distance forcing is singular on or too close to the boundary"
        )
    angle = np.arctan2(point[1], point[0])
    radius_at = np.hypot(*curve.position(angle))
    if np.hypot(*point) <= radius_at:
        raise ConfigError(
            "the inverse-distance singular point lies inside the domain"
        )


@dataclass
class ProblemSpec:
    """Plain data describing a problem; expands to a ProblemConfig on demand.

    Keeping this picklable lets sweep points run in worker processes.
    """

    curve: str = "cranioid"
    radius: float = 1.0
    eps1: float = 1e-11
    eps2: float = 1e-3
    kappa: float = 1.0
    p: int = 4
    quad_order: int | None = None
    forcing: str = "10x"
    coefficient: float = 1.0
    m: int = 2
    strip_fraction: float = 0.5

    def make_curve(self):
        if self.curve == "circle":
            return Circle(self.radius)
        if self.curve == "cranioid":
            return Cranioid()
        raise ConfigError(f"unknown curve {self.curve!r} (use circle or cranioid)")

    def config(self, p: int | None = None, eps1: float | None = None, eps2: float | None = None) -> ProblemConfig:
        p = self.p if p is None else p
        eps1 = self.eps1 if eps1 is None else eps1
        eps2 = self.eps2 if eps2 is None else eps2
        curve = self.make_curve()
        if self.forcing == "10x":
            f = forcing_10x
        elif self.forcing == "inverse-distance":
            _check_singularity_outside(curve)
            f = forcing_inverse_distance
        elif self.forcing == "manufactured-disk":
            if self.curve != "circle" or self.radius != 1.0:
                raise ConfigError(
                    "the manufactured forcing is defined on the unit disk only"
                )
            if self.coefficient != 1.0:
                raise ConfigError("the manufactured case fixes the coefficient to 1")
            f = disk_case(eps1, eps2).f
        else:
            raise ConfigError(
                f"unknown forcing {self.forcing!r}; pick one of {FORCING_NAMES}"
            )
        c = unit_coefficient if self.coefficient == 1.0 else _constant_coefficient(self.coefficient)
        if self.coefficient <= 0.0:
            raise ConfigError(
                f"the reaction coefficient must be positive, got {self.coefficient}"
            )
        return ProblemConfig(
            eps1=eps1, eps2=eps2, curve=curve, f=f, c=c, kappa=self.kappa,
            p=p, quad_order=self.quad_order, m=self.m, strip_fraction=self.strip_fraction,
        )

    def to_dict(self) -> dict:
        return {
            "curve": self.curve, "radius": self.radius, "eps1": self.eps1,
            "eps2": self.eps2, "kappa": self.kappa, "p": self.p,
            "quad_order": self.quad_order, "forcing": self.forcing,
            "coefficient": self.coefficient, "m": self.m,
            "strip_fraction": self.strip_fraction,
        }


@dataclass
class SweepSpec:
    problem: ProblemSpec
    p_list: list[int] = field(default_factory=lambda: list(range(2, 11)))
    eps1_list: list[float] = field(default_factory=list)
    eps2_list: list[float] = field(default_factory=list)
    mode: str = "reference"  # 'reference' | 'exact'
    csv_path: str | None = None
    plot_path: str | None = None

    def __post_init__(self):
        if not self.eps1_list:
            self.eps1_list = [self.problem.eps1]
        if not self.eps2_list:
            self.eps2_list = [self.problem.eps2]
        if not self.p_list:
            raise ConfigError("sweep needs a nonempty list of degrees")
        if self.mode not in ("reference", "exact"):
            raise ConfigError(f"sweep mode must be reference or exact, got {self.mode!r}")
        if self.mode == "reference" and max(self.p_list) + 2 > MAX_DEGREE:
            raise ConfigError(
                f"reference solves need degree p+2 <= {MAX_DEGREE}; "
                f"highest requested p is {max(self.p_list)}"
            )
        if self.mode == "exact" and self.problem.forcing != "manufactured-disk":
            raise ConfigError("exact comparison needs the manufactured-disk forcing")


@dataclass
class SweepRow:
    p: int
    dofs: int
    eps1: float
    eps2: float
    energy_error: float
    balanced_error: float
    solve_seconds: float
    regime: str

    def to_csv(self) -> str:
        return (
            f"{self.p},{self.dofs},{self.eps1!r},{self.eps2!r},"
            f"{self.energy_error!r},{self.balanced_error!r},"
            f"{self.solve_seconds:.3f},{self.regime}"
        )


def _sweep_point(args) -> SweepRow:
    spec_dict, p, eps1, eps2, mode = args
    problem = ProblemSpec(**spec_dict)
    config = problem.config(p=p, eps1=eps1, eps2=eps2)
    sol, seconds = timed_solve(config)
    if mode == "exact":
        report = error_against_exact(sol, disk_case(eps1, eps2))
    else:
        ref_config = problem.config(p=p + 2, eps1=eps1, eps2=eps2)
        ref, _ = timed_solve(ref_config)
        report = error_against_reference(sol, ref)
    return SweepRow(
        p=p,
        dofs=sol.dofmap_u.n_free + sol.dofmap_w.n_free,
        eps1=eps1,
        eps2=eps2,
        energy_error=report.energy_error,
        balanced_error=report.balanced_error,
        solve_seconds=seconds,
        regime=sol.mesh.regime,
    )


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """Solve every (p, eps1, eps2) combination and report both error norms.

    Rows come back in deterministic order: p outer, then eps1, then eps2, all
    ascending, regardless of how many workers computed them.
    """
    combos = [
        (spec.problem.to_dict(), p, eps1, eps2, spec.mode)
        for p in sorted(spec.p_list)
        for eps1 in sorted(spec.eps1_list)
        for eps2 in sorted(spec.eps2_list)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, combos))
    return [_sweep_point(args) for args in combos]


def rows_to_csv(rows: list[SweepRow]) -> str:
    return "\n".join([CSV_HEADER] + [row.to_csv() for row in rows]) + "\n"


def parse_csv(text: str) -> list[SweepRow]:
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ConfigError(
            f"line 1: expected the CSV header {CSV_HEADER!r}"
        )
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise ConfigError(f"line {ln}: expected 8 comma-separated fields")
        try:
            rows.append(
                SweepRow(
                    p=int(parts[0]), dofs=int(parts[1]), eps1=float(parts[2]),
                    eps2=float(parts[3]), energy_error=float(parts[4]),
                    balanced_error=float(parts[5]), solve_seconds=float(parts[6]),
                    regime=parts[7].strip(),
                )
            )
        except ValueError as err:
            raise ConfigError(f"line {ln}: {err}") from err
    if not rows:
        raise ConfigError("CSV contains a header but no data rows")
    return rows


# ---------------------------------------------------------------------------
# Reference solutions on disk
# ---------------------------------------------------------------------------


def solve_spec(spec: ProblemSpec, p: int | None = None) -> Solution:
    sol, _ = timed_solve(spec.config(p=p))
    return sol


def make_reference(spec: ProblemSpec) -> tuple[Solution, dict]:
    """Solve at degree p+2 on its own split mesh; returns (solution, payload)."""
    if spec.p + 2 > MAX_DEGREE:
        raise ConfigError(f"reference degree {spec.p + 2} exceeds the {MAX_DEGREE} cap")
    ref_spec_dict = spec.to_dict()
    ref_spec_dict["p"] = spec.p + 2
    sol = solve_spec(ProblemSpec(**ref_spec_dict))
    return sol, solution_payload(sol, ProblemSpec(**ref_spec_dict))


def solution_payload(sol: Solution, spec: ProblemSpec) -> dict:
    """JSON-ready dict describing a solution; floats round-trip exactly."""
    return {
        "problem": spec.to_dict(),
        "p": sol.p,
        "regime": sol.mesh.regime,
        "residual": sol.residual,
        "u": sol.u.tolist(),
        "w": sol.w.tolist(),
    }


def save_solution(sol: Solution, spec: ProblemSpec, path: str):
    with open(path, "w") as fh:
        json.dump(solution_payload(sol, spec), fh)


def load_solution(path: str) -> Solution:
    """Rebuild a stored solution; the mesh is reconstructed from its parameters."""
    with open(path) as fh:
        data = json.load(fh)
    spec = ProblemSpec(**data["problem"])
    config = spec.config(p=data["p"])
    base = build_asymptotic_mesh(config.curve, config.m, config.strip_fraction)
    mesh = build_sbl_mesh(base, config.kappa, config.p, config.eps1, config.eps2)
    dofmap_u = build_dof_map(mesh, config.p, "u")
    dofmap_w = build_dof_map(mesh, config.p, "w")
    u = np.asarray(data["u"], dtype=float)
    w = np.asarray(data["w"], dtype=float)
    if len(u) != dofmap_u.n_free or len(w) != dofmap_w.n_free:
        raise ConfigError(
            f"stored coefficient vectors ({len(u)}, {len(w)}) do not match the "
            f"rebuilt spaces ({dofmap_u.n_free}, {dofmap_w.n_free})"
        )
    return Solution(
        mesh=mesh, p=config.p, dofmap_u=dofmap_u, dofmap_w=dofmap_w,
        u=u, w=w, residual=float(data["residual"]),
        eps1=config.eps1, eps2=config.eps2, kappa=config.kappa,
    )


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def _parse_int_list(text: str) -> list[int]:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def load_config(path: str) -> tuple[ProblemSpec, SweepSpec, dict]:
    """Parse an INI config into (problem spec, sweep spec, output paths)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found or unreadable")
    try:
        dom = parser["domain"] if parser.has_section("domain") else {}
        prob = parser["problem"] if parser.has_section("problem") else {}
        mesh_sec = parser["mesh"] if parser.has_section("mesh") else {}
        sweep_sec = parser["sweep"] if parser.has_section("sweep") else {}
        out = parser["output"] if parser.has_section("output") else {}

        spec = ProblemSpec(
            curve=dom.get("curve", "cranioid").strip(),
            radius=float(dom.get("radius", "1.0")),
            eps1=float(prob.get("eps1", "1e-11")),
            eps2=float(prob.get("eps2", "1e-3")),
            kappa=float(prob.get("kappa", "1.0")),
            p=int(prob.get("p", "4")),
            quad_order=int(prob["quad_order"]) if prob.get("quad_order") else None,
            forcing=prob.get("forcing", "10x").strip(),
            coefficient=float(prob.get("coefficient", "1.0")),
            m=int(mesh_sec.get("m", "2")),
            strip_fraction=float(mesh_sec.get("strip_fraction", "0.5")),
        )
        outputs = {
            "csv": out.get("csv", "sweep.csv"),
            "plot": out.get("plot", "sweep.svg"),
            "solution": out.get("solution", "solution.json"),
            "mesh": out.get("mesh", "mesh.json"),
        }
        sweep = SweepSpec(
            problem=spec,
            p_list=_parse_int_list(sweep_sec.get("p", "2:10")),
            eps1_list=_parse_float_list(sweep_sec.get("eps1", "")) or [spec.eps1],
            eps2_list=_parse_float_list(sweep_sec.get("eps2", "")) or [spec.eps2],
            mode=sweep_sec.get("mode", "reference").strip(),
            csv_path=outputs["csv"],
            plot_path=outputs["plot"],
        )
    except (ValueError, KeyError) as err:
        raise ConfigError(f"invalid config {path!r}: {err}") from err
    return spec, sweep, outputs
