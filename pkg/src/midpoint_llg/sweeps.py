"""Parameter sweeps: solver feasibility over (h, k) and unit-length deviation over eps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .integrator import SchemeMode, hedgehog_initial, run, unit_length_deviation
from .mesh import build_unit_cube_mesh
from .model import MaterialModel, exchange_only, imex_extrapolate
from .solvers import (
    ITERATION_CAP,
    LINEAR_MAX_ITER,
    LINEAR_TOL,
    NonConvergenceError,
    StepProblem,
    fixed_point_solve,
    newton_solve,
)

__all__ = [
    "SweepPoint",
    "Threshold",
    "LineFit",
    "SweepResult",
    "default_k_schedule",
    "default_eps_list",
    "fit_loglog",
    "first_step_feasibility",
    "cfl_sweep",
    "eps_sweep",
]


@dataclass(frozen=True)
class SweepPoint:
    mode: str
    N: int
    h: float  # shortest edge 1/N
    k: float
    eps: float
    feasible: bool
    iterations: int
    max_dev: float = math.nan
    min_dev: float = math.nan
    linear_iterations: int = 0


@dataclass(frozen=True)
class Threshold:
    """Bracket of the feasibility boundary on the k grid."""

    N: int
    h: float
    k_feasible: float | None  # largest feasible k below the first infeasible one
    k_infeasible: float | None  # first infeasible k

    @property
    def k_thresh(self) -> float | None:
        if self.k_feasible is None or self.k_infeasible is None:
            return None
        return math.sqrt(self.k_feasible * self.k_infeasible)


@dataclass(frozen=True)
class LineFit:
    """Least-squares line ``log y = slope log x + intercept``."""

    slope: float
    intercept: float
    residual: float  # root mean square of the log residuals
    n_points: int


@dataclass
class SweepResult:
    kind: str  # "cfl" or "eps"
    points: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)  # (mode, N) -> Threshold
    fits: dict = field(default_factory=dict)  # tuple key starting with the mode -> LineFit

    def select(self, **criteria) -> list:
        return [p for p in self.points if all(getattr(p, key) == val for key, val in criteria.items())]


def default_k_schedule(c: float = 0.00016, q: float = 1.25, j_max: int = 27) -> np.ndarray:
    return c * q ** np.arange(j_max + 1)


def default_eps_list(j_max: int = 24) -> np.ndarray:
    return 10.0 ** (-np.arange(j_max + 1) / 2.0)


def fit_loglog(x, y) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 2:
        return LineFit(math.nan, math.nan, math.nan, int(lx.size))
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    return LineFit(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))), int(lx.size))


def first_step_feasibility(mesh, model: MaterialModel, m0, k: float, eps: float, mode: str,
                           iteration_cap: int = ITERATION_CAP, linear_tol: float = LINEAR_TOL,
                           linear_max_iter: int = LINEAR_MAX_ITER) -> tuple[bool, int, int]:
    """Solve the first time-step; returns ``(feasible, nonlinear its, linear its)``."""
    weights = fem.lumped_weights(mesh)
    Pi = imex_extrapolate(model, mesh, m0, m0)
    problem = StepProblem(m_i=m0, pi_field=Pi, k=k, model=model, mesh=mesh, weights=weights)
    try:
        if mode == "newton":
            rep = newton_solve(problem, eps, iteration_cap, linear_tol, linear_max_iter)
        else:
            rep = fixed_point_solve(problem, eps, iteration_cap)
    except NonConvergenceError as exc:
        rep = exc.report
        its = rep.iterations if rep is not None else iteration_cap
        lin = sum(rep.linear_iterations) if rep is not None else 0
        return False, its, lin
    return True, rep.iterations, sum(rep.linear_iterations)


def _threshold(N: int, pts: list) -> Threshold:
    pts = sorted(pts, key=lambda p: p.k)
    first_bad = next((i for i, p in enumerate(pts) if not p.feasible), None)
    if first_bad is None:
        return Threshold(N, 1.0 / N, pts[-1].k if pts else None, None)
    k_ok = pts[first_bad - 1].k if first_bad > 0 else None
    return Threshold(N, 1.0 / N, k_ok, pts[first_bad].k)


def cfl_sweep(h_list, k_schedule=None, eps: float = 1e-8, mode: str = "fixedpoint",
              model: MaterialModel | None = None, iteration_cap: int = ITERATION_CAP,
              linear_tol: float = LINEAR_TOL, linear_max_iter: int = LINEAR_MAX_ITER,
              stop_at_first_infeasible: bool = True, progress=None) -> SweepResult:
    """First-step feasibility of the hedgehog state over a (h, k) grid.

    ``h_list`` holds mesh sizes ``1/N``. Per h the threshold is the geometric
    mean of the last feasible and first infeasible k; the slope of
    ``log k_thresh`` against ``log h`` is fitted over all h with a bracket.
    With ``stop_at_first_infeasible`` the k grid is abandoned after the first
    failure, since only the bracket enters the threshold.
    """
    model = model or exchange_only()
    ks = default_k_schedule() if k_schedule is None else np.asarray(k_schedule, dtype=float)
    result = SweepResult(kind="cfl")
    for h in h_list:
        N = int(round(1.0 / h))
        mesh = build_unit_cube_mesh(N)
        m0 = hedgehog_initial(mesh)
        pts = []
        for k in ks:
            ok, its, lin = first_step_feasibility(mesh, model, m0, float(k), eps, mode, iteration_cap,
                                                  linear_tol, linear_max_iter)
            pt = SweepPoint(mode, N, 1.0 / N, float(k), eps, ok, its, linear_iterations=lin)
            pts.append(pt)
            if progress is not None:
                progress(pt)
            if not ok and stop_at_first_infeasible:
                break
        result.points.extend(pts)
        result.thresholds[(mode, N)] = _threshold(N, pts)
    bracketed = [t for (m, _), t in result.thresholds.items() if m == mode and t.k_thresh is not None]
    result.fits[(mode, "k_thresh")] = fit_loglog([t.h for t in bracketed], [t.k_thresh for t in bracketed])
    return result


def eps_sweep(h_list, k_per_h, eps_list=None, T: float = 5.0, modes=("fixedpoint", "newton"),
              model: MaterialModel | None = None, iteration_cap: int = ITERATION_CAP,
              linear_tol: float = LINEAR_TOL, linear_max_iter: int = LINEAR_MAX_ITER,
              progress=None) -> SweepResult:
    """Relax the hedgehog state to time T for every (h, eps, mode).

    Records the final-state deviations from unit length. For the Newton mode
    both deviation series are fitted against eps on a log-log scale per h.
    """
    model = model or exchange_only()
    eps_values = default_eps_list() if eps_list is None else np.asarray(eps_list, dtype=float)
    if len(k_per_h) != len(h_list):
        raise ValueError("k_per_h needs one time-step per mesh size")
    result = SweepResult(kind="eps")
    for h, k in zip(h_list, k_per_h):
        N = int(round(1.0 / h))
        mesh = build_unit_cube_mesh(N)
        m0 = hedgehog_initial(mesh)
        for mode in modes:
            for eps in eps_values:
                traj = run(mesh, model, m0, float(k), T, SchemeMode(mode, float(eps)), iteration_cap,
                           linear_tol, keep_states=False, linear_max_iter=linear_max_iter)
                above, below = unit_length_deviation(traj.final_state)
                its = max((r.iterations for r in traj.records), default=0)
                pt = SweepPoint(mode, N, 1.0 / N, float(k), float(eps), traj.feasible, its, above, below)
                result.points.append(pt)
                if progress is not None:
                    progress(pt)
            if mode == "newton":
                pts = [p for p in result.select(mode=mode, N=N) if p.feasible]
                for label in ("max_dev", "min_dev"):
                    result.fits[(mode, N, label)] = fit_loglog([p.eps for p in pts],
                                                               [getattr(p, label) for p in pts])
    return result
