"""Trajectory matching and terrain-parameter fitting against force traces.

The fit is a bounded Nelder-Mead search over
``(log10 E, friction, restitution, particle_size, rolling_resistance)``.
Each axis is normalised to ``[0, 1]`` by its bounds, trial points that leave
the box are projected back onto it, and axes whose bounds collapse to a point
are held fixed and dropped from the simplex.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (BudgetTooSmall, CalibrationFailed, DomainError, NoOverlap, ValidationError,
                     ZeroReference)
from .terrain.contact import TerrainParams
from .terrain.dig import DigScenario
from .traces import ForceTrace, PoseTrace

log = logging.getLogger(__name__)

GRID_POINTS = 200
FIELDS = ("young_modulus", "friction", "restitution", "particle_size", "rolling_resistance")
LOG_FIELDS = frozenset({"young_modulus"})

# Search box; restitution and particle size are frozen at the initial value
# unless bounds are given for them.
DEFAULT_BOUNDS = {
    "young_modulus": (0.5e6, 40e6),
    "friction": (0.3, 1.0),
    "rolling_resistance": (0.0, 0.5),
}

# First simplex: one vertex per free axis, offset from the initial point by
# these amounts in search coordinates (decades for E).  When the offset would
# leave the box it is taken in the opposite direction.
SIMPLEX_OFFSETS = {
    "young_modulus": 0.5,
    "friction": 0.1,
    "restitution": 0.1,
    "particle_size": 0.01,
    "rolling_resistance": 0.1,
}

# reflection, expansion, contraction, shrink
NM_COEFFS = (1.0, 2.0, 0.5, 0.5)


# ----------------------------------------------------------------------------
# metrics


def _common_grid(a_t, b_t, n):
    lo = max(a_t[0], b_t[0])
    hi = min(a_t[-1], b_t[-1])
    if not hi > lo:
        raise NoOverlap(f"time ranges [{a_t[0]}, {a_t[-1]}] and [{b_t[0]}, {b_t[-1]}] "
                        "do not overlap")
    return np.linspace(lo, hi, n)


def peak_error(sim: ForceTrace, meas: ForceTrace) -> float:
    """Percent difference of the maximum forces, relative to the measured one."""
    ref = float(np.max(meas.f))
    if ref == 0.0:
        raise ZeroReference("measured trace has zero maximum force")
    return 100.0 * abs(float(np.max(sim.f)) - ref) / ref


def avg_error(sim: ForceTrace, meas: ForceTrace, n: int = GRID_POINTS) -> float:
    """Mean absolute difference on a common grid, percent of the mean measured force."""
    grid = _common_grid(sim.t, meas.t, n)
    fs = np.interp(grid, sim.t, sim.f)
    fm = np.interp(grid, meas.t, meas.f)
    ref = float(np.mean(fm))
    if ref == 0.0:
        raise ZeroReference("measured trace has zero mean force over the overlap")
    return 100.0 * float(np.mean(np.abs(fs - fm))) / ref


def trajectory_match(sim: PoseTrace, meas: PoseTrace, n: int = GRID_POINTS) -> Tuple[float, float]:
    """RMSE of blade height (mm) and bucket angle (rad) on a common grid."""
    grid = _common_grid(sim.t, meas.t, n)
    dy = np.interp(grid, sim.t, sim.y_p8) - np.interp(grid, meas.t, meas.y_p8)
    da = np.interp(grid, sim.t, sim.theta4) - np.interp(grid, meas.t, meas.theta4)
    return float(np.sqrt(np.mean(dy ** 2))), float(np.sqrt(np.mean(da ** 2)))


# ----------------------------------------------------------------------------
# problem and result


@dataclass(frozen=True)
class CalibrationProblem:
    measured: ForceTrace
    initial: TerrainParams = field(default_factory=TerrainParams)
    scenario: DigScenario = field(default_factory=DigScenario)
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    weights: Tuple[float, float] = (0.5, 0.5)  # (peak, avg)
    budget: int = 60

    def __post_init__(self):
        full = {name: (getattr(self.initial, name),) * 2 for name in FIELDS}
        full.update(DEFAULT_BOUNDS)
        for name, b in self.bounds.items():
            if name not in FIELDS:
                raise ValidationError(f"unknown calibration parameter {name!r}")
            full[name] = b
        for name, (lo, hi) in full.items():
            lo, hi = float(lo), float(hi)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValidationError(f"bounds for {name} must be finite with lo <= hi")
            if name in LOG_FIELDS and lo <= 0:
                raise ValidationError(f"bounds for {name} must be positive")
            v = getattr(self.initial, name)
            if not lo <= v <= hi:
                raise ValidationError(f"initial {name}={v} outside bounds [{lo}, {hi}]")
            full[name] = (lo, hi)
        object.__setattr__(self, "bounds", full)
        wp, wa = self.weights
        if wp < 0 or wa < 0 or wp + wa == 0:
            raise ValidationError("weights must be non-negative and not both zero")
        if self.budget < 1:
            raise ValidationError("budget must be at least 1")

    @property
    def free(self) -> Tuple[str, ...]:
        return tuple(n for n in FIELDS if self.bounds[n][0] < self.bounds[n][1])

    def in_bounds(self, params: TerrainParams) -> bool:
        return all(lo <= getattr(params, n) <= hi for n, (lo, hi) in self.bounds.items())


@dataclass(frozen=True)
class Evaluation:
    index: int
    params: TerrainParams
    objective: float
    peak_error_pct: float
    avg_error_pct: float


@dataclass
class CalibrationResult:
    fitted: TerrainParams
    objective: float
    peak_error_pct: float
    avg_error_pct: float
    initial: TerrainParams
    initial_peak_error_pct: float
    initial_avg_error_pct: float
    history: List[Evaluation]
    evaluations: int
    converged: bool
    weights: Tuple[float, float] = (0.5, 0.5)

    def best_so_far(self) -> List[float]:
        """Best objective after each evaluation; never increases."""
        out, best = [], math.inf
        for h in self.history:
            best = min(best, h.objective)
            out.append(best)
        return out


# ----------------------------------------------------------------------------
# objective


def _score(params: TerrainParams, problem: CalibrationProblem):
    try:
        sim = problem.scenario.run(params)
        pk = peak_error(sim, problem.measured)
        av = avg_error(sim, problem.measured)
    except DomainError as exc:
        log.warning("evaluation failed for %s: %s", params, exc)
        return math.inf, math.nan, math.nan
    wp, wa = problem.weights
    return wp * pk + wa * av, pk, av


def evaluate(params: TerrainParams, problem: CalibrationProblem) -> float:
    """Weighted peak and average force error of one simulated dig cycle.

    Simulation failures (for instance an unstable step) score ``inf``.
    """
    if not problem.in_bounds(params):
        raise ValidationError("parameters outside the calibration bounds")
    return _score(params, problem)[0]


# ----------------------------------------------------------------------------
# search


class _Space:
    """Map between parameter sets and normalised search coordinates."""

    def __init__(self, problem: CalibrationProblem):
        self.problem = problem
        self.names = problem.free
        lo, hi = [], []
        for n in self.names:
            a, b = problem.bounds[n]
            if n in LOG_FIELDS:
                a, b = math.log10(a), math.log10(b)
            lo.append(a)
            hi.append(b)
        self.lo = np.array(lo)
        self.span = np.array(hi) - self.lo
        self.u0 = self.encode(problem.initial)

    def raw(self, params):
        return np.array([math.log10(getattr(params, n)) if n in LOG_FIELDS else getattr(params, n)
                         for n in self.names])

    def encode(self, params) -> np.ndarray:
        return (self.raw(params) - self.lo) / self.span

    def decode(self, u) -> TerrainParams:
        u = np.clip(u, 0.0, 1.0)
        if np.array_equal(u, self.u0):
            # 10 ** log10(E) need not give E back; the start point is exact
            return self.problem.initial
        changes = {}
        for n, v in zip(self.names, self.lo + u * self.span):
            v = 10.0 ** v if n in LOG_FIELDS else float(v)
            lo, hi = self.problem.bounds[n]
            changes[n] = min(max(v, lo), hi)
        return self.problem.initial.replace(**changes)


def initial_simplex(problem: CalibrationProblem) -> np.ndarray:
    space = _Space(problem)
    u0 = space.encode(problem.initial)
    pts = [u0]
    for k, n in enumerate(space.names):
        step = SIMPLEX_OFFSETS[n] / space.span[k]
        u = u0.copy()
        u[k] = u0[k] + step if u0[k] + step <= 1.0 else u0[k] - step
        pts.append(np.clip(u, 0.0, 1.0))
    return np.array(pts)


class _Evaluator:
    """Budgeted objective with memoisation of repeated points."""

    def __init__(self, problem, space, jobs):
        self.problem = problem
        self.space = space
        self.jobs = max(1, int(jobs))
        self.history: List[Evaluation] = []
        self.cache = {}

    @property
    def left(self):
        return self.problem.budget - len(self.history)

    def many(self, us: Sequence[np.ndarray]) -> List[Optional[float]]:
        """Objectives for ``us`` in order; ``None`` once the budget runs out."""
        params = [self.space.decode(u) for u in us]
        keys = [tuple(getattr(p, n) for n in FIELDS) for p in params]
        todo, seen = [], set()
        for k, p in zip(keys, params):
            if k not in self.cache and k not in seen and len(todo) < self.left:
                todo.append((k, p))
                seen.add(k)
        if self.jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=min(self.jobs, len(todo))) as ex:
                scores = list(ex.map(_score, [p for _, p in todo],
                                     [self.problem] * len(todo)))
        else:
            scores = [_score(p, self.problem) for _, p in todo]
        for (k, p), (obj, pk, av) in zip(todo, scores):
            self.cache[k] = obj
            self.history.append(Evaluation(len(self.history), p, obj, pk, av))
        return [self.cache.get(k) for k in keys]

    def one(self, u):
        return self.many([u])[0]


def calibrate(problem: CalibrationProblem, *, jobs: int = 1, xtol: float = 1e-3) -> CalibrationResult:
    """Fit the terrain parameters to ``problem.measured``.

    Stops when the evaluation budget is spent or the normalised simplex
    diameter falls below ``xtol``, and returns the best parameters seen.
    ``jobs > 1`` evaluates the first simplex and shrink steps in worker
    processes; results are identical to a serial run.
    """
    space = _Space(problem)
    dim = len(space.names)
    if problem.budget < dim + 1:
        raise BudgetTooSmall(f"budget {problem.budget} is below {dim + 1} evaluations "
                             f"for {dim} free parameters")
    ev = _Evaluator(problem, space, jobs)
    alpha, gamma, rho, sigma = NM_COEFFS

    simplex = initial_simplex(problem)
    fvals = np.array(ev.many(list(simplex)), dtype=float)
    converged = False

    def order():
        # stable sort keeps the lower vertex index first on ties
        o = np.argsort(fvals, kind="stable")
        return simplex[o], fvals[o]

    while dim > 0 and ev.left > 0:
        simplex, fvals = order()
        if fvals[0] == 0.0:
            converged = True
            break
        if np.max(np.abs(simplex[1:] - simplex[0])) < xtol:
            converged = True
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = np.clip(centroid + alpha * (centroid - worst), 0.0, 1.0)
        fr = ev.one(xr)
        if fr is None:
            break
        if fr < fvals[0]:
            xe = np.clip(centroid + gamma * (xr - centroid), 0.0, 1.0)
            fe = ev.one(xe)
            if fe is not None and fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = np.clip(centroid + rho * (xr - centroid), 0.0, 1.0)
        else:
            xc = np.clip(centroid + rho * (worst - centroid), 0.0, 1.0)
        fc = ev.one(xc)
        if fc is None:
            break
        if fc < min(fr, fvals[-1]):
            simplex[-1], fvals[-1] = xc, fc
            continue
        shrunk = [simplex[0] + sigma * (x - simplex[0]) for x in simplex[1:]]
        fs = ev.many(shrunk)
        for k, (x, f) in enumerate(zip(shrunk, fs)):
            if f is not None:
                simplex[k + 1], fvals[k + 1] = x, f

    finite = [h for h in ev.history if math.isfinite(h.objective)]
    if not finite:
        raise CalibrationFailed("every objective evaluation failed")
    best = min(finite, key=lambda h: (h.objective, h.index))
    first = ev.history[0]
    return CalibrationResult(
        fitted=best.params, objective=best.objective,
        peak_error_pct=best.peak_error_pct, avg_error_pct=best.avg_error_pct,
        initial=problem.initial, initial_peak_error_pct=first.peak_error_pct,
        initial_avg_error_pct=first.avg_error_pct, history=ev.history,
        evaluations=len(ev.history), converged=converged, weights=tuple(problem.weights),
    )
