"""Deterministic multi-start local solver and cross-instance aggregation.

Each program is solved in gap coordinates (nonnegative segment lengths whose
cumulative sums are the switching times, so ordering holds by construction)
in three phases per start: a projected Levenberg-Marquardt restoration onto
the reachability manifold, an augmented-Lagrangian descent with L-BFGS-B
inner iterations and warm-started multipliers, and an active-set Newton
polish of the KKT system.  Aggregation re-simulates every converged solution
before trusting it and is bitwise reproducible for a fixed seed regardless
of the worker count.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .builder import NlpInstance, build_all
from .model import ProblemSpec
from .simulate import (
    SwitchingSchedule,
    evaluate_cost,
    propagate,
    schedule_from_times,
)

CONVERGED = "converged"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"

#: Cost ratio under which two verified solutions count as the same optimum.
TIE_REL_TOL = 1e-6

_ACTIVE_EPS = 1e-9


class InfeasibleProblemError(RuntimeError):
    """No program produced a verified transfer; x0 may be outside the
    reachable set, or the start budget was too small."""


@dataclass(frozen=True)
class SolverOptions:
    """Multi-start and tolerance knobs; defaults suit small systems."""

    starts: int = 64
    seed: int = 0
    max_iterations: int = 500
    kkt_tol: float = 1e-8
    feas_tol: float = 1e-8
    t_max: Optional[float] = None

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be at least 1")
        if self.kkt_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def horizon(self, instance: NlpInstance) -> float:
        """Time box: 50 slowest-mode time constants unless overridden."""
        if self.t_max is not None:
            return self.t_max
        slowest = min(abs(c) for c in instance.scaled_numerators)
        return 50.0 * instance.common_denominator / slowest


@dataclass(frozen=True)
class LocalSolution:
    """Best point one program's multi-start produced."""

    instance_id: str
    times: tuple[float, ...]
    cost: float
    kkt_residual: float
    constraint_residual: float
    status: str

    def as_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "times": list(self.times),
            "cost": self.cost,
            "kkt_residual": self.kkt_residual,
            "constraint_residual": self.constraint_residual,
            "status": self.status,
        }


@dataclass(frozen=True)
class BestSolution:
    """The verified least-cost schedule across all programs."""

    instance_id: str
    schedule: SwitchingSchedule
    cost: float
    final_time: float
    on_duration: float
    sparsity: float

    def as_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "schedule": {
                "breakpoints": list(self.schedule.breakpoints),
                "levels": list(self.schedule.levels),
            },
            "sequence": list(self.schedule.levels),
            "cost": self.cost,
            "final_time": self.final_time,
            "on_duration": self.on_duration,
            "sparsity": self.sparsity,
        }


@dataclass(frozen=True)
class SolveReport:
    """Per-program outcomes plus the selected optimum and its cost ties."""

    per_instance: tuple[LocalSolution, ...]
    best: Optional[BestSolution]
    ties: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "best": None if self.best is None else self.best.as_dict(),
            "ties": list(self.ties),
            "instances": [s.as_dict() for s in self.per_instance],
        }


def _gap_jacobian(time_jac: np.ndarray) -> np.ndarray:
    # chain rule through t_j = sum_{m <= j} gap_m: reverse cumulative sum
    return np.flip(np.cumsum(np.flip(time_jac, axis=1), axis=1), axis=1)


def _eval(instance: NlpInstance, gaps: np.ndarray):
    times = np.cumsum(gaps)
    c = instance.constraint_residuals(times)
    J = _gap_jacobian(instance.constraint_jacobian(times))
    return c, J


def _lm(instance, gaps, t_max, shift, max_iter=150, tol=1e-12):
    """Projected Levenberg-Marquardt on || reach(t) - x0 + shift ||."""
    c, J = _eval(instance, gaps)
    c = c + shift
    f = 0.5 * float(c @ c)
    nu = 1e-3
    eye = np.eye(len(gaps))
    for _ in range(max_iter):
        if np.max(np.abs(c)) <= tol:
            break
        improved = False
        for _attempt in range(40):
            try:
                step = np.linalg.solve(J.T @ J + nu * eye, -J.T @ c)
            except np.linalg.LinAlgError:
                nu *= 10.0
                continue
            trial = np.clip(gaps + step, 0.0, t_max)
            ct, Jt = _eval(instance, trial)
            ct = ct + shift
            ft = 0.5 * float(ct @ ct)
            if ft < f:
                gaps, c, J, f = trial, ct, Jt, ft
                nu = max(nu * 0.3, 1e-12)
                improved = True
                break
            nu *= 10.0
            if nu > 1e16:
                break
        if not improved:
            break
    return gaps, c


def _restore(instance, gaps, t_max, max_iter=150, tol=1e-12, continuation=True):
    """Pull a start onto the reachability manifold.

    Draws can land dozens of time constants out where the residual is
    astronomically large and Newton steps barely move, so the whole gap
    vector is first shrunk geometrically to its best overall scale.  When
    plain LM then stalls in a nearby local residual minimum, a continuation
    pass walks the target from a reachable fraction of x0 up to x0 itself
    with warm starts; far-off stalls usually mean the instance cannot reach
    x0 at all and are left as they are.
    """
    c, _ = _eval(instance, gaps)
    best_scale = 1.0
    best_norm = float(np.max(np.abs(c)))
    scale = 1.0
    for _ in range(60):
        scale *= 0.7
        c_s, _ = _eval(instance, scale * gaps)
        norm = float(np.max(np.abs(c_s)))
        if norm < best_norm:
            best_norm, best_scale = norm, scale
    draw = gaps.copy()
    gaps = best_scale * gaps
    x0 = np.array(instance.x0)
    scale = max(1.0, float(np.max(np.abs(x0))))
    zero = np.zeros_like(x0)
    gaps, c = _lm(instance, gaps, t_max, zero, max_iter=max_iter, tol=tol)
    stall = float(np.max(np.abs(c)))
    if stall <= 1e-8 * scale or not continuation or stall > 0.3 * scale:
        return gaps, c
    # continuation: walk the target reach = theta * x0 up to theta = 1,
    # seeded with the draw's structure rescaled to a fraction of the slowest
    # time constant (a degenerate all-equal-times seed has a rank-1 Jacobian)
    slowest = instance.common_denominator / min(
        abs(s) for s in instance.scaled_numerators
    )
    total = float(np.sum(draw))
    g = draw * (0.3 * slowest / total) if total > 0 else draw
    theta = 0.0
    step = 0.5
    for _ in range(24):
        trial_theta = min(1.0, theta + step)
        shift = (1.0 - trial_theta) * x0
        g_t, c_t = _lm(instance, g, t_max, shift, max_iter=100, tol=tol)
        if np.max(np.abs(c_t)) <= 1e-9 * scale:
            theta, g = trial_theta, g_t
            if theta >= 1.0:
                return g, c_t
            step = min(2.0 * step, 1.0 - theta)
        else:
            if np.max(np.abs(c_t)) <= 1e-2 * scale:
                g = g_t  # near the path: keep the progress, retry smaller
            step *= 0.5
            if step < 2e-3:
                break
    return gaps, c


def _ls_multipliers(J: np.ndarray, w: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    free = gaps > _ACTIVE_EPS
    if free.any():
        mult, *_ = np.linalg.lstsq(J[:, free].T, -w[free], rcond=None)
        return mult
    return np.zeros(J.shape[0])


def _kkt_state(instance, w, gaps, t_max, mult):
    c, J = _eval(instance, gaps)
    grad_l = w + J.T @ mult
    projected = np.where(
        gaps <= _ACTIVE_EPS,
        np.minimum(grad_l, 0.0),
        np.where(gaps >= t_max - _ACTIVE_EPS, np.maximum(grad_l, 0.0), grad_l),
    )
    return float(np.max(np.abs(c))), float(np.max(np.abs(projected)))


def _polish(instance, w, gaps, mult, t_max, feas_tol, kkt_tol):
    """Newton iterations on the active-set KKT system, merit safeguarded."""
    n = instance.order
    gaps = np.where(gaps < _ACTIVE_EPS, 0.0, gaps.copy())
    feas, kkt = _kkt_state(instance, w, gaps, t_max, mult)
    best = (gaps.copy(), mult.copy(), feas, kkt)
    for _ in range(80):
        if feas <= feas_tol * 1e-2 and kkt <= kkt_tol * 1e-2:
            break
        times = np.cumsum(gaps)
        c = instance.constraint_residuals(times)
        A = instance.constraint_jacobian(times)
        J = _gap_jacobian(A)
        grad_l = w + J.T @ mult
        # free set: positive gaps plus bound coords pushed off the bound
        free = np.where((gaps > _ACTIVE_EPS) | (grad_l < -kkt_tol * 1e-2))[0]
        if len(free) == 0:
            break
        rhs = -np.concatenate([grad_l[free], c])
        # Hessian of mult . c is diagonal in time coordinates
        h_t = (mult * (-instance._lam)) @ A
        suffix = np.flip(np.cumsum(np.flip(h_t)))
        H = suffix[np.maximum.outer(free, free)]
        system = np.block(
            [[H, J[:, free].T], [J[:, free], np.zeros((n, n))]]
        )
        try:
            delta = np.linalg.solve(system + 1e-13 * np.eye(len(free) + n), rhs)
        except np.linalg.LinAlgError:
            break
        d_gap, d_mult = delta[: len(free)], delta[len(free):]
        alpha = 1.0
        shrinking = d_gap < 0.0
        if shrinking.any():
            alpha = min(1.0, float(np.min(-gaps[free][shrinking] / d_gap[shrinking])))
        stepped = False
        for _bt in range(25):
            trial = gaps.copy()
            trial[free] = np.maximum(gaps[free] + alpha * d_gap, 0.0)
            trial_mult = mult + alpha * d_mult
            f_t, k_t = _kkt_state(instance, w, trial, t_max, trial_mult)
            scaled_now = max(feas, kkt * 1e-3)
            scaled_new = max(f_t, k_t * 1e-3)
            if scaled_new < scaled_now or (f_t + k_t) < (feas + kkt) * 0.999:
                gaps, mult, feas, kkt = trial, trial_mult, f_t, k_t
                stepped = True
                break
            alpha *= 0.5
        if not stepped:
            break
        gaps = np.where(gaps < 1e-12, 0.0, gaps)
        if feas + kkt < best[2] + best[3]:
            best = (gaps.copy(), mult.copy(), feas, kkt)
    if feas + kkt > best[2] + best[3]:
        gaps, mult, feas, kkt = best
    return gaps, mult, feas, kkt


def _slsqp(instance, gaps, t_max, w, max_iter=400):
    """Sequential quadratic programming fallback for stiff instances."""
    try:
        result = minimize(
            lambda g: float(w @ g),
            gaps,
            jac=lambda g: w,
            method="SLSQP",
            bounds=[(0.0, t_max)] * len(gaps),
            constraints=[
                {
                    "type": "eq",
                    "fun": lambda g: _eval(instance, g)[0],
                    "jac": lambda g: _eval(instance, g)[1],
                }
            ],
            options={"maxiter": max_iter, "ftol": 1e-14},
        )
    except (ValueError, np.linalg.LinAlgError):
        return gaps
    out = np.clip(result.x, 0.0, t_max)
    return out if np.all(np.isfinite(out)) else gaps


def _start_seed(seed: int, instance_id: str, start: int) -> np.random.Generator:
    digest = zlib.crc32(instance_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, digest, start]))


def solve_nlp(instance: NlpInstance, options: SolverOptions) -> LocalSolution:
    """Best local solution of one program over the deterministic starts."""
    K = instance.slot_count
    n = instance.order
    w = instance.gap_weights
    t_max = options.horizon(instance)
    bounds = [(0.0, t_max)] * K
    mean_gap = t_max / (4.0 * n)
    best: Optional[tuple] = None

    x0_scale = max(1.0, float(np.max(np.abs(instance.x0))))
    rescue_failures = 0
    for start in range(options.starts):
        rng = _start_seed(options.seed, instance.instance_id, start)
        gaps = rng.exponential(mean_gap, K)
        gaps, c = _restore(
            instance, gaps, t_max, continuation=rescue_failures < 3
        )
        if np.max(np.abs(c)) > 1e-6 * x0_scale:
            rescue_failures += 1
            record = (
                INFEASIBLE,
                float(w @ gaps),
                np.cumsum(gaps),
                float(np.max(np.abs(c))),
                float("inf"),
            )
        else:
            _, J = _eval(instance, gaps)
            mult = _ls_multipliers(J, w, gaps)
            mu = 1e3 * max(1.0, float(np.max(w)))
            eta = 1e-4
            gtol = 1e-9
            budget = options.max_iterations
            for _outer in range(15):
                def augmented(g):
                    c, J = _eval(instance, g)
                    shifted = mult + mu * c
                    value = float(w @ g + mult @ c + 0.5 * mu * (c @ c))
                    return value, w + J.T @ shifted

                result = minimize(
                    augmented,
                    gaps,
                    jac=True,
                    method="L-BFGS-B",
                    bounds=bounds,
                    options={
                        "maxiter": min(250, budget),
                        "ftol": 1e-18,
                        "gtol": gtol,
                    },
                )
                gaps = result.x
                budget -= result.nit
                c, J = _eval(instance, gaps)
                feas = float(np.max(np.abs(c)))
                if feas <= eta:
                    mult = mult + mu * c
                    eta = max(eta * 0.1, 1e-10)
                    gtol = max(gtol * 0.2, 1e-12)
                else:
                    mu = min(mu * 10.0, 1e12)
                if feas <= 1e-8 or budget <= 0:
                    break
            gaps, mult, feas, kkt = _polish(
                instance, w, gaps, mult, t_max, options.feas_tol, options.kkt_tol
            )
            converged = feas <= options.feas_tol and kkt <= options.kkt_tol
            if not converged and feas <= 1e-2 * x0_scale:
                # near the manifold but stalled: the penalty valley of stiff
                # instances can defeat the quasi-Newton inner loop, so hand
                # the start to an SQP step
                alt = _slsqp(instance, gaps, t_max, w)
                _, J_alt = _eval(instance, alt)
                alt_mult = _ls_multipliers(J_alt, w, alt)
                alt, alt_mult, feas_a, kkt_a = _polish(
                    instance, w, alt, alt_mult, t_max,
                    options.feas_tol, options.kkt_tol,
                )
                if (feas_a <= options.feas_tol and kkt_a <= options.kkt_tol) or (
                    feas_a + kkt_a < feas + kkt
                ):
                    gaps, mult, feas, kkt = alt, alt_mult, feas_a, kkt_a
                    converged = feas <= options.feas_tol and kkt <= options.kkt_tol
            record = (
                CONVERGED if converged else ITERATION_LIMIT,
                float(w @ gaps),
                np.cumsum(gaps),
                feas,
                kkt,
            )
        if best is None or _record_key(record) < _record_key(best):
            best = record

    status, cost, times, feas, kkt = best
    return LocalSolution(
        instance_id=instance.instance_id,
        times=tuple(float(t) for t in times),
        cost=float(instance.cost_value(times)),
        kkt_residual=kkt,
        constraint_residual=feas,
        status=status,
    )


def _record_key(record):
    status, cost, _times, feas, _kkt = record
    # converged beats everything, then lowest cost; otherwise lowest residual
    return (status != CONVERGED, cost if status == CONVERGED else feas)


def decode_schedule(instance: NlpInstance, times: Sequence[float]) -> SwitchingSchedule:
    """Condense solved times into a schedule (collapse, merge, trim)."""
    return schedule_from_times(instance.levels, times)


def _thread_count(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("TIMEFUEL_THREADS", "1"))
    return max(1, threads)


def solve_time_fuel(
    spec: ProblemSpec,
    options: SolverOptions = SolverOptions(),
    threads: Optional[int] = None,
) -> SolveReport:
    """Solve every program, verify against the simulator, keep the cheapest.

    A converged program only competes after its decoded schedule, propagated
    from x0, lands on the origin within 10x the feasibility tolerance.  Cost
    ties are broken by fewer switchings, then smaller final time, then id.
    """
    instances = build_all(spec)
    workers = _thread_count(threads)
    if workers > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solutions = list(pool.map(lambda i: solve_nlp(i, options), instances))
    else:
        solutions = [solve_nlp(i, options) for i in instances]
    order = sorted(range(len(instances)), key=lambda i: instances[i].instance_id)
    instances = [instances[i] for i in order]
    solutions = [solutions[i] for i in order]

    verified: list[tuple[float, int, float, str, SwitchingSchedule]] = []
    best_residual = float("inf")
    for inst, sol in zip(instances, solutions):
        best_residual = min(best_residual, sol.constraint_residual)
        if sol.status != CONVERGED:
            continue
        schedule = decode_schedule(inst, sol.times)
        terminal = propagate(spec.system, spec.x0, schedule).terminal_state
        if float(np.max(np.abs(terminal), initial=0.0)) > 10.0 * options.feas_tol:
            continue
        cost, _on, _sp = evaluate_cost(schedule, spec.k)
        verified.append(
            (cost, schedule.switch_count, schedule.final_time, inst.instance_id, schedule)
        )
    if not verified:
        raise InfeasibleProblemError(
            "no program converged and verified: x0 may be outside the "
            f"reachable set (best constraint residual {best_residual:.3e}); "
            "raising `starts` may help if the problem is feasible"
        )
    min_cost = min(v[0] for v in verified)
    ties = sorted(
        (v for v in verified if v[0] <= min_cost * (1.0 + TIE_REL_TOL) + 1e-300),
        key=lambda v: (v[1], v[2], v[3]),
    )
    cost, _switches, final_time, instance_id, schedule = ties[0]
    cost, on, sparsity = evaluate_cost(schedule, spec.k)
    best = BestSolution(
        instance_id=instance_id,
        schedule=schedule,
        cost=cost,
        final_time=schedule.final_time,
        on_duration=on,
        sparsity=sparsity,
    )
    return SolveReport(
        per_instance=tuple(solutions),
        best=best,
        ties=tuple(v[3] for v in ties),
    )
