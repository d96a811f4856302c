"""Backward sweeps: the regression-later scheme and the classical
regression-now implicit scheme.

Regression-later fits the *next-time* value as a function of the next
state (coefficients alpha), reads Z off that fit by differentiation, fits
the driver the same way (beta), and steps backward through the exact
one-step conditional expectation of the basis:

    Y_{t_i} = (alpha + beta * delta_i) . E[e_i(X_{t_{i+1}}) | X_{t_i}].

One regression target per step is a conditional expectation; Z needs no
increment-weighted regression.  Regression-now approximates both
E[Y_{t_{i+1}} | F_{t_i}] and the increment-weighted expectation defining Z
by regressions on the time-t_i design and resolves the implicit Y equation
with a short Picard iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet
from .model import FbsdeProblem, TimeGrid
from .regress import Coefficients, DesignMatrix, project
from .simulate import PathEnsemble

__all__ = [
    "SolverResult",
    "NowStepDiagnostics",
    "NumericalError",
    "solve_regress_later",
    "solve_regress_now",
]


class NumericalError(RuntimeError):
    """A sweep produced non-finite values."""


@dataclass(frozen=True, eq=False)
class NowStepDiagnostics:
    """Fit diagnostics of one regression-now step."""

    step: int
    cond_value: float
    cond_zweight: float
    picard_iterations: int
    picard_gap: float


@dataclass(eq=False)
class SolverResult:
    """Initial-time estimates plus per-step records of one backward sweep."""

    y0: float
    z0: float
    per_step: list
    scheme: str
    runtime_ms: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def max_condition(self) -> float:
        conds = self.diagnostics.get("condition", [])
        return max(conds) if conds else float("nan")


def _check_inputs(problem: FbsdeProblem, grid: TimeGrid, basis: BasisSet,
                  paths: PathEnsemble) -> None:
    if paths.grid != grid:
        raise ValueError("path ensemble was generated on a different grid")
    if basis.grid != grid:
        raise ValueError("basis transition was built on a different grid")
    if basis.problem is not problem:
        raise ValueError("basis transition was built for a different problem")
    if not np.all(paths.states[:, 0] == problem.initial_state):
        raise ValueError("path ensemble does not start at the problem's initial state")


def _require_finite(arr: np.ndarray, step: int, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite {what} at step {step}")


def solve_regress_later(
    problem: FbsdeProblem,
    grid: TimeGrid,
    basis: BasisSet,
    paths: PathEnsemble,
    ridge: float = 0.0,
) -> SolverResult:
    """Run the regression-later backward sweep on a simulated ensemble.

    Per step i (from N-1 down to 0): project the pathwise next-time value
    onto the basis at X_{t_{i+1}} (alpha), differentiate that fit for the
    pathwise Z at t_{i+1}, project the driver values (beta), then evaluate
    the fitted value at t_i through the exact conditional expectation.
    The initial pair is read off the step-0 fit:
    y0 = (alpha + beta*delta_0) . cond_exp(0, x0) and
    z0 = sigma(0, x0) * (alpha + beta*delta_0) . cond_exp_grad(0, x0).
    """
    started = time.perf_counter()
    _check_inputs(problem, grid, basis, paths)
    times, deltas, N = grid.times, grid.deltas, grid.n_steps
    states = paths.states

    target = np.asarray(problem.terminal(states[:, N]), dtype=np.float64)
    _require_finite(target, N - 1, "terminal values")

    per_step: list = [None] * N
    max_abs_y = [0.0] * N
    for i in range(N - 1, -1, -1):
        x_next = states[:, i + 1]
        design = DesignMatrix.at_next_state(basis, paths, i)
        _require_finite(design.entries, i, "basis values")
        alpha, cond_a = project(design, target, ridge=ridge)

        z_next = (basis.grad(i, x_next) @ alpha) * problem.diffusion(times[i + 1], x_next)
        f_next = np.asarray(
            problem.driver(times[i + 1], x_next, target, z_next), dtype=np.float64
        )
        _require_finite(f_next, i, "driver values")
        beta, cond_b = project(design, f_next, ridge=ridge)

        per_step[i] = Coefficients(
            alpha=alpha, beta=beta, condition_estimate=max(cond_a, cond_b), step=i
        )
        weights = alpha + deltas[i] * beta
        target = basis.cond_exp(i, states[:, i]) @ weights
        _require_finite(target, i, "fitted values")
        max_abs_y[i] = float(np.max(np.abs(target)))

    x0 = problem.initial_state
    weights = per_step[0].alpha + deltas[0] * per_step[0].beta
    y0 = float(basis.cond_exp(0, x0) @ weights)
    sigma0 = float(np.asarray(problem.diffusion(times[0], np.asarray([x0], dtype=np.float64)))[0])
    z0 = sigma0 * float(basis.cond_exp_grad(0, x0) @ weights)
    if not (np.isfinite(y0) and np.isfinite(z0)):
        raise NumericalError("non-finite initial values at step 0")

    return SolverResult(
        y0=y0,
        z0=z0,
        per_step=per_step,
        scheme="later",
        runtime_ms=(time.perf_counter() - started) * 1e3,
        diagnostics={
            "condition": [c.condition_estimate for c in per_step],
            "max_abs_y": max_abs_y,
        },
    )


def solve_regress_now(
    problem: FbsdeProblem,
    grid: TimeGrid,
    basis: BasisSet,
    paths: PathEnsemble,
    picard_iters: int = 5,
    picard_tol: float = 1e-10,
    ridge: float = 0.0,
) -> SolverResult:
    """Run the implicit backward sweep with regression-now conditional
    expectations on the same ensemble interface as the later scheme.

    Per step i >= 1: regress the pathwise next-time values and their
    increment-weighted counterparts on the basis at X_{t_i}, then solve the
    implicit equation y = E_hat[Y_{t_{i+1}}] + delta_i * f(t_i, x, y, z) by
    Picard iteration (delta * Lipschitz(f) < 1 makes it a contraction; a
    capped iteration that stops short is reported, not raised).  At i = 0
    the sigma-algebra is trivial and both regressions collapse to sample
    means.
    """
    started = time.perf_counter()
    _check_inputs(problem, grid, basis, paths)
    if picard_iters < 1:
        raise ValueError("picard_iters must be at least 1")
    times, deltas, N = grid.times, grid.deltas, grid.n_steps
    states, increments = paths.states, paths.increments

    y = np.asarray(problem.terminal(states[:, N]), dtype=np.float64)
    _require_finite(y, N - 1, "terminal values")

    per_step: list = [None] * N
    max_abs_y = [0.0] * N

    def picard(e_y, x, z, t, dt):
        current = e_y.copy()
        gap = float("inf")
        for it in range(1, picard_iters + 1):
            proposal = e_y + dt * np.asarray(problem.driver(t, x, current, z), dtype=np.float64)
            gap = float(np.max(np.abs(proposal - current)))
            current = proposal
            if gap < picard_tol:
                break
        return current, it, gap

    for i in range(N - 1, 0, -1):
        x_i = states[:, i]
        design = DesignMatrix(entries=basis.eval(i, x_i), step=i)
        _require_finite(design.entries, i, "basis values")
        coef_y, cond_y = project(design, y, ridge=ridge)
        e_y = design.entries @ coef_y
        coef_z, cond_z = project(design, y * increments[:, i] / deltas[i], ridge=ridge)
        z = design.entries @ coef_z
        y, iters, gap = picard(e_y, x_i, z, times[i], deltas[i])
        _require_finite(y, i, "fitted values")
        max_abs_y[i] = float(np.max(np.abs(y)))
        per_step[i] = NowStepDiagnostics(
            step=i, cond_value=cond_y, cond_zweight=cond_z,
            picard_iterations=iters, picard_gap=gap,
        )

    # At t_0 the conditioning sigma-algebra is trivial: regressions are means.
    x0 = problem.initial_state
    e_y0 = np.array([float(y.mean())])
    z0 = float((y * increments[:, 0]).mean() / deltas[0])
    y0_arr, iters, gap = picard(
        e_y0, np.asarray([x0], dtype=np.float64), np.asarray([z0]), times[0], deltas[0]
    )
    y0 = float(y0_arr[0])
    max_abs_y[0] = abs(y0)
    per_step[0] = NowStepDiagnostics(
        step=0, cond_value=1.0, cond_zweight=1.0,
        picard_iterations=iters, picard_gap=gap,
    )
    if not (np.isfinite(y0) and np.isfinite(z0)):
        raise NumericalError("non-finite initial values at step 0")

    return SolverResult(
        y0=y0,
        z0=z0,
        per_step=per_step,
        scheme="now",
        runtime_ms=(time.perf_counter() - started) * 1e3,
        diagnostics={
            "condition": [max(d.cond_value, d.cond_zweight) for d in per_step],
            "max_abs_y": max_abs_y,
            "picard_iterations": [d.picard_iterations for d in per_step],
            "picard_gap": [d.picard_gap for d in per_step],
        },
    )
