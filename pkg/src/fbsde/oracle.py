"""Reference solutions: closed forms for the shipped problems and a nested
Monte Carlo brute-force estimator for cross-checks.

The normal CDF is evaluated through the C library's erfc, whose absolute
error is a few ulps (far below 1e-12), so oracle error is negligible
against Monte Carlo tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FbsdeProblem, ProblemCatalogEntry, TimeGrid
from .simulate import counter_normals

__all__ = [
    "ReferenceValue",
    "NestedEstimate",
    "norm_cdf",
    "black_scholes",
    "arctan_solution",
    "reference_for",
    "nested_mc_y0",
]


@dataclass(frozen=True)
class ReferenceValue:
    y0_ref: float
    z0_ref: float
    source: str


@dataclass(frozen=True)
class NestedEstimate:
    """Root value of a nested Monte Carlo run plus its standard error."""

    y0: float
    standard_error: float

    def __float__(self) -> float:
        return self.y0


def norm_cdf(x: float) -> float:
    """Standard normal CDF via erfc (absolute error well below 1e-12)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes(kind: str, S0: float, K: float, r: float, sigma: float,
                  T: float) -> ReferenceValue:
    """Initial (Y, Z) of the pricing problem in closed form.

    Call: y0 = exp(-rT) * (F*N(d+) - K*N(d-)) with F = S0*exp(rT) and
    d+- = (log(F/K) +- sigma^2 T / 2) / (sigma*sqrt(T)); z0 = sigma*N(d+)*S0.
    Put follows by parity: y0_put = y0_call - S0 + K*exp(-rT) and
    z0_put = sigma*S0*(N(d+) - 1).
    """
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    for name, value in (("S0", S0), ("K", K), ("sigma", sigma), ("T", T)):
        if not value > 0.0:
            raise ValueError(f"parameter {name!r} must be positive, got {value}")
    forward = S0 * math.exp(r * T)
    vol = sigma * math.sqrt(T)
    d_plus = (math.log(forward / K) + 0.5 * sigma * sigma * T) / vol
    d_minus = d_plus - vol
    discount = math.exp(-r * T)
    call_y0 = discount * (forward * norm_cdf(d_plus) - K * norm_cdf(d_minus))
    if kind == "call":
        return ReferenceValue(call_y0, sigma * norm_cdf(d_plus) * S0, "black_scholes_call")
    put_y0 = call_y0 - S0 + K * discount
    put_z0 = sigma * S0 * (norm_cdf(d_plus) - 1.0)
    return ReferenceValue(put_y0, put_z0, "black_scholes_put")


def arctan_solution(t: float, w):
    """Exact (y, z) of the arctan problem along a Brownian path at state w:
    y = -ln(1 + w^2)/2 + w*arctan(w), z = arctan(w)."""
    w = np.asarray(w, dtype=np.float64)
    y = -0.5 * np.log1p(w * w) + w * np.arctan(w)
    z = np.arctan(w)
    if w.ndim == 0:
        return float(y), float(z)
    return y, z


def reference_for(entry: ProblemCatalogEntry) -> ReferenceValue | None:
    """Closed-form reference for a catalog entry; None when there is none."""
    if entry.name in ("call", "put"):
        p = entry.parameters
        return black_scholes(entry.name, S0=float(p["S0"]), K=float(p["K"]),
                             r=float(p["r"]), sigma=float(p["sigma"]),
                             T=float(p.get("T", 1.0)))
    if entry.name == "arctan":
        return ReferenceValue(0.0, 0.0, "arctan_closed_form")
    return None


# Streams of the nested estimator are keyed away from path simulation.
_NESTED_STREAM_BASE = 0x6E65_7374  # "nest"


def _level_normals(seed: int, level: int, shape: tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape))
    blocks = (count + 3) // 4
    key = np.array([seed, _NESTED_STREAM_BASE + level], dtype=np.uint64)
    return counter_normals(key, 0, blocks)[:count].reshape(shape)


def nested_mc_y0(
    problem: FbsdeProblem,
    grid: TimeGrid,
    outer: int,
    inner: int,
    seed: int,
    node_budget: int = 20_000_000,
) -> NestedEstimate:
    """Brute-force Y0 estimate: the backward recursion with every
    conditional expectation replaced by an inner re-simulation.

    From each node the one-step values satisfy
    y_i = mean[y_{i+1} + delta_i * f(t_{i+1}, X_{i+1}, y_{i+1}, z_{i+1})]
    (explicit driver evaluation at t_{i+1}, so no Picard loop) and
    z_i = mean[y_{i+1} * dW_i] / delta_i, with terminal values phi(X_T) and
    sigma(T, X_T)*phi'(X_T).  The fan-out is ``outer`` at the root and
    ``inner`` below; configurations whose leaf count exceeds ``node_budget``
    are rejected.  Meant for coarse grids (N <= 4).
    """
    if outer < 2 or inner < 2:
        raise ValueError("outer and inner sample counts must be at least 2")
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    N = grid.n_steps
    leaves = outer * inner ** max(N - 1, 0)
    if leaves > node_budget:
        raise ValueError(
            f"nested run needs {leaves} leaf nodes, over the budget of {node_budget}"
        )
    times, deltas = grid.times, grid.deltas

    def branch(level: int, x: np.ndarray, fan: int):
        """One-step summands y_{next} + dt*f(...) of the nodes' children,
        plus the increment-weighted summands defining z."""
        dt = deltas[level]
        dw = _level_normals(seed, level, x.shape + (fan,)) * math.sqrt(dt)
        children = (
            x[..., None]
            + dt * np.asarray(problem.drift(times[level], x), dtype=np.float64)[..., None]
            + np.asarray(problem.diffusion(times[level], x), dtype=np.float64)[..., None] * dw
        )
        if level + 1 == N:
            v_next = np.asarray(problem.terminal(children), dtype=np.float64)
            z_next = (
                np.asarray(problem.diffusion(times[N], children), dtype=np.float64)
                * np.asarray(problem.terminal_gradient(children), dtype=np.float64)
            )
        else:
            s, zw = branch(level + 1, children, inner)
            v_next, z_next = s.mean(axis=-1), zw.mean(axis=-1)
        summands = v_next + dt * np.asarray(
            problem.driver(times[level + 1], children, v_next, z_next), dtype=np.float64
        )
        return summands, v_next * dw / dt

    root = np.asarray([problem.initial_state], dtype=np.float64)
    root_summands = branch(0, root, outer)[0][0]
    y0 = float(root_summands.mean())
    se = float(root_summands.std(ddof=1) / math.sqrt(outer))
    return NestedEstimate(y0=y0, standard_error=se)
