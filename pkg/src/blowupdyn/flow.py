"""Trajectories, the local linear flow of an equilibrium, and phase-portrait data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .hamsys import HamiltonianSystem, energy, vector_field
from .roots import parallel_map

__all__ = [
    "Trajectory",
    "LinearFlow",
    "PortraitData",
    "FlowError",
    "NonDiagonalizableError",
    "integrate",
    "solve_ode",
    "linear_flow",
    "portrait",
]

RK45_RTOL = 1e-9
RK45_ATOL = 1e-12
COND_LIMIT = 1e8
ESCAPE_FACTOR = 10.0


class FlowError(ValueError):
    pass


class NonDiagonalizableError(FlowError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    truncated: bool = False
    message: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.energies = np.asarray(self.energies, dtype=float)
        n = len(self.times)
        if len(self.states) != n or len(self.energies) != n:
            raise FlowError("times, states and energies must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise FlowError("times must be strictly increasing")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def energy_drift(self) -> float:
        """max |H(t) - H(t0)| along the trajectory."""
        return float(np.max(np.abs(self.energies - self.energies[0]))) if len(self.energies) else 0.0

    def write_csv(self, path, names: Sequence[str]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *names, "H"])
            for t, s, h in zip(self.times, self.states, self.energies):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in s), repr(float(h))])


# ---------------------------------------------------------------- integrators


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dp_step(f, t, y, h):
    ks = []
    for c, row in zip(_DP_C, _DP_A):
        yi = y + h * sum((a * k for a, k in zip(row, ks)), np.zeros_like(y))
        ks.append(f(t + c * h, yi))
    K = np.array(ks)
    y5 = y + h * (_DP_B5 @ K)
    err = h * ((_DP_B5 - _DP_B4) @ K)
    return y5, err


def solve_ode(
    f: Callable,
    y0,
    t_end: float,
    dt: float,
    method: str = "rk4",
    stop: Callable | None = None,
):
    """Integrate ``y' = f(t, y)`` from 0 to ``t_end``.

    Returns ``(times, states, message)``; ``message`` is non-empty when
    ``stop(y)`` ended the run early or the field could not be evaluated.
    rk4 uses a fixed step, shortening only the last one to land on
    ``t_end``; rk45 adapts the step to relative tolerance 1e-9 with ``dt``
    as the first trial step.
    """
    if not dt > 0:
        raise FlowError("dt must be positive")
    if not t_end > 0:
        raise FlowError("t_end must be positive")
    if method not in ("rk4", "rk45"):
        raise FlowError(f"unknown method {method!r}; use rk4 or rk45")
    y = np.array(y0, dtype=float)
    t = 0.0
    times, states = [t], [y.copy()]
    message = ""
    h = dt
    while t < t_end and not message:
        h = min(h, t_end - t)
        try:
            if method == "rk4":
                y_new, t_new = _rk4_step(f, t, y, h), t + h
                h = dt
            else:
                y5, err = _dp_step(f, t, y, h)
                scale = RK45_ATOL + RK45_RTOL * np.maximum(np.abs(y), np.abs(y5))
                enorm = float(np.sqrt(np.mean((err / scale) ** 2)))
                if not math.isfinite(enorm) or enorm > 1.0:
                    fac = 0.2 if not math.isfinite(enorm) else max(0.2, 0.9 * enorm**-0.2)
                    h *= fac
                    if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
                        raise FlowError(f"step size underflow at t={t!r}")
                    continue
                y_new, t_new = y5, t + h
                h *= min(5.0, 0.9 * enorm**-0.2) if enorm > 0 else 5.0
        except (ex.ExpressionError, OverflowError) as err:
            message = f"field evaluation failed at t={t!r}: {err}"
            break
        if not np.all(np.isfinite(y_new)):
            message = f"state became non-finite at t={t_new!r}"
            break
        if t_new <= t:
            raise FlowError(f"step size underflow at t={t!r}")
        t, y = t_new, y_new
        times.append(t)
        states.append(y.copy())
        if stop is not None and stop(y):
            message = f"left the region at t={t!r}"
    return np.array(times), np.array(states), message


def integrate(
    sys: HamiltonianSystem,
    s0,
    t_end: float,
    dt: float,
    method: str = "rk4",
    backward: bool = False,
    stop: Callable | None = None,
) -> Trajectory:
    """Trajectory of the Hamiltonian field, recording H at every step.

    With ``backward=True`` the run goes to ``-t_end``; the returned times are
    still increasing (they end at 0).
    """
    s0 = sys.check_state(s0)
    sign = -1.0 if backward else 1.0

    def f(_t, y):
        return sign * np.array(sys._f(y))

    times, states, msg = solve_ode(f, s0, t_end, dt, method, stop)
    if backward:
        times, states = -times[::-1], states[::-1]
    energies = np.array([energy(sys, s) for s in states])
    return Trajectory(times, states, energies, truncated=bool(msg), message=msg)


# ----------------------------------------------------------------- linear flow


@dataclass
class LinearFlow:
    """x(t) = sum_m c_m A_m exp(lambda_m t) for x' = J x."""

    jacobian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns A_m
    coefficients: np.ndarray
    condition: float

    def evaluate(self, t) -> np.ndarray:
        x = self.eigenvectors @ (self.coefficients * np.exp(self.eigenvalues * t))
        return np.real(x)

    def __call__(self, t):
        return self.evaluate(t)


def linear_flow(J, x0) -> LinearFlow:
    """Eigen-expansion of the linear flow from ``x0``.

    Raises NonDiagonalizableError when the eigenvector matrix is singular
    or has condition number >= 1e8.
    """
    J = np.asarray(J, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or x0.shape != (J.shape[0],):
        raise FlowError("J must be square and match x0")
    lam, V = np.linalg.eig(J)
    cond = float(np.linalg.cond(V))
    if not math.isfinite(cond) or cond >= COND_LIMIT:
        raise NonDiagonalizableError(
            f"matrix is non-diagonalizable (eigenvector condition number {cond:.3g})"
        )
    c = np.linalg.solve(V, x0.astype(complex))
    return LinearFlow(J, lam, V, c, cond)


# -------------------------------------------------------------------- portrait


@dataclass
class PortraitData:
    seeds: np.ndarray
    trajectories: list
    field_points: np.ndarray
    field_vectors: np.ndarray  # normalized, plotted pair only
    pair: tuple
    window: tuple
    base: np.ndarray = field(repr=False, default=None)

    @property
    def truncated(self) -> list:
        return [tr.truncated for tr in self.trajectories]


def _seed_grid(window, n):
    if n <= 0:
        return np.zeros((0, 2))
    k = math.ceil(math.sqrt(n))
    (x0, x1), (y0, y1) = window
    xs = [x0 + (i + 0.5) * (x1 - x0) / k for i in range(k)]
    ys = [y0 + (j + 0.5) * (y1 - y0) / k for j in range(k)]
    pts = [(x, y) for y in ys for x in xs]
    return np.array(pts[:n])


def portrait(
    sys: HamiltonianSystem,
    window,
    seeds: int,
    t_span: float,
    dt: float = 1e-2,
    pair: tuple | None = None,
    base=None,
    field_grid: int = 15,
    method: str = "rk4",
) -> PortraitData:
    """Seed trajectories over a window of one (coordinate, momentum) pair.

    ``window`` is ``((lo, hi), (lo, hi))`` for the plotted pair, by default
    the first coordinate and its momentum; the remaining state entries are
    taken from ``base`` (zero by default). Each seed is integrated forward
    and backward for ``t_span``; a run is cut and flagged once it leaves
    the window enlarged ten times about its centre.
    """
    window = tuple((float(lo), float(hi)) for lo, hi in window)
    if len(window) != 2 or any(not hi > lo for lo, hi in window):
        raise FlowError("window must be two nondegenerate intervals")
    if seeds < 0:
        raise FlowError("seeds must be >= 0")
    if pair is None:
        pair = (0, sys.dof)
    i, j = pair
    base = np.zeros(sys.dim) if base is None else sys.check_state(base).copy()
    mid = np.array([(lo + hi) / 2 for lo, hi in window])
    half = np.array([(hi - lo) / 2 for lo, hi in window])

    def outside(y):
        return bool(np.any(np.abs(np.array([y[i], y[j]]) - mid) > ESCAPE_FACTOR * half))

    def lift(pt):
        s = base.copy()
        s[i], s[j] = pt
        return s

    def run(pt):
        s0 = lift(pt)
        fwd = integrate(sys, s0, t_span, dt, method, stop=outside)
        bwd = integrate(sys, s0, t_span, dt, method, backward=True, stop=outside)
        msg = "; ".join(m for m in (bwd.message, fwd.message) if m)
        return Trajectory(
            np.concatenate([bwd.times, fwd.times[1:]]),
            np.concatenate([bwd.states, fwd.states[1:]]),
            np.concatenate([bwd.energies, fwd.energies[1:]]),
            truncated=fwd.truncated or bwd.truncated,
            message=msg,
        )

    pts = _seed_grid(window, seeds)
    trajs = parallel_map(run, list(pts))

    gx = np.linspace(*window[0], field_grid)
    gy = np.linspace(*window[1], field_grid)
    fpts, fvec = [], []
    for y in gy:
        for x in gx:
            try:
                v = vector_field(sys, lift((x, y)))
                w = np.array([v[i], v[j]])
            except ex.ExpressionError:
                w = np.array([math.nan, math.nan])
            n = float(np.linalg.norm(w))
            fpts.append((x, y))
            fvec.append(w / n if n > 0 else np.zeros(2))
    return PortraitData(pts, trajs, np.array(fpts), np.array(fvec), (i, j), window, base)
