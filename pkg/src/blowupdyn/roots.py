"""Damped Newton iteration and refinement of roots with a singular Jacobian."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .expr import ExpressionError

MAX_ITER = 50
MAX_HALVINGS = 20


def _safe(F, x):
    try:
        v = np.asarray(F(x), dtype=float)
    except (ExpressionError, ValueError, ZeroDivisionError, OverflowError):
        return None
    if not np.all(np.isfinite(v)):
        return None
    return v


def damped_newton(
    F: Callable, J: Callable, x0, tol: float, max_iter: int = MAX_ITER, max_halvings: int = MAX_HALVINGS
):
    """Newton with step halving. Returns ``(x, converged)``.

    The step is a least-squares solve, so singular Jacobians do not abort the
    iteration; convergence means ``|F(x)| <= tol``.
    """
    x = np.array(x0, dtype=float)
    fx = _safe(F, x)
    if fx is None:
        return x, False
    nf = np.linalg.norm(fx)
    polish = 0
    for it in range(2 * max_iter):
        if nf == 0.0 or polish > max_iter:
            break
        if nf <= tol:
            # keep going while the residual still drops: multiple roots
            # converge only linearly and stop far above rounding level
            polish += 1
        elif it >= max_iter:
            break
        jx = _safe(J, x)
        if jx is None:
            return x, nf <= tol
        step = np.linalg.lstsq(jx, -fx, rcond=None)[0]
        alpha = 1.0
        for _h in range(max_halvings + 1):
            xn = x + alpha * step
            fn = _safe(F, xn)
            if fn is not None and np.linalg.norm(fn) < nf:
                break
            alpha *= 0.5
        else:
            break
        if polish and alpha < 1.0:
            break
        x, fx, nf = xn, fn, np.linalg.norm(fn)
    return x, nf <= tol


def fd_jacobian(F: Callable, x, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        step = h * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.asarray(F(x + e), float) - np.asarray(F(x - e), float)) / (2 * step))
    return np.stack(cols, axis=-1)


def refine_singular_root(F: Callable, J: Callable, x, null_tol: float = 1e-6, iters: int = 30):
    """Sharpen a root at which the Jacobian is (nearly) singular.

    Plain Newton stalls at ~sqrt(eps) accuracy at a multiple root because
    the residual is flat there. The stacked system ``F(x) = 0, J(x) V = 0``,
    with ``V`` spanning the numerical null space of ``J``, has a regular
    root at the same point, so Gauss-Newton on it converges to rounding level.
    """
    x = np.array(x, dtype=float)
    jx = _safe(J, x)
    if jx is None:
        return x
    s = np.linalg.svd(jx, compute_uv=False)
    k = int(np.sum(s < null_tol * max(1.0, s[0])))
    if k == 0:
        return x

    def nullspace(jm):
        _, _, vt = np.linalg.svd(jm)
        return vt[-k:].T

    def residual(y, V):
        fy = _safe(F, y)
        jy = _safe(J, y)
        if fy is None or jy is None:
            return None
        return np.concatenate([fy, (jy @ V).ravel()])

    best = x
    for _ in range(iters):
        jx = _safe(J, x)
        if jx is None:
            break
        V = nullspace(jx)
        r = residual(x, V)
        if r is None:
            break
        dJV = fd_jacobian(lambda y: (np.asarray(J(y), float) @ V).ravel(), x)
        A = np.vstack([jx, dJV])
        step = np.linalg.lstsq(A, -r, rcond=None)[0]
        xn = x + step
        rn = residual(xn, V)
        if rn is None or np.linalg.norm(rn) > np.linalg.norm(r):
            break
        x = xn
        best = x
        if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    return best


def grid_points(box, grid):
    """Uniform seed grid over a box; ``grid`` is an int or one count per axis."""
    box = [(float(lo), float(hi)) for lo, hi in box]
    counts = [grid] * len(box) if np.isscalar(grid) else list(grid)
    if len(counts) != len(box):
        raise ValueError("grid must give one count per box dimension")
    axes = [np.linspace(lo, hi, int(c)) for (lo, hi), c in zip(box, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("BLOWUPDYN_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map; uses a thread pool when BLOWUPDYN_THREADS > 1."""
    n = thread_count()
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
