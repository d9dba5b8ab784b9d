"""Small dense eigenproblems and equilibrium classification (dimension 2 or 4)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EPS = np.finfo(float).eps

# Relative tolerance used by classify() and the degeneracy test.
DEFAULT_TOL = 1e-8

TAGS = (
    "StableNode",
    "UnstableNode",
    "InflectedNode",
    "StableFocus",
    "UnstableFocus",
    "Center",
    "Saddle",
    "Degenerate",
    "Product",
    "Unpaired",
)


@dataclass(frozen=True)
class Classification:
    tag: str
    factors: tuple = ()
    summary: str = ""
    pairing: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown classification tag {self.tag!r}")

    def __str__(self):
        if self.tag == "Product":
            return f"Product({', '.join(self.factors)})"
        return self.tag


def chop(M, rel=64.0):
    """Zero entries that sit at rounding-noise level relative to the matrix."""
    M = np.array(M, dtype=float)
    thresh = rel * EPS * max(1.0, float(np.max(np.abs(M))) if M.size else 0.0)
    M[np.abs(M) <= thresh] = 0.0
    return M


def charpoly(M) -> np.ndarray:
    """Monic characteristic polynomial coefficients (highest degree first), Faddeev-LeVerrier."""
    A = np.asarray(M, dtype=float)
    n = A.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(A)
    c = 1.0
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + c * eye
        c = -np.trace(A @ Mk) / k
        coeffs.append(c)
    return np.array(coeffs)


def _polyval_derivs(coeffs, x, order):
    """Values of p, p', ..., p^(order) at x (Horner with derivative accumulation)."""
    out = [0j] * (order + 1)
    for a in coeffs:
        for j in range(order, 0, -1):
            out[j] = out[j] * x + out[j - 1]
        out[0] = out[0] * x + a
    fact = 1
    for j in range(2, order + 1):
        fact *= j
        out[j] *= fact
    return out


def _abs_bound(coeffs, x, order):
    return [abs(v) for v in _polyval_derivs(np.abs(coeffs), abs(x), order)]


def _newton_poly(coeffs, x, deriv=0, iters=8):
    for _ in range(iters):
        vals = _polyval_derivs(coeffs, x, deriv + 1)
        f, df = vals[deriv], vals[deriv + 1]
        if df == 0:
            break
        nx = x - f / df
        if abs(_polyval_derivs(coeffs, nx, deriv)[deriv]) >= abs(f):
            break
        x = nx
    return x


def _merge_clusters(coeffs, roots, scale):
    """Collapse root clusters that are numerically one multiple root.

    A perturbed k-fold root splits by ~eps^(1/k); the cluster mean is well
    conditioned. The merge is accepted only if p and its first k-1
    derivatives vanish at the refined mean to rounding level.
    """
    roots = list(roots)
    n = len(roots)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) <= 1e-3 * scale:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = list(roots)
    for members in groups.values():
        k = len(members)
        if k < 2:
            continue
        mu = sum(roots[i] for i in members) / k
        mu = _newton_poly(coeffs, mu, deriv=k - 1)
        vals = _polyval_derivs(coeffs, mu, k - 1)
        bounds = _abs_bound(coeffs, mu, k - 1)
        if all(abs(vals[j]) <= 1e-12 * max(bounds[j], 1e-300) for j in range(k)):
            for i in members:
                out[i] = mu
    return out


def _sort_key(z):
    return (round(z.real, 12), round(z.imag, 12), z.real, z.imag)


def eigenvalues(M) -> tuple:
    """Eigenvalues of a 2x2 or 4x4 real matrix, sorted by (real, imag).

    2x2 uses the trace/determinant formula, with the discriminant snapped to
    zero at rounding level so repeated eigenvalues come out exactly equal.
    4x4 uses the characteristic polynomial (Faddeev-LeVerrier), companion
    roots, Newton polishing and multiple-root cluster merging.
    """
    A = chop(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n == 2:
        (a, b), (c, d) = A
        half = (a - d) / 2.0
        disc = half * half + b * c
        if abs(disc) <= 8 * EPS * (half * half + abs(b * c)):
            disc = 0.0
        mid = (a + d) / 2.0
        if disc >= 0:
            r = math.sqrt(disc)
            vals = [complex(mid - r, 0.0), complex(mid + r, 0.0)]
        else:
            r = math.sqrt(-disc)
            vals = [complex(mid, -r), complex(mid, r)]
        return tuple(sorted(vals, key=_sort_key))
    if n == 4:
        coeffs = charpoly(A)
        roots = [complex(z) for z in np.roots(coeffs)] if np.any(coeffs[1:]) else []
        roots += [0j] * (4 - len(roots))
        roots = [_newton_poly(coeffs, z) for z in roots]
        scale = max(1.0, max(abs(z) for z in roots))
        roots = _merge_clusters(coeffs, roots, scale)
        cleaned = []
        for z in roots:
            re_, im_ = z.real, z.imag
            if abs(im_) <= 64 * EPS * scale:
                im_ = 0.0
            cleaned.append(complex(re_, im_))
        cleaned.sort(key=_sort_key)
        return tuple(cleaned)
    raise ValueError(f"unsupported dimension {n}; expected 2 or 4")


def spectral_radius(eigs) -> float:
    return max((abs(z) for z in eigs), default=0.0)


def is_degenerate(eigs, tol: float = DEFAULT_TOL) -> bool:
    """Degeneracy rule: some |lambda| < tol * max(1, spectral radius)."""
    bound = tol * max(1.0, spectral_radius(eigs))
    return any(abs(z) < bound for z in eigs)


def _classify_pair(l1: complex, l2: complex, tol: float, rho: float) -> Classification:
    summary = f"{_fmt(l1)}, {_fmt(l2)}"
    if rho == 0.0 or abs(l1) < tol * rho or abs(l2) < tol * rho:
        return Classification("Degenerate", summary=summary)
    if max(abs(l1.imag), abs(l2.imag)) > tol * rho:
        re_ = (l1.real + l2.real) / 2
        if abs(re_) <= tol * rho:
            return Classification("Center", summary=summary)
        return Classification("UnstableFocus" if re_ > 0 else "StableFocus", summary=summary)
    a, b = l1.real, l2.real
    if a * b < 0:
        return Classification("Saddle", summary=summary)
    sign = "positive" if a > 0 else "negative"
    if abs(a - b) <= tol * max(abs(a), abs(b)):
        return Classification("InflectedNode", summary=f"{summary} (equal, {sign})")
    return Classification("UnstableNode" if a > 0 else "StableNode", summary=summary)


def classify(eigs, tol: float = DEFAULT_TOL) -> Classification:
    """Classify an equilibrium from its 2 or 4 eigenvalues.

    All thresholds are relative to the spectral radius, so the result is
    unchanged when the spectrum is multiplied by a positive scalar.
    Four eigenvalues are split into two planar pairs: a +/- symmetric real
    pair first, otherwise a complex-conjugate pair; anything else is
    reported as ``Unpaired``.
    """
    eigs = [complex(z) for z in eigs]
    rho = spectral_radius(eigs)
    if len(eigs) == 2:
        return _classify_pair(eigs[0], eigs[1], tol, rho)
    if len(eigs) != 4:
        raise ValueError("classify expects 2 or 4 eigenvalues")
    summary = ", ".join(_fmt(z) for z in eigs)
    if rho == 0.0 or any(abs(z) < tol * rho for z in eigs):
        return Classification("Degenerate", summary=summary)
    is_real = [abs(z.imag) <= tol * rho for z in eigs]
    idx = range(4)
    # +/- symmetric real pair
    for i in idx:
        for j in idx:
            if i < j and is_real[i] and is_real[j]:
                a, b = eigs[i].real, eigs[j].real
                if a * b < 0 and abs(a + b) <= tol * rho:
                    rest = [eigs[k] for k in idx if k not in (i, j)]
                    return _product((eigs[i], eigs[j]), tuple(rest), tol, rho, summary)
    # complex-conjugate pair
    for i in idx:
        for j in idx:
            if i < j and not is_real[i] and not is_real[j]:
                if abs(eigs[i] - eigs[j].conjugate()) <= tol * rho:
                    k, l = (k for k in idx if k not in (i, j))
                    rest = [eigs[k], eigs[l]]
                    if (is_real[k] and is_real[l]) or abs(eigs[k] - eigs[l].conjugate()) <= tol * rho:
                        return _product((eigs[i], eigs[j]), tuple(rest), tol, rho, summary)
    return Classification("Unpaired", summary=summary)


def _product(first, second, tol, rho, summary):
    c1 = _classify_pair(*first, tol, rho)
    c2 = _classify_pair(*second, tol, rho)
    return Classification("Product", factors=(c1.tag, c2.tag), summary=summary, pairing=(first, second))


def _fmt(z: complex) -> str:
    if z.imag == 0:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{'+' if z.imag >= 0 else '-'}{abs(z.imag):.6g}i"
