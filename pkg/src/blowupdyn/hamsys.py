"""Hamiltonian systems: canonical vector fields, equilibria, linearization."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .linalg import DEFAULT_TOL, Classification, classify, eigenvalues, is_degenerate
from .roots import damped_newton, grid_points, parallel_map, refine_singular_root

__all__ = [
    "HamiltonianSystem",
    "EquilibriumPoint",
    "SystemError",
    "NotAnEquilibriumError",
    "build_system",
    "load_system",
    "simple_pendulum_torque",
    "double_pendulum_torque",
    "harmonic_oscillator",
    "vector_field",
    "energy",
    "jacobian",
    "field_scale",
    "find_equilibria",
    "analyze_equilibrium",
    "PRESETS",
]

RESIDUAL_TOL = 1e-9
DEDUP_DIST = 1e-6


class SystemError(ValueError):
    pass


class NotAnEquilibriumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    hamiltonian: ex.Expression
    coordinates: tuple
    momenta: tuple
    parameters: Mapping[str, float]
    name: str = "custom"
    source: str = ""
    # derived
    bound_hamiltonian: ex.Expression = field(init=False, repr=False)
    field_expressions: tuple = field(init=False, repr=False)
    jacobian_expressions: tuple = field(init=False, repr=False)

    def __post_init__(self):
        coords, moms = tuple(self.coordinates), tuple(self.momenta)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "momenta", moms)
        object.__setattr__(self, "parameters", dict(self.parameters))
        if len(coords) != len(moms) or len(coords) not in (1, 2):
            raise SystemError("need 1 or 2 coordinates and as many momenta")
        names = list(coords) + list(moms)
        if len(set(names)) != len(names):
            raise SystemError(f"coordinate/momentum names collide: {names}")
        clash = set(names) & set(self.parameters)
        if clash:
            raise SystemError(f"parameter names collide with state names: {sorted(clash)}")
        unbound = ex.free_variables(self.hamiltonian) - set(names) - set(self.parameters)
        if unbound:
            raise SystemError(f"unbound symbols in hamiltonian: {sorted(unbound)}")
        H = ex.bind(self.hamiltonian, self.parameters)
        dq = [ex.differentiate(H, p) for p in moms]
        dp = [-ex.differentiate(H, q) for q in coords]
        fields = tuple(dq + dp)
        jac = tuple(tuple(ex.differentiate(f, v) for v in names) for f in fields)
        object.__setattr__(self, "bound_hamiltonian", H)
        object.__setattr__(self, "field_expressions", fields)
        object.__setattr__(self, "jacobian_expressions", jac)
        object.__setattr__(self, "_h", ex.compile_expressions([H], names))
        object.__setattr__(self, "_f", ex.compile_expressions(fields, names))
        object.__setattr__(
            self, "_j", ex.compile_expressions([e for row in jac for e in row], names)
        )

    @property
    def dof(self) -> int:
        return len(self.coordinates)

    @property
    def dim(self) -> int:
        return 2 * self.dof

    @property
    def state_names(self) -> tuple:
        return self.coordinates + self.momenta

    def check_state(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).ravel()
        if s.size != self.dim:
            raise ValueError(f"state must have length {self.dim}, got {s.size}")
        return s

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "hamiltonian": ex.to_string(self.hamiltonian) if not self.source else self.source,
            "coordinates": list(self.coordinates),
            "momenta": list(self.momenta),
            "parameters": dict(self.parameters),
        }


@dataclass
class EquilibriumPoint:
    state: np.ndarray
    energy: float
    jacobian: np.ndarray
    eigenvalues: tuple
    classification: Classification
    degenerate: bool
    residual: float = 0.0


def build_system(
    h_text: str,
    coords: Sequence[str],
    momenta: Sequence[str],
    params: Mapping[str, float] | None = None,
    name: str = "custom",
) -> HamiltonianSystem:
    H = ex.parse(h_text)
    return HamiltonianSystem(H, tuple(coords), tuple(momenta), dict(params or {}), name=name, source=h_text)


SIMPLE_PENDULUM_H = "p^2/(2*m*L^2) - m*g*L*cos(phi) - T*phi"
DOUBLE_PENDULUM_H = (
    "(p1^2/2 + p2^2 - cos(phi1 - phi2)*p1*p2)/(m*L^2*(1 + sin(phi1 - phi2)^2))"
    " - 2*m*g*L*cos(phi1) - m*g*L*cos(phi2) + 2*m*g*L*phi1 + m*g*L*phi2"
)


def simple_pendulum_torque(m=1.0, g=1.0, L=1.0, T=None) -> HamiltonianSystem:
    """Pendulum under a constant torque; T defaults to m*g*L (the degenerate case)."""
    if T is None:
        T = m * g * L
    return build_system(
        SIMPLE_PENDULUM_H, ["phi"], ["p"], {"m": m, "g": g, "L": L, "T": T}, name="simple-pendulum-torque"
    )


def double_pendulum_torque(m=1.0, g=1.0, L=1.0) -> HamiltonianSystem:
    """Equal-mass, equal-length double pendulum with torques 2mgL and mgL."""
    return build_system(
        DOUBLE_PENDULUM_H,
        ["phi1", "phi2"],
        ["p1", "p2"],
        {"m": m, "g": g, "L": L},
        name="double-pendulum-torque",
    )


def harmonic_oscillator(k=1.0, m=1.0) -> HamiltonianSystem:
    return build_system("p^2/(2*m) + k*q^2/2", ["q"], ["p"], {"k": k, "m": m}, name="oscillator")


PRESETS = {
    "simple-pendulum-torque": simple_pendulum_torque,
    "double-pendulum-torque": double_pendulum_torque,
    "oscillator": harmonic_oscillator,
}


def load_system(path, overrides: Mapping[str, float] | None = None) -> HamiltonianSystem:
    """Read a system definition file (JSON, or YAML by extension).

    Required keys: ``hamiltonian`` (str), ``coordinates`` and ``momenta``
    (lists of names), ``parameters`` (name -> number). ``name`` is optional.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise SystemError("system file must contain a mapping")
    missing = {"hamiltonian", "coordinates", "momenta"} - set(doc)
    if missing:
        raise SystemError(f"system file missing keys: {sorted(missing)}")
    params = doc.get("parameters") or {}
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise SystemError("parameters must map names to numbers")
    params = {k: float(v) for k, v in params.items()}
    params.update(overrides or {})
    return build_system(
        str(doc["hamiltonian"]),
        list(doc["coordinates"]),
        list(doc["momenta"]),
        params,
        name=str(doc.get("name", path.stem)),
    )


# ------------------------------------------------------------------- numerics


def vector_field(sys: HamiltonianSystem, s) -> np.ndarray:
    """(dH/dp..., -dH/dq...) at state ``s`` (coordinates first, then momenta)."""
    return np.array(sys._f(sys.check_state(s)))


def energy(sys: HamiltonianSystem, s) -> float:
    return sys._h(sys.check_state(s))[0]


def jacobian(sys: HamiltonianSystem, s) -> np.ndarray:
    n = sys.dim
    return np.array(sys._j(sys.check_state(s))).reshape(n, n)


def field_scale(sys: HamiltonianSystem, s) -> float:
    """Largest field norm over the corners of the unit box around ``s``."""
    s = sys.check_state(s)
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=sys.dim):
        try:
            best = max(best, float(np.linalg.norm(vector_field(sys, s + np.array(signs)))))
        except ex.ExpressionError:
            continue
    return best


def residual_ok(sys, s, tol=RESIDUAL_TOL) -> tuple[bool, float]:
    res = float(np.linalg.norm(vector_field(sys, s)))
    return res <= tol * (1.0 + field_scale(sys, s)), res


def analyze_equilibrium(sys: HamiltonianSystem, s, tol: float = DEFAULT_TOL) -> EquilibriumPoint:
    """Jacobian, eigenvalues, classification and energy of an equilibrium."""
    s = sys.check_state(s)
    ok, res = residual_ok(sys, s)
    if not ok:
        raise NotAnEquilibriumError(f"vector field norm {res:.3g} at {s.tolist()} is not zero")
    J = jacobian(sys, s)
    eigs = eigenvalues(J)
    degenerate = is_degenerate(eigs, tol)
    cls = Classification("Degenerate", summary="zero eigenvalue") if degenerate else classify(eigs, tol)
    return EquilibriumPoint(
        state=s,
        energy=energy(sys, s),
        jacobian=J,
        eigenvalues=eigs,
        classification=cls,
        degenerate=degenerate,
        residual=res,
    )


def _in_box(x, box, slack=1e-9):
    return all(lo - slack * (1 + hi - lo) <= v <= hi + slack * (1 + hi - lo) for v, (lo, hi) in zip(x, box))


def find_equilibria(
    sys: HamiltonianSystem,
    box,
    grid=11,
    tol: float = 1e-12,
    diagnostics: dict | None = None,
) -> list[EquilibriumPoint]:
    """Multi-start damped Newton on the vector field over a seed grid.

    Roots outside ``box`` are discarded; duplicates closer than 1e-6 are
    merged; the result is sorted lexicographically by state.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != sys.dim:
        raise ValueError(f"box needs {sys.dim} intervals")
    if any(not hi > lo for lo, hi in box):
        raise ValueError("box intervals must be nondegenerate")
    if (np.isscalar(grid) and grid < 2) or (not np.isscalar(grid) and min(grid) < 2):
        raise ValueError("grid must be >= 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    F = sys._f
    J = lambda x: jacobian(sys, x)  # noqa: E731
    seeds = grid_points(box, grid)

    def solve(seed):
        x, ok = damped_newton(F, J, seed, tol)
        if not ok:
            return None
        x = refine_singular_root(F, J, x)
        good, _ = residual_ok(sys, x)
        return x if good else None

    results = parallel_map(solve, list(seeds))
    roots = [r for r in results if r is not None]
    inside = [r for r in roots if _in_box(r, box)]
    inside.sort(key=lambda r: tuple(r))
    unique: list[np.ndarray] = []
    for r in inside:
        if not any(np.linalg.norm(r - u) < DEDUP_DIST for u in unique):
            unique.append(r)
    if diagnostics is not None:
        diagnostics.update(
            seeds=len(seeds),
            converged=len(roots),
            nonconvergent=len(seeds) - len(roots),
            outside_box=len(roots) - len(inside),
            unique=len(unique),
            newton_tol=tol,
            dedup_distance=DEDUP_DIST,
        )
    return [analyze_equilibrium(sys, u) for u in unique]


def fd_jacobian_of_field(sys: HamiltonianSystem, s, h: float = 1e-6) -> np.ndarray:
    from .roots import fd_jacobian

    return fd_jacobian(lambda x: vector_field(sys, x), sys.check_state(s), h)


def known_equilibrium(name: str) -> np.ndarray:
    """Known degenerate points of the presets."""
    if name == "simple-pendulum-torque":
        return np.array([math.pi / 2, 0.0])
    if name == "double-pendulum-torque":
        return np.array([-math.pi / 2, -math.pi / 2, 0.0, 0.0])
    raise KeyError(name)
