"""Command-line front end: ``blowupdyn analyze | portrait | verify``.

Exit codes: 0 success, 2 bad input, 3 no equilibria found (analyze) or a
failed check (verify returns 1).
"""

from __future__ import annotations

import argparse
import cmath
import csv
import functools
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import expr as ex
from .blowup import (
    BlowUpError,
    angular_equilibria,
    hyperspherical_chart,
    paper_fixture,
    polar_chart,
    recursive_blowup,
)
from .flow import FlowError, portrait
from .hamsys import (
    PRESETS,
    NotAnEquilibriumError,
    SystemError as ModelError,
    analyze_equilibrium,
    find_equilibria,
    load_system,
    known_equilibrium,
)
from .linalg import classify, eigenvalues

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3

PHYSICAL = ("m", "g", "L")
FIXTURE_FOR = {"simple-pendulum-torque": "simple-eq7", "double-pendulum-torque": "double-eq17"}


class InputError(Exception):
    pass


# ------------------------------------------------------------ serialization


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([obj.real, obj.imag], indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _eigs(eigs):
    return [[z.real, z.imag] for z in eigs]


# ------------------------------------------------------------ model loading


def _number(text: str) -> float:
    try:
        return float(ex.evaluate(ex.parse(text), {}))
    except (ex.ExpressionError, KeyError) as err:
        raise InputError(f"not a number: {text!r} ({err})") from None


def parse_params(items) -> dict:
    out = {}
    for item in items or []:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise InputError(f"parameter {part!r} is not key=value")
            k, v = part.split("=", 1)
            out[k.strip()] = _number(v.strip())
    for k in PHYSICAL:
        if k in out and not out[k] > 0:
            raise InputError(f"parameter {k} must be positive")
    return out


def parse_box(text: str, dim: int):
    box = []
    for part in text.split(","):
        if ":" not in part:
            raise InputError(f"box interval {part!r} is not lo:hi")
        lo, hi = part.split(":", 1)
        box.append((_number(lo), _number(hi)))
    if len(box) != dim:
        raise InputError(f"box needs {dim} intervals, got {len(box)}")
    if any(not hi > lo for lo, hi in box):
        raise InputError("box intervals must satisfy lo < hi")
    return box


def default_box(dim: int):
    return [(-math.pi, math.pi)] * (dim // 2) + [(-1.0, 1.0)] * (dim // 2)


def load_model(args):
    params = parse_params(args.param)
    if bool(args.preset) == bool(args.model):
        raise InputError("give exactly one of --preset or --model")
    if args.preset:
        if args.preset not in PRESETS:
            raise InputError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        try:
            return PRESETS[args.preset](**params), args.preset
        except TypeError as err:
            raise InputError(f"bad parameters for {args.preset}: {err}") from None
    path = Path(args.model)
    if not path.is_file():
        raise InputError(f"model file not found: {path}")
    try:
        return load_system(path, params), None
    except (ValueError, OSError, ex.ExpressionError) as err:
        raise InputError(f"cannot load model {path}: {err}") from None
    except Exception as err:  # yaml errors and the like
        raise InputError(f"cannot load model {path}: {err}") from None


# ---------------------------------------------------------------- analysis


def _ae_dict(ae, label=None):
    d = {
        "label": label,
        "angles": list(ae.angles),
        "canonical_angles": list(ae.canonical),
        "energy": ae.energy,
        "jacobian": ae.jacobian,
        "eigenvalues": _eigs(ae.eigenvalues),
        "classification": str(ae.classification),
        "degenerate": ae.degenerate,
        "isolated": ae.isolated,
        "residual": ae.residual,
    }
    if ae.published is not None:
        d["matches_published_point"] = ae.published
    if ae.standard is not None:
        d["standard_order"] = {
            "jacobian": ae.standard["jacobian"],
            "eigenvalues": _eigs(ae.standard["eigenvalues"]),
            "classification": str(ae.standard["classification"]),
        }
    return d


def _chart_dict(chart):
    return {
        "source": chart.source,
        "center": list(chart.center),
        "shifted": chart.shifted,
        "radial": chart.radial,
        "angles": list(chart.angles),
        "order": chart.order,
        "angle_ranges": [list(r) for r in chart.angle_ranges],
        "notes": list(chart.notes),
    }


def _node_dict(node):
    d = {
        "angles": list(node.equilibrium.angles),
        "classification": str(node.equilibrium.classification),
        "status": node.status,
        "message": node.message,
    }
    if node.chart is not None:
        d["chart"] = _chart_dict(node.chart)
        d["children"] = [_node_dict(c) for c in node.children]
    return d


def _fixture_applies(preset, model, eq) -> bool:
    if preset not in FIXTURE_FOR:
        return False
    if np.linalg.norm(eq.state - known_equilibrium(preset)) > 1e-6:
        return False
    p = model.parameters
    if preset == "simple-pendulum-torque":
        return abs(p["T"] - p["m"] * p["g"] * p["L"]) <= 1e-12 * max(1.0, abs(p["T"]))
    return True


def fixture_blowup(preset, model, angular_grid=None) -> dict:
    name = FIXTURE_FOR[preset]
    p = model.parameters
    chart = paper_fixture(name, p["m"], p["g"], p["L"])
    diag: dict = {}
    aes = angular_equilibria(chart, grid=angular_grid or 16, diagnostics=diag)
    labels = []
    for ae in aes:
        lab = None
        for k, pt in enumerate(chart.published_points):
            if ae.published and max(abs(a - b) for a, b in zip(ae.angles, pt)) < 1e-8:
                lab = f"Q{k + 1}" if chart.dimension == 4 else "theta*"
        labels.append(lab)
    out = {
        "mode": "fixture",
        "chart": _chart_dict(chart),
        "angular_equilibria": [_ae_dict(a, lab) for a, lab in zip(aes, labels)],
        "diagnostics": diag,
    }
    if chart.dimension == 2:
        out["notes"] = [
            "fixture charts are centred on the origin of the state space, so the"
            " energy on r=0 is H at the origin",
            "local flow near theta* uses the eigen-expansion x(t) = sum c_m A_m exp(lambda_m t);"
            " a planar linear system has two free constants, not four",
        ]
    return out


def derived_blowup(model, eq, shifted, depth, angular_grid=None) -> dict:
    maker = polar_chart if model.dof == 1 else hyperspherical_chart
    try:
        chart = maker(model, eq, shifted=shifted, force=not shifted)
    except BlowUpError as err:
        return {"mode": "derived", "error": str(err)}
    grid = angular_grid or (16 if model.dof == 1 else 8)
    diag: dict = {}
    aes = angular_equilibria(chart, grid=grid, diagnostics=diag)
    diag["non_isolated"] = sum(not a.isolated for a in aes)
    trees = [recursive_blowup(chart, a, depth, grid) for a in aes] if shifted else []
    return {
        "mode": "derived",
        "chart": _chart_dict(chart),
        "angular_equilibria": [_ae_dict(a) for a in aes],
        "recursion": [_node_dict(t) for t in trees],
        "diagnostics": diag,
    }


def run_analysis(model, preset, box, grid, tol, fixture, depth, angular_grid=None) -> tuple[dict, int]:
    diag: dict = {}
    eqs = find_equilibria(model, box, grid=grid, tol=tol, diagnostics=diag)
    entries = []
    for eq in eqs:
        item = {
            "state": dict(zip(model.state_names, eq.state.tolist())),
            "energy": eq.energy,
            "jacobian": eq.jacobian,
            "eigenvalues": _eigs(eq.eigenvalues),
            "classification": str(eq.classification),
            "degenerate": eq.degenerate,
            "residual": eq.residual,
            "blowup": None,
        }
        if eq.degenerate:
            blow = []
            if fixture and _fixture_applies(preset, model, eq):
                blow.append(fixture_blowup(preset, model))
            elif fixture:
                blow.append(derived_blowup(model, eq, False, 0, angular_grid))
            else:
                blow.append(derived_blowup(model, eq, True, depth, angular_grid))
                if _fixture_applies(preset, model, eq):
                    blow.append(fixture_blowup(preset, model))
            item["blowup"] = blow
        entries.append(item)
    report = {
        "tool": {"name": "blowupdyn", "version": __version__},
        "model": model.to_dict(),
        "settings": {
            "box": [list(b) for b in box],
            "grid": grid,
            "newton_tol": tol,
            "classification_tol": 1e-8,
            "fixture": fixture,
            "depth": depth,
        },
        "equilibria": entries,
        "diagnostics": diag,
    }
    return report, (EXIT_OK if eqs else EXIT_EMPTY)


def report_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "index", "label", "point", "energy", "eigenvalues", "classification", "degenerate"])

    def pt(v):
        return " ".join(_num(x) for x in v)

    def eg(v):
        return " ".join(f"{_num(a)}{'+' if b >= 0 else '-'}{_num(abs(b))}i" for a, b in v)

    for i, eq in enumerate(report["equilibria"]):
        w.writerow(
            ["equilibrium", i, "", pt(eq["state"].values()), _num(eq["energy"]),
             eg(eq["eigenvalues"]), eq["classification"], eq["degenerate"]]
        )
        for b in eq["blowup"] or []:
            for j, ae in enumerate(b.get("angular_equilibria", [])):
                w.writerow(
                    [f"{b['mode']}-angular", f"{i}.{j}", ae["label"] or "", pt(ae["angles"]),
                     _num(ae["energy"]) if ae["energy"] is not None else "",
                     eg(ae["eigenvalues"]), ae["classification"], ae["degenerate"]]
                )
    return buf.getvalue()


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    model, preset = load_model(args)
    box = parse_box(args.box, model.dim) if args.box else default_box(model.dim)
    grid = args.grid if args.grid is not None else (21 if model.dof == 1 else 4)
    depth = args.depth if args.depth is not None else (3 if model.dof == 1 else 0)
    if grid < 2 or depth < 0 or not args.tol > 0:
        raise InputError("need grid >= 2, depth >= 0 and tol > 0")
    report, code = run_analysis(model, preset, box, grid, args.tol, args.fixture, depth)
    text = dumps(report) + "\n" if args.format == "json" else report_csv(report)
    _emit(text, args.out)
    if code == EXIT_EMPTY:
        print("no equilibria found in box", file=sys.stderr)
    return code


# ---------------------------------------------------------------- portrait


def _equilibrium_summary(model, preset, center):
    try:
        eq = analyze_equilibrium(model, center)
    except NotAnEquilibriumError:
        return None
    out = {
        "state": list(eq.state),
        "energy": eq.energy,
        "classification": str(eq.classification),
        "degenerate": eq.degenerate,
    }
    if eq.degenerate and _fixture_applies(preset, model, eq):
        fx = fixture_blowup(preset, model)
        out["blowup_classifications"] = sorted(
            {ae["classification"] for ae in fx["angular_equilibria"] if ae["label"]}
        )
    elif eq.degenerate:
        der = derived_blowup(model, eq, True, 0)
        out["blowup_classifications"] = sorted(
            {ae["classification"] for ae in der.get("angular_equilibria", [])}
        )
    return out


def cmd_portrait(args) -> int:
    model, preset = load_model(args)
    center = np.zeros(model.dim)
    if args.center:
        vals = [_number(v) for v in args.center.split(",")]
        if len(vals) != model.dim:
            raise InputError(f"center needs {model.dim} values")
        center = np.array(vals)
    if not args.window > 0 or args.seeds < 0 or not args.t_span > 0 or not args.dt > 0:
        raise InputError("need window > 0, seeds >= 0, t-span > 0 and dt > 0")
    i, j = 0, model.dof
    window = ((center[i] - args.window, center[i] + args.window), (center[j] - args.window, center[j] + args.window))
    data = portrait(model, window, args.seeds, args.t_span, dt=args.dt, pair=(i, j), base=center)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(max(args.seeds - 1, 0))))
    files = []
    for k, tr in enumerate(data.trajectories):
        name = f"trajectory_{k:0{width}d}.csv"
        tr.write_csv(out / name, model.state_names)
        files.append(
            {"file": name, "seed": list(data.seeds[k]), "truncated": tr.truncated, "message": tr.message}
        )
    names = (model.state_names[i], model.state_names[j])
    with open(out / "field.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([names[0], names[1], f"d{names[0]}", f"d{names[1]}"])
        for p, v in zip(data.field_points, data.field_vectors):
            w.writerow([_num(p[0]), _num(p[1]), _num(v[0]), _num(v[1])])
    manifest = {
        "tool": {"name": "blowupdyn", "version": __version__},
        "model": model.to_dict(),
        "center": list(center),
        "window": [list(w_) for w_ in window],
        "plotted": list(names),
        "t_span": args.t_span,
        "dt": args.dt,
        "trajectories": files,
        "field": "field.csv",
        "equilibrium": _equilibrium_summary(model, preset, center),
    }
    (out / "manifest.json").write_text(dumps(manifest) + "\n", encoding="utf-8")
    return EXIT_OK


# ------------------------------------------------------------------ verify


@dataclass
class Check:
    group: str
    name: str
    expected: str
    computed: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.error) and self.error <= self.tol


def _cls_check(group, name, expected, got):
    return Check(group, name, expected, got, 0.0 if got == expected else math.inf, 0.0)


GROUPS = ("eq4", "eq6", "eq8", "eq9", "eq14", "eq18", "eq19", "eq20")


@functools.lru_cache(maxsize=1)
def published_checks() -> tuple:
    """Every published number that the library reproduces (computed once)."""
    out = []
    sp = PRESETS["simple-pendulum-torque"]()
    eqs = find_equilibria(sp, default_box(2), grid=21)
    star = np.array([math.pi / 2, 0.0])
    if eqs:
        e0 = min(eqs, key=lambda e: np.linalg.norm(e.state - star))
        out.append(Check("eq4", "equilibrium (pi/2, 0)", "(1.5707963, 0)", _vec(e0.state),
                         float(np.max(np.abs(e0.state - star))) if len(eqs) == 1 else math.inf, 1e-9))
        out.append(Check("eq4", "energy -mgL*pi/2", _num(-math.pi / 2), _num(e0.energy),
                         abs(e0.energy + math.pi / 2), 1e-12))
        target = np.array([[0.0, 1.0], [0.0, 0.0]])
        out.append(Check("eq6", "jacobian [[0, 1/(mL^2)], [0, 0]]", _vec(target.ravel()), _vec(e0.jacobian.ravel()),
                         float(np.max(np.abs(e0.jacobian - target))), 1e-10))
        out.append(Check("eq6", "both eigenvalues zero", "0, 0", _cvec(e0.eigenvalues),
                         max(abs(z) for z in e0.eigenvalues), 1e-10))
    else:
        out.append(Check("eq4", "equilibrium (pi/2, 0)", "(1.5707963, 0)", "none", math.inf, 1e-9))

    chart = paper_fixture("simple-eq7")
    aes = angular_equilibria(chart)
    zero = [a for a in aes if abs(math.remainder(a.angles[0], 2 * math.pi)) < 1e-8]
    j8 = np.array([[0.0, 1.0], [-1.0, 1.0]])
    l9 = (complex(0.5, -math.sqrt(3) / 2), complex(0.5, math.sqrt(3) / 2))
    if zero:
        a = zero[0]
        out.append(Check("eq8", "theta* = 0 blow-up jacobian", _vec(j8.ravel()), _vec(a.jacobian.ravel()),
                         float(np.max(np.abs(a.jacobian - j8))), 1e-10))
        out.append(Check("eq8", "energy on r=0 is -mgL", "-1", _num(a.energy), abs(a.energy + 1.0), 1e-12))
        out.append(Check("eq9", "eigenvalues (1 +- i sqrt(3))/2", _cvec(l9), _cvec(a.eigenvalues),
                         max(abs(x - y) for x, y in zip(a.eigenvalues, l9)), 1e-10))
        out.append(_cls_check("eq9", "m=1 classification", "UnstableFocus", str(a.classification)))
    else:
        out.append(Check("eq8", "theta* = 0 blow-up jacobian", _vec(j8.ravel()), "missing", math.inf, 1e-10))
    for m, want in ((4 ** -0.25, "InflectedNode"), (0.5, "UnstableNode")):
        J = paper_fixture("simple-eq7", m=m).linearization((0.0,))
        J = np.column_stack([J[:, 1:], J[:, :1]])
        out.append(_cls_check("eq9", f"m={m:.6g} classification", want, str(classify(eigenvalues(J)))))
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        m, L, g = rng.uniform(0.5, 2.0, 3)
        J = paper_fixture("simple-eq7", m=m, g=g, L=L).linearization((0.0,))
        J = np.column_stack([J[:, 1:], J[:, :1]])
        root = cmath.sqrt(1 - 4 * m**4 * L**6 * g**2)
        closed = sorted(((1 + root) / (2 * m * L**2), (1 - root) / (2 * m * L**2)), key=lambda z: (z.real, z.imag))
        got = eigenvalues(J)
        worst = max(worst, max(abs(x - y) for x, y in zip(got, closed)) / max(1.0, max(abs(z) for z in closed)))
    out.append(Check("eq9", "closed form over 50 random (m, L, g)", "formula", f"max rel err {worst:.3g}", worst, 1e-10))

    dp = PRESETS["double-pendulum-torque"]()
    p0 = known_equilibrium("double-pendulum-torque")
    eqs = find_equilibria(dp, default_box(4), grid=4)
    near = [e for e in eqs if np.linalg.norm(e.state - p0) < 1e-6]
    if near:
        e = near[0]
        out.append(Check("eq14", "P0 = (-pi/2, -pi/2, 0, 0)", _vec(p0), _vec(e.state),
                         float(np.max(np.abs(e.state - p0))), 1e-9))
        out.append(Check("eq14", "energy -3*pi*mgL/2", _num(-1.5 * math.pi), _num(e.energy),
                         abs(e.energy + 1.5 * math.pi), 1e-12))
    else:
        out.append(Check("eq14", "P0 = (-pi/2, -pi/2, 0, 0)", _vec(p0), "missing", math.inf, 1e-9))

    chart = paper_fixture("double-eq17")
    aes = angular_equilibria(chart, grid=16)
    for k, pt in enumerate(chart.published_points):
        dist = [max(abs(math.remainder(a - b, 2 * math.pi)) for a, b in zip(ae.angles, pt)) for ae in aes]
        if not dist:
            out.append(Check("eq18", f"Q{k + 1}", _vec(pt), "missing", math.inf, 1e-8))
            continue
        i = int(np.argmin(dist))
        err = max(dist[i], abs(aes[i].energy + 3.0))
        out.append(Check("eq18", f"Q{k + 1} with energy -3mgL", _vec(pt) + " E=-3",
                         _vec(aes[i].angles) + f" E={aes[i].energy:.12g}", err, 1e-8))
    extra = len(aes) - len(chart.published_points)
    if extra:
        out.append(Check("eq18", "no extra roots", "0", str(extra), math.inf, 0.0))
    J19 = paper_fixture("double-eq19")
    l20 = (complex(-math.sqrt(5)),) + (complex(math.sqrt(5)),) * 3
    got = eigenvalues(J19)
    out.append(Check("eq20", "eigenvalues (-sqrt5, sqrt5, sqrt5, sqrt5)", _cvec(l20), _cvec(got),
                     max(abs(x - y) for x, y in zip(got, l20)), 1e-10))
    out.append(_cls_check("eq19", "classification", "Product(Saddle, InflectedNode)", str(classify(got))))
    return tuple(out)


def _vec(v) -> str:
    return "(" + ", ".join(f"{float(x):.10g}" for x in v) + ")"


def _cvec(v) -> str:
    return ", ".join(f"{z.real:.10g}{'+' if z.imag >= 0 else '-'}{abs(z.imag):.10g}i" if z.imag else f"{z.real:.10g}"
                     for z in v)


def cmd_verify(args) -> int:
    wanted = set(GROUPS)
    if args.only:
        wanted = {w.strip().lower() for w in args.only.split(",")}
        unknown = wanted - set(GROUPS)
        if unknown:
            raise InputError(f"unknown check group(s): {sorted(unknown)}")
    checks = [c for c in published_checks() if c.group in wanted]
    if args.tol is not None:
        checks = [Check(c.group, c.name, c.expected, c.computed, c.error, args.tol) for c in checks]
    rows = [("group", "check", "expected", "computed", "error", "tol", "result")]
    for c in checks:
        rows.append((c.group, c.name, c.expected, c.computed, f"{c.error:.3g}", f"{c.tol:.3g}",
                     "PASS" if c.passed else "FAIL"))
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]
    for r in rows:
        print("  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------------- main


def _model_args(p):
    p.add_argument("--preset", help=f"built-in model: {', '.join(sorted(PRESETS))}")
    p.add_argument("--model", help="system file (JSON or YAML)")
    p.add_argument("-p", "--param", action="append", metavar="k=v,...", help="parameter overrides")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowupdyn", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="equilibria, classification and blow-up of degenerate points")
    _model_args(a)
    a.add_argument("--box", help="search box as lo:hi,... (one interval per state variable)")
    a.add_argument("--grid", type=int, help="seeds per axis (default 21 planar, 4 for two degrees of freedom)")
    a.add_argument("--tol", type=float, default=1e-12, help="Newton residual tolerance")
    a.add_argument("--fixture", action="store_true", help="use the published blow-up equations, unshifted chart")
    a.add_argument("--depth", type=int, help="recursive blow-up depth (default 3 planar, 0 otherwise)")
    a.add_argument("--out", help="write the report here instead of stdout")
    a.add_argument("--format", choices=("json", "csv"), default="json")
    a.set_defaults(func=cmd_analyze)

    p = sub.add_parser("portrait", help="trajectory and direction-field CSVs around a point")
    _model_args(p)
    p.add_argument("--center", help="state values, comma separated (default origin)")
    p.add_argument("--window", type=float, default=1.0, help="half-width of the plotted window")
    p.add_argument("--seeds", type=int, default=9, help="number of initial conditions (grid cell centres)")
    p.add_argument("--t-span", type=float, default=10.0, help="integrate this long forward and backward")
    p.add_argument("--dt", type=float, default=1e-2, help="RK4 step")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_portrait)

    v = sub.add_parser("verify", help="check the published values; nonzero exit on failure")
    v.add_argument("--only", help=f"comma-separated groups: {', '.join(GROUPS)}")
    v.add_argument("--tol", type=float, help="override every tolerance")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ModelError, ex.ExpressionError, FlowError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
