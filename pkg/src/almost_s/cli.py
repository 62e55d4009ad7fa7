"""Command-line entry point.

Exit codes: 0 when every gating check passes, 1 when a check fails,
2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import catalog, report
from .chart import ChartError, DegenerateMetricError, Sampler, constant_field, coordinate_vector, position_field
from .expr import DomainError, ExprError, parse_field
from .geometry import curvature, generalized_eigenvalues, geometry_jets, inner, ricci_range
from .identities import DEFAULT_TOLERANCE, run_suite
from .soliton import (
    CHAIN_NAMES,
    NotApplicableError,
    PotentialFamily,
    SolitonFitError,
    VectorFieldFamily,
    einstein_obstruction_witness,
    fit_soliton,
    grid_search,
    soliton_chain,
)
from .structure import AlmostSStructure
from .warp import NonBasicWarpError, VerticalSplitting, basic_defect, canonical_variation, vertical_warp

SUBCOMMANDS = ("verify", "curvature", "warp", "soliton-fit", "chain", "witness", "catalog")
STRUCTURES = catalog.entry_names()
FAMILIES = ("zero", "xi", "radial", "coords", "potential", "gradient")
DEFAULT_TOL = {
    "verify": DEFAULT_TOLERANCE,
    "curvature": 1e-9,
    "warp": 1e-10,
    "soliton-fit": 1e-6,
    "chain": 1e-7,
    "witness": 1e-7,
    "catalog": 1e-8,
}
VARIATION_TS = (1.0, 0.5, 0.25)
MIN_D_ETA_BAR = 0.1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(text):
    v = int(text, 0)
    if not -(2**63) <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser():
    ap = _Parser(prog="almost-s", description="Checks for almost S-structures on coordinate charts.")
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--structure", default="standard-s")
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--radius", type=_positive_float, default=1.0)
    ap.add_argument("--periodic", action="store_true")
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=_seed, default=42)
    ap.add_argument("--tol", type=_positive_float, default=None)
    ap.add_argument("--order", type=int, choices=(2, 3), default=3)
    ap.add_argument("--warp-fn", default=None, help="basic warp function w (expression in the coordinates)")
    ap.add_argument("--potential-fn", default=None, help="';'-separated expressions")
    ap.add_argument("--family", default="zero", help=f"one of {', '.join(FAMILIES)}")
    ap.add_argument("--grid", type=int, default=None, help="grid points per axis for the cross-check")
    ap.add_argument("--lam", type=float, default=0.0, help="lambda for the chain subcommand")
    ap.add_argument("--out", default=None)
    ap.add_argument("--format", choices=("json",), default="json")
    return ap


def _config(args):
    return {
        "command": args.command,
        "structure": args.structure,
        "n": args.n,
        "p": args.p,
        "m": args.m,
        "radius": args.radius,
        "periodic": args.periodic,
        "samples": args.samples,
        "seed": args.seed,
        "tol": args.tol,
        "order": args.order,
        "warp_fn": args.warp_fn,
        "potential_fn": args.potential_fn,
        "family": args.family,
        "grid": args.grid,
        "lam": args.lam,
        "format": args.format,
    }


def _target(args):
    """``(structure or None, chart, metric)``."""
    if args.structure not in STRUCTURES:
        raise UsageError(f"unknown structure {args.structure!r}; choose from {', '.join(STRUCTURES)}")
    try:
        obj = catalog.make(args.structure, n=args.n, p=args.p, m=args.m, radius=args.radius, periodic=args.periodic)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if isinstance(obj, AlmostSStructure):
        return obj, obj.chart, obj.g
    chart, g = obj
    return None, chart, g


def _need_structure(s, command):
    if s is None:
        raise UsageError(f"{command} needs an almost S-structure (standard-s or flat-torus)")
    return s


def _descriptor(args, s):
    if s is not None:
        return s.descriptor()
    return {"name": args.structure, "m": args.m, "radius": args.radius}


def _stats(name, vals, tol=None, passed=None, **extra):
    vals = np.abs(np.asarray(vals, dtype=float))
    return report.result(name, float(vals.max()), float(vals.mean()), tol, passed, **extra)


def _check(name, vals, tol, **extra):
    vals = np.abs(np.asarray(vals, dtype=float))
    return _stats(name, vals, tol, bool(np.all(np.isfinite(vals)) and vals.max() < tol), **extra)


def _exprs(text, chart):
    if not text:
        return []
    return [parse_field(part.strip(), chart) for part in text.split(";") if part.strip()]


# ----------------------------------------------------------------------------
# subcommands


def cmd_verify(args, sampler, tol):
    s, _, _ = _target(args)
    s = _need_structure(s, "verify")
    if args.order != 3:
        raise UsageError("the identity suite needs order-3 jets (--order 3)")
    rep = run_suite(s, sampler, tol)
    results = rep.results()
    for r in results:
        r["note"] = rep.notes.get(r["name"])
    return s.descriptor(), results, rep.warnings, [f"{len(rep.failures())} gating failure(s)"]


def cmd_curvature(args, sampler, tol):
    s, chart, g = _target(args)
    pts = sampler.points(chart)
    curv = curvature(g, pts)
    gv = g.eval(pts)
    ev = generalized_eigenvalues(curv.ricci, gv)
    results = [
        report.result("scalar_curvature", float(np.abs(curv.scalar).max()), float(np.abs(curv.scalar).mean()),
                      min=float(curv.scalar.min()), max=float(curv.scalar.max())),
        report.result("ricci_eigenvalues", float(np.abs(ev).max()), float(np.abs(ev).mean()),
                      min=float(ev.min()), max=float(ev.max())),
    ]
    m = chart.dim
    for i in range(m):
        for j in range(i + 1, m):
            u = np.zeros((len(pts), m))
            v = np.zeros((len(pts), m))
            u[:, i] = 1.0
            v[:, j] = 1.0
            ruvv = np.einsum("...lkab,...k,...a,...b->...l", curv.riemann, v, u, v)
            k = inner(gv, ruvv, u) / (inner(gv, u, u) * inner(gv, v, v) - inner(gv, u, v) ** 2)
            results.append(report.result(f"sectional_{chart.names[i]}_{chart.names[j]}", float(np.abs(k).max()),
                                         float(np.abs(k).mean()), min=float(k.min()), max=float(k.max())))
    if args.order == 3:
        ds = geometry_jets(g, pts, 3).scalar.parts[1]
        results.append(_stats("scalar_curvature_gradient", np.linalg.norm(ds, axis=-1)))
    # closed-form oracles
    if args.structure == "sphere":
        kappa = 1.0 / args.radius**2
        results.append(_check("oracle_ricci_minus_kappa_g", curv.ricci - (m - 1) * kappa * gv, tol))
        results.append(_check("oracle_scalar", curv.scalar - m * (m - 1) * kappa, tol))
    elif args.structure in ("flat", "flat-torus"):
        results.append(_check("oracle_riemann_zero", curv.riemann, tol))
    elif s is not None and args.structure == "standard-s":
        xi = np.stack([x.eval(pts) for x in s.xi], axis=1)
        ric_xi = np.einsum("...ia,...ab,...jb->...ij", xi, curv.ricci, xi)
        results.append(_check("ric_xi_xi_minus_2n", ric_xi - 2 * s.n, max(tol, 1e-6)))
    return _descriptor(args, s), results, [], []


def cmd_warp(args, sampler, tol):
    s, chart, g = _target(args)
    s = _need_structure(s, "warp")
    split = VerticalSplitting.from_structure(s)
    pts = sampler.points(chart)
    base_min, base_max = ricci_range(g, pts)
    results = [report.result("ricci_range_base", max(abs(base_min), abs(base_max)), None, min=base_min, max=base_max)]
    if args.warp_fn:
        w = parse_field(args.warp_fn, chart)
        defect = basic_defect(w, split, sampler)
        results.append(report.result("basic_defect", defect, None, tol, bool(defect < tol)))
        if defect >= tol:
            return s.descriptor(), results, [f"warp function rejected: max |xi_i w| = {defect:.6e}"], []
        gw = vertical_warp(g, split, w, sampler, tol=tol)
        gwv = gw.eval(pts)
        pv, ph = split.projectors(g, pts)
        cross = np.einsum("...ka,...kl,...lb->...ab", pv, gwv, ph)
        results.append(_check("cross_block", cross, max(tol, 1e-12)))
        results.append(_check("horizontal_block_unchanged",
                              np.einsum("...ka,...kl,...lb->...ab", ph, gwv - g.eval(pts), ph), max(tol, 1e-12)))
        lo, hi = ricci_range(gw, pts)
        results.append(report.result("ricci_range_warped", max(abs(lo), abs(hi)), None, min=lo, max=hi))
        diff = curvature(gw, pts).ricci - curvature(g, pts).ricci
        results.append(_stats("ricci_change", diff))
    else:
        for t in VARIATION_TS:
            lo, hi = ricci_range(canonical_variation(g, split, t, sampler), pts)
            results.append(report.result(f"ricci_range_t={t:g}", max(abs(lo), abs(hi)), None, t=t, min=lo, max=hi))
    return s.descriptor(), results, [], []


def _family(args, s, chart, g):
    kind = args.family
    if kind == "zero":
        return VectorFieldFamily(g, chart, [], [])
    if kind == "xi":
        return VectorFieldFamily(g, chart, list(_need_structure(s, "family xi").xi))
    if kind == "radial":
        return VectorFieldFamily(g, chart, [position_field(chart.dim)], ["a"])
    if kind == "coords":
        return VectorFieldFamily(g, chart, [coordinate_vector(k, chart.dim) for k in range(chart.dim)],
                                 [f"c_{name}" for name in chart.names])
    if kind in ("potential", "gradient"):
        fs = _exprs(args.potential_fn, chart)
        if not fs:
            raise UsageError(f"family {kind} needs --potential-fn")
        if kind == "gradient":
            if len(fs) != 1:
                raise UsageError("family gradient takes exactly one potential")
            return PotentialFamily(g, chart, [], [], base=fs[0])
        return PotentialFamily(g, chart, fs, [f"a{j + 1}" for j in range(len(fs))])
    raise UsageError(f"unknown family {kind!r}; choose from {', '.join(FAMILIES)}")


def cmd_soliton_fit(args, sampler, tol):
    s, chart, g = _target(args)
    fam = _family(args, s, chart, g)
    fit = fit_soliton(fam, sampler)
    results = [
        report.result("residual_norm", fit.residual_norm, None, tol, bool(fit.residual_norm < tol), fit=fit.as_dict()),
    ]
    warnings = [] if fit.converged else ["optimizer reached the iteration limit; best-so-far reported"]
    if args.grid:
        if args.grid < 2:
            raise UsageError("--grid needs at least 2 points per axis")
        gr = grid_search(fam, sampler, k=args.grid)
        results.append(report.result(
            "grid_min_residual_norm", gr.residual_norm, None, None, None, gating=False,
            params=dict(zip(fam.labels, gr.params.tolist())), lam=gr.lam, cells=gr.cells,
        ))
    if s is not None and isinstance(fam, PotentialFamily):
        defect = basic_defect(fam.potential(fit.params), VerticalSplitting.from_structure(s), sampler)
        results.append(report.result("potential_basic_defect", defect, None, None, None, gating=False,
                                     note="max |xi_i f| of the fitted potential"))
    accepted = [e["objective"] for e in fit.log if e["accepted"]]
    monotone = all(b <= a for a, b in zip(accepted, accepted[1:]))
    results.append(report.result("objective_monotone", None, None, None, monotone))
    return _descriptor(args, s), results, warnings, []


def cmd_chain(args, sampler, tol):
    s, chart, _ = _target(args)
    s = _need_structure(s, "chain")
    u = _exprs(args.potential_fn, chart)
    if not u:
        u = [constant_field("scalar", 0.0, chart.dim, name="0") for _ in range(s.p)]
    if len(u) != s.p:
        raise UsageError(f"chain needs {s.p} potentials separated by ';', got {len(u)}")
    rep = soliton_chain(s, u, args.lam, sampler)
    results = rep.results(tol)
    for r in results:
        r["note"] = None
    results[CHAIN_NAMES.index("trace_consistency")]["note"] = rep.notes["trace_consistency"]
    return s.descriptor(), results, [], []


def cmd_witness(args, sampler, tol):
    s, _, _ = _target(args)
    s = _need_structure(s, "witness")
    try:
        rep = einstein_obstruction_witness(s, sampler)
    except NotApplicableError as exc:
        raise UsageError(f"witness not applicable: {exc}") from exc
    v = rep.values
    results = [
        report.result("nabla_xi_bar", v["nabla_xi_bar_max"], None, tol, v["nabla_xi_bar_max"] < tol),
        report.result("ric_xi_bar", v["ric_xi_bar_max_abs"], None, tol, v["ric_xi_bar_max_abs"] < tol),
        report.result("forced_lambda", v["forced_lambda_max_abs"], None, None, None),
        report.result("d_eta_bar_minus_pF", v["d_eta_bar_minus_pF_max"], None, tol, v["d_eta_bar_minus_pF_max"] < tol),
        report.result("d_eta_bar_min_norm", v["d_eta_bar_min_norm"], None, None,
                      v["d_eta_bar_min_norm"] > MIN_D_ETA_BAR, bound=f"> {MIN_D_ETA_BAR:g}"),
        report.result("ric_xi_xi_minus_2n", v["ric_xi_xi_minus_2n_max_abs"], None, max(tol, 1e-6),
                      v["ric_xi_xi_minus_2n_max_abs"] < max(tol, 1e-6)),
    ]
    warnings = [rep.notes["degenerate"]] if rep.degenerate else []
    return s.descriptor(), results, warnings, []


def cmd_catalog(args, sampler, tol):
    results = [
        report.result(e.name, None, None, None, None, parameters=e.parameters, expected=list(e.expected),
                      description=e.description)
        for e in catalog.ENTRIES
    ]
    return None, results, [], []


COMMANDS = {
    "verify": cmd_verify,
    "curvature": cmd_curvature,
    "warp": cmd_warp,
    "soliton-fit": cmd_soliton_fit,
    "chain": cmd_chain,
    "witness": cmd_witness,
    "catalog": cmd_catalog,
}


def _summary(doc):
    lines = []
    for r in doc["results"]:
        status = {True: "pass", False: "FAIL", None: "info"}[r.get("pass")]
        val = r.get("max_abs")
        val = "-" if val is None else f"{val:.3e}"
        lines.append(f"{status:4}  {r['name']:<40} {val}")
    lines.extend(f"warning: {w}" for w in doc["verdict"]["warnings"])
    lines.append("verdict: " + ("pass" if doc["verdict"]["pass"] else "FAIL " + ", ".join(doc["verdict"]["failures"])))
    return "\n".join(lines)


def run(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        tol = args.tol if args.tol is not None else DEFAULT_TOL[args.command]
        sampler = Sampler(args.samples, args.seed)
        structure, results, warnings, _ = COMMANDS[args.command](args, sampler, tol)
        config = _config(args)
        config["tol"] = tol
        doc = report.build(structure, args.seed, config, results, warnings)
    except UsageError as exc:
        print(f"almost-s: error: {exc}", file=sys.stderr)
        return 2
    except (ExprError, DomainError, ChartError, DegenerateMetricError, NonBasicWarpError, SolitonFitError,
            ValueError) as exc:
        print(f"almost-s: error: {exc}", file=sys.stderr)
        return 2
    text = report.dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(_summary(doc))
    else:
        sys.stdout.write(text)
        print(_summary(doc), file=sys.stderr)
    return 0 if doc["verdict"]["pass"] else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
