"""Command-line interface: ``lpsi <command> [options]``.

Every command writes a JSON result document (or CSV for ``plot``) to stdout
or ``--out``.  Exit codes: 0 success, 2 validation failure, 3 resource cap
exceeded, 4 infeasible problem, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    CPWLFunction,
    Dataset1D,
    InfeasibleError,
    LpsiError,
    ResourceCapError,
    ValidationError,
    report,
    vp_cost,
)
from .dataio import ResultDocument, dumps_document, emit_plot_data, load_dataset, loads_document
from .multivariate import (
    MAX_SUPPORT_CAP,
    DatasetND,
    ReconstructedNet,
    SparseSolution,
    build_reformulation,
    check_feasible,
    default_pattern_mode,
    default_radius,
    enumerate_patterns,
    pstar_bound,
    reconstruct_network,
    solve_l0,
    solve_lp_exact,
    solve_lp_irl1,
)
from .oracle1d import OracleConfig, alpha_grid_oracle, partition_lp_l0_oracle, random_restart_oracle
from .trainer import TrainConfig, TrainingDivergedError, train, write_trajectory
from .univariate import compute_pstar, min_l0, solve, verify

__all__ = ["run_cli", "main", "EXIT_OK", "EXIT_VALIDATION", "EXIT_RESOURCE", "EXIT_INFEASIBLE", "EXIT_USAGE"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_INFEASIBLE = 4
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------- documents


def _cpwl_dict(f: CPWLFunction) -> dict:
    return {
        "anchor_x": f.anchor_x,
        "anchor_y": f.anchor_y,
        "base_slope": f.base_slope,
        "knots": [[u, c] for u, c in f.knots],
    }


def _cpwl_from(sol: dict) -> CPWLFunction:
    try:
        knots = tuple((u, c) for u, c in sol["knots"])
        return CPWLFunction(sol["anchor_x"], sol["anchor_y"], sol["base_slope"], knots)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"malformed univariate solution: {e}") from e


def _p_key(p: float) -> str:
    return repr(float(p))


def _provenance(name: str, args, ds=None, arithmetic="float", seed=None) -> dict:
    prov = {"solver": name, "seed": seed, "arithmetic": arithmetic, "version": __version__}
    if ds is not None and isinstance(ds, Dataset1D):
        prov["input_order"] = list(ds.input_order) if ds.input_order is not None else None
    if getattr(args, "timing", False):
        prov["wall_time"] = round(time.perf_counter() - args._t0, 6)
    return prov


def _problem_1d(ds: Dataset1D, p=None) -> dict:
    out = {"dimension": 1, "N": ds.n}
    if p is not None:
        out["p"] = p
    return out


def _solution_1d(f: CPWLFunction, ps) -> dict:
    sol = _cpwl_dict(f)
    sol["costs"] = {_p_key(q): vp_cost(f, q) for q in ps}
    rep = report(f, 1)
    sol["l0"] = len(f.knots)
    sol["l1"] = rep.l1_cost
    sol["lipschitz"] = rep.lipschitz
    return sol


def _load_1d(args) -> Dataset1D:
    ds = load_dataset(args.data, dimension="1d", exact=not getattr(args, "float", False))
    return ds


def _check_p(p: float, lo_closed=False):
    if not (0 < p < 1 or (lo_closed and p == 1)):
        raise ValidationError(f"p must lie in (0, 1), got {p}")


# ---------------------------------------------------------------- commands


def _cmd_solve1d(args):
    _check_p(args.p)
    ds = _load_1d(args)
    res = solve(ds, args.p)
    sol = _solution_1d(res.f, sorted({args.p, 1.0}))
    sol["unique"] = res.unique
    sol["ties"] = [{"start": r.start, "m": r.m, "alpha": list(a)} for r, a in res.ties]
    sol["run_choices"] = [
        {"start": rs.run.start, "m": rs.run.m, "sign": rs.run.sign, "alpha": list(rs.choice.alpha), "cost": rs.cost}
        for rs in res.runs
    ]
    arith = "exact" if ds.exact else "float"
    return ResultDocument(_problem_1d(ds, args.p), sol, _provenance("univariate.solve", args, ds, arith))


def _cmd_pstar(args):
    ds = _load_1d(args)
    pr = compute_pstar(ds, grid=args.pstar_grid)
    sol = {"value": pr.value}
    diag = [
        {
            "start": r.run.start,
            "m": r.run.m,
            "sign": r.run.sign,
            "winner": list(r.winner),
            "rival": list(r.rival) if r.rival is not None else None,
            "threshold": r.threshold,
            "permanent_ties": [list(t) for t in r.permanent_ties],
        }
        for r in pr.runs
    ]
    pst = {"value": pr.value, "method": "bisection", "diagnostics": {"grid": args.pstar_grid, "runs": diag}}
    arith = "exact" if ds.exact else "float"
    return ResultDocument(_problem_1d(ds), sol, _provenance("univariate.compute_pstar", args, ds, arith), pst)


def _cmd_l0(args):
    ds = load_dataset(args.data, exact=not args.float)
    if isinstance(ds, Dataset1D):
        res = min_l0(ds)
        sol = _solution_1d(res.witness, [1.0])
        sol["l0"] = res.count
        arith = "exact" if ds.exact else "float"
        return ResultDocument(_problem_1d(ds), sol, _provenance("univariate.min_l0", args, ds, arith))
    problem = _nd_problem(args, ds)
    sol = solve_l0(problem, support_cap=args.support_cap if args.support_cap is not None else MAX_SUPPORT_CAP)
    return ResultDocument(_nd_problem_dict(problem, args, None), _nd_solution(problem, sol), _provenance("multivariate.solve_l0", args))


def _nd_problem(args, ds):
    if isinstance(ds, Dataset1D):
        ds = DatasetND(np.array([[float(x)] for x in ds.xs]), np.array([float(y) for y in ds.ys]))
    mode = args.patterns or default_pattern_mode(ds)
    R = args.R if args.R is not None else default_radius(ds)
    return build_reformulation(ds, enumerate_patterns(ds, mode), R=R, bias_penalty=not args.no_bias_penalty)


def _nd_problem_dict(problem, args, p) -> dict:
    out = {"dimension": problem.dataset.d, "N": problem.dataset.n}
    if p is not None:
        out["p"] = p
    out["R"] = problem.R
    out["patterns"] = len(problem.patterns)
    out["pattern_mode"] = args.patterns or default_pattern_mode(problem.dataset)
    out["bias_penalty"] = problem.bias_penalty
    return out


def _nd_solution(problem, sol, net=None) -> dict:
    net = net if net is not None else reconstruct_network(sol, problem)
    z = sol.z
    nz = [[int(i), float(z[i])] for i in np.nonzero(z)[0]]
    return {
        "support": list(sol.support),
        "z_nonzero": nz,
        "costs": {_p_key(q): v for q, v in sorted(sol.lp_costs.items())},
        "l0": sol.l0,
        "l1": sol.lp_costs.get(1.0, problem.cost(z, 1.0)),
        "method": sol.method,
        "exact_verified": sol.exact,
        "caveat": sol.caveat,
        "neurons": [
            {"w": list(w), "v": v, "pattern": "".join(map(str, problem.patterns[j].s)), "side": side}
            for w, v, j, side in net.neurons
        ],
        "active_neurons": net.active_neurons,
    }


def _cmd_solve_nd(args):
    _check_p(args.p)
    ds = load_dataset(args.data, dimension="nd")
    problem = _nd_problem(args, ds)
    l0 = solve_l0(problem, support_cap=args.support_cap if args.support_cap is not None else MAX_SUPPORT_CAP)
    if args.method == "irl1":
        sol = solve_lp_irl1(problem, args.p, restarts=args.restarts, seed=args.seed if args.seed is not None else 0)
        name = "multivariate.solve_lp_irl1"
    else:
        cap = args.support_cap if args.support_cap is not None else min(MAX_SUPPORT_CAP, l0.l0 + 2)
        sol = solve_lp_exact(problem, args.p, support_cap=cap)
        name = "multivariate.solve_lp_exact"
    net = reconstruct_network(sol, problem)
    doc_sol = _nd_solution(problem, sol, net)
    doc_sol["l0_minimum"] = l0.l0
    pst = None
    if l0.l0 > 0:
        b = pstar_bound(problem, [l0, sol])
        pst = {"value": b.value, "method": "estimate", "diagnostics": {"r_hat": b.r_hat, "m0": b.m0, "R": b.R, "clipped": b.clipped}}
    if "support_cap" in sol.diagnostics:
        doc_sol["support_cap"] = sol.diagnostics["support_cap"]
    seed = args.seed if args.method == "irl1" else None
    return ResultDocument(_nd_problem_dict(problem, args, args.p), doc_sol, _provenance(name, args, seed=seed), pst)


def _cmd_oracle(args):
    ds = _load_1d(args)
    cfg_kw = {"seed": args.seed}
    if args.restarts is not None:
        cfg_kw["restarts"] = args.restarts
    if args.grid_resolution is not None:
        cfg_kw["grid_resolution"] = args.grid_resolution
    cfg = OracleConfig(**cfg_kw)
    if args.kind == "partition":
        res = partition_lp_l0_oracle(ds, cfg)
        sol = {"l0": res.count, "labels": list(res.labels)}
        return ResultDocument(_problem_1d(ds), sol, _provenance("oracle1d.partition", args, ds, "exact", args.seed))
    if args.p is None:
        raise ValidationError(f"the {args.kind} oracle needs --p")
    _check_p(args.p)
    fn = alpha_grid_oracle if args.kind == "grid" else random_restart_oracle
    res = fn(ds, args.p, cfg)
    sol = {"cost": res.cost}
    if res.f is not None:
        sol.update(_cpwl_dict(res.f))
        sol["l0"] = len(res.f.knots)
    return ResultDocument(_problem_1d(ds, args.p), sol, _provenance(f"oracle1d.{args.kind}", args, ds, "float", args.seed))


def _cmd_train(args):
    ds = load_dataset(args.data)
    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read training config: {e}") from e
    if not isinstance(raw, dict):
        raise ValidationError("training config must be a JSON object")
    raw = dict(raw, seed=args.seed)
    cfg = TrainConfig.from_dict(raw)
    try:
        res = train(ds, cfg)
    except TrainingDivergedError as e:
        if args.trajectory:
            with open(args.trajectory, "w", newline="") as fh:
                write_trajectory(e.trajectory, fh)
        raise
    if args.trajectory:
        with open(args.trajectory, "w", newline="") as fh:
            write_trajectory(res, fh)
    last = res.trajectory[-1] if res.trajectory else None
    sol = {
        "path_norm": res.path_norm,
        "active_neurons": res.active_neurons,
        "max_residual": res.max_residual,
        "final_objective": last["objective"] if last else None,
        "steps": cfg.steps,
    }
    if isinstance(ds, Dataset1D):
        net = res.net
        sol["neurons"] = [[w, b, v] for w, b, v in net.neurons]
        sol["skip"] = [net.skip_a, net.skip_c]
        sol["l1"] = res.report.l1_cost
        sol["lipschitz"] = res.report.lipschitz
        prob = _problem_1d(ds, cfg.p)
    else:
        sol["neurons"] = [{"w": list(w), "v": v} for w, v, _, _ in res.net.neurons]
        prob = {"dimension": ds.d, "N": ds.n, "p": cfg.p}
    sol["config"] = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    return ResultDocument(prob, sol, _provenance("trainer.train", args, ds if isinstance(ds, Dataset1D) else None, "float", args.seed))


def _cmd_verify(args):
    text = _read(args.result)
    doc = loads_document(text)
    dim = doc.problem.get("dimension")
    failures = []
    if dim == 1 and "knots" in doc.solution:
        exact = doc.provenance.get("arithmetic") == "exact"
        ds = load_dataset(args.data, dimension="1d", exact=exact)
        f = _cpwl_from(doc.solution)
        p = doc.problem.get("p")
        rep = verify(ds, f, p)
        failures += rep.failed()
        for key, val in doc.solution.get("costs", {}).items():
            if not math.isclose(vp_cost(f, float(key)), float(val), rel_tol=1e-12, abs_tol=1e-12):
                failures.append(f"cost_{key}")
        checks = [(c.name, c.passed, c.detail) for c in rep.checks]
        recomputed = report(f, 1)
        for key, val in (("l1", recomputed.l1_cost), ("lipschitz", recomputed.lipschitz)):
            if key in doc.solution and not math.isclose(float(doc.solution[key]), val, rel_tol=1e-12, abs_tol=1e-12):
                failures.append(key)
        if "l0" in doc.solution and doc.solution["l0"] != len(f.knots):
            failures.append("l0")
    elif "z_nonzero" in doc.solution:
        ds = load_dataset(args.data, dimension="nd")
        patterns = enumerate_patterns(ds, doc.problem.get("pattern_mode", "all"))
        problem = build_reformulation(ds, patterns, R=doc.problem["R"], bias_penalty=doc.problem.get("bias_penalty", True))
        z = np.zeros(problem.n_vars)
        for i, v in doc.solution["z_nonzero"]:
            if not 0 <= int(i) < problem.n_vars:
                raise ValidationError(f"coordinate {i} out of range")
            z[int(i)] = v
        bad = check_feasible(problem, z)
        failures += ["feasibility: " + b for b in bad]
        checks = [("feasibility", not bad, "; ".join(bad))]
        wrong = []
        for key, val in doc.solution.get("costs", {}).items():
            if not math.isclose(problem.cost(z, float(key)), float(val), rel_tol=1e-12, abs_tol=1e-12):
                wrong.append(key)
        failures += [f"cost_{key}" for key in wrong]
        checks.append(("costs", not wrong, ", ".join(wrong)))
        supp = [int(i) for i in np.nonzero((z != 0) & problem.counted)[0]]
        supp_ok = supp == list(doc.solution.get("support", supp)) and doc.solution.get("l0", len(supp)) == len(supp)
        if not supp_ok:
            failures.append("support")
        checks.append(("support", supp_ok, f"recomputed {supp}"))
        if not bad:
            try:
                reconstruct_network(SparseSolution(z, tuple(supp), len(supp), {}, "verify"), problem)
                checks.append(("network_interpolation", True, ""))
            except InfeasibleError as e:
                failures.append("network_interpolation")
                checks.append(("network_interpolation", False, str(e)))
    else:
        raise ValidationError("result document holds no verifiable solution")
    sol = {"passed": not failures, "failed": failures, "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in checks]}
    out = ResultDocument(doc.problem, sol, _provenance("verify", args))
    if failures:
        raise _VerifyFailed(out)
    return out


class _VerifyFailed(Exception):
    def __init__(self, doc):
        super().__init__("verification failed")
        self.doc = doc


def _cmd_plot(args):
    doc = loads_document(_read(args.result))
    sol = doc.solution
    if "knots" in sol:
        f = _cpwl_from(sol)
    elif "neurons" in sol and "z_nonzero" in sol:
        f = ReconstructedNet(tuple((tuple(n["w"]), n["v"], -1, n["side"]) for n in sol["neurons"]), doc.problem.get("bias_penalty", True))
    elif "neurons" in sol and "skip" in sol:
        from .core import ReLUNet1D

        f = ReLUNet1D(tuple(tuple(n) for n in sol["neurons"]), sol["skip"][0], sol["skip"][1])
    elif "neurons" in sol:
        f = ReconstructedNet(tuple((tuple(n["w"]), n["v"], -1, "trained") for n in sol["neurons"]))
    else:
        raise ValidationError("result document holds no plottable function")
    return emit_plot_data(f, (args.range[0], args.range[1]), args.samples)


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lpsi", description="Minimum l^p path-norm interpolation with shallow ReLU networks.")
    ap.add_argument("--version", action="version", version=f"lpsi {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True, help="dataset file (.csv or .json)")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--timing", action="store_true", help="record wall time in the provenance (breaks byte-identical output)")

    p = sub.add_parser("solve1d", help="exact minimum l^p interpolant of 1D data")
    common(p)
    p.add_argument("--p", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="rational arithmetic (default)")
    g.add_argument("--float", action="store_true", help="floating-point arithmetic")

    p = sub.add_parser("pstar", help="threshold below which minimisers are sparsest (1D)")
    common(p)
    p.add_argument("--pstar-grid", type=int, default=512)
    p.add_argument("--float", action="store_true")

    p = sub.add_parser("l0", help="fewest knots (1D) or nonzero parameters (multivariate)")
    common(p)
    p.add_argument("--float", action="store_true")
    _nd_flags(p)

    p = sub.add_parser("solve-nd", help="exact or heuristic multivariate l^p interpolation")
    common(p)
    p.add_argument("--p", type=float, required=True)
    _nd_flags(p)
    p.add_argument("--method", choices=["exact", "irl1"], default="exact")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("oracle", help="independent reference solvers for 1D data")
    common(p)
    p.add_argument("--p", type=float)
    p.add_argument("--kind", choices=["grid", "restart", "partition"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--restarts", type=int)
    p.add_argument("--grid-resolution", type=int)
    p.add_argument("--float", action="store_true")

    p = sub.add_parser("train", help="gradient training with a smoothed l^p penalty")
    common(p)
    p.add_argument("--config", required=True, help="JSON object of training options")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trajectory", help="write the per-step trajectory CSV here")

    p = sub.add_parser("verify", help="re-check a result document against its data")
    common(p)
    p.add_argument("--result", required=True)

    p = sub.add_parser("plot", help="emit sampled function values as CSV")
    common(p, data=False)
    p.add_argument("--result", required=True)
    p.add_argument("--range", type=float, nargs=2, required=True, metavar=("A", "B"))
    p.add_argument("--samples", type=int, required=True)
    return ap


def _nd_flags(p):
    p.add_argument("--R", type=float, help="coordinate bound (default 10 max(1,|y|) max(1,|x|))")
    p.add_argument("--patterns", choices=["all", "realizable"])
    p.add_argument("--support-cap", type=int)
    p.add_argument("--no-bias-penalty", action="store_true")


_COMMANDS = {
    "solve1d": _cmd_solve1d,
    "pstar": _cmd_pstar,
    "l0": _cmd_l0,
    "solve-nd": _cmd_solve_nd,
    "oracle": _cmd_oracle,
    "train": _cmd_train,
    "verify": _cmd_verify,
    "plot": _cmd_plot,
}


def _emit(text: str, out: str | None, stdout):
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        stderr.write(str(e) + "\n")
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    args._t0 = time.perf_counter()
    try:
        result = _COMMANDS[args.command](args)
    except _VerifyFailed as e:
        _emit(dumps_document(e.doc), args.out, stdout)
        stderr.write("verification failed: " + ", ".join(e.doc.solution["failed"]) + "\n")
        return EXIT_VALIDATION
    except ValidationError as e:
        stderr.write(f"error: {e}\n")
        return EXIT_VALIDATION
    except ResourceCapError as e:
        stderr.write(f"resource cap: {e}\n")
        return EXIT_RESOURCE
    except InfeasibleError as e:
        stderr.write(f"infeasible: {e}\n")
        return EXIT_INFEASIBLE
    except LpsiError as e:
        stderr.write(f"error: {e}\n")
        return EXIT_VALIDATION
    text = result if isinstance(result, str) else dumps_document(result)
    _emit(text, args.out, stdout)
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
