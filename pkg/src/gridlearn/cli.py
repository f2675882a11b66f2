"""Batch front door: testbed generation, stability-constrained commitment
studies, cost-aware forecaster studies, and problem census reports.

Every command writes its outputs plus a ``manifest.json`` capturing the
argument vector, input content hashes, seeds and package version; ``rerun``
replays a manifest and must reproduce the report files byte for byte with
the builtin backend.  Wall-clock numbers go to a separate ``timing.tsv`` so
the reports themselves stay deterministic.

Exit codes: 0 success, 2 usage, 3 data problem, 4 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .grid import (
    SchemaError,
    build_dispatch,
    build_redispatch,
    build_uc,
    bundled_case,
    generate_profiles,
    load_case,
    load_profile,
    save_case,
    save_profile,
    uc_parameter_values,
)
from .learners import (
    LinearClassifier,
    TrainConfig,
    fit_linear_least_squares,
    mlp_embedding,
    train_constrained_logistic,
    train_logistic,
    train_mlp,
    train_mlp_regressor,
)
from .neuralnet import parameter_count
from .optmodel import load_document, substitute_parameters
from .pipelines import (
    DegenerateActiveSet,
    UncertaintySet,
    add_stability_constraints,
    assessor_flags,
    assign_regions,
    ccg_train,
    chain_cost,
    chain_cost_gradient,
    cosine_matrix,
    mape,
    sco_metrics,
    train_forecaster_bilevel,
    worst_case_cost,
)
from .sampling import oracle_label, uniform_sampling
from .solver import SolverError, SolverOptions

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

# Forecasters are fit on calendar features only: realised weather is not
# known ahead of time, so it stays out of the information set.
FORECAST_FEATURES = (0, 1, 2, 3, 4)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: Path, command, argv, inputs, options):
    manifest = {
        "command": command,
        "argv": list(argv),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "options": options,
        "version": __version__,
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def _fmt(x):
    if isinstance(x, float):
        return "nan" if np.isnan(x) else f"{x:.6f}"
    return str(x)


def _write_tsv(path, header, rows):
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(header) + "\n")
        for row in rows:
            f.write("\t".join(_fmt(v) for v in row) + "\n")


def _load_grid(spec):
    try:
        if spec in ("case14", "case5"):
            return bundled_case(spec)
        return load_case(spec)
    except (OSError, SchemaError) as e:
        raise DataError(str(e)) from e


class DataError(Exception):
    pass


# -- gen-testbed ----------------------------------------------------------------

def cmd_gen_testbed(args, argv):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.days < 1:
        raise DataError("--days must be >= 1")
    g = _load_grid(args.case)
    profile = generate_profiles(g, seed=args.seed, days=args.days)
    save_case(g, outdir / "case.json")
    save_profile(profile, outdir / "profile.csv")
    inputs = [] if args.case in ("case14", "case5") else [args.case]
    _write_manifest(outdir, "gen-testbed", argv, inputs,
                    {"seed": args.seed, "days": args.days, "case": args.case})
    print(f"wrote {outdir / 'case.json'} and {outdir / 'profile.csv'} "
          f"({profile.horizon} hours)")
    return EXIT_OK


# -- sco --------------------------------------------------------------------------

def _parse_assessors(spec):
    out = []
    for token in spec.split(","):
        token = token.strip()
        if token in ("lgr", "clgr"):
            out.append((token, None))
        elif token.startswith("nn:"):
            arch = [int(v) for v in token[3:].split("-")]
            out.append(("nn", arch))
        else:
            raise DataError(f"unknown assessor {token!r}")
    return out


def _train_assessors(grid, specs, levels, threshold, seed):
    ds = uniform_sampling(grid, levels=levels, threshold=threshold)
    X, y = ds.features(), ds.labels
    trained = []
    for kind, arch in specs:
        if kind == "lgr":
            model = train_logistic(X, y, TrainConfig(epochs=600, seed=seed))
            n_par = len(model.w) + 1
            n_nn = 0
        elif kind == "clgr":
            model = train_constrained_logistic(
                X, y, TrainConfig(epochs=600, seed=seed))
            n_par = len(model.w) + 1
            n_nn = 0
        else:
            model = train_mlp(X, y, arch,
                              TrainConfig(learning_rate=0.3, epochs=150,
                                          batch_size=256, seed=seed))
            n_par = parameter_count(arch)
            n_nn = sum(arch[1:-1])
        trained.append((kind, model, n_par, n_nn))
    return trained, ds


def _solve_uc_day(prob, load_day, solar_day, opts):
    conc = substitute_parameters(prob, uc_parameter_values(load_day, solar_day))
    from .solver.bnb import solve

    sol = solve(conc, opts)
    if not sol.ok:
        raise SolverError(f"commitment solve failed: {sol.status}")
    return conc, sol


def _day_points(grid, conc, sol, horizon):
    """Per-hour (commitment, net p.u. injection) of a solved day."""
    u = sol.value_of(conc, "status").reshape(horizon, grid.n_gen)
    curt = sol.value_of(conc, "curtail").reshape(horizon, grid.n_ren)
    solar = conc.substituted["solar"].reshape(horizon, grid.n_ren)
    inj = (solar - curt) / grid.base_mva
    return np.round(u), inj


def cmd_sco(args, argv):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    g = _load_grid(args.case)
    profile = load_profile(args.profile)
    horizon = args.horizon
    days = min(args.days, profile.horizon // horizon)
    if days < 1:
        raise DataError("profile too short for one day")
    opts = SolverOptions(rel_gap=args.rel_gap, abs_gap=args.rel_gap,
                         engine=args.engine)
    specs = _parse_assessors(args.assessors)
    trained, _ = _train_assessors(g, specs, args.levels, args.gscr_lim,
                                  args.seed)

    t0 = time.perf_counter()
    uc = build_uc(g, horizon=horizon)
    rows = []
    timing = []
    base_true_all, base_cost = [], 0.0
    base_points = []
    t_base = 0.0
    for d in range(days):
        sl = slice(d * horizon, (d + 1) * horizon)
        tb = time.perf_counter()
        conc, sol = _solve_uc_day(uc, profile.load[sl], profile.solar[sl], opts)
        t_base += time.perf_counter() - tb
        base_cost += sol.objective
        u, inj = _day_points(g, conc, sol, horizon)
        for t in range(horizon):
            val, lab = oracle_label(g, u[t], inj[t], args.gscr_lim)
            base_true_all.append(lab)
            base_points.append((u[t], inj[t]))
    base_true_all = np.asarray(base_true_all)

    rows.append(["basic", base_cost / days, np.nan, np.nan, np.nan, np.nan,
                 0, uc.n_I])
    timing.append(["basic", t_base / days])

    for kind, model, n_par, n_nn in trained:
        sco_prob = add_stability_constraints(build_uc(g, horizon=horizon),
                                             model, g, horizon)
        feats = np.array([np.concatenate([u, p]) for u, p in base_points])
        base_flags = assessor_flags(model, feats[:, :g.n_gen],
                                    feats[:, g.n_gen:])
        cost = 0.0
        cons_true = []
        t_run = 0.0
        for d in range(days):
            sl = slice(d * horizon, (d + 1) * horizon)
            tb = time.perf_counter()
            conc, sol = _solve_uc_day(sco_prob, profile.load[sl],
                                      profile.solar[sl], opts)
            t_run += time.perf_counter() - tb
            cost += sol.objective
            u, inj = _day_points(g, conc, sol, horizon)
            for t in range(horizon):
                val, lab = oracle_label(g, u[t], inj[t], args.gscr_lim)
                cons_true.append(lab)
        cons_true = np.asarray(cons_true)
        basic_r = assign_regions(base_true_all.astype(bool),
                                 base_flags.ravel().astype(bool))
        cons_r = np.where(cons_true == 1, 2, 1)
        rep = sco_metrics(basic_r, cons_r, hours_per_day=horizon,
                          daily_ur=not args.hourly_ur)
        rows.append([kind, cost / days, 100 * rep.ur_constrained,
                     100 * rep.sr, 100 * rep.dr, 100 * rep.or_,
                     n_par, sco_prob.n_I])
        timing.append([kind, t_run / days])

    # UR of the plain problem from any region assignment (they share truth)
    daily = not args.hourly_ur
    if daily:
        bu = base_true_all[:days * horizon].reshape(days, -1).any(axis=1)
        ur_basic = float(bu.mean())
    else:
        ur_basic = float(base_true_all.mean())
    rows[0][2] = 100 * ur_basic

    _write_tsv(outdir / "report.tsv",
               ["type", "avg_cost", "UR_pct", "SR_pct", "DR_pct", "OR_pct",
                "n_param", "n_binary"], rows)
    _write_tsv(outdir / "timing.tsv", ["type", "avg_seconds"], timing)
    _write_manifest(outdir, "sco", argv, [args.case, args.profile]
                    if args.case not in ("case14", "case5") else [args.profile],
                    {"gscr_lim": args.gscr_lim, "days": days,
                     "assessors": args.assessors, "levels": args.levels,
                     "seed": args.seed, "rel_gap": args.rel_gap,
                     "horizon": horizon, "hourly_ur": args.hourly_ur,
                     "engine": args.engine})
    print((outdir / "report.tsv").read_text(), end="")
    print(f"total wall time: {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return EXIT_OK


# -- obf --------------------------------------------------------------------------

def cmd_obf(args, argv):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    g = _load_grid(args.case)
    profile = load_profile(args.profile)
    n = min(args.samples, profile.horizon)
    status = (np.ones(g.n_gen) if args.status is None
              else np.array([float(v) for v in args.status.split(",")]))
    if status.shape != (g.n_gen,):
        raise DataError(f"--status needs {g.n_gen} entries")
    opts = SolverOptions(rel_gap=args.rel_gap, abs_gap=args.rel_gap)
    dp = build_dispatch(g, status)
    rd = build_redispatch(g, status)

    raw = profile.features[:n][:, FORECAST_FEATURES]
    loads = profile.load[:n]
    solars = profile.solar[:n]

    t0 = time.perf_counter()
    if args.embed_width > 0:
        reg = train_mlp_regressor(
            raw, solars, [raw.shape[1], args.embed_width, solars.shape[1]],
            TrainConfig(learning_rate=0.02, epochs=300, batch_size=64,
                        seed=args.seed))
        X = mlp_embedding(reg, raw)
    else:
        X = raw
    abf = fit_linear_least_squares(X, solars, ridge=1e-8)
    abf_cost = chain_cost(g, dp, rd, abf, X, loads, solars, opts)
    obf, info = train_forecaster_bilevel(
        g, dp, rd, X, loads, solars, opts=opts, baseline=abf,
        node_budget=args.node_budget, compass_rounds=args.compass_rounds)

    agg_true = solars.sum(axis=1)

    def safe_mape(pred):
        from .pipelines import EmptyMask

        try:
            return mape(pred, agg_true)
        except EmptyMask:
            return np.nan     # all-dark sample window

    rows = [["true", 0.0, float(sum(
        _perfect_cost(g, dp, rd, loads[i], solars[i], opts)
        for i in range(n)) / n)]]
    for name, fc, cost in (("abf", abf, abf_cost),
                           ("obf", obf, info.final_cost)):
        rows.append([name, safe_mape(fc.predict(X).sum(axis=1)), float(cost)])
    if rows[0][2] > min(r[2] for r in rows[1:]) + 1e-6:
        raise SolverError("perfect-forecast cost exceeded a forecaster cost")

    header = ["method", "MAPE_pct", "avg_cost"]
    if args.budget > 0:
        uset = UncertaintySet.from_budget(loads, args.budget)
        robust, trace = ccg_train(g, dp, rd, X, loads, solars, uset,
                                  eps=args.ccg_eps, max_iter=args.ccg_iters,
                                  opts=opts, node_budget=args.node_budget)
        header.append("worst_case")
        for row, fc in zip(rows, (None, abf, obf)):
            if fc is None:
                row.append(np.nan)
            else:
                row.append(worst_case_cost(g, dp, rd, fc, X, loads, solars,
                                           uset, opts))
        rows.append(["robust", safe_mape(robust.predict(X).sum(axis=1)),
                     chain_cost(g, dp, rd, robust, X, loads, solars, opts),
                     worst_case_cost(g, dp, rd, robust, X, loads, solars,
                                     uset, opts)])

    _write_tsv(outdir / "report.tsv", header, rows)

    # gradient-consistency matrix over the trained forecasters
    methods = [("abf", abf), ("obf", obf)]
    if args.budget > 0:
        methods.append(("robust", robust))
    grads = []
    for name, fc in methods:
        gsum = None
        used = 0
        for i in range(n):
            try:
                gi = chain_cost_gradient(g, dp, rd, fc, X[i], loads[i],
                                         solars[i], opts)
            except DegenerateActiveSet:
                continue
            gsum = gi if gsum is None else gsum + gi
            used += 1
        grads.append(gsum / max(used, 1) if gsum is not None
                     else np.zeros(X.shape[1] * solars.shape[1] + solars.shape[1]))
    M = cosine_matrix([gr if np.linalg.norm(gr) > 0 else gr + 1e-12
                       for gr in grads])
    _write_tsv(outdir / "cosine.tsv", ["method"] + [m for m, _ in methods],
               [[m] + list(row) for (m, _), row in zip(methods, M)])

    inputs = [args.profile] if args.case in ("case14", "case5") \
        else [args.case, args.profile]
    _write_manifest(outdir, "obf", argv, inputs,
                    {"samples": n, "budget": args.budget, "seed": args.seed,
                     "status": args.status, "rel_gap": args.rel_gap,
                     "embed_width": args.embed_width,
                     "node_budget": args.node_budget,
                     "compass_rounds": args.compass_rounds,
                     "ccg_eps": args.ccg_eps, "ccg_iters": args.ccg_iters})
    _write_tsv(outdir / "timing.tsv", ["stage", "seconds"],
               [["total", time.perf_counter() - t0]])
    print((outdir / "report.tsv").read_text(), end="")
    return EXIT_OK


def _perfect_cost(grid, dp, rd, load, solar, opts):
    from .pipelines import forward_chain

    return forward_chain(grid, dp, rd, load, solar, solar, opts)["cost"]


# -- explain ---------------------------------------------------------------------

def cmd_explain(args, argv):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.problem:
        try:
            prob = load_document(args.problem)
        except OSError as e:
            raise DataError(str(e)) from e
        source = args.problem
    elif args.case:
        g = _load_grid(args.case)
        prob = build_uc(g, horizon=args.horizon)
        source = f"{args.case} commitment, horizon {args.horizon}"
    else:
        raise DataError("explain needs --problem or --case")
    c = prob.census()
    n_bin_lb = prob.n_I      # one lower-bound row per binary column
    lines = [f"problem: {source}",
             f"variables: {c['n_z']}",
             f"binaries: {c['n_binary']}",
             f"equality rows: {c['n_eq']}",
             f"inequality rows: {c['n_ineq']}",
             f"rows (excluding binary lower-bound box rows): "
             f"{c['n_eq'] + c['n_ineq'] - n_bin_lb}",
             f"parameter slots: {c['n_params']}",
             "", "variable blocks:"]
    for name, (a0, a1) in sorted(c["variables"].items(), key=lambda kv: kv[1][0]):
        lines.append(f"  {name}: columns [{a0}, {a1})")
    lines.append("")
    lines.append("parameters:")
    for name, (slot, dim) in sorted(c["parameters"].items(),
                                    key=lambda kv: kv[1][0]):
        lines.append(f"  {name}: slot {slot}, dim {dim}")
    lines.append("")
    lines.append("row families:")
    fam = {}
    for name, (block, count) in c["rows"].items():
        key = name.split("[")[0]
        blk, cnt = fam.get(key, (block, 0))
        fam[key] = (block, cnt + count)
    for key in sorted(fam):
        block, cnt = fam[key]
        lines.append(f"  {key}: {cnt} {block} rows")
    text = "\n".join(lines) + "\n"
    (outdir / "census.txt").write_text(text, encoding="utf-8")
    _write_manifest(outdir, "explain", argv,
                    [args.problem] if args.problem else
                    ([] if args.case in ("case14", "case5") else [args.case]),
                    {"horizon": args.horizon})
    print(text, end="")
    return EXIT_OK


# -- rerun ------------------------------------------------------------------------

def cmd_rerun(args, argv):
    try:
        with open(args.manifest, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read manifest: {e}") from e
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists():
            raise DataError(f"manifest input missing: {path}")
        if _sha256(path) != digest:
            raise DataError(f"manifest input changed: {path}")
    recorded = list(manifest["argv"])
    if "--out" in recorded:
        k = recorded.index("--out")
        recorded[k + 1] = args.out
    else:
        recorded += ["--out", args.out]
    return main(recorded)


# -- entry ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="gridlearn",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-testbed", help="write a case and profile")
    g.add_argument("--case", default="case14")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--days", type=int, default=365)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_testbed)

    s = sub.add_parser("sco", help="stability-constrained commitment study")
    s.add_argument("--case", default="case14")
    s.add_argument("--profile", required=True)
    s.add_argument("--days", type=int, default=30)
    s.add_argument("--horizon", type=int, default=24)
    s.add_argument("--assessors", default="lgr,clgr")
    s.add_argument("--gscr-lim", type=float, default=5.0, dest="gscr_lim")
    s.add_argument("--levels", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rel-gap", type=float, default=0.001, dest="rel_gap")
    s.add_argument("--engine", default="mip", choices=("mip", "tree"))
    s.add_argument("--hourly-ur", action="store_true", dest="hourly_ur")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sco)

    o = sub.add_parser("obf", help="cost-aware forecaster study")
    o.add_argument("--case", default="case14")
    o.add_argument("--profile", required=True)
    o.add_argument("--samples", type=int, default=168)
    o.add_argument("--status", default=None)
    o.add_argument("--budget", type=float, default=0.0)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--rel-gap", type=float, default=0.001, dest="rel_gap")
    o.add_argument("--embed-width", type=int, default=0, dest="embed_width")
    o.add_argument("--node-budget", type=int, default=2, dest="node_budget")
    o.add_argument("--compass-rounds", type=int, default=10,
                   dest="compass_rounds")
    o.add_argument("--ccg-eps", type=float, default=1.0, dest="ccg_eps")
    o.add_argument("--ccg-iters", type=int, default=8, dest="ccg_iters")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_obf)

    e = sub.add_parser("explain", help="problem census")
    e.add_argument("--problem", default=None)
    e.add_argument("--case", default=None)
    e.add_argument("--horizon", type=int, default=24)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_explain)

    r = sub.add_parser("rerun", help="replay a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rerun)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
