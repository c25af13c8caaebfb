"""Command line: run, agents, verify, phase, compare-apf.

Exit codes: 0 success, 2 invalid input, 3 collision (or no safe agent),
4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import agents as ag
from . import io
from .auxiliary import rs_derivatives
from .simulator import APFParams, Termination, metrics, simulate
from .world import WorldError, validate_params

EXIT_OK, EXIT_INVALID, EXIT_COLLISION, EXIT_VERIFY = 0, 2, 3, 4


class InputError(Exception):
    pass


def _load(args):
    sc = io.load_scenario(args.scenario)
    rep = validate_params(sc.params)
    if not rep.ok:
        raise InputError("invalid parameters: " + ", ".join(rep.failures()))
    if getattr(args, "seed", None) is not None:
        dist = dict(sc.disturbance, seed=args.seed) if sc.disturbance else None
        sc = replace(sc, seed=args.seed, disturbance=dist)
    return sc


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    sc = _load(args)
    if args.mode == "disturbed" and not sc.disturbance:
        raise InputError("disturbed mode needs a 'disturbance' block in the scenario")
    kw = {}
    if args.dt is not None:
        kw["dt"] = args.dt
    if args.horizon is not None:
        kw["horizon"] = args.horizon
    tr = simulate(sc, args.mode, **kw)
    out = _out(args)
    io.write_trajectory_csv(tr, out / "trajectory.csv")
    doc = io.metrics_dict(metrics(tr), args.deterministic)
    io.write_json(doc, out / "metrics.json")
    print(f"{tr.terminated_by.name}: {len(tr.t)} rows, length {doc['length_m']:.4f} m, "
          f"min distance {doc['min_dist_m']:.4f} m")
    return EXIT_COLLISION if tr.terminated_by is Termination.Collision else EXIT_OK


def _weights(text, d_safe=None) -> ag.CostWeights:
    try:
        w_len, w_dist = (float(s) for s in text.split(","))
    except ValueError:
        raise InputError(f"--weights expects 'w_len,w_dist', got {text!r}") from None
    return ag.CostWeights(w_len, w_dist, d_safe)


def cmd_agents(args) -> int:
    sc = _load(args)
    tree = ag.plan(sc, dt_pred=args.dt_pred, weights=_weights(args.weights), cap=args.cap,
                   seed=args.seed)
    out = _out(args)
    (out / "agents_tree.json").write_text(tree.to_json(args.deterministic) + "\n")
    times = [a.prediction_time * 1e3 for a in tree.agents]
    print(f"{len(tree.agents)} agents, {len(tree.leaves())} leaves, max live {tree.max_live}")
    if not args.deterministic:
        print(f"prediction time per agent: mean {np.mean(times):.3f} ms, max {np.max(times):.3f} ms")
    try:
        best = tree.best()
    except ag.NoFeasibleAgent:
        print("no feasible agent: keep the current field vectors")
        return EXIT_COLLISION
    io.write_trajectory_csv(best.trajectory, out / "best_trajectory.csv")
    print(f"selected agent {best.id}, cost {best.cost:.6g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verification as ver
    claims = None if args.claims in (None, "all") else args.claims.split(",")
    try:
        results = ver.run_checks(claims, args.n, args.seed)
    except KeyError as e:
        raise InputError(str(e)) from None
    print(ver.summary_table(results))
    if args.out:
        out = _out(args)
        (out / "verify_report.json").write_text(ver.report_json(results) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def parse_grid(text):
    """'lo,hi,step' (square) or 'r_lo,r_hi,s_lo,s_hi,step'."""
    try:
        vals = [float(s) for s in text.split(",")]
    except ValueError:
        raise InputError(f"bad --grid {text!r}") from None
    if len(vals) == 3:
        lo, hi, step = vals
        vals = [lo, hi, lo, hi, step]
    if len(vals) != 5 or vals[4] <= 0 or vals[1] < vals[0] or vals[3] < vals[2]:
        raise InputError(f"bad --grid {text!r}")
    r_lo, r_hi, s_lo, s_hi, step = vals
    r = r_lo + step * np.arange(int(round((r_hi - r_lo) / step)) + 1)
    s = s_lo + step * np.arange(int(round((s_hi - s_lo) / step)) + 1)
    return r, s


def phase_samples(v_norm, k_cf, r, s) -> np.ndarray:
    """Rows (R, S, R', S', S on the collision ray at this R); the origin is skipped."""
    c = k_cf / v_norm**2
    rows = []
    for R in r:
        for S in s:
            if R == 0.0 and S == 0.0:
                continue
            dR, dS = rs_derivatives(R, S, v_norm, k_cf)
            rows.append((R, S, dR, dS, -c * R))
    return np.asarray(rows)


def cmd_phase(args) -> int:
    if args.v <= 0 or args.k_cf <= 0:
        raise InputError("--v and --k-cf must be positive")
    r, s = parse_grid(args.grid)
    rows = phase_samples(args.v, args.k_cf, r, s)
    out = _out(args)
    with open(out / "phase.csv", "w") as fh:
        fh.write("R,S,dR,dS,ray_S\n")
        for row in rows:
            fh.write(",".join(io.fmt_float(float(a)) for a in row) + "\n")
    print(f"{len(rows)} samples written")
    return EXIT_OK


def cmd_compare_apf(args) -> int:
    sc = _load(args)
    base = APFParams(**(sc.apf or {}))
    apf = APFParams(args.eta if args.eta is not None else base.eta,
                    args.rho0 if args.rho0 is not None else base.rho0)
    table = {}
    for name, mode in (("cfp", "full"), ("apf", "apf")):
        tr = simulate(sc, mode, apf=apf)
        row = io.metrics_dict(metrics(tr), args.deterministic)
        row["termination"] = tr.terminated_by.name
        table[name] = row
    out = _out(args)
    io.write_json({"apf": {"eta": apf.eta, "rho0": apf.rho0}, "planners": table},
                  out / "compare.json")
    print(f"{'planner':8s} {'termination':12s} {'length_m':>10s} {'duration_s':>11s} "
          f"{'min_dist_m':>11s}")
    for name, row in table.items():
        print(f"{name:8s} {row['termination']:12s} {row['length_m']:10.4f} "
              f"{row['duration_s']:11.3f} {row['min_dist_m']:11.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfplanner", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True)
        sp.add_argument("--out", default="out")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--deterministic", action="store_true",
                        help="omit wall-clock fields so outputs are byte-stable")

    r = sub.add_parser("run", help="simulate one scenario")
    common(r)
    r.add_argument("--mode", choices=["cf", "full", "disturbed"], default="full")
    r.add_argument("--dt", type=float)
    r.add_argument("--horizon", type=float)
    r.set_defaults(fn=cmd_run)

    a = sub.add_parser("agents", help="virtual-agent prediction and selection")
    common(a)
    a.add_argument("--dt-pred", type=float, default=ag.DT_PRED)
    a.add_argument("--weights", default="1,1")
    a.add_argument("--cap", type=int, default=ag.AGENT_CAP)
    a.set_defaults(fn=cmd_agents)

    v = sub.add_parser("verify", help="run the guarantee checks")
    common(v, scenario=False)
    v.set_defaults(out=None)
    v.add_argument("--claims", default="all")
    v.add_argument("--n", type=int)
    v.set_defaults(fn=cmd_verify)

    ph = sub.add_parser("phase", help="sample the (R, S) vector field")
    common(ph, scenario=False)
    ph.add_argument("--v", type=float, default=1.0)
    ph.add_argument("--k-cf", type=float, default=1.0)
    ph.add_argument("--grid", default="-5,5,0.5")
    ph.set_defaults(fn=cmd_phase)

    c = sub.add_parser("compare-apf", help="circular field vs potential field on one scenario")
    common(c)
    c.add_argument("--eta", type=float)
    c.add_argument("--rho0", type=float)
    c.set_defaults(fn=cmd_compare_apf)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # grid values usually start with '-', which argparse would read as an option
    if "--grid" in argv[:-1]:
        i = argv.index("--grid")
        argv[i:i + 2] = [f"--grid={argv[i + 1]}"]
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.fn(args)
    except (InputError, WorldError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
