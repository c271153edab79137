"""Command-line front end.

    mmsquota validate inst.json
    mmsquota solve inst.json --algorithm auto --oracle --out alloc.json
    mmsquota verify inst.json alloc.json --alpha 4/5
    mmsquota gen tight-goods --n 3 --out inst.json
    mmsquota mblp --agents 2 --category 2:1:1 --out model.lp --mapping map.json

Exit codes: 0 ok, 2 invalid input, 3 guarantee or invariant failure,
4 tractability guard exceeded.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .core import (
    GuardError,
    InstanceError,
    InvariantError,
    as_fraction,
    validate_instance,
    verify_alpha_mms,
    to_ordered,
)
from .generators import QUOTA_POLICIES, random_instance, tight_chores_instance, tight_goods_instance
from .io import (
    allocation_to_dict,
    dump_json,
    instance_to_dict,
    load_allocation,
    load_instance,
    rat_report,
)
from . import mblp, oracles
from .solve import ALGORITHMS, SolveConfig, run

OK, INVALID, FAILED, GUARD = 0, 2, 3, 4


def _emit(obj, out=None):
    text = dump_json(obj, out)
    if out is None:
        sys.stdout.write(text)


def _load_valid(path):
    inst = load_instance(path)
    problems = validate_instance(inst)
    if problems:
        raise InstanceError("; ".join(problems))
    return inst


def report_dict(rep) -> dict:
    agents = []
    for i, bundle in enumerate(rep.allocation.bundles):
        row = {"agent": i, "bundle": list(bundle), "value": rat_report(rep.values[i])}
        if i in rep.mu_hat:
            row["mu_hat"] = rat_report(rep.mu_hat[i])
        if rep.mu is not None:
            row["mu"] = rat_report(rep.mu[i])
            row["margin"] = rat_report(rep.margins[i])
        agents.append(row)
    out = {"algorithm": rep.algorithm, "alpha": rat_report(rep.alpha), "agents": agents}
    if rep.margins is not None:
        out["ok"] = rep.ok
        out["min_margin"] = rat_report(min(rep.margins)) if rep.margins else None
    out["wall_time"] = round(rep.wall_time, 6)
    return out


def _config(args) -> SolveConfig:
    return SolveConfig(
        algorithm=args.algorithm,
        alpha=None if args.alpha is None else as_fraction(args.alpha),
        eps=as_fraction(args.eps),
        oracle=args.oracle,
        check_invariants=args.check_invariants,
    )


def _solve_file(path: str, cfg: SolveConfig, out_dir: str | None) -> dict:
    """Batch worker; returns a summary row instead of raising."""
    try:
        inst = _load_valid(path)
        rep = run(inst, cfg)
        stem = Path(path).stem
        target = Path(out_dir) if out_dir else Path(path).parent
        dump_json(allocation_to_dict(rep.allocation), target / f"{stem}.alloc.json")
        dump_json(report_dict(rep), target / f"{stem}.report.json")
        code = FAILED if rep.ok is False else OK
        return {"file": Path(path).name, "algorithm": rep.algorithm, "ok": rep.ok, "exit": code}
    except InstanceError as exc:
        return {"file": Path(path).name, "error": str(exc), "exit": INVALID}
    except InvariantError as exc:
        return {"file": Path(path).name, "error": str(exc), "exit": FAILED}
    except GuardError as exc:
        return {"file": Path(path).name, "error": str(exc), "exit": GUARD}


def cmd_validate(args):
    inst = load_instance(args.instance)
    problems = validate_instance(inst)
    _emit({"ok": not problems, "violations": problems})
    return OK if not problems else INVALID


def cmd_ordered(args):
    inst = _load_valid(args.instance)
    _emit(instance_to_dict(to_ordered(inst).ordered_instance), args.out)
    return OK


def cmd_solve(args):
    cfg = _config(args)
    if args.dir:
        files = sorted(str(p) for p in Path(args.dir).glob("*.json")
                       if not p.name.endswith((".alloc.json", ".report.json")))
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(_solve_file, files, [cfg] * len(files), [args.out_dir] * len(files)))
        else:
            rows = [_solve_file(f, cfg, args.out_dir) for f in files]
        _emit({"results": rows})
        return max((r["exit"] for r in rows), default=OK)
    inst = _load_valid(args.instance)
    rep = run(inst, cfg)
    if args.out:
        dump_json(allocation_to_dict(rep.allocation), args.out)
    _emit(report_dict(rep), args.report)
    return FAILED if rep.ok is False else OK


def cmd_mms(args):
    inst = _load_valid(args.instance)
    if args.all:
        results = oracles.mms_all(inst)
        _emit([{"agent": i, "mu": rat_report(r.value), "partition": [list(b) for b in r.partition.bundles]}
               for i, r in enumerate(results)])
    else:
        if not 0 <= args.agent < inst.n_agents:
            raise InstanceError(f"agent {args.agent} out of range")
        r = oracles.mms_bruteforce(inst, args.agent)
        _emit({"agent": args.agent, "mu": rat_report(r.value), "partition": [list(b) for b in r.partition.bundles]})
    return OK


def cmd_best_alpha(args):
    inst = _load_valid(args.instance)
    alpha, alloc = oracles.best_alpha(inst)
    _emit({"alpha": rat_report(alpha), "allocation": allocation_to_dict(alloc)})
    return OK


def cmd_verify(args):
    inst = _load_valid(args.instance)
    alloc = load_allocation(args.allocation)
    mu = oracles.mms_values(inst)
    check = verify_alpha_mms(inst, alloc, as_fraction(args.alpha), mu)
    _emit({
        "ok": check.ok,
        "alpha": rat_report(as_fraction(args.alpha)),
        "agents": [{"agent": i, "mu": rat_report(mu[i]), "margin": rat_report(x)}
                   for i, x in enumerate(check.margins)],
    })
    return OK if check.ok else FAILED


def cmd_gen(args):
    if args.family == "tight-goods":
        inst = tight_goods_instance(args.n, args.shuffle)
    elif args.family == "tight-chores":
        inst = tight_chores_instance(args.n, args.shuffle)
    else:
        sizes = [int(s) for s in args.sizes.split(",") if s]
        vr = None if args.lo is None and args.hi is None else (args.lo, args.hi)
        if vr is not None and None in vr:
            raise InstanceError("give both --lo and --hi")
        inst = random_instance(args.seed, args.n, sizes, args.policy, vr, args.kind, args.ordered)
    _emit(instance_to_dict(inst), args.out)
    return OK


def _category_spec(text: str):
    try:
        size, qm, qp = (int(x) for x in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected size:qmin:qmax, got {text!r}") from exc
    return size, (qm, qp)


def cmd_mblp(args):
    specs = args.category
    dim = mblp.Dimension(args.agents, tuple(s for s, _ in specs), tuple(q for _, q in specs))
    model = mblp.build_mblp(dim)
    mblp.emit_lp(model, args.out)
    if args.mapping:
        mblp.write_mapping(model, args.mapping)
    _emit(model.counts())
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmsquota", description="Exact MMS allocation under category quotas.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check an instance file")
    s.add_argument("instance")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("ordered", help="write the ordered version of an instance")
    s.add_argument("instance")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ordered)

    s = sub.add_parser("solve", help="compute an approximate MMS allocation")
    s.add_argument("instance", nargs="?")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="auto")
    s.add_argument("--alpha", help="override α, as p/q")
    s.add_argument("--eps", default="1/10", help="ε for the identical-agent FPTAS")
    s.add_argument("--oracle", action="store_true", help="compare against brute-force MMS values")
    s.add_argument("--check-invariants", action="store_true", help="assert the round invariants")
    s.add_argument("--out", help="allocation output file")
    s.add_argument("--report", help="report output file (default stdout)")
    s.add_argument("--dir", help="solve every *.json in this directory")
    s.add_argument("--out-dir", help="where batch outputs go (default: next to inputs)")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("mms", help="brute-force MMS values")
    s.add_argument("instance")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--agent", type=int)
    g.add_argument("--all", action="store_true")
    s.set_defaults(func=cmd_mms)

    s = sub.add_parser("best-alpha", help="best α achievable by any feasible allocation")
    s.add_argument("instance")
    s.set_defaults(func=cmd_best_alpha)

    s = sub.add_parser("verify", help="check an allocation against α times the MMS")
    s.add_argument("instance")
    s.add_argument("allocation")
    s.add_argument("--alpha", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("gen", help="generate instances")
    s.add_argument("family", choices=("tight-goods", "tight-chores", "random"))
    s.add_argument("--n", type=int, default=2, help="number of agents")
    s.add_argument("--shuffle", type=int, help="relabel items with this seed")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sizes", default="6", help="comma-separated category sizes")
    s.add_argument("--policy", choices=QUOTA_POLICIES, default="loose")
    s.add_argument("--kind", choices=("goods", "chores"), default="goods")
    s.add_argument("--lo", type=int)
    s.add_argument("--hi", type=int)
    s.add_argument("--ordered", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("mblp", help="emit the worst-case-ratio MBLP as an LP file")
    s.add_argument("--agents", type=int, required=True)
    s.add_argument("--category", type=_category_spec, action="append", required=True,
                   help="size:qmin:qmax, repeat per category")
    s.add_argument("--out", required=True)
    s.add_argument("--mapping")
    s.set_defaults(func=cmd_mblp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve" and not (args.instance or args.dir):
        print("solve: give an instance file or --dir", file=sys.stderr)
        return INVALID
    try:
        return args.func(args)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return FAILED
    except GuardError as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return GUARD


if __name__ == "__main__":
    sys.exit(main())
