"""Run one algorithm on many small seeded instances and compare with the oracle.

Prints the number of instances, violations, and the distribution of the
smallest slack v_i(A_i)/μ_i over agents with μ_i ≠ 0.

    python3 scripts/guarantee_sweep.py --algorithm multi-chores --count 2000 --categories 2 3
"""
import argparse
import collections
import time
from fractions import Fraction

from mmsquota import multi_category, oracles, single_chores, single_goods
from mmsquota.core import Kind, bundle_value, verify_alpha_mms
from mmsquota.generators import sweep_instance

ALGS = {
    "single-goods": ("goods", single_goods.approx_goods, single_goods.default_alpha),
    "single-chores": ("chores", single_chores.approx_chores, single_chores.default_alpha),
    "multi-goods": ("goods", multi_category.approx_categorized_goods, multi_category.default_alpha_goods),
    "multi-chores": ("chores", multi_category.approx_categorized_chores, multi_category.default_alpha_chores),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--algorithm", choices=ALGS, default="single-goods")
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--agents", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--max-items", type=int, default=8)
    ap.add_argument("--categories", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    ap.add_argument("--magnitude", type=int, default=3)
    ap.add_argument("--check-invariants", action="store_true")
    args = ap.parse_args()
    kind, solve, alpha_of = ALGS[args.algorithm]
    cats = tuple(args.categories) if args.categories else ((1, 1) if args.algorithm.startswith("single") else (2, 3))
    violations, worst = [], collections.Counter()
    start = time.perf_counter()
    for s in range(args.seed, args.seed + args.count):
        inst = sweep_instance(s, kind, tuple(args.agents), args.max_items, cats, args.magnitude)
        alpha = alpha_of(inst.n_agents)
        alloc = solve(inst, alpha, check_invariants=args.check_invariants)
        mu = oracles.mms_values(inst)
        if not verify_alpha_mms(inst, alloc, alpha, mu).ok:
            violations.append(s)
        ratios = [bundle_value(inst, i, alloc[i]) / mu[i] for i in range(inst.n_agents) if mu[i] != 0]
        if ratios:
            r = min(ratios) if inst.kind is Kind.GOODS else max(ratios)
            worst[r if r <= 2 else Fraction(2)] += 1
    elapsed = time.perf_counter() - start
    print(f"{args.algorithm}: {args.count} instances, {len(violations)} violations, {elapsed:.1f}s")
    if violations:
        print("violating seeds:", violations[:20])
    print("worst per-instance ratio (capped at 2): count")
    for r in sorted(worst, reverse=kind == "chores")[:12]:
        print(f"  {str(r):>6} ({float(r):.3f}): {worst[r]}")


if __name__ == "__main__":
    main()
