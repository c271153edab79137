"""Worst ratio v_i(A_i)/μ_i of the bag-filling algorithms on the tight families.

    python3 scripts/tight_ratios.py --max-n 6
"""
import argparse
import time

from mmsquota import oracles, single_chores, single_goods
from mmsquota.core import bundle_value
from mmsquota.generators import tight_chores_instance, tight_goods_instance


def ratio(inst, alloc, mu, goods):
    rs = [bundle_value(inst, i, alloc[i]) / mu for i in range(inst.n_agents)]
    return min(rs) if goods else max(rs)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-n", type=int, default=5)
    args = ap.parse_args()
    print(f"{'family':7} {'n':>2} {'ratio':>7} {'bound':>7} {'mu':>4} {'sec':>6}")
    for name, make, solve, bound, goods in (
        ("goods", tight_goods_instance, single_goods.approx_goods, single_goods.default_alpha, True),
        ("chores", tight_chores_instance, single_chores.approx_chores, single_chores.default_alpha, False),
    ):
        for n in range(1, args.max_n + 1):
            inst = make(n)
            start = time.perf_counter()
            alloc = solve(inst, check_invariants=True)
            elapsed = time.perf_counter() - start
            mu = oracles.mms_identical_dp(inst).value
            r = ratio(inst, alloc, mu, goods)
            flag = "" if r == bound(n) else "  MISMATCH"
            print(f"{name:7} {n:2d} {str(r):>7} {str(bound(n)):>7} {str(mu):>4} {elapsed:6.3f}{flag}")


if __name__ == "__main__":
    main()
