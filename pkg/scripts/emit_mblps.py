"""Emit the worst-case-ratio MBLP for a list of small dimensions and tabulate sizes.

    python3 scripts/emit_mblps.py --out-dir /tmp/mblps --solve
"""
import argparse
import multiprocessing as mp
from pathlib import Path

from mmsquota import mblp

DIMENSIONS = [
    (2, (2,), ((1, 1),)),
    (2, (4,), ((2, 2),)),
    (2, (6,), ((3, 3),)),
    (2, (3, 2), ((1, 2), (1, 1))),
    (3, (3,), ((1, 1),)),
    (3, (4,), ((1, 2),)),
    (3, (2, 2), ((0, 1), (0, 1))),
]


def _solve(path, limit, box):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", limit)
    h.readModel(path)
    h.run()
    if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
        box.put(f"{h.getInfo().objective_function_value:.4f}")


def solve_with_deadline(path, limit):
    # HiGHS does not always honour time_limit during presolve, so enforce it here
    box = mp.Queue()
    proc = mp.Process(target=_solve, args=(path, limit, box), daemon=True)
    proc.start()
    proc.join(limit + 2)
    if proc.is_alive():
        proc.kill()
        proc.join()
    return box.get() if not box.empty() else "timeout"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="mblp_out")
    ap.add_argument("--solve", action="store_true", help="solve each model with highspy if it is installed")
    ap.add_argument("--time-limit", type=float, default=10.0, help="seconds per model when solving")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    highspy = None
    if args.solve:
        try:
            import highspy
        except ImportError:
            print("highspy not installed; emitting only")
    print(f"{'dimension':40} {'|S|':>5} {'|F|':>7} {'vars':>7} {'rows':>7} {'alpha*':>8}")
    for n, sizes, quotas in DIMENSIONS:
        dim = mblp.Dimension(n, sizes, quotas)
        model = mblp.build_mblp(dim)
        stem = f"n{n}_" + "_".join(f"{s}-{a}-{b}" for s, (a, b) in zip(sizes, quotas))
        mblp.emit_lp(model, out / f"{stem}.lp")
        mblp.write_mapping(model, out / f"{stem}.map.json")
        c = model.counts()
        opt = ""
        if highspy is not None:
            opt = solve_with_deadline(str(out / f"{stem}.lp"), args.time_limit)
        print(f"{stem:40} {c['bundles']:5d} {c['allocations']:7d} {c['variables']:7d} {c['constraints']:7d} {opt:>8}",
              flush=True)


if __name__ == "__main__":
    main()
