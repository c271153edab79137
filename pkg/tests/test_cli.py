import json
import subprocess
import sys
from fractions import Fraction

import pytest

from mmsquota import solve
from mmsquota.cli import main
from mmsquota.core import Category, Instance, InstanceError
from mmsquota.generators import random_instance, tight_chores_instance, tight_goods_instance
from mmsquota.io import instance_from_dict, instance_to_dict, load_allocation, rat_report, rat_str, save_instance


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def tight2(tmp_path):
    path = tmp_path / "tight2.json"
    save_instance(tight_goods_instance(2), path)
    return path


def test_rational_reporting():
    assert rat_str(Fraction(4, 2)) == 2
    assert rat_str(Fraction(4, 5)) == "4/5"
    assert rat_report(Fraction(4, 5)) == {"exact": "4/5", "decimal": 0.8}


def test_instance_json_round_trip():
    inst = random_instance(2, 3, (3, 4), "loose", (0, 5))
    assert instance_from_dict(json.loads(json.dumps(instance_to_dict(inst)))) == inst


def test_instance_json_rejects_floats():
    d = instance_to_dict(tight_goods_instance(1))
    d["valuations"][0][0] = 0.5
    with pytest.raises(InstanceError):
        instance_from_dict(d)


def test_validate(capsys, tmp_path, tight2):
    code, out, _ = run_cli(capsys, "validate", tight2)
    assert code == 0 and json.loads(out)["ok"]
    bad = Instance(2, (Category((0, 1, 2), 2, 3),), [[1, 1, 1]] * 2)
    path = tmp_path / "bad.json"
    save_instance(bad, path)
    code, out, _ = run_cli(capsys, "validate", path)
    assert code == 2
    assert json.loads(out)["violations"] == ["category 0: q⁻·n=4 > |C|=3"]


def test_solve_tight_goods_reports_zero_margin(capsys, tmp_path, tight2):
    alloc_path = tmp_path / "a.json"
    code, out, _ = run_cli(capsys, "solve", tight2, "--algorithm", "single-goods",
                           "--oracle", "--check-invariants", "--out", alloc_path)
    rep = json.loads(out)
    assert code == 0 and rep["ok"]
    assert rep["alpha"]["exact"] == "4/5"
    assert rep["min_margin"]["exact"] == "0/1"
    code, _, _ = run_cli(capsys, "verify", tight2, alloc_path, "--alpha", "81/100")
    assert code == 3
    code, _, _ = run_cli(capsys, "verify", tight2, alloc_path, "--alpha", "4/5")
    assert code == 0
    assert load_allocation(alloc_path).bundles == ((1, 2, 5), (0, 3, 4))


def test_auto_routes(tmp_path):
    cases = {
        "bivalued": Instance.single([[1, 1, 0], [1, 0, 0]], 0, 3),
        "fptas": tight_goods_instance(2),
        "single-goods": Instance.single([[3, 2, 1], [1, 1, 1]], 0, 3),
        "single-chores": Instance.single([[-1, -2, -3], [-1, -1, -2]], 0, 3),
        "multi-goods": Instance.build([[3, 2, 1, 1], [2, 2, 2, 1]], [((0, 1), 0, 2), ((2, 3), 0, 2)]),
        "multi-chores": Instance.build([[-1, -2, -3, -3], [-2, -2, -2, -1]], [((0, 1), 0, 2), ((2, 3), 0, 2)]),
    }
    for name, inst in cases.items():
        assert solve.route(inst) == name
    with pytest.raises(InstanceError, match="unsupported kind"):
        solve.route(Instance.single([[3, -1, 0]], 0, 3))


@pytest.mark.parametrize("algorithm", ["single-goods", "identical-dp", "fptas", "almost-identical", "bivalued", "multi-goods"])
def test_every_algorithm_runs_with_oracle(algorithm):
    inst = Instance.single([[2, 2, 1, 1]] * 2, 1, 3) if algorithm == "bivalued" else tight_goods_instance(2)
    rep = solve.run(inst, solve.SolveConfig(algorithm=algorithm, oracle=True))
    assert rep.ok, (algorithm, rep.margins)


def test_run_orders_unordered_input():
    inst = tight_chores_instance(3, shuffle_seed=4)
    rep = solve.run(inst, solve.SolveConfig(algorithm="single-chores", oracle=True, check_invariants=True))
    assert rep.ok and max(v / mu for v, mu in zip(rep.values, rep.mu)) == Fraction(4, 3)


def test_gen_and_mms(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, _ = run_cli(capsys, "gen", "random", "--seed", 3, "--n", 2, "--sizes", "3,2",
                         "--policy", "tight", "--out", path)
    assert code == 0
    code, out, _ = run_cli(capsys, "mms", path, "--all")
    assert code == 0 and len(json.loads(out)) == 2
    code, out, _ = run_cli(capsys, "best-alpha", path)
    assert code == 0 and "alpha" in json.loads(out)


def test_guard_exit_code(capsys, tmp_path):
    path = tmp_path / "big.json"
    save_instance(random_instance(0, 3, (30,), "unconstrained"), path)
    code, _, err = run_cli(capsys, "mms", path, "--agent", 0)
    assert code == 4 and "guard" in err


def test_invalid_json_exit_code(capsys, tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    code, _, _ = run_cli(capsys, "solve", path)
    assert code == 2


def test_ordered_command(capsys, tmp_path):
    path = tmp_path / "u.json"
    save_instance(Instance.single([[1, 3, 2], [2, 1, 3]], 1, 2), path)
    code, out, _ = run_cli(capsys, "ordered", path)
    assert code == 0
    rows = json.loads(out)["valuations"]
    assert rows == [[3, 2, 1], [3, 2, 1]]


def test_mblp_command(capsys, tmp_path):
    lp, mp = tmp_path / "m.lp", tmp_path / "m.json"
    code, out, _ = run_cli(capsys, "mblp", "--agents", 2, "--category", "2:1:1", "--out", lp, "--mapping", mp)
    assert code == 0
    assert json.loads(out)["variables"] == 17
    first = lp.read_bytes()
    run_cli(capsys, "mblp", "--agents", 2, "--category", "2:1:1", "--out", lp)
    assert lp.read_bytes() == first
    assert json.loads(mp.read_text())["bundles"] == [[0], [1]]


def test_batch_dir(capsys, tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for s in range(4):
        save_instance(random_instance(s, 2, (5,), "loose", (0, 4)), src / f"r{s}.json")
    code, out, _ = run_cli(capsys, "solve", "--dir", src, "--oracle", "--jobs", 2, "--out-dir", tmp_path)
    rows = json.loads(out)["results"]
    assert code == 0 and len(rows) == 4 and all(r["ok"] for r in rows)
    assert (tmp_path / "r0.report.json").exists()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "mmsquota", "gen", "tight-chores", "--n", "2"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["agents"] == 2
