import io
import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mmsquota import mblp, oracles
from mmsquota.core import GuardError, Instance, InstanceError
from mmsquota.generators import random_instance, tight_goods_instance
from mmsquota.mblp import (
    Dimension,
    build_mblp,
    check_alpha_witness,
    emit_lp,
    enumerate_feasible_allocations,
    enumerate_feasible_bundles,
    expected_counts,
    lp_text,
    parse_lp,
    structural_problems,
    violated_rows,
    witness_assignment,
)


@pytest.mark.parametrize("dim,count", [
    (Dimension(2, (4,), ((2, 2),)), 6),
    (Dimension(2, (2, 2), ((1, 1), (1, 1))), 4),
    (Dimension(1, (3,), ((0, 3),)), 8),
])
def test_bundle_counts(dim, count):
    bundles = enumerate_feasible_bundles(dim)
    assert len(bundles) == count == mblp.count_feasible_bundles(dim)
    assert bundles == sorted(bundles)


@pytest.mark.parametrize("dim,count", [
    (Dimension(2, (2,), ((1, 1),)), 2),
    (Dimension(2, (4,), ((2, 2),)), 6),
    (Dimension(2, (3,), ((1, 2),)), 6),
])
def test_allocation_counts(dim, count):
    assert len(enumerate_feasible_allocations(dim)) == count


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(1, 3), min_size=1, max_size=2), st.data())
def test_enumerations_match_power_set(n, sizes, data):
    quotas = tuple((data.draw(st.integers(0, s // n)), data.draw(st.integers(-(-s // n), s))) for s in sizes)
    dim = Dimension(n, tuple(sizes), quotas)
    cats = dim.categories()

    def feasible(b):
        return all(qm <= sum(g in b for g in c) <= qp for c, (qm, qp) in zip(cats, quotas))

    naive = [b for r in range(dim.m + 1) for b in itertools.combinations(range(dim.m), r) if feasible(b)]
    assert sorted(enumerate_feasible_bundles(dim)) == sorted(naive)
    allocs = enumerate_feasible_allocations(dim)
    assert len(set(allocs)) == len(allocs)
    inst = dim.instance([[1] * dim.m] * n)
    assert len(allocs) == sum(1 for _ in oracles.iter_feasible_allocations(inst))


def test_bundle_guard():
    with pytest.raises(GuardError):
        enumerate_feasible_bundles(Dimension(2, (14,), ((0, 14),)))


def test_dimension_rejects_bad_quotas():
    with pytest.raises(InstanceError):
        Dimension(2, (5,), ((3, 3),))


def test_small_model_counts():
    model = build_mblp(Dimension(2, (2,), ((1, 1),)))
    assert model.counts() == {"variables": 17, "binaries": 12, "constraints": 22, "bundles": 2, "allocations": 2}
    assert expected_counts(2, 2, 2, 2) == (17, 22)
    assert structural_problems(model) == []


def test_unconstrained_quota_keeps_every_subset():
    model = build_mblp(Dimension(2, (3,), ((0, 3),)))
    assert len(model.bundles) == 8


def test_lp_sections_and_binaries():
    model = build_mblp(Dimension(2, (2,), ((1, 1),)))
    text = lp_text(model)
    for head in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert f"\n{head}\n" in "\n" + text
    parsed = parse_lp(text)
    assert sorted(parsed["binaries"]) == sorted(v.name for v in model.variables if v.binary)
    assert all(name.startswith(("p_", "l_")) for name in parsed["binaries"])
    assert parsed["objective"] == ["alpha"]


def test_lp_round_trip():
    model = build_mblp(Dimension(3, (2, 1), ((0, 1), (0, 1))))
    parsed = parse_lp(lp_text(model))
    assert parsed["order"] == [r.name for r in model.rows]
    for r in model.rows:
        assert parsed["rows"][r.name] == (tuple(r.terms), r.sense, r.rhs)


def test_emission_is_byte_stable(tmp_path):
    dim = Dimension(2, (2, 2), ((1, 1), (0, 2)))
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    emit_lp(build_mblp(dim), a)
    emit_lp(build_mblp(dim), b)
    assert a.read_bytes() == b.read_bytes()
    buf = io.StringIO()
    emit_lp(build_mblp(dim), buf)
    assert buf.getvalue() == a.read_text()


def test_mapping_lists_bundles():
    model = build_mblp(Dimension(2, (2,), ((1, 1),)))
    assert mblp.mapping(model)["bundles"] == [[0], [1]]


def test_witness_satisfies_rows_above_best_alpha():
    inst = tight_goods_instance(2)
    model = build_mblp(Dimension.of(inst))
    best, _ = oracles.best_alpha(inst)
    assert best == 1
    assert violated_rows(model, witness_assignment(model, inst, best + Fraction(1, 100))) == []


def test_witness_at_the_algorithmic_bound_is_cut_off():
    # I_2 has an exact MMS allocation, so below α = 1 some allocation leaves
    # every agent at or above α and its covering row cannot be satisfied
    inst = tight_goods_instance(2)
    model = build_mblp(Dimension.of(inst))
    bad = violated_rows(model, witness_assignment(model, inst, Fraction(4, 5) + Fraction(1, 100)))
    assert bad and all(name.startswith("someone_") for name in bad)


def test_check_alpha_witness_examples():
    inst = tight_goods_instance(2)
    dim = Dimension.of(inst)
    assert check_alpha_witness(dim, inst.valuations, 1)
    assert check_alpha_witness(Dimension(3, (5,), ((0, 5),)), [[3, 2, 2, 1, 1]] * 3, 1)
    rnd = random_instance(11, 2, (4,), "loose", (1, 6))
    best, _ = oracles.best_alpha(rnd)
    assert not check_alpha_witness(Dimension.of(rnd), rnd.valuations, best - Fraction(1, 10))


def test_witness_needs_goods():
    model = build_mblp(Dimension(2, (2,), ((1, 1),)))
    with pytest.raises(InstanceError):
        witness_assignment(model, Instance.single([[-1, -1]] * 2, 1, 1), 1)


def test_solver_reads_the_file(tmp_path):
    highspy = pytest.importorskip("highspy")
    path = tmp_path / "m.lp"
    emit_lp(build_mblp(Dimension(2, (2,), ((1, 1),))), path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    lp = h.getLp()
    assert (lp.num_col_, lp.num_row_) == (17, 22)
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
