from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mmsquota import oracles
from mmsquota.core import Instance, InstanceError, InvariantError, SolveLog, bundle_value, is_feasible_allocation, verify_alpha_mms
from mmsquota.generators import sweep_instance
from mmsquota.multi_category import (
    approx_categorized_chores,
    approx_categorized_goods,
    default_alpha_chores,
    default_alpha_goods,
    valid_reduction_bundle,
)


def test_reduction_bundle_top_item_only_when_tails_empty():
    inst = Instance.build([[1] * 4] * 2, [((0, 1), 0, 2), ((2, 3), 0, 2)])
    assert valid_reduction_bundle(inst, 0, 0, 0).bundle == (0,)


def test_reduction_bundle_with_tails():
    inst = Instance.build([[1] * 6] * 3, [((0, 1, 2), 1, 1), ((3, 4, 5), 1, 1)])
    red = valid_reduction_bundle(inst, 0, 0, 0)
    # one item per category is forced, so C* contributes only its top item
    assert red.bundle == (0, 5)
    assert red.agent_ids == (1, 2)
    assert [len(c.items) for c in red.reduced.categories] == [2, 2]


def test_reduction_bundle_precondition():
    inst = Instance.build([[1] * 4] * 2, [((0, 1), 0, 2), ((2, 3), 0, 2)])
    with pytest.raises(InstanceError):
        valid_reduction_bundle(inst, 0, 0, 1)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**7))
def test_reduction_keeps_survivor_mms(seed):
    inst = sweep_instance(seed, "goods", categories=(1, 3), agents=(2, 3))
    before = oracles.mms_values(inst)
    for j, c in enumerate(inst.categories):
        if not c.items:
            continue
        red = valid_reduction_bundle(inst, 0, j, 0)
        after = oracles.mms_values(red.reduced)
        assert all(after[k] >= before[a] for k, a in enumerate(red.agent_ids))


def test_uniform_goods_split_evenly():
    inst = Instance.single([[1] * 4] * 2, 0, 4)
    alloc = approx_categorized_goods(inst)
    assert [bundle_value(inst, i, alloc[i]) for i in range(2)] == [2, 2]


def test_two_categories_hand_example():
    inst = Instance.build([[3, 1, 2, 2]] * 2, [((0, 1), 1, 1), ((2, 3), 1, 1)])
    mu = oracles.mms_values(inst)
    assert mu == [3, 3]
    alloc = approx_categorized_goods(inst)
    assert verify_alpha_mms(inst, alloc, Fraction(2, 3), mu).ok


def test_uniform_chores():
    inst = Instance.single([[-1] * 4] * 2, 0, 4)
    alloc = approx_categorized_chores(inst)
    assert [bundle_value(inst, i, alloc[i]) for i in range(2)] == [-2, -2]


def test_single_agent_chores():
    inst = Instance.build([[-1, -2, -3]], [((0,), 0, 1), ((1, 2), 1, 2)])
    assert approx_categorized_chores(inst).bundles == ((0, 1, 2),)


@pytest.mark.parametrize("kind,solve,alpha", [
    ("goods", approx_categorized_goods, Fraction(3, 5)),
    ("chores", approx_categorized_chores, Fraction(5, 3)),
])
def test_three_agents_fixed_alpha(kind, solve, alpha):
    for seed in range(60):
        inst = sweep_instance(seed, kind, agents=(3,), max_items=9, categories=(2, 3))
        alloc = solve(inst, alpha, check_invariants=True)
        assert verify_alpha_mms(inst, alloc, alpha, oracles.mms_values(inst)).ok


@settings(max_examples=250, deadline=None)
@given(st.integers(0, 10**7), st.sampled_from(["goods", "chores"]))
def test_guarantee_property(seed, kind):
    inst = sweep_instance(seed, kind, categories=(1, 3))
    n = inst.n_agents
    if kind == "goods":
        alpha, solve = default_alpha_goods(n), approx_categorized_goods
    else:
        alpha, solve = default_alpha_chores(n), approx_categorized_chores
    log = SolveLog()
    alloc = solve(inst, alpha, check_invariants=True, log=log)
    assert is_feasible_allocation(inst, alloc)
    assert verify_alpha_mms(inst, alloc, alpha, oracles.mms_values(inst)).ok
    assert log.reductions <= n - 1


def test_alpha_band():
    inst = Instance.single([[1] * 4] * 2, 0, 4)
    with pytest.raises(InstanceError):
        approx_categorized_goods(inst, Fraction(9, 10))
    with pytest.raises(InstanceError):
        approx_categorized_chores(Instance.single([[-1] * 4] * 2, 0, 4), Fraction(1))


def test_kind_mismatch_rejected():
    with pytest.raises(InstanceError, match="kind"):
        approx_categorized_chores(Instance.single([[1] * 4] * 2, 0, 4))


def test_invariant_hook_surfaces(monkeypatch):
    import mmsquota.multi_category as mc
    monkeypatch.setattr(mc, "check_invariants_multi", lambda *a, **k: "C4")
    with pytest.raises(InvariantError, match="C4"):
        mc.approx_categorized_chores(Instance.single([[-1] * 4] * 2, 0, 4), check_invariants=True)
