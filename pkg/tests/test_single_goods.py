from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mmsquota import oracles
from mmsquota.core import Allocation, Instance, InstanceError, InvariantError, SolveLog, bundle_value, is_feasible_allocation, verify_alpha_mms
from mmsquota.generators import sweep_instance, tight_goods_instance
from mmsquota.single_goods import (
    approx_goods,
    check_invariants_goods,
    default_alpha,
    init_bags_goods,
    mu_hat_goods,
    valid_reduction_goods,
)


def flat(n, m, qm, qp):
    return Instance.single([[1] * m] * n, qm, qp)


@pytest.mark.parametrize("n,m,qm,qp,bags", [
    (2, 6, 3, 3, [[0, 4, 5], [1, 2, 3]]),
    (2, 5, 1, 4, [[0], [1, 2, 3, 4]]),
])
def test_init_bags_hand_examples(n, m, qm, qp, bags):
    assert init_bags_goods(flat(n, m, qm, qp)).bags == bags


def test_init_bags_rejects_trivial_case():
    with pytest.raises(InstanceError):
        init_bags_goods(flat(3, 3, 1, 1))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(2, 12), st.data())
def test_init_bags_partition_and_sizes(n, m, data):
    if m <= n:
        m = n + 1
    qm = data.draw(st.integers(0, m // n))
    qp = data.draw(st.integers(-(-m // n), m))
    state = init_bags_goods(flat(n, m, qm, qp))
    items = [g for b in state.bags for g in b]
    assert sorted(items) == list(range(m))
    sizes = [len(b) for b in state.bags]
    assert sizes == sorted(sizes) and qm <= sizes[0] and sizes[-1] <= qp
    assert all(b[0] == k for k, b in enumerate(state.bags))


def test_mu_hat_on_tight_two_agents():
    inst = tight_goods_instance(2)
    state = init_bags_goods(inst)
    assert mu_hat_goods(inst, state) == {0: 1, 1: 1}


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_mu_hat_bounds_oracle(seed):
    inst = sweep_instance(seed, "goods")
    if inst.m <= inst.n_agents:
        return
    mu_hat = mu_hat_goods(inst, init_bags_goods(inst))
    mu = oracles.mms_values(inst)
    assert all(mu_hat[i] >= mu[i] for i in range(inst.n_agents))


def test_reduction_bundle_examples():
    assert valid_reduction_goods(flat(2, 6, 3, 3), 0).bundle == (1, 2, 5)
    assert valid_reduction_goods(flat(3, 7, 0, 7), 1).bundle == (2, 3)
    red = valid_reduction_goods(flat(2, 6, 3, 3), 0)
    assert red.agent_ids == (1,) and red.item_ids == (0, 3, 4)


def test_reduction_precondition_enforced():
    inst = Instance.single([[6, 1, 1, 1, 1, 1, 1]] * 2, 0, 7)
    with pytest.raises(InstanceError, match="precondition"):
        valid_reduction_goods(inst, 0, Fraction(4, 5))


def test_tight_two_agents_hits_the_bound():
    inst = tight_goods_instance(2)
    alloc = approx_goods(inst, Fraction(4, 5))
    check = verify_alpha_mms(inst, alloc, Fraction(4, 5), [1, 1])
    assert check.ok and min(check.margins) == 0
    assert not verify_alpha_mms(inst, alloc, Fraction(4, 5) + Fraction(1, 100), [1, 1]).ok


def test_single_agent_takes_everything():
    inst = Instance.single([[3, 2, 1]], 1, 3)
    alloc = approx_goods(inst)
    assert alloc.bundles == ((0, 1, 2),)


def test_trivial_case_one_item_each():
    inst = Instance.single([[3, 2, 1]] * 3, 1, 1)
    assert approx_goods(inst).bundles == ((0,), (1,), (2,))


def test_alpha_band_is_enforced():
    with pytest.raises(InstanceError):
        approx_goods(tight_goods_instance(2), Fraction(1, 2))
    with pytest.raises(InstanceError):
        approx_goods(tight_goods_instance(2), Fraction(9, 10))


def test_unordered_input_rejected():
    with pytest.raises(InstanceError, match="ordered"):
        approx_goods(Instance.single([[1, 2, 3]] * 2, 0, 3))


@pytest.mark.parametrize("seed", range(40))
def test_three_agents_nine_items(seed):
    import random
    rng = random.Random(seed)
    rows = [sorted((rng.randint(0, 4) for _ in range(9)), reverse=True) for _ in range(3)]
    inst = Instance.single(rows, 2, 4)
    alloc = approx_goods(inst, check_invariants=True)
    assert verify_alpha_mms(inst, alloc, Fraction(3, 4), oracles.mms_values(inst)).ok


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**7))
def test_guarantee_property(seed):
    inst = sweep_instance(seed, "goods")
    alpha = default_alpha(inst.n_agents)
    alloc = approx_goods(inst, alpha, check_invariants=True)
    assert is_feasible_allocation(inst, alloc)
    assert verify_alpha_mms(inst, alloc, alpha, oracles.mms_values(inst)).ok


def _events(seed):
    inst = sweep_instance(seed, "goods", agents=(2, 3, 4), max_items=12, magnitude=9)
    log = SolveLog(keep_events=True)
    approx_goods(inst, log=log)
    return inst, log


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**7))
def test_bag_shrinks_monotonically(seed):
    inst, log = _events(seed)
    prev = {}
    for ev in log.events:
        key = ev["t"]
        if key in prev:
            size, values = prev[key]
            assert ev["size"] <= size
            assert all(ev["values"][i] <= values[i] for i in ev["values"])
        prev[key] = ev["size"], ev["values"]
    if log.stats.get("steps_per_round"):
        assert max(log.stats["steps_per_round"]) <= inst.m
    assert log.stats["depth"] <= inst.n_agents


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**7))
def test_moves_keep_the_union(seed):
    _, log = _events(seed)
    unions = {}
    for ev in log.events:
        unions.setdefault((ev["t"], ev["k"]), set()).add(ev["union"])
    assert all(len(u) == 1 for u in unions.values())


def test_tight_three_agents_invariants_every_round():
    log = SolveLog()
    approx_goods(tight_goods_instance(3), check_invariants=True, log=log)
    assert log.invariant_checks >= 1


def test_invariant_checker_flags_c4():
    inst = Instance.single([[4, 3, 3, 2, 2, 1, 1]] * 3, 0, 7)
    state = init_bags_goods(inst)
    state.mu_hat = mu_hat_goods(inst, state)
    alpha = default_alpha(3)
    assert check_invariants_goods(state, [], alpha) is None
    # put g_1 into the bag of g_2
    state.bags[0].remove(0)
    state.bags[1].append(0)
    assert check_invariants_goods(state, [], alpha) == "C4"


def test_invariant_failure_surfaces_as_error(monkeypatch):
    import mmsquota.single_goods as sg
    monkeypatch.setattr(sg, "check_invariants_goods", lambda *a: "C6")
    with pytest.raises(InvariantError, match="C6"):
        sg.approx_goods(Instance.single([[1, 1, 1]] * 2, 0, 3), check_invariants=True)


def test_allocation_values_exact():
    inst = tight_goods_instance(2)
    alloc = approx_goods(inst)
    assert sorted(bundle_value(inst, i, alloc[i]) for i in range(2)) == [Fraction(4, 5), Fraction(6, 5)]
    assert isinstance(alloc, Allocation)
