"""Bag filling with valid reductions for single-category ordered goods.

Guarantee: every agent gets at least 2n/(3n-1) of its MMS.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .core import (
    Allocation,
    Instance,
    InstanceError,
    InvariantError,
    Kind,
    Reduction,
    SolveLog,
    as_fraction,
    is_ordered,
    require_valid,
    restrict,
)


@dataclass
class BagState:
    """Bags of one round of the outer loop.

    ``seq`` lists this level's items by position (g_1 first) and ``n`` is the
    agent count at this level; bags[k-1] is B_k.
    """
    t: int
    bags: list[list[int]]
    remaining_agents: list[int]
    seq: tuple[int, ...]
    n: int
    q_minus: int
    q_plus: int
    valuations: Sequence[Sequence[Fraction]]
    mu_hat: dict[int, Fraction] = field(default_factory=dict)
    bag_sizes: tuple[int, ...] = ()

    def value(self, agent: int, items: Iterable[int]) -> Fraction:
        row = self.valuations[agent]
        return sum((row[g] for g in items), Fraction(0))


def default_alpha(n: int) -> Fraction:
    return Fraction(2 * n, 3 * n - 1)


def alpha_band(n: int) -> tuple[Fraction, Fraction]:
    return Fraction(2, 3), Fraction(2) / (3 - Fraction(1, max(n, 1)))


def single_category(inst: Instance, kind: Kind):
    require_valid(inst)
    if len(inst.categories) != 1:
        raise InstanceError("expected a single-category instance")
    if inst.kind is not kind:
        raise InstanceError(f"expected kind {kind.value}, got {inst.kind.value}")
    if not is_ordered(inst):
        raise InstanceError("instance must be ordered (apply to_ordered first)")
    return inst.categories[0]


def goods_bag_sizes(m: int, n: int, qm: int, qp: int) -> list[int]:
    """b_1..b_n, filled from b_n down, ascending.

    >>> goods_bag_sizes(5, 2, 1, 4)
    [1, 4]
    """
    sizes = [0] * (n + 1)
    later = 0
    for k in range(n, 0, -1):
        sizes[k] = min(qp, m - later - (k - 1) * max(qm, 1))
        later += sizes[k]
    return sizes[1:]


def _goods_bags(seq: Sequence[int], n: int, qm: int, qp: int):
    m = len(seq)
    if m <= n:
        raise InstanceError("bag initialisation needs |M| > |N|")
    sizes = goods_bag_sizes(m, n, qm, qp)
    bags = [None] * n
    start = n
    for k in range(n, 0, -1):
        extra = sizes[k - 1] - 1
        bags[k - 1] = [seq[k - 1]] + list(seq[start:start + extra])
        start += extra
    if start != m:
        raise InvariantError("bag sizes do not cover the items")
    return sizes, bags


def _suffix_mu_hat(state: BagState, agents) -> dict[int, Fraction]:
    n = len(state.bags)
    out = {}
    for i in agents:
        acc = Fraction(0)
        best = None
        for r in range(n, 0, -1):
            acc += state.value(i, state.bags[r - 1])
            avg = acc / (n - r + 1)
            best = avg if best is None or avg < best else best
        out[i] = best
    return out


def init_bags_goods(inst: Instance) -> BagState:
    """Initial bags B_1..B_n for an ordered single-category goods instance.

    >>> from mmsquota.generators import tight_goods_instance
    >>> init_bags_goods(tight_goods_instance(2)).bags
    [[0, 4, 5], [1, 2, 3]]
    """
    cat = single_category(inst, Kind.GOODS)
    seq = tuple(cat.items)
    n = inst.n_agents
    sizes, bags = _goods_bags(seq, n, cat.q_minus, cat.q_plus)
    return BagState(n, bags, list(range(n)), seq, n, cat.q_minus, cat.q_plus, inst.valuations, {}, tuple(sizes))


def mu_hat_goods(inst: Instance, bags: BagState) -> dict[int, Fraction]:
    """μ̂_i: the smallest average value of a suffix B_r ∪ … ∪ B_n."""
    return _suffix_mu_hat(bags, bags.remaining_agents)


def _reduction_bundle(seq: Sequence[int], n: int, qm: int, qp: int) -> list[int]:
    m = len(seq)
    tail = max(qm, m - qp * (n - 1)) - 2
    bundle = [seq[n - 1], seq[n]]
    if tail > 0:
        if m - tail <= n:
            raise InvariantError("reduction tail overlaps the head")
        bundle += list(seq[m - tail:])
    return bundle


def valid_reduction_goods(inst: Instance, agent: int, alpha=None) -> Reduction:
    """Give ``agent`` the items g_n, g_{n+1} plus the forced tail.

    When ``alpha`` is given, the precondition v({g_n, g_{n+1}}) ≥ α·μ̂ is
    checked first.
    """
    state = init_bags_goods(inst)
    n, seq = state.n, state.seq
    if alpha is not None:
        mu = mu_hat_goods(inst, state)[agent]
        if state.value(agent, seq[n - 1:n + 1]) < as_fraction(alpha) * mu:
            raise InstanceError("reduction precondition fails for this agent")
    bundle = _reduction_bundle(seq, n, state.q_minus, state.q_plus)
    agents = tuple(i for i in range(n) if i != agent)
    gone = set(bundle)
    reduced, item_ids = restrict(inst, agents, (g for g in seq if g not in gone))
    return Reduction(tuple(bundle), reduced, agents, item_ids)


def check_invariants_goods(state: BagState, assigned: Iterable[Iterable[int]], alpha) -> str | None:
    """Return the first failing condition label among C1..C6, or None."""
    alpha = as_fraction(alpha)
    t, n, bags = state.t, state.n, state.bags
    pos = {g: p for p, g in enumerate(state.seq)}
    pieces = [list(b) for b in bags] + [list(b) for b in assigned]
    flat = [g for b in pieces for g in b]
    if len(flat) != len(set(flat)):
        return "C1"
    if set(flat) != set(state.seq):
        return "C2"
    sizes = [len(b) for b in bags]
    if sizes and (sizes[0] < state.q_minus or sizes[-1] > state.q_plus):
        return "C3"
    if any(a > b for a, b in zip(sizes, sizes[1:])):
        return "C3"
    for k, b in enumerate(bags):
        if {g for g in b if pos[g] < n} != {state.seq[k]}:
            return "C4"
    rest = [[g for g in b if pos[g] >= n] for b in bags]
    for i in state.remaining_agents:
        row = state.valuations[i]
        prev_max = None
        for r in rest:
            if not r:
                continue
            lo, hi = min(row[g] for g in r), max(row[g] for g in r)
            if prev_max is not None and prev_max > lo:
                return "C5"
            prev_max = hi if prev_max is None else max(prev_max, hi)
    slack = (n - t) * (Fraction(3, 2) * alpha - 1)
    for i in state.remaining_agents:
        acc = Fraction(0)
        for r in range(t, 0, -1):
            acc += state.value(i, bags[r - 1])
            if acc < (t - r + 1 - slack) * state.mu_hat[i]:
                return "C6"
    return None


def _checked(state, assigned, alpha, check, log, check_fn):
    if not check:
        return
    label = check_fn(state, assigned, alpha)
    if log is not None:
        log.invariant_checks += 1
    if label is not None:
        raise InvariantError(f"condition {label} violated at t={state.t}")


def _fill_goods(state: BagState, alpha: Fraction, result: dict, check: bool, log: SolveLog | None):
    vals = state.valuations
    seq = state.seq
    pos = {g: p for p, g in enumerate(seq)}
    hi = {i: Fraction(3, 2) * alpha * state.mu_hat[i] for i in state.remaining_agents}
    level_assigned = []
    while state.t >= 1:
        t = state.t
        orig = state.bags
        new = [set(b) for b in orig[:t - 1]]
        B = set(orig[t - 1])
        R = state.remaining_agents
        vB = {i: state.value(i, B) for i in R}
        special = seq[t - 1]
        steps = 0
        for k in range(t - 2, -1, -1):
            target = set(orig[k]) - {seq[k]}
            out_pool = B - {special}      # items of B not yet moved this loop
            in_pool = new[k] - {seq[k]}   # items of bag k not yet moved
            while any(vB[i] >= hi[i] for i in R) and B - {special} != target:
                if not out_pool:
                    raise InvariantError("no unmoved item left in B")
                g = max(out_pool, key=pos.__getitem__)
                out_pool.discard(g)
                B.discard(g)
                new[k].add(g)
                for i in R:
                    vB[i] -= vals[i][g]
                op = "move"
                if len(B) + 1 <= len(orig[k]):
                    h = min(in_pool, key=pos.__getitem__)
                    in_pool.discard(h)
                    new[k].discard(h)
                    B.add(h)
                    for i in R:
                        vB[i] += vals[i][h]
                    op = "swap"
                steps += 1
                if log is not None and log.keep_events:
                    log.events.append({"t": t, "k": k + 1, "op": op, "size": len(B),
                                       "values": dict(vB), "union": frozenset(B | new[k])})
        winner = next((i for i in R if vB[i] >= alpha * state.mu_hat[i]), None)
        if winner is None:
            raise InvariantError(f"no remaining agent accepts the bag in round t={t}")
        bundle = sorted(B, key=pos.__getitem__)
        result[winner] = bundle
        level_assigned.append(bundle)
        if log is not None:
            log.rounds += 1
            log.mu_hat[winner] = state.mu_hat[winner]
            log.stats.setdefault("steps_per_round", []).append(steps)
        state.bags = [sorted(b, key=pos.__getitem__) for b in new]
        state.remaining_agents = [i for i in R if i != winner]
        state.t = t - 1
        _checked(state, level_assigned, alpha, check, log, check_invariants_goods)


def approx_goods(inst: Instance, alpha=None, check_invariants: bool = False,
                 log: SolveLog | None = None) -> Allocation:
    """α-MMS allocation for an ordered single-category goods instance.

    α defaults to 2n/(3n-1) and must lie in [2/3, 2/(3 - 1/n)].

    >>> from mmsquota.generators import tight_goods_instance
    >>> approx_goods(tight_goods_instance(2)).bundles
    ((1, 2, 5), (0, 3, 4))
    """
    cat = single_category(inst, Kind.GOODS)
    n = inst.n_agents
    alpha = default_alpha(n) if alpha is None else as_fraction(alpha)
    lo, hi = alpha_band(n)
    if not lo <= alpha <= hi:
        raise InstanceError(f"alpha {alpha} outside [{lo}, {hi}]")
    vals = inst.valuations
    qm, qp = cat.q_minus, cat.q_plus
    agents = list(range(n))
    seq = tuple(cat.items)
    result: dict[int, list[int]] = {}
    depth = 0
    while True:
        nn, mm = len(agents), len(seq)
        if mm <= nn:
            for idx, i in enumerate(agents):
                result[i] = [seq[idx]] if idx < mm else []
            break
        depth += 1
        sizes, bags = _goods_bags(seq, nn, qm, qp)
        state = BagState(nn, bags, list(agents), seq, nn, qm, qp, vals, {}, tuple(sizes))
        state.mu_hat = _suffix_mu_hat(state, agents)
        _checked(state, [], alpha, check_invariants, log, check_invariants_goods)
        star = next((i for i in agents
                     if vals[i][seq[nn - 1]] + vals[i][seq[nn]] >= alpha * state.mu_hat[i]), None)
        if star is None:
            _fill_goods(state, alpha, result, check_invariants, log)
            break
        bundle = _reduction_bundle(seq, nn, qm, qp)
        result[star] = bundle
        if log is not None:
            log.reductions += 1
            log.mu_hat[star] = state.mu_hat[star]
        gone = set(bundle)
        seq = tuple(g for g in seq if g not in gone)
        agents.remove(star)
    if log is not None:
        log.stats["depth"] = depth
    return Allocation([result[i] for i in range(n)])
