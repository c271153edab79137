"""Bag filling for single-category ordered chores ((3n-1)/(2n) guarantee).

There is no reduction step here; bags start large and shrink in index.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .core import Allocation, Instance, InstanceError, InvariantError, Kind, SolveLog, as_fraction
from .single_goods import BagState, _checked, single_category


def default_alpha(n: int) -> Fraction:
    return Fraction(3 * n - 1, 2 * n)


def alpha_band(n: int) -> tuple[Fraction, Fraction]:
    return (3 - Fraction(1, max(n, 1))) / 2, Fraction(3, 2)


def chores_bag_sizes(m: int, n: int, qm: int, qp: int) -> list[int]:
    """b_1..b_n, filled from b_n down, descending.

    >>> chores_bag_sizes(4, 2, 1, 3)
    [3, 1]
    """
    sizes = [0] * (n + 1)
    later = 0
    for k in range(n, 0, -1):
        sizes[k] = max(1, qm, m - later - qp * (k - 1))
        later += sizes[k]
    return sizes[1:]


def init_bags_chores(inst: Instance) -> BagState:
    """Bag B_k holds the special chore g_{m-n+k} and a block from the front."""
    cat = single_category(inst, Kind.CHORES)
    seq = tuple(cat.items)
    n, m = inst.n_agents, len(seq)
    if m <= n:
        raise InstanceError("bag initialisation needs |M| > |N|")
    sizes = chores_bag_sizes(m, n, cat.q_minus, cat.q_plus)
    bags = [None] * n
    start = 0
    for k in range(n, 0, -1):
        extra = sizes[k - 1] - 1
        bags[k - 1] = list(seq[start:start + extra]) + [seq[m - n + k - 1]]
        start += extra
    if start != m - n:
        raise InvariantError("bag sizes do not cover the items")
    return BagState(n, bags, list(range(n)), seq, n, cat.q_minus, cat.q_plus, inst.valuations, {}, tuple(sizes))


def mu_hat_chores(inst: Instance, bags: BagState) -> dict[int, Fraction]:
    """min of 2·v_i(g_{m-n}) and the suffix averages of the bags."""
    seq, n = bags.seq, bags.n
    pivot = seq[len(seq) - n - 1]
    out = {}
    for i in bags.remaining_agents:
        best = 2 * bags.valuations[i][pivot]
        acc = Fraction(0)
        for r in range(n, 0, -1):
            acc += bags.value(i, bags.bags[r - 1])
            best = min(best, acc / (n - r + 1))
        out[i] = best
    return out


def chores_pigeonhole_bundle(inst: Instance, category: int, d: int) -> tuple[int, ...]:
    """The d+1 items g_{|C|-j}, d(n-1) ≤ j ≤ dn, of an ordered category.

    Every agent values this bundle at least at its MMS.

    >>> inst = Instance.single([[-1, -1, -2, -2]] * 2, 0, 4)
    >>> chores_pigeonhole_bundle(inst, 0, 1)
    (1, 2)
    """
    items = inst.categories[category].items
    n, size = inst.n_agents, len(items)
    if d < 0 or size < d * n + 1:
        raise InstanceError("need |C*| ≥ d·n + 1")
    return tuple(sorted(items[size - j - 1] for j in range(d * (n - 1), d * n + 1)))


def check_invariants_chores(state: BagState, assigned: Iterable[Iterable[int]], alpha) -> str | None:
    """First failing label among the chores conditions C1..C6, or None."""
    alpha = as_fraction(alpha)
    t, n, bags, seq = state.t, state.n, state.bags, state.seq
    m = len(seq)
    pos = {g: p for p, g in enumerate(seq)}
    flat = [g for b in list(bags) + [list(b) for b in assigned] for g in b]
    if len(flat) != len(set(flat)):
        return "C1"
    if set(flat) != set(seq):
        return "C2"
    sizes = [len(b) for b in bags]
    if sizes and (sizes[0] > state.q_plus or sizes[-1] < state.q_minus):
        return "C3"
    if any(a < b for a, b in zip(sizes, sizes[1:])):
        return "C3"
    for k, b in enumerate(bags):
        if {g for g in b if pos[g] >= m - n} != {seq[m - n + k]}:
            return "C4"
    rest = [[g for g in b if pos[g] < m - n] for b in bags]
    for i in state.remaining_agents:
        row = state.valuations[i]
        prev_max = None
        for r in rest:
            if not r:
                continue
            if prev_max is not None and prev_max > min(row[g] for g in r):
                return "C5"
            hi = max(row[g] for g in r)
            prev_max = hi if prev_max is None else max(prev_max, hi)
    slack = (n - t) * (Fraction(3, 2) - alpha)
    for i in state.remaining_agents:
        acc = Fraction(0)
        for r in range(t, 0, -1):
            acc += state.value(i, bags[r - 1])
            if acc < (t - r + 1 + slack) * state.mu_hat[i]:
                return "C6"
    return None


def approx_chores(inst: Instance, alpha=None, check_invariants: bool = False,
                  log: SolveLog | None = None) -> Allocation:
    """α-MMS allocation for an ordered single-category chores instance.

    >>> from mmsquota.generators import tight_chores_instance
    >>> approx_chores(tight_chores_instance(2)).bundles
    ((1, 3), (0, 2))
    """
    cat = single_category(inst, Kind.CHORES)
    n = inst.n_agents
    alpha = default_alpha(n) if alpha is None else as_fraction(alpha)
    lo, hi = alpha_band(n)
    if not lo <= alpha <= hi:
        raise InstanceError(f"alpha {alpha} outside [{lo}, {hi}]")
    seq = tuple(cat.items)
    m = len(seq)
    if m <= n:
        return Allocation([[seq[i]] if i < m else [] for i in range(n)])
    state = init_bags_chores(inst)
    state.mu_hat = mu_hat_chores(inst, state)
    _checked(state, [], alpha, check_invariants, log, check_invariants_chores)
    vals = inst.valuations
    pos = {g: p for p, g in enumerate(seq)}
    special = lambda k: seq[m - n + k - 1]  # noqa: E731  (1-based bag index)
    lower = {i: (alpha - Fraction(1, 2)) * state.mu_hat[i] for i in range(n)}
    result: dict[int, list[int]] = {}
    assigned = []
    while state.t >= 1:
        t = state.t
        orig = state.bags
        new = [set(b) for b in orig[:t - 1]]
        B = set(orig[t - 1])
        R = state.remaining_agents
        vB = {i: state.value(i, B) for i in R}
        steps = 0
        for k in range(t - 1, 0, -1):
            target = set(orig[k - 1]) - {special(k)}
            in_pool = new[k - 1] - {special(k)}
            out_pool = B - {special(t)}
            while any(vB[i] >= lower[i] for i in R) and B - {special(t)} != target:
                if not in_pool:
                    raise InvariantError("no unmoved item left in bag")
                g = max(in_pool, key=pos.__getitem__)
                in_pool.discard(g)
                new[k - 1].discard(g)
                B.add(g)
                for i in R:
                    vB[i] += vals[i][g]
                op = "move"
                if len(B) - 1 >= len(orig[k - 1]):
                    h = min(out_pool, key=pos.__getitem__)
                    out_pool.discard(h)
                    B.discard(h)
                    new[k - 1].add(h)
                    for i in R:
                        vB[i] -= vals[i][h]
                    op = "swap"
                steps += 1
                if log is not None and log.keep_events:
                    log.events.append({"t": t, "k": k, "op": op, "size": len(B),
                                       "values": dict(vB), "union": frozenset(B | new[k - 1])})
        winner = next((i for i in R if vB[i] >= alpha * state.mu_hat[i]), None)
        if winner is None:
            raise InvariantError(f"no remaining agent accepts the bag in round t={t}")
        bundle = sorted(B, key=pos.__getitem__)
        result[winner] = bundle
        assigned.append(bundle)
        if log is not None:
            log.rounds += 1
            log.mu_hat[winner] = state.mu_hat[winner]
            log.stats.setdefault("steps_per_round", []).append(steps)
        state.bags = [sorted(b, key=pos.__getitem__) for b in new]
        state.remaining_agents = [i for i in R if i != winner]
        state.t = t - 1
        _checked(state, assigned, alpha, check_invariants, log, check_invariants_chores)
    return Allocation([result[i] for i in range(n)])
