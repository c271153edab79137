"""Exact MMS oracles.

Brute force over assignments, best achievable α, the identical-agent state
DP with its trimmed (FPTAS) variant, the almost-identical wrapper, and the
exact algorithm for bivalued single-category instances.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

from .core import (
    Allocation,
    GuardError,
    Instance,
    InstanceError,
    Kind,
    SolveLog,
    as_fraction,
    is_identical,
    lift_allocation,
    require_valid,
    to_ordered,
)

INF = math.inf
BRUTE_GUARD = 10**7
DP_STATE_GUARD = 2 * 10**6


class MmsResult(NamedTuple):
    value: Fraction
    partition: Allocation


def _scale(rows: Sequence[Sequence[Fraction]]) -> tuple[int, list[list[int]]]:
    den = 1
    for row in rows:
        for v in row:
            den = math.lcm(den, v.denominator)
    return den, [[int(v * den) for v in row] for row in rows]


def _bundles_from(assign: Sequence[int], n: int) -> Allocation:
    bundles = [[] for _ in range(n)]
    for g, k in enumerate(assign):
        bundles[k].append(g)
    return Allocation(bundles)


class _Layout:
    """Per-item category index plus how many items of each category follow."""

    def __init__(self, inst: Instance):
        self.n = inst.n_agents
        self.m = inst.m
        self.ncat = len(inst.categories)
        cat = inst.category_of()
        self.cat = [cat[g] for g in range(self.m)]
        self.qm = [c.q_minus for c in inst.categories]
        self.qp = [c.q_plus for c in inst.categories]
        self.after = [0] * self.m
        left = [len(c) for c in inst.categories]
        for g in range(self.m):
            left[self.cat[g]] -= 1
            self.after[g] = left[self.cat[g]]


def _check_guard(inst: Instance, guard: int) -> None:
    if inst.n_agents ** inst.m > guard:
        raise GuardError(
            f"n^m = {inst.n_agents}^{inst.m} exceeds the brute-force guard {guard}; "
            "use the DP oracle (identical or bivalued agents) or a smaller instance"
        )


def mms_all(inst: Instance, agents: Sequence[int] | None = None, guard: int = BRUTE_GUARD) -> list[MmsResult]:
    """MMS value and partition for several agents from one enumeration.

    Assignment vectors are explored in lexicographic order restricted to
    canonical labellings (first use of bundle k comes after bundle k-1),
    which is enough because relabelling bundles does not change the min.
    The first optimum found is the lexicographically smallest assignment.
    """
    require_valid(inst)
    _check_guard(inst, guard)
    agents = list(range(inst.n_agents)) if agents is None else list(agents)
    lay = _Layout(inst)
    n, m = lay.n, lay.m
    den, rows = _scale([inst.valuations[i] for i in agents])
    A = len(agents)
    sums = [[0] * n for _ in range(A)]
    counts = [[0] * lay.ncat for _ in range(n)]
    deficit = [q * n for q in lay.qm]
    assign = [0] * m
    best = [None] * A
    best_assign = [None] * A

    def rec(p: int, used: int) -> None:
        if p == m:
            for a in range(A):
                v = min(sums[a])
                if best[a] is None or v > best[a]:
                    best[a] = v
                    best_assign[a] = tuple(assign)
            return
        j = lay.cat[p]
        cap, floor, after = lay.qp[j], lay.qm[j], lay.after[p]
        for k in range(min(used + 1, n)):
            c = counts[k][j]
            if c >= cap:
                continue
            d = deficit[j] - (1 if c < floor else 0)
            if d > after:
                continue
            counts[k][j] = c + 1
            deficit[j] = d
            assign[p] = k
            for a in range(A):
                sums[a][k] += rows[a][p]
            rec(p + 1, used if k < used else k + 1)
            for a in range(A):
                sums[a][k] -= rows[a][p]
            deficit[j] = d + (1 if c < floor else 0)
            counts[k][j] = c

    rec(0, 0)
    if best[0] is None and A:
        raise InstanceError("no feasible partition")
    return [MmsResult(Fraction(best[a], den), _bundles_from(best_assign[a], n)) for a in range(A)]


def mms_bruteforce(inst: Instance, agent: int, guard: int = BRUTE_GUARD) -> MmsResult:
    """Exact μ_i with a witnessing partition.

    >>> mms_bruteforce(Instance.single([[3, 2, 1, 1], [0, 0, 0, 0]], 2, 2), 0)
    MmsResult(value=Fraction(3, 1), partition=Allocation(bundles=((0, 2), (1, 3))))
    """
    return mms_all(inst, [agent], guard)[0]


def mms_values(inst: Instance, guard: int = BRUTE_GUARD) -> list[Fraction]:
    return [r.value for r in mms_all(inst, guard=guard)]


def iter_feasible_assignments(inst: Instance, guard: int = BRUTE_GUARD) -> Iterator[tuple[int, ...]]:
    """Agent-indexed feasible assignment vectors, lexicographic order."""
    _check_guard(inst, guard)
    lay = _Layout(inst)
    n, m = lay.n, lay.m
    counts = [[0] * lay.ncat for _ in range(n)]
    deficit = [q * n for q in lay.qm]
    assign = [0] * m

    def rec(p):
        if p == m:
            yield tuple(assign)
            return
        j = lay.cat[p]
        for k in range(n):
            c = counts[k][j]
            if c >= lay.qp[j]:
                continue
            d = deficit[j] - (1 if c < lay.qm[j] else 0)
            if d > lay.after[p]:
                continue
            counts[k][j] = c + 1
            deficit[j] = d
            assign[p] = k
            yield from rec(p + 1)
            deficit[j] = d + (1 if c < lay.qm[j] else 0)
            counts[k][j] = c

    yield from rec(0)


def iter_feasible_allocations(inst: Instance, guard: int = BRUTE_GUARD) -> Iterator[Allocation]:
    for a in iter_feasible_assignments(inst, guard):
        yield _bundles_from(a, inst.n_agents)


def best_alpha(inst: Instance, mms: Sequence[Fraction] | None = None, guard: int = BRUTE_GUARD):
    """Best α any feasible allocation achieves, with a witness.

    Goods: maximise min_i v_i(A_i)/μ_i (agents with μ_i = 0 impose nothing;
    returns ``math.inf`` when nobody does). Chores: minimise the α needed for
    v_i(A_i) ≥ α·μ_i.
    """
    require_valid(inst)
    if inst.kind is Kind.MIXED:
        raise InstanceError("best_alpha supports goods or chores only")
    mu = list(mms) if mms is not None else mms_values(inst, guard)
    n = inst.n_agents
    vals = inst.valuations
    goods = inst.kind is Kind.GOODS
    best, witness = None, None
    for assign in iter_feasible_assignments(inst, guard):
        own = [Fraction(0)] * n
        for g, k in enumerate(assign):
            own[k] += vals[k][g]
        if goods:
            score = min((own[i] / mu[i] if mu[i] > 0 else INF for i in range(n)), default=INF)
            better = best is None or score > best
        else:
            need = 0
            for i in range(n):
                if mu[i] < 0:
                    r = own[i] / mu[i]
                elif own[i] == 0:
                    r = 0
                else:
                    r = INF
                need = max(need, r)
            score = need
            better = best is None or score < best
        if better:
            best, witness = score, assign
    if not isinstance(best, float):
        best = Fraction(best)
    return best, _bundles_from(witness, n)


# identical agents -----------------------------------------------------------

def _box(w: int, delta: Fraction, cache: dict) -> int:
    """Index k with Δ^k ≤ w < Δ^(k+1); -1 for w = 0."""
    if w in cache:
        return cache[w]
    if w == 0:
        k = -1
    else:
        k = int(math.log(w) / math.log(delta))
        while k > 0 and delta ** k > w:
            k -= 1
        while delta ** (k + 1) <= w:
            k += 1
    cache[w] = k
    return k


def _identical_dp(inst: Instance, delta: Fraction | None = None, guard: int = DP_STATE_GUARD):
    """Max-min (goods) or min-max cost (chores) over feasible partitions.

    Returns ``(objective as Fraction value, assignment, states_visited)``.
    A state is the sorted tuple of bundle records (magnitude sum, per-category
    counts); sorting is sound because the agents are interchangeable. With
    ``delta`` set, states whose records agree on counts and on the
    Δ-geometric box of each sum are merged, keeping the smallest state.
    """
    require_valid(inst)
    if not is_identical(inst):
        raise InstanceError("agents are not identical")
    if inst.kind is Kind.MIXED:
        raise InstanceError("identical-agent DP needs goods or chores")
    goods = inst.kind is Kind.GOODS
    den, (row,) = _scale([inst.valuations[0]])
    w = row if goods else [-x for x in row]
    lay = _Layout(inst)
    n, m, K = lay.n, lay.m, lay.ncat
    start = ((0, (0,) * K),) * n
    layers = []
    layer = {start: None}
    total = 1
    boxes: dict = {}
    for p in range(m):
        j = lay.cat[p]
        new = {}
        for state in layer:
            deficit = sum(max(0, lay.qm[j] - c[j]) for _, c in state)
            for i, (x, c) in enumerate(state):
                if i and state[i - 1] == (x, c):
                    continue
                if c[j] >= lay.qp[j]:
                    continue
                if deficit - (c[j] < lay.qm[j]) > lay.after[p]:
                    continue
                rec = (x + w[p], c[:j] + (c[j] + 1,) + c[j + 1:])
                key = tuple(sorted(state[:i] + (rec,) + state[i + 1:]))
                if key not in new:
                    new[key] = (state, i)
        if delta is not None:
            groups: dict = {}
            for key in new:
                tag = tuple((c, _box(x, delta, boxes)) for x, c in key)
                if tag not in groups or key < groups[tag]:
                    groups[tag] = key
            new = {key: new[key] for key in sorted(groups.values())}
        total += len(new)
        if len(new) > guard:
            raise GuardError(f"DP state space exceeded {guard} states")
        layers.append(new)
        layer = new
    if not layer:
        raise InstanceError("no feasible partition")
    if goods:
        best = max(s[0][0] for s in layer)
        final = min(s for s in layer if s[0][0] == best)
        obj = Fraction(best, den)
    else:
        best = min(s[-1][0] for s in layer)
        final = min(s for s in layer if s[-1][0] == best)
        obj = -Fraction(best, den)
    picks = []
    state = final
    for p in range(m - 1, -1, -1):
        state, i = layers[p][state]
        picks.append(i)
    # replay: keep (record, bundle id) sorted by record, as the states were
    slots = [(rec, b) for b, rec in enumerate(start)]
    assign = [0] * m
    for p, i in enumerate(reversed(picks)):
        (x, c), b = slots[i]
        j = lay.cat[p]
        assign[p] = b
        slots[i] = ((x + w[p], c[:j] + (c[j] + 1,) + c[j + 1:]), b)
        slots.sort(key=lambda s: s[0])
    return obj, tuple(assign), total


def mms_identical_dp(inst: Instance, guard: int = DP_STATE_GUARD) -> MmsResult:
    """Exact common MMS of identical agents via the state-space DP.

    >>> mms_identical_dp(Instance.single([[2, 2, 1, 1]] * 2, 2, 2)).value
    Fraction(3, 1)
    """
    value, assign, _ = _identical_dp(inst, None, guard)
    return MmsResult(value, _bundles_from(assign, inst.n_agents))


def fptas_identical(inst: Instance, eps, log: SolveLog | None = None, guard: int = DP_STATE_GUARD) -> Allocation:
    """(1-ε)-MMS allocation for identical goods ((1+ε) for chores).

    Trimming ratio Δ = 1 + ε/(2m), so the accumulated distortion Δ^m stays
    within e^(ε/2).
    """
    eps = as_fraction(eps)
    if not 0 < eps <= 1:
        raise InstanceError("eps must lie in (0, 1]")
    delta = 1 + eps / (2 * max(inst.m, 1))
    value, assign, states = _identical_dp(inst, delta, guard)
    if log is not None:
        log.stats["states"] = states
        log.stats["value"] = value
    return _bundles_from(assign, inst.n_agents)


def dp_state_count(inst: Instance, eps=None) -> int:
    """States the DP visits; trimmed when ``eps`` is given."""
    delta = None if eps is None else 1 + as_fraction(eps) / (2 * max(inst.m, 1))
    return _identical_dp(inst, delta)[2]


def deviating_agent(inst: Instance) -> int | None:
    """The one agent whose valuation differs from everyone else's, if any."""
    rows = inst.valuations
    n = inst.n_agents
    if is_identical(inst):
        return None
    if n == 2:
        return 1
    for i in range(n):
        others = [rows[k] for k in range(n) if k != i]
        if all(r == others[0] for r in others):
            return i
    raise InstanceError("more than one agent deviates from the common valuation")


def almost_identical(inst: Instance, eps, log: SolveLog | None = None) -> Allocation:
    """All agents but one share a valuation: solve the shared problem, then
    let the odd agent pick the bundle it likes best (by its own valuation)."""
    star = deviating_agent(inst)
    if star is None:
        return fptas_identical(inst, eps, log)
    common = inst.valuations[1 if star == 0 else 0]
    surrogate = Instance(inst.n_agents, inst.categories, [common] * inst.n_agents, inst.kind)
    alloc = fptas_identical(surrogate, eps, log)
    row = inst.valuations[star]
    vals = [sum((row[g] for g in b), Fraction(0)) for b in alloc.bundles]
    imax = max(range(len(vals)), key=lambda k: (vals[k], -k))
    bundles = list(alloc.bundles)
    bundles[star], bundles[imax] = bundles[imax], bundles[star]
    return Allocation(bundles)


# bivalued -------------------------------------------------------------------

class BivaluedProfile(NamedTuple):
    a: Fraction
    b: Fraction
    ell: tuple[int, ...]


def bivalued_profile(inst: Instance) -> BivaluedProfile:
    vals = sorted({v for row in inst.valuations for v in row})
    if len(vals) > 2:
        raise InstanceError("instance is not bivalued")
    if not vals:
        vals = [Fraction(0)]
    a, b = vals[-1], vals[0]
    ell = tuple(sum(1 for v in row if v == a) for row in inst.valuations)
    return BivaluedProfile(a, b, ell)


def _bivalued_split(n: int, ell: int, m: int, qm: int, qp: int, a: Fraction, b: Fraction):
    """Optimal (a-count, b-count) per bundle; first entry is the designated P*_1."""

    @lru_cache(maxsize=None)
    def f(k, x, y):
        if k == 0:
            return (INF, None) if x == 0 and y == 0 else (None, None)
        best, arg = None, None
        for xa in range(min(x, qp), -1, -1):
            for yb in range(max(0, qm - xa), min(y, qp - xa) + 1):
                rest, _ = f(k - 1, x - xa, y - yb)
                if rest is None:
                    continue
                v = min(a * xa + b * yb, rest)
                if best is None or v > best:
                    best, arg = v, (xa, yb)
        return best, arg

    value, _ = f(n, ell, m - ell)
    if value is None:
        raise InstanceError("no feasible partition")
    parts, x, y = [], ell, m - ell
    for k in range(n, 0, -1):
        xa, yb = f(k, x, y)[1]
        parts.append((xa, yb))
        x, y = x - xa, y - yb
    f.cache_clear()
    pick = min if b >= 0 else max
    first = pick(range(n), key=lambda k: (sum(parts[k]), k) if b >= 0 else (sum(parts[k]), -k))
    parts.insert(0, parts.pop(first))
    return (value if value != INF else Fraction(0)), parts


def _single_category(inst: Instance):
    if len(inst.categories) != 1:
        raise InstanceError("expected a single-category instance")
    return inst.categories[0]


def bivalued_mms_partition(inst: Instance, agent: int) -> MmsResult:
    """Exact MMS of one agent in a bivalued single-category instance.

    Bundle 0 of the partition is P*_1: at most average size when b ≥ 0,
    at least average size when b < 0.
    """
    require_valid(inst)
    cat = _single_category(inst)
    a, b, ell = bivalued_profile(inst)
    row = inst.valuations[agent]
    value, parts = _bivalued_split(inst.n_agents, ell[agent], inst.m, cat.q_minus, cat.q_plus, a, b)
    a_items = [g for g in cat.items if row[g] == a]
    b_items = [g for g in cat.items if row[g] != a]
    bundles = []
    for xa, yb in parts:
        bundles.append(a_items[:xa] + b_items[:yb])
        a_items, b_items = a_items[xa:], b_items[yb:]
    return MmsResult(value, Allocation(bundles))


def bivalued_exact(inst: Instance, log: SolveLog | None = None) -> Allocation:
    """Exact MMS allocation for a bivalued single-category instance.

    The agent with the most a-items takes a bundle shaped like the first bundle
    of its own MMS partition, cut from the a-block just below its last a-item
    and from the tail; repeat on what remains.
    """
    require_valid(inst)
    cat = _single_category(inst)
    a, b, _ = bivalued_profile(inst)
    red = to_ordered(inst)
    vals = red.ordered_instance.valuations
    agents = list(range(inst.n_agents))
    seq = list(cat.items)
    bundles = [[] for _ in agents]
    while agents:
        if len(agents) == 1:
            bundles[agents[0]] = seq
            break
        ell = {i: sum(1 for g in seq if vals[i][g] == a) for i in agents}
        star = max(agents, key=lambda i: (ell[i], -i))
        _, parts = _bivalued_split(len(agents), ell[star], len(seq), cat.q_minus, cat.q_plus, a, b)
        pa, pb = parts[0]
        take = seq[ell[star] - pa: ell[star]] + (seq[len(seq) - pb:] if pb else [])
        bundles[star] = take
        gone = set(take)
        seq = [g for g in seq if g not in gone]
        agents.remove(star)
        if log is not None:
            log.reductions += 1
    return lift_allocation(red, Allocation(bundles))
