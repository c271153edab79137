"""Bag filling for instances with several categories.

Goods reach n/(2n-1) of the MMS and chores (2n-1)/n. Each round builds one
bag category by category, keeping |B ∩ C| between the floor and ceiling of
|C ∩ M^(t)|/t, and hands it to the first agent who accepts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

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
class CategorizedBag:
    """State of one filling round. ``remaining_items[j]`` is C_j ∩ M^(t) in order."""
    items: set[int]
    remaining_items: list[list[int]]
    remaining_agents: list[int]
    t: int
    mu_hat: dict[int, Fraction] = field(default_factory=dict)

    @property
    def per_category_counts(self) -> list[int]:
        return [sum(1 for g in c if g in self.items) for c in self.remaining_items]


def default_alpha_goods(n: int) -> Fraction:
    return Fraction(n, 2 * n - 1)


def default_alpha_chores(n: int) -> Fraction:
    return Fraction(2 * n - 1, n)


def _prepare(inst: Instance, kind: Kind) -> None:
    require_valid(inst)
    if inst.kind is not kind:
        raise InstanceError(f"expected kind {kind.value}, got {inst.kind.value}")
    if not is_ordered(inst):
        raise InstanceError("instance must be ordered (apply to_ordered first)")


def _lemma_bundle(cats: Sequence[Sequence[int]], n: int, qm, qp, cstar: int, d: int) -> list[int]:
    head = cats[cstar]
    if not head or len(head) < d * n + 1:
        raise InstanceError("need a non-empty C* with |C*| ≥ d·n + 1")
    bundle = list(head[d * (n - 1): d * n + 1])
    for j, items in enumerate(cats):
        size = len(items)
        tail = max(qm[j], size - qp[j] * (n - 1)) - (d + 1 if j == cstar else 0)
        if tail > 0:
            chunk = list(items[size - tail:])
            if j == cstar and size - tail < d * n + 1:
                raise InvariantError("reduction tail overlaps the head")
            bundle += chunk
    return bundle


def valid_reduction_bundle(inst: Instance, agent: int, category: int, d: int) -> Reduction:
    """The bundle that can go to ``agent`` without hurting anyone else's MMS.

    >>> inst = Instance.build([[1] * 6] * 3, [((0, 1, 2), 1, 1), ((3, 4, 5), 1, 1)])
    >>> valid_reduction_bundle(inst, 0, 0, 0).bundle
    (0, 5)
    """
    require_valid(inst)
    cats = [list(c.items) for c in inst.categories]
    qm = [c.q_minus for c in inst.categories]
    qp = [c.q_plus for c in inst.categories]
    bundle = _lemma_bundle(cats, inst.n_agents, qm, qp, category, d)
    agents = tuple(i for i in range(inst.n_agents) if i != agent)
    gone = set(bundle)
    reduced, item_ids = restrict(inst, agents, (g for g in range(inst.m) if g not in gone))
    return Reduction(tuple(sorted(bundle)), reduced, agents, item_ids)


def _total(vals, i, cats) -> Fraction:
    row = vals[i]
    return sum((row[g] for c in cats for g in c), Fraction(0))


def check_invariants_multi(inst: Instance, state: CategorizedBag, assigned, alpha, n: int,
                           all_items: set[int], goods: bool) -> str | None:
    """C1..C4 at a round boundary; ``n`` is the agent count of this level."""
    rem = [g for c in state.remaining_items for g in c]
    flat = rem + [g for b in assigned for g in b]
    if len(flat) != len(set(flat)):
        return "C1"
    if set(flat) != all_items:
        return "C2"
    t = state.t
    for c, items in zip(inst.categories, state.remaining_items):
        if not c.q_minus * t <= len(items) <= c.q_plus * t:
            return "C3"
    alpha = as_fraction(alpha)
    factor = t - (n - t) * (2 * alpha - 1) if goods else t + (n - t) * (2 - alpha)
    for i in state.remaining_agents:
        if _total(inst.valuations, i, state.remaining_items) < factor * state.mu_hat[i]:
            return "C4"
    return None


def _bag_bounds_ok(bag: set[int], cats, t: int) -> bool:
    for items in cats:
        k = sum(1 for g in items if g in bag)
        if not len(items) // t <= k <= -(-len(items) // t):
            return False
    return True


def _fill(inst, cats, agents, mu_hat, alpha, goods, result, check, log, all_items, assigned):
    vals = inst.valuations
    n = len(agents)
    R = list(agents)
    state = CategorizedBag(set(), cats, R, n, mu_hat)

    def checkpoint():
        if not check:
            return
        if log is not None:
            log.invariant_checks += 1
        label = check_invariants_multi(inst, state, assigned, alpha, n, all_items, goods)
        if label is not None:
            raise InvariantError(f"condition {label} violated at t={state.t}")

    checkpoint()
    for t in range(n, 0, -1):
        state.t = t
        state.remaining_agents = R
        B = set()
        for items in cats:
            size = len(items) // t if goods else -(-len(items) // t)
            if size:
                B.update(items[len(items) - size:])
        state.items = B
        vB = {i: sum((vals[i][g] for g in B), Fraction(0)) for i in R}
        thr = {i: alpha * mu_hat[i] for i in R}
        steps = 0
        for items in cats:
            fl, ce = len(items) // t, -(-len(items) // t)
            top = set(items[:ce] if goods else items[:fl])
            while all(vB[i] < thr[i] for i in R):
                inside = [g for g in items if g in B]
                if set(inside) == top:
                    break
                if goods:
                    if len(inside) == ce:
                        g = inside[-1]
                        B.discard(g)
                        for i in R:
                            vB[i] -= vals[i][g]
                    h = next(g for g in items if g not in B)
                    B.add(h)
                    for i in R:
                        vB[i] += vals[i][h]
                else:
                    at_floor = len(inside) == fl
                    g = inside[-1]
                    B.discard(g)
                    for i in R:
                        vB[i] -= vals[i][g]
                    if at_floor:
                        h = next(x for x in items if x not in B and x != g)
                        B.add(h)
                        for i in R:
                            vB[i] += vals[i][h]
                steps += 1
        winner = next((i for i in R if vB[i] >= thr[i]), None)
        if winner is None:
            raise InvariantError(f"no remaining agent accepts the bag in round t={t}")
        if check and not _bag_bounds_ok(B, cats, t):
            raise InvariantError(f"per-category bag bounds violated at t={t}")
        result[winner] = sorted(B)
        assigned.append(sorted(B))
        if log is not None:
            log.rounds += 1
            log.mu_hat[winner] = mu_hat[winner]
            log.stats.setdefault("steps_per_round", []).append(steps)
        cats = [[g for g in items if g not in B] for items in cats]
        R = [i for i in R if i != winner]
        state.remaining_items = cats
        state.remaining_agents = R
        state.t = t - 1
        checkpoint()


def approx_categorized_goods(inst: Instance, alpha=None, check_invariants: bool = False,
                             log: SolveLog | None = None) -> Allocation:
    """α-MMS allocation for ordered goods with any number of categories.

    >>> inst = Instance.build([[3, 1, 2, 2]] * 2, [((0, 1), 1, 1), ((2, 3), 1, 1)])
    >>> approx_categorized_goods(inst).bundles
    ((0, 3), (1, 2))
    """
    _prepare(inst, Kind.GOODS)
    n = inst.n_agents
    alpha = default_alpha_goods(n) if alpha is None else as_fraction(alpha)
    if not Fraction(1, 2) <= alpha <= 1 / (2 - Fraction(1, n)):
        raise InstanceError(f"alpha {alpha} outside [1/2, {1 / (2 - Fraction(1, n))}]")
    vals = inst.valuations
    qm = [c.q_minus for c in inst.categories]
    qp = [c.q_plus for c in inst.categories]
    cats = [list(c.items) for c in inst.categories]
    agents = list(range(n))
    result: dict[int, list[int]] = {}
    while agents:
        nn = len(agents)
        if nn == 1:
            # the lemma bundle for one agent is everything left
            result[agents[0]] = sorted(g for c in cats for g in c)
            break
        mu_hat = {i: _total(vals, i, cats) / nn for i in agents}
        found = None
        for i in agents:
            for j, items in enumerate(cats):
                if items and vals[i][items[0]] >= alpha * mu_hat[i]:
                    found = (i, j)
                    break
            if found:
                break
        if found is None:
            level_items = {g for c in cats for g in c}
            _fill(inst, cats, agents, mu_hat, alpha, True, result, check_invariants, log, level_items, [])
            break
        i, j = found
        bundle = _lemma_bundle(cats, nn, qm, qp, j, 0)
        result[i] = sorted(bundle)
        if log is not None:
            log.reductions += 1
            log.mu_hat[i] = mu_hat[i]
        gone = set(bundle)
        cats = [[g for g in items if g not in gone] for items in cats]
        agents.remove(i)
    return Allocation([result[i] for i in range(n)])


def approx_categorized_chores(inst: Instance, alpha=None, check_invariants: bool = False,
                              log: SolveLog | None = None) -> Allocation:
    """α-MMS allocation for ordered chores with any number of categories.

    >>> inst = Instance.single([[-1, -1, -1, -1]] * 2, 0, 4)
    >>> [len(b) for b in approx_categorized_chores(inst).bundles]
    [2, 2]
    """
    _prepare(inst, Kind.CHORES)
    n = inst.n_agents
    alpha = default_alpha_chores(n) if alpha is None else as_fraction(alpha)
    if not 2 - Fraction(1, n) <= alpha <= 2:
        raise InstanceError(f"alpha {alpha} outside [{2 - Fraction(1, n)}, 2]")
    vals = inst.valuations
    cats = [list(c.items) for c in inst.categories]
    mu_hat = {}
    for i in range(n):
        row = vals[i]
        mu_hat[i] = min(_total(vals, i, cats) / n, min((row[g] for g in range(inst.m)), default=Fraction(0)))
    result: dict[int, list[int]] = {}
    _fill(inst, cats, list(range(n)), mu_hat, alpha, False, result, check_invariants, log, set(range(inst.m)), [])
    return Allocation([result[i] for i in range(n)])
