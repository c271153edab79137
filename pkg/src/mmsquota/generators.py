"""Tight worst-case families and seeded random instances."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import ceil

from .core import Category, Instance, InstanceError, Kind, to_ordered

QUOTA_POLICIES = ("tight", "loose", "lower-only", "upper-only", "unconstrained")


def _shuffled(inst: Instance, seed) -> Instance:
    """Relabel item ids at random (values move with their items)."""
    rng = random.Random(seed)
    m = inst.m
    perm = list(range(m))
    rng.shuffle(perm)  # old id g becomes perm[g]
    rows = [[None] * m for _ in inst.valuations]
    for i, row in enumerate(inst.valuations):
        for g, v in enumerate(row):
            rows[i][perm[g]] = v
    cats = tuple(Category(sorted(perm[g] for g in c.items), c.q_minus, c.q_plus, c.name) for c in inst.categories)
    return Instance(inst.n_agents, cats, rows, inst.kind)


def tight_goods_values(n: int) -> list[Fraction]:
    """
    >>> [str(v) for v in tight_goods_values(2)]
    ['3/5', '2/5', '2/5', '2/5', '1/5', '0']
    """
    if n < 1:
        raise InstanceError("n must be positive")
    out = []
    for j in range(1, 3 * n + 1):
        if j <= n:
            out.append(Fraction(2 * n - j, 3 * n - 1))
        elif j <= 3 * n - 2:
            out.append(Fraction(ceil(Fraction(5 * n + 1 - j, 2)), 6 * n - 2))
        else:
            out.append(Fraction(3 * n - j, 3 * n - 1))
    return out


def tight_goods_instance(n: int, shuffle_seed=None) -> Instance:
    """n identical agents, 3n goods, quota (3, 3); every agent's MMS is 1."""
    row = tight_goods_values(n)
    inst = Instance(n, (Category(range(3 * n), 3, 3, "goods"),), [row] * n, Kind.GOODS)
    return inst if shuffle_seed is None else _shuffled(inst, shuffle_seed)


def tight_chores_values(n: int) -> list[Fraction]:
    """
    >>> [str(v) for v in tight_chores_values(2)]
    ['-1/4', '-1/2', '-1/2', '-3/4']
    """
    if n < 1:
        raise InstanceError("n must be positive")
    out = []
    for j in range(1, 2 * n + 1):
        if j < n:
            out.append(Fraction(-1, 2 * n))
        elif j <= n + 1:
            out.append(Fraction(-1, 2))
        else:
            out.append(Fraction(1, 2 * n) - 1)
    return out


def tight_chores_instance(n: int, shuffle_seed=None) -> Instance:
    """n identical agents, 2n chores, quota (1, n+1); every agent's MMS is -1."""
    row = tight_chores_values(n)
    inst = Instance(n, (Category(range(2 * n), 1, n + 1, "chores"),), [row] * n, Kind.CHORES)
    return inst if shuffle_seed is None else _shuffled(inst, shuffle_seed)


@dataclass(frozen=True)
class RandomConfig:
    n: int
    category_sizes: tuple[int, ...]
    quota_policy: str = "loose"
    value_range: tuple[int, int] | None = None
    kind: str = "goods"
    ordered: bool = False


def _quotas(rng: random.Random, size: int, n: int, policy: str) -> tuple[int, int]:
    lo, hi = size // n, -(-size // n)
    if policy == "unconstrained":
        return 0, size
    if policy == "tight":
        return lo, hi
    if policy == "loose":
        return rng.randint(0, lo), rng.randint(hi, size)
    if policy == "lower-only":
        return rng.randint(0, lo), size
    if policy == "upper-only":
        return 0, rng.randint(hi, size)
    raise InstanceError(f"unknown quota policy {policy!r}; pick one of {QUOTA_POLICIES}")


def random_instance(seed, n: int, category_sizes, quota_policy: str = "loose",
                    value_range=None, kind: str = "goods", ordered: bool = False) -> Instance:
    """Seeded instance with small integer values.

    >>> a = random_instance(7, 2, (3, 2), "tight")
    >>> a == random_instance(7, 2, (3, 2), "tight")
    True
    >>> [(c.q_minus, c.q_plus) for c in a.categories]
    [(1, 2), (1, 1)]
    """
    if n < 1:
        raise InstanceError("n must be positive")
    sizes = [int(s) for s in category_sizes]
    if any(s < 0 for s in sizes):
        raise InstanceError("category sizes must be non-negative")
    kind = Kind(kind)
    if value_range is None:
        value_range = (0, 8) if kind is Kind.GOODS else (-8, 0)
    lo, hi = value_range
    if lo > hi:
        raise InstanceError("empty value range")
    if kind is Kind.GOODS and lo < 0 or kind is Kind.CHORES and hi > 0:
        raise InstanceError("value range does not match kind")
    rng = random.Random(seed)
    cats, start = [], 0
    for j, s in enumerate(sizes):
        qm, qp = _quotas(rng, s, n, quota_policy)
        cats.append(Category(range(start, start + s), qm, qp, f"C{j}"))
        start += s
    rows = [[rng.randint(lo, hi) for _ in range(start)] for _ in range(n)]
    inst = Instance(n, tuple(cats), rows, kind)
    return to_ordered(inst).ordered_instance if ordered else inst


def from_config(cfg: RandomConfig, seed) -> Instance:
    return random_instance(seed, cfg.n, cfg.category_sizes, cfg.quota_policy, cfg.value_range, cfg.kind, cfg.ordered)


SWEEP_POLICIES = ("tight", "loose", "lower-only", "upper-only")


def sweep_instance(seed, kind: str = "goods", agents=(2, 3), max_items: int = 8,
                   categories=(1, 1), magnitude: int = 3, identical: bool = False) -> Instance:
    """A small ordered instance of the kind used in the guarantee sweeps.

    Agent count, category sizes (each ≥ 1, total ≤ ``max_items``) and the
    quota policy are drawn from ``seed``; values lie in 0..magnitude for goods
    and -magnitude..0 for chores.

    >>> inst = sweep_instance(3, "chores", categories=(2, 3))
    >>> 2 <= len(inst.categories) <= 3 and inst.m <= 8 and inst.kind.value
    'chores'
    """
    rng = random.Random(seed)
    n = rng.choice(tuple(agents))
    n_cats = rng.randint(*categories)
    total = rng.randint(max(n_cats, 2), max_items)
    cuts = sorted(rng.sample(range(1, total), n_cats - 1))
    sizes = [b - a for a, b in zip([0] + cuts, cuts + [total])]
    policy = rng.choice(SWEEP_POLICIES)
    vr = (0, magnitude) if kind == "goods" else (-magnitude, 0)
    inst = random_instance(rng.getrandbits(32), n, sizes, policy, vr, kind)
    if identical:
        inst = Instance(n, inst.categories, [inst.valuations[0]] * n, inst.kind)
    return to_ordered(inst).ordered_instance
