"""Instance model, feasibility predicates, ordered reduction and lifting.

All scalars are :class:`fractions.Fraction`; nothing in the package rounds.

>>> inst = Instance.single([[3, 2, 1]], 0, 3)
>>> bundle_value(inst, 0, {0, 2})
Fraction(4, 1)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

Rational = Fraction


class InstanceError(ValueError):
    """Raised for malformed instances or inputs violating a precondition."""


class InvariantError(RuntimeError):
    """An internal algorithm invariant failed (should never fire on valid input)."""


class GuardError(RuntimeError):
    """An enumeration or state-space guard was exceeded."""


class Kind(str, Enum):
    GOODS = "goods"
    CHORES = "chores"
    MIXED = "mixed"


def as_fraction(x) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings. Floats are refused."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InstanceError(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InstanceError(f"not a rational: {x!r}") from exc
    raise InstanceError(f"not an exact rational: {x!r}")


@dataclass(frozen=True)
class Category:
    items: tuple[int, ...]
    q_minus: int
    q_plus: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(int(g) for g in self.items))

    def __len__(self):
        return len(self.items)


def infer_kind(rows: Iterable[Iterable[Fraction]]) -> Kind:
    vals = [v for r in rows for v in r]
    if all(v >= 0 for v in vals):
        return Kind.GOODS
    if all(v <= 0 for v in vals):
        return Kind.CHORES
    return Kind.MIXED


@dataclass(frozen=True)
class Instance:
    n_agents: int
    categories: tuple[Category, ...]
    valuations: tuple[tuple[Fraction, ...], ...]
    kind: Kind = None

    def __post_init__(self):
        cats = tuple(c if isinstance(c, Category) else Category(*c) for c in self.categories)
        rows = tuple(tuple(as_fraction(v) for v in row) for row in self.valuations)
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "valuations", rows)
        kind = infer_kind(rows) if self.kind is None else Kind(self.kind)
        object.__setattr__(self, "kind", kind)

    @property
    def m(self) -> int:
        return sum(len(c) for c in self.categories)

    @property
    def items(self) -> range:
        return range(self.m)

    def value(self, agent: int, item: int) -> Fraction:
        return self.valuations[agent][item]

    def category_of(self) -> dict[int, int]:
        return {g: j for j, c in enumerate(self.categories) for g in c.items}

    @classmethod
    def single(cls, valuations, q_minus: int, q_plus: int, kind=None) -> "Instance":
        """One category holding every item, in id order."""
        rows = [list(r) for r in valuations]
        m = len(rows[0]) if rows else 0
        return cls(len(rows), (Category(range(m), q_minus, q_plus, "C0"),), rows, kind)

    @classmethod
    def build(cls, valuations, categories, kind=None) -> "Instance":
        """``categories`` is a list of ``(items, q_minus, q_plus)`` triples."""
        cats = tuple(Category(items, qm, qp, f"C{j}") for j, (items, qm, qp) in enumerate(categories))
        rows = [list(r) for r in valuations]
        return cls(len(rows), cats, rows, kind)


@dataclass(frozen=True)
class Allocation:
    bundles: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "bundles", tuple(tuple(sorted(int(g) for g in b)) for b in self.bundles))

    def __len__(self):
        return len(self.bundles)

    def __getitem__(self, i):
        return self.bundles[i]


class OrderedReduction(NamedTuple):
    ordered_instance: Instance
    original_instance: Instance


class GuaranteeCheck(NamedTuple):
    ok: bool
    margins: tuple[Fraction, ...]


@dataclass
class SolveLog:
    """Optional sink for what an algorithm did; used by tests and reports."""
    mu_hat: dict[int, Fraction] = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    reductions: int = 0
    rounds: int = 0
    invariant_checks: int = 0
    keep_events: bool = False
    stats: dict = field(default_factory=dict)


# validation and feasibility -----------------------------------------------

def validate_instance(inst: Instance) -> list[str]:
    """Return a list of violation messages; empty means the instance is valid.

    >>> validate_instance(Instance.single([[1, 1, 1], [1, 1, 1]], 2, 3))
    ['category 0: q⁻·n=4 > |C|=3']
    """
    out = []
    n = inst.n_agents
    if n < 1:
        out.append("n_agents must be positive")
    if len(inst.valuations) != n:
        out.append(f"expected {n} valuation rows, got {len(inst.valuations)}")
    m = inst.m
    seen = []
    for c in inst.categories:
        seen.extend(c.items)
    if sorted(seen) != list(range(m)):
        out.append("categories must partition item ids 0..m-1")
    for r, row in enumerate(inst.valuations):
        if len(row) != m:
            out.append(f"row {r} has {len(row)} values, expected {m}")
    for j, c in enumerate(inst.categories):
        if c.q_minus < 0 or c.q_plus < 0:
            out.append(f"category {j}: negative quota")
        if c.q_minus > c.q_plus:
            out.append(f"category {j}: q⁻={c.q_minus} > q⁺={c.q_plus}")
        if n >= 1 and c.q_minus * n > len(c):
            out.append(f"category {j}: q⁻·n={c.q_minus * n} > |C|={len(c)}")
        if n >= 1 and len(c) > c.q_plus * n:
            out.append(f"category {j}: |C|={len(c)} > q⁺·n={c.q_plus * n}")
    vals = [v for row in inst.valuations for v in row]
    if inst.kind is Kind.GOODS and any(v < 0 for v in vals):
        out.append("kind goods but a value is negative")
    if inst.kind is Kind.CHORES and any(v > 0 for v in vals):
        out.append("kind chores but a value is positive")
    return out


def require_valid(inst: Instance) -> None:
    problems = validate_instance(inst)
    if problems:
        raise InstanceError("; ".join(problems))


def category_counts(inst: Instance, bundle: Iterable[int]) -> list[int]:
    cat = inst.category_of()
    counts = [0] * len(inst.categories)
    for g in bundle:
        if g not in cat:
            raise InstanceError(f"item not in instance: {g}")
        counts[cat[g]] += 1
    return counts


def is_feasible_bundle(inst: Instance, bundle: Iterable[int]) -> bool:
    counts = category_counts(inst, bundle)
    return all(c.q_minus <= k <= c.q_plus for c, k in zip(inst.categories, counts))


def is_partition(inst: Instance, alloc: Allocation) -> bool:
    items = [g for b in alloc.bundles for g in b]
    return len(alloc.bundles) == inst.n_agents and sorted(items) == list(range(inst.m))


def is_feasible_allocation(inst: Instance, alloc: Allocation) -> bool:
    if not is_partition(inst, alloc):
        raise InstanceError("not a partition")
    return all(is_feasible_bundle(inst, b) for b in alloc.bundles)


def bundle_value(inst: Instance, agent: int, bundle: Iterable[int]) -> Fraction:
    row = inst.valuations[agent]
    return sum((row[g] for g in bundle), Fraction(0))


def is_ordered(inst: Instance) -> bool:
    return all(
        all(row[a] >= row[b] for a, b in zip(c.items, c.items[1:]))
        for c in inst.categories
        for row in inst.valuations
    )


def is_identical(inst: Instance) -> bool:
    return all(row == inst.valuations[0] for row in inst.valuations)


# ordered reduction ----------------------------------------------------------

def to_ordered(inst: Instance) -> OrderedReduction:
    """Give position j of each category the agent's j-th largest value there.

    >>> red = to_ordered(Instance.single([[1, 3, 2], [2, 1, 3]], 1, 2))
    >>> [[int(v) for v in row] for row in red.ordered_instance.valuations]
    [[3, 2, 1], [3, 2, 1]]
    """
    rows = [list(r) for r in inst.valuations]
    for c in inst.categories:
        for i, row in enumerate(inst.valuations):
            vals = sorted((row[g] for g in c.items), reverse=True)
            for g, v in zip(c.items, vals):
                rows[i][g] = v
    ordered = Instance(inst.n_agents, inst.categories, rows, inst.kind)
    return OrderedReduction(ordered, inst)


def lift_allocation(reduction: OrderedReduction, ordered_alloc: Allocation) -> Allocation:
    """Turn an allocation of the ordered instance into one of the original.

    Walk each category's positions in order; whoever holds position j takes
    its favourite unassigned original item of that category (lowest id on
    ties). Each agent keeps a cursor into its own descending list.
    """
    orig, ordered = reduction.original_instance, reduction.ordered_instance
    if not is_feasible_allocation(ordered, ordered_alloc):
        raise InstanceError("ordered allocation is infeasible")
    owner = {g: i for i, b in enumerate(ordered_alloc.bundles) for g in b}
    bundles = [[] for _ in range(orig.n_agents)]
    for c in orig.categories:
        taken = set()
        prefs = {}
        cursor = {}
        for g in c.items:
            i = owner[g]
            if i not in prefs:
                row = orig.valuations[i]
                prefs[i] = sorted(c.items, key=lambda h: (-row[h], h))
                cursor[i] = 0
            p = prefs[i]
            k = cursor[i]
            while p[k] in taken:
                k += 1
            taken.add(p[k])
            cursor[i] = k + 1
            bundles[i].append(p[k])
    return Allocation(bundles)


def verify_alpha_mms(inst: Instance, alloc: Allocation, alpha, mms_values: Sequence) -> GuaranteeCheck:
    """Check v_i(A_i) ≥ α·μ_i for every agent; margins are v_i(A_i) − α·μ_i."""
    if not is_feasible_allocation(inst, alloc):
        raise InstanceError("allocation is infeasible")
    alpha = as_fraction(alpha)
    margins = tuple(
        bundle_value(inst, i, alloc.bundles[i]) - alpha * as_fraction(mms_values[i])
        for i in range(inst.n_agents)
    )
    return GuaranteeCheck(all(x >= 0 for x in margins), margins)


# sub-instances --------------------------------------------------------------

class Reduction(NamedTuple):
    """A bundle handed to one agent plus the instance left over.

    ``agent_ids[j]`` / ``item_ids[x]`` map reduced indices to the original ones.
    """
    bundle: tuple[int, ...]
    reduced: Instance
    agent_ids: tuple[int, ...]
    item_ids: tuple[int, ...]


def restrict(inst: Instance, agents: Sequence[int], items: Iterable[int]) -> tuple[Instance, tuple[int, ...]]:
    """Sub-instance on ``agents`` and ``items`` with ids renumbered densely.

    Category order and within-category order are kept.
    """
    keep = set(items)
    item_ids = tuple(g for g in range(inst.m) if g in keep)
    new_id = {g: x for x, g in enumerate(item_ids)}
    cats = tuple(
        Category(tuple(new_id[g] for g in c.items if g in keep), c.q_minus, c.q_plus, c.name)
        for c in inst.categories
    )
    rows = [[inst.valuations[i][g] for g in item_ids] for i in agents]
    return Instance(len(agents), cats, rows, inst.kind), item_ids
