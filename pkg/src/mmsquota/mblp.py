"""Mixed binary linear program whose optimum is the worst-case MMS ratio
for a fixed instance dimension, plus the enumerations it is built from.

We only build and serialise the program (CPLEX LP text); solving is left to
external solvers.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from math import comb
from pathlib import Path
from typing import Sequence

from .core import Category, GuardError, Instance, InstanceError, Kind, as_fraction
from .oracles import best_alpha, mms_all

BUNDLE_GUARD = 4096
ALLOCATION_GUARD = 10**6


@dataclass(frozen=True)
class Dimension:
    """Agents, category sizes and quota pairs; items are numbered category by category."""
    n_agents: int
    category_sizes: tuple[int, ...]
    quotas: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "category_sizes", tuple(self.category_sizes))
        object.__setattr__(self, "quotas", tuple(tuple(q) for q in self.quotas))
        if self.n_agents < 1:
            raise InstanceError("n_agents must be positive")
        if len(self.category_sizes) != len(self.quotas):
            raise InstanceError("one quota pair per category")
        for s, (qm, qp) in zip(self.category_sizes, self.quotas):
            if not qm * self.n_agents <= s <= qp * self.n_agents or qm > qp:
                raise InstanceError(f"quota ({qm},{qp}) infeasible for |C|={s}, n={self.n_agents}")

    @property
    def m(self) -> int:
        return sum(self.category_sizes)

    def categories(self) -> list[list[int]]:
        out, start = [], 0
        for s in self.category_sizes:
            out.append(list(range(start, start + s)))
            start += s
        return out

    def instance(self, valuations, kind=None) -> Instance:
        cats = tuple(Category(items, qm, qp, f"C{j}")
                     for j, (items, (qm, qp)) in enumerate(zip(self.categories(), self.quotas)))
        return Instance(self.n_agents, cats, valuations, kind)

    @classmethod
    def of(cls, inst: Instance) -> "Dimension":
        order = [g for c in inst.categories for g in c.items]
        if order != list(range(inst.m)):
            raise InstanceError("items must be numbered category by category")
        return cls(inst.n_agents, tuple(len(c) for c in inst.categories),
                   tuple((c.q_minus, c.q_plus) for c in inst.categories))


def count_feasible_bundles(dim: Dimension) -> int:
    total = 1
    for s, (qm, qp) in zip(dim.category_sizes, dim.quotas):
        total *= sum(comb(s, c) for c in range(qm, min(qp, s) + 1))
    return total


def enumerate_feasible_bundles(dim: Dimension, guard: int = BUNDLE_GUARD) -> list[tuple[int, ...]]:
    """All feasible bundles as sorted tuples, in lexicographic order.

    >>> len(enumerate_feasible_bundles(Dimension(2, (4,), ((2, 2),))))
    6
    """
    total = count_feasible_bundles(dim)
    if total > guard:
        raise GuardError(f"{total} feasible bundles exceed the guard {guard}")
    per_cat = []
    for items, (qm, qp) in zip(dim.categories(), dim.quotas):
        per_cat.append([c for size in range(qm, min(qp, len(items)) + 1) for c in combinations(items, size)])
    return sorted(tuple(sorted(g for part in choice for g in part)) for choice in product(*per_cat))


def enumerate_feasible_allocations(dim: Dimension, bundles=None, guard: int = ALLOCATION_GUARD) -> list[tuple[int, ...]]:
    """Every ordered partition into feasible bundles, as tuples of bundle indices.

    >>> len(enumerate_feasible_allocations(Dimension(2, (3,), ((1, 2),))))
    6
    """
    bundles = enumerate_feasible_bundles(dim) if bundles is None else bundles
    masks = [sum(1 << g for g in b) for b in bundles]
    index = {mk: s for s, mk in enumerate(masks)}
    full = (1 << dim.m) - 1
    n = dim.n_agents
    out: list[tuple[int, ...]] = []
    pick: list[int] = []

    def rec(used: int):
        if len(pick) == n - 1:
            s = index.get(full & ~used)
            if s is not None:
                out.append(tuple(pick) + (s,))
                if len(out) > guard:
                    raise GuardError(f"feasible allocations exceed the guard {guard}")
            return
        for s, mk in enumerate(masks):
            if mk & used:
                continue
            pick.append(s)
            rec(used | mk)
            pick.pop()

    rec(0)
    return out


@dataclass(frozen=True)
class Var:
    name: str
    binary: bool
    lb: int = 0
    ub: int | None = None


@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple[tuple[int, str], ...]
    sense: str  # "=", ">=", "<="
    rhs: int


@dataclass
class MblpModel:
    dim: Dimension
    bundles: list[tuple[int, ...]]
    allocations: list[tuple[int, ...]]
    variables: list[Var] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    objective: tuple[tuple[int, str], ...] = ((1, "alpha"),)

    def counts(self) -> dict:
        return {
            "variables": len(self.variables),
            "binaries": sum(v.binary for v in self.variables),
            "constraints": len(self.rows),
            "bundles": len(self.bundles),
            "allocations": len(self.allocations),
        }


def expected_counts(n: int, m: int, n_bundles: int, n_allocs: int) -> tuple[int, int]:
    """Closed-form (variables, constraints)."""
    return (1 + n * m + n * n * n_bundles + n * n_bundles,
            n * n + n * m + n * n * n_bundles + n * n_bundles + n_allocs)


def build_mblp(dim: Dimension, bundle_guard: int = BUNDLE_GUARD, alloc_guard: int = ALLOCATION_GUARD) -> MblpModel:
    """
    >>> build_mblp(Dimension(2, (2,), ((1, 1),))).counts()["variables"]
    17
    """
    bundles = enumerate_feasible_bundles(dim, bundle_guard)
    allocs = enumerate_feasible_allocations(dim, bundles, alloc_guard)
    n, m = dim.n_agents, dim.m
    N, M, S = range(n), range(m), range(len(bundles))
    u = lambda i, g: f"u_{i}_{g}"  # noqa: E731
    p = lambda i, k, s: f"p_{i}_{k}_{s}"  # noqa: E731
    ell = lambda i, s: f"l_{i}_{s}"  # noqa: E731
    model = MblpModel(dim, bundles, allocs)
    vs = model.variables
    vs.append(Var("alpha", False, 0, None))
    vs.extend(Var(u(i, g), False, 0, 1) for i in N for g in M)
    vs.extend(Var(p(i, k, s), True, 0, 1) for i in N for k in N for s in S)
    vs.extend(Var(ell(i, s), True, 0, 1) for i in N for s in S)
    rows = model.rows
    for i in N:
        for k in N:
            rows.append(Row(f"choose_{i}_{k}", tuple((1, p(i, k, s)) for s in S), "=", 1))
    containing = {g: [s for s in S if g in bundles[s]] for g in M}
    for i in N:
        for g in M:
            rows.append(Row(f"cover_{i}_{g}", tuple((1, p(i, k, s)) for k in N for s in containing[g]), "=", 1))
    for i in N:
        for k in N:
            for s in S:
                terms = tuple((1, u(i, g)) for g in bundles[s]) + ((-1, p(i, k, s)),)
                rows.append(Row(f"atleast_{i}_{k}_{s}", terms, ">=", 0))
    for i in N:
        for s in S:
            size = len(bundles[s])
            terms = tuple((1, u(i, g)) for g in bundles[s]) + ((-1, "alpha"),)
            if size:
                terms += ((size, ell(i, s)),)
            rows.append(Row(f"atmost_{i}_{s}", terms, "<=", size))
    for a, alloc in enumerate(allocs):
        rows.append(Row(f"someone_{a}", tuple((1, ell(i, alloc[i])) for i in N), ">=", 1))
    return model


# LP text ------------------------------------------------------------------

def _expr(terms) -> str:
    parts = []
    for idx, (c, name) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else f"{mag} "
        if idx == 0:
            parts.append(f"{'-' if c < 0 else ''}{coef}{name}")
        else:
            parts.append(f"{sign} {coef}{name}")
    lines, line = [], ""
    for part in parts:
        if line and len(line) + len(part) > 200:
            lines.append(line)
            line = "   " + part
        else:
            line = f"{line} {part}" if line else part
    lines.append(line)
    return "\n".join(lines)


def lp_text(model: MblpModel) -> str:
    out = io.StringIO()
    d = model.dim
    out.write(f"\\ MMS worst-case ratio program: n={d.n_agents} sizes={list(d.category_sizes)} "
              f"quotas={[list(q) for q in d.quotas]}\n")
    out.write("Minimize\n")
    out.write(f" obj: {_expr(model.objective)}\n")
    out.write("Subject To\n")
    for r in model.rows:
        out.write(f" {r.name}: {_expr(r.terms)} {r.sense} {r.rhs}\n")
    out.write("Bounds\n")
    for v in model.variables:
        if v.binary:
            continue
        if v.ub is None:
            out.write(f" {v.name} >= {v.lb}\n")
        else:
            out.write(f" {v.lb} <= {v.name} <= {v.ub}\n")
    out.write("Binaries\n")
    for v in model.variables:
        if v.binary:
            out.write(f" {v.name}\n")
    out.write("End\n")
    return out.getvalue()


def emit_lp(model: MblpModel, destination) -> str:
    """Write the LP file; returns the text. ``destination`` is a path or text stream."""
    text = lp_text(model)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        try:
            Path(destination).write_text(text)
        except OSError as exc:
            raise InstanceError(f"cannot write {destination}: {exc}") from exc
    return text


def mapping(model: MblpModel) -> dict:
    return {
        "n_agents": model.dim.n_agents,
        "category_sizes": list(model.dim.category_sizes),
        "quotas": [list(q) for q in model.dim.quotas],
        "bundles": [list(b) for b in model.bundles],
        "allocations": [list(a) for a in model.allocations],
    }


def write_mapping(model: MblpModel, path) -> None:
    Path(path).write_text(json.dumps(mapping(model), indent=1) + "\n")


def parse_lp(text: str) -> dict:
    """Read back what :func:`lp_text` writes (not a general LP parser)."""
    section = None
    rows: dict[str, tuple] = {}
    order: list[str] = []
    bounds, binaries, objective = [], [], None
    pending = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            objective = line.split(":", 1)[1].split()
        elif section == "subject to":
            pending = line if pending is None else pending + " " + line
            tokens = pending.split()
            if len(tokens) >= 2 and tokens[-2] in ("=", ">=", "<="):
                name, body = pending.split(":", 1)
                toks = body.split()
                sense, rhs, toks = toks[-2], int(toks[-1]), toks[:-2]
                terms, sign, coef = [], 1, 1
                for tok in toks:
                    if tok in "+-":
                        sign = -1 if tok == "-" else 1
                    elif tok.lstrip("-").isdigit():
                        coef = int(tok)
                    else:
                        if tok.startswith("-"):
                            sign, tok = -1, tok[1:]
                        terms.append((sign * coef, tok))
                        sign, coef = 1, 1
                rows[name.strip()] = (tuple(terms), sense, rhs)
                order.append(name.strip())
                pending = None
        elif section == "bounds":
            bounds.append(next(t for t in line.split() if not t.lstrip("-").isdigit() and t not in ("<=", ">=")))
        elif section == "binaries":
            binaries.extend(line.split())
    return {"objective": objective, "rows": rows, "order": order, "bounds": bounds, "binaries": binaries}


def structural_problems(model: MblpModel) -> list[str]:
    declared = {v.name for v in model.variables}
    out = []
    if len(declared) != len(model.variables):
        out.append("duplicate variable names")
    for r in model.rows:
        for _, name in r.terms:
            if name not in declared:
                out.append(f"row {r.name} references undeclared {name}")
    return out


# witness ------------------------------------------------------------------

def witness_assignment(model: MblpModel, inst: Instance, alpha) -> dict[str, Fraction]:
    """Variable values built from a goods instance: u = v/μ, p from each
    agent's MMS partition, ℓ_{i,S} = [u_i(S) < α]."""
    alpha = as_fraction(alpha)
    if inst.kind is not Kind.GOODS:
        raise InstanceError("witness construction expects goods")
    n = inst.n_agents
    mms = mms_all(inst)
    if any(r.value <= 0 for r in mms):
        raise InstanceError("witness needs positive MMS values")
    index = {b: s for s, b in enumerate(model.bundles)}
    x: dict[str, Fraction] = {"alpha": alpha}
    for i in range(n):
        for g in range(inst.m):
            x[f"u_{i}_{g}"] = inst.valuations[i][g] / mms[i].value
            if x[f"u_{i}_{g}"] > 1:
                raise InstanceError("scaled value exceeds 1; u would leave [0, 1]")
    for i in range(n):
        part = [index[tuple(b)] for b in mms[i].partition.bundles]
        for k in range(n):
            for s in range(len(model.bundles)):
                x[f"p_{i}_{k}_{s}"] = Fraction(int(part[k] == s))
        for s, b in enumerate(model.bundles):
            us = sum((x[f"u_{i}_{g}"] for g in b), Fraction(0))
            x[f"l_{i}_{s}"] = Fraction(int(us < alpha))
    return x


def violated_rows(model: MblpModel, x: dict[str, Fraction]) -> list[str]:
    bad = []
    for v in model.variables:
        val = x[v.name]
        if val < v.lb or (v.ub is not None and val > v.ub) or (v.binary and val not in (0, 1)):
            bad.append(v.name)
    for r in model.rows:
        lhs = sum((c * x[name] for c, name in r.terms), Fraction(0))
        ok = lhs == r.rhs if r.sense == "=" else lhs >= r.rhs if r.sense == ">=" else lhs <= r.rhs
        if not ok:
            bad.append(r.name)
    return bad


def check_alpha_witness(dim: Dimension, valuations: Sequence[Sequence], alpha) -> bool:
    """True iff no feasible allocation beats ``alpha`` on this instance, i.e.
    the instance certifies a worst-case ratio of at most ``alpha``.

    For chores the comparison flips (no allocation needs less than ``alpha``).
    """
    inst = dim.instance(valuations)
    best, _ = best_alpha(inst)
    alpha = as_fraction(alpha)
    return best <= alpha if inst.kind is Kind.GOODS else best >= alpha
