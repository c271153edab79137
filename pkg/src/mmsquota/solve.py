"""Algorithm dispatch shared by the CLI, scripts and tests."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    Allocation,
    Instance,
    InstanceError,
    Kind,
    SolveLog,
    as_fraction,
    bundle_value,
    is_identical,
    lift_allocation,
    require_valid,
    to_ordered,
    verify_alpha_mms,
)
from . import multi_category, oracles, single_chores, single_goods

ALGORITHMS = (
    "auto", "single-goods", "single-chores", "multi-goods", "multi-chores",
    "identical-dp", "fptas", "almost-identical", "bivalued",
)


@dataclass
class SolveConfig:
    algorithm: str = "auto"
    alpha: Fraction | None = None
    eps: Fraction = Fraction(1, 10)
    oracle: bool = False
    check_invariants: bool = False


@dataclass
class RunReport:
    algorithm: str
    alpha: Fraction
    allocation: Allocation
    values: list[Fraction]
    mu_hat: dict[int, Fraction] = field(default_factory=dict)
    mu: list[Fraction] | None = None
    margins: list[Fraction] | None = None
    wall_time: float = 0.0

    @property
    def ok(self) -> bool | None:
        return None if self.margins is None else all(x >= 0 for x in self.margins)


def is_bivalued(inst: Instance) -> bool:
    return len({v for row in inst.valuations for v in row}) <= 2


def route(inst: Instance) -> str:
    """Pick an algorithm for ``auto``."""
    single = len(inst.categories) == 1
    if single and is_bivalued(inst):
        return "bivalued"
    if inst.kind is Kind.MIXED:
        raise InstanceError("unsupported kind: mixed-sign instances are only handled when bivalued")
    if is_identical(inst):
        return "fptas"
    goods = inst.kind is Kind.GOODS
    if single:
        return "single-goods" if goods else "single-chores"
    return "multi-goods" if goods else "multi-chores"


_ORDERED = {
    "single-goods": single_goods.approx_goods,
    "single-chores": single_chores.approx_chores,
    "multi-goods": multi_category.approx_categorized_goods,
    "multi-chores": multi_category.approx_categorized_chores,
}
_DEFAULT_ALPHA = {
    "single-goods": single_goods.default_alpha,
    "single-chores": single_chores.default_alpha,
    "multi-goods": multi_category.default_alpha_goods,
    "multi-chores": multi_category.default_alpha_chores,
}


def run(inst: Instance, cfg: SolveConfig | None = None) -> RunReport:
    """Solve ``inst`` and, if asked, compare against brute-force MMS values."""
    cfg = cfg or SolveConfig()
    require_valid(inst)
    if cfg.algorithm not in ALGORITHMS:
        raise InstanceError(f"unknown algorithm {cfg.algorithm!r}")
    name = route(inst) if cfg.algorithm == "auto" else cfg.algorithm
    log = SolveLog()
    eps = as_fraction(cfg.eps)
    sign = 1 if inst.kind is Kind.GOODS else -1
    start = time.perf_counter()
    if name in _ORDERED:
        alpha = _DEFAULT_ALPHA[name](inst.n_agents) if cfg.alpha is None else as_fraction(cfg.alpha)
        red = to_ordered(inst)
        ordered_alloc = _ORDERED[name](red.ordered_instance, alpha, check_invariants=cfg.check_invariants, log=log)
        alloc = lift_allocation(red, ordered_alloc)
    elif name == "bivalued":
        alpha = Fraction(1)
        alloc = oracles.bivalued_exact(inst, log)
    elif name == "identical-dp":
        alpha = Fraction(1)
        alloc = oracles.mms_identical_dp(inst).partition
    elif name == "fptas":
        alpha = 1 - sign * eps
        alloc = oracles.fptas_identical(inst, eps, log)
    else:
        alpha = 1 - sign * eps
        alloc = oracles.almost_identical(inst, eps, log)
    elapsed = time.perf_counter() - start
    values = [bundle_value(inst, i, alloc.bundles[i]) for i in range(inst.n_agents)]
    report = RunReport(name, alpha, alloc, values, dict(log.mu_hat), wall_time=elapsed)
    if cfg.oracle:
        mu = oracles.mms_values(inst)
        check = verify_alpha_mms(inst, alloc, alpha, mu)
        report.mu, report.margins = mu, list(check.margins)
    return report
