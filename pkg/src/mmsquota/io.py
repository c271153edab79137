"""JSON reading and writing for instances, allocations and reports."""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .core import Allocation, Category, Instance, InstanceError, Kind, as_fraction


def rat_str(x: Fraction):
    """Bare int when integral, else ``"p/q"``."""
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def rat_report(x) -> dict:
    if isinstance(x, float):  # only ever +inf from best_alpha
        return {"exact": "inf", "decimal": x}
    x = Fraction(x)
    return {"exact": f"{x.numerator}/{x.denominator}", "decimal": float(x)}


def instance_to_dict(inst: Instance) -> dict:
    return {
        "agents": inst.n_agents,
        "kind": inst.kind.value,
        "categories": [
            {"name": c.name or f"C{j}", "items": list(c.items), "q_minus": c.q_minus, "q_plus": c.q_plus}
            for j, c in enumerate(inst.categories)
        ],
        "valuations": [[rat_str(v) for v in row] for row in inst.valuations],
    }


def instance_from_dict(d: dict) -> Instance:
    try:
        cats = tuple(
            Category(tuple(c["items"]), int(c["q_minus"]), int(c["q_plus"]), str(c.get("name", f"C{j}")))
            for j, c in enumerate(d["categories"])
        )
        rows = [[as_fraction(v) for v in row] for row in d["valuations"]]
        kind = Kind(d["kind"]) if "kind" in d else None
        return Instance(int(d["agents"]), cats, rows, kind)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"bad instance file: {exc}") from exc


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"cannot read {path}: {exc}") from exc
    return instance_from_dict(data)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def save_instance(inst: Instance, path) -> None:
    dump_json(instance_to_dict(inst), path)


def allocation_to_dict(alloc: Allocation) -> dict:
    return {"bundles": [list(b) for b in alloc.bundles]}


def load_allocation(path) -> Allocation:
    try:
        data = json.loads(Path(path).read_text())
        return Allocation(data["bundles"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InstanceError(f"bad allocation file {path}: {exc}") from exc
