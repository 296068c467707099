"""JSON reading and writing. Rationals travel as ``"p/q"`` strings."""

from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Any, Sequence

from .model import Allocation, Distribution, Instance, InvalidDistribution

_RATIONAL = re.compile(r"[+-]?\d+(/\d+)?")


class FormatError(ValueError):
    """Malformed input. The message names where the problem is."""


def parse_rational(text: Any, where: str = "value") -> Fraction:
    if not isinstance(text, str) or not _RATIONAL.fullmatch(text.strip()):
        raise FormatError(f"{where}: expected a rational string like \"3/4\", got {text!r}")
    num, _, den = text.strip().partition("/")
    if den and int(den) == 0:
        raise FormatError(f"{where}: zero denominator in {text!r}")
    return Fraction(int(num), int(den) if den else 1)


def format_rational(value: Fraction) -> str:
    return str(Fraction(value))


def _loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def instance_from_obj(obj: Any) -> Instance:
    if not isinstance(obj, dict) or not isinstance(obj.get("agents"), list):
        raise FormatError("top level: expected an object with an \"agents\" list")
    agents = obj["agents"]
    if not agents:
        raise FormatError("agents: at least one agent is required")
    rows: list[tuple[Fraction, ...]] = []
    names: list[str] = []
    for i, agent in enumerate(agents):
        if not isinstance(agent, dict) or not isinstance(agent.get("values"), list):
            raise FormatError(f"agents[{i}]: expected an object with a \"values\" list")
        row = []
        for x, raw in enumerate(agent["values"]):
            v = parse_rational(raw, f"agents[{i}].values[{x}]")
            if v < 0:
                raise FormatError(f"agents[{i}].values[{x}]: negative value {raw!r}")
            row.append(v)
        if rows and len(row) != len(rows[0]):
            raise FormatError(f"agents[{i}].values: has {len(row)} entries, expected {len(rows[0])}")
        rows.append(tuple(row))
        names.append(str(agent.get("name", f"agent{i}")))
    has_names = any("name" in a for a in agents)
    goods = obj.get("goods")
    if goods is not None:
        if not isinstance(goods, list) or len(goods) != len(rows[0]):
            raise FormatError("goods: expected one name per good")
        goods = tuple(str(g) for g in goods)
    return Instance(tuple(rows), tuple(names) if has_names else None, goods)


def instance_to_obj(instance: Instance) -> dict[str, Any]:
    agents = []
    for i, row in enumerate(instance.valuations):
        entry: dict[str, Any] = {}
        if instance.agent_names is not None:
            entry["name"] = instance.agent_names[i]
        entry["values"] = [format_rational(v) for v in row]
        agents.append(entry)
    obj: dict[str, Any] = {"agents": agents}
    if instance.good_names is not None:
        obj["goods"] = list(instance.good_names)
    return obj


def load_instance(text: str) -> Instance:
    return instance_from_obj(_loads(text))


def save_instance(instance: Instance) -> str:
    return json.dumps(instance_to_obj(instance))


def distribution_to_obj(dist: Distribution) -> dict[str, Any]:
    return {
        "support": [
            {"prob": format_rational(p), "bundles": a.as_lists()} for p, a in dist.entries
        ]
    }


def distribution_from_obj(obj: Any, m: int | None = None) -> Distribution:
    if not isinstance(obj, dict) or not isinstance(obj.get("support"), list):
        raise FormatError("top level: expected an object with a \"support\" list")
    entries = []
    for k, entry in enumerate(obj["support"]):
        if not isinstance(entry, dict) or not isinstance(entry.get("bundles"), list):
            raise FormatError(f"support[{k}]: expected an object with \"prob\" and \"bundles\"")
        prob = parse_rational(entry.get("prob"), f"support[{k}].prob")
        bundles = []
        for i, bundle in enumerate(entry["bundles"]):
            if not isinstance(bundle, list) or not all(
                isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in bundle
            ):
                raise FormatError(f"support[{k}].bundles[{i}]: expected a list of good indices")
            bundles.append(frozenset(bundle))
        entries.append((prob, Allocation(tuple(bundles))))
    if not entries:
        raise FormatError("support: empty")
    if m is None:
        m = 1 + max((x for _, a in entries for b in a.bundles for x in b), default=-1)
    try:
        return Distribution(tuple(entries), m)
    except (InvalidDistribution, ValueError) as exc:
        raise FormatError(f"support: {exc}") from None


def save_distribution(dist: Distribution) -> str:
    return json.dumps(distribution_to_obj(dist))


def load_distribution(text: str, m: int | None = None) -> Distribution:
    return distribution_from_obj(_loads(text), m)


def matrix_to_obj(f: Sequence[Sequence[Fraction]]) -> list[list[str]]:
    return [[format_rational(v) for v in row] for row in f]
