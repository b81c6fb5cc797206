"""JSON model documents and the bundled example instances.

A model document looks like::

    {
      "name": "single-bond Ising",
      "spin_space": {"q": 2},
      "sites": 2,
      "bonds": [[0, 1]],
      "slots": [{"bond": [0, 1], "m": 1, "x": 1.0}],
      "trial": [{"site": 0, "m": 1, "x": 0.5}],
      "seed": 12345
    }

``slots`` lists every coupling with its standardized strength ``x``; a site
slot ``{"site": i, ...}`` declares a one-body term.  ``trial`` (optional) is
a one-body trial field for the variational suites, ``beta`` (optional) the
inverse temperature for the mean-field suite.  Angles are in radians.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigurationError
from .model import BondGraph, ModelSpec, NishimoriParams, Slot, SpinSpace
from .variational import TrialField

BUNDLED = {
    "single_bond_ising": "single_bond_ising.json",
    "z3_chain": "z3_chain.json",
    "ising_ring4": "ising_ring4.json",
    "z4_triangle": "z4_triangle.json",
    "potts8_bond": "potts8_bond.json",
}


@lru_cache(maxsize=None)
def schema(kind: str) -> dict:
    """Shipped JSON schema, ``kind`` in {"model", "report"}."""
    text = resources.files("gaugeglass").joinpath("schemas", f"{kind}.schema.json").read_text()
    return json.loads(text)


def _where(error: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in error.absolute_path)
    return path or "<root>"


def validate_report(report: dict) -> None:
    try:
        jsonschema.validate(report, schema("report"))
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"report invalid at {_where(exc)}: {exc.message}") from None


@dataclass(frozen=True)
class ModelDocument:
    model: ModelSpec
    params: NishimoriParams
    trial: TrialField | None
    seed: int | None
    beta: float | None
    source: dict


def parse_model(doc: dict, origin: str = "<document>") -> ModelDocument:
    """Validate a decoded document and build the model objects."""
    try:
        jsonschema.validate(doc, schema("model"))
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"{origin}: at {_where(exc)}: {exc.message}") from None
    try:
        slots, x = [], {}
        for n, item in enumerate(doc["slots"]):
            s = Slot.bond(*item["bond"], item["m"]) if "bond" in item else Slot.site(item["site"], item["m"])
            if s in x:
                raise ConfigurationError(f"at slots/{n}: duplicate slot {s.label}")
            slots.append(s)
            x[s] = item["x"]
        one_body = sorted({s.sites[0] for s in slots if not s.is_bond})
        graph = BondGraph(doc["sites"], tuple(tuple(b) for b in doc["bonds"]), tuple(one_body))
        model = ModelSpec(SpinSpace(doc["spin_space"]["q"]), graph, tuple(slots), doc.get("name", ""))
        params = NishimoriParams(x)
        trial = None
        if "trial" in doc:
            trial = TrialField({Slot.site(t["site"], t["m"]): t["x"] for t in doc["trial"]})
            trial.validate(model)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{origin}: {exc}") from None
    return ModelDocument(model, params, trial, doc.get("seed"), doc.get("beta"), doc)


def load_model(path: str | Path) -> ModelDocument:
    """Read a model document from ``path`` or a bundled instance name."""
    name = str(path)
    if name in BUNDLED:
        text = resources.files("gaugeglass").joinpath("data", BUNDLED[name]).read_text()
        origin = f"bundled:{name}"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"{name}: cannot read model document ({exc.strerror})") from None
        origin = name
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{origin}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})") from None
    return parse_model(doc, origin)


def bundled_models() -> dict[str, ModelDocument]:
    return {name: load_model(name) for name in BUNDLED}
