"""Gauge correlation identities on the Nishimori line.

Each identity equates the disorder averages of two replica patterns.  Both
sides are evaluated from the same disorder nodes/draws, and the verdict is
taken on the per-realization difference, so Monte Carlo error bars on
``lhs - rhs`` are the correlated ones.  The identities only hold after the
disorder average; nothing here asserts them sample by sample.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .model import DEFAULT_ENUMERATION_CAP, ModelSpec, NishimoriParams, Slot
from .quench import MonteCarlo, QuenchedEstimate, QuenchMethod, quenched_functional
from .replicas import ReplicaPattern, cos, factorized_average

IDENTITY_IDS = ("I1", "I2", "I3", "I4", "I5")
QUADRATURE_TOL = 1e-8
MC_SIGMAS = 3.0
# identities that hold per realization leave only rounding noise with a vanishing error bar
ROUNDING_FLOOR = 1e-12
MAX_SLOT_PAIRS = 20


def identity_patterns(case_id: str, a: Slot, b: Slot | None = None) -> tuple[ReplicaPattern, ReplicaPattern]:
    """``(lhs, rhs)`` replica patterns of identity ``case_id`` for slots a, b."""
    if case_id == "I1":
        return ReplicaPattern.of(cos(a, 1)), ReplicaPattern.of(cos(a, 1, 2))
    if b is None:
        raise ConfigurationError(f"{case_id} needs two slots")
    if case_id == "I2":
        return (
            ReplicaPattern.of(cos(a, 1), cos(b, 1)),
            ReplicaPattern.of(cos(a, 1, 2), cos(b, 1, 2)),
        )
    if case_id == "I3":
        return (
            ReplicaPattern.of(cos(a, 1), cos(b, 2)),
            ReplicaPattern.of(cos(a, 1, 3), cos(b, 1, 2)),
        )
    if case_id == "I4":
        return (
            ReplicaPattern.of(cos(a, 1), cos(b, 1, 2)),
            ReplicaPattern.of(cos(a, 1, 3), cos(b, 1, 2)),
        )
    if case_id == "I5":
        return (
            ReplicaPattern.of(cos(a, 1), cos(b, 2, 3)),
            ReplicaPattern.of(cos(a, 1, 4), cos(b, 2, 3)),
        )
    raise ConfigurationError(f"unknown identity {case_id!r}; expected one of {IDENTITY_IDS}")


@dataclass
class IdentityCase:
    id: str
    slots: tuple[Slot, ...]
    lhs: QuenchedEstimate
    rhs: QuenchedEstimate
    difference: QuenchedEstimate
    tolerance: float
    passed: bool
    weak: bool = False
    bias_factor: float = 1.0
    control: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def gap(self) -> float:
        return abs(self.difference.value)

    def to_dict(self) -> dict:
        return {
            "kind": "identity",
            "id": self.id,
            "slots": [s.label for s in self.slots],
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "difference": self.difference.to_dict(),
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "weak": self.weak,
            "bias_factor": self.bias_factor,
            "control": self.control,
            "notes": list(self.notes),
        }


def _tolerance(diff: QuenchedEstimate, tol: float | None) -> float:
    if tol is not None:
        return tol
    if isinstance(diff.method, MonteCarlo):
        return max(MC_SIGMAS * diff.std_error, ROUNDING_FLOOR)
    return QUADRATURE_TOL


def _slot_spec(model, case_id, slot_choice):
    slots = tuple(slot_choice)
    if not slots:
        raise ConfigurationError("empty slot choice")
    for s in slots:
        model.slot_index(s)
    a = slots[0]
    if case_id == "I1":
        return (a,)
    return (a, slots[1] if len(slots) > 1 else a)


def check_identities(
    model: ModelSpec,
    params: NishimoriParams,
    cases: Sequence[tuple[str, Sequence[Slot]]],
    method: QuenchMethod | None = None,
    *,
    bias_factor: float = 1.0,
    tol: float | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[IdentityCase]:
    """Several ``(case_id, slot_choice)`` checks from one pass over the disorder."""
    specs = [(cid, _slot_spec(model, cid, slots)) for cid, slots in cases]
    patterns = [identity_patterns(cid, *used) for cid, used in specs]

    def fn(batches, j, k):
        cols = []
        for lhs_p, rhs_p in patterns:
            left = factorized_average(batches[0], lhs_p)
            right = factorized_average(batches[0], rhs_p)
            cols += [left, right, left - right]
        return np.column_stack(cols)

    names = [f"{n}:{part}" for n in range(len(specs)) for part in ("lhs", "rhs", "diff")]
    est = quenched_functional(model, [params], fn, names, method, bias_factor=bias_factor, cap=cap)
    out = []
    for n, (cid, used) in enumerate(specs):
        diff = est[f"{n}:diff"]
        tolerance = _tolerance(diff, tol)
        weak = any(params.x[s] == 0.0 for s in used)
        out.append(
            IdentityCase(
                id=cid,
                slots=used,
                lhs=est[f"{n}:lhs"],
                rhs=est[f"{n}:rhs"],
                difference=diff,
                tolerance=tolerance,
                passed=abs(diff.value) <= tolerance,
                weak=weak,
                bias_factor=float(bias_factor),
                control=bias_factor != 1.0,
                notes=["slot with x = 0: identity is degenerate"] if weak else [],
            )
        )
    return out


def check_identity(
    model: ModelSpec,
    params: NishimoriParams,
    case_id: str,
    slot_choice: Sequence[Slot],
    method: QuenchMethod | None = None,
    *,
    tol: float | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> IdentityCase:
    """Disorder-averaged identity ``case_id`` for the chosen slot(s)."""
    return check_identities(model, params, [(case_id, slot_choice)], method, tol=tol, cap=cap)[0]


def off_line_control(
    model: ModelSpec,
    params: NishimoriParams,
    case_id: str,
    slot_choice: Sequence[Slot],
    bias_factor: float,
    method: QuenchMethod | None = None,
    *,
    tol: float | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> IdentityCase:
    """Same check with the Gaussian mean moved to ``D / sigma^2 = bias_factor * beta``.

    A violation is the expected outcome here; ``passed`` still reports
    whether the identity held numerically.
    """
    if not bias_factor > 0:
        raise ConfigurationError("bias_factor must be positive")
    return check_identities(
        model, params, [(case_id, slot_choice)], method, bias_factor=bias_factor, tol=tol, cap=cap
    )[0]


def default_slot_pairs(model: ModelSpec, params: NishimoriParams, limit: int = MAX_SLOT_PAIRS):
    """Ordered pairs of active slots (x > 0), diagonal included, truncated."""
    active = [s for s in model.slots if params.x.get(s, 0.0) > 0.0] or list(model.slots)
    return list(itertools.islice(itertools.product(active, repeat=2), limit))


def run_identities(
    model: ModelSpec,
    params: NishimoriParams,
    method: QuenchMethod | None = None,
    case_ids: Sequence[str] = IDENTITY_IDS,
    slot_pairs=None,
    tol: float | None = None,
) -> list[IdentityCase]:
    pairs = slot_pairs if slot_pairs is not None else default_slot_pairs(model, params)
    cases = []
    for cid in case_ids:
        if cid == "I1":
            cases += [(cid, (a,)) for a in dict.fromkeys(p[0] for p in pairs)]
        else:
            cases += [(cid, pair) for pair in pairs]
    return check_identities(model, params, cases, method, tol=tol)
