"""Multi-replica thermal averages.

A replica pattern is a product of factors ``cos``/``sin`` of a slot's
harmonic angle taken in one replica, ``a_s^r``, or as a replica difference,
``a_s^r - a_s^r'``.  Replicas share the disorder, so at fixed disorder the
replicated Gibbs measure is a product measure.  Two evaluation routes are
provided and are meant to check each other:

* ``direct``: sum over the full ``C**k`` replicated configuration space;
* ``factorized``: expand the trigonometric differences and use
  ``<f(1) g(2)>_{1,2} = <f><g>``.

Replica labels are 1-based, as is customary.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError
from .model import (
    DEFAULT_ENUMERATION_CAP,
    DisorderSample,
    GibbsBatch,
    ModelSpec,
    NishimoriParams,
    Slot,
    coupling_arrays,
    gibbs_batch,
)

MAX_REPLICAS = 4
DEFAULT_REPLICA_CAP = 2**22


@dataclass(frozen=True)
class Factor:
    fn: str
    slot: Slot
    replicas: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.fn not in ("cos", "sin"):
            raise ConfigurationError(f"factor function must be cos or sin, got {self.fn!r}")
        reps = tuple(int(r) for r in self.replicas)
        if len(reps) not in (1, 2) or min(reps) < 1:
            raise ConfigurationError(f"factor replicas must be (r,) or (r, r') with r >= 1, got {self.replicas!r}")
        if len(reps) == 2 and reps[0] == reps[1]:
            raise ConfigurationError("a replica difference needs two distinct replicas")
        object.__setattr__(self, "replicas", reps)

    def __str__(self) -> str:
        reps = "-".join(map(str, self.replicas))
        return f"{self.fn}[{self.slot.label}]({reps})"


def cos(slot: Slot, *replicas: int) -> Factor:
    return Factor("cos", slot, replicas or (1,))


def sin(slot: Slot, *replicas: int) -> Factor:
    return Factor("sin", slot, replicas or (1,))


@dataclass(frozen=True)
class ReplicaPattern:
    factors: tuple[Factor, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ConfigurationError("empty replica pattern")
        if self.arity > MAX_REPLICAS:
            raise ConfigurationError(f"patterns use at most {MAX_REPLICAS} replicas, got {self.arity}")

    @classmethod
    def of(cls, *factors: Factor) -> "ReplicaPattern":
        return cls(tuple(factors))

    @property
    def arity(self) -> int:
        return max(max(f.replicas) for f in self.factors)

    def __str__(self) -> str:
        return " ".join(map(str, self.factors))

    def expand(self) -> list[tuple[float, tuple[tuple[tuple[str, Slot], ...], ...]]]:
        """Sum of products of single-replica monomials.

        Returns ``[(coef, (mono_1, ..., mono_k)), ...]`` where ``mono_r`` is a
        sorted tuple of ``(fn, slot)`` evaluated in replica ``r``.
        """
        k = self.arity
        terms: dict[tuple, float] = {tuple(() for _ in range(k)): 1.0}
        for f in self.factors:
            pieces = _factor_terms(f)
            nxt: dict[tuple, float] = defaultdict(float)
            for monos, coef in terms.items():
                for c, assign in pieces:
                    new = list(monos)
                    for r, item in assign:
                        new[r - 1] = tuple(sorted(new[r - 1] + (item,)))
                    nxt[tuple(new)] += coef * c
            terms = {m: c for m, c in nxt.items() if c != 0.0}
        return [(c, m) for m, c in sorted(terms.items(), key=lambda t: repr(t[0]))]


def _factor_terms(f: Factor):
    s = f.slot
    if len(f.replicas) == 1:
        return [(1.0, [(f.replicas[0], (f.fn, s))])]
    a, b = f.replicas
    if f.fn == "cos":
        # cos(A - B) = cos A cos B + sin A sin B
        return [(1.0, [(a, ("cos", s)), (b, ("cos", s))]), (1.0, [(a, ("sin", s)), (b, ("sin", s))])]
    # sin(A - B) = sin A cos B - cos A sin B
    return [(1.0, [(a, ("sin", s)), (b, ("cos", s))]), (-1.0, [(a, ("cos", s)), (b, ("sin", s))])]


def factorized_average(batch: GibbsBatch, pattern: ReplicaPattern) -> np.ndarray:
    """Replica average per disorder realization via single-replica moments."""
    moments: dict[tuple, np.ndarray] = {}
    total = np.zeros(len(batch))
    for coef, monos in pattern.expand():
        term = np.full(len(batch), coef)
        for mono in monos:
            if not mono:
                continue
            if mono not in moments:
                moments[mono] = batch.monomial(mono)
            term = term * moments[mono]
        total += term
    return total


def direct_average(
    model: ModelSpec,
    prob: np.ndarray,
    pattern: ReplicaPattern,
    cap: int = DEFAULT_REPLICA_CAP,
) -> float:
    """Replica average by summing over the ``C**k`` replicated configurations."""
    k = pattern.arity
    n_joint = model.n_configs**k
    if n_joint > cap:
        raise CapacityError(f"replicated space q^(kN) = {model.q}^{k * model.n_sites} = {n_joint} exceeds cap {cap}")
    c = model.n_configs
    c_tab, s_tab = model.space.unit_circle
    value = np.ones((c,) * k)
    for f in pattern.factors:
        res = model.residues[model.slot_index(f.slot)]
        angle = np.zeros((1,) * k, dtype=np.int64)
        for sign, r in zip((1, -1), f.replicas):
            shape = [1] * k
            shape[r - 1] = c
            angle = angle + sign * res.reshape(shape)
        table = c_tab if f.fn == "cos" else s_tab
        value = value * table[angle % model.q]
    weight = np.ones((1,) * k)
    for r in range(k):
        shape = [1] * k
        shape[r] = c
        weight = weight * prob.reshape(shape)
    return float(np.sum(weight * value))


def replica_correlator(
    model: ModelSpec,
    params: NishimoriParams,
    sample: DisorderSample,
    pattern: ReplicaPattern | Sequence[Factor],
    path: str = "factorized",
    cap: int = DEFAULT_ENUMERATION_CAP,
    replica_cap: int = DEFAULT_REPLICA_CAP,
) -> float:
    """Multi-replica thermal average at one disorder realization."""
    if not isinstance(pattern, ReplicaPattern):
        pattern = ReplicaPattern(tuple(pattern))
    for f in pattern.factors:
        model.slot_index(f.slot)
    amp, mean = coupling_arrays(model, params)
    j, k = sample.arrays(model)
    batch = gibbs_batch(model, amp, mean, j[None, :], k[None, :], cap)
    if path == "factorized":
        return float(factorized_average(batch, pattern)[0])
    if path == "direct":
        return direct_average(model, batch.prob[0], pattern, replica_cap)
    raise ConfigurationError(f"unknown evaluation path {path!r}")


__all__ = [
    "Factor",
    "ReplicaPattern",
    "cos",
    "sin",
    "factorized_average",
    "direct_average",
    "replica_correlator",
]
