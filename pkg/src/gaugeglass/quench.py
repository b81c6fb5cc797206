"""Quenched (disorder) averages over the standardized Gaussian pairs.

Two integration methods share one engine:

* :class:`Quadrature`: a tensor product rule over the Gaussian dimensions
  that actually influence the integrand.  ``rule="trapezoid"`` is the
  Gaussian-weighted trapezoid rule on ``[-L, L]``, which converges
  geometrically for the analytic-in-a-strip integrands met here (log Z and
  its correlators have complex singularities close to the real axis at
  large ``x``); ``rule="hermite"`` is classical Gauss-Hermite.
* :class:`MonteCarlo`: iid draws from counter-based Philox streams keyed by
  ``(seed, slot, role)``; sample ``n`` of a stream is addressable without
  generating the ones before it.  Error bars are batch means.

All reductions run over a fixed chunk partition in a fixed order, so results
do not depend on the worker count (``GAUGEGLASS_WORKERS``).
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import ndtri

from .errors import CapacityError, ConfigurationError, NumericalError
from .model import (
    DEFAULT_ENUMERATION_CAP,
    GibbsBatch,
    ModelSpec,
    NishimoriParams,
    coupling_arrays,
    gibbs_batch,
)

QUADRATURE_CAP = 10**7
AUTO_NODE_BUDGET = 4_000_000
AUTO_MAX_NODES = 128
AUTO_MIN_NODES = 8
TRAPEZOID_HALF_WIDTH = 8.875  # exp(-L^2/2) ~ 1e-17
TRAPEZOID_WIDTH_SCALE = 0.9  # coarse grids trade tail coverage for spacing
CHUNK_ELEMENTS = 2**21
MIN_BATCHES = 16
WORKERS_ENV = "GAUGEGLASS_WORKERS"

ROLE_J, ROLE_K = 0, 1


@dataclass(frozen=True)
class Quadrature:
    """Tensor quadrature; ``nodes_per_dim=None`` picks the largest count
    (at most 128) whose grid fits ``AUTO_NODE_BUDGET``."""

    nodes_per_dim: int | None = None
    rule: str = "trapezoid"

    def __post_init__(self) -> None:
        if self.rule not in ("trapezoid", "hermite"):
            raise ConfigurationError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes_per_dim is not None and self.nodes_per_dim < 2:
            raise ConfigurationError("nodes_per_dim must be >= 2")

    @property
    def kind(self) -> str:
        return "quadrature"

    def describe(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class MonteCarlo:
    n_samples: int
    seed: int
    n_batches: int = MIN_BATCHES

    def __post_init__(self) -> None:
        if self.n_batches < MIN_BATCHES:
            raise ConfigurationError(f"batch-means errors need at least {MIN_BATCHES} batches")
        if self.n_samples < 2 * self.n_batches:
            raise ConfigurationError(f"need at least {2 * self.n_batches} samples")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def kind(self) -> str:
        return "mc"

    def describe(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


QuenchMethod = Union[Quadrature, MonteCarlo]


@dataclass(frozen=True)
class QuenchedEstimate:
    value: float
    std_error: float
    method: QuenchMethod
    n_effective: int
    #: quadrature only: |value(nodes) - value(nodes // 2)|
    convergence: float | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method.describe(),
            "n_effective": self.n_effective,
            "convergence": self.convergence,
        }

    def __sub__(self, other: "QuenchedEstimate") -> float:
        return self.value - other.value


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


def stream_key(seed: int, slot_index: int, role: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed), int(slot_index), int(role)]).generate_state(2, np.uint64)


def normal_stream(seed: int, slot_index: int, role: int, start: int, count: int) -> np.ndarray:
    """Standard normals ``start .. start+count-1`` of one disorder stream."""
    bitgen = np.random.Philox(key=stream_key(seed, slot_index, role))
    block, offset = divmod(int(start), 4)  # one Philox counter step = 4 outputs
    bitgen.advance(block)
    raw = bitgen.random_raw(offset + int(count))[offset:]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _map(fn, items):
    n = workers()
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def active_dimensions(model: ModelSpec, amplitudes: Sequence[np.ndarray]) -> list[tuple[int, int]]:
    """``(slot_index, role)`` pairs the integrand depends on.

    A slot with zero amplitude in every parameter set is inert, and so is
    the K channel of a slot whose sine table vanishes (e.g. Ising); both
    are integrated exactly by a single node.
    """
    amp = np.max(np.abs(np.vstack(amplitudes)), axis=0) if len(amplitudes) else np.zeros(0)
    dims = []
    for n in range(len(model.slots)):
        if amp[n] == 0.0:
            continue
        dims.append((n, ROLE_J))
        if np.any(model.sin_table[n] != 0.0):
            dims.append((n, ROLE_K))
    return dims


def quadrature_rule(n: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(Z)], Z ~ N(0, 1); weights sum to 1."""
    if rule == "hermite":
        z, w = hermegauss(n)
    else:
        half = min(TRAPEZOID_HALF_WIDTH, TRAPEZOID_WIDTH_SCALE * math.sqrt(n))
        z = np.linspace(-half, half, n)
        w = np.exp(-0.5 * z * z)
    return z, w / math.fsum(w)


def resolve_nodes(method: Quadrature, d: int) -> int:
    if method.nodes_per_dim is not None:
        n = method.nodes_per_dim
    elif d == 0:
        n = AUTO_MAX_NODES
    else:
        n = min(AUTO_MAX_NODES, int(math.floor(AUTO_NODE_BUDGET ** (1.0 / d) + 1e-9)))
        if n < AUTO_MIN_NODES:
            raise CapacityError(
                f"{d} active disorder dimensions leave {n} nodes per dimension; use Monte Carlo"
            )
    if n**d > QUADRATURE_CAP:
        raise CapacityError(
            f"quadrature grid {n}^{d} = {n**d} nodes exceeds {QUADRATURE_CAP}; use Monte Carlo"
        )
    return n


# fn(batches, j, k) -> (B, n_out); one GibbsBatch per coupling set
BatchFunction = Callable[[list[GibbsBatch], np.ndarray, np.ndarray], np.ndarray]


def _evaluate(model, couplings, fn, j, k, cap):
    batches = [gibbs_batch(model, amp, mean, j, k, cap) for amp, mean in couplings]
    out = np.asarray(fn(batches, j, k), dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    bad = ~np.all(np.isfinite(out), axis=1)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise NumericalError(f"non-finite observable at disorder J={j[row].tolist()} K={k[row].tolist()}")
    return out


def _chunk_size(model: ModelSpec, n_sets: int) -> int:
    return max(1, CHUNK_ELEMENTS // (model.n_configs * max(1, n_sets)))


def _quadrature_pass(model, couplings, fn, dims, n, rule, cap):
    z, w = quadrature_rule(n, rule)
    d = len(dims)
    total = n**d
    size = _chunk_size(model, len(couplings))
    n_slots = len(model.slots)

    def work(start):
        stop = min(total, start + size)
        idx = np.arange(start, stop)
        digits = np.unravel_index(idx, (n,) * d) if d else ()
        j = np.zeros((len(idx), n_slots))
        k = np.zeros((len(idx), n_slots))
        weight = np.ones(len(idx))
        for (slot, role), dig in zip(dims, digits):
            (j if role == ROLE_J else k)[:, slot] = z[dig]
            weight = weight * w[dig]
        f = _evaluate(model, couplings, fn, j, k, cap)
        return weight @ f

    partials = _map(work, range(0, total, size))
    return np.array([math.fsum(col) for col in np.array(partials).T]), total


def _monte_carlo_pass(model, couplings, fn, dims, method, cap, raw_csv, names):
    n = method.n_samples
    size = _chunk_size(model, len(couplings))
    n_slots = len(model.slots)

    def work(start):
        stop = min(n, start + size)
        j = np.zeros((stop - start, n_slots))
        k = np.zeros((stop - start, n_slots))
        for slot, role in dims:
            (j if role == ROLE_J else k)[:, slot] = normal_stream(method.seed, slot, role, start, stop - start)
        return _evaluate(model, couplings, fn, j, k, cap), j, k

    chunks = _map(work, range(0, n, size))
    values = np.concatenate([c[0] for c in chunks])
    if raw_csv is not None:
        _write_raw(raw_csv, model, dims, names, chunks)
    means = np.array([math.fsum(col) / n for col in values.T])
    batches = np.array_split(values, method.n_batches)
    bmeans = np.array([[math.fsum(col) / len(b) for col in b.T] for b in batches])
    se = bmeans.std(axis=0, ddof=1) / math.sqrt(method.n_batches)
    return means, se


def _write_raw(path, model, dims, names, chunks):
    roles = "JK"
    header = ["sample"] + [f"{roles[r]}[{model.slots[s].label}]" for s, r in dims] + list(names)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        row = 0
        for values, j, k in chunks:
            for b in range(len(values)):
                draws = [(j if r == ROLE_J else k)[b, s] for s, r in dims]
                out.writerow([row] + [repr(float(v)) for v in draws] + [repr(float(v)) for v in values[b]])
                row += 1


def quenched_functional(
    model: ModelSpec,
    params_list: Sequence[NishimoriParams],
    fn: BatchFunction,
    names: Sequence[str],
    method: QuenchMethod | None = None,
    *,
    bias_factor: float = 1.0,
    cap: int = DEFAULT_ENUMERATION_CAP,
    raw_csv: str | os.PathLike | None = None,
    convergence_check: bool = True,
) -> dict[str, QuenchedEstimate]:
    """Disorder average of a vector functional of several Gibbs measures.

    Every parameter set in ``params_list`` sees the same disorder nodes or
    draws, so any column of ``fn`` that combines them (finite differences,
    lhs - rhs) gets a correctly correlated error bar.
    """
    method = method or Quadrature()
    if not params_list:
        raise ConfigurationError("need at least one parameter set")
    slot_sets = [set(p.x) for p in params_list]
    if any(s != slot_sets[0] for s in slot_sets):
        raise ConfigurationError("parameter sets cover different slots")
    model.check_enumerable(cap)
    couplings = [coupling_arrays(model, p, bias_factor) for p in params_list]
    dims = active_dimensions(model, [c[0] for c in couplings])
    names = list(names)
    if isinstance(method, Quadrature):
        nodes = resolve_nodes(method, len(dims))
        values, total = _quadrature_pass(model, couplings, fn, dims, nodes, method.rule, cap)
        if len(values) != len(names):
            raise ConfigurationError(f"functional returned {len(values)} columns for {len(names)} names")
        conv = np.full(len(values), np.nan)
        if convergence_check and dims:
            coarse, _ = _quadrature_pass(model, couplings, fn, dims, max(2, nodes // 2), method.rule, cap)
            conv = np.abs(values - coarse)
        elif convergence_check:
            conv = np.zeros(len(values))
        used = Quadrature(nodes, method.rule)
        return {
            name: QuenchedEstimate(
                float(v), 0.0, used, total, None if math.isnan(c) else float(c)
            )
            for name, v, c in zip(names, values, conv)
        }
    if isinstance(method, MonteCarlo):
        values, se = _monte_carlo_pass(model, couplings, fn, dims, method, cap, raw_csv, names)
        if len(values) != len(names):
            raise ConfigurationError(f"functional returned {len(values)} columns for {len(names)} names")
        return {
            name: QuenchedEstimate(float(v), float(s), method, method.n_samples)
            for name, v, s in zip(names, values, se)
        }
    raise ConfigurationError(f"unknown quench method {method!r}")


Observable = Callable[[GibbsBatch], np.ndarray]


def log_z(batch: GibbsBatch) -> np.ndarray:
    return batch.log_z


def quenched_averages(
    model: ModelSpec,
    params: NishimoriParams,
    observables: Mapping[str, Observable],
    method: QuenchMethod | None = None,
    **kw,
) -> dict[str, QuenchedEstimate]:
    """Several observables from one pass over the disorder."""
    obs = list(observables.values())

    def fn(batches, j, k):
        return np.column_stack([o(batches[0]) for o in obs])

    return quenched_functional(model, [params], fn, list(observables), method, **kw)


def quenched_average(
    model: ModelSpec,
    params: NishimoriParams,
    observable: Observable,
    method: QuenchMethod | None = None,
    **kw,
) -> QuenchedEstimate:
    return quenched_averages(model, params, {"value": observable}, method, **kw)["value"]


def quenched_pressure(
    model: ModelSpec, params: NishimoriParams, method: QuenchMethod | None = None, **kw
) -> QuenchedEstimate:
    """``P = E[log Z]``."""
    return quenched_average(model, params, log_z, method, **kw)


def common_random_numbers(
    model: ModelSpec,
    params_list: Sequence[NishimoriParams],
    method: QuenchMethod,
    observable: Observable = log_z,
    **kw,
) -> list[QuenchedEstimate]:
    """One estimate per parameter set, all from identical disorder draws."""
    names = [f"p{n}" for n in range(len(params_list))]

    def fn(batches, j, k):
        return np.column_stack([observable(b) for b in batches])

    out = quenched_functional(model, list(params_list), fn, names, method, **kw)
    return [out[n] for n in names]


def crn_combination(
    model: ModelSpec,
    params_list: Sequence[NishimoriParams],
    coefficients: Sequence[float],
    method: QuenchMethod,
    observable: Observable = log_z,
    **kw,
) -> QuenchedEstimate:
    """``E[sum_k c_k f(params_k)]`` with common draws and a matching error bar."""
    coef = np.asarray(coefficients, dtype=float)
    if len(coef) != len(params_list):
        raise ConfigurationError("one coefficient per parameter set")

    def fn(batches, j, k):
        return sum(c * observable(b) for c, b in zip(coef, batches))

    return quenched_functional(model, list(params_list), fn, ["combo"], method, **kw)["combo"]
