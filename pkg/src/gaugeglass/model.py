"""Spin spaces, bond graphs and exact Gibbs measures by enumeration.

Everything is expressed in the standardized Nishimori-line form.  Each
coupling slot ``s`` (a bond ``<ij>`` or a site ``i``, with harmonic ``m``)
carries one parameter ``x_s >= 0`` and a pair of unit Gaussians
``(J_s, K_s)``; the potential is

    U = -sum_s [ sqrt(x_s) J_s cos(a_s) + sqrt(x_s) K_s sin(a_s) + x_s cos(a_s) ]

with ``a_s = m (phi_i - phi_j)`` for a bond and ``a_s = m phi_i`` for a site.
Spins live on Z_q, ``phi = 2 pi k / q``, and configurations are passed
around as integer state indices ``k``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError

DEFAULT_ENUMERATION_CAP = 2**20

#: Relative tolerance of the D / sigma^2 == beta check.
NL_RTOL = 1e-12


# ---------------------------------------------------------------------------
# Spin space
# ---------------------------------------------------------------------------


def _exact_unit_circle(q: int) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin of 2 pi r / q for r = 0..q-1, exact at the quarter turns."""
    r = np.arange(q)
    c = np.cos(2.0 * np.pi * r / q)
    s = np.sin(2.0 * np.pi * r / q)
    for k in range(q):
        if (4 * k) % q:
            continue
        quarter = (4 * k) // q
        c[k], s[k] = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][quarter]
    return c, s


@dataclass(frozen=True)
class SpinSpace:
    """Z_q spin space with the uniform counting measure.

    Ising is ``SpinSpace(2)``; the continuous XY model is approximated by
    ``SpinSpace(q)`` with large ``q``.
    """

    q: int

    def __post_init__(self) -> None:
        if isinstance(self.q, bool) or not isinstance(self.q, (int, np.integer)) or self.q < 2:
            raise ConfigurationError(f"spin space needs an integer q >= 2, got {self.q!r}")
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def ising(cls) -> "SpinSpace":
        return cls(2)

    @classmethod
    def xy(cls, q: int = 16) -> "SpinSpace":
        return cls(q)

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.q) / self.q

    @cached_property
    def unit_circle(self) -> tuple[np.ndarray, np.ndarray]:
        return _exact_unit_circle(self.q)

    def state_of_angle(self, angle: float, atol: float = 1e-9) -> int:
        """Index of the state at ``angle`` (radians); raises if off-lattice."""
        t = float(angle) * self.q / (2.0 * np.pi)
        k = round(t)
        if not math.isfinite(t) or abs(t - k) > atol * max(1.0, self.q):
            raise ConfigurationError(f"angle {angle!r} is not a Z_{self.q} state")
        return k % self.q


# ---------------------------------------------------------------------------
# Graph and slots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BondGraph:
    n_sites: int
    bonds: tuple[tuple[int, int], ...]
    one_body_sites: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 1:
            raise ConfigurationError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        bonds = tuple((int(i), int(j)) for i, j in self.bonds)
        seen = set()
        for i, j in bonds:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ConfigurationError(f"bond ({i}, {j}) has an endpoint outside 0..{self.n_sites - 1}")
            if i == j:
                raise ConfigurationError(f"bond ({i}, {j}) is a self-loop")
            key = frozenset((i, j))
            if key in seen:
                raise ConfigurationError(f"duplicate bond ({i}, {j})")
            seen.add(key)
        sites = tuple(int(i) for i in self.one_body_sites)
        for i in sites:
            if not 0 <= i < self.n_sites:
                raise ConfigurationError(f"one-body site {i} outside 0..{self.n_sites - 1}")
        if len(set(sites)) != len(sites):
            raise ConfigurationError("duplicate one-body site")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "bonds", bonds)
        object.__setattr__(self, "one_body_sites", sites)

    @classmethod
    def chain(cls, n: int, **kw) -> "BondGraph":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)), **kw)

    @classmethod
    def ring(cls, n: int, **kw) -> "BondGraph":
        if n < 3:
            raise ConfigurationError("a ring needs at least 3 sites")
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)), **kw)

    @classmethod
    def complete(cls, n: int, **kw) -> "BondGraph":
        return cls(n, tuple(itertools.combinations(range(n), 2)), **kw)

    def has_bond(self, i: int, j: int) -> bool:
        return (i, j) in self.bonds or (j, i) in self.bonds

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_sites, dtype=int)
        for i, j in self.bonds:
            deg[i] += 1
            deg[j] += 1
        return deg


@dataclass(frozen=True, order=True)
class Slot:
    """A coupling slot: bond ``(i, j)`` or site ``(i,)`` with harmonic ``m``."""

    sites: tuple[int, ...]
    m: int = 1

    def __post_init__(self) -> None:
        sites = tuple(int(i) for i in self.sites)
        if len(sites) not in (1, 2):
            raise ConfigurationError(f"slot must name one site or a bond, got {self.sites!r}")
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 0:
            raise ConfigurationError(f"harmonic must be an integer >= 0, got {self.m!r}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def bond(cls, i: int, j: int, m: int = 1) -> "Slot":
        return cls((i, j), m)

    @classmethod
    def site(cls, i: int, m: int = 1) -> "Slot":
        return cls((i,), m)

    @property
    def is_bond(self) -> bool:
        return len(self.sites) == 2

    @property
    def label(self) -> str:
        where = "-".join(map(str, self.sites))
        return f"{'b' if self.is_bond else 's'}{where}:m{self.m}"

    @classmethod
    def from_label(cls, label: str) -> "Slot":
        try:
            where, m = label.split(":m")
            kind, rest = where[0], where[1:]
            sites = tuple(int(v) for v in rest.split("-"))
            if (kind == "b") != (len(sites) == 2) or kind not in "bs":
                raise ValueError
            return cls(sites, int(m))
        except ValueError:
            raise ConfigurationError(f"bad slot label {label!r}") from None

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ModelSpec:
    """Spin space + bond graph + the explicit, ordered set of coupling slots."""

    space: SpinSpace
    graph: BondGraph
    slots: tuple[Slot, ...]
    name: str = ""

    def __post_init__(self) -> None:
        slots = tuple(self.slots)
        if len(set(slots)) != len(slots):
            raise ConfigurationError("duplicate coupling slot")
        for s in slots:
            if s.is_bond:
                if not self.graph.has_bond(*s.sites):
                    raise ConfigurationError(f"slot {s} is not on a bond of the graph")
            elif s.sites[0] not in self.graph.one_body_sites:
                raise ConfigurationError(f"slot {s} is on a site without one-body terms")
        object.__setattr__(self, "slots", slots)

    @classmethod
    def build(
        cls,
        q: int,
        graph: BondGraph,
        harmonics: Sequence[int] = (1,),
        one_body_harmonics: Sequence[int] = (),
        name: str = "",
    ) -> "ModelSpec":
        """Every bond gets ``harmonics``; every one-body site gets ``one_body_harmonics``."""
        slots = [Slot.bond(i, j, m) for (i, j) in graph.bonds for m in harmonics]
        slots += [Slot.site(i, m) for i in graph.one_body_sites for m in one_body_harmonics]
        return cls(SpinSpace(q), graph, tuple(slots), name)

    @property
    def q(self) -> int:
        return self.space.q

    @property
    def n_sites(self) -> int:
        return self.graph.n_sites

    @property
    def n_configs(self) -> int:
        return self.q**self.n_sites

    @property
    def disorder_dim(self) -> int:
        return 2 * len(self.slots)

    def slot_index(self, slot: Slot) -> int:
        try:
            return self._slot_positions[slot]
        except KeyError:
            raise ConfigurationError(f"slot {slot} is not part of the model") from None

    @cached_property
    def _slot_positions(self) -> dict[Slot, int]:
        return {s: n for n, s in enumerate(self.slots)}

    def check_enumerable(self, cap: int = DEFAULT_ENUMERATION_CAP) -> None:
        if self.n_configs > cap:
            raise CapacityError(
                f"q^N = {self.q}^{self.n_sites} = {self.n_configs} configurations exceeds the cap {cap}"
            )

    @cached_property
    def configurations(self) -> np.ndarray:
        """(C, N) state indices, site 0 most significant."""
        self.check_enumerable(2**24)
        grids = np.indices((self.q,) * self.n_sites).reshape(self.n_sites, -1)
        return np.ascontiguousarray(grids.T)

    @cached_property
    def residues(self) -> np.ndarray:
        """(S, C) integer harmonic angle of each slot in units of 2 pi / q."""
        conf = self.configurations
        out = np.empty((len(self.slots), len(conf)), dtype=np.int64)
        for n, s in enumerate(self.slots):
            k = conf[:, s.sites[0]] - (conf[:, s.sites[1]] if s.is_bond else 0)
            out[n] = (s.m * k) % self.q
        return out

    @cached_property
    def cos_table(self) -> np.ndarray:
        return self.space.unit_circle[0][self.residues]

    @cached_property
    def sin_table(self) -> np.ndarray:
        return self.space.unit_circle[1][self.residues]

    def slot_angle_residue(self, slot: Slot, config: Sequence[int]) -> int:
        k = config[slot.sites[0]] - (config[slot.sites[1]] if slot.is_bond else 0)
        return (slot.m * k) % self.q


# ---------------------------------------------------------------------------
# Parameters and disorder
# ---------------------------------------------------------------------------


def _frozen_slot_map(values: Mapping[Slot, float], what: str) -> Mapping[Slot, float]:
    out = {}
    for s, v in dict(values).items():
        if not isinstance(s, Slot):
            raise ConfigurationError(f"{what} keys must be Slot objects, got {s!r}")
        out[s] = float(v)
    return MappingProxyType(out)


@dataclass(frozen=True, eq=False)
class NishimoriParams:
    """The Nishimori-line parameter ``x = beta D = sigma^2 beta^2`` per slot."""

    x: Mapping[Slot, float]

    def __post_init__(self) -> None:
        x = _frozen_slot_map(self.x, "params")
        for s, v in x.items():
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"x[{s}] = {v!r}; must be finite and >= 0")
        object.__setattr__(self, "x", x)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NishimoriParams) and dict(self.x) == dict(other.x)

    @classmethod
    def uniform(cls, model: ModelSpec, x: float) -> "NishimoriParams":
        return cls({s: x for s in model.slots})

    @classmethod
    def from_vector(cls, model: ModelSpec, values: Iterable[float]) -> "NishimoriParams":
        values = list(values)
        if len(values) != len(model.slots):
            raise ConfigurationError(f"expected {len(model.slots)} values, got {len(values)}")
        return cls(dict(zip(model.slots, values)))

    def vector(self, model: ModelSpec) -> np.ndarray:
        missing = [str(s) for s in model.slots if s not in self.x]
        if missing:
            raise ConfigurationError(f"params missing slots: {', '.join(missing)}")
        return np.array([self.x[s] for s in model.slots], dtype=float)

    def replace(self, slot: Slot, value: float) -> "NishimoriParams":
        x = dict(self.x)
        x[slot] = value
        return NishimoriParams(x)

    def shifted(self, slot: Slot, h: float) -> "NishimoriParams":
        return self.replace(slot, self.x[slot] + h)

    def scaled(self, factor: float) -> "NishimoriParams":
        return NishimoriParams({s: factor * v for s, v in self.x.items()})


@dataclass(frozen=True)
class CanonicalCoupling:
    """Local ``(beta, sigma^2, D)`` triple; accepted at the boundary only."""

    beta: float
    sigma2: float
    mean: float

    def __post_init__(self) -> None:
        if not (self.beta > 0 and self.sigma2 > 0 and self.mean >= 0):
            raise ConfigurationError("need beta > 0, sigma2 > 0, mean >= 0")
        if abs(self.mean / self.sigma2 - self.beta) > NL_RTOL * self.beta:
            raise ConfigurationError(
                f"off the Nishimori line: D/sigma^2 = {self.mean / self.sigma2!r} != beta = {self.beta!r}"
            )

    @classmethod
    def on_line(cls, beta: float, sigma2: float) -> "CanonicalCoupling":
        return cls(beta, sigma2, beta * sigma2)

    @property
    def x(self) -> float:
        return self.beta * self.mean


def params_from_canonical(couplings: Mapping[Slot, CanonicalCoupling]) -> NishimoriParams:
    return NishimoriParams({s: c.x for s, c in couplings.items()})


@dataclass(frozen=True, eq=False)
class DisorderSample:
    """Standardized Gaussian pair ``(J_s, K_s)`` for every slot."""

    j: Mapping[Slot, float]
    k: Mapping[Slot, float]

    def __post_init__(self) -> None:
        j = _frozen_slot_map(self.j, "sample.j")
        k = _frozen_slot_map(self.k, "sample.k")
        if set(j) != set(k):
            raise ConfigurationError("sample J and K must cover the same slots")
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "k", k)

    @classmethod
    def from_arrays(cls, model: ModelSpec, j: Sequence[float], k: Sequence[float]) -> "DisorderSample":
        if len(j) != len(model.slots) or len(k) != len(model.slots):
            raise ConfigurationError("J/K arrays must have one entry per slot")
        return cls(dict(zip(model.slots, map(float, j))), dict(zip(model.slots, map(float, k))))

    @classmethod
    def zeros(cls, model: ModelSpec) -> "DisorderSample":
        z = np.zeros(len(model.slots))
        return cls.from_arrays(model, z, z)

    @classmethod
    def draw(cls, model: ModelSpec, rng: np.random.Generator) -> "DisorderSample":
        j, k = rng.standard_normal((2, len(model.slots)))
        return cls.from_arrays(model, j, k)

    def arrays(self, model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
        if set(self.j) != set(model.slots):
            raise ConfigurationError("sample slots do not match the model's slot set")
        return (
            np.array([self.j[s] for s in model.slots], dtype=float),
            np.array([self.k[s] for s in model.slots], dtype=float),
        )


# ---------------------------------------------------------------------------
# Potential and Gibbs measure
# ---------------------------------------------------------------------------


def coupling_arrays(model: ModelSpec, params: NishimoriParams, bias_factor: float = 1.0):
    """``(amplitude, mean)`` per slot: ``sqrt(x)`` and ``bias_factor * x``.

    ``bias_factor != 1`` moves the Gaussian mean off the Nishimori line
    (D / sigma^2 = bias_factor * beta); it exists for negative controls.
    """
    x = params.vector(model)
    return np.sqrt(x), bias_factor * x


def _check_config(model: ModelSpec, config: Sequence[int]) -> np.ndarray:
    conf = np.asarray(config)
    if conf.shape != (model.n_sites,):
        raise ConfigurationError(f"configuration must assign one state to each of {model.n_sites} sites")
    if not np.issubdtype(conf.dtype, np.integer) or conf.min() < 0 or conf.max() >= model.q:
        raise ConfigurationError(f"configuration states must be integers in 0..{model.q - 1}")
    return conf


def evaluate_potential(
    model: ModelSpec,
    params: NishimoriParams,
    sample: DisorderSample,
    config: Sequence[int],
) -> float:
    """Random potential ``U`` of one configuration (state indices)."""
    conf = _check_config(model, config)
    amp, mean = coupling_arrays(model, params)
    j, k = sample.arrays(model)
    c_tab, s_tab = model.space.unit_circle
    u = 0.0
    for n, s in enumerate(model.slots):
        r = model.slot_angle_residue(s, conf)
        u -= (amp[n] * j[n] + mean[n]) * c_tab[r] + amp[n] * k[n] * s_tab[r]
    return float(u)


class GibbsBatch:
    """Exact Gibbs measures for a batch of disorder realizations.

    ``prob`` has shape ``(B, C)``; rows are Boltzmann weights over the
    model's enumerated configurations.
    """

    def __init__(self, model: ModelSpec, log_z: np.ndarray, prob: np.ndarray):
        self.model = model
        self.log_z = log_z
        self.prob = prob

    def __len__(self) -> int:
        return len(self.log_z)

    def average(self, table: np.ndarray) -> np.ndarray:
        """Thermal average of a per-configuration table ``(C,)`` or ``(T, C)``."""
        return self.prob @ np.asarray(table).T

    def cos(self, slot: Slot) -> np.ndarray:
        return self.average(self.model.cos_table[self.model.slot_index(slot)])

    def sin(self, slot: Slot) -> np.ndarray:
        return self.average(self.model.sin_table[self.model.slot_index(slot)])

    def monomial(self, factors: Sequence[tuple[str, Slot]]) -> np.ndarray:
        """``<prod_f fn_f(a_{slot_f})>`` for factors like ``[("cos", s), ("sin", t)]``."""
        return self.average(monomial_table(self.model, factors))


def monomial_table(model: ModelSpec, factors: Sequence[tuple[str, Slot]]) -> np.ndarray:
    table = np.ones(model.n_configs)
    for fn, slot in factors:
        if fn == "cos":
            table = table * model.cos_table[model.slot_index(slot)]
        elif fn == "sin":
            table = table * model.sin_table[model.slot_index(slot)]
        else:
            raise ConfigurationError(f"unknown factor function {fn!r}")
    return table


def gibbs_batch(
    model: ModelSpec,
    amp: np.ndarray,
    mean: np.ndarray,
    j: np.ndarray,
    k: np.ndarray,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> GibbsBatch:
    """Vectorized enumeration for ``j, k`` of shape ``(B, S)``."""
    model.check_enumerable(cap)
    j = np.atleast_2d(j)
    k = np.atleast_2d(k)
    # -U for every (sample, configuration)
    field_c = j * amp + mean
    field_s = k * amp
    w = field_c @ model.cos_table
    w += field_s @ model.sin_table
    top = w.max(axis=1, keepdims=True)
    w -= top
    np.exp(w, out=w)
    norm = w.sum(axis=1, keepdims=True)
    log_z = (top + np.log(norm))[:, 0]
    w /= norm
    return GibbsBatch(model, log_z, w)


@dataclass(frozen=True)
class GibbsSolution:
    """Exact Gibbs result at one disorder realization.

    ``correlators`` maps a request key to its thermal average.  Plain
    requests are tuples of ``(fn, slot)`` factors, e.g.
    ``(("cos", a), ("sin", b))`` for ``<cos a_a sin a_b>``; replica patterns
    map to their multi-replica average.
    """

    log_z: float
    correlators: Mapping[object, float]
    prob: np.ndarray = field(repr=False, compare=False)

    def cos(self, slot: Slot) -> float:
        return self.correlators[(("cos", slot),)]

    def sin(self, slot: Slot) -> float:
        return self.correlators[(("sin", slot),)]


def exact_gibbs(
    model: ModelSpec,
    params: NishimoriParams,
    sample: DisorderSample,
    requests: Iterable[object] = (),
    cap: int = DEFAULT_ENUMERATION_CAP,
    bias_factor: float = 1.0,
) -> GibbsSolution:
    """Full enumeration of ``Z`` and the requested thermal averages."""
    from .replicas import ReplicaPattern, factorized_average

    amp, mean = coupling_arrays(model, params, bias_factor)
    j, k = sample.arrays(model)
    batch = gibbs_batch(model, amp, mean, j[None, :], k[None, :], cap)
    corr: dict[object, float] = {}
    for s in model.slots:
        corr[(("cos", s),)] = float(batch.cos(s)[0])
        corr[(("sin", s),)] = float(batch.sin(s)[0])
    for req in requests:
        if isinstance(req, ReplicaPattern):
            corr[req] = float(factorized_average(batch, req)[0])
        else:
            factors = tuple((str(fn), slot) for fn, slot in req)
            corr[factors] = float(batch.monomial(factors)[0])
    return GibbsSolution(float(batch.log_z[0]), MappingProxyType(corr), batch.prob[0])


# ---------------------------------------------------------------------------
# Gauge transformation
# ---------------------------------------------------------------------------


def gauge_transform(
    model: ModelSpec,
    params: NishimoriParams,
    sample: DisorderSample,
    theta: Sequence[float],
) -> DisorderSample:
    """Disorder seen by spins relabelled as ``phi -> phi - theta``.

    The complex coupling ``w_s = sqrt(x)(J - iK) + x`` of each slot is
    rotated by ``m (theta_i - theta_j)`` (or ``m theta_i`` on a site), so that
    ``U(phi - theta, transformed) == U(phi, sample)``.  ``theta`` are angles
    in radians and must be spin states.
    """
    if len(theta) != model.n_sites:
        raise ConfigurationError(f"theta needs {model.n_sites} angles")
    t = [model.space.state_of_angle(a) for a in theta]
    amp, mean = coupling_arrays(model, params)
    j, k = sample.arrays(model)
    c_tab, s_tab = model.space.unit_circle
    new_j = np.empty_like(j)
    new_k = np.empty_like(k)
    for n, s in enumerate(model.slots):
        r = model.slot_angle_residue(s, t)
        c, si = c_tab[r], s_tab[r]
        if amp[n] == 0.0:
            new_j[n] = j[n] * c - k[n] * si
            new_k[n] = j[n] * si + k[n] * c
            continue
        # w e^{i alpha} with w = (amp J + mean) - i amp K
        re, im = amp[n] * j[n] + mean[n], -amp[n] * k[n]
        re2, im2 = re * c - im * si, re * si + im * c
        new_j[n] = (re2 - mean[n]) / amp[n]
        new_k[n] = -im2 / amp[n]
    return DisorderSample.from_arrays(model, new_j, new_k)


def shift_config(model: ModelSpec, config: Sequence[int], theta: Sequence[float]) -> np.ndarray:
    """State indices of ``phi - theta``."""
    conf = _check_config(model, config)
    t = np.array([model.space.state_of_angle(a) for a in theta])
    return (conf - t) % model.q
