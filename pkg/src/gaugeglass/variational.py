"""Gibbs-Bogoliubov lower bound with a one-body trial potential.

The trial potential ``U_0`` puts standardized one-body couplings
``x_{i,m}`` on sites.  Along the interpolation

    U(t) = t-scaled two-body slots + (1 - t)-scaled trial slots,

``t -> E[log Z(t)]`` is convex, and the tangent at ``t = 0`` gives

    E[log Z] >= E[log Z_0] + 1/2 sum_s x_s E[1 + <cos a_s>_0]
                           - 1/2 sum_(i,m) x_{i,m} E[1 + <cos m phi_i>_0].

``<...>_0`` factorizes over sites, so the right-hand side only needs
single-site Gaussian averages.  All quantities are pressures (maximized).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .model import BondGraph, ModelSpec, NishimoriParams, Slot, coupling_arrays, gibbs_batch
from .quench import (
    MonteCarlo,
    QuenchedEstimate,
    Quadrature,
    QuenchMethod,
    quenched_functional,
    quenched_pressure,
)

GB_TOL = 1e-8
SIGMAS = 3.0
TANGENT_STEP = 1e-4
GOLDEN_TOL = 1e-6
DEFAULT_M_MAX = 2.0
TRIAL_SIDE_METHOD = Quadrature()


@dataclass(frozen=True, eq=False)
class TrialField:
    """One-body trial couplings ``x_{i,m}``, keyed by site slots."""

    x: Mapping[Slot, float]

    def __post_init__(self) -> None:
        x = {}
        for s, v in dict(self.x).items():
            if not isinstance(s, Slot) or s.is_bond:
                raise ConfigurationError(f"trial fields live on sites, got {s!r}")
            v = float(v)
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"trial x[{s}] = {v!r}; must be finite and >= 0")
            x[s] = v
        object.__setattr__(self, "x", MappingProxyType(x))

    @classmethod
    def uniform(cls, sites: Sequence[int], x: float, m: int = 1) -> "TrialField":
        return cls({Slot.site(i, m): x for i in sites})

    @classmethod
    def zero(cls) -> "TrialField":
        return cls({})

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(sorted({s.sites[0] for s in self.x}))

    def at(self, site: int) -> tuple[tuple[int, float], ...]:
        return tuple(sorted((s.m, v) for s, v in self.x.items() if s.sites[0] == site))

    def validate(self, model: ModelSpec) -> None:
        for s in self.x:
            if not 0 <= s.sites[0] < model.n_sites:
                raise ConfigurationError(f"trial site {s.sites[0]} outside the model")
            if s in model.slots:
                raise ConfigurationError(f"trial slot {s} duplicates a model slot")


# ---------------------------------------------------------------------------
# Single-site averages
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def site_averages(q: int, harmonics: tuple[tuple[int, float], ...], needed: tuple[int, ...]) -> dict:
    """``E log z``, ``E<cos m phi>``, ``E<sin m phi>`` for one trial site.

    ``harmonics`` are the site's ``(m, x)`` couplings; ``needed`` the
    harmonics whose averages are wanted.
    """
    from .model import SpinSpace

    space = SpinSpace(q)
    c_tab, s_tab = space.unit_circle
    k = np.arange(q)
    active = tuple((m, x) for m, x in harmonics if x > 0.0)
    if not active:
        out = {"log_z": math.log(q)}
        for m in needed:
            out[("cos", m)] = float(np.mean(c_tab[(m * k) % q]))
            out[("sin", m)] = float(np.mean(s_tab[(m * k) % q]))
        return out
    graph = BondGraph(1, (), (0,))
    slots = tuple(Slot.site(0, m) for m, _ in active)
    model = ModelSpec(space, graph, slots)
    params = NishimoriParams({s: x for s, (_, x) in zip(slots, active)})
    tables = [(fn, m, (c_tab if fn == "cos" else s_tab)[(m * k) % q]) for m in needed for fn in ("cos", "sin")]

    def fn(batches, j, kk):
        b = batches[0]
        return np.column_stack([b.log_z] + [b.average(t) for _, _, t in tables])

    names = ["log_z"] + [f"{f}{m}" for f, m, _ in tables]
    est = quenched_functional(model, [params], fn, names, TRIAL_SIDE_METHOD, convergence_check=False)
    out = {"log_z": est["log_z"].value}
    for f, m, _ in tables:
        out[(f, m)] = est[f"{f}{m}"].value
    return out


def _target_terms(model: ModelSpec, params: NishimoriParams):
    return [(s, params.x[s]) for s in model.slots]


def gb_rhs(
    model: ModelSpec,
    params: NishimoriParams,
    trial: TrialField,
    method: QuenchMethod | None = None,
    path: str = "factorized",
) -> dict:
    """Right-hand side of the bound and its pieces.

    ``path="factorized"`` uses single-site averages; ``path="joint"``
    enumerates the full trial system (an oracle for small N).
    """
    trial.validate(model)
    params.vector(model)
    if path == "factorized":
        needed: dict[int, set[int]] = {i: set() for i in range(model.n_sites)}
        for s in model.slots:
            for i in s.sites:
                needed[i].add(s.m)
        for s in trial.x:
            needed[s.sites[0]].add(s.m)
        site = {
            i: site_averages(model.q, trial.at(i), tuple(sorted(needed[i]))) for i in range(model.n_sites)
        }
        log_z0 = math.fsum(site[i]["log_z"] for i in range(model.n_sites))

        def mean_cos(s: Slot) -> float:
            if s.is_bond:
                i, j = s.sites
                return site[i][("cos", s.m)] * site[j][("cos", s.m)] + site[i][("sin", s.m)] * site[j][("sin", s.m)]
            return site[s.sites[0]][("cos", s.m)]

        target_cos = {s: mean_cos(s) for s in model.slots}
        trial_cos = {s: mean_cos(s) for s in trial.x}
    elif path == "joint":
        combo = combined_model(model, trial)
        p0 = interpolation_params(model, params, trial, 0.0)
        slots = list(model.slots) + list(trial.x)

        def fn(batches, j, k):
            b = batches[0]
            return np.column_stack([b.log_z] + [b.cos(s) for s in slots])

        est = quenched_functional(combo, [p0], fn, ["log_z"] + [s.label for s in slots], method)
        log_z0 = est["log_z"].value
        target_cos = {s: est[s.label].value for s in model.slots}
        trial_cos = {s: est[s.label].value for s in trial.x}
    else:
        raise ConfigurationError(f"unknown path {path!r}")
    gain = 0.5 * math.fsum(x * (1.0 + target_cos[s]) for s, x in _target_terms(model, params))
    cost = 0.5 * math.fsum(x * (1.0 + trial_cos[s]) for s, x in trial.x.items())
    return {
        "value": log_z0 + gain - cost,
        "log_z0": log_z0,
        "target_term": gain,
        "trial_term": cost,
        "target_cos0": {s.label: v for s, v in target_cos.items()},
        "trial_cos0": {s.label: v for s, v in trial_cos.items()},
    }


@dataclass
class GBReport:
    lhs: QuenchedEstimate
    rhs: float
    slack: float
    tolerance: float
    passed: bool
    pieces: dict = field(default_factory=dict)
    t_curve: list | None = None
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        out = {
            "kind": "gb",
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "pieces": self.pieces,
        }
        if self.t_curve is not None:
            out["t_curve"] = self.t_curve
        out.update(self.extra)
        return out


def _bound_tol(lhs: QuenchedEstimate, floor: float = GB_TOL) -> float:
    return max(floor, SIGMAS * lhs.std_error) if isinstance(lhs.method, MonteCarlo) else floor


def gb_bound(
    model: ModelSpec,
    params: NishimoriParams,
    trial: TrialField,
    method: QuenchMethod | None = None,
    path: str = "factorized",
    tol: float = GB_TOL,
) -> GBReport:
    """Gibbs-Bogoliubov lower bound on ``E[log Z]`` for a one-body trial field.

    The right-hand side is evaluated by single-site quadrature and carries
    no sampling error, so the tolerance is ``max(tol, 3 sigma(lhs))``.
    """
    pieces = gb_rhs(model, params, trial, method, path)
    lhs = quenched_pressure(model, params, method)
    slack = lhs.value - pieces["value"]
    tol = _bound_tol(lhs, tol)
    return GBReport(lhs, pieces["value"], slack, tol, slack >= -tol, pieces)


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------


def combined_model(model: ModelSpec, trial: TrialField) -> ModelSpec:
    trial.validate(model)
    sites = tuple(sorted(set(model.graph.one_body_sites) | set(trial.sites)))
    graph = BondGraph(model.n_sites, model.graph.bonds, sites)
    return ModelSpec(model.space, graph, tuple(model.slots) + tuple(trial.x), model.name)


def interpolation_params(model: ModelSpec, params: NishimoriParams, trial: TrialField, t: float) -> NishimoriParams:
    """Model slots scaled by ``t``, trial slots by ``1 - t``."""
    x = {s: t * params.x[s] for s in model.slots}
    x.update({s: (1.0 - t) * v for s, v in trial.x.items()})
    return NishimoriParams(x)


def _check_grid(t_grid: Sequence[float]) -> list[float]:
    grid = [float(t) for t in t_grid]
    if len(grid) < 3:
        raise ConfigurationError("t grid needs at least 3 points")
    if any(not 0.0 <= t <= 1.0 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("t grid must be strictly increasing inside [0, 1]")
    return grid


def interpolation_curve(
    model: ModelSpec,
    params: NishimoriParams,
    trial: TrialField,
    t_grid: Sequence[float],
    method: QuenchMethod | None = None,
) -> list[tuple[float, QuenchedEstimate]]:
    """``E[log Z(t)]`` on the grid, all points from common disorder."""
    grid = _check_grid(t_grid)
    combo = combined_model(model, trial)
    plist = [interpolation_params(model, params, trial, t) for t in grid]

    def fn(batches, j, k):
        return np.column_stack([b.log_z for b in batches])

    names = [f"t{n}" for n in range(len(grid))]
    est = quenched_functional(combo, plist, fn, names, method)
    return [(t, est[n]) for t, n in zip(grid, names)]


@dataclass
class InterpolationReport:
    curve: list[tuple[float, QuenchedEstimate]]
    second_differences: list[QuenchedEstimate]
    slope0: QuenchedEstimate
    slope0_closed_form: float
    tangent_gap: QuenchedEstimate
    endpoint_gaps: tuple[float, float]
    tolerance: float
    convex: bool
    endpoints_ok: bool
    tangent_ok: bool
    slope_ok: bool

    @property
    def passed(self) -> bool:
        return self.convex and self.endpoints_ok and self.tangent_ok and self.slope_ok

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "kind": "interp",
            "t_curve": [[t, e.to_dict()] for t, e in self.curve],
            "second_differences": [e.to_dict() for e in self.second_differences],
            "slope0": self.slope0.to_dict(),
            "slope0_closed_form": self.slope0_closed_form,
            "tangent_gap": self.tangent_gap.to_dict(),
            "endpoint_gaps": list(self.endpoint_gaps),
            "tolerance": self.tolerance,
            "convex": self.convex,
            "endpoints_ok": self.endpoints_ok,
            "tangent_ok": self.tangent_ok,
            "slope_ok": self.slope_ok,
            "verdict": self.verdict,
        }


def _trial_log_z(model: ModelSpec, trial: TrialField, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Per-realization ``log Z_0``: a sum of independent single-site enumerations.

    ``j`` and ``k`` hold one column per trial slot, in ``trial.x`` order.
    """
    q = model.q
    c_tab, s_tab = model.space.unit_circle
    states = np.arange(q)
    w = np.zeros((len(j), model.n_sites, q))
    for col, (slot, x) in enumerate(trial.x.items()):
        r = (slot.m * states) % q
        amp = math.sqrt(x)
        w[:, slot.sites[0], :] += np.outer(amp * j[:, col] + x, c_tab[r]) + np.outer(amp * k[:, col], s_tab[r])
    top = w.max(axis=2, keepdims=True)
    return (top[..., 0] + np.log(np.exp(w - top).sum(axis=2))).sum(axis=1)


def check_interpolation(
    model: ModelSpec,
    params: NishimoriParams,
    trial: TrialField,
    t_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    method: QuenchMethod | None = None,
    tol: float = GB_TOL,
    slope_tol: float = 1e-6,
) -> InterpolationReport:
    """Discrete convexity, endpoints and the tangent inequality at ``t = 0``.

    The slope at ``t = 0`` is a fourth-order forward difference on common
    disorder; it is also compared with the closed-form slope
    ``rhs - E[log Z_0]``.
    """
    grid = _check_grid(t_grid)
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise ConfigurationError("endpoint checks need t = 0 and t = 1 on the grid")
    combo = combined_model(model, trial)
    h = TANGENT_STEP
    fwd = (-25.0, 48.0, -36.0, 16.0, -3.0)
    ts = grid + [i * h for i in range(1, len(fwd))]
    plist = [interpolation_params(model, params, trial, t) for t in ts]
    n = len(grid)
    slope_idx = [0] + list(range(n, n + len(fwd) - 1))

    def second(vals, i):
        t0, t1, t2 = grid[i - 1 : i + 2]
        return 2.0 * ((vals[i + 1] - vals[i]) / (t2 - t1) - (vals[i] - vals[i - 1]) / (t1 - t0)) / (t2 - t0)

    nb = len(model.slots)
    amp1, mean1 = coupling_arrays(model, params)

    def fn(batches, j, k):
        vals = [b.log_z for b in batches]
        slope = sum(c * vals[i] for c, i in zip(fwd, slope_idx)) / (12 * h)
        cols = vals[:n] + [second(vals, i) for i in range(1, n - 1)]
        cols += [slope, vals[n - 1] - vals[0] - slope]
        # endpoints against independent evaluations on the same disorder
        target = gibbs_batch(model, amp1, mean1, j[:, :nb], k[:, :nb]).log_z
        cols += [vals[0] - _trial_log_z(model, trial, j[:, nb:], k[:, nb:]), vals[n - 1] - target]
        return np.column_stack(cols)

    names = [f"t{i}" for i in range(n)] + [f"d2_{i}" for i in range(1, n - 1)]
    names += ["slope0", "tangent", "end0", "end1"]
    est = quenched_functional(combo, plist, fn, names, method)
    pieces = gb_rhs(model, params, trial)
    sigma = lambda e: SIGMAS * e.std_error if isinstance(e.method, MonteCarlo) else 0.0  # noqa: E731
    d2 = [est[f"d2_{i}"] for i in range(1, n - 1)]
    convex = all(e.value >= -max(tol, sigma(e)) for e in d2)
    gap0, gap1 = est["end0"].value, est["end1"].value
    endpoints_ok = all(abs(est[e].value) <= max(tol, sigma(est[e])) for e in ("end0", "end1"))
    closed = pieces["value"] - pieces["log_z0"]
    tangent_ok = est["tangent"].value >= -max(tol, sigma(est["tangent"]))
    slope_ok = abs(est["slope0"].value - closed) <= max(slope_tol, sigma(est["slope0"]))
    return InterpolationReport(
        curve=[(t, est[f"t{i}"]) for i, t in enumerate(grid)],
        second_differences=d2,
        slope0=est["slope0"],
        slope0_closed_form=closed,
        tangent_gap=est["tangent"],
        endpoint_gaps=(gap0, gap1),
        tolerance=tol,
        convex=convex,
        endpoints_ok=endpoints_ok,
        tangent_ok=tangent_ok,
        slope_ok=slope_ok,
    )


# ---------------------------------------------------------------------------
# Replica-symmetric mean field
# ---------------------------------------------------------------------------


def golden_section_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Maximizer of a unimodal ``f`` on ``[lo, hi]`` to within ``tol``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    best = 0.5 * (a + b)
    # the maximum may sit on the boundary of the interval
    return max((lo, best, hi), key=f) if f(lo) > f(best) or f(hi) > f(best) else best


def regular_degree(model: ModelSpec, z: int | None = None) -> int:
    deg = model.graph.degrees()
    if len(set(deg.tolist())) != 1:
        raise ConfigurationError(f"bond graph is not regular (degrees {sorted(set(deg.tolist()))})")
    if z is not None and int(z) != int(deg[0]):
        raise ConfigurationError(f"declared coordination z = {z} but the graph has degree {deg[0]}")
    return int(deg[0])


@dataclass
class MeanFieldResult:
    beta: float
    z: int
    m_star: float
    report: GBReport
    m_max: float
    scan: list[tuple[float, float]] | None = None

    def to_dict(self) -> dict:
        out = {
            "kind": "meanfield",
            "beta": self.beta,
            "z": self.z,
            "m_star": self.m_star,
            "m_max": self.m_max,
            "bound": self.report.to_dict(),
            "verdict": self.report.verdict,
        }
        if self.scan is not None:
            out["m_scan"] = [list(p) for p in self.scan]
        return out


def meanfield_params(model: ModelSpec, beta: float) -> NishimoriParams:
    return NishimoriParams({s: beta**2 for s in model.slots})


def meanfield_trial(model: ModelSpec, beta: float, z: int, m: float) -> TrialField:
    return TrialField.uniform(range(model.n_sites), beta**2 * z * m)


def rs_meanfield_rhs(model: ModelSpec, beta: float, m: float, z: int) -> float:
    return gb_rhs(model, meanfield_params(model, beta), meanfield_trial(model, beta, z, m))["value"]


def rs_meanfield_bound(
    model: ModelSpec,
    beta: float,
    z: int | None = None,
    m_max: float = DEFAULT_M_MAX,
    method: QuenchMethod | None = None,
    *,
    scan_points: int = 0,
) -> MeanFieldResult:
    """Ising bound with ``x_ij = beta^2``, ``x_i = beta^2 z M``, maximized over ``M``."""
    if model.q != 2 or any(not s.is_bond or s.m != 1 for s in model.slots):
        raise ConfigurationError("the mean-field bound needs an Ising model with m = 1 bond slots")
    if len(model.slots) != len(model.graph.bonds):
        raise ConfigurationError("every bond needs exactly one slot")
    if not beta > 0:
        raise ConfigurationError("beta must be positive")
    z = regular_degree(model, z)
    f = lambda m: rs_meanfield_rhs(model, beta, m, z)  # noqa: E731
    m_star = golden_section_max(f, 0.0, m_max)
    params = meanfield_params(model, beta)
    report = gb_bound(model, params, meanfield_trial(model, beta, z, m_star), method)
    scan = None
    if scan_points:
        grid = np.linspace(0.0, m_max, scan_points)
        scan = [(float(m), f(float(m))) for m in grid]
    return MeanFieldResult(beta, z, m_star, report, m_max, scan)
