"""Griffiths inequalities and convexity of the quenched pressure.

Closed-form derivatives of ``P(x) = E[log Z]`` are compared with finite
differences of ``P`` taken on common disorder nodes/draws:

* first derivative  ``dP/dx_a = E[1 + <cos a_a>] / 2``;
* second derivative ``2 d2P/dx_a dx_b = E[sum of four squared truncated
  correlations]`` (cos/sin of slot a against cos/sin of slot b);
* the Hessian ``d2P/dx_a dx_b``, assembled from the four-squares formula,
  from the two-replica ``c``/``s`` auxiliary variables by direct replicated
  enumeration, or by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ConsistencyError
from .model import DEFAULT_ENUMERATION_CAP, GibbsBatch, ModelSpec, NishimoriParams, Slot
from .quench import MonteCarlo, QuenchedEstimate, QuenchMethod, quenched_functional

FIRST_STEP = 1e-4
SECOND_STEP = 5e-3
BOUNDARY = 0.01
THM1_TOL = 1e-6
THM2_TOL = 1e-5
SIGMAS = 3.0
SYMMETRY_TOL = 1e-10
EIGEN_RTOL = 1e-8
ASSEMBLIES = ("four_squares", "cs_auxiliary", "finite_difference")
CS_BLOCK = 2**22


# ---------------------------------------------------------------------------
# Finite-difference stencils
# ---------------------------------------------------------------------------


def first_stencil(x: float, h: float) -> list[tuple[float, float]]:
    """(offset, weight) pairs for d/dx; central, or fourth-order forward near x = 0."""
    if x >= BOUNDARY:
        return [(-h, -0.5 / h), (h, 0.5 / h)]
    coef = (-25.0, 48.0, -36.0, 16.0, -3.0)
    return [(i * h, c / (12 * h)) for i, c in enumerate(coef)]


def second_stencil(x: float, h: float) -> list[tuple[float, float]]:
    if x >= BOUNDARY:
        return [(-h, 1 / h**2), (0.0, -2 / h**2), (h, 1 / h**2)]
    coef = (45.0, -154.0, 214.0, -156.0, 61.0, -10.0)
    return [(i * h, c / (12 * h**2)) for i, c in enumerate(coef)]


def first_step(x: float) -> float:
    return FIRST_STEP * max(1.0, x)


def second_step(x: float) -> float:
    return SECOND_STEP * max(1.0, x)


class _Points:
    """Deduplicated parameter points shared by all stencils of one pass."""

    def __init__(self, params: NishimoriParams):
        self.base = params
        self.keys: dict[tuple, int] = {(): 0}
        self.params = [params]

    def index(self, shifts: dict[Slot, float]) -> int:
        key = tuple(sorted((s, h) for s, h in shifts.items() if h != 0.0))
        if key not in self.keys:
            x = dict(self.base.x)
            for s, h in key:
                x[s] = x[s] + h
            self.keys[key] = len(self.params)
            self.params.append(NishimoriParams(x))
        return self.keys[key]


def _derivative_terms(points: _Points, a: Slot, b: Slot | None, x: NishimoriParams):
    """``[(point_index, weight)]`` for dP/dx_a (b None) or d2P/dx_a dx_b."""
    if b is None:
        return [(points.index({a: o}), w) for o, w in first_stencil(x.x[a], first_step(x.x[a]))]
    if a == b:
        return [(points.index({a: o}), w) for o, w in second_stencil(x.x[a], second_step(x.x[a]))]
    sa = first_stencil(x.x[a], second_step(x.x[a]))
    sb = first_stencil(x.x[b], second_step(x.x[b]))
    return [(points.index({a: oa, b: ob}), wa * wb) for oa, wa in sa for ob, wb in sb]


# ---------------------------------------------------------------------------
# Closed forms at fixed disorder
# ---------------------------------------------------------------------------


def first_derivative_integrand(batch: GibbsBatch, a: Slot) -> np.ndarray:
    return 0.5 * (1.0 + batch.cos(a))


def four_squares(batch: GibbsBatch, a: Slot, b: Slot) -> np.ndarray:
    """Sum of squared truncated cos/sin correlations of slots a and b."""
    total = np.zeros(len(batch))
    for fa in ("cos", "sin"):
        for fb in ("cos", "sin"):
            joint = batch.monomial([(fa, a), (fb, b)])
            ma = batch.monomial([(fa, a)])
            mb = batch.monomial([(fb, b)])
            total += (joint - ma * mb) ** 2
    return total


def cs_auxiliary_matrix(batch: GibbsBatch, slots: Sequence[Slot]) -> np.ndarray:
    """``<(c_a + s_a)(c_b + s_b)>_{1,2}`` by summing over replica pairs.

    Returns shape ``(B, d, d)``.  The replicated sum is done literally over
    ``C x C`` configuration pairs, without using replica factorization.
    """
    model = batch.model
    idx = [model.slot_index(s) for s in slots]
    ct = model.cos_table[idx]  # (d, C)
    st = model.sin_table[idx]
    n_b, c = batch.prob.shape
    d = len(slots)
    out = np.empty((n_b, d, d))
    block = max(1, CS_BLOCK // (max(1, d) * c * c))
    for lo in range(0, n_b, block):
        p = batch.prob[lo : lo + block]
        dc = ct[None, :, :] - (p @ ct.T)[:, :, None]  # (b, d, C)
        ds = st[None, :, :] - (p @ st.T)[:, :, None]
        x = dc[:, :, :, None] * dc[:, :, None, :] + ds[:, :, :, None] * ds[:, :, None, :]  # (b, d, C, C)
        pp = p[:, :, None] * p[:, None, :]
        out[lo : lo + block] = np.einsum("bij,bdij,beij->bde", pp, x, x, optimize=True)
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class DerivativeReport:
    theorem: str
    slots: tuple[Slot, ...]
    analytic: QuenchedEstimate
    numeric: QuenchedEstimate
    difference: QuenchedEstimate
    fd_step: float
    tolerance: float
    passed: bool
    bound_ok: bool
    #: Theorem 2 only: d/dx_b of E<cos a_a>, and its gap to the analytic side
    correlation_slope: QuenchedEstimate | None = None
    slope_difference: QuenchedEstimate | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        out = {
            "kind": self.theorem,
            "slots": [s.label for s in self.slots],
            "analytic": self.analytic.to_dict(),
            "numeric": self.numeric.to_dict(),
            "difference": self.difference.to_dict(),
            "fd_step": self.fd_step,
            "tolerance": self.tolerance,
            "bound_ok": self.bound_ok,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }
        if self.correlation_slope is not None:
            out["correlation_slope"] = self.correlation_slope.to_dict()
            out["slope_difference"] = self.slope_difference.to_dict()
        return out


def _tol(floor: float, *diffs: QuenchedEstimate) -> float:
    sig = max(d.std_error for d in diffs)
    return max(floor, SIGMAS * sig) if any(isinstance(d.method, MonteCarlo) for d in diffs) else floor


def thm1_check(
    model: ModelSpec,
    params: NishimoriParams,
    slot: Slot,
    method: QuenchMethod | None = None,
    *,
    tol: float = THM1_TOL,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> DerivativeReport:
    """``dP/dx_slot`` closed form against a finite difference of ``P``."""
    return thm1_checks(model, params, [slot], method, tol=tol, cap=cap)[0]


def thm1_checks(
    model: ModelSpec,
    params: NishimoriParams,
    slots: Sequence[Slot],
    method: QuenchMethod | None = None,
    *,
    tol: float = THM1_TOL,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[DerivativeReport]:
    """Theorem 1 for several slots from one pass over the disorder."""
    for s in slots:
        model.slot_index(s)
    params.vector(model)
    points = _Points(params)
    stencils = [_derivative_terms(points, s, None, params) for s in slots]

    def fn(batches, j, k):
        cols = []
        for s, terms in zip(slots, stencils):
            analytic = first_derivative_integrand(batches[0], s)
            numeric = sum(w * batches[i].log_z for i, w in terms)
            cols += [analytic, numeric, analytic - numeric]
        return np.column_stack(cols)

    names = [f"{n}:{p}" for n in range(len(slots)) for p in ("analytic", "numeric", "diff")]
    est = quenched_functional(model, points.params, fn, names, method, cap=cap)
    out = []
    for n, s in enumerate(slots):
        an, nu, df = est[f"{n}:analytic"], est[f"{n}:numeric"], est[f"{n}:diff"]
        t = _tol(tol, df)
        bound_ok = -t <= an.value <= 1.0 + t
        notes = [] if params.x[s] >= BOUNDARY else ["one-sided difference at the x = 0 boundary"]
        out.append(
            DerivativeReport(
                theorem="thm1",
                slots=(s,),
                analytic=an,
                numeric=nu,
                difference=df,
                fd_step=first_step(params.x[s]),
                tolerance=t,
                passed=abs(df.value) <= t and bound_ok,
                bound_ok=bound_ok,
                notes=notes,
            )
        )
    return out


def thm2_check(
    model: ModelSpec,
    params: NishimoriParams,
    slot_a: Slot,
    slot_b: Slot,
    method: QuenchMethod | None = None,
    *,
    tol: float = THM2_TOL,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> DerivativeReport:
    """Four-squares formula against ``2 d2P/dx_a dx_b`` and ``d E<cos_a> / dx_b``."""
    return thm2_checks(model, params, [(slot_a, slot_b)], method, tol=tol, cap=cap)[0]


def thm2_checks(
    model: ModelSpec,
    params: NishimoriParams,
    pairs: Sequence[tuple[Slot, Slot]],
    method: QuenchMethod | None = None,
    *,
    tol: float = THM2_TOL,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[DerivativeReport]:
    for a, b in pairs:
        model.slot_index(a)
        model.slot_index(b)
    params.vector(model)
    points = _Points(params)
    second = [_derivative_terms(points, a, b, params) for a, b in pairs]
    slope = [_derivative_terms(points, b, None, params) for a, b in pairs]

    def fn(batches, j, k):
        cols = []
        for (a, b), t2, t1 in zip(pairs, second, slope):
            analytic = four_squares(batches[0], a, b)
            numeric = 2.0 * sum(w * batches[i].log_z for i, w in t2)
            corr = sum(w * batches[i].cos(a) for i, w in t1)
            cols += [analytic, numeric, analytic - numeric, corr, analytic - corr]
        return np.column_stack(cols)

    parts = ("analytic", "numeric", "diff", "slope", "slope_diff")
    names = [f"{n}:{p}" for n in range(len(pairs)) for p in parts]
    est = quenched_functional(model, points.params, fn, names, method, cap=cap)
    out = []
    for n, (a, b) in enumerate(pairs):
        e = {p: est[f"{n}:{p}"] for p in parts}
        t = _tol(tol, e["diff"], e["slope_diff"])
        bound_ok = e["analytic"].value >= -t
        passed = bound_ok and abs(e["diff"].value) <= t and abs(e["slope_diff"].value) <= t
        boundary = min(params.x[a], params.x[b]) < BOUNDARY
        out.append(
            DerivativeReport(
                theorem="thm2",
                slots=(a, b),
                analytic=e["analytic"],
                numeric=e["numeric"],
                difference=e["diff"],
                fd_step=second_step(max(params.x[a], params.x[b])),
                tolerance=t,
                passed=passed,
                bound_ok=bound_ok,
                correlation_slope=e["slope"],
                slope_difference=e["slope_diff"],
                notes=["one-sided differences at the x = 0 boundary"] if boundary else [],
            )
        )
    return out


@dataclass
class HessianReport:
    slots: tuple[Slot, ...]
    matrix: np.ndarray
    std_errors: np.ndarray
    assembly: str
    min_eigenvalue: float
    spectral_norm: float
    method: QuenchMethod

    @property
    def eigen_tolerance(self) -> float:
        # finite differences are only accurate to the Theorem 2 floor
        rel = EIGEN_RTOL * (1.0 + self.spectral_norm)
        return max(rel, THM2_TOL) if self.assembly == "finite_difference" else rel

    @property
    def passed(self) -> bool:
        return self.min_eigenvalue >= -self.eigen_tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "kind": "hessian",
            "assembly": self.assembly,
            "slots": [s.label for s in self.slots],
            "matrix": self.matrix.tolist(),
            "std_errors": self.std_errors.tolist(),
            "min_eigenvalue": self.min_eigenvalue,
            "spectral_norm": self.spectral_norm,
            "eigen_tolerance": self.eigen_tolerance,
            "method": self.method.describe(),
            "verdict": self.verdict,
        }


def _finish(slots, mat, se, assembly, method) -> HessianReport:
    asym = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ConsistencyError(f"{assembly} Hessian is not symmetric (max |H - H^T| = {asym:.3e})")
    mat = 0.5 * (mat + mat.T)
    eig = np.linalg.eigvalsh(mat)
    return HessianReport(
        slots=tuple(slots),
        matrix=mat,
        std_errors=se,
        assembly=assembly,
        min_eigenvalue=float(eig[0]),
        spectral_norm=float(np.max(np.abs(eig))),
        method=method,
    )


def hessian_psd(
    model: ModelSpec,
    params: NishimoriParams,
    method: QuenchMethod | None = None,
    assembly: str = "four_squares",
    *,
    slots: Sequence[Slot] | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> HessianReport:
    """Hessian ``d2P/dx_a dx_b`` over ``slots`` (default: all model slots)."""
    slots = tuple(model.slots if slots is None else slots)
    d = len(slots)
    if d > 12:
        raise ConfigurationError(f"Hessian dimension {d} exceeds 12")
    for s in slots:
        model.slot_index(s)
    params.vector(model)
    pairs = [(a, b) for a in range(d) for b in range(d)]
    points = _Points(params)
    if assembly == "four_squares":

        def fn(batches, j, k):
            return np.column_stack([0.5 * four_squares(batches[0], slots[a], slots[b]) for a, b in pairs])

    elif assembly == "cs_auxiliary":

        def fn(batches, j, k):
            m = cs_auxiliary_matrix(batches[0], slots)
            return 0.5 * m.reshape(len(m), d * d)

    elif assembly == "finite_difference":
        upper = [(a, b) for a, b in pairs if a <= b]
        stencils = {(a, b): _derivative_terms(points, slots[a], slots[b], params) for a, b in upper}

        def fn(batches, j, k):
            cols = []
            for a, b in pairs:
                terms = stencils[(min(a, b), max(a, b))]
                cols.append(sum(w * batches[i].log_z for i, w in terms))
            return np.column_stack(cols)

    else:
        raise ConfigurationError(f"unknown Hessian assembly {assembly!r}; expected one of {ASSEMBLIES}")
    names = [f"{a},{b}" for a, b in pairs]
    est = quenched_functional(model, points.params, fn, names, method, cap=cap)
    mat = np.array([est[n].value for n in names]).reshape(d, d)
    se = np.array([est[n].std_error for n in names]).reshape(d, d)
    used = est[names[0]].method if names else method
    return _finish(slots, mat, se, assembly, used)


def hessian_agreement(reports: Sequence[HessianReport], floor: float = THM2_TOL) -> list[dict]:
    """Pairwise max entry gaps between assemblies against ``max(floor, 3 sigma)``."""
    out = []
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            a, b = reports[i], reports[j]
            gap = float(np.max(np.abs(a.matrix - b.matrix))) if a.matrix.size else 0.0
            sig = float(np.max(np.hypot(a.std_errors, b.std_errors))) if a.matrix.size else 0.0
            tol = max(floor, SIGMAS * sig)
            out.append(
                {
                    "pair": [a.assembly, b.assembly],
                    "max_gap": gap,
                    "tolerance": tol,
                    "verdict": "pass" if gap <= tol else "fail",
                }
            )
    return out
