"""Acceptance gate: ten criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
Each criterion returns ``(passed, detail)``; runtime limits are part of the
verdict.
"""
from __future__ import annotations

import math
import os
import time

import numpy as np
import pytest

from gaugeglass.cli import RunConfig, run
from gaugeglass.documents import bundled_models
from gaugeglass.identities import check_identities, off_line_control
from gaugeglass.model import BondGraph, DisorderSample, ModelSpec, NishimoriParams, Slot, exact_gibbs, gauge_transform
from gaugeglass.quench import WORKERS_ENV, MonteCarlo, Quadrature, active_dimensions, coupling_arrays, log_z, quenched_averages
from gaugeglass.theorems import ASSEMBLIES, EIGEN_RTOL, hessian_agreement, hessian_psd, thm1_checks, thm2_checks
from gaugeglass.variational import (
    TrialField,
    check_interpolation,
    combined_model,
    gb_bound,
    interpolation_params,
    rs_meanfield_bound,
)

X_GRID = (0.0, 0.25, 1.0, 4.0)
RESULTS: dict[int, tuple[bool, str]] = {}


def _single_bond(q, harmonics=(1,)):
    return ModelSpec.build(q, BondGraph.chain(2), harmonics=harmonics)


def _line(n, passed, detail, seconds, limit):
    ok = passed and (limit is None or seconds < limit)
    budget = "" if limit is None else f" / {limit:.0f}s"
    text = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.1f}s{budget}]"
    RESULTS[n] = (ok, text)
    print(text)
    return ok


def _timed(n, limit):
    def wrap(fn):
        def run_criterion():
            t0 = time.perf_counter()
            passed, detail = fn()
            return _line(n, passed, detail, time.perf_counter() - t0, limit)

        run_criterion.__name__ = fn.__name__
        return run_criterion

    return wrap


# ---------------------------------------------------------------------------


@_timed(1, 10)
def criterion_1():
    worst = 0.0
    for q in (2, 3, 4):
        model = _single_bond(q)
        for x in (0.25, 1.0, 4.0):
            (case,) = check_identities(model, NishimoriParams.uniform(model, x), [("I1", model.slots)], Quadrature())
            worst = max(worst, case.gap)
    return worst <= 1e-8, f"I1 single bonds q=2,3,4 x=0.25,1,4: max |lhs-rhs| = {worst:.2e} (tol 1e-8)"


@_timed(2, 120)
def criterion_2():
    ids = ("I2", "I3", "I4", "I5")
    instances = [
        (_single_bond(2), [1.0]),
        (_single_bond(3), [1.0]),
        (ModelSpec.build(3, BondGraph.chain(3)), [0.5, 1.0]),
    ]
    worst_quad, mc_ok, worst_ratio = 0.0, True, 0.0
    for model, x in instances:
        params = NishimoriParams.from_vector(model, x)
        pairs = [(a, b) for a in model.slots for b in model.slots]
        cases = [(cid, p) for cid in ids for p in pairs]
        for c in check_identities(model, params, cases, Quadrature()):
            worst_quad = max(worst_quad, c.gap)
        for c in check_identities(model, params, cases, MonteCarlo(100_000, seed=4242)):
            mc_ok &= c.passed
            worst_ratio = max(worst_ratio, c.gap / c.tolerance)
    ok = worst_quad <= 1e-8 and mc_ok
    return ok, f"I2-I5 quadrature max gap {worst_quad:.2e} (tol 1e-8); MC 1e5 worst |diff| / max(3 sigma, 1e-12) = {worst_ratio:.2f} (must be <= 1)"


@_timed(3, 5)
def criterion_3():
    model = _single_bond(2)
    case = off_line_control(model, NishimoriParams.uniform(model, 1.0), "I1", model.slots, 1.5)
    ratio = case.gap / case.tolerance
    return ratio > 10, f"I1 at D/sigma^2 = 1.5 beta violates by {case.gap:.3e} = {ratio:.1e} x tolerance (need > 10)"


def _desk_grid():
    """(model, x, method) triples for the derivative checks."""
    grid = []
    for q in (2, 3, 4):
        grid += [(_single_bond(q), x, Quadrature(128)) for x in X_GRID]
    grid += [(ModelSpec.build(2, BondGraph.chain(3)), x, Quadrature(128)) for x in X_GRID]
    grid += [(ModelSpec.build(2, BondGraph.chain(4)), x, Quadrature(64)) for x in X_GRID]
    for q in (3, 4):
        grid += [(ModelSpec.build(q, BondGraph.chain(3)), x, Quadrature(36)) for x in X_GRID]
    return grid


@_timed(4, 120)
def criterion_4():
    worst, in_range, n_checks = 0.0, True, 0
    for model, x, method in _desk_grid():
        for rep in thm1_checks(model, NishimoriParams.uniform(model, x), model.slots, method):
            n_checks += 1
            worst = max(worst, abs(rep.difference.value))
            in_range &= 0.0 <= rep.analytic.value <= 1.0
    ok = worst <= 1e-6 and in_range
    return ok, f"Thm1 on {n_checks} desk-grid slots: max |analytic-FD| = {worst:.2e} (tol 1e-6), all in [0,1]: {in_range}"


@_timed(5, 120)
def criterion_5():
    reports = []
    for q in (2, 3, 4):
        model = _single_bond(q)
        s = model.slots[0]
        for x in X_GRID:
            reports += thm2_checks(model, NishimoriParams.uniform(model, x), [(s, s)], Quadrature(128))
    chain = ModelSpec.build(2, BondGraph.chain(3))
    a, b = chain.slots
    reports += thm2_checks(chain, NishimoriParams.from_vector(chain, [0.5, 1.0]), [(a, a), (a, b), (b, b)], Quadrature(128))
    mixed = _single_bond(3, harmonics=(1, 2))
    a, b = mixed.slots
    for x in ([0.7, 0.4], [0.0, 0.5]):
        reports += thm2_checks(mixed, NishimoriParams.from_vector(mixed, x), [(a, a), (a, b), (b, b)], Quadrature(36))
    z3 = ModelSpec.build(3, BondGraph.chain(3))
    a, b = z3.slots
    reports += thm2_checks(z3, NishimoriParams.from_vector(z3, [0.5, 1.0]), [(a, b)], Quadrature(36))
    worst = max(abs(r.difference.value) for r in reports)
    nonneg = all(r.analytic.value >= 0 for r in reports)
    ok = worst <= 1e-5 and nonneg and all(r.passed for r in reports)
    return ok, f"Thm2 on {len(reports)} slot pairs: max |4sq - 2 d2P| = {worst:.2e} (tol 1e-5), four squares >= 0: {nonneg}"


@_timed(6, 180)
def criterion_6():
    instances = [
        (_single_bond(3, harmonics=(1, 2)), [0.7, 0.4], Quadrature(32)),
        (ModelSpec.build(3, BondGraph.chain(3)), [0.5, 1.0], Quadrature(32)),
        (ModelSpec.build(2, BondGraph.ring(4)), [0.25, 0.5, 1.0, 0.75], Quadrature(32)),
        (ModelSpec.build(2, BondGraph.chain(3)), [0.0, 0.5], Quadrature(128)),
    ]
    worst_gap, worst_eig, ok = 0.0, math.inf, True
    for model, x, method in instances:
        reps = [hessian_psd(model, NishimoriParams.from_vector(model, x), method, a) for a in ASSEMBLIES]
        for row in hessian_agreement(reps, floor=1e-5):
            worst_gap = max(worst_gap, row["max_gap"])
            ok &= row["verdict"] == "pass"
        for r in reps[:2]:  # closed-form assemblies carry the PSD claim
            scaled = r.min_eigenvalue / (1.0 + r.spectral_norm)
            worst_eig = min(worst_eig, scaled)
            ok &= r.min_eigenvalue >= -EIGEN_RTOL * (1.0 + r.spectral_norm)
        ok &= reps[2].passed
    return ok, f"Hessian 3 ways on 4 instances: max pairwise gap {worst_gap:.2e} (tol 1e-5), min eig/(1+|H|) = {worst_eig:.2e} (>= -1e-8)"


def random_instances(n=50, seed=20240607):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        q = int(rng.choice([2, 3, 4]))
        n_sites = int(rng.choice([2, 3, 4]))
        bonds = [(i, i + 1) for i in range(n_sites - 1)]
        extra = [(i, j) for i in range(n_sites) for j in range(i + 2, n_sites)]
        bonds += [e for e in extra if rng.random() < 0.4]
        model = ModelSpec.build(q, BondGraph(n_sites, tuple(bonds)))
        params = NishimoriParams.from_vector(model, rng.uniform(0.05, 2.0, len(model.slots)))
        trial = TrialField({Slot.site(i, 1): float(rng.uniform(0.0, 1.5)) for i in range(n_sites) if rng.random() < 0.8})
        out.append((model, params, trial))
    return out


def _method_for(model, params_list, seed):
    dims = active_dimensions(model, [coupling_arrays(model, p)[0] for p in params_list])
    return Quadrature() if len(dims) <= 6 else MonteCarlo(20_000, seed=seed)


@_timed(7, 300)
def criterion_7():
    worst_slack, n_quad, n_mc, bound_ok, curve_ok = math.inf, 0, 0, True, True
    for n, (model, params, trial) in enumerate(random_instances()):
        method = _method_for(model, [params], seed=n)
        rep = gb_bound(model, params, trial, method)
        n_quad += isinstance(method, Quadrature)
        n_mc += isinstance(method, MonteCarlo)
        worst_slack = min(worst_slack, rep.slack)
        bound_ok &= rep.passed
        combo = combined_model(model, trial)
        ends = [interpolation_params(model, params, trial, t) for t in (0.0, 1.0)]
        curve_method = _method_for(combo, ends, seed=1000 + n)
        interp = check_interpolation(model, params, trial, (0.0, 0.25, 0.5, 0.75, 1.0), curve_method)
        curve_ok &= interp.convex and interp.endpoints_ok
    ok = bound_ok and curve_ok
    return ok, (
        f"GB on 50 random instances ({n_quad} quadrature, {n_mc} MC): min slack {worst_slack:.3e} "
        f"(>= -max(1e-8, 3 sigma)); curves convex with matching endpoints: {curve_ok}"
    )


@_timed(8, 120)
def criterion_8():
    ring = ModelSpec.build(2, BondGraph.ring(4))
    worst_dm, ok = 0.0, True
    for beta in (0.3, 0.5, 1.0):
        res = rs_meanfield_bound(ring, beta, z=2, scan_points=10_000)
        ms, vs = np.array(res.scan).T
        dm = abs(res.m_star - ms[np.argmax(vs)])
        worst_dm = max(worst_dm, dm)
        ok &= dm <= 1e-4 and res.report.passed
    return ok, f"RS mean field ring4 beta=0.3,0.5,1: max |M_golden - M_scan| = {worst_dm:.2e} (tol 1e-4), rhs <= E log Z: {ok}"


@_timed(9, 30)
def criterion_9():
    rng = np.random.default_rng(99)
    worst = 0.0
    for doc in bundled_models().values():
        model, params = doc.model, doc.params
        for _ in range(100):
            sample = DisorderSample.draw(model, rng)
            theta = 2 * math.pi * rng.integers(0, model.q, model.n_sites) / model.q
            z0 = exact_gibbs(model, params, sample).log_z
            z1 = exact_gibbs(model, params, gauge_transform(model, params, sample, theta)).log_z
            worst = max(worst, abs(z1 - z0) / max(1.0, abs(z0)))
    return worst <= 1e-12, f"log Z under 100 random gauge transforms x 5 bundled instances: max rel change {worst:.2e} (tol 1e-12)"


@_timed(10, None)
def criterion_10():
    configs = [
        RunConfig(suite="identities", model="z3_chain", method="mc", samples=200_000, deterministic=True),
        RunConfig(suite="thm1", model="ising_ring4", deterministic=True),
    ]
    old = os.environ.get(WORKERS_ENV)
    identical = True
    try:
        for cfg in configs:
            outputs = []
            for w in ("1", "2", "8"):
                os.environ[WORKERS_ENV] = w
                outputs.append(run(cfg).to_json())
            identical &= len(set(outputs)) == 1
    finally:
        if old is None:
            os.environ.pop(WORKERS_ENV, None)
        else:
            os.environ[WORKERS_ENV] = old
    worst = 0.0
    for q in (2, 3, 4, 8):
        model = _single_bond(q)
        s = model.slots[0]
        obs = {"log_z": log_z, "cos": lambda b, s=s: b.cos(s)}
        for x in (0.25, 1.0, 4.0):
            params = NishimoriParams.uniform(model, x)
            coarse = quenched_averages(model, params, obs, Quadrature(96))
            fine = quenched_averages(model, params, obs, Quadrature(192))
            worst = max(worst, *(abs(coarse[k].value - fine[k].value) for k in obs))
    ok = identical and worst < 1e-10
    return ok, f"reports byte-identical across 1/2/8 workers: {identical}; node doubling 96->192 max change {worst:.2e} (tol 1e-10)"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} acceptance criteria passed")
