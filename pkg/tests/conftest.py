import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from gaugeglass.model import BondGraph, ModelSpec


def gaussian_expectation(f, lo=-12.0, hi=12.0):
    """E[f(Z)], Z ~ N(0, 1), by adaptive quadrature (independent of the package)."""
    val, _ = integrate.quad(lambda z: f(z) * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi), lo, hi, limit=200, epsabs=1e-14, epsrel=1e-13)
    return val


def brute_log_z(q, n_sites, terms):
    """log Z by looping over configurations with plain math.cos.

    ``terms`` is a list of ``(sites, m, c_coef, s_coef)`` with
    ``-U = sum c cos(a) + s sin(a)`` and ``a = m (phi_i - phi_j)`` or ``m phi_i``.
    """
    vals = []
    for conf in itertools.product(range(q), repeat=n_sites):
        phi = [2 * math.pi * k / q for k in conf]
        neg_u = 0.0
        for sites, m, c, s in terms:
            a = m * (phi[sites[0]] - phi[sites[1]]) if len(sites) == 2 else m * phi[sites[0]]
            neg_u += c * math.cos(a) + s * math.sin(a)
        vals.append(neg_u)
    top = max(vals)
    return top + math.log(math.fsum(math.exp(v - top) for v in vals))


@pytest.fixture
def ising_bond():
    return ModelSpec.build(2, BondGraph.chain(2), name="ising bond")


@pytest.fixture
def z3_chain():
    return ModelSpec.build(3, BondGraph.chain(3), name="z3 chain")


@pytest.fixture
def rng():
    return np.random.default_rng(8675309)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n][1])
