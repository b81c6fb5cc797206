import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaugeglass.errors import CapacityError, ConfigurationError
from gaugeglass.model import BondGraph, DisorderSample, ModelSpec, NishimoriParams
from gaugeglass.replicas import Factor, ReplicaPattern, cos, replica_correlator, sin


def _model():
    return ModelSpec.build(3, BondGraph.chain(3, one_body_sites=(2,)), harmonics=(1, 2), one_body_harmonics=(1,))


@st.composite
def patterns(draw, n_slots):
    n = draw(st.integers(1, 3))
    factors = []
    for _ in range(n):
        fn = draw(st.sampled_from(["cos", "sin"]))
        slot = draw(st.integers(0, n_slots - 1))
        if draw(st.booleans()):
            reps = (draw(st.integers(1, 3)),)
        else:
            reps = tuple(draw(st.permutations([1, 2, 3]))[:2])
        factors.append((fn, slot, reps))
    return factors


@settings(max_examples=40, deadline=None)
@given(spec=patterns(5), seed=st.integers(0, 2**31))
def test_factorized_equals_direct(spec, seed):
    model = _model()
    rng = np.random.default_rng(seed)
    params = NishimoriParams.from_vector(model, rng.uniform(0, 2, len(model.slots)))
    sample = DisorderSample.draw(model, rng)
    pattern = ReplicaPattern(tuple(Factor(fn, model.slots[s], reps) for fn, s, reps in spec))
    fact = replica_correlator(model, params, sample, pattern, "factorized")
    direct = replica_correlator(model, params, sample, pattern, "direct")
    assert fact == pytest.approx(direct, abs=1e-13)


def test_two_replica_overlap_is_sum_of_squares(rng):
    model = _model()
    params = NishimoriParams.uniform(model, 0.9)
    sample = DisorderSample.draw(model, rng)
    a = model.slots[1]
    c1 = replica_correlator(model, params, sample, [cos(a, 1)])
    s1 = replica_correlator(model, params, sample, [sin(a, 1)])
    c12 = replica_correlator(model, params, sample, [cos(a, 1, 2)], path="direct")
    assert c12 == pytest.approx(c1**2 + s1**2, abs=1e-14)
    s12 = replica_correlator(model, params, sample, [sin(a, 1, 2)], path="direct")
    assert abs(s12) < 1e-15


def test_expand_of_difference_factor():
    model = _model()
    a = model.slots[0]
    terms = ReplicaPattern.of(sin(a, 1, 2)).expand()
    assert sorted((c, m) for c, m in terms) == sorted(
        [(1.0, ((("sin", a),), (("cos", a),))), (-1.0, ((("cos", a),), (("sin", a),)))]
    )


def test_pattern_validation():
    model = _model()
    a = model.slots[0]
    with pytest.raises(ConfigurationError):
        Factor("tan", a, (1,))
    with pytest.raises(ConfigurationError):
        cos(a, 2, 2)
    with pytest.raises(ConfigurationError):
        cos(a, 0)
    with pytest.raises(ConfigurationError):
        ReplicaPattern.of(cos(a, 1, 5))
    with pytest.raises(ConfigurationError):
        ReplicaPattern(())


def test_direct_path_capacity(rng):
    model = ModelSpec.build(4, BondGraph.chain(5))
    params = NishimoriParams.uniform(model, 1.0)
    sample = DisorderSample.draw(model, rng)
    pattern = ReplicaPattern.of(cos(model.slots[0], 1, 4))
    with pytest.raises(CapacityError):
        replica_correlator(model, params, sample, pattern, path="direct")
    # the factorized route does not need the C**k space
    assert np.isfinite(replica_correlator(model, params, sample, pattern))
