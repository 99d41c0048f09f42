import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltpa.basis import BasisSpec, parameter_count
from ltpa.errors import FormatError, ModelConsistencyError
from ltpa.ltmodel import (LtModel, dumps_model, flop_cost, load_model, loads_model, predict,
                          predict_samples, save_model)
from ltpa.signal import IqSignal
from ltpa.state import StateFilter


def random_model(rng, spec, filters):
    Q = parameter_count(spec)
    th = [rng.standard_normal(Q) + 1j * rng.standard_normal(Q) for _ in range(len(filters) + 1)]
    return LtModel(spec, th[0], tuple(filters), tuple(th[1:]), label="rand")


def test_scalar_loop_oracle(rng):
    spec = BasisSpec.mp(5, 2)
    model = random_model(rng, spec, [StateFilter.ar(0.98)])
    x = 0.4 * (rng.standard_normal(512) + 1j * rng.standard_normal(512))
    x[200:] *= 0.3
    alpha = 0.98
    ref = np.zeros(512, complex)
    s = 0.0
    for n in range(512):
        s = abs(x[n]) ** 2 + alpha * s
        acc = 0
        for j, (p, m) in enumerate([(p, m) for m in range(3) for p in range(1, 6)]):
            v = x[n - m] if n - m >= 0 else 0
            acc += v * abs(v) ** (p - 1) * (model.theta0[j] + s * model.theta_dyn[0][j])
        ref[n] = acc
    np.testing.assert_allclose(predict_samples(model, x), ref, rtol=1e-12)


def test_zero_dynamic_theta_is_classical_bitwise(rng):
    spec = BasisSpec.mp(4, 2)
    m = random_model(rng, spec, [])
    lt = LtModel(spec, m.theta0, (StateFilter.ar(0.9),), (np.zeros(parameter_count(spec)),))
    x = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    assert np.array_equal(predict_samples(m, x), predict_samples(lt, x))


def test_constant_state_reduction():
    spec = BasisSpec.mp(3, 1)
    rng = np.random.default_rng(1)
    m = random_model(rng, spec, [StateFilter.ar(0.9, normalized=True)])
    n = 2000
    x = 0.5 * np.exp(1j * np.linspace(0, 40, n))  # constant envelope
    y = predict_samples(m, x)
    eff = LtModel(spec, m.theta0 + 0.25 * m.theta_dyn[0])
    np.testing.assert_allclose(y[-100:], predict_samples(eff, x)[-100:], rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_phase_homogeneity(phi):
    rng = np.random.default_rng(3)
    m = random_model(rng, BasisSpec.mp(5, 2), [StateFilter.arma(0.9, 0.2)])
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    c = np.exp(1j * phi)
    np.testing.assert_allclose(predict_samples(m, c * x), c * predict_samples(m, x),
                               rtol=1e-11, atol=1e-12)


def test_predict_keeps_rate(rng):
    m = random_model(rng, BasisSpec.mp(1, 0), [])
    y = predict(m, IqSignal([1, 2], 7.0))
    assert y.sample_rate == 7.0 and len(y) == 2


def test_consistency_errors():
    with pytest.raises(ModelConsistencyError):
        LtModel(BasisSpec.mp(2, 0), np.ones(3))
    with pytest.raises(ModelConsistencyError):
        LtModel(BasisSpec.mp(2, 0), np.ones(2), (StateFilter.ar(0.5),), ())


def test_parameter_count_doubles():
    spec = BasisSpec.mp(7, 4)
    base = LtModel(spec, np.ones(35))
    lt = LtModel(spec, np.ones(35), (StateFilter.ar(0.99),), (np.ones(35),))
    assert lt.parameter_count() == 2 * base.parameter_count() == 70
    assert lt.parameter_count(include_filters=True) == 71


def test_flop_cost_examples():
    assert flop_cost(LtModel(BasisSpec.mp(1, 0), np.ones(1))) == 6
    # MP(7,4)+AR(1): |x| 4, power chain 5, six x|x|^(p-1) products 12   -> 21
    # two dot products over 35 terms: 2 * (35*6 + 34*2)                 -> 556
    # state combine 6 + 2, |x|^2 3, pole update 6 + 2                  -> 19
    m = LtModel(BasisSpec.mp(7, 4), np.ones(35), (StateFilter.ar(0.99),), (np.ones(35),))
    assert flop_cost(m) == 596
    assert flop_cost(m.with_filter(0, StateFilter.ar(0.99, normalized=True))) == 602


def test_flop_cost_monotone():
    def cost(P, M, K):
        spec = BasisSpec.mp(P, M)
        Q = parameter_count(spec)
        f = tuple(StateFilter.ar(0.9) for _ in range(K))
        return flop_cost(LtModel(spec, np.ones(Q), f, tuple(np.ones(Q) for _ in f)))
    for P in range(1, 7):
        for M in range(0, 4):
            for K in range(0, 3):
                assert cost(P + 1, M, K) > cost(P, M, K)
                assert cost(P, M + 1, K) > cost(P, M, K)
                assert cost(P, M, K + 1) > cost(P, M, K)


def test_save_load_round_trip(tmp_path, rng):
    for spec in (BasisSpec.mp(5, 2, odd_only=True), BasisSpec.gmp(3, 1, 1),
                 BasisSpec.volterra(3, 1)):
        m = random_model(rng, spec, [StateFilter.ar(0.999, normalized=True),
                                     StateFilter.arma(0.9 + 0.01j, -0.3, initial_state=0.1)])
        p = tmp_path / "m.model"
        save_model(m, p)
        back = load_model(p)
        assert back == m
        assert all(np.array_equal(a, b) for a, b in zip(back.thetas(), m.thetas()))
    text = dumps_model(m)
    assert text.startswith("ltpa-model-version = 1\n")


def test_minimal_hand_written_file():
    text = """ltpa-model-version = 1
[basis]
kind = mp
order = 1
memory = 0
[theta.0]
0 1 0
"""
    m = loads_model(text)
    x = np.array([1 + 1j, 2 - 3j])
    np.testing.assert_array_equal(predict_samples(m, x), x)


def test_format_errors(rng):
    m = random_model(rng, BasisSpec.mp(2, 0), [StateFilter.ar(0.5), StateFilter.ar(0.6)])
    text = dumps_model(m)
    cut = text[:text.index("[theta.1]")]
    with pytest.raises(FormatError, match="theta"):
        loads_model(cut)
    with pytest.raises(FormatError):
        loads_model(text.replace("ltpa-model-version = 1", "ltpa-model-version = 2"))
    with pytest.raises(FormatError):
        loads_model(text.replace("[theta.0]\nlength = 2\n0 ", "[theta.0]\nlength = 2\n0 x"))
