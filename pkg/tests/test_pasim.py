import dataclasses

import numpy as np
import pytest

from ltpa.basis import BasisSpec, column_labels
from ltpa.errors import FormatError
from ltpa.ident import fit
from ltpa.ltmodel import LtModel, dumps_model, predict, predict_samples
from ltpa.metrics import nmse_db
from ltpa.pasim import (FIXTURE_ALPHA, SyntheticPa, build_default_doherty_like,
                        default_doherty_like, dumps_pa, load_pa, loads_pa, mismatched_pa,
                        save_pa, soft_clip, two_state_pa)
from ltpa.state import effective_memory


def test_golden_file_matches_builder():
    shipped, built = default_doherty_like(), build_default_doherty_like()
    assert dumps_pa(shipped) == dumps_pa(built)
    assert shipped == built


def test_fixture_constants():
    pa = default_doherty_like()
    m = pa.true_model
    assert m.basis == BasisSpec.mp(5, 2, odd_only=True)
    assert m.state_filters[0].alpha == (FIXTURE_ALPHA,)
    assert effective_memory(m.state_filters[0]) == pytest.approx(2000)
    ratio = np.linalg.norm(m.theta_dyn[0]) / np.linalg.norm(m.theta0)
    assert ratio == pytest.approx(0.05)
    assert pa.noise_floor_dbc == -60.0 and pa.clip_level is None


def test_noiseless_equals_predict(burst_x, fixture_pa):
    y = fixture_pa.noiseless().evaluate(burst_x)
    np.testing.assert_array_equal(y.samples, predict(fixture_pa.true_model, burst_x).samples)


def test_noise_level(burst_x, fixture_pa):
    clean = fixture_pa.noiseless().evaluate(burst_x)
    noisy = fixture_pa.evaluate(burst_x)
    assert burst_x.samples.size >= 100_000
    assert nmse_db(clean, noisy) == pytest.approx(-60, abs=0.2)


def test_seed_determinism(burst_x, fixture_pa):
    a = fixture_pa.evaluate(burst_x).samples
    b = fixture_pa.evaluate(burst_x).samples
    c = dataclasses.replace(fixture_pa, seed=1).evaluate(burst_x).samples
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_zero_theta1_is_classical_and_mp_reaches_floor(burst_x, fixture_pa):
    m = fixture_pa.true_model
    static = LtModel(m.basis, m.theta0, m.state_filters, (np.zeros_like(m.theta0),))
    np.testing.assert_array_equal(predict_samples(static, burst_x),
                                  predict_samples(LtModel(m.basis, m.theta0), burst_x))
    pa = SyntheticPa(static, -60.0, seed=5)
    y = pa.evaluate(burst_x)
    rep = fit(m.basis, [], burst_x, y)
    assert rep.final_nmse_db == pytest.approx(-60, abs=0.2)


def test_variants():
    two = two_state_pa()
    assert two.true_model.n_states == 2
    assert two.true_model.state_filters[1].alpha == (0.99,)
    mis = mismatched_pa()
    labels = column_labels(mis.true_model.basis)
    assert mis.true_model.theta0[labels.index((3, 0, 1))] != 0


def test_soft_clip():
    y = np.array([0.0, 0.1, 1.0, 10.0]) * np.exp(0.4j)
    out = soft_clip(y, 1.0)
    assert np.all(np.abs(out) < 1.0 + 1e-12)
    np.testing.assert_allclose(np.angle(out[1:]), 0.4)
    assert abs(out[1]) == pytest.approx(0.1, rel=1e-3)


def test_round_trip(tmp_path):
    for pa in (two_state_pa(), mismatched_pa(), dataclasses.replace(
            default_doherty_like(), noise_floor_dbc=None, clip_level=0.8)):
        assert loads_pa(dumps_pa(pa)) == pa
    p = tmp_path / "pa.model"
    save_pa(two_state_pa(), p)
    assert load_pa(p) == two_state_pa()
    # a bare model file is a noiseless PA
    assert loads_pa(dumps_model(two_state_pa().true_model)).noise_floor_dbc is None
    bad = dumps_pa(two_state_pa()).replace("noise_floor_dbc = -60", "noise_floor_dbc = 3")
    with pytest.raises(FormatError):
        loads_pa(bad)


def test_validation(fixture_pa):
    with pytest.raises(ValueError):
        dataclasses.replace(fixture_pa, noise_floor_dbc=0.0)
    with pytest.raises(ValueError):
        dataclasses.replace(fixture_pa, clip_level=-1.0)
