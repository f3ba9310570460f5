import json

import numpy as np
import pytest

import mcmtomo


def test_fomgi_labels_and_selftest():
    labels = mcmtomo.fomgi_labels()
    assert len(labels) == 28
    assert {s for _, s in labels} == {"S", "A", "R", "Rt", "W", "Wt"}
    results = mcmtomo.selftest()
    assert results and all(ok for _, ok, _ in results)


def test_crunch_identity_is_ideal():
    q0, q1 = mcmtomo.crunch(np.eye(16))
    assert q0.shape == (4, 4)
    report = mcmtomo.extract(q0, q1)
    assert max(abs(v) for v in report["strengths"].values()) < 1e-12


def test_readout_flip_shows_up_in_read_sector():
    gs = json.loads(mcmtomo.truth_gateset({"readout_flip": 0.01}))
    q0, q1 = (np.array(q) for q in gs["mcm"])
    report = mcmtomo.extract(q0, q1)
    assert report["composites"]["readout_error"] == pytest.approx(0.01, rel=0.05)


def test_statistics():
    assert mcmtomo.n_sigma(166, 140) == pytest.approx(1.55, abs=0.01)
    assert mcmtomo.evidence_ratio(166, 60, 284, 59) == pytest.approx(118)
    with pytest.raises(ValueError):
        mcmtomo.n_sigma(1, 0)


def test_simulate_is_deterministic():
    gs = mcmtomo.ideal_gateset()
    a = mcmtomo.simulate(gs, 100, seed=3)
    assert a == mcmtomo.simulate(gs, 100, seed=3)
    assert a != mcmtomo.simulate(gs, 100, seed=4)
    assert len(json.loads(a)["circuits"]) == len(mcmtomo.design_circuits()) == 128


def test_fit_recovers_damping():
    truth = mcmtomo.truth_gateset({"t1_pre": 0.05})
    data = mcmtomo.simulate(truth, 20000, seed=1)
    rep = mcmtomo.fit(data, "CPTP", starts=1)
    assert rep["k_model"] == 59
    assert rep["two_delta_logl"] >= 0
    assert rep["composites"]["pre_mcm_t1"] == pytest.approx(0.05, rel=0.2)
    assert mcmtomo.loglikelihood(truth, data) <= mcmtomo.saturated_loglikelihood(data)


def test_validation_errors_become_value_errors():
    with pytest.raises(ValueError):
        mcmtomo.truth_gateset({"no_such_field": 1.0})
    with pytest.raises(ValueError):
        mcmtomo.simulate("not json", 10)
    with pytest.raises(mcmtomo.ValidationError):
        mcmtomo.circuit_probability(mcmtomo.ideal_gateset(), ["Gz"])
