import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_line_fit
from tanglepick.mass_model import (
    FitError,
    MassModel,
    TrialRecord,
    fit,
    invert,
    load_model,
    picking_error,
    read_trials,
    save_model,
    slope_standard_error,
    write_trials,
)


def records(pairs, strategy="GI"):
    return [TrialRecord(0.0, 0.0, 90.0, float(w), float(m), strategy, k) for k, (w, m) in enumerate(pairs)]


def test_picking_error_examples():
    assert picking_error(10, [10, 10]) == 0
    assert picking_error(10, [8, 12]) == 2
    assert picking_error(8, [5.5]) == 2.5


def test_picking_error_matches_hand_sum():
    rng = np.random.default_rng(0)
    picks = rng.gamma(4.0, 2.0, size=20).tolist()
    total = Fraction(0)
    for m in picks:
        total += abs(Fraction(8) - Fraction(m))
    assert picking_error(8.0, picks) == float(total / 20)


def test_picking_error_preconditions():
    with pytest.raises(ValueError):
        picking_error(10, [])
    with pytest.raises(ValueError):
        picking_error(0, [1.0])


def test_noiseless_fit():
    model = fit(records([(20, 5), (40, 10), (60, 15)]))
    assert model.slope == pytest.approx(0.25, abs=1e-15)
    assert model.intercept == pytest.approx(0.0, abs=1e-12)
    assert (model.w_min, model.w_max) == (20.0, 60.0)
    assert model.residual_sd == pytest.approx(0.0, abs=1e-12)


def test_fit_needs_two_apertures():
    with pytest.raises(FitError, match="distinct"):
        fit(records([(40, 10), (40, 12)]))


def test_fit_rejects_decreasing_data():
    with pytest.raises(FitError, match="non-monotone"):
        fit(records([(20, 15), (40, 10), (60, 5)]))
    with pytest.raises(FitError):
        fit(records([(20, 5), (40, 5)]))


def test_noisy_fit_matches_normal_equations():
    rng = np.random.default_rng(1)
    w = rng.uniform(20, 60, 100)
    m = 0.3 * w + 2.0 + rng.normal(0, 1.0, 100)
    recs = records(zip(w, m))
    model = fit(recs)
    slope, intercept = exact_line_fit(w.tolist(), m.tolist())
    assert model.slope == pytest.approx(float(slope), rel=1e-12)
    assert model.intercept == pytest.approx(float(intercept), rel=1e-10)
    se = slope_standard_error(recs, model)
    assert abs(model.slope - 0.3) < 3 * se


def test_fit_uses_every_trial():
    # unbalanced replicates: a per-aperture-mean fit would give slope 0.25 here
    recs = records([(20, 5), (20, 5), (20, 5), (40, 12), (60, 15)])
    slope, intercept = exact_line_fit([20, 20, 20, 40, 60], [5, 5, 5, 12, 15])
    model = fit(recs)
    assert model.slope == pytest.approx(float(slope), rel=1e-12)
    assert model.intercept == pytest.approx(float(intercept), rel=1e-12)


def test_invert_and_clamp():
    model = MassModel(0.25, 0.0, 20.0, 60.0)
    assert invert(model, 10.0) == (40.0, False)
    assert invert(model, 100.0) == (60.0, True)
    assert invert(model, 1.0) == (20.0, True)


def test_model_requires_positive_slope():
    with pytest.raises(FitError):
        MassModel(0.0, 1.0, 20.0, 60.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.0, 20.0), st.floats(0.0, 1.0))
def test_round_trip_within_domain(slope, intercept, frac):
    model = fit(records([(20, slope * 20 + intercept), (60, slope * 60 + intercept)]))
    w = 20.0 + 40.0 * frac
    back = invert(model, model.predict(w))
    assert math.isclose(back.aperture, w, rel_tol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 50.0), min_size=1, max_size=20), st.floats(1.0, 40.0), st.floats(-0.5, 0.5))
def test_error_shifts_with_a_common_offset(picks, target, shift):
    # moving every pick and the target together leaves e unchanged
    shifted = [p + shift for p in picks]
    if target + shift <= 0:
        return
    assert picking_error(target + shift, shifted) == pytest.approx(picking_error(target, picks), abs=1e-9)


def test_trial_record_validation():
    with pytest.raises(ValueError):
        TrialRecord(0, 0, 0, 40, -1.0)


def test_trial_csv_roundtrip_and_filters(tmp_path):
    recs = records([(20, 5.125), (40, 10.5)], "GI") + records([(30, 7.0)], "SnP")
    path = tmp_path / "trials.csv"
    write_trials(path, recs)
    assert read_trials(path) == recs
    assert read_trials(path, strategy="SnP") == recs[2:]
    # no phase column: the phase filter is a no-op
    assert read_trials(path, phase="train") == recs


def test_read_trials_phase_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "phase,strategy,rx,ry,rtheta_deg,w_mm,picked_mass_g,trial_n\n"
        "train,GI,1,2,90,20,5,0\n"
        "test,GI,1,2,90,30,6,0\n"
    )
    assert [r.w for r in read_trials(path, phase="train")] == [20.0]


def test_read_trials_missing_columns(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("strategy,w_mm\nGI,20\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_trials(path)


def test_model_json_roundtrip(tmp_path):
    model = MassModel(0.3, -1.5, 20.0, 60.0, 0.7)
    save_model(model, tmp_path / "m.json")
    assert load_model(tmp_path / "m.json") == model
