"""
Tests for the closed-form rate and error formulas
"""
import math

import numpy as np
import pytest

from model import (
    ChannelModel,
    ErrorCorrectionModel,
    ProtocolKind,
    RegimeError,
    SourceModel,
    ValidationError,
    loss_to_transmission,
)
from rates import (
    beamsplitter_info,
    binary_entropy,
    evaluate,
    p_click,
    qber,
    rate_bb84,
    rate_dps,
    rate_sequential,
    sequential_params,
    splitting_fraction,
)

SINGLE = SourceModel.single_photon()


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
    assert binary_entropy(0.11) == pytest.approx(0.499915958165, abs=1e-9)
    assert binary_entropy(0.02) == pytest.approx(0.1414405425, abs=1e-9)


def test_binary_entropy_symmetric():
    for e in np.linspace(0.0, 1.0, 101):
        assert binary_entropy(e) == pytest.approx(binary_entropy(1.0 - e), abs=1e-14)


def test_binary_entropy_out_of_range():
    with pytest.raises(ValidationError):
        binary_entropy(1.2)


def test_p_click():
    assert p_click(0.2, 0.1, 0.0) == pytest.approx(0.02)
    assert p_click(0.2, 0.1, 1e-5) == pytest.approx(0.02001)
    assert p_click(1.0, 1e-4, 2e-5) == pytest.approx(1.2e-4)


def test_p_click_regime():
    with pytest.raises(RegimeError):
        p_click(1.0, 1.0, 1e-3)
    assert p_click(1.0, 1.0, 1e-3, saturate=True) == 1.0


def test_qber():
    assert qber(0.2, 0.1, 0.0, 0.01) == pytest.approx(0.01)
    assert qber(0.2, 0.1, 1e-5, 0.01) == pytest.approx(0.010249875062, rel=1e-9)
    # Signal fully lost: only dark counts, which are random
    assert qber(1e-30, 1e-30, 1e-5, 0.0) == pytest.approx(0.5)


def test_qber_without_clicks():
    with pytest.raises(ValidationError):
        qber(0.2, 0.5, 0.0, 0.01, click_probability=0.0)


def test_rate_dps():
    assert rate_dps(0.2, 1.0, 0.0, 0.0) == pytest.approx(0.12, abs=1e-15)
    # qber -> pc0_bound -> h chained, f = 1
    assert rate_dps(0.2, 0.1, 1e-5, 0.01) == pytest.approx(0.00840868283732065, rel=1e-9)
    assert rate_dps(0.2, 0.01, 1e-5, 0.01) == pytest.approx(0.000777343953979289, rel=1e-9)


def test_rate_dps_error_free_limit():
    for nbar in (0.05, 0.2, 0.4):
        for T in (1.0, 0.3, 1e-3):
            assert rate_dps(nbar, T, 0.0, 0.0) == pytest.approx(nbar * T * (1 - 2 * nbar), rel=1e-12)


def test_rate_dps_clamps_when_dark_counts_dominate():
    assert rate_dps(0.2, 1e-5, 1e-5, 0.01) == 0.0


def test_rate_dps_rejects_splitting_wall():
    with pytest.raises(ValidationError) as info:
        rate_dps(0.5, 0.1, 1e-5, 0.01)
    assert info.value.field == "nbar"


def test_rate_dps_with_error_correction_overhead():
    ideal = rate_dps(0.2, 0.1, 1e-5, 0.01)
    real = rate_dps(0.2, 0.1, 1e-5, 0.01, ErrorCorrectionModel(constant=1.2))
    assert 0 < real < ideal


def test_rate_bb84_single_photon():
    assert rate_bb84(SINGLE, 1.0, 0.0, 0.0) == pytest.approx(1.0)
    assert rate_bb84(SINGLE, 0.01, 2e-5, 0.01) == pytest.approx(0.00852921547663847, rel=1e-9)


def test_rate_bb84_tagging_wipes_out_the_key():
    # p_m = nbar^2/2 = 0.02 = nbar*T
    assert rate_bb84(SourceModel.poisson(0.2), 0.1, 0.0, 0.01) == 0.0


def test_sequential_params():
    params = sequential_params(0.1, 0.1, 0.02)
    assert params.k == pytest.approx(2.0)
    assert params.eps_seq == pytest.approx(1 / 6, abs=1e-12)
    assert params.attacked_fraction == pytest.approx(0.12)
    assert sequential_params(0.2, 0.01, 0.01, integer_k=True).k == 3.0
    assert sequential_params(0.2, 1.0, 0.01, integer_k=True).k == 1.0


def test_sequential_params_rejects_degenerate_base():
    with pytest.raises(ValidationError):
        sequential_params(1.0, 0.1, 0.01)


def test_rate_sequential():
    assert rate_sequential(0.1, 0.1, 0.0, 0.0) == pytest.approx(0.01)
    assert rate_sequential(0.1, 0.1, 0.0, 0.02) == pytest.approx(0.0077855945745818, rel=1e-9)
    assert rate_sequential(0.229555, 0.01, 1e-5, 0.01) == pytest.approx(0.00185516841950341, rel=1e-9)


def test_rate_sequential_clamps():
    # 1 - 2*0.3*2 - h(0.3) < 0
    assert rate_sequential(0.1, 0.1, 0.0, 0.3) == 0.0


def test_rate_sequential_integer_k_is_never_lower():
    continuous = rate_sequential(0.2, 0.01, 1e-5, 0.01)
    rounded = rate_sequential(0.2, 0.01, 1e-5, 0.01, integer_k=True)
    assert rounded >= continuous


def test_splitting_fraction():
    assert splitting_fraction(0.1, 0.0) == pytest.approx(0.2)
    assert splitting_fraction(0.1, 1.0) == 0.0
    assert splitting_fraction(0.25, 0.5) == pytest.approx(0.25)


def test_beamsplitter_info():
    assert beamsplitter_info(0.1, 0.0) == pytest.approx(0.1)
    assert beamsplitter_info(0.1, 1.0) == 0.0
    assert beamsplitter_info(0.2, 0.75) == pytest.approx(0.05)
    for nbar, T in [(0.1, 0.3), (0.25, 0.01), (0.4, 0.9)]:
        assert splitting_fraction(nbar, T) == pytest.approx(2 * beamsplitter_info(nbar, T))
        assert beamsplitter_info(nbar, T, delayed=True) == splitting_fraction(nbar, T)


@pytest.mark.parametrize("rate_fn", [
    lambda T: rate_dps(0.2, T, 1e-5, 0.01),
    lambda T: rate_bb84(SINGLE, T, 2e-5, 0.01),
    lambda T: rate_bb84(SourceModel.poisson(0.1), T, 2e-5, 0.01),
    lambda T: rate_sequential(0.2, T, 1e-5, 0.01),
])
def test_rates_nonincreasing_in_loss(rate_fn):
    values = [rate_fn(loss_to_transmission(loss)) for loss in range(61)]
    assert all(v >= 0.0 for v in values)
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_evaluate_records_regime_flag_for_lossless_single_photon():
    channel = ChannelModel.from_loss_db(0.0, dark_count=2e-5)
    point = evaluate(ProtocolKind.BB84, SINGLE, channel)
    assert "regime" in point.flags
    assert point.p_click == 1.0
    assert point.label == "bb84-single"
    assert point.rate > 0


def test_evaluate_records_tagging_flag():
    channel = ChannelModel.from_loss_db(30.0, dark_count=2e-5)
    point = evaluate(ProtocolKind.BB84, SourceModel.poisson(0.9), channel)
    assert point.flags == ("tagging",)
    assert point.rate == 0.0


def test_evaluate_matches_formula():
    channel = ChannelModel.from_loss_db(10.0)
    point = evaluate(ProtocolKind.DPS, SourceModel.poisson(0.2), channel)
    assert point.rate == pytest.approx(rate_dps(0.2, channel.transmission, 1e-5, 0.01), rel=1e-15)
    assert point.qber == pytest.approx(0.010249875062, rel=1e-9)
    assert point.flags == ()
    assert math.isclose(point.transmission, 0.1, rel_tol=1e-12)
