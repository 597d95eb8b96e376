"""
Tests for the physical parameter types and their validation
"""
import numpy as np
import pytest

from model import (
    BB84_DARK_COUNT,
    DPS_DARK_COUNT,
    SHANNON_LIMIT,
    ChannelModel,
    ErrorCorrectionModel,
    ProtocolKind,
    SourceKind,
    SourceModel,
    ValidationError,
    default_channel,
    loss_to_transmission,
    parse_protocol,
    protocol_label,
    transmission_to_loss,
    validate,
)


@pytest.mark.parametrize("loss_db, expected", [(0.0, 1.0), (10.0, 0.1), (30.0, 0.001)])
def test_loss_to_transmission(loss_db, expected):
    assert loss_to_transmission(loss_db) == pytest.approx(expected, rel=1e-12)


def test_negative_loss_rejected():
    with pytest.raises(ValidationError) as info:
        loss_to_transmission(-1.0)
    assert info.value.field == "loss_db"


def test_loss_round_trip():
    for loss_db in np.linspace(0.0, 60.0, 241):
        assert transmission_to_loss(loss_to_transmission(loss_db)) == pytest.approx(loss_db, abs=1e-9)


def test_channel_from_loss_is_consistent():
    channel = ChannelModel.from_loss_db(17.5)
    assert abs(channel.transmission - 10 ** (-1.75)) < 1e-12
    assert channel.dark_count == DPS_DARK_COUNT
    assert channel.baseline_error == 0.01


def test_channel_from_transmission():
    channel = ChannelModel.from_transmission(0.5, dark_count=0.0, baseline_error=0.0)
    assert channel.loss_db == pytest.approx(3.0103, abs=1e-4)


def test_inconsistent_channel_rejected():
    with pytest.raises(ValidationError) as info:
        ChannelModel(loss_db=10.0, transmission=0.5)
    assert info.value.field == "loss_db"


def test_validate_accepts_good_parameters():
    channel = ChannelModel.from_transmission(0.5, dark_count=1e-5, baseline_error=0.01)
    validate(channel, SourceModel.poisson(0.2))


@pytest.mark.parametrize("kwargs, field, text", [
    ({"loss_db": 0.0, "transmission": 1.2}, "transmission", "transmission out of range"),
    ({"loss_db": 3.0, "transmission": 10 ** -0.3, "baseline_error": 0.6}, "baseline_error",
     "baseline error out of range"),
    ({"loss_db": 3.0, "transmission": 10 ** -0.3, "dark_count": -1e-5}, "dark_count", "dark count out of range"),
])
def test_invalid_channel_names_the_field(kwargs, field, text):
    with pytest.raises(ValidationError) as info:
        ChannelModel(**kwargs)
    assert info.value.field == field
    assert text in str(info.value)


def test_single_photon_source():
    source = SourceModel.single_photon()
    assert source.mean_photon_number == 1.0
    assert source.multiphoton_probability == 0.0
    with pytest.raises(ValidationError):
        SourceModel(SourceKind.SINGLE_PHOTON, 0.5)


def test_poisson_multiphoton_bound():
    assert SourceModel.poisson(0.2).multiphoton_probability == pytest.approx(0.02)


def test_nonpositive_nbar_rejected():
    with pytest.raises(ValidationError) as info:
        SourceModel.poisson(0.0)
    assert info.value.field == "mean_photon_number"


def test_receiver_defaults():
    assert ProtocolKind.DPS.detectors == 2
    assert ProtocolKind.BB84.detectors == 4
    assert default_channel(ProtocolKind.BB84, 10.0).dark_count == BB84_DARK_COUNT
    assert default_channel(ProtocolKind.DPS_SEQUENTIAL, 10.0).dark_count == DPS_DARK_COUNT
    assert default_channel(ProtocolKind.BB84, 10.0, dark_count=0.0).dark_count == 0.0


def test_protocol_labels():
    assert parse_protocol("BB84-Single") == (ProtocolKind.BB84, SourceKind.SINGLE_PHOTON)
    assert protocol_label(ProtocolKind.DPS_SEQUENTIAL, SourceKind.POISSON) == "dps-seq"
    with pytest.raises(ValidationError):
        parse_protocol("b92")


def test_error_correction_default_is_shannon_limit():
    assert SHANNON_LIMIT(0.03) == 1.0
    with pytest.raises(ValidationError):
        ErrorCorrectionModel(constant=0.9)


def test_error_correction_table(tmp_path):
    path = tmp_path / "fec.csv"
    path.write_text("# code efficiency\ne,f\n0.05,1.2\n0.01,1.1\n0.10,1.4\n")
    ec = ErrorCorrectionModel.from_csv(str(path))
    assert ec.table_e == (0.01, 0.05, 0.10)
    assert ec(0.03) == pytest.approx(1.15)
    assert ec(0.0) == pytest.approx(1.1)
    assert ec(0.3) == pytest.approx(1.4)


def test_error_correction_table_below_one_rejected(tmp_path):
    path = tmp_path / "fec.csv"
    path.write_text("0.01,0.8\n0.05,1.2\n")
    with pytest.raises(ValidationError):
        ErrorCorrectionModel.from_csv(str(path))
