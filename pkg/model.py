"""
Physical parameter types shared by the analytic rate formulas and the
Monte Carlo simulator.

Loss is given in dB at the interface; transmission is the canonical internal
form. Every type validates itself on construction, so an instance that exists
is usable.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Receiver defaults: 5e-6 dark counts per detector per 0.5 ns window
DPS_DARK_COUNT = 1e-5   # two detectors
BB84_DARK_COUNT = 2e-5  # four detectors, passive basis choice
DEFAULT_BASELINE_ERROR = 0.01

# Tolerance for the loss_db <-> transmission consistency check
_CONSISTENCY_TOL = 1e-12


class DpsRateError(Exception):
    """Base class for every error raised by this package"""


class ValidationError(DpsRateError, ValueError):
    """A parameter violates its type invariant

    Args:
        field: Name of the offending field
        message: Human readable description
    """

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class RegimeError(DpsRateError, ValueError):
    """The small-probability (at most one click per slot) regime is violated"""


class BeyondCutoffError(DpsRateError):
    """No strictly positive secure rate exists for the requested point"""


class EmptyBinError(DpsRateError):
    """No grid point of the attack surface falls inside the requested error band"""


def loss_to_transmission(loss_db: float) -> float:
    """Convert a channel loss in dB to a transmission in (0, 1]"""
    if not math.isfinite(loss_db) or loss_db < 0:
        raise ValidationError("loss_db", f"loss must be a nonnegative number of dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def transmission_to_loss(transmission: float) -> float:
    """Convert a transmission in (0, 1] to a channel loss in dB"""
    if not (0.0 < transmission <= 1.0):
        raise ValidationError("transmission", f"transmission out of range: {transmission}")
    return 0.0 - 10.0 * math.log10(transmission)


class SourceKind(Enum):
    POISSON = "poisson"
    SINGLE_PHOTON = "single"


class ProtocolKind(Enum):
    DPS = "dps"
    BB84 = "bb84"
    DPS_SEQUENTIAL = "dps-seq"

    @property
    def detectors(self) -> int:
        return 4 if self is ProtocolKind.BB84 else 2

    @property
    def default_dark_count(self) -> float:
        return BB84_DARK_COUNT if self is ProtocolKind.BB84 else DPS_DARK_COUNT


# Command-line protocol labels
PROTOCOL_LABELS = {
    "dps": (ProtocolKind.DPS, SourceKind.POISSON),
    "bb84-poisson": (ProtocolKind.BB84, SourceKind.POISSON),
    "bb84-single": (ProtocolKind.BB84, SourceKind.SINGLE_PHOTON),
    "dps-seq": (ProtocolKind.DPS_SEQUENTIAL, SourceKind.POISSON),
}


def parse_protocol(label: str) -> Tuple[ProtocolKind, SourceKind]:
    """Map a protocol label such as ``bb84-poisson`` to its (protocol, source) pair"""
    try:
        return PROTOCOL_LABELS[label.strip().lower()]
    except KeyError:
        choices = ", ".join(PROTOCOL_LABELS)
        raise ValidationError("protocol", f"unknown protocol '{label}' (choose from {choices})") from None


def protocol_label(protocol: ProtocolKind, source_kind: SourceKind) -> str:
    for label, pair in PROTOCOL_LABELS.items():
        if pair == (protocol, source_kind):
            return label
    raise ValidationError("protocol", f"{protocol.value} has no {source_kind.value} variant")


def _channel_problems(loss_db, transmission, dark_count, baseline_error):
    problems = []
    if not (0.0 < transmission <= 1.0):
        problems.append(("transmission", f"transmission out of range: {transmission}"))
    if not (math.isfinite(loss_db) and loss_db >= 0):
        problems.append(("loss_db", f"loss out of range: {loss_db}"))
    elif not problems:
        expected = 10.0 ** (-loss_db / 10.0)
        if not math.isclose(transmission, expected, rel_tol=1e-9, abs_tol=_CONSISTENCY_TOL):
            problems.append(("loss_db", f"loss_db {loss_db} disagrees with transmission {transmission}"))
    if not (0.0 <= dark_count < 1.0):
        problems.append(("dark_count", f"dark count out of range: {dark_count}"))
    if not (0.0 <= baseline_error < 0.5):
        problems.append(("baseline_error", f"baseline error out of range: {baseline_error}"))
    return problems


@dataclass(frozen=True)
class ChannelModel:
    """Lossy channel plus receiver noise

    Attributes:
        loss_db: Channel loss in dB
        transmission: T = 10^(-loss_db/10)
        dark_count: Dark-count probability per pulse slot, summed over detectors
        baseline_error: Error fraction mu from preparation, channel and detection
    """
    loss_db: float
    transmission: float
    dark_count: float = DPS_DARK_COUNT
    baseline_error: float = DEFAULT_BASELINE_ERROR

    def __post_init__(self):
        problems = _channel_problems(self.loss_db, self.transmission, self.dark_count, self.baseline_error)
        if problems:
            field, message = problems[0]
            raise ValidationError(field, message)

    @classmethod
    def from_loss_db(cls, loss_db: float, dark_count: float = DPS_DARK_COUNT,
                     baseline_error: float = DEFAULT_BASELINE_ERROR) -> "ChannelModel":
        return cls(loss_db, loss_to_transmission(loss_db), dark_count, baseline_error)

    @classmethod
    def from_transmission(cls, transmission: float, dark_count: float = DPS_DARK_COUNT,
                          baseline_error: float = DEFAULT_BASELINE_ERROR) -> "ChannelModel":
        return cls(transmission_to_loss(transmission), transmission, dark_count, baseline_error)


def default_channel(protocol: ProtocolKind, loss_db: float,
                    dark_count: Optional[float] = None,
                    baseline_error: float = DEFAULT_BASELINE_ERROR) -> ChannelModel:
    """Channel with the receiver's default dark count unless one is given"""
    if dark_count is None:
        dark_count = protocol.default_dark_count
    return ChannelModel.from_loss_db(loss_db, dark_count, baseline_error)


@dataclass(frozen=True)
class SourceModel:
    """Photon source; an ideal single-photon source always has nbar = 1"""
    kind: SourceKind
    mean_photon_number: float

    def __post_init__(self):
        if not (math.isfinite(self.mean_photon_number) and self.mean_photon_number > 0):
            raise ValidationError("mean_photon_number",
                                  f"mean photon number must be positive, got {self.mean_photon_number}")
        if self.kind is SourceKind.SINGLE_PHOTON and self.mean_photon_number != 1.0:
            raise ValidationError("mean_photon_number", "an ideal single photon source has nbar = 1")

    @classmethod
    def poisson(cls, nbar: float) -> "SourceModel":
        return cls(SourceKind.POISSON, nbar)

    @classmethod
    def single_photon(cls) -> "SourceModel":
        return cls(SourceKind.SINGLE_PHOTON, 1.0)

    @property
    def multiphoton_probability(self) -> float:
        """Upper bound p_m on the multiphoton emission probability"""
        if self.kind is SourceKind.SINGLE_PHOTON:
            return 0.0
        return self.mean_photon_number ** 2 / 2.0


def validate(channel: ChannelModel, source: SourceModel) -> None:
    """Re-check every invariant of a channel/source pair

    Raises:
        ValidationError: naming the first field that violates its invariant
    """
    problems = _channel_problems(channel.loss_db, channel.transmission,
                                 channel.dark_count, channel.baseline_error)
    if not (source.mean_photon_number > 0):
        problems.append(("mean_photon_number", f"mean photon number out of range: {source.mean_photon_number}"))
    elif source.kind is SourceKind.SINGLE_PHOTON and source.mean_photon_number != 1.0:
        problems.append(("mean_photon_number", "an ideal single photon source has nbar = 1"))
    for field, message in problems:
        logger.debug("validation failed on %s: %s", field, message)
    if problems:
        raise ValidationError(*problems[0])


@dataclass(frozen=True)
class ErrorCorrectionModel:
    """Error-correction inefficiency f(e) >= 1

    Either the constant ``constant`` (1 is the Shannon limit) or a lookup table
    of (e, f) pairs, linearly interpolated and clamped at its ends.
    """
    constant: float = 1.0
    table_e: Tuple[float, ...] = ()
    table_f: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.constant < 1.0:
            raise ValidationError("f_ec", f"error correction factor must be >= 1, got {self.constant}")
        if len(self.table_e) != len(self.table_f):
            raise ValidationError("f_ec", "lookup table columns differ in length")
        if self.table_f and min(self.table_f) < 1.0:
            raise ValidationError("f_ec", "lookup table contains f(e) < 1")
        if any(b <= a for a, b in zip(self.table_e, self.table_e[1:])):
            raise ValidationError("f_ec", "lookup table error rates must be strictly increasing")

    @classmethod
    def from_csv(cls, path: str) -> "ErrorCorrectionModel":
        """Load a two-column ``e,f`` table; ``#`` lines and a header row are skipped"""
        try:
            data = np.genfromtxt(path, delimiter=",", comments="#", dtype=float)
        except OSError as e:
            raise ValidationError("f_ec", f"cannot read error correction table {path}: {e}") from e
        data = np.atleast_2d(data)
        data = data[~np.isnan(data).any(axis=1)]
        if data.shape[0] == 0 or data.shape[1] != 2:
            raise ValidationError("f_ec", f"{path} is not a two-column e,f table")
        order = np.argsort(data[:, 0], kind="stable")
        data = data[order]
        return cls(table_e=tuple(float(x) for x in data[:, 0]), table_f=tuple(float(x) for x in data[:, 1]))

    def __call__(self, e: float) -> float:
        if not self.table_e:
            return self.constant
        return float(np.interp(e, self.table_e, self.table_f))


SHANNON_LIMIT = ErrorCorrectionModel()
