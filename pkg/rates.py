"""
Closed-form asymptotic rates: detection probability, QBER, binary entropy,
the DPS rate under individual attacks, BB84 with Poisson or single-photon
sources, the DPS rate against sequential attacks, and photon-splitting leaks.

All rates are secure bits per pulse and are clamped at zero.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from scipy.special import entr

from collision import pc0_bound
from model import (
    SHANNON_LIMIT,
    ChannelModel,
    ErrorCorrectionModel,
    ProtocolKind,
    RegimeError,
    SourceKind,
    SourceModel,
    ValidationError,
    protocol_label,
)

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class RatePoint:
    """One evaluated operating point (a row of a sweep)"""
    loss_db: float
    transmission: float
    nbar: float
    p_click: float
    qber: float
    rate: float
    protocol: ProtocolKind
    source_kind: SourceKind
    flags: Tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return protocol_label(self.protocol, self.source_kind)


@dataclass(frozen=True)
class SequentialAttackParams:
    """Block length k, the block error rate 1/(2(k+1)) and the system error budget"""
    k: float
    eps_seq: float
    eps_s: float

    @property
    def attacked_fraction(self) -> float:
        """Share of the sifted bits Eve can attack without exceeding eps_s"""
        return min(1.0, self.eps_s / self.eps_seq)


def binary_entropy(e: float) -> float:
    """h(e) in bits, with h(0) = h(1) = 0"""
    if not (0.0 <= e <= 1.0):
        raise ValidationError("error_rate", f"entropy argument must lie in [0, 1], got {e}")
    return float((entr(e) + entr(1.0 - e)) / _LN2)


def p_click(nbar: float, transmission: float, dark_count: float, saturate: bool = False) -> float:
    """Probability per slot that the receiver clicks: nbar*T + d

    Multiple detections are ignored, which needs nbar*T + d <= 1. With
    ``saturate`` the value is capped at 1 instead of rejected.
    """
    value = nbar * transmission + dark_count
    if value > 1.0:
        if saturate:
            return 1.0
        raise RegimeError(f"click probability nbar*T + d = {value} exceeds 1")
    return value


def qber(nbar: float, transmission: float, dark_count: float, baseline_error: float,
         click_probability: Optional[float] = None) -> float:
    """Sifted-key error rate (mu*p_click + d/2) / p_click"""
    p = click_probability if click_probability is not None else p_click(nbar, transmission, dark_count)
    if p <= 0:
        raise ValidationError("p_click", "zero click probability leaves no sifted key")
    return (baseline_error * p + dark_count / 2.0) / p


def _clamp(rate: float) -> float:
    return rate if rate > 0.0 else 0.0


def rate_dps(nbar: float, transmission: float, dark_count: float, baseline_error: float,
             ec: ErrorCorrectionModel = SHANNON_LIMIT) -> float:
    """DPS secure rate under individual attacks

    p_click * [(1 - 2 nbar)(-log2 Pc0(e)) - f(e) h(e)], clamped at 0.
    """
    if not (0.0 < nbar < 0.5):
        raise ValidationError("nbar", f"DPS needs 0 < nbar < 1/2, got {nbar}")
    p = p_click(nbar, transmission, dark_count, saturate=True)
    e = qber(nbar, transmission, dark_count, baseline_error, click_probability=p)
    if e >= 0.5:
        return 0.0
    privacy = (1.0 - 2.0 * nbar) * -math.log2(pc0_bound(e).pc0)
    return _clamp(p * (privacy - ec(e) * binary_entropy(e)))


def bb84_beta(click_probability: float, multiphoton_probability: float) -> float:
    """Fraction of clicks not attributable to multiphoton emissions"""
    return (click_probability - multiphoton_probability) / click_probability


def rate_bb84(source: SourceModel, transmission: float, dark_count: float, baseline_error: float,
              ec: ErrorCorrectionModel = SHANNON_LIMIT) -> float:
    """BB84 rate against individual attacks, including photon-number splitting

    Returns 0 when the multiphoton fraction swallows every click (beta <= 0)
    or when e/beta leaves the range where the bound is defined.
    """
    p = p_click(source.mean_photon_number, transmission, dark_count, saturate=True)
    beta = bb84_beta(p, source.multiphoton_probability)
    if beta <= 0:
        logger.debug("tagging attack dominates: p_m=%g >= p_click=%g", source.multiphoton_probability, p)
        return 0.0
    e = qber(source.mean_photon_number, transmission, dark_count, baseline_error, click_probability=p)
    if e >= 0.5:
        return 0.0
    ratio = e / beta
    if ratio > 0.5:
        return 0.0
    argument = 0.5 + 2.0 * ratio - 2.0 * ratio * ratio
    return _clamp(p * (-beta * math.log2(argument) - ec(e) * binary_entropy(e)))


def sequential_params(nbar: float, transmission: float, eps_s: float,
                      integer_k: bool = False) -> SequentialAttackParams:
    """Longest block Eve can build while conserving Bob's click rate

    nbar^k >= nbar*T gives k = log_nbar(T) + 1. The integer variant rounds
    down, never below 1.
    """
    if not (0.0 < nbar < 1.0):
        raise ValidationError("nbar", f"sequential attack needs 0 < nbar < 1, got {nbar}")
    if not (0.0 < transmission <= 1.0):
        raise ValidationError("transmission", f"transmission out of range: {transmission}")
    if eps_s < 0:
        raise ValidationError("eps_s", "system error rate must be nonnegative")
    k = math.log(transmission) / math.log(nbar) + 1.0
    if integer_k:
        k = float(max(1, math.floor(k + 1e-12)))
    return SequentialAttackParams(k=k, eps_seq=1.0 / (2.0 * (k + 1.0)), eps_s=eps_s)


def rate_sequential(nbar: float, transmission: float, dark_count: float, baseline_error: float,
                    ec: ErrorCorrectionModel = SHANNON_LIMIT, integer_k: bool = False) -> float:
    """DPS rate against sequential attacks, p_click * [1 - 2 eps_s k - f(e) h(e)]

    eps_s is the system QBER. This uses the closing rate expression directly;
    the intermediate block count N(k+1)eps_s drops a factor 2 that the
    closing expression keeps.
    """
    p = p_click(nbar, transmission, dark_count, saturate=True)
    e = qber(nbar, transmission, dark_count, baseline_error, click_probability=p)
    params = sequential_params(nbar, transmission, e, integer_k=integer_k)
    if e >= 0.5:
        return 0.0
    return _clamp(p * (1.0 - 2.0 * e * params.k - ec(e) * binary_entropy(e)))


def splitting_fraction(nbar: float, transmission: float) -> float:
    """Share of the sifted key Eve learns from stored split photons: 2 nbar (1 - T)"""
    if nbar * (1.0 - transmission) > 0.5:
        raise ValidationError("nbar", "nbar*(1 - T) must not exceed 1/2")
    return 2.0 * nbar * (1.0 - transmission)


def beamsplitter_info(nbar: float, transmission: float, delayed: bool = False) -> float:
    """Probability Eve knows a sifted bit after tapping the 1 - T lost fraction

    With a delayed measurement behind an optical switch this doubles and
    equals splitting_fraction.
    """
    if delayed:
        return splitting_fraction(nbar, transmission)
    return nbar * (1.0 - transmission)


def protocol_rate(protocol: ProtocolKind, source: SourceModel, channel: ChannelModel,
                  ec: ErrorCorrectionModel = SHANNON_LIMIT, integer_k: bool = False) -> float:
    """Dispatch to the rate formula of ``protocol``"""
    T, d, mu = channel.transmission, channel.dark_count, channel.baseline_error
    if protocol is ProtocolKind.BB84:
        return rate_bb84(source, T, d, mu, ec)
    if protocol is ProtocolKind.DPS:
        return rate_dps(source.mean_photon_number, T, d, mu, ec)
    return rate_sequential(source.mean_photon_number, T, d, mu, ec, integer_k=integer_k)


def evaluate(protocol: ProtocolKind, source: SourceModel, channel: ChannelModel,
             ec: ErrorCorrectionModel = SHANNON_LIMIT, integer_k: bool = False,
             extra_flags: Tuple[str, ...] = ()) -> RatePoint:
    """Evaluate one protocol at one operating point, recording any flags"""
    nbar = source.mean_photon_number
    T, d = channel.transmission, channel.dark_count
    flags = list(extra_flags)
    if nbar * T + d > 1.0:
        flags.append("regime")
    p = p_click(nbar, T, d, saturate=True)
    e = qber(nbar, T, d, channel.baseline_error, click_probability=p)
    if protocol is ProtocolKind.BB84 and bb84_beta(p, source.multiphoton_probability) <= 0:
        flags.append("tagging")
    if protocol is ProtocolKind.DPS_SEQUENTIAL and sequential_params(nbar, T, e, integer_k).k < 1.0:
        flags.append("k_below_one")
    rate = protocol_rate(protocol, source, channel, ec, integer_k=integer_k)
    return RatePoint(loss_db=channel.loss_db, transmission=T, nbar=nbar, p_click=p,
                     qber=min(e, 0.5), rate=rate, protocol=protocol, source_kind=source.kind,
                     flags=tuple(flags))
