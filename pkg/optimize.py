"""
Per-loss optimization of the mean photon number, loss sweeps and cutoff search
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

import rates
from model import (
    DEFAULT_BASELINE_ERROR,
    SHANNON_LIMIT,
    BeyondCutoffError,
    ChannelModel,
    ErrorCorrectionModel,
    ProtocolKind,
    SourceKind,
    SourceModel,
    ValidationError,
    default_channel,
    parse_protocol,
)

logger = logging.getLogger(__name__)

COARSE_GRID_POINTS = 256
NBAR_FLOOR = 1e-6
# Photon splitting reveals the whole DPS key at nbar = 1/2
DPS_NBAR_CEILING = 0.5 - 1e-9
POISSON_NBAR_CEILING = 1.0
RATE_FLOOR = 1e-15
TIE_TOLERANCE = 1e-12
GOLDEN_TOL = 1e-10

PROBE_CEILING_DB = 100.0
CUTOFF_RESOLUTION_DB = 0.01


@dataclass(frozen=True)
class OptimumResult:
    nbar_opt: float
    rate_opt: float
    bracket: Tuple[float, float]
    evaluations: int


@dataclass(frozen=True)
class SweepSpec:
    """Loss grid, protocol labels and the shared channel/error-correction settings

    ``dark_count`` None means each protocol's receiver default. Sequential-attack
    rows are evaluated at the DPS-optimal nbar when
    ``sequential_at_dps_optimum`` is set.
    """
    loss_min_db: float = 0.0
    loss_max_db: float = 60.0
    loss_step_db: float = 1.0
    protocols: Tuple[str, ...] = ("dps", "bb84-poisson", "bb84-single", "dps-seq")
    dark_count: Optional[float] = None
    baseline_error: float = DEFAULT_BASELINE_ERROR
    ec: ErrorCorrectionModel = field(default=SHANNON_LIMIT)
    sequential_at_dps_optimum: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.loss_min_db < 0:
            raise ValidationError("loss_min_db", "loss must be nonnegative")
        if self.loss_min_db > self.loss_max_db:
            raise ValidationError("loss_max_db", "loss_min must not exceed loss_max")
        if not self.loss_step_db > 0:
            raise ValidationError("loss_step_db", "loss step must be positive")
        for label in self.protocols:
            parse_protocol(label)

    def losses(self) -> np.ndarray:
        count = int(math.floor((self.loss_max_db - self.loss_min_db) / self.loss_step_db + 1e-9)) + 1
        return np.round(self.loss_min_db + self.loss_step_db * np.arange(count), 10)


def nbar_bracket(protocol: ProtocolKind, source_kind: SourceKind) -> Tuple[float, float]:
    """Search interval for nbar; single-photon BB84 has none"""
    if source_kind is SourceKind.SINGLE_PHOTON:
        raise ValidationError("protocol", "single-photon BB84 has no free mean photon number")
    if protocol is ProtocolKind.BB84:
        return NBAR_FLOOR, POISSON_NBAR_CEILING
    return NBAR_FLOOR, DPS_NBAR_CEILING


def _resolve(protocol) -> Tuple[ProtocolKind, SourceKind]:
    if isinstance(protocol, str):
        return parse_protocol(protocol)
    if isinstance(protocol, ProtocolKind):
        return protocol, SourceKind.POISSON
    return protocol


class _Objective:
    """Rate as a function of nbar with call counting; rates under RATE_FLOOR are 0"""

    def __init__(self, protocol: ProtocolKind, channel: ChannelModel, ec: ErrorCorrectionModel,
                 bracket: Tuple[float, float]):
        self.protocol = protocol
        self.channel = channel
        self.ec = ec
        self.lo, self.hi = bracket
        self.calls = 0

    def __call__(self, nbar: float) -> float:
        self.calls += 1
        if not (self.lo <= nbar <= self.hi):
            return 0.0
        rate = rates.protocol_rate(self.protocol, SourceModel.poisson(float(nbar)), self.channel, self.ec)
        return rate if rate >= RATE_FLOOR else 0.0


def optimize_nbar(protocol, channel: ChannelModel, ec: ErrorCorrectionModel = SHANNON_LIMIT) -> OptimumResult:
    """Maximize the secure rate over nbar at a fixed channel

    A log-spaced coarse grid locates the best region (the rate can be
    multimodal near cutoff); golden-section search then refines inside the
    neighbouring grid points. Among rates equal to a relative 1e-12 the smallest
    nbar wins.

    Args:
        protocol: ``dps``, ``bb84-poisson`` or ``dps-seq`` (label or kind)
        channel: the channel to optimize for
        ec: error-correction model

    Raises:
        ValidationError: for single-photon BB84
        BeyondCutoffError: if the rate is zero over the whole bracket
    """
    kind, source_kind = _resolve(protocol)
    lo, hi = nbar_bracket(kind, source_kind)
    objective = _Objective(kind, channel, ec, (lo, hi))

    grid = np.geomspace(lo, hi, COARSE_GRID_POINTS)
    values = np.array([objective(x) for x in grid])
    best_rate = float(values.max())
    if best_rate <= 0.0:
        raise BeyondCutoffError(f"{kind.value} rate is zero for every nbar at {channel.loss_db:.4g} dB")
    i = int(np.flatnonzero(values >= best_rate * (1.0 - TIE_TOLERANCE))[0])
    nbar_opt, rate_opt = float(grid[i]), float(values[i])

    if 0 < i < len(grid) - 1 and values[i - 1] < values[i] and values[i + 1] < values[i]:
        result = minimize_scalar(lambda x: -objective(x), bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                 method="golden", tol=GOLDEN_TOL)
        refined_rate = -float(result.fun)
        if refined_rate > rate_opt * (1.0 + TIE_TOLERANCE):
            nbar_opt, rate_opt = float(result.x), refined_rate
    else:
        logger.debug("optimum at grid point %d is not strictly bracketed; skipping refinement", i)

    logger.debug("%s at %.4g dB: nbar*=%.6g rate=%.6g (%d evaluations)",
                 kind.value, channel.loss_db, nbar_opt, rate_opt, objective.calls)
    return OptimumResult(nbar_opt=nbar_opt, rate_opt=rate_opt, bracket=(lo, hi), evaluations=objective.calls)


def _optimized_point(kind: ProtocolKind, source_kind: SourceKind, channel: ChannelModel,
                     ec: ErrorCorrectionModel) -> rates.RatePoint:
    if source_kind is SourceKind.SINGLE_PHOTON:
        return rates.evaluate(kind, SourceModel.single_photon(), channel, ec)
    try:
        optimum = optimize_nbar((kind, source_kind), channel, ec)
    except BeyondCutoffError:
        return rates.evaluate(kind, SourceModel.poisson(NBAR_FLOOR), channel, ec, extra_flags=("beyond_cutoff",))
    return rates.evaluate(kind, SourceModel.poisson(optimum.nbar_opt), channel, ec)


def optimized_rate(protocol, channel: ChannelModel, ec: ErrorCorrectionModel = SHANNON_LIMIT) -> float:
    """Best achievable rate at ``channel``, 0 beyond cutoff"""
    kind, source_kind = _resolve(protocol)
    rate = _optimized_point(kind, source_kind, channel, ec).rate
    return rate if rate >= RATE_FLOOR else 0.0


def _sweep_loss(args) -> List[rates.RatePoint]:
    spec, loss_db = args
    rows = []
    dps_point = None
    for label in spec.protocols:
        kind, source_kind = parse_protocol(label)
        channel = default_channel(kind, loss_db, spec.dark_count, spec.baseline_error)
        if kind is ProtocolKind.DPS_SEQUENTIAL and spec.sequential_at_dps_optimum:
            dps_channel = default_channel(ProtocolKind.DPS, loss_db, spec.dark_count, spec.baseline_error)
            if dps_point is None:
                dps_point = _optimized_point(ProtocolKind.DPS, SourceKind.POISSON, dps_channel, spec.ec)
            flags = tuple(f for f in dps_point.flags if f == "beyond_cutoff")
            rows.append(rates.evaluate(kind, SourceModel.poisson(dps_point.nbar), channel, spec.ec,
                                       extra_flags=flags))
            continue
        point = _optimized_point(kind, source_kind, channel, spec.ec)
        if kind is ProtocolKind.DPS:
            dps_point = point
        rows.append(point)
    return rows


def sweep(spec: SweepSpec) -> List[rates.RatePoint]:
    """One row per (loss, protocol), ordered by loss then by protocol order in ``spec``"""
    if not spec.protocols:
        return []
    jobs = [(spec, float(loss)) for loss in spec.losses()]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            per_loss = list(pool.map(_sweep_loss, jobs))
    else:
        per_loss = [_sweep_loss(job) for job in jobs]
    rows = [row for group in per_loss for row in group]
    logger.info("sweep: %d losses x %d protocols", len(jobs), len(spec.protocols))
    return rows


def cutoff_loss(protocol, dark_count: Optional[float] = None,
                baseline_error: float = DEFAULT_BASELINE_ERROR,
                ec: ErrorCorrectionModel = SHANNON_LIMIT,
                ceiling_db: float = PROBE_CEILING_DB) -> Optional[float]:
    """Largest loss (to 0.01 dB) at which the optimized rate is still positive

    Returns None when the rate is still positive at ``ceiling_db``.

    Raises:
        BeyondCutoffError: if the rate is already zero at 0 dB
    """
    kind, source_kind = _resolve(protocol)

    def positive(loss_db: float) -> bool:
        channel = default_channel(kind, loss_db, dark_count, baseline_error)
        return optimized_rate((kind, source_kind), channel, ec) > 0.0

    if not positive(0.0):
        raise BeyondCutoffError(f"{kind.value} has no positive rate even at 0 dB")
    if positive(ceiling_db):
        logger.info("%s: no cutoff below the %.0f dB probe ceiling", kind.value, ceiling_db)
        return None
    lo, hi = 0.0, ceiling_db
    while hi - lo > CUTOFF_RESOLUTION_DB:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    logger.info("%s cutoff at %.2f dB", kind.value, lo)
    return lo
