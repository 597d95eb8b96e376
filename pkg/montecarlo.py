"""
Discrete-time pulse-train simulator for DPS-QKD with pluggable eavesdroppers

This is a classical stochastic model of click statistics. Slot m carries the
differential bit phi_m xor phi_{m+1}; the half-empty windows at both ends of
the train are discarded. Photon statistics are linearized: a slot clicks from
signal with probability nbar*T and from a dark count with probability d, so
at most one click per slot. The error of that approximation is O((nbar*T)^2),
hence the regime check.

Two independent random streams are spawned from the seed: one for Alice and
the honest channel, one for Eve. Passive attacks therefore leave Bob's draws
untouched for a given seed.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from model import RegimeError, ValidationError
from rates import SequentialAttackParams

logger = logging.getLogger(__name__)

REGIME_LIMIT = 0.1
MAX_SEED = 2 ** 64 - 1

# Landing offsets of an intercept-resend pair relative to Eve's click slot
_RESEND_OFFSETS = np.array([-1, 0, 1])
_RESEND_WEIGHTS = np.array([0.25, 0.5, 0.25])


class AttackKind(Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept-resend"
    BEAMSPLITTER = "beamsplitter"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run parameters

    Attributes:
        n_pulses: pulses in the train
        nbar, transmission, dark_count, baseline_error: as in ChannelModel / SourceModel
        attack: eavesdropping strategy
        delayed: beamsplitter only; Eve waits for Bob's slot announcement
        k: sequential only; consecutive clicks per block
        eps_s: sequential only; error budget. None means Eve takes over the
            whole line and blocks everything outside her blocks
        intercept_fraction: intercept-resend only; share of slots attacked
        seed: 64-bit seed
    """
    n_pulses: int
    nbar: float
    transmission: float
    dark_count: float = 0.0
    baseline_error: float = 0.0
    attack: AttackKind = AttackKind.NONE
    delayed: bool = False
    k: int = 2
    eps_s: Optional[float] = None
    intercept_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 3:
            raise ValidationError("n_pulses", "need at least 3 pulses")
        if not (0.0 < self.nbar <= 1.0):
            raise ValidationError("nbar", f"nbar must lie in (0, 1], got {self.nbar}")
        if not (0.0 < self.transmission <= 1.0):
            raise ValidationError("transmission", f"transmission out of range: {self.transmission}")
        if not (0.0 <= self.dark_count < 1.0):
            raise ValidationError("dark_count", f"dark count out of range: {self.dark_count}")
        if not (0.0 <= self.baseline_error < 0.5):
            raise ValidationError("baseline_error", f"baseline error out of range: {self.baseline_error}")
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError("k", "block length k must be a positive integer")
        if self.eps_s is not None and self.eps_s < 0:
            raise ValidationError("eps_s", "error budget must be nonnegative")
        if not (0.0 <= self.intercept_fraction <= 1.0):
            raise ValidationError("intercept_fraction", "intercept fraction must lie in [0, 1]")
        if not (0 <= self.seed <= MAX_SEED):
            raise ValidationError("seed", "seed must be a 64-bit unsigned integer")
        load = self.nbar * self.transmission + self.dark_count
        if load > REGIME_LIMIT:
            raise RegimeError(f"nbar*T + d = {load:.4g} exceeds {REGIME_LIMIT}; "
                              "the one-click-per-slot model does not hold")
        if self.attack is AttackKind.BEAMSPLITTER and self.eve_click_probability > 1.0:
            raise RegimeError("Eve's tap click probability exceeds 1")

    @property
    def eve_click_probability(self) -> float:
        """Per-slot click probability of Eve's interferometer on the tapped light"""
        p = self.nbar * (1.0 - self.transmission)
        return 2.0 * p if self.delayed else p

    @property
    def attack_label(self) -> str:
        if self.attack is AttackKind.BEAMSPLITTER and self.delayed:
            return "beamsplitter-delayed"
        return self.attack.value


@dataclass(frozen=True)
class SimReport:
    """Tallies of one run; wall_time is excluded from equality"""
    n_pulses: int
    n_clicks: int
    n_errors: int
    n_eve_known: int
    qber_est: float
    eve_fraction_est: float
    seed: int
    attack: str
    n_edge_clicks: int = 0
    n_edge_errors: int = 0
    n_attacked_clicks: int = 0
    n_attacked_errors: int = 0
    n_attacked_known: int = 0
    n_blocks: int = 0
    n_block_windows: int = 0
    block_rate: float = 0.0
    flags: Tuple[str, ...] = ()
    wall_time: float = field(default=0.0, compare=False)

    CSV_COLUMNS = ("seed", "attack", "n_pulses", "n_clicks", "n_errors", "n_eve_known", "qber_est",
                   "eve_fraction_est", "n_edge_clicks", "n_edge_errors", "n_attacked_clicks",
                   "n_attacked_errors", "n_attacked_known", "n_blocks", "n_block_windows",
                   "block_rate", "flags")

    def csv_row(self) -> List[str]:
        row = []
        for name in self.CSV_COLUMNS:
            value = getattr(self, name)
            if isinstance(value, float):
                row.append(f"{value:.12g}")
            elif isinstance(value, tuple):
                row.append(";".join(value))
            else:
                row.append(str(value))
        return row

    def summary(self) -> str:
        lines = [
            f"attack:            {self.attack}",
            f"seed:              {self.seed}",
            f"pulses:            {self.n_pulses}",
            f"clicks:            {self.n_clicks}",
            f"errors:            {self.n_errors}",
            f"qber_est:          {self.qber_est:.6f} +/- {3 * binomial_sigma(self.qber_est, self.n_clicks):.6f} (3 sigma)",
            f"eve_fraction_est:  {self.eve_fraction_est:.6f}",
        ]
        if self.n_edge_clicks:
            lines.append(f"edge error rate:   {self.n_edge_errors / self.n_edge_clicks:.6f} over {self.n_edge_clicks} clicks")
        if self.n_block_windows or self.n_blocks:
            lines.append(f"block rate:        {self.block_rate:.6g} ({self.n_blocks} blocks used)")
        if self.n_attacked_clicks:
            lines.append(f"block error rate:  {self.n_attacked_errors / self.n_attacked_clicks:.6f}")
            lines.append(f"block Eve known:   {self.n_attacked_known / self.n_attacked_clicks:.6f}")
        if self.flags:
            lines.append(f"flags:             {', '.join(self.flags)}")
        return "\n".join(lines)


def binomial_sigma(p: float, n: int) -> float:
    """Standard deviation of a binomial proportion estimated from n trials"""
    if n <= 0:
        return math.inf
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


class _Train:
    """Alice's pulse train and the honest channel draws for one seed"""

    def __init__(self, config: SimConfig, rng: np.random.Generator):
        n_slots = config.n_pulses - 1
        phases = rng.integers(0, 2, config.n_pulses, dtype=np.int8)
        self.bits = phases[:-1] ^ phases[1:]
        u = rng.random(n_slots)
        signal_p = config.nbar * config.transmission
        self.flip = rng.random(n_slots) < config.baseline_error
        self.dark_outcome = rng.integers(0, 2, n_slots, dtype=np.int8)
        self.signal = u < signal_p
        self.dark = (u >= signal_p) & (u < signal_p + config.dark_count)
        self.valid = np.ones(n_slots, dtype=bool)
        self.valid[0] = False
        self.valid[-1] = False
        self.n_slots = n_slots


def attack_intercept_resend(train: _Train, config: SimConfig, rng: np.random.Generator):
    """Eve measures with Bob's interferometer and resends a two-pulse state

    Bob's click lands on Eve's slot with probability 1/2 (correct bit, known
    to Eve) or on either neighbour with probability 1/4 each (random outcome,
    unknown to Eve).

    Returns:
        (clicked, outcome, known, edge) boolean/bit arrays over slots
    """
    attacked = (rng.random(train.n_slots) < config.intercept_fraction) & train.signal
    offsets = rng.choice(_RESEND_OFFSETS, size=train.n_slots, p=_RESEND_WEIGHTS)
    random_bits = rng.integers(0, 2, train.n_slots, dtype=np.int8)
    edge = attacked & (offsets != 0)
    honest_outcome = train.bits ^ train.flip
    outcome = np.where(train.signal, honest_outcome, train.dark_outcome)
    outcome = np.where(edge, random_bits, outcome)
    clicked = train.signal | train.dark
    known = attacked & ~edge
    return clicked, outcome, known, edge


def attack_beamsplitter(train: _Train, config: SimConfig, rng: np.random.Generator):
    """Eve taps the lost 1 - T fraction and forwards the rest losslessly

    Bob's statistics are untouched. Eve knows a bit whenever her own
    interferometer clicked in Bob's slot.
    """
    eve_click = rng.random(train.n_slots) < config.eve_click_probability
    clicked = train.signal | train.dark
    outcome = np.where(train.signal, train.bits ^ train.flip, train.dark_outcome)
    known = clicked & eve_click
    return clicked, outcome, known


def _select_blocks(starts: np.ndarray, k: int, n_slots: int) -> np.ndarray:
    """Greedy non-overlapping blocks; a block at s occupies Bob's slots s-1 .. s+k"""
    chosen = []
    next_free = 1
    for s in starts:
        if s < next_free or s - 1 < 1 or s + k > n_slots - 2:
            continue
        chosen.append(s)
        next_free = s + k + 2
    return np.asarray(chosen, dtype=np.int64)


def _budgeted_blocks(train: _Train, candidates: np.ndarray, k: int, share: float) -> np.ndarray:
    """Longest prefix of ``candidates`` whose blocks stay within ``share`` of Bob's clicks

    Every attacked block replaces the honest clicks in its k+2 slots with
    exactly one click, so the attacked count m must satisfy
    m <= share * (m + honest clicks outside the first m blocks). The left side
    grows faster than the right, hence the admissible m form a prefix.
    """
    honest = (train.signal | train.dark) & train.valid
    cumulative = np.concatenate(([0], np.cumsum(honest)))
    inside = cumulative[candidates + k + 1] - cumulative[candidates - 1]
    remaining = int(honest.sum()) - np.cumsum(inside)
    m = np.arange(1, len(candidates) + 1)
    admissible = m * (1.0 - share) <= share * remaining
    n_allowed = len(candidates) if admissible.all() else int(np.argmin(admissible))
    return np.sort(candidates[:n_allowed])


def attack_sequential(train: _Train, config: SimConfig, rng: np.random.Generator):
    """Eve waits for k consecutive clicks next to Alice and resends a k+1 pulse block

    Each attacked block yields one click for Bob across its k+2 slots: one of
    the k interior slots with probability 1/(k+1) each (correct, known to
    Eve) or one of the two edge slots with probability 1/(2(k+1)) each
    (random outcome, unknown to Eve).

    Without ``eps_s`` Eve blocks every slot outside her blocks. With it she
    passes the honest light and attacks blocks in random order only while the
    attacked clicks stay at or below eps_s / eps_seq of Bob's realized clicks,
    which keeps the expected induced error at or below eps_s. Bob's click rate
    then rises above nbar*T, since each block turns about (k+2)*nbar*T honest
    clicks into one.

    Returns:
        (clicked, outcome, known, edge, in_block_click, n_blocks, n_windows, block_rate)
    """
    k = int(config.k)
    eve_click = rng.random(train.n_slots) < config.nbar
    if k <= train.n_slots:
        windows = sliding_window_view(eve_click, k).all(axis=1)
    else:
        windows = np.zeros(0, dtype=bool)
    n_windows = int(windows.sum())
    block_rate = n_windows / len(windows) if len(windows) else 0.0
    blocks = _select_blocks(np.flatnonzero(windows), k, train.n_slots)

    budget = SequentialAttackParams(k=k, eps_seq=1.0 / (2.0 * (k + 1)), eps_s=config.eps_s) \
        if config.eps_s is not None else None
    if budget is None or budget.attacked_fraction >= 1.0:
        attacked = blocks
    else:
        candidates = blocks[rng.permutation(len(blocks))]
        attacked = _budgeted_blocks(train, candidates, k, budget.attacked_fraction)

    weights = np.full(k + 2, 1.0 / (k + 1))
    weights[0] = weights[-1] = 1.0 / (2.0 * (k + 1))
    positions = rng.choice(k + 2, size=len(attacked), p=weights)
    landing = attacked - 1 + positions
    landing_edge = (positions == 0) | (positions == k + 1)
    random_bits = rng.integers(0, 2, len(attacked), dtype=np.int8)

    covered = np.zeros(train.n_slots, dtype=bool)
    for s in attacked:
        covered[s - 1:s + k + 1] = True
    if config.eps_s is None:
        signal = np.zeros(train.n_slots, dtype=bool)
    else:
        signal = train.signal & ~covered

    in_block = np.zeros(train.n_slots, dtype=bool)
    in_block[landing] = True
    edge = np.zeros(train.n_slots, dtype=bool)
    edge[landing[landing_edge]] = True

    outcome = np.where(signal, train.bits ^ train.flip, train.dark_outcome)
    block_outcome = np.where(landing_edge, random_bits, train.bits[landing] ^ train.flip[landing])
    outcome[landing] = block_outcome
    clicked = signal | in_block | (train.dark & ~covered)
    known = in_block & ~edge
    return clicked, outcome, known, edge, in_block, len(attacked), n_windows, block_rate


def simulate(config: SimConfig) -> SimReport:
    """Run one pulse train through the configured attack and tally Bob's sifted key"""
    started = time.perf_counter()
    honest_seq, eve_seq = np.random.SeedSequence(config.seed).spawn(2)
    train = _Train(config, np.random.default_rng(honest_seq))
    eve_rng = np.random.default_rng(eve_seq)

    edge = in_block = None
    n_blocks = n_windows = 0
    block_rate = 0.0
    flags = []
    if config.attack is AttackKind.INTERCEPT_RESEND:
        clicked, outcome, known, edge = attack_intercept_resend(train, config, eve_rng)
    elif config.attack is AttackKind.BEAMSPLITTER:
        clicked, outcome, known = attack_beamsplitter(train, config, eve_rng)
    elif config.attack is AttackKind.SEQUENTIAL:
        clicked, outcome, known, edge, in_block, n_blocks, n_windows, block_rate = \
            attack_sequential(train, config, eve_rng)
        if n_blocks == 0:
            flags.append("no_blocks")
    else:
        clicked = train.signal | train.dark
        outcome = np.where(train.signal, train.bits ^ train.flip, train.dark_outcome)
        known = np.zeros(train.n_slots, dtype=bool)

    sifted = clicked & train.valid
    errors = sifted & (outcome != train.bits)
    n_clicks = int(sifted.sum())
    n_errors = int(errors.sum())
    n_known = int((known & sifted).sum())

    tallies = {}
    if edge is not None:
        edge_sifted = edge & sifted
        tallies["n_edge_clicks"] = int(edge_sifted.sum())
        tallies["n_edge_errors"] = int((edge_sifted & errors).sum())
    if in_block is not None:
        block_sifted = in_block & sifted
        tallies["n_attacked_clicks"] = int(block_sifted.sum())
        tallies["n_attacked_errors"] = int((block_sifted & errors).sum())
        tallies["n_attacked_known"] = int((block_sifted & known).sum())

    elapsed = time.perf_counter() - started
    report = SimReport(
        n_pulses=config.n_pulses,
        n_clicks=n_clicks,
        n_errors=n_errors,
        n_eve_known=n_known,
        qber_est=n_errors / n_clicks if n_clicks else 0.0,
        eve_fraction_est=n_known / n_clicks if n_clicks else 0.0,
        seed=config.seed,
        attack=config.attack_label,
        n_blocks=n_blocks,
        n_block_windows=n_windows,
        block_rate=block_rate,
        flags=tuple(flags),
        wall_time=elapsed,
        **tallies,
    )
    logger.info("simulated %d pulses (%s, seed %d) in %.3f s", config.n_pulses,
                config.attack_label, config.seed, elapsed)
    return report


def run_replicas(configs: Sequence[SimConfig], workers: int = 1) -> List[SimReport]:
    """Independent runs, returned in input order regardless of completion order"""
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(simulate, configs))
    return [simulate(config) for config in configs]
