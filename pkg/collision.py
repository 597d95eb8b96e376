"""
Collision-probability bound for DPS-QKD under individual attacks

Three views of the same quantity:
  - pc0_bound: the closed-form per-bit bound 1 - e^2 - (1 - 6e)^2 / 2
  - pc0_parametric: the reduced attack surface (a, b, c, phi1, phi2)
  - pc0_bruteforce_max: an exhaustive grid over that surface, used as an
    oracle for the analytic maximization
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from model import EmptyBinError, ValidationError

logger = logging.getLogger(__name__)

# The quadratic bound peaks at e = 6/38 and stays there
SATURATION_ERROR = 3.0 / 19.0
PC0_MAX = 703.0 / 722.0

DEFAULT_GRID_POINTS = 60
DEFAULT_E_TOL = 0.002
MIN_GRID_POINTS = 20

_NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class AttackSurfacePoint:
    """Eve's probe reduced to norms a, b, c and two relative phases"""
    a: float
    b: float
    c: float
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if getattr(self, name) < 0:
                raise ValidationError(name, f"{name} must be nonnegative")
        if abs(self.a + self.b + self.c - 1.0) > _NORMALIZATION_TOL:
            raise ValidationError("a", f"a + b + c must equal 1, got {self.a + self.b + self.c}")
        for name in ("phi1", "phi2"):
            if not (0.0 <= getattr(self, name) <= math.pi):
                raise ValidationError(name, f"{name} must lie in [0, pi]")

    @classmethod
    def optimal(cls, e: float) -> "AttackSurfacePoint":
        """The maximizing family a = c = 2e, b = 1 - 4e with both phases zero"""
        return cls(a=2.0 * e, b=1.0 - 4.0 * e, c=2.0 * e)


@dataclass(frozen=True)
class CollisionBoundResult:
    error_rate: float
    pc0: float
    saturated: bool


def pc0_bound(e: float) -> CollisionBoundResult:
    """Upper bound on Eve's per-bit collision probability at error rate e

    Past e = 3/19 the bound is clamped at its maximum 703/722 instead of
    following the quadratic back down.
    """
    if not (0.0 <= e <= 0.5):
        raise ValidationError("error_rate", f"error rate must lie in [0, 1/2], got {e}")
    saturated = e > SATURATION_ERROR
    x = SATURATION_ERROR if saturated else e
    return CollisionBoundResult(error_rate=e, pc0=1.0 - x * x - (1.0 - 6.0 * x) ** 2 / 2.0, saturated=saturated)


def _pc0_bound_array(e: np.ndarray) -> np.ndarray:
    x = np.minimum(e, SATURATION_ERROR)
    return 1.0 - x * x - (1.0 - 6.0 * x) ** 2 / 2.0


def surface_values(a, b, c, cos1, cos2):
    """Error rate and collision probability on the reduced attack surface

    Works elementwise on scalars or broadcastable arrays. The cross term is
    squared; only the squared form reproduces the closed-form bound on the
    a = c, zero-phase family.
    """
    root_ac = np.sqrt(a * c)
    e = (1.0 - b * cos1 - root_ac * cos2) / 2.0
    norms = a * a + c * c + (b - c) ** 2 + (b - a) ** 2
    pc = 1.0 - (norms + 2.0 * (b * cos1 - root_ac * cos2) ** 2) / 8.0
    return e, pc


def pc0_parametric(p: AttackSurfacePoint) -> Tuple[float, float]:
    """Return (e, pc) for one surface point"""
    e, pc = surface_values(p.a, p.b, p.c, math.cos(p.phi1), math.cos(p.phi2))
    return float(e), float(pc)


def total_collision_exponent(n_sifted_bits: int, nbar: float, e: float) -> float:
    """-log2 of Eve's collision probability on an n-bit sifted string

    A fraction 2*nbar of the bits is lost to photon splitting; the rest each
    contribute -log2 Pc0(e). This is the privacy-amplification shrink input.
    """
    if n_sifted_bits <= 0:
        raise ValidationError("n_sifted_bits", "number of sifted bits must be positive")
    if not (0.0 <= nbar < 0.5):
        raise ValidationError("nbar", f"photon splitting reveals the whole key for nbar >= 1/2, got {nbar}")
    return n_sifted_bits * (1.0 - 2.0 * nbar) * -math.log2(pc0_bound(e).pc0)


@dataclass(frozen=True)
class OracleResult:
    """Outcome of one brute-force band maximization

    Attributes:
        e_target, e_tol, grid_points: the request
        pc_max: largest pc among grid points with |e - e_target| <= e_tol
        e_at_max: error rate of the maximizing point
        point: the maximizing surface point
        n_in_band: grid points that fell inside the band
    """
    e_target: float
    e_tol: float
    grid_points: int
    pc_max: float
    e_at_max: float
    point: AttackSurfacePoint
    n_in_band: int

    @property
    def analytic(self) -> float:
        return pc0_bound(self.e_target).pc0

    @property
    def gap(self) -> float:
        return self.pc_max - self.analytic

    @property
    def envelope(self) -> Tuple[float, float]:
        """Analytic bound at the two edges of the band"""
        lo = max(0.0, self.e_target - self.e_tol)
        hi = min(0.5, self.e_target + self.e_tol)
        return pc0_bound(lo).pc0, pc0_bound(hi).pc0


def _grid_axes(grid_points: int):
    levels = np.linspace(0.0, 1.0, grid_points)
    cosines = np.linspace(-1.0, 1.0, grid_points)
    return levels, cosines


def _scan_slice(args):
    """Best point per target for the a-levels in one slice of the grid"""
    a_indices, grid_points, targets, e_tol = args
    levels, cosines = _grid_axes(grid_points)
    cos1 = cosines[None, :, None]
    cos2 = cosines[None, None, :]
    best = [(-np.inf, math.nan, None, 0) for _ in targets]
    worst_violation = -np.inf
    for i in a_indices:
        a = levels[i]
        c = levels[levels <= 1.0 - a + 1e-12]
        b = np.maximum(1.0 - a - c, 0.0)
        e, pc = surface_values(a, b[:, None, None], c[:, None, None], cos1, cos2)
        inside = e <= SATURATION_ERROR
        if inside.any():
            worst_violation = max(worst_violation, float(np.max((pc - _pc0_bound_array(e))[inside])))
        for t, target in enumerate(targets):
            band = np.abs(e - target) <= e_tol
            count = int(band.sum())
            if count == 0:
                continue
            masked = np.where(band, pc, -np.inf)
            flat = int(np.argmax(masked))
            value = float(masked.flat[flat])
            pc_best, e_best, point, total = best[t]
            total += count
            if value > pc_best:
                j, p1, p2 = np.unravel_index(flat, masked.shape)
                point = (float(a), float(b[j]), float(c[j]), float(cosines[p1]), float(cosines[p2]))
                pc_best, e_best = value, float(e[j, p1, p2])
            best[t] = (pc_best, e_best, point, total)
    return best, worst_violation


def _scan(grid_points: int, targets: Sequence[float], e_tol: float, workers: int):
    slices = [list(chunk) for chunk in np.array_split(np.arange(grid_points), max(1, workers)) if len(chunk)]
    jobs = [(chunk, grid_points, tuple(targets), e_tol) for chunk in slices]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_slice, jobs))
    else:
        parts = [_scan_slice(job) for job in jobs]

    # Slices are in ascending a; strict '>' keeps the earliest grid point on ties
    merged = [(-np.inf, math.nan, None, 0) for _ in targets]
    worst_violation = -np.inf
    for best, violation in parts:
        worst_violation = max(worst_violation, violation)
        for t, (pc_best, e_best, point, count) in enumerate(best):
            m_pc, m_e, m_point, m_count = merged[t]
            if pc_best > m_pc:
                m_pc, m_e, m_point = pc_best, e_best, point
            merged[t] = (m_pc, m_e, m_point, m_count + count)
    return merged, worst_violation


def _check_oracle_args(e_target: float, e_tol: float, grid_points: int):
    if not (0.0 <= e_target <= SATURATION_ERROR):
        raise ValidationError("e_target", f"target error rate must lie in [0, 3/19], got {e_target}")
    if e_tol <= 0:
        raise ValidationError("e_tol", "error band half-width must be positive")
    if grid_points < MIN_GRID_POINTS:
        raise ValidationError("grid_points", f"need at least {MIN_GRID_POINTS} grid points per dimension")


def _to_result(e_target, e_tol, grid_points, merged) -> OracleResult:
    pc_max, e_at_max, point, count = merged
    if point is None:
        raise EmptyBinError(f"no grid point has |e - {e_target}| <= {e_tol}; widen e_tol or refine the grid")
    a, b, c, cos1, cos2 = point
    surface_point = AttackSurfacePoint(a=a, b=b, c=c, phi1=math.acos(cos1), phi2=math.acos(cos2))
    return OracleResult(e_target=e_target, e_tol=e_tol, grid_points=grid_points, pc_max=pc_max,
                        e_at_max=e_at_max, point=surface_point, n_in_band=count)


def oracle_table(e_targets: Sequence[float], e_tol: float = DEFAULT_E_TOL,
                 grid_points: int = DEFAULT_GRID_POINTS, workers: int = 1) -> List[Optional[OracleResult]]:
    """Brute-force maxima for several targets in a single pass over the grid

    Targets whose band is empty come back as None.
    """
    for target in e_targets:
        _check_oracle_args(target, e_tol, grid_points)
    merged, worst = _scan(grid_points, e_targets, e_tol, workers)
    logger.info("oracle scan: %d^4 grid, worst excess over analytic bound %.3e", grid_points, worst)
    results = []
    for target, entry in zip(e_targets, merged):
        try:
            results.append(_to_result(target, e_tol, grid_points, entry))
        except EmptyBinError as e:
            logger.warning("%s", e)
            results.append(None)
    return results


def pc0_bruteforce_max(e_target: float, e_tol: float = DEFAULT_E_TOL,
                       grid_points: int = DEFAULT_GRID_POINTS, workers: int = 1) -> OracleResult:
    """Maximize pc over a uniform grid in (a, c, cos phi1, cos phi2)

    Only points whose error rate lies within e_tol of e_target count. The
    result does not depend on the number of workers.

    Raises:
        EmptyBinError: if the band holds no grid point
    """
    _check_oracle_args(e_target, e_tol, grid_points)
    merged, _ = _scan(grid_points, [e_target], e_tol, workers)
    return _to_result(e_target, e_tol, grid_points, merged[0])


def max_bound_violation(grid_points: int = DEFAULT_GRID_POINTS, workers: int = 1) -> float:
    """Largest pc - pc0_bound(e) over grid points with e <= 3/19"""
    if grid_points < 2:
        raise ValidationError("grid_points", "need at least two grid points per dimension")
    _, worst = _scan(grid_points, [], DEFAULT_E_TOL, workers)
    return worst
