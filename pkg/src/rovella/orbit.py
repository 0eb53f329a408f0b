"""Random orbits with derivative bookkeeping, and exact branch structure.

Derivative cocycles are accumulated in the log domain: over 10^4-step orbits
near the expanding boundary DT^n grows geometrically and would overflow as a
raw product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, DomainError, EmptyIntersection, SingularHit
from .map_core import (
    MapFamily,
    _deriv_unchecked,
    _value_unchecked,
    critical_neighborhoods,
)
from .noise import NoiseStream, ensemble_noise
from .numerics import bisect_increasing_scalar


@dataclass
class OrbitTrace:
    """A random orbit with per-step derivative and return-depth bookkeeping.

    points[i] = T_omega^i(x0) for i = 0..n; log_der[i] is the cumulative sum
    of log DT over the first i steps, so exp(log_der[m] - log_der[k]) is the
    derivative of the (m - k)-step composition at points[k]. depths[i] and
    visits[i] use the map at step i (noise index i); depths has one entry per
    point so suffix sums over any window are available.
    """

    x0: float
    delta: float
    points: np.ndarray
    log_der: np.ndarray
    depths: np.ndarray
    visits: np.ndarray
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.points) - 1


def return_depth(family: MapFamily, t: float, x: float, delta: float) -> int:
    """Least r >= 0 with DT_t(x) * |x| >= e^{-r} * delta.

    r = 0 is the common case away from the singularity; the closed-form
    ceiling is nudged by a direct scan so exact-boundary cases follow the
    definition rather than floating-point rounding.
    """
    if x == 0.0:
        raise DomainError("return depth undefined at the singularity")
    if delta <= 0:
        raise ValueError("delta must be positive")
    prod = float(_deriv_unchecked(family, t, np.float64(x))) * abs(x)
    if prod >= delta:
        return 0
    r = max(0, math.ceil(math.log(delta / prod)))
    while r > 0 and prod >= math.exp(-(r - 1)) * delta:
        r -= 1
    while prod < math.exp(-r) * delta:
        r += 1
    return r


def return_depths_array(
    family: MapFamily, t: np.ndarray, x: np.ndarray, delta: float
) -> np.ndarray:
    """Vectorized return depths; same convention as `return_depth`."""
    prod = _deriv_unchecked(family, t, x) * np.abs(x)
    with np.errstate(divide="ignore"):
        raw = np.ceil(np.log(delta / prod))
    r = np.where(prod >= delta, 0, np.maximum(raw, 0.0)).astype(np.int64)
    # Resolve ties at the e^{-r} boundary exactly as the scalar scan does.
    down = (r > 0) & (prod >= np.exp(-(r - 1.0)) * delta)
    r[down] -= 1
    up = prod < np.exp(-r.astype(float)) * delta
    r[up] += 1
    return r


def iterate(
    family: MapFamily,
    stream: NoiseStream,
    x0: float,
    n: int,
    delta: float,
) -> OrbitTrace:
    """Generate T_omega^i(x0) for i = 0..n with all bookkeeping fields.

    Raises SingularHit if some iterate rounds to exactly 0 (the trace is not
    returned truncated: orbits through the singular point are meaningless).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if x0 == 0.0 or abs(x0) > 1.0:
        raise DomainError("x0 must lie in [-1, 1] minus the singularity")
    hood = critical_neighborhoods(family, 0.0, delta)
    ts = stream.values(0, n + 1)
    points = np.empty(n + 1)
    log_der = np.empty(n + 1)
    depths = np.empty(n + 1, dtype=np.int64)
    visits = np.empty(n + 1, dtype=bool)
    x = float(x0)
    log_der[0] = 0.0
    for i in range(n + 1):
        points[i] = x
        depths[i] = return_depth(family, float(ts[i]), x, delta)
        visits[i] = hood.contains(x)
        if i == n:
            break
        d = float(_deriv_unchecked(family, float(ts[i]), np.float64(x)))
        log_der[i + 1] = log_der[i] + math.log(d)
        x = float(_value_unchecked(family, float(ts[i]), np.float64(x)))
        if x == 0.0:
            raise SingularHit(f"orbit hit the singularity at step {i + 1}")
    return OrbitTrace(
        x0=float(x0),
        delta=float(delta),
        points=points,
        log_der=log_der,
        depths=depths,
        visits=visits,
    )


def expansion_sum(trace: OrbitTrace, n: int) -> float:
    """Sum over i < n of DT^i(x0) / |x_i|, the derivative-to-distance sum.

    The i = 0 term is 1 / |x0| (empty derivative product), so the sum starts
    at the reciprocal distance to the singularity and is nondecreasing in n.
    """
    if n < 1 or n > len(trace):
        raise ValueError("n out of range for this trace")
    return float(
        np.sum(np.exp(trace.log_der[:n]) / np.abs(trace.points[:n]))
    )


@dataclass(frozen=True)
class BranchInterval:
    """A maximal open interval on which the n-step composition is monotone."""

    left: float
    right: float
    image_left: float
    image_right: float


@dataclass
class BranchPartition:
    """Exact branch (cylinder) structure of the n-step composition.

    cut_points holds +-1, 0 and every preimage of 0 under the first k < n
    steps; branches are the open intervals between consecutive cuts, each
    carrying its image interval. Points within 1e-12 of a cut are rejected
    from queries: the discontinuity is honest, not interpolated.
    """

    family: MapFamily
    stream: NoiseStream
    n: int
    cut_points: np.ndarray
    branches: list[BranchInterval] = field(default_factory=list)

    CUT_MARGIN = 1e-12

    def locate(self, x: float) -> BranchInterval:
        idx = int(np.searchsorted(self.cut_points, x)) - 1
        if idx < 0 or idx >= len(self.branches):
            raise DomainError(f"{x} outside [-1, 1]")
        if (
            x - self.cut_points[idx] < self.CUT_MARGIN
            or self.cut_points[idx + 1] - x < self.CUT_MARGIN
        ):
            raise DomainError(f"{x} within {self.CUT_MARGIN} of a cut point")
        return self.branches[idx]


def orbit_value(family: MapFamily, stream: NoiseStream, x: float, k: int) -> float:
    """T_omega^k(x), raising SingularHit if an iterate rounds to 0."""
    for i in range(k):
        x = float(_value_unchecked(family, stream.get(i), np.float64(x)))
        if x == 0.0:
            raise SingularHit(f"orbit hit the singularity at step {i + 1}")
    return x


def _safe_orbit_value(family: MapFamily, stream: NoiseStream, x: float, k: int) -> float:
    try:
        return orbit_value(family, stream, x, k)
    except SingularHit:
        return orbit_value(family, stream, np.nextafter(x, 2.0), k)


def branch_partition(
    family: MapFamily, stream: NoiseStream, n: int, cap: int = 40
) -> BranchPartition:
    """Branch structure of the n-step composition by iterated refinement.

    Each branch of the k-step composition is monotone increasing; if its
    image straddles 0 the branch splits at the bisected preimage and the two
    halves pick up image limits +-1 on the freshly cut side. Branch count is
    at most 2^n, so n is capped.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cap:
        raise CapExceeded(f"n={n} exceeds branch refinement cap {cap}")

    t0 = stream.get(0)
    # Level 1: cuts at {-1, 0, 1}; images are one-sided limits at the cuts.
    branches = [
        BranchInterval(-1.0, 0.0, float(_value_unchecked(family, t0, np.float64(-1.0))), 1.0),
        BranchInterval(0.0, 1.0, -1.0, float(_value_unchecked(family, t0, np.float64(1.0)))),
    ]
    cuts = [-1.0, 0.0, 1.0]

    for k in range(1, n):
        tk = stream.get(k)
        new_branches: list[BranchInterval] = []
        new_cuts: list[float] = []
        for br in branches:
            u, v = br.image_left, br.image_right
            if u < 0.0 < v:
                # T_omega^k crosses the singularity inside this branch.
                c = bisect_increasing_scalar(
                    lambda x: _safe_orbit_value(family, stream, x, k),
                    0.0,
                    br.left,
                    br.right,
                    xtol=1e-13,
                )
                new_cuts.append(c)
                new_branches.append(
                    BranchInterval(
                        br.left, c, float(_value_unchecked(family, tk, np.float64(u))), 1.0
                    )
                )
                new_branches.append(
                    BranchInterval(
                        c, br.right, -1.0, float(_value_unchecked(family, tk, np.float64(v)))
                    )
                )
            else:
                iu = (
                    -1.0
                    if u == 0.0
                    else float(_value_unchecked(family, tk, np.float64(u)))
                )
                iv = (
                    1.0
                    if v == 0.0
                    else float(_value_unchecked(family, tk, np.float64(v)))
                )
                new_branches.append(BranchInterval(br.left, br.right, iu, iv))
        branches = new_branches
        cuts.extend(new_cuts)

    cuts_arr = np.array(sorted(cuts))
    part = BranchPartition(
        family=family, stream=stream, n=n, cut_points=cuts_arr, branches=branches
    )
    return part


def preimage_in_branch(
    partition: BranchPartition,
    branch: BranchInterval,
    target: tuple[float, float],
) -> tuple[float, float]:
    """Interval J inside the branch with T_omega^n(J) = target, by bisection.

    Raises EmptyIntersection when the target misses the branch image; targets
    reaching past the image are clipped to it, so the returned endpoints map
    onto target intersected with the image.
    """
    lo, hi = target
    if lo > hi:
        raise ValueError("target interval is reversed")
    u, v = branch.image_left, branch.image_right
    if hi < u or lo > v:
        raise EmptyIntersection(f"target {target} misses branch image ({u}, {v})")
    lo_c, hi_c = max(lo, u), min(hi, v)
    fam, strm, n = partition.family, partition.stream, partition.n

    def f(x: float) -> float:
        return _safe_orbit_value(fam, strm, x, n)

    a = (
        branch.left
        if lo_c <= u
        else bisect_increasing_scalar(f, lo_c, branch.left, branch.right, xtol=1e-13)
    )
    b = (
        branch.right
        if hi_c >= v
        else bisect_increasing_scalar(f, hi_c, branch.left, branch.right, xtol=1e-13)
    )
    return a, b


@dataclass
class EnsembleOrbits:
    """Vectorized ensemble of random orbits sharing a master seed.

    Row i uses the stream seeded by derive_seed(master_seed, i); results are
    independent of any worker partitioning of the rows.
    """

    master_seed: int
    eps: float
    delta: float
    x0: np.ndarray
    points: np.ndarray | None  # (samples, n+1) when kept
    log_der: np.ndarray  # (samples, n+1)
    depths: np.ndarray  # (samples, n)
    singular_hits: int = 0


def ensemble_orbits(
    family: MapFamily,
    master_seed: int,
    eps: float,
    n: int,
    samples: int,
    delta: float,
    x0: np.ndarray | None = None,
    keep_points: bool = True,
) -> EnsembleOrbits:
    """Simulate `samples` random orbits for n steps, fully vectorized.

    Starting points default to uniform draws on (-1, 1) from each orbit's own
    stream (noise index -1, leaving indices >= 0 for the dynamics). Orbits
    that round onto the singularity are frozen at a harmless off-singularity
    point and counted in `singular_hits`.
    """
    ts = ensemble_noise(master_seed, eps, samples, n + 1, start=-1)
    if x0 is None:
        x = ts[:, 0] / eps if eps > 0 else np.zeros(samples)
        if eps == 0:
            # Degenerate noise still needs spread starting points.
            x = ensemble_noise(master_seed, 1.0, samples, 1, start=-1)[:, 0]
        x = np.where(x == 0.0, 0.5, x)
    else:
        x = np.asarray(x0, dtype=float).copy()
        if x.shape != (samples,):
            raise ValueError("x0 must have shape (samples,)")
    ts = ts[:, 1:]
    x_start = x.copy()

    points = np.empty((samples, n + 1)) if keep_points else None
    log_der = np.empty((samples, n + 1))
    depths = np.empty((samples, n), dtype=np.int64)
    log_der[:, 0] = 0.0
    hits = 0
    for k in range(n):
        if keep_points:
            points[:, k] = x
        t = ts[:, k]
        depths[:, k] = return_depths_array(family, t, x, delta)
        d = _deriv_unchecked(family, t, x)
        log_der[:, k + 1] = log_der[:, k] + np.log(d)
        x = _value_unchecked(family, t, x)
        bad = x == 0.0
        if bad.any():
            hits += int(bad.sum())
            x = np.where(bad, 0.5, x)
    if keep_points:
        points[:, n] = x
    return EnsembleOrbits(
        master_seed=master_seed,
        eps=eps,
        delta=delta,
        x0=x_start,
        points=points,
        log_der=log_der,
        depths=depths,
        singular_hits=hits,
    )
