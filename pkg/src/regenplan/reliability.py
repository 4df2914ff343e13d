"""Availability and block-count mathematics.

A file split into ``n`` blocks, any ``k`` of which suffice for retrieval, is
retrievable with the binomial upper-tail probability of seeing at least ``k``
of ``n`` independently on-line holders. ``blocks_required`` inverts that
relation for a target probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from regenplan.errors import InvalidArgument, NoSolution

DEFAULT_CEILING = 10_000

# Relative slack on tail >= p so that targets sitting exactly on a step boundary
# (e.g. 1 - 0.1**2 >= 0.99) are not lost to binary rounding.
_REL_SLACK = 1e-10


@dataclass(frozen=True)
class AvailabilityModel:
    """Stationary on/off behaviour of a single node (durations in hours)."""

    mean_online: float
    mean_offline: float

    def __post_init__(self) -> None:
        if not self.mean_online > 0:
            raise InvalidArgument(f"mean_online must be > 0, got {self.mean_online}")
        if self.mean_offline < 0:
            raise InvalidArgument(f"mean_offline must be >= 0, got {self.mean_offline}")

    @property
    def availability(self) -> float:
        return self.mean_online / (self.mean_online + self.mean_offline)

    @classmethod
    def from_base_time(cls, base_time: float, availability: float) -> AvailabilityModel:
        """Sessions scaled by ``base_time``: on = B*a, off = B*(1-a)."""
        if not 0 < availability <= 1:
            raise InvalidArgument(f"availability must be in (0, 1], got {availability}")
        return cls(base_time * availability, base_time * (1 - availability))


@dataclass(frozen=True)
class RetrieveTarget:
    """Retrieve probability for coded data and, optionally, for full replicas."""

    p: float
    p_low: float | None = None

    def __post_init__(self) -> None:
        _check_open_prob("p", self.p)
        if self.p_low is not None:
            _check_open_prob("p_low", self.p_low)
            if self.p_low > self.p:
                raise InvalidArgument(f"p_low={self.p_low} must not exceed p={self.p}")


def _check_open_prob(name: str, value: float) -> None:
    if not 0 < value < 1:
        raise InvalidArgument(f"{name} must be in (0, 1), got {value}")


def _log_pmf(n: int, i: int, log_a: float, log_b: float) -> float:
    return (
        math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)
        + i * log_a + (n - i) * log_b
    )


def _sum_pmf(n: int, lo: int, hi: int, a: float) -> float:
    """Sum of binomial pmf terms for i in [lo, hi], computed in log space."""
    if lo > hi:
        return 0.0
    log_a, log_b = math.log(a), math.log1p(-a)
    terms = [_log_pmf(n, i, log_a, log_b) for i in range(lo, hi + 1)]
    top = max(terms)
    return math.exp(top) * math.fsum(math.exp(t - top) for t in terms)


def _tail_and_complement(n: int, k: int, a: float) -> tuple[float, float]:
    """Return (P[X >= k], P[X < k]) for X ~ Binomial(n, a), each accurate on its own scale."""
    if a == 0.0:
        return (1.0 if k == 0 else 0.0), (0.0 if k == 0 else 1.0)
    if a == 1.0:
        return 1.0, 0.0
    upper = _sum_pmf(n, k, n, a)
    lower = _sum_pmf(n, 0, k - 1, a)
    return upper, lower


def retrieve_probability(n: int, k: int, a: float) -> float:
    """Probability that at least ``k`` of ``n`` blocks are on-line.

    Each block sits on a distinct node that is on-line independently with
    probability ``a``.
    """
    if not 1 <= k <= n:
        raise InvalidArgument(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= a <= 1.0:
        raise InvalidArgument(f"availability must be in [0, 1], got {a}")
    upper, lower = _tail_and_complement(n, k, a)
    # Whichever side is smaller carries full relative precision.
    return upper if upper <= lower else 1.0 - lower


def _meets(n: int, k: int, a: float, p: float) -> bool:
    # Sum only the side below the mean: it is the smaller one (near the mean
    # both are about one half and either is accurate).
    if k > n * a:
        return _sum_pmf(n, k, n, a) >= p * (1.0 - _REL_SLACK)
    return _sum_pmf(n, 0, k - 1, a) <= (1.0 - p) * (1.0 + _REL_SLACK)


@lru_cache(maxsize=65536)
def blocks_required(k: int, a: float, p: float, ceiling: int = DEFAULT_CEILING) -> int:
    """Smallest block count ``n >= k`` whose retrieve probability reaches ``p``.

    Raises :class:`NoSolution` when no ``n`` up to ``ceiling`` qualifies.
    """
    if k < 1:
        raise InvalidArgument(f"k must be >= 1, got {k}")
    if not 0.0 <= a <= 1.0:
        raise InvalidArgument(f"availability must be in [0, 1], got {a}")
    _check_open_prob("p", p)
    if a == 1.0:
        return k
    if a == 0.0:
        raise NoSolution(f"availability 0 never reaches p={p}")
    no_solution = NoSolution(f"no n <= {ceiling} reaches p={p} for k={k}, a={a}")
    if ceiling < k:
        raise no_solution
    # The tail is monotone in n: gallop up from k/a, then bisect (lo fails, hi meets).
    hi = min(max(k, math.floor(k / a)), ceiling)
    lo = k - 1
    step = max(1, hi - k)
    while not _meets(hi, k, a, p):
        if hi == ceiling:
            raise no_solution
        lo, hi = hi, min(hi + step, ceiling)
        step *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _meets(mid, k, a, p):
            hi = mid
        else:
            lo = mid
    return hi


def replicas_required(a: float, p_low: float, ceiling: int = DEFAULT_CEILING) -> int:
    """Number of full replicas needed so that at least one is on-line with probability ``p_low``."""
    return blocks_required(1, a, p_low, ceiling)
