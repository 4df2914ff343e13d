"""System-level storage and repair-bandwidth costs.

Bandwidths are bytes/second per on-line node. ``unit_scale`` systems (where
``O*M / (N*E[L]) == 1``) give the dimensionless factors used to compare
configurations. Feasibility tests that compare two costs use exact rational
arithmetic so that ties resolve deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from regenplan.errors import InfeasibleDegree, InvalidArgument, ZeroObjects
from regenplan.regen_code import CodeKind, mbr_factor, msr_factor
from regenplan.reliability import blocks_required


class SchemeKind(str, Enum):
    MSR = "msr"
    MBR = "mbr"
    REPLICATION = "replication"
    HYBRID_MSR = "hybrid_msr"


@dataclass(frozen=True)
class SystemModel:
    """Population-level parameters; lifetime in seconds, sizes in bytes."""

    node_count: float
    mean_lifetime: float
    availability: float
    object_count: float
    object_size: float
    per_node_upload: float

    def __post_init__(self) -> None:
        for name in ("node_count", "mean_lifetime", "object_count", "object_size", "per_node_upload"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.availability <= 1:
            raise InvalidArgument(f"availability must be in (0, 1], got {self.availability}")

    @property
    def scale(self) -> float:
        """``O*M / (N*E[L])``: bytes/second of repair demand per unit of code cost."""
        return self.object_count * self.object_size / (self.node_count * self.mean_lifetime)

    @classmethod
    def unit_scale(cls, availability: float) -> SystemModel:
        return cls(1.0, 1.0, availability, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class CostReport:
    kind: SchemeKind
    n: int
    k: int
    d: int
    redundancy: float
    per_node_bandwidth: float

    def __post_init__(self) -> None:
        if self.redundancy < 1:
            raise InvalidArgument(f"redundancy must be >= 1, got {self.redundancy}")
        if self.per_node_bandwidth < 0:
            raise InvalidArgument("per_node_bandwidth must be >= 0")


def _resolve(kind: CodeKind | str, k: int, d: int | None, a: float, p: float) -> tuple[CodeKind, int, int]:
    kind = CodeKind(kind)
    if d is None:
        d = k
    if not 1 <= k <= d:
        raise InvalidArgument(f"need 1 <= k <= d, got k={k}, d={d}")
    eta = blocks_required(k, a, p)
    # d == k is always accepted: it is the MDS/replication corner, even when eta == k.
    if d > max(k, eta - 1):
        raise InfeasibleDegree(f"d={d} exceeds n-1={eta - 1} for k={k}, a={a}, p={p}")
    return kind, d, eta


def _gamma_units(kind: CodeKind, k: int, d: int) -> float:
    """Repair bandwidth per byte of file."""
    return (msr_factor(k, d) if kind is CodeKind.MSR else mbr_factor(k, d)) / k


def _alpha_units(kind: CodeKind, k: int, d: int) -> float:
    """Storage block size per byte of file."""
    return (1.0 if kind is CodeKind.MSR else mbr_factor(k, d)) / k


def redundancy(kind: CodeKind | str, k: int, d: int | None, a: float, p: float) -> float:
    """Stretch factor needed to reach retrieve probability ``p``."""
    kind, d, eta = _resolve(kind, k, d, a, p)
    return eta * _alpha_units(kind, k, d)


def per_node_bandwidth(kind: CodeKind | str, k: int, d: int | None, a: float, p: float,
                       sys: SystemModel) -> float:
    """Minimum sustained upload per on-line node so that repairs keep pace with departures.

    ``gamma * n * O / (a * N * E[L])``.
    """
    kind, d, eta = _resolve(kind, k, d, a, p)
    return _gamma_units(kind, k, d) * eta * sys.scale / a


def cost_report(kind: CodeKind | str, k: int, d: int | None, a: float, p: float,
                sys: SystemModel) -> CostReport:
    ckind, d, eta = _resolve(kind, k, d, a, p)
    scheme = SchemeKind.REPLICATION if k == d == 1 else SchemeKind(ckind.value)
    return CostReport(
        kind=scheme, n=eta, k=k, d=d,
        redundancy=redundancy(ckind, k, d, a, p),
        per_node_bandwidth=per_node_bandwidth(ckind, k, d, a, p, sys),
    )


def min_repair_degree_msr(k: int, a: float, p: float) -> int | None:
    """Smallest ``d`` for which an MSR code needs no more repair bandwidth than replication.

    The comparison is non-strict and exact: ``eta1 * k * (d-k+1) >= d * eta_k``
    (the common ``1/a`` and system scale cancel). Returns ``None`` when no
    ``d`` in ``[k, n-1]`` qualifies.
    """
    if k <= 1:
        raise InvalidArgument(f"k must be > 1, got {k}")
    eta_k = blocks_required(k, a, p)
    eta_1 = blocks_required(1, a, p)
    for d in range(k, eta_k):
        if msr_beats_replication(k, d, eta_k, eta_1):
            return d
    return None


def msr_beats_replication(k: int, d: int, eta_k: int, eta_1: int) -> bool:
    """Replication bandwidth >= MSR bandwidth, evaluated exactly."""
    return Fraction(eta_1) >= Fraction(d * eta_k, k * (d - k + 1))


def storage_savings(kind: CodeKind | str, k: int, d: int | None, a: float, p: float) -> float:
    """Fraction of raw storage saved relative to replication at the same ``p``."""
    return 1.0 - redundancy(kind, k, d, a, p) / blocks_required(1, a, p)


def hybrid_repair_bandwidth(kind: CodeKind | str, k: int, d: int | None, a: float, p: float,
                            sys: SystemModel) -> float:
    """Per-node bandwidth to maintain coded blocks when each repair copies one block from a replica."""
    kind, d, eta = _resolve(kind, k, d, a, p)
    return _alpha_units(kind, k, d) * eta * sys.scale / a


def hybrid_storage_feasible(k: int, a: float, p: float, p_low: float) -> bool:
    """Replicas at ``p_low`` plus MSR blocks at ``p`` store less than replication at ``p``."""
    if k <= 1:
        raise InvalidArgument(f"k must be > 1, got {k}")
    r_low = blocks_required(1, a, p_low)
    return Fraction(r_low) + Fraction(blocks_required(k, a, p), k) < blocks_required(1, a, p)


def hybrid_bandwidth_feasible(k: int, a: float, p: float, p_low: float) -> bool:
    """Replica upkeep at ``p_low`` plus replica-sourced block repair beats replication at ``p``.

    Evaluated on the unit-scale bandwidth expressions in exact arithmetic.
    """
    if k <= 1:
        raise InvalidArgument(f"k must be > 1, got {k}")
    fa = Fraction(a)
    replica_low = Fraction(blocks_required(1, a, p_low)) / fa
    coded = Fraction(blocks_required(k, a, p)) / (k * fa)
    replica_full = Fraction(blocks_required(1, a, p)) / fa
    return replica_low + coded < replica_full


def max_replicas_hybrid(k: int, a: float, p: float) -> int:
    """Largest replica count ``r`` with ``r + eta_k/k < eta_1`` (may be < 1)."""
    eta_k = blocks_required(k, a, p)
    eta_1 = blocks_required(1, a, p)
    return (eta_1 * k - eta_k - 1) // k


def max_p_low(k: int, a: float, p: float) -> float | None:
    """Highest replica availability target for which the hybrid still saves storage.

    Replica availability is a step function of the replica count, so the
    answer is the availability reached by the largest admissible count.
    """
    if k <= 1:
        raise InvalidArgument(f"k must be > 1, got {k}")
    r = max_replicas_hybrid(k, a, p)
    if r < 1:
        return None
    return 1.0 - (1.0 - a) ** r


def objects_for_utilization(kind: CodeKind | str, k: int, d: int | None, a: float, p: float,
                            rho: float, node_count: float, mean_lifetime: float,
                            object_size: float, per_node_upload: float) -> int:
    """Object count whose repair traffic loads each on-line node at ``rho * omega``."""
    if not 0 < rho <= 1:
        raise InvalidArgument(f"rho must be in (0, 1], got {rho}")
    kind, d, eta = _resolve(kind, k, d, a, p)
    objects = (per_node_upload * rho * a * node_count * mean_lifetime
               / (_gamma_units(kind, k, d) * eta * object_size))
    count = math.floor(objects * (1 + 1e-12))
    if count < 1:
        raise ZeroObjects(f"utilization {rho} supports only {objects:.3g} objects")
    return count
