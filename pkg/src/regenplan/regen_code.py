"""Regenerating Code parameter algebra.

A code stores a file of ``file_size`` bytes as ``n`` blocks of ``alpha`` bytes;
any ``k`` blocks rebuild the file and a lost block is regenerated by pulling
``beta`` bytes from each of ``d`` surviving holders (``gamma = d * beta``).
The two extreme points of the storage/repair trade-off are exposed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from regenplan.errors import InvalidArgument


class CodeKind(str, Enum):
    MSR = "msr"
    MBR = "mbr"


class CodeClass(str, Enum):
    REPLICATION = "replication"
    MDS = "mds"
    GENERAL = "general"


@dataclass(frozen=True)
class CodeConfig:
    n: int
    k: int
    d: int
    file_size: float

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.d <= self.n - 1:
            raise InvalidArgument(
                f"need 1 <= k <= d <= n-1, got n={self.n}, k={self.k}, d={self.d}"
            )
        if not self.file_size > 0:
            raise InvalidArgument(f"file_size must be > 0, got {self.file_size}")


@dataclass(frozen=True)
class CodePoint:
    kind: CodeKind
    alpha: float
    beta: float
    gamma: float


def msr_factor(k: int, d: int) -> float:
    """Repair bandwidth of the minimum-storage point in units of M/k."""
    return d / (d - k + 1)


def mbr_factor(k: int, d: int) -> float:
    """Block size (= repair bandwidth) of the minimum-bandwidth point in units of M/k."""
    return 2 * d / (2 * d - k + 1)


def msr_point(cfg: CodeConfig) -> CodePoint:
    alpha = cfg.file_size / cfg.k
    gamma = alpha * msr_factor(cfg.k, cfg.d)
    return CodePoint(CodeKind.MSR, alpha, gamma / cfg.d, gamma)


def mbr_point(cfg: CodeConfig) -> CodePoint:
    alpha = cfg.file_size / cfg.k * mbr_factor(cfg.k, cfg.d)
    return CodePoint(CodeKind.MBR, alpha, alpha / cfg.d, alpha)


def code_point(kind: CodeKind | str, cfg: CodeConfig) -> CodePoint:
    kind = CodeKind(kind)
    return msr_point(cfg) if kind is CodeKind.MSR else mbr_point(cfg)


def stretch_factor(cfg: CodeConfig, point: CodePoint) -> float:
    """Stored bytes per file byte, ``n * alpha / M``."""
    return cfg.n * point.alpha / cfg.file_size


def classify(cfg: CodeConfig) -> CodeClass:
    if cfg.k == cfg.d == 1:
        return CodeClass.REPLICATION
    if cfg.k == cfg.d:
        return CodeClass.MDS
    return CodeClass.GENERAL
