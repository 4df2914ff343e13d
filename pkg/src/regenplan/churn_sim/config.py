"""Simulator configuration and its JSON document form."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Any

from regenplan.errors import ConfigError, InvalidArgument, NoSolution, ZeroObjects
from regenplan.regen_code import CodeConfig, CodeKind, code_point
from regenplan.reliability import blocks_required

KB = 1024
MB = 1024 * 1024
DAY = 86_400.0
HOUR = 3_600.0

# "sum": minimise stored blocks + repairs in progress.
# "balanced": fewest repairs in progress first, then fewest stored blocks.
REPAIRER_POLICIES = ("balanced", "sum")
# "least_busy": holders with the shortest outgoing backlog first, then lowest id.
# "lowest_id": holders in id order.
SOURCE_POLICIES = ("least_busy", "lowest_id")


@dataclass(frozen=True)
class CodeSpec:
    kind: str = "msr"
    k: int = 20
    d: int | str = 20
    n: int | None = None


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    initial_nodes: int = 500
    mean_lifetime_days: float = 100.0
    availability: float = 0.75
    base_time_hours: float = 24.0
    code: CodeSpec = field(default_factory=CodeSpec)
    retrieve_target: float = 0.999999
    object_size: int = 120 * MB
    object_count: int | None = None
    target_utilization: float | None = None
    upload_rate: float = 20 * KB
    max_concurrent_uploads: int = 1
    max_concurrent_downloads: int = 3
    duration_days: float = 200.0
    warmup_days: float = 30.0
    metrics_interval_hours: float = 24.0
    departures_enabled: bool = True
    repairer_policy: str = "balanced"
    source_policy: str = "least_busy"

    def __post_init__(self) -> None:
        if (self.object_count is None) == (self.target_utilization is None):
            raise ConfigError("exactly one of object_count / target_utilization must be set")
        if not self.duration_days > self.warmup_days >= 0:
            raise ConfigError("need duration_days > warmup_days >= 0")
        positive = ("initial_nodes", "mean_lifetime_days", "base_time_hours", "object_size",
                    "upload_rate", "max_concurrent_uploads", "max_concurrent_downloads",
                    "metrics_interval_hours")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 < self.availability <= 1:
            raise ConfigError("availability must be in (0, 1]")
        if not 0 < self.retrieve_target < 1:
            raise ConfigError("retrieve_target must be in (0, 1)")
        if self.object_count is not None and self.object_count < 1:
            raise ConfigError("object_count must be >= 1")
        if self.target_utilization is not None and not 0 < self.target_utilization <= 1:
            raise ConfigError("target_utilization must be in (0, 1]")
        if self.repairer_policy not in REPAIRER_POLICIES:
            raise ConfigError(f"repairer_policy must be one of {REPAIRER_POLICIES}")
        if self.source_policy not in SOURCE_POLICIES:
            raise ConfigError(f"source_policy must be one of {SOURCE_POLICIES}")
        try:
            CodeKind(self.code.kind)
        except ValueError:
            raise ConfigError(f"unknown code kind {self.code.kind!r}") from None
        try:
            cfg = self.code_config
            self.resolved_object_count
        except (InvalidArgument, NoSolution, ZeroObjects) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.n > self.initial_nodes:
            raise ConfigError(f"n={cfg.n} blocks cannot be placed on {self.initial_nodes} nodes")

    @cached_property
    def n(self) -> int:
        if self.code.n is not None:
            return int(self.code.n)
        return blocks_required(self.code.k, self.availability, self.retrieve_target)

    @cached_property
    def d(self) -> int:
        d = self.code.d
        if isinstance(d, str):
            if d.replace(" ", "") != "n-1":
                raise ConfigError(f"repair degree must be an integer or 'n-1', got {d!r}")
            return self.n - 1
        return int(d)

    @property
    def kind(self) -> CodeKind:
        return CodeKind(self.code.kind)

    @cached_property
    def code_config(self) -> CodeConfig:
        return CodeConfig(n=self.n, k=self.code.k, d=self.d, file_size=self.object_size)

    @property
    def point(self):
        return code_point(self.kind, self.code_config)

    @property
    def mean_lifetime_s(self) -> float:
        return self.mean_lifetime_days * DAY

    def _demand_per_object(self) -> float:
        """Repair bytes/second one object asks of each on-line node: gamma * n / (a * N * E[L])."""
        return (self.point.gamma * self.n
                / (self.availability * self.initial_nodes * self.mean_lifetime_s))

    @cached_property
    def resolved_object_count(self) -> int:
        if self.object_count is not None:
            return int(self.object_count)
        objects = self.target_utilization * self.upload_rate / self._demand_per_object()
        count = math.floor(objects * (1 + 1e-12))
        if count < 1:
            raise ZeroObjects(f"utilization {self.target_utilization} supports only {objects:.3g} objects")
        return count

    @property
    def theoretical_utilization(self) -> float:
        """W / omega for the resolved object count and the configured block count."""
        return self.resolved_object_count * self._demand_per_object() / self.upload_rate

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, overrides: dict[str, Any]) -> SimConfig:
        return config_from_dict(apply_overrides(self.to_dict(), overrides))


_TOP_KEYS = {f.name for f in fields(SimConfig)}
_CODE_KEYS = {f.name for f in fields(CodeSpec)}


def config_from_dict(doc: dict[str, Any]) -> SimConfig:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    doc = dict(doc)
    code = doc.pop("code", {}) or {}
    if not isinstance(code, dict):
        raise ConfigError("'code' must be an object")
    bad = set(code) - _CODE_KEYS
    if bad:
        raise ConfigError(f"unknown code keys: {sorted(bad)}")
    try:
        return SimConfig(code=CodeSpec(**code), **doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> SimConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(doc)


def parse_value(text: str) -> Any:
    """Interpret an override value as JSON when possible, else as a bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Apply dotted-key overrides (``code.d=36``) to a config document."""
    out = json.loads(json.dumps(doc))
    for key, value in overrides.items():
        parts = key.split(".")
        target = out
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"cannot set {key}: {part} is not an object")
        target[parts[-1]] = value
        # Setting one sizing mode clears the other.
        if key == "object_count" and value is not None:
            out["target_utilization"] = None
        elif key == "target_utilization" and value is not None:
            out["object_count"] = None
    return out
