"""Leafwise paths encoded as chart chains with durations.

A path inside a leaf is recorded combinatorially: the chart it starts in,
the transverse coordinate of its starting plaque, and the ordered chain of
charts it traverses.  Because transitions split into leafwise and transverse
parts, everything transported along the path depends only on this data; the
duration and the optional partition of crossing times are carried purely so
that concatenation behaves like genuine path composition (durations add,
identity paths have duration zero).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .atlas import Atlas, apply_transition

JUNCTION_TOL = 1e-9


class PathError(ValueError):
    """Raised for malformed chain paths or invalid compositions."""


@dataclass(frozen=True)
class ChainPath:
    base_chart: str
    base_y: tuple[float, ...]
    chain: tuple[str, ...]
    duration: float = 1.0
    partition: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not self.chain:
            raise PathError("chain must contain at least one chart")
        if self.chain[0] != self.base_chart:
            raise PathError("chain must start at the base chart")
        if self.duration < 0:
            raise PathError("duration must be non-negative")
        if self.duration == 0 and len(self.chain) > 1:
            raise PathError("a zero-duration path must stay in one chart")
        object.__setattr__(self, "base_y", tuple(float(v) for v in self.base_y))
        object.__setattr__(self, "chain", tuple(self.chain))
        if self.partition is not None:
            part = tuple(float(t) for t in self.partition)
            if len(part) != len(self.chain) - 1:
                raise PathError("partition must have one time per chart crossing")
            if any(t2 <= t1 for t1, t2 in zip(part, part[1:])):
                raise PathError("partition times must be strictly increasing")
            if part and (part[0] <= 0 or part[-1] >= self.duration):
                raise PathError("partition times must lie strictly inside (0, duration)")
            object.__setattr__(self, "partition", part)

    @property
    def hops(self) -> list[tuple[str, str]]:
        return list(zip(self.chain, self.chain[1:]))

    def to_wire(self, name: str) -> dict:
        doc = {
            "name": name,
            "base_chart": self.base_chart,
            "base_y": list(self.base_y),
            "chain": list(self.chain),
            "duration": self.duration,
        }
        if self.partition is not None:
            doc["partition"] = list(self.partition)
        return doc


def identity_path(chart: str, base_y: Sequence[float]) -> ChainPath:
    return ChainPath(chart, tuple(base_y), (chart,), duration=0.0)


def endpoint(atlas: Atlas, path: ChainPath) -> tuple[str, np.ndarray]:
    """The final chart and transverse coordinate of the running plaque."""
    y = np.asarray(path.base_y, dtype=float)
    for src, dst in path.hops:
        y = apply_transition(atlas, src, dst, y)
    return path.chain[-1], y


def validate(atlas: Atlas, path: ChainPath) -> "PathReport":
    """Check chain edges, domain membership and duration constraints."""
    if path.base_chart not in atlas.charts:
        return PathReport(False, 0, f"unknown chart {path.base_chart}")
    if len(path.base_y) != atlas.codim:
        return PathReport(False, 0,
                          f"base coordinate has dimension {len(path.base_y)}, "
                          f"expected {atlas.codim}")
    y = np.asarray(path.base_y, dtype=float)
    for hop, (src, dst) in enumerate(path.hops):
        if dst not in atlas.charts:
            return PathReport(False, hop, f"unknown chart {dst}")
        if (src, dst) not in atlas.transitions:
            return PathReport(False, hop, f"no transition {src}->{dst}")
        tr = atlas.transitions[(src, dst)]
        if not tr.domain.contains(y):
            return PathReport(False, hop,
                              f"running coordinate {y.tolist()} escapes the "
                              f"domain of {src}->{dst}")
        y = apply_transition(atlas, src, dst, y)
    return PathReport(True, None, None)


@dataclass(frozen=True)
class PathReport:
    ok: bool
    failed_hop: Optional[int]
    reason: Optional[str]


def require_valid(atlas: Atlas, path: ChainPath) -> None:
    report = validate(atlas, path)
    if not report.ok:
        raise PathError(f"invalid path at hop {report.failed_hop}: {report.reason}")


def concat(atlas: Atlas, second: ChainPath, first: ChainPath) -> ChainPath:
    """The composite path running ``first`` then ``second``.

    The endpoint of ``first`` must match the base of ``second`` (same chart,
    coordinates within JUNCTION_TOL); durations add and the duplicated
    junction chart is dropped from the chain.
    """
    end_chart, end_y = endpoint(atlas, first)
    if end_chart != second.base_chart:
        raise PathError(
            f"cannot concatenate: first ends in {end_chart}, second starts in "
            f"{second.base_chart}")
    gap = float(np.max(np.abs(end_y - np.asarray(second.base_y))))
    if gap > JUNCTION_TOL:
        raise PathError(f"cannot concatenate: junction coordinates differ by {gap:.3e}")
    return ChainPath(first.base_chart, first.base_y,
                     first.chain + second.chain[1:],
                     duration=first.duration + second.duration)


def reverse(atlas: Atlas, path: ChainPath) -> ChainPath:
    """The same chain walked backwards, using the registered reverse edges."""
    end_chart, end_y = endpoint(atlas, path)
    partition = None
    if path.partition is not None:
        partition = tuple(path.duration - t for t in reversed(path.partition))
    return ChainPath(end_chart, tuple(end_y.tolist()), tuple(reversed(path.chain)),
                     duration=path.duration, partition=partition)


def power(atlas: Atlas, path: ChainPath, n: int) -> ChainPath:
    """n-fold concatenation of a loop with itself (n >= 0)."""
    if n < 0:
        raise PathError("power expects n >= 0")
    result = identity_path(path.base_chart, path.base_y)
    for _ in range(n):
        result = concat(atlas, path, result)
    return result


def with_duration(path: ChainPath, duration: float,
                  partition: Optional[Sequence[float]] = None) -> ChainPath:
    part = tuple(partition) if partition is not None else None
    return replace(path, duration=duration, partition=part)
