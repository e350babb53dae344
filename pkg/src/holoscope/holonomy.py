"""Finite-order holonomy transport along chain paths.

``transport_jet`` composes, hop by hop, the translation-normalized jets of
the transverse transitions along a path's chart chain.  The result is the
order-k jet of the transversal-to-transversal sliding map, anchored so that
the source point maps to the target point exactly (zero constant term).

``winkelnkemper_map`` is the classical un-normalized plaque chase: a nearby
transverse point is pushed through the same chain pointwise.  The two agree
up to the Taylor remainder: evaluating the normalized jet at an offset and
re-adding the target point reproduces the plaque chase to ``O(offset^{k+1})``.

Two paths are declared equivalent at order k when their endpoints agree and
their transported jets agree coefficient-wise; ``classify`` partitions a
finite path family by this relation.  Equality of full germs is undecidable
from finite data, so every classification is a statement "equal up to order
k" only.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .atlas import Atlas, apply_transition, transition_jet
from .jets import (DEFAULT_TOL, DiffeoJet, JetMap, as_diffeo, compose,
                   identity_jet, jets_equal)
from .paths import ChainPath, require_valid

DEFAULT_ORDER = 4
MAX_SUPPORTED_ORDER = 10

ORDER_CAVEAT = ("jet-order classification: classes certify equality of "
                "transported jets up to the stated order only, not of germs")


@dataclass(frozen=True)
class HolonomyJet:
    """A normalized transported jet anchored at source and target points."""

    source: tuple[str, tuple[float, ...]]
    target: tuple[str, tuple[float, ...]]
    jet: DiffeoJet

    def to_wire(self) -> dict:
        return {
            "source": {"chart": self.source[0], "y": list(self.source[1])},
            "target": {"chart": self.target[0], "y": list(self.target[1])},
            "jet": self.jet.to_wire(),
        }


def transport_jet(atlas: Atlas, path: ChainPath, k: int) -> HolonomyJet:
    """Order-k holonomy of a chain path.

    Hop by hop, the transition jet anchored at the running transverse
    coordinate is normalized to zero constant term and composed onto the
    accumulated jet.  The identity path yields the identity jet.  Duration
    and partition data never enter.
    """
    require_valid(atlas, path)
    q = atlas.codim
    y = np.asarray(path.base_y, dtype=float)
    jet: JetMap = identity_jet(q, k)
    for src, dst in path.hops:
        hop_jet, y = transition_jet(atlas, src, dst, y, k)
        jet = compose(hop_jet, jet)
    return HolonomyJet(
        source=(path.base_chart, tuple(path.base_y)),
        target=(path.chain[-1], tuple(y.tolist())),
        jet=as_diffeo(jet),
    )


def winkelnkemper_map(atlas: Atlas, path: ChainPath, y0: Sequence[float]) -> np.ndarray:
    """Plaque chase: push a transverse point through the chain pointwise.

    Unlike ``transport_jet`` no translation normalization is applied; the
    plaque through ``y0`` must stay inside every hop's domain box.
    """
    require_valid(atlas, path)
    y = np.asarray(y0, dtype=float)
    for src, dst in path.hops:
        y = apply_transition(atlas, src, dst, y)
    return y


def equivalent(atlas: Atlas, first: ChainPath, second: ChainPath, k: int,
               tol: float = DEFAULT_TOL) -> bool:
    """Same source, same target (within tol) and equal jets at order k."""
    a = transport_jet(atlas, first, k)
    b = transport_jet(atlas, second, k)
    return holonomy_jets_match(a, b, tol)


def holonomy_jets_match(a: HolonomyJet, b: HolonomyJet, tol: float) -> bool:
    if a.source[0] != b.source[0] or a.target[0] != b.target[0]:
        return False
    if np.max(np.abs(np.array(a.source[1]) - np.array(b.source[1]))) > tol:
        return False
    if np.max(np.abs(np.array(a.target[1]) - np.array(b.target[1]))) > tol:
        return False
    return jets_equal(a.jet, b.jet, tol)


def class_key(h: HolonomyJet, tol: float) -> tuple:
    """Round anchors and coefficients to a grid of width tol."""
    src = tuple(np.rint(np.array(h.source[1]) / tol).tolist())
    tgt = tuple(np.rint(np.array(h.target[1]) / tol).tolist())
    coeffs = tuple(np.rint(h.jet.coefficients.ravel() / tol).tolist())
    return (h.source[0], src, h.target[0], tgt, coeffs)


def partition_by_key(items: list[tuple], matcher) -> list[list[int]]:
    """Hash-partition by rounded key, then merge borderline neighbours.

    ``items`` is a list of (key, value); ``matcher(a, b)`` decides genuine
    equivalence for values whose keys landed in adjacent grid cells.  The
    result is deterministic and independent of evaluation order: classes are
    built in item order and merged through a union-find over sorted class
    representatives.
    """
    buckets: dict[tuple, list[int]] = {}
    for i, (key, _) in enumerate(items):
        buckets.setdefault(key, []).append(i)
    classes = [sorted(members) for _, members in sorted(buckets.items(),
                                                        key=lambda kv: kv[1][0])]
    # borderline post-pass: compare representatives pairwise and merge
    parent = list(range(len(classes)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            if find(i) == find(j):
                continue
            a = items[classes[i][0]][1]
            b = items[classes[j][0]][1]
            if matcher(a, b):
                parent[find(j)] = find(i)
    merged: dict[int, list[int]] = {}
    for i, members in enumerate(classes):
        merged.setdefault(find(i), []).extend(members)
    return sorted((sorted(m) for m in merged.values()), key=lambda m: m[0])


def classify(atlas: Atlas, paths: Sequence[ChainPath], k: int,
             tol: float = DEFAULT_TOL,
             jobs: Optional[int] = None) -> list[list[int]]:
    """Partition path indices by holonomy equivalence at order k.

    Transport runs per path (concurrently when ``jobs`` > 1; the partition is
    independent of scheduling).  Keys are rounded to a tol-grid for a
    near-linear hash partition, followed by a pairwise merge pass for
    borderline classes.
    """
    transports = transport_paths(atlas, paths, k, jobs)
    items = [(class_key(h, tol), h) for h in transports]
    return partition_by_key(items, lambda a, b: holonomy_jets_match(a, b, tol))


def transport_paths(atlas: Atlas, paths: Sequence[ChainPath], k: int,
                    jobs: Optional[int] = None) -> list[HolonomyJet]:
    if jobs is None or jobs <= 1 or len(paths) <= 1:
        return [transport_jet(atlas, p, k) for p in paths]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda p: transport_jet(atlas, p, k), paths))
