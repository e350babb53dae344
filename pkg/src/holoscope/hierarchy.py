"""Multi-order classification and the tower of holonomy partitions.

Classifying a fixed path family at jet orders 0..K produces a tower of
partitions.  Because truncation is a homomorphism for jet composition, the
partition at order k+1 always refines the partition at order k; the checks
here verify that end to end and report any violation as data rather than
raising.  The top of the tower is the germ-level classification, which this
engine can only approximate: reports speak of equality "up to order K".

In base mode, order-0 classification compares endpoints only (the jet of
order zero is trivial once anchored).  In bundle mode it additionally
compares the fibre transport of each configured anchor point, and positive
orders compare the total transport jets at those anchors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from concurrent.futures import ThreadPoolExecutor

from .atlas import Atlas
from .bundle import BundleHolonomyJet, FoliatedBundle, total_transport_jet
from .holonomy import ORDER_CAVEAT, classify, partition_by_key
from .jets import DEFAULT_TOL, jets_equal
from .paths import ChainPath

Target = Union[Atlas, FoliatedBundle]


@dataclass(frozen=True)
class RefinementViolation:
    order: int  # refinement from order+1 down to order
    finer_class: int
    coarser_classes: tuple[int, ...]


@dataclass
class HierarchyReport:
    max_order: int
    mode: str  # "base" or "bundle"
    partitions: list[list[list[int]]]  # per order, classes of path indices
    refinement: list[Optional[dict[int, int]]]  # map order k+1 classes -> order k
    violations: list[RefinementViolation]
    caveat: str = ORDER_CAVEAT

    @property
    def ok(self) -> bool:
        return not self.violations

    def class_counts(self) -> list[int]:
        return [len(p) for p in self.partitions]

    def to_wire(self, path_names: Optional[Sequence[str]] = None) -> dict:
        def members(cls: list[int]):
            if path_names is None:
                return list(cls)
            return [path_names[i] for i in cls]

        return {
            "mode": self.mode,
            "max_order": self.max_order,
            "caveat": self.caveat,
            "orders": [
                {
                    "order": k,
                    "classes": [members(cls) for cls in partition],
                }
                for k, partition in enumerate(self.partitions)
            ],
            "refinement": [
                None if r is None else {str(fine): coarse for fine, coarse in sorted(r.items())}
                for r in self.refinement
            ],
            "ok": self.ok,
            "violations": [
                {"order": v.order, "finer_class": v.finer_class,
                 "coarser_classes": list(v.coarser_classes)}
                for v in self.violations
            ],
        }


def bundle_jets_match(a: tuple[BundleHolonomyJet, ...],
                      b: tuple[BundleHolonomyJet, ...], tol: float) -> bool:
    for x, y in zip(a, b):
        if x.source[0] != y.source[0] or x.target[0] != y.target[0]:
            return False
        for xa, ya in ((x.source[1], y.source[1]), (x.source[2], y.source[2]),
                       (x.target[1], y.target[1]), (x.target[2], y.target[2])):
            if np.max(np.abs(np.array(xa) - np.array(ya))) > tol:
                return False
        if not jets_equal(x.jet, y.jet, tol):
            return False
    return True


def bundle_class_key(jets: tuple[BundleHolonomyJet, ...], tol: float) -> tuple:
    parts = []
    for h in jets:
        parts.append((
            h.source[0],
            tuple(np.rint(np.array(h.source[1]) / tol).tolist()),
            tuple(np.rint(np.array(h.source[2]) / tol).tolist()),
            h.target[0],
            tuple(np.rint(np.array(h.target[1]) / tol).tolist()),
            tuple(np.rint(np.array(h.target[2]) / tol).tolist()),
            tuple(np.rint(h.jet.coefficients.ravel() / tol).tolist()),
        ))
    return tuple(parts)


def classify_bundle(bundle: FoliatedBundle, paths: Sequence[ChainPath], k: int,
                    tol: float = DEFAULT_TOL,
                    anchors: Optional[Sequence[Sequence[float]]] = None,
                    jobs: Optional[int] = None) -> list[list[int]]:
    """Partition paths by total-transport-jet equality at the anchor points."""
    anchor_list = _anchor_list(bundle, anchors)

    def transports(p: ChainPath) -> tuple[BundleHolonomyJet, ...]:
        return tuple(total_transport_jet(bundle, p, k, a) for a in anchor_list)

    if jobs is None or jobs <= 1 or len(paths) <= 1:
        values = [transports(p) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(transports, paths))
    items = [(bundle_class_key(v, tol), v) for v in values]
    return partition_by_key(items, lambda a, b: bundle_jets_match(a, b, tol))


def _anchor_list(bundle: FoliatedBundle,
                 anchors: Optional[Sequence[Sequence[float]]]) -> list[np.ndarray]:
    if anchors is not None and len(anchors) > 0:
        return [np.asarray(a, dtype=float) for a in anchors]
    return [np.zeros(bundle.fibre_dim)]


def classify_at_order(target: Target, paths: Sequence[ChainPath], k: int,
                      tol: float = DEFAULT_TOL,
                      anchors: Optional[Sequence[Sequence[float]]] = None,
                      jobs: Optional[int] = None) -> list[list[int]]:
    if isinstance(target, FoliatedBundle):
        return classify_bundle(target, paths, k, tol, anchors, jobs)
    return classify(target, paths, k, tol, jobs)


def hierarchy_report(target: Target, paths: Sequence[ChainPath], max_order: int,
                     tol: float = DEFAULT_TOL,
                     anchors: Optional[Sequence[Sequence[float]]] = None,
                     jobs: Optional[int] = None) -> HierarchyReport:
    """Classify at every order 0..max_order and verify stepwise refinement."""
    mode = "bundle" if isinstance(target, FoliatedBundle) else "base"
    partitions = [classify_at_order(target, paths, k, tol, anchors, jobs)
                  for k in range(max_order + 1)]
    refinement, violations = refinement_maps(partitions)
    return HierarchyReport(max_order, mode, partitions, refinement, violations)


def refinement_maps(partitions: list[list[list[int]]]
                    ) -> tuple[list[Optional[dict[int, int]]],
                               list[RefinementViolation]]:
    """For each order k, map order-(k+1) classes onto order-k classes.

    A violation is recorded when a finer class meets several coarser classes;
    in that case the map entry for the offending class is omitted.
    """
    refinement: list[Optional[dict[int, int]]] = []
    violations: list[RefinementViolation] = []
    for k in range(len(partitions) - 1):
        coarse_of = {}
        for ci, cls in enumerate(partitions[k]):
            for member in cls:
                coarse_of[member] = ci
        mapping: dict[int, int] = {}
        for fi, cls in enumerate(partitions[k + 1]):
            images = sorted({coarse_of[m] for m in cls})
            if len(images) == 1:
                mapping[fi] = images[0]
            else:
                violations.append(RefinementViolation(k, fi, tuple(images)))
        refinement.append(mapping)
    return refinement, violations


@dataclass(frozen=True)
class TowerResult:
    ok: bool
    witness: Optional[tuple[int, int, int, int]]  # (path i, path j, order l, order k)

    def to_wire(self) -> dict:
        doc: dict = {"ok": self.ok}
        if self.witness is not None:
            i, j, l, k = self.witness
            doc["witness"] = {"paths": [i, j], "equivalent_at": k,
                              "inequivalent_at": l}
        return doc


def verify_tower(target: Target, paths: Sequence[ChainPath], max_order: int,
                 tol: float = DEFAULT_TOL,
                 anchors: Optional[Sequence[Sequence[float]]] = None) -> TowerResult:
    """Check equivalent-at-k implies equivalent-at-l for all l < k <= max_order."""
    partitions = [classify_at_order(target, paths, k, tol, anchors)
                  for k in range(max_order + 1)]
    return check_tower_partitions(partitions)


def check_tower_partitions(partitions: list[list[list[int]]]) -> TowerResult:
    """Tower check on prebuilt partitions; exposed for adversarial harnesses."""
    n_orders = len(partitions)
    class_of = []
    for partition in partitions:
        lookup = {}
        for ci, cls in enumerate(partition):
            for member in cls:
                lookup[member] = ci
        class_of.append(lookup)
    n_paths = len(class_of[0]) if class_of else 0
    for k in range(n_orders - 1, 0, -1):
        for l in range(k):
            for i in range(n_paths):
                for j in range(i + 1, n_paths):
                    same_k = class_of[k][i] == class_of[k][j]
                    same_l = class_of[l][i] == class_of[l][j]
                    if same_k and not same_l:
                        return TowerResult(False, (i, j, l, k))
    return TowerResult(True, None)
