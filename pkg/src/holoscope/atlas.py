"""Foliated atlases: charts, transverse transitions and cocycle validation.

Only the transverse data of a foliated atlas is stored.  Every chart carries
a leaf dimension and a codimension, and every ordered pair of overlapping
charts carries the transverse change of coordinates as a vector of
expressions in ``y1..yq``, valid on an axis-aligned box.  All transported
quantities in this package depend on nothing else.

The transition table is keyed by the ordered chart pair, so each pair of
charts can carry at most one transition; geometries whose charts overlap in
several components (a circle covered by two arcs, say) are modelled with
enough charts that each overlap is a single edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import expr as expressions
from .expr import ExprAst
from .jets import JetMap, Series, compose, jets_equal, translate_conjugate

REVERSE_RESIDUAL_TOL = 1e-8
COCYCLE_RESIDUAL_TOL = 1e-8
COCYCLE_JET_ORDER = 2
DOMAIN_SLACK = 1e-12


class AtlasError(ValueError):
    """Raised for malformed atlases, transitions or out-of-domain queries."""


def transverse_variables(codim: int) -> tuple[str, ...]:
    return tuple(f"y{i + 1}" for i in range(codim))


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box in transverse coordinates."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise AtlasError("box bounds have mismatched dimensions")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise AtlasError("box has empty extent")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, point: Sequence[float]) -> bool:
        p = np.asarray(point, dtype=float)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return bool(np.all(p >= lo - DOMAIN_SLACK) and np.all(p <= hi + DOMAIN_SLACK))

    def grid(self, per_axis: int) -> np.ndarray:
        """Deterministic sample grid including the box boundary."""
        axes = [np.linspace(l, h, per_axis) if h > l else np.array([l])
                for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_wire(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Chart:
    id: str
    leaf_dim: int
    codim: int

    def __post_init__(self):
        if self.leaf_dim < 0:
            raise AtlasError(f"chart {self.id}: leaf dimension must be >= 0")
        if self.codim < 1:
            raise AtlasError(f"chart {self.id}: codimension must be >= 1")


@dataclass(frozen=True)
class Transition:
    """Transverse coordinate change from chart ``src`` to chart ``dst``."""

    src: str
    dst: str
    y_map: tuple[ExprAst, ...]
    domain: Box
    source_text: tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def from_text(cls, src: str, dst: str, exprs: Sequence[str],
                  domain: Box) -> "Transition":
        codim = len(exprs)
        variables = transverse_variables(codim)
        parsed = tuple(expressions.parse(text, variables) for text in exprs)
        return cls(src, dst, parsed, domain, tuple(exprs))

    @property
    def codim(self) -> int:
        return len(self.y_map)

    def texts(self) -> tuple[str, ...]:
        if self.source_text:
            return self.source_text
        return tuple(expressions.to_source(e) for e in self.y_map)


class Atlas:
    """A validated foliated atlas; immutable after ``build_atlas``."""

    def __init__(self, charts: Mapping[str, Chart],
                 transitions: Mapping[tuple[str, str], Transition],
                 leaf_dim: int, codim: int):
        self.charts = dict(charts)
        self.transitions = dict(transitions)
        self.leaf_dim = leaf_dim
        self.codim = codim

    def chart_ids(self) -> list[str]:
        return sorted(self.charts)

    def transition(self, src: str, dst: str) -> Transition:
        try:
            return self.transitions[(src, dst)]
        except KeyError:
            raise AtlasError(f"no transition registered from {src} to {dst}") from None


def build_atlas(charts: Iterable[Chart],
                transitions: Iterable[Transition],
                samples_per_edge: int = 5) -> Atlas:
    """Validate chart and transition data eagerly and assemble an Atlas.

    Checks: uniform (leaf_dim, codim) across charts, resolvable chart ids,
    presence of a reverse edge for every edge, finiteness of each map on its
    domain grid, and that each reverse inverts its edge to within
    ``REVERSE_RESIDUAL_TOL`` at grid samples whose image lands in the
    reverse's domain.
    """
    chart_map: dict[str, Chart] = {}
    for chart in charts:
        if chart.id in chart_map:
            raise AtlasError(f"duplicate chart id {chart.id}")
        chart_map[chart.id] = chart
    if not chart_map:
        raise AtlasError("atlas needs at least one chart")
    dims = {(c.leaf_dim, c.codim) for c in chart_map.values()}
    if len(dims) != 1:
        raise AtlasError(f"charts disagree on dimensions: {sorted(dims)}")
    leaf_dim, codim = dims.pop()

    table: dict[tuple[str, str], Transition] = {}
    for tr in transitions:
        for endpoint in (tr.src, tr.dst):
            if endpoint not in chart_map:
                raise AtlasError(f"transition references unknown chart {endpoint}")
        if tr.codim != codim:
            raise AtlasError(
                f"transition {tr.src}->{tr.dst} has {tr.codim} components, "
                f"expected {codim}")
        if tr.domain.dim != codim:
            raise AtlasError(
                f"transition {tr.src}->{tr.dst} has a {tr.domain.dim}-dim domain box")
        key = (tr.src, tr.dst)
        if key in table:
            raise AtlasError(f"duplicate transition {tr.src}->{tr.dst}")
        table[key] = tr

    atlas = Atlas(chart_map, table, leaf_dim, codim)
    for (src, dst), tr in sorted(table.items()):
        if (dst, src) not in table:
            raise AtlasError(f"missing reverse transition {dst}->{src}")
        _check_edge(atlas, tr, table[(dst, src)], samples_per_edge)
    return atlas


def _apply_exprs(y_map: Sequence[ExprAst], codim: int,
                 point: Sequence[float]) -> np.ndarray:
    names = transverse_variables(codim)
    binding = dict(zip(names, point))
    return np.array([expressions.eval_point(e, binding) for e in y_map])


def _check_edge(atlas: Atlas, forward: Transition, reverse: Transition,
                samples_per_edge: int):
    # samples whose image escapes the reverse's box are skipped: the edges
    # only have to invert each other on the overlap
    for point in forward.domain.grid(samples_per_edge):
        image = _apply_exprs(forward.y_map, atlas.codim, point)
        if not np.all(np.isfinite(image)):
            raise AtlasError(
                f"transition {forward.src}->{forward.dst} is non-finite at {point.tolist()}")
        if not reverse.domain.contains(image):
            continue
        back = _apply_exprs(reverse.y_map, atlas.codim, image)
        residual = float(np.max(np.abs(back - point)))
        if residual > REVERSE_RESIDUAL_TOL:
            raise AtlasError(
                f"transition {forward.dst}->{forward.src} does not invert "
                f"{forward.src}->{forward.dst}: residual {residual:.3e} at "
                f"{point.tolist()}")


def apply_transition(atlas: Atlas, src: str, dst: str,
                     y: Sequence[float]) -> np.ndarray:
    """Pointwise evaluation of the transverse transition map."""
    tr = atlas.transition(src, dst)
    point = np.asarray(y, dtype=float)
    if not tr.domain.contains(point):
        raise AtlasError(
            f"point {point.tolist()} is outside the domain of {src}->{dst}")
    return _apply_exprs(tr.y_map, atlas.codim, point)


def transition_jet(atlas: Atlas, src: str, dst: str, base_y: Sequence[float],
                   k: int) -> tuple[JetMap, np.ndarray]:
    """The order-k jet of the transition anchored at ``base_y``.

    Returns the jet normalized to zero constant term (offsets around the base
    map to offsets around the image) together with the image point itself.
    """
    tr = atlas.transition(src, dst)
    base = np.asarray(base_y, dtype=float)
    if not tr.domain.contains(base):
        raise AtlasError(
            f"base point {base.tolist()} is outside the domain of {src}->{dst}")
    q = atlas.codim
    names = transverse_variables(q)
    args = {names[i]: Series.variable(q, k, i, base=base[i]) for i in range(q)}
    columns = [expressions.eval_jet(e, args, k).column_series()[0]
               for e in tr.y_map]
    raw = JetMap.from_columns(q, k, columns)
    image = raw.constant_term.copy()
    normalized = translate_conjugate(raw, np.zeros(q), image, k)
    coeffs = np.array(normalized.coefficients)
    coeffs[0] = 0.0  # exact zero anchor; translate_conjugate leaves roundoff
    return JetMap(q, q, k, coeffs), image


@dataclass(frozen=True)
class CocycleViolation:
    triple: tuple[str, str, str]  # (start, via, end): end<-start vs end<-via<-start
    point: tuple[float, ...]
    residual: float
    kind: str  # "point" or "jet"


@dataclass
class CocycleReport:
    triples_checked: int
    samples_checked: int
    violations: list[CocycleViolation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_wire(self) -> dict:
        return {
            "triples_checked": self.triples_checked,
            "samples_checked": self.samples_checked,
            "ok": self.ok,
            "violations": [
                {
                    "triple": list(v.triple),
                    "point": list(v.point),
                    "residual": v.residual,
                    "kind": v.kind,
                }
                for v in self.violations
            ],
        }


def validate_cocycle(atlas: Atlas, samples_per_triangle: int = 5,
                     rng: Optional[np.random.Generator] = None) -> CocycleReport:
    """Sampled check that direct transitions match composites over chart triples.

    For every ordered triple (a, via, b) whose edges a->via, via->b and a->b
    are all registered, the direct map a->b is compared with the composite
    via->b after a->via, pointwise and as order-2 jets, at sample points of
    the common domain (a deterministic grid, plus seeded random points when a
    generator is supplied).  Violations are report entries, never exceptions.
    """
    report = CocycleReport(0, 0, [])
    names = sorted(atlas.charts)
    for a in names:
        for via in names:
            for b in names:
                if len({a, via, b}) != 3:
                    continue
                first = atlas.transitions.get((a, via))
                second = atlas.transitions.get((via, b))
                direct = atlas.transitions.get((a, b))
                if first is None or second is None or direct is None:
                    continue
                report.triples_checked += 1
                _check_triple(atlas, first, second, direct, samples_per_triangle,
                              report, rng)
    return report


def _check_triple(atlas: Atlas, first: Transition, second: Transition,
                  direct: Transition, per_axis: int, report: CocycleReport,
                  rng: Optional[np.random.Generator] = None):
    triple = (first.src, first.dst, second.dst)
    samples = first.domain.grid(per_axis)
    if rng is not None:
        lo = np.asarray(first.domain.lo)
        hi = np.asarray(first.domain.hi)
        extra = rng.uniform(lo, hi, size=(per_axis, len(lo)))
        samples = np.concatenate([samples, extra], axis=0)
    for point in samples:
        if not direct.domain.contains(point):
            continue
        mid = _apply_exprs(first.y_map, atlas.codim, point)
        if not second.domain.contains(mid):
            continue
        report.samples_checked += 1
        via_image = _apply_exprs(second.y_map, atlas.codim, mid)
        direct_image = _apply_exprs(direct.y_map, atlas.codim, point)
        residual = float(np.max(np.abs(direct_image - via_image)))
        if residual > COCYCLE_RESIDUAL_TOL:
            report.violations.append(CocycleViolation(
                triple, tuple(point.tolist()), residual, "point"))
            continue
        jet_first, _ = transition_jet(atlas, first.src, first.dst, point,
                                      COCYCLE_JET_ORDER)
        jet_second, _ = transition_jet(atlas, second.src, second.dst, mid,
                                       COCYCLE_JET_ORDER)
        jet_direct, _ = transition_jet(atlas, direct.src, direct.dst, point,
                                       COCYCLE_JET_ORDER)
        composed = compose(jet_second, jet_first)
        if not jets_equal(jet_direct, composed, COCYCLE_RESIDUAL_TOL):
            gap = float(np.max(np.abs(jet_direct.coefficients - composed.coefficients)))
            report.violations.append(CocycleViolation(
                triple, tuple(point.tolist()), gap, "jet"))
