"""Foliated bundles: fibre transport and transverse section-jet transport.

A foliated bundle over an atlas adds, per transition edge, a fibre map
``L(y1..yq, f1..fm)`` telling how fibre coordinates change between the two
trivializations; the maps depend on the base point only through the
transverse coordinates, which is what makes the bundle foliated.

In each trivialization the horizontal lift of a leafwise path is constant in
fibre coordinates, so no differential equation is ever integrated: transport
of a fibre point is the pointwise composition of the ``L`` maps along the
chain, and transport of transverse section jets is the corresponding jet
composition, with the base jet pulled back through the inverse holonomy so
the result is expressed around the endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as expressions
from .atlas import (Atlas, Box, _apply_exprs, apply_transition,
                    transition_jet, transverse_variables)
from .expr import ExprAst
from .jets import (DEFAULT_TOL, JetMap, Series, compose, identity_jet, invert,
                   monomial_index, monomials, table_size)
from .paths import ChainPath, require_valid

FIBRE_REVERSE_TOL = 1e-8


class BundleError(ValueError):
    """Raised for malformed bundles or out-of-domain fibre data."""


def fibre_variables(codim: int, fibre_dim: int) -> tuple[str, ...]:
    return transverse_variables(codim) + tuple(f"f{j + 1}" for j in range(fibre_dim))


@dataclass(frozen=True)
class FibreTransition:
    src: str
    dst: str
    f_map: tuple[ExprAst, ...]
    fibre_domain: Box
    source_text: tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def from_text(cls, src: str, dst: str, exprs: Sequence[str], codim: int,
                  fibre_domain: Box) -> "FibreTransition":
        variables = fibre_variables(codim, len(exprs))
        parsed = tuple(expressions.parse(text, variables) for text in exprs)
        return cls(src, dst, parsed, fibre_domain, tuple(exprs))

    @property
    def fibre_dim(self) -> int:
        return len(self.f_map)

    def texts(self) -> tuple[str, ...]:
        if self.source_text:
            return self.source_text
        return tuple(expressions.to_source(e) for e in self.f_map)


@dataclass(frozen=True)
class SectionJet:
    """Transverse k-jet of a distinguished section in a chart trivialization."""

    chart: str
    base_y: tuple[float, ...]
    jet: JetMap  # source_dim q, target_dim m

    def __post_init__(self):
        object.__setattr__(self, "base_y", tuple(float(v) for v in self.base_y))
        if len(self.base_y) != self.jet.source_dim:
            raise BundleError("section base point does not match jet source dimension")

    @property
    def value(self) -> np.ndarray:
        return self.jet.constant_term

    def to_wire(self) -> dict:
        return {"chart": self.chart, "base_y": list(self.base_y),
                "jet": self.jet.to_wire()}


class FoliatedBundle:
    """Bundle cocycle data over a foliated atlas; immutable after build."""

    def __init__(self, base: Atlas, fibre_dim: int,
                 fibre_transitions: Mapping[tuple[str, str], FibreTransition]):
        self.base = base
        self.fibre_dim = fibre_dim
        self.fibre_transitions = dict(fibre_transitions)

    @property
    def codim(self) -> int:
        return self.base.codim

    def fibre_transition(self, src: str, dst: str) -> FibreTransition:
        try:
            return self.fibre_transitions[(src, dst)]
        except KeyError:
            raise BundleError(f"no fibre transition registered from {src} to {dst}") from None


def build_bundle(base: Atlas, fibre_dim: int,
                 fibre_transitions: Iterable[FibreTransition],
                 samples_per_edge: int = 3) -> FoliatedBundle:
    """Validate fibre cocycle data against the base atlas.

    Every base edge needs a fibre transition of the right dimension, and the
    registered reverse must invert it to FIBRE_REVERSE_TOL at grid samples of
    (base domain) x (fibre domain) whose images land in the reverse domains.
    """
    table: dict[tuple[str, str], FibreTransition] = {}
    for ft in fibre_transitions:
        if ft.fibre_dim != fibre_dim:
            raise BundleError(
                f"fibre transition {ft.src}->{ft.dst} has {ft.fibre_dim} "
                f"components, expected {fibre_dim}")
        if ft.fibre_domain.dim != fibre_dim:
            raise BundleError(
                f"fibre transition {ft.src}->{ft.dst} has a "
                f"{ft.fibre_domain.dim}-dim fibre box")
        key = (ft.src, ft.dst)
        if key in table:
            raise BundleError(f"duplicate fibre transition {ft.src}->{ft.dst}")
        table[key] = ft
    for key in sorted(base.transitions):
        if key not in table:
            raise BundleError(f"base edge {key[0]}->{key[1]} has no fibre transition")
    for key in sorted(table):
        if key not in base.transitions:
            raise BundleError(f"fibre transition {key[0]}->{key[1]} has no base edge")
        if (key[1], key[0]) not in table:
            raise BundleError(f"missing reverse fibre transition {key[1]}->{key[0]}")
    bundle = FoliatedBundle(base, fibre_dim, table)
    for key in sorted(table):
        _check_fibre_edge(bundle, key, samples_per_edge)
    return bundle


def _eval_fibre_map(bundle: FoliatedBundle, ft: FibreTransition,
                    y: np.ndarray, f: np.ndarray) -> np.ndarray:
    names = fibre_variables(bundle.codim, bundle.fibre_dim)
    binding = dict(zip(names, np.concatenate([y, f])))
    return np.array([expressions.eval_point(e, binding) for e in ft.f_map])


def _check_fibre_edge(bundle: FoliatedBundle, key: tuple[str, str],
                      samples_per_edge: int):
    forward = bundle.fibre_transitions[key]
    reverse = bundle.fibre_transitions[(key[1], key[0])]
    base_fwd = bundle.base.transitions[key]
    base_rev = bundle.base.transitions[(key[1], key[0])]
    for y in base_fwd.domain.grid(samples_per_edge):
        w = _apply_exprs(base_fwd.y_map, bundle.codim, y)
        if not base_rev.domain.contains(w):
            continue
        for f in forward.fibre_domain.grid(samples_per_edge):
            g = _eval_fibre_map(bundle, forward, y, f)
            if not np.all(np.isfinite(g)):
                raise BundleError(
                    f"fibre transition {key[0]}->{key[1]} is non-finite at "
                    f"y={y.tolist()}, f={f.tolist()}")
            if not reverse.fibre_domain.contains(g):
                continue
            back = _eval_fibre_map(bundle, reverse, w, g)
            residual = float(np.max(np.abs(back - f)))
            if residual > FIBRE_REVERSE_TOL:
                raise BundleError(
                    f"fibre transition {key[1]}->{key[0]} does not invert "
                    f"{key[0]}->{key[1]}: residual {residual:.3e}")


# ---------------------------------------------------------------------------
# transport


def transport_point(bundle: FoliatedBundle, path: ChainPath,
                    f0: Sequence[float]) -> np.ndarray:
    """Endpoint of the horizontal lift through fibre point ``f0``.

    Within one trivialization the lift is constant in fibre coordinates, so
    the result is the chainwise composition of the fibre transitions,
    evaluated at the running transverse coordinate.
    """
    require_valid(bundle.base, path)
    f = np.asarray(f0, dtype=float)
    if f.shape != (bundle.fibre_dim,):
        raise BundleError(f"fibre point has shape {f.shape}, expected ({bundle.fibre_dim},)")
    y = np.asarray(path.base_y, dtype=float)
    for src, dst in path.hops:
        ft = bundle.fibre_transition(src, dst)
        if not ft.fibre_domain.contains(f):
            raise BundleError(
                f"fibre point {f.tolist()} escapes the fibre domain of {src}->{dst}")
        f = _eval_fibre_map(bundle, ft, y, f)
        y = apply_transition(bundle.base, src, dst, y)
    return f


@dataclass(frozen=True)
class BundleHolonomyJet:
    """Normalized total transport jet in (base, fibre) variables."""

    source: tuple[str, tuple[float, ...], tuple[float, ...]]  # chart, y, f
    target: tuple[str, tuple[float, ...], tuple[float, ...]]
    jet: JetMap  # (q+m) -> (q+m), zero constant term

    def to_wire(self) -> dict:
        return {
            "source": {"chart": self.source[0], "y": list(self.source[1]),
                       "f": list(self.source[2])},
            "target": {"chart": self.target[0], "y": list(self.target[1]),
                       "f": list(self.target[2])},
            "jet": self.jet.to_wire(),
        }


def total_transport_jet(bundle: FoliatedBundle, path: ChainPath, k: int,
                        f0: Sequence[float]) -> BundleHolonomyJet:
    """Order-k jet of the total chain map (y, f) -> (y-chain, L-chain).

    Anchored at (source_y, f0) and translation-normalized at both ends; the
    first q output components carry exactly the base holonomy jet.
    """
    require_valid(bundle.base, path)
    q, m = bundle.codim, bundle.fibre_dim
    n = q + m
    f_anchor = np.asarray(f0, dtype=float)
    if f_anchor.shape != (m,):
        raise BundleError(f"fibre anchor has shape {f_anchor.shape}, expected ({m},)")
    y = np.asarray(path.base_y, dtype=float)
    f = f_anchor.copy()
    jet: JetMap = identity_jet(n, k)
    names = fibre_variables(q, m)
    for src, dst in path.hops:
        ft = bundle.fibre_transition(src, dst)
        if not ft.fibre_domain.contains(f):
            raise BundleError(
                f"fibre anchor {f.tolist()} escapes the fibre domain of {src}->{dst}")
        base_tr = bundle.base.transition(src, dst)
        args = {names[i]: Series.variable(n, k, i, base=float(v))
                for i, v in enumerate(np.concatenate([y, f]))}
        columns = [expressions.eval_jet(e, args, k).column_series()[0]
                   for e in base_tr.y_map]
        columns += [expressions.eval_jet(e, args, k).column_series()[0]
                    for e in ft.f_map]
        raw = JetMap.from_columns(n, k, columns)
        image = raw.constant_term.copy()
        coeffs = np.array(raw.coefficients)
        coeffs[0] = 0.0
        hop = JetMap(n, n, k, coeffs)
        jet = compose(hop, jet)
        y, f = image[:q], image[q:]
    return BundleHolonomyJet(
        source=(path.base_chart, tuple(path.base_y), tuple(f_anchor.tolist())),
        target=(path.chain[-1], tuple(y.tolist()), tuple(f.tolist())),
        jet=jet,
    )


def base_block(jet: JetMap, q: int) -> JetMap:
    """Restrict a (q+m)-variable jet to its first q outputs over pure-y inputs."""
    n = jet.source_dim
    k = jet.order
    rows = [i for i, mono in enumerate(monomials(n, k)) if not any(mono[q:])]
    sub_index = monomial_index(q, k)
    coeffs = np.zeros((table_size(q, k), q))
    full = monomials(n, k)
    for i in rows:
        coeffs[sub_index[full[i][:q]]] = jet.coefficients[i, :q]
    return JetMap(q, q, k, coeffs)


def transport_section_jet(bundle: FoliatedBundle, path: ChainPath,
                          section: SectionJet, k: int,
                          tol: float = DEFAULT_TOL) -> SectionJet:
    """Transport a transverse section jet along a path, hop by hop.

    At each hop the running jet is pulled back through the inverse of the
    hop's base jet (so it is expressed around the new anchor) and pushed
    through the hop's fibre map.  At k = 0 this reduces to transport_point of
    the section's value.
    """
    require_valid(bundle.base, path)
    if section.chart != path.base_chart:
        raise BundleError(
            f"section anchored in chart {section.chart}, path starts in {path.base_chart}")
    if np.max(np.abs(np.asarray(section.base_y) - np.asarray(path.base_y))) > tol:
        raise BundleError("section base point does not match the path base point")
    if section.jet.order < k:
        raise BundleError(
            f"section jet has order {section.jet.order} < requested order {k}")
    if section.jet.target_dim != bundle.fibre_dim:
        raise BundleError("section jet fibre dimension does not match the bundle")
    q, m = bundle.codim, bundle.fibre_dim
    names = fibre_variables(q, m)
    current = JetMap(q, m, k,
                     section.jet.coefficients[:table_size(q, k)])
    y = np.asarray(path.base_y, dtype=float)
    for src, dst in path.hops:
        ft = bundle.fibre_transition(src, dst)
        if not ft.fibre_domain.contains(current.constant_term):
            raise BundleError(
                f"section value {current.constant_term.tolist()} escapes the "
                f"fibre domain of {src}->{dst}")
        hop_jet, image = transition_jet(bundle.base, src, dst, y, k)
        back = invert(hop_jet)
        pulled = compose(current, back)  # fibre values over target offsets
        base_args = back.column_series()
        args = {}
        for i in range(q):
            series = base_args[i]
            series.coeffs[0] += y[i]
            args[names[i]] = series
        for j, series in enumerate(pulled.column_series()):
            args[names[q + j]] = series
        columns = [expressions.eval_jet(e, args, k).column_series()[0]
                   for e in ft.f_map]
        current = JetMap.from_columns(q, k, columns)
        y = image
    return SectionJet(path.chain[-1], tuple(y.tolist()), current)
