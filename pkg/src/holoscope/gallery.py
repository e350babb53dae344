"""Builtin foliated atlases, bundles and paths with known holonomy.

Every instance records, as plain data, the holonomy jets its named paths are
expected to produce, each with a provenance note saying how the value was
obtained by hand.  Tests compare engine output against these frozen values;
nothing here recomputes an expectation through the machinery under test.

Geometric conventions.  Circle-like bases are covered by a cycle of four
charts ``C0 -> C1 -> C2 -> C3 -> C0`` whose first three edges are the
identity and whose closing edge carries the gluing map; four charts keep the
transition graph free of 3-cliques, so the sampled cocycle check is vacuous
there, while the dedicated ``clique`` instance exercises it.  Reverse edges
of nonlinear gluings cannot be written exactly in the expression grammar
(no radicals), so they are truncated series reversions of high degree on a
small domain box; the truncation residual on the box is far below every
validation tolerance, and at the central leaf (the anchor of all loops) the
reversion is exact to every order in play.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import expr as expressions
from .atlas import Atlas, Box, Chart, Transition, build_atlas, transverse_variables
from .bundle import FibreTransition, FoliatedBundle, build_bundle
from .expr import (BinOp, Call, Const, ExprAst, Neg, Pow, Var, parse,
                   to_source)
from .jets import JetMap, Series, as_diffeo, invert
from .paths import ChainPath, identity_path

SUSPENSION_HALF_WIDTH = 0.125
REVERSION_ORDER = 72
FRAME_FIBRE_BOUND = 16.0


class GalleryError(ValueError):
    pass


@dataclass(frozen=True)
class ExpectedJet:
    """A frozen holonomy expectation: graded coefficient rows plus provenance."""

    path: str
    order: int
    rows: tuple[tuple[float, ...], ...]
    provenance: str

    def jet(self, codim: int) -> JetMap:
        return JetMap(codim, codim, self.order, np.array(self.rows, dtype=float))


@dataclass
class GalleryInstance:
    name: str
    atlas: Atlas
    paths: dict[str, ChainPath]
    expected: tuple[ExpectedJet, ...] = ()
    bundle: Optional[FoliatedBundle] = None
    fibre_anchors: tuple[tuple[float, ...], ...] = ()
    notes: str = ""

    @property
    def codim(self) -> int:
        return self.atlas.codim

    def path(self, name: str) -> ChainPath:
        try:
            return self.paths[name]
        except KeyError:
            raise GalleryError(f"instance {self.name} has no path {name!r}") from None


def _rows1(*coeffs: float) -> tuple[tuple[float, ...], ...]:
    return tuple((float(c),) for c in coeffs)


def _identity_transition(src: str, dst: str, q: int, half: float) -> Transition:
    exprs = [f"y{i + 1}" for i in range(q)]
    return Transition.from_text(src, dst, exprs, _box(q, half))


def _box(q: int, half: float) -> Box:
    return Box(tuple(-half for _ in range(q)), tuple(half for _ in range(q)))


def _cycle_paths(q: int) -> dict[str, ChainPath]:
    zero = tuple(0.0 for _ in range(q))
    loop = ChainPath("C0", zero, ("C0", "C1", "C2", "C3", "C0"))
    loop2 = ChainPath("C0", zero, loop.chain + loop.chain[1:], duration=2.0)
    loop3 = ChainPath("C0", zero, loop.chain + loop.chain[1:] + loop.chain[1:],
                      duration=3.0)
    return {
        "id": identity_path("C0", zero),
        "loop": loop,
        "loop2": loop2,
        "loop3": loop3,
        "arc": ChainPath("C0", zero, ("C0", "C1")),
    }


def _cycle_atlas(q: int, closing: Transition, closing_reverse: Transition,
                 half: float) -> Atlas:
    charts = [Chart(f"C{i}", 1, q) for i in range(4)]
    transitions = []
    for a, b in (("C0", "C1"), ("C1", "C2"), ("C2", "C3")):
        transitions.append(_identity_transition(a, b, q, half))
        transitions.append(_identity_transition(b, a, q, half))
    transitions.append(closing)
    transitions.append(closing_reverse)
    return build_atlas(charts, transitions)


# ---------------------------------------------------------------------------
# series reversion of a gluing map, rendered back into the grammar


def invert_gluing_text(phi: ExprAst, order: int = REVERSION_ORDER) -> str:
    """Polynomial text of the truncated compositional inverse of ``phi``.

    ``phi`` must fix 0 with nonzero derivative.  The result agrees with the
    true inverse to the given order at 0, which makes reversed paths through
    the gluing exact at the central leaf.
    """
    y = Series.variable(1, order, 0)
    jet = expressions.eval_jet(phi, {"y1": y}, order)
    if jet.constant_term[0] != 0.0:
        raise GalleryError("gluing map must fix the transverse origin")
    inverse = invert(as_diffeo(jet))
    coeffs = inverse.coefficients[:, 0]
    terms = []
    for power, c in enumerate(coeffs):
        c = float(c)
        if power == 0 or c == 0.0:
            continue
        magnitude = repr(abs(c))
        monomial = "y1" if power == 1 else f"y1^{power}"
        sign = "-" if c < 0 else "+"
        terms.append((sign, f"{magnitude}*{monomial}"))
    if not terms:
        raise GalleryError("gluing map has no invertible linear part")
    first_sign, first_term = terms[0]
    text = first_term if first_sign == "+" else f"-{first_term}"
    for sign, term in terms[1:]:
        text += f" {sign} {term}"
    return text


# ---------------------------------------------------------------------------
# AST differentiation (gallery plumbing for transverse frame bundles)


def differentiate(ast: ExprAst, var: str) -> ExprAst:
    if isinstance(ast, Const):
        return Const(0.0)
    if isinstance(ast, Var):
        return Const(1.0) if ast.name == var else Const(0.0)
    if isinstance(ast, Neg):
        return _neg(differentiate(ast.operand, var))
    if isinstance(ast, BinOp):
        da = differentiate(ast.left, var)
        db = differentiate(ast.right, var)
        if ast.op == "+":
            return _add(da, db)
        if ast.op == "-":
            return _sub(da, db)
        if ast.op == "*":
            return _add(_mul(da, ast.right), _mul(ast.left, db))
        numerator = _sub(_mul(da, ast.right), _mul(ast.left, db))
        return BinOp("/", numerator, Pow(ast.right, 2))
    if isinstance(ast, Pow):
        if ast.exponent == 0:
            return Const(0.0)
        inner = differentiate(ast.base, var)
        lowered = ast.base if ast.exponent == 2 else Pow(ast.base, ast.exponent - 1)
        if ast.exponent == 1:
            return inner
        return _mul(_mul(Const(float(ast.exponent)), lowered), inner)
    if isinstance(ast, Call):
        inner = differentiate(ast.argument, var)
        if ast.func == "sin":
            return _mul(Call("cos", ast.argument), inner)
        if ast.func == "cos":
            return _mul(_neg(Call("sin", ast.argument)), inner)
        return _mul(Call("exp", ast.argument), inner)
    raise TypeError(f"not an expression node: {ast!r}")


def _is_const(ast: ExprAst, value: float) -> bool:
    return isinstance(ast, Const) and ast.value == value


def _neg(a: ExprAst) -> ExprAst:
    if isinstance(a, Const):
        return Const(-a.value)
    return Neg(a)


def _add(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: ExprAst, b: ExprAst) -> ExprAst:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinOp("*", a, b)


# ---------------------------------------------------------------------------
# instances


@lru_cache(maxsize=None)
def product_foliation(q: int = 1) -> GalleryInstance:
    """Three pairwise-glued identity charts: all holonomy is trivial."""
    charts = [Chart(c, 2, q) for c in ("A", "B", "C")]
    transitions = []
    for a in ("A", "B", "C"):
        for b in ("A", "B", "C"):
            if a != b:
                transitions.append(_identity_transition(a, b, q, 1.0))
    atlas = build_atlas(charts, transitions)
    zero = tuple(0.0 for _ in range(q))
    loop = ChainPath("A", zero, ("A", "B", "C", "A"))
    paths = {
        "id": identity_path("A", zero),
        "loop": loop,
        "loop2": ChainPath("A", zero, loop.chain + loop.chain[1:], duration=2.0),
        "arc": ChainPath("A", zero, ("A", "B")),
        "arc_back": ChainPath("A", zero, ("A", "C", "B")),
    }
    identity_rows = {
        1: _rows1(0.0, 1.0),
        2: _rows1(0.0, 1.0, 0.0),
    }
    expected = tuple(
        ExpectedJet("loop", k, identity_rows[k], "identity chart gluings compose to the identity")
        for k in identity_rows
    ) if q == 1 else ()
    name = "product" if q == 1 else f"product{q}"
    return GalleryInstance(name, atlas, paths, expected,
                           notes="trivial product foliation")


@lru_cache(maxsize=None)
def linear_clique() -> GalleryInstance:
    """Three charts with consistent linear gluings 2y, 3y, 6y.

    The transition graph is a full 3-clique, so the sampled cocycle check is
    non-vacuous: perturbing any single coefficient breaks the relation
    6y = 3(2y).
    """
    charts = [Chart(c, 1, 1) for c in ("A", "B", "C")]
    box = Box((-1.0,), (1.0,))
    transitions = [
        Transition.from_text("A", "B", ["2*y1"], box),
        Transition.from_text("B", "A", ["y1/2"], box),
        Transition.from_text("B", "C", ["3*y1"], box),
        Transition.from_text("C", "B", ["y1/3"], box),
        Transition.from_text("A", "C", ["6*y1"], box),
        Transition.from_text("C", "A", ["y1/6"], box),
    ]
    atlas = build_atlas(charts, transitions)
    loop = ChainPath("A", (0.0,), ("A", "B", "C", "A"))
    paths = {
        "id": identity_path("A", (0.0,)),
        "loop": loop,
        "hop": ChainPath("A", (0.1,), ("A", "B")),
    }
    expected = (
        ExpectedJet("loop", 2, _rows1(0.0, 1.0, 0.0),
                    "2, then 3, then 1/6 multiply to 1"),
    )
    return GalleryInstance("clique", atlas, paths, expected,
                           notes="3-clique with multiplicative linear cocycle")


@lru_cache(maxsize=None)
def mobius() -> GalleryInstance:
    """Codimension-1 cycle whose closing edge is the flip y -> -y.

    The central-leaf loop has holonomy -id, so the loop generates a Z/2
    holonomy group: the squared loop is trivial at every order.
    """
    half = 0.5
    closing = Transition.from_text("C3", "C0", ["-y1"], _box(1, half))
    closing_rev = Transition.from_text("C0", "C3", ["-y1"], _box(1, half))
    atlas = _cycle_atlas(1, closing, closing_rev, half)
    paths = _cycle_paths(1)
    expected = (
        ExpectedJet("loop", 1, _rows1(0.0, -1.0),
                    "hand composition of id, id, id, flip"),
        ExpectedJet("loop", 3, _rows1(0.0, -1.0, 0.0, 0.0),
                    "flip is linear: higher coefficients vanish"),
        ExpectedJet("loop2", 3, _rows1(0.0, 1.0, 0.0, 0.0),
                    "(-1) squared"),
        ExpectedJet("loop3", 1, _rows1(0.0, -1.0),
                    "(-1) cubed"),
    )
    return GalleryInstance("mobius", atlas, paths, expected,
                           notes="two-sided cover with a single flip gluing")


@lru_cache(maxsize=None)
def suspension(phi_text: str, half_width: float = SUSPENSION_HALF_WIDTH,
               reversion_order: int = REVERSION_ORDER,
               name: str = "suspension",
               expected: tuple[ExpectedJet, ...] = ()) -> GalleryInstance:
    """Circle cycle glued by ``phi``; loop holonomy is the germ of phi at 0."""
    phi = parse(phi_text, transverse_variables(1))
    value_at_zero = expressions.eval_point(phi, {"y1": 0.0})
    if value_at_zero != 0.0:
        raise GalleryError("suspension gluing must fix y = 0")
    psi_text = invert_gluing_text(phi, reversion_order)
    closing = Transition.from_text("C3", "C0", [phi_text], _box(1, half_width))
    closing_rev = Transition.from_text("C0", "C3", [psi_text], _box(1, half_width))
    atlas = _cycle_atlas(1, closing, closing_rev, half_width)
    return GalleryInstance(name, atlas, _cycle_paths(1), expected,
                           notes=f"suspension of {phi_text}")


@lru_cache(maxsize=None)
def contracting_annulus(lam: float = 0.5) -> GalleryInstance:
    """Suspension of the linear contraction y -> lam * y."""
    expected = (
        ExpectedJet("loop", 1, _rows1(0.0, lam), "gluing is the linear contraction"),
        ExpectedJet("loop2", 1, _rows1(0.0, lam * lam), "two loops multiply the rates"),
        ExpectedJet("loop3", 1, _rows1(0.0, lam ** 3), "three loops multiply the rates"),
    )
    return suspension(f"{lam!r}*y1", half_width=0.5, name="annulus",
                      expected=expected)


@lru_cache(maxsize=None)
def suspension_quadratic() -> GalleryInstance:
    expected = (
        ExpectedJet("loop", 2, _rows1(0.0, 1.0, 1.0),
                    "loop holonomy is the gluing jet y + y^2"),
        ExpectedJet("loop", 4, _rows1(0.0, 1.0, 1.0, 0.0, 0.0),
                    "the gluing is a quadratic polynomial"),
        ExpectedJet("loop2", 3, _rows1(0.0, 1.0, 2.0, 2.0),
                    "hand expansion of (y + y^2) substituted into itself"),
    )
    return suspension("y1 + y1^2", name="suspension", expected=expected)


@lru_cache(maxsize=None)
def tangency(m: int) -> GalleryInstance:
    """Suspension of y + y^m: trivial below order m, nontrivial from order m."""
    if m < 2:
        raise GalleryError("tangency order must be >= 2")
    expected = (
        ExpectedJet("loop", m - 1, _rows1(*([0.0, 1.0] + [0.0] * (m - 2))),
                    "y^m is invisible below order m"),
        ExpectedJet("loop", m, _rows1(*([0.0, 1.0] + [0.0] * (m - 2) + [1.0])),
                    "the gluing jet at its own degree"),
    )
    return suspension(f"y1 + y1^{m}", name=f"tangency{m}", expected=expected)


@lru_cache(maxsize=None)
def spiral() -> GalleryInstance:
    """Codimension-2 cycle glued by a quarter turn combined with halving."""
    half = 0.5
    closing = Transition.from_text("C3", "C0", ["-0.5*y2", "0.5*y1"], _box(2, half))
    closing_rev = Transition.from_text("C0", "C3", ["2*y2", "-2*y1"], _box(2, half))
    atlas = _cycle_atlas(2, closing, closing_rev, half)
    expected = (
        ExpectedJet("loop", 1,
                    ((0.0, 0.0), (0.0, 0.5), (-0.5, 0.0)),
                    "the gluing is the linear quarter-turn contraction"),
    )
    return GalleryInstance("spiral", atlas, _cycle_paths(2), expected,
                           notes="multivariate linear gluing")


@lru_cache(maxsize=None)
def mobius_line_bundle() -> GalleryInstance:
    """Line bundle over the flip cycle whose fibre flips with the base."""
    base_instance = mobius()
    fibre_box = Box((-4.0,), (4.0,))
    fibre_transitions = []
    for (src, dst) in base_instance.atlas.transitions:
        flip = {src, dst} == {"C3", "C0"}
        text = "-f1" if flip else "f1"
        fibre_transitions.append(
            FibreTransition.from_text(src, dst, [text], 1, fibre_box))
    bundle = build_bundle(base_instance.atlas, 1, fibre_transitions)
    return GalleryInstance("mobius_bundle", base_instance.atlas,
                           dict(base_instance.paths), base_instance.expected,
                           bundle=bundle, fibre_anchors=((0.5,),),
                           notes="fibre cocycle mirrors the base flip")


def frame_bundle(instance: GalleryInstance) -> GalleryInstance:
    """The transverse frame bundle of an instance.

    Fibre coordinates are the q x q frame matrix, flattened row-major; each
    edge acts by left multiplication with the Jacobian of its transverse
    map at the running base point, so frame transport at order k carries the
    base holonomy data of order k + 1.
    """
    q = instance.codim
    m = q * q
    names = transverse_variables(q)
    fibre_box = Box(tuple(-FRAME_FIBRE_BOUND for _ in range(m)),
                    tuple(FRAME_FIBRE_BOUND for _ in range(m)))
    fibre_transitions = []
    for (src, dst), tr in sorted(instance.atlas.transitions.items()):
        jacobian = [[differentiate(tr.y_map[i], names[l]) for l in range(q)]
                    for i in range(q)]
        exprs = []
        for i in range(q):
            for j in range(q):
                entry: ExprAst = Const(0.0)
                for l in range(q):
                    entry = _add(entry, _mul(jacobian[i][l], Var(f"f{l * q + j + 1}")))
                exprs.append(to_source(entry))
        fibre_transitions.append(FibreTransition.from_text(
            src, dst, exprs, q, fibre_box))
    bundle = build_bundle(instance.atlas, m, fibre_transitions)
    identity_anchor = tuple(np.eye(q).ravel().tolist())
    return GalleryInstance(f"{instance.name}_frame", instance.atlas,
                           dict(instance.paths), instance.expected,
                           bundle=bundle, fibre_anchors=(identity_anchor,),
                           notes=f"transverse frame bundle of {instance.name}")


@lru_cache(maxsize=None)
def annulus_frame() -> GalleryInstance:
    return frame_bundle(contracting_annulus(0.5))


@lru_cache(maxsize=None)
def tangency3_frame() -> GalleryInstance:
    return frame_bundle(tangency(3))


BUILTINS: dict[str, Callable[[], GalleryInstance]] = {
    "product": product_foliation,
    "product2": lambda: product_foliation(2),
    "clique": linear_clique,
    "mobius": mobius,
    "annulus": contracting_annulus,
    "suspension": suspension_quadratic,
    "tangency2": lambda: tangency(2),
    "tangency3": lambda: tangency(3),
    "tangency4": lambda: tangency(4),
    "tangency5": lambda: tangency(5),
    "spiral": spiral,
    "mobius_bundle": mobius_line_bundle,
    "annulus_frame": annulus_frame,
    "tangency3_frame": tangency3_frame,
}


def instance(name: str) -> GalleryInstance:
    try:
        builder = BUILTINS[name]
    except KeyError:
        raise GalleryError(f"unknown gallery instance {name!r}") from None
    return builder()


def names() -> list[str]:
    return list(BUILTINS)


def base_instances() -> list[GalleryInstance]:
    return [instance(n) for n in names() if instance(n).bundle is None]


def bundle_instances() -> list[GalleryInstance]:
    return [instance(n) for n in names() if instance(n).bundle is not None]


# ---------------------------------------------------------------------------
# export to the configuration format


def export_config(inst: GalleryInstance) -> dict:
    """Emit an instance in the CLI configuration schema."""
    atlas = inst.atlas
    doc: dict = {
        "codim": atlas.codim,
        "leaf_dim": atlas.leaf_dim,
        "charts": [{"id": cid} for cid in atlas.chart_ids()],
        "transitions": [
            {
                "src": src,
                "dst": dst,
                "y_map": list(tr.texts()),
                "domain": tr.domain.to_wire(),
            }
            for (src, dst), tr in sorted(atlas.transitions.items())
        ],
    }
    if inst.bundle is not None:
        doc["bundle"] = {
            "fibre_dim": inst.bundle.fibre_dim,
            "transitions": [
                {
                    "src": src,
                    "dst": dst,
                    "f_map": list(ft.texts()),
                    "domain": ft.fibre_domain.to_wire(),
                }
                for (src, dst), ft in sorted(inst.bundle.fibre_transitions.items())
            ],
        }
        if inst.fibre_anchors:
            doc["bundle"]["anchors"] = [list(a) for a in inst.fibre_anchors]
    doc["paths"] = [path.to_wire(name) for name, path in inst.paths.items()]
    tasks: list[dict] = [{"kind": "validate", "params": {}}]
    if inst.bundle is None:
        tasks.append({"kind": "classify", "params": {"order": 1}})
        tasks.append({"kind": "hierarchy", "params": {"max_order": 3}})
    else:
        anchor = list(inst.fibre_anchors[0]) if inst.fibre_anchors else \
            [0.0] * inst.bundle.fibre_dim
        tasks.append({"kind": "transport",
                      "params": {"path": "loop", "fibre_point": anchor}})
        tasks.append({"kind": "classify", "params": {"order": 1, "mode": "bundle"}})
        tasks.append({"kind": "hierarchy", "params": {"max_order": 2, "mode": "bundle"}})
    doc["tasks"] = tasks
    return doc
