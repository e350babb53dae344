import numpy as np
import pytest

from holoscope import gallery
from holoscope.atlas import Box
from holoscope.bundle import (BundleError, FibreTransition, SectionJet,
                              base_block, build_bundle, total_transport_jet,
                              transport_point, transport_section_jet)
from holoscope.holonomy import transport_jet
from holoscope.jets import (JetMap, compose, identity_jet, invert, jets_equal,
                            table_size)
from holoscope.paths import concat, identity_path


def trivial_bundle_over(instance, fibre_dim=1, bound=4.0):
    box = Box((-bound,) * fibre_dim, (bound,) * fibre_dim)
    names = [f"f{j + 1}" for j in range(fibre_dim)]
    transitions = [FibreTransition.from_text(src, dst, names, instance.codim, box)
                   for (src, dst) in instance.atlas.transitions]
    return build_bundle(instance.atlas, fibre_dim, transitions)


def test_build_rejects_missing_fibre_edge():
    mobius = gallery.mobius()
    box = Box((-1.0,), (1.0,))
    transitions = [FibreTransition.from_text("C0", "C1", ["f1"], 1, box)]
    with pytest.raises(BundleError, match="no fibre transition"):
        build_bundle(mobius.atlas, 1, transitions)


def test_build_rejects_non_inverse_fibre_pair():
    mobius = gallery.mobius()
    box = Box((-1.0,), (1.0,))
    transitions = []
    for (src, dst) in mobius.atlas.transitions:
        text = "2*f1" if (src, dst) == ("C0", "C1") else "f1"
        transitions.append(FibreTransition.from_text(src, dst, [text], 1, box))
    with pytest.raises(BundleError, match="does not invert"):
        build_bundle(mobius.atlas, 1, transitions)


def test_mobius_line_bundle_point_transport():
    mb = gallery.mobius_line_bundle()
    assert transport_point(mb.bundle, mb.path("loop"), [0.7]) == pytest.approx([-0.7])
    assert transport_point(mb.bundle, mb.path("loop2"), [0.7]) == pytest.approx([0.7])


def test_trivial_bundle_point_transport():
    product = gallery.product_foliation(1)
    bundle = trivial_bundle_over(product)
    assert transport_point(bundle, product.path("loop"), [0.3]) == pytest.approx([0.3])


def test_single_chart_transport_is_identity_on_fibres():
    # chart-local horizontality: within one trivialization nothing moves
    mb = gallery.mobius_line_bundle()
    unit = identity_path("C0", (0.1,))
    assert transport_point(mb.bundle, unit, [0.9]) == pytest.approx([0.9])
    out = transport_section_jet(
        mb.bundle, unit, SectionJet("C0", (0.1,), JetMap(1, 1, 2, [[0.9], [0.2], [0.1]])), 2)
    assert np.array_equal(out.jet.coefficients.ravel(), [0.9, 0.2, 0.1])


def test_fibre_domain_violation():
    mb = gallery.mobius_line_bundle()
    with pytest.raises(BundleError, match="fibre domain"):
        transport_point(mb.bundle, mb.path("loop"), [100.0])


def test_total_jet_trivial_is_identity():
    product = gallery.product_foliation(1)
    bundle = trivial_bundle_over(product)
    tj = total_transport_jet(bundle, product.path("loop"), 3, [0.2])
    assert jets_equal(tj.jet, identity_jet(2, 3), 1e-14)


def test_total_jet_mobius_frozen():
    mb = gallery.mobius_line_bundle()
    tj = total_transport_jet(mb.bundle, mb.path("loop"), 1, [0.5])
    assert np.allclose(tj.jet.coefficients, [[0, 0], [-1, 0], [0, -1]], atol=1e-15)
    assert tj.source == ("C0", (0.0,), (0.5,))
    assert np.allclose(tj.target[2], [-0.5])


def test_total_jet_base_block_matches_base_holonomy():
    for inst in (gallery.mobius_line_bundle(), gallery.annulus_frame(),
                 gallery.tangency3_frame()):
        for pname in ("loop", "loop2", "arc"):
            path = inst.path(pname)
            anchor = inst.fibre_anchors[0]
            for k in (1, 2, 3):
                tj = total_transport_jet(inst.bundle, path, k, anchor)
                hb = transport_jet(inst.atlas, path, k)
                assert jets_equal(base_block(tj.jet, inst.codim), hb.jet, 1e-12)


def test_total_jet_functorial_over_concat():
    mb = gallery.mobius_line_bundle()
    loop = mb.path("loop")
    double = concat(mb.atlas, loop, loop)
    lhs = total_transport_jet(mb.bundle, double, 3, [0.5]).jet
    first = total_transport_jet(mb.bundle, loop, 3, [0.5])
    second = total_transport_jet(mb.bundle, loop, 3, list(first.target[2]))
    assert jets_equal(lhs, compose(second.jet, first.jet), 1e-9)


def test_section_transport_trivial_everything():
    product = gallery.product_foliation(1)
    bundle = trivial_bundle_over(product)
    section = SectionJet("A", (0.0,), JetMap(1, 1, 3, [[0.5], [1.0], [-0.5], [2.0]]))
    out = transport_section_jet(bundle, product.path("loop"), section, 3)
    assert np.allclose(out.jet.coefficients, section.jet.coefficients, atol=1e-14)


def test_section_transport_mobius_constant():
    mb = gallery.mobius_line_bundle()
    section = SectionJet("C0", (0.0,), JetMap(1, 1, 2, [[0.3], [0.0], [0.0]]))
    out = transport_section_jet(mb.bundle, mb.path("loop"), section, 0)
    assert out.jet.constant_term == pytest.approx([-0.3])
    moved = transport_point(mb.bundle, mb.path("loop"), [0.3])
    assert out.jet.constant_term == pytest.approx(moved)


def test_section_transport_annulus_trivial_fibre_frozen():
    # base holonomy y -> y/2 with trivial fibre maps sends f(y)=y to f(y)=2y
    annulus = gallery.contracting_annulus(0.5)
    bundle = trivial_bundle_over(annulus)
    section = SectionJet("C0", (0.0,), JetMap(1, 1, 1, [[0.0], [1.0]]))
    out = transport_section_jet(bundle, annulus.path("loop"), section, 1)
    assert np.allclose(out.jet.coefficients.ravel(), [0.0, 2.0], atol=1e-12)


def test_section_transport_requires_matching_anchor():
    mb = gallery.mobius_line_bundle()
    section = SectionJet("C1", (0.0,), JetMap(1, 1, 1, [[0.0], [1.0]]))
    with pytest.raises(BundleError, match="chart"):
        transport_section_jet(mb.bundle, mb.path("loop"), section, 1)


def test_section_transport_order_bound():
    mb = gallery.mobius_line_bundle()
    section = SectionJet("C0", (0.0,), JetMap(1, 1, 1, [[0.0], [1.0]]))
    with pytest.raises(BundleError, match="order"):
        transport_section_jet(mb.bundle, mb.path("loop"), section, 3)


# --- dual-route check: hop-by-hop transport vs total-jet substitution ------------

def substitution_oracle(bundle, path, section, k):
    """Transported section via one-shot substitution into the total jet."""
    q, m = bundle.codim, bundle.fibre_dim
    s_jet = JetMap(q, m, k, section.jet.coefficients[:table_size(q, k)])
    f0 = s_jet.constant_term.copy()
    total = total_transport_jet(bundle, path, k, f0)
    base = transport_jet(bundle.base, path, k)
    graph_fibre = np.array(s_jet.coefficients)
    graph_fibre[0] -= f0
    graph = JetMap(q, q + m, k,
                   np.hstack([identity_jet(q, k).coefficients, graph_fibre]))
    fibre_rows = compose(total.jet, graph).coefficients[:, q:]
    pulled = compose(JetMap(q, m, k, fibre_rows), invert(base.jet))
    coeffs = np.array(pulled.coefficients)
    coeffs[0] += np.array(total.target[2])
    return JetMap(q, m, k, coeffs)


def test_section_transport_matches_substitution_oracle():
    rng = np.random.default_rng(42)
    instances = [gallery.mobius_line_bundle(), gallery.annulus_frame(),
                 gallery.tangency3_frame()]
    for _ in range(40):
        inst = instances[int(rng.integers(len(instances)))]
        pname = ("loop", "loop2", "arc")[int(rng.integers(3))]
        k = int(rng.integers(0, 4))
        m = inst.bundle.fibre_dim
        coeffs = rng.uniform(-0.8, 0.8, size=(table_size(1, 4), m))
        section = SectionJet("C0", (0.0,), JetMap(1, m, 4, coeffs))
        got = transport_section_jet(inst.bundle, inst.path(pname), section, k)
        want = substitution_oracle(inst.bundle, inst.path(pname), section, k)
        assert jets_equal(got.jet, want, 1e-9)
        moved = transport_point(inst.bundle, inst.path(pname), coeffs[0])
        assert np.allclose(got.jet.constant_term, moved, atol=1e-12)
