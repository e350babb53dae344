"""holoscope: finite-order holonomy for foliated atlases and bundles.

The package computes parallel-transport germs along leafwise paths as
truncated jets, transports fibre points and transverse section jets through
foliated bundles, and classifies path families into the tower of holonomy
partitions at every jet order.  Germ-level statements are approximated by
their order-k truncations throughout; see the README for the semantics of
"equal up to order k".
"""

from .atlas import (Atlas, AtlasError, Box, Chart, Transition, apply_transition,
                    build_atlas, transition_jet, validate_cocycle)
from .bundle import (BundleError, FibreTransition, FoliatedBundle, SectionJet,
                     build_bundle, total_transport_jet, transport_point,
                     transport_section_jet)
from .expr import ExprError, eval_jet, eval_point, parse, to_source
from .hierarchy import (HierarchyReport, TowerResult, hierarchy_report,
                        verify_tower)
from .holonomy import (HolonomyJet, classify, equivalent, transport_jet,
                       winkelnkemper_map)
from .jets import (DiffeoJet, JetError, JetMap, Series, compose, evaluate,
                   identity_jet, invert, jets_equal, translate_conjugate,
                   truncate)
from .paths import ChainPath, PathError, concat, endpoint, identity_path, reverse

__version__ = "0.1.0"

__all__ = [
    "Atlas", "AtlasError", "Box", "Chart", "Transition", "apply_transition",
    "build_atlas", "transition_jet", "validate_cocycle",
    "BundleError", "FibreTransition", "FoliatedBundle", "SectionJet",
    "build_bundle", "total_transport_jet", "transport_point",
    "transport_section_jet",
    "ExprError", "eval_jet", "eval_point", "parse", "to_source",
    "HierarchyReport", "TowerResult", "hierarchy_report", "verify_tower",
    "HolonomyJet", "classify", "equivalent", "transport_jet",
    "winkelnkemper_map",
    "DiffeoJet", "JetError", "JetMap", "Series", "compose", "evaluate",
    "identity_jet", "invert", "jets_equal", "translate_conjugate", "truncate",
    "ChainPath", "PathError", "concat", "endpoint", "identity_path", "reverse",
    "__version__",
]
