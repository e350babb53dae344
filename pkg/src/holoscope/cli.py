"""Command-line front end.

    holoscope run <config.json> [--order K] [--tol T] [--pretty] [--jobs N]
                                [--seed S] [--figures DIR]
    holoscope gallery list
    holoscope gallery export <name> [--out FILE]

``run`` executes the configuration's tasks in order and emits a JSON report
to standard output (``--pretty`` switches to a human-readable rendering).
Exit status: 0 on success, 1 when a task reports validation violations, 2 on
input errors.  Reports are byte-identical for identical inputs, seed and
flags, independent of ``--jobs``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import gallery, report as reporting
from .atlas import AtlasError, validate_cocycle
from .bundle import BundleError, SectionJet, transport_point, transport_section_jet
from .config import ConfigDocument, ConfigError, load_file
from .expr import ExprError
from .hierarchy import ORDER_CAVEAT, classify_at_order, hierarchy_report, verify_tower
from .holonomy import DEFAULT_ORDER, MAX_SUPPORTED_ORDER, transport_jet
from .jets import DEFAULT_TOL, JetError, JetMap
from .paths import PathError, validate as validate_path

SCHEMA = "holoscope/1"


class TaskError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"task {index}: {message}")
        self.index = index


class _Forced:
    """Resolution of CLI flags against per-task parameters."""

    def __init__(self, order: Optional[int], tol: Optional[float]):
        self._order = order
        self._tol = tol

    def order(self, fallback) -> int:
        return int(self._order if self._order is not None else fallback)

    def tol(self, fallback) -> float:
        return float(self._tol if self._tol is not None else fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holoscope",
        description="holonomy engine for foliated atlases and foliated bundles")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the tasks of a configuration file")
    run.add_argument("config", help="path to a configuration JSON file")
    run.add_argument("--order", type=int, default=None,
                     help=f"jet order (overrides per-task orders; default "
                          f"{DEFAULT_ORDER}, max {MAX_SUPPORTED_ORDER})")
    run.add_argument("--tol", type=float, default=None,
                     help=f"equality tolerance (overrides per-task tolerances; "
                          f"default {DEFAULT_TOL})")
    run.add_argument("--pretty", action="store_true",
                     help="emit a human-readable rendering instead of JSON")
    run.add_argument("--jobs", type=int, default=1,
                     help="concurrency width for classification")
    run.add_argument("--seed", type=int, default=0,
                     help="seed for randomized validation samples")
    run.add_argument("--figures", metavar="DIR", default=None,
                     help="write classification/hierarchy figures into DIR")

    gal = sub.add_parser("gallery", help="list or export builtin instances")
    gal_sub = gal.add_subparsers(dest="gallery_command", required=True)
    gal_sub.add_parser("list", help="list builtin instance names")
    export = gal_sub.add_parser("export", help="emit an instance as a config file")
    export.add_argument("name")
    export.add_argument("--out", default=None, help="write to a file instead of stdout")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gallery":
        return _gallery_command(args)
    return _run_command(args)


def _gallery_command(args) -> int:
    if args.gallery_command == "list":
        for name in gallery.names():
            print(name)
        return 0
    try:
        doc = gallery.export_config(gallery.instance(args.name))
    except gallery.GalleryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _run_command(args) -> int:
    if args.order is not None and not 0 <= args.order <= MAX_SUPPORTED_ORDER:
        print(f"error: --order must lie in 0..{MAX_SUPPORTED_ORDER}", file=sys.stderr)
        return 2
    try:
        document = load_file(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_tasks(document, order=args.order, tol=args.tol,
                           jobs=args.jobs, seed=args.seed, figures=args.figures)
    except (TaskError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.pretty:
        sys.stdout.write(reporting.render_text(report))
    else:
        sys.stdout.write(reporting.to_json(report))
    return 0 if report["ok"] else 1


def run_tasks(document: ConfigDocument, order: Optional[int] = None,
              tol: Optional[float] = None, jobs: int = 1, seed: int = 0,
              figures: Optional[str] = None) -> dict:
    """Execute the document's tasks and assemble the report dictionary.

    ``order`` and ``tol`` of None mean "use each task's own parameters,
    falling back to the package defaults"; explicit values override the
    per-task parameters.
    """
    forced = _Forced(order, tol)
    report: dict = {"schema": SCHEMA, "order": forced.order(DEFAULT_ORDER),
                    "tol": forced.tol(DEFAULT_TOL), "tasks": []}
    ok = True
    path_names = list(document.paths)
    if figures:
        os.makedirs(figures, exist_ok=True)
    for index, task in enumerate(document.tasks):
        kind = task["kind"]
        params = task["params"]
        try:
            handler = _HANDLERS[kind]
            result = handler(document, params, forced=forced, jobs=jobs,
                             seed=seed)
        except (AtlasError, BundleError, PathError, JetError, ExprError,
                KeyError, ValueError) as exc:
            raise TaskError(index, str(exc)) from exc
        result = {"kind": kind, "index": index, **result}
        if figures and kind in ("classify", "hierarchy"):
            path = os.path.join(figures, f"task{index}_{kind}.png")
            written = reporting.render_figure(result, path)
            if written:
                result["figure"] = written
        if not result.get("ok", True):
            ok = False
        report["tasks"].append(result)
    report["paths"] = path_names
    report["ok"] = ok
    return report


def _selected_paths(document: ConfigDocument, params: dict) -> list[str]:
    names = params.get("paths")
    if names is None:
        return list(document.paths)
    missing = [n for n in names if n not in document.paths]
    if missing:
        raise ValueError(f"unknown path names: {missing}")
    return [str(n) for n in names]


def _mode_and_target(document: ConfigDocument, params: dict):
    mode = params.get("mode")
    if mode is None:
        mode = "bundle" if document.bundle is not None else "base"
    if mode not in ("base", "bundle"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "bundle":
        if document.bundle is None:
            raise ValueError("bundle mode requested but no bundle is configured")
        return mode, document.bundle
    return mode, document.atlas


def _anchors(document: ConfigDocument, params: dict):
    anchors = params.get("anchors", None)
    if anchors is not None:
        return [list(map(float, a)) for a in anchors]
    if document.anchors:
        return document.anchors
    return None


def _task_validate(document: ConfigDocument, params: dict, *, forced: "_Forced",
                   jobs: int, seed: int) -> dict:
    samples = int(params.get("samples", 5))
    rng = np.random.default_rng(seed)
    cocycle = validate_cocycle(document.atlas, samples, rng=rng)
    path_entries = []
    paths_ok = True
    for name in _selected_paths(document, params):
        result = validate_path(document.atlas, document.paths[name])
        entry = {"name": name, "ok": result.ok}
        if not result.ok:
            entry["failed_hop"] = result.failed_hop
            entry["reason"] = result.reason
            paths_ok = False
        path_entries.append(entry)
    return {"ok": cocycle.ok and paths_ok, "cocycle": cocycle.to_wire(),
            "paths": path_entries}


def _task_holonomy(document: ConfigDocument, params: dict, *, forced: "_Forced",
                   jobs: int, seed: int) -> dict:
    k = forced.order(params.get("order", DEFAULT_ORDER))
    results = []
    for name in _selected_paths(document, params):
        holonomy = transport_jet(document.atlas, document.paths[name], k)
        results.append({"path": name, **holonomy.to_wire()})
    return {"ok": True, "order": k, "results": results}


def _task_classify(document: ConfigDocument, params: dict, *, forced: "_Forced",
                   jobs: int, seed: int) -> dict:
    k = forced.order(params.get("order", DEFAULT_ORDER))
    eps = forced.tol(params.get("tol", DEFAULT_TOL))
    mode, target = _mode_and_target(document, params)
    names = _selected_paths(document, params)
    paths = [document.paths[n] for n in names]
    partition = classify_at_order(target, paths, k, eps,
                                  anchors=_anchors(document, params), jobs=jobs)
    classes = [{"members": [names[i] for i in cls]} for cls in partition]
    return {"ok": True, "mode": mode, "order": k, "tol": eps,
            "caveat": ORDER_CAVEAT, "classes": classes}


def _task_transport(document: ConfigDocument, params: dict, *, forced: "_Forced",
                    jobs: int, seed: int) -> dict:
    if document.bundle is None:
        raise ValueError("transport tasks need a bundle section")
    name = str(params["path"])
    if name not in document.paths:
        raise ValueError(f"unknown path {name!r}")
    path = document.paths[name]
    fibre_point = [float(v) for v in params["fibre_point"]]
    image = transport_point(document.bundle, path, fibre_point)
    result = {"ok": True, "path": name, "fibre_point": fibre_point,
              "fibre_image": list(image)}
    if "section" in params:
        sdoc = params["section"]
        jet = JetMap.from_wire({
            "source_dim": document.codim,
            "target_dim": document.bundle.fibre_dim,
            "order": int(sdoc["order"]),
            "coefficients": sdoc["coefficients"],
        })
        section = SectionJet(path.base_chart, path.base_y, jet)
        k = forced.order(params.get("order", jet.order))
        transported = transport_section_jet(document.bundle, path, section, k)
        result["section"] = transported.to_wire()
    return result


def _task_hierarchy(document: ConfigDocument, params: dict, *, forced: "_Forced",
                    jobs: int, seed: int) -> dict:
    max_order = forced.order(params.get("max_order", DEFAULT_ORDER))
    if max_order > MAX_SUPPORTED_ORDER:
        raise ValueError(f"max_order exceeds the supported maximum {MAX_SUPPORTED_ORDER}")
    eps = forced.tol(params.get("tol", DEFAULT_TOL))
    mode, target = _mode_and_target(document, params)
    names = _selected_paths(document, params)
    paths = [document.paths[n] for n in names]
    anchors = _anchors(document, params)
    report = hierarchy_report(target, paths, max_order, eps, anchors=anchors,
                              jobs=jobs)
    tower = verify_tower(target, paths, max_order, eps, anchors=anchors)
    doc = report.to_wire(names)
    doc["tower"] = tower.to_wire()
    doc["ok"] = report.ok and tower.ok
    return doc


_HANDLERS = {
    "validate": _task_validate,
    "holonomy": _task_holonomy,
    "classify": _task_classify,
    "transport": _task_transport,
    "hierarchy": _task_hierarchy,
}


if __name__ == "__main__":
    raise SystemExit(main())
