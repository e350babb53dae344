"""Configuration documents: the on-disk JSON form of atlases, bundles, paths.

Errors carry a JSON-pointer-style location so a broken file can be fixed
without reading the loader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional

from .atlas import Atlas, AtlasError, Box, Chart, Transition, build_atlas
from .bundle import BundleError, FibreTransition, FoliatedBundle, build_bundle
from .expr import ExprError
from .paths import ChainPath, PathError

SCHEMA = "holoscope/1"


class ConfigError(ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


@dataclass
class ConfigDocument:
    codim: int
    leaf_dim: int
    atlas: Atlas
    bundle: Optional[FoliatedBundle]
    anchors: list[list[float]]
    paths: dict[str, ChainPath]
    tasks: list[dict]


def load_file(path: str) -> ConfigDocument:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError("/", f"cannot read configuration: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"invalid JSON: {exc}") from exc
    return load_document(raw)


def _require(doc: dict, key: str, pointer: str) -> Any:
    if key not in doc:
        raise ConfigError(f"{pointer}/{key}", "missing required member")
    return doc[key]


def _box(doc: Any, pointer: str) -> Box:
    if not isinstance(doc, dict) or "lo" not in doc or "hi" not in doc:
        raise ConfigError(pointer, "domain must be an object with 'lo' and 'hi'")
    try:
        return Box(tuple(float(v) for v in doc["lo"]),
                   tuple(float(v) for v in doc["hi"]))
    except (TypeError, ValueError, AtlasError) as exc:
        raise ConfigError(pointer, str(exc)) from exc


def load_document(raw: Any) -> ConfigDocument:
    if not isinstance(raw, dict):
        raise ConfigError("/", "configuration must be a JSON object")
    codim = _require(raw, "codim", "")
    leaf_dim = _require(raw, "leaf_dim", "")
    if not isinstance(codim, int) or codim < 1:
        raise ConfigError("/codim", "must be a positive integer")
    if not isinstance(leaf_dim, int) or leaf_dim < 0:
        raise ConfigError("/leaf_dim", "must be a non-negative integer")

    charts = []
    for i, entry in enumerate(_require(raw, "charts", "")):
        pointer = f"/charts/{i}"
        if not isinstance(entry, dict) or "id" not in entry:
            raise ConfigError(pointer, "chart entries need an 'id'")
        charts.append(Chart(str(entry["id"]), leaf_dim, codim))

    transitions = []
    for i, entry in enumerate(_require(raw, "transitions", "")):
        pointer = f"/transitions/{i}"
        for key in ("src", "dst", "y_map", "domain"):
            _require(entry, key, pointer)
        exprs = entry["y_map"]
        if not isinstance(exprs, list) or len(exprs) != codim:
            raise ConfigError(f"{pointer}/y_map",
                              f"expected {codim} expression strings")
        try:
            transitions.append(Transition.from_text(
                str(entry["src"]), str(entry["dst"]),
                [str(e) for e in exprs], _box(entry["domain"], f"{pointer}/domain")))
        except ExprError as exc:
            raise ConfigError(f"{pointer}/y_map", str(exc)) from exc

    try:
        atlas = build_atlas(charts, transitions)
    except (AtlasError, ExprError) as exc:
        raise ConfigError("/transitions", str(exc)) from exc

    bundle = None
    anchors: list[list[float]] = []
    if "bundle" in raw and raw["bundle"] is not None:
        bdoc = raw["bundle"]
        fibre_dim = _require(bdoc, "fibre_dim", "/bundle")
        if not isinstance(fibre_dim, int) or fibre_dim < 1:
            raise ConfigError("/bundle/fibre_dim", "must be a positive integer")
        fibre_transitions = []
        for i, entry in enumerate(_require(bdoc, "transitions", "/bundle")):
            pointer = f"/bundle/transitions/{i}"
            for key in ("src", "dst", "f_map", "domain"):
                _require(entry, key, pointer)
            exprs = entry["f_map"]
            if not isinstance(exprs, list) or len(exprs) != fibre_dim:
                raise ConfigError(f"{pointer}/f_map",
                                  f"expected {fibre_dim} expression strings")
            try:
                fibre_transitions.append(FibreTransition.from_text(
                    str(entry["src"]), str(entry["dst"]),
                    [str(e) for e in exprs], codim,
                    _box(entry["domain"], f"{pointer}/domain")))
            except ExprError as exc:
                raise ConfigError(f"{pointer}/f_map", str(exc)) from exc
        try:
            bundle = build_bundle(atlas, fibre_dim, fibre_transitions)
        except (BundleError, ExprError) as exc:
            raise ConfigError("/bundle", str(exc)) from exc
        for i, anchor in enumerate(bdoc.get("anchors", [])):
            pointer = f"/bundle/anchors/{i}"
            try:
                vec = [float(v) for v in anchor]
            except (TypeError, ValueError) as exc:
                raise ConfigError(pointer, "anchor must be a number list") from exc
            if len(vec) != fibre_dim:
                raise ConfigError(pointer, f"anchor must have {fibre_dim} entries")
            anchors.append(vec)

    paths: dict[str, ChainPath] = {}
    for i, entry in enumerate(raw.get("paths", [])):
        pointer = f"/paths/{i}"
        for key in ("name", "base_chart", "base_y", "chain"):
            _require(entry, key, pointer)
        name = str(entry["name"])
        if name in paths:
            raise ConfigError(f"{pointer}/name", f"duplicate path name {name!r}")
        try:
            paths[name] = ChainPath(
                str(entry["base_chart"]),
                tuple(float(v) for v in entry["base_y"]),
                tuple(str(c) for c in entry["chain"]),
                duration=float(entry.get("duration", 1.0)),
                partition=tuple(float(t) for t in entry["partition"])
                if entry.get("partition") is not None else None,
            )
        except (PathError, TypeError, ValueError) as exc:
            raise ConfigError(pointer, str(exc)) from exc

    tasks = []
    for i, entry in enumerate(raw.get("tasks", [])):
        pointer = f"/tasks/{i}"
        kind = _require(entry, "kind", pointer)
        if kind not in ("validate", "holonomy", "classify", "transport", "hierarchy"):
            raise ConfigError(f"{pointer}/kind", f"unknown task kind {kind!r}")
        params = entry.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{pointer}/params", "params must be an object")
        tasks.append({"kind": kind, "params": params})

    return ConfigDocument(codim, leaf_dim, atlas, bundle, anchors, paths, tasks)
