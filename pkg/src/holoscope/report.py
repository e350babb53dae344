"""Report rendering: stable JSON, human-readable text and figure files."""

from __future__ import annotations

import json
from typing import Optional


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def render_text(report: dict) -> str:
    lines = [f"holoscope report ({report['schema']})"]
    for task in report["tasks"]:
        kind = task["kind"]
        lines.append(f"\n[{task['index']}] {kind}")
        if kind == "validate":
            lines.append(f"  cocycle: {'ok' if task['cocycle']['ok'] else 'VIOLATIONS'} "
                         f"({task['cocycle']['triples_checked']} triples, "
                         f"{task['cocycle']['samples_checked']} samples)")
            for violation in task["cocycle"]["violations"]:
                lines.append(f"    {violation['triple']} at {violation['point']}: "
                             f"residual {violation['residual']:.3e} ({violation['kind']})")
            for entry in task["paths"]:
                status = "ok" if entry["ok"] else f"INVALID ({entry['reason']})"
                lines.append(f"  path {entry['name']}: {status}")
        elif kind == "holonomy":
            for entry in task["results"]:
                jet = entry["jet"]
                lines.append(f"  {entry['path']}: {entry['source']['chart']}"
                             f"{entry['source']['y']} -> {entry['target']['chart']}"
                             f"{entry['target']['y']} order {jet['order']}")
                lines.append(f"    coefficients: {jet['coefficients']}")
        elif kind == "classify":
            lines.append(f"  mode {task['mode']}, order {task['order']}, "
                         f"tol {task['tol']}: {len(task['classes'])} classes")
            for i, cls in enumerate(task["classes"]):
                lines.append(f"    class {i}: {', '.join(cls['members'])}")
        elif kind == "transport":
            lines.append(f"  path {task['path']}: fibre {task['fibre_point']} -> "
                         f"{task['fibre_image']}")
            if "section" in task:
                lines.append(f"    section jet -> {task['section']['jet']['coefficients']}")
        elif kind == "hierarchy":
            counts = [len(o["classes"]) for o in task["orders"]]
            lines.append(f"  mode {task['mode']}, orders 0..{task['max_order']}: "
                         f"class counts {counts}")
            lines.append(f"  refinement: {'ok' if task['ok'] else 'VIOLATED'}; "
                         f"tower: {'ok' if task['tower']['ok'] else 'VIOLATED'}")
        if "figure" in task:
            lines.append(f"  figure: {task['figure']}")
    lines.append(f"\noverall: {'ok' if report['ok'] else 'violations reported'}")
    return "\n".join(lines) + "\n"


def render_figure(task: dict, path: str) -> Optional[str]:
    """Render a small figure for a classify or hierarchy task result."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if task["kind"] == "classify":
        sizes = [len(cls["members"]) for cls in task["classes"]]
        if not sizes:
            return None
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(range(len(sizes)), sizes, color="#4878d0")
        ax.set_xlabel("class")
        ax.set_ylabel("paths")
        ax.set_title(f"classes at order {task['order']} ({task['mode']})")
        ax.set_xticks(range(len(sizes)))
    elif task["kind"] == "hierarchy":
        counts = [len(o["classes"]) for o in task["orders"]]
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.step(range(len(counts)), counts, where="mid", color="#d65f5f")
        ax.plot(range(len(counts)), counts, "o", color="#d65f5f")
        ax.set_xlabel("jet order")
        ax.set_ylabel("classes")
        ax.set_title(f"refinement tower ({task['mode']})")
        ax.set_xticks(range(len(counts)))
    else:
        return None
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
