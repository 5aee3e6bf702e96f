"""File and figure emission for solve and sweep runs.

All writers are deterministic: floats are serialized with shortest-repr
formatting, JSON keys are sorted, and figures are rendered with the Agg
backend and pinned metadata so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

from .experiments import SweepReport, aggregate_cost_quantiles
from .solvers import RunReport, TraceRow

_PNG_METADATA = {"Software": "drnash"}


def _fmt(value: float) -> str:
    return repr(float(value))


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_trace_csv(path, trace: Sequence[TraceRow]) -> None:
    lines = ["iter,residual,tau,phi"]
    for row in trace:
        lines.append(f"{row.iter},{_fmt(row.residual)},{_fmt(row.tau)},{_fmt(row.phi)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_run_reports(path, reports: Mapping[str, RunReport]) -> None:
    write_json(path, {name: report.to_dict() for name, report in sorted(reports.items())})


def write_quantiles_csv(path, rows: Sequence[dict]) -> None:
    lines = ["agent,cell,min,q25,median,q75,max"]
    for r in rows:
        lines.append(
            f"{r['agent']},{r['cell']},{_fmt(r['min'])},{_fmt(r['q25'])},"
            f"{_fmt(r['median'])},{_fmt(r['q75'])},{_fmt(r['max'])}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def safe_name(label: str) -> str:
    out = []
    for ch in label:
        out.append(ch if ch.isalnum() or ch in "-._" else "_")
    return "".join(out)


# ----------------------------------------------------------------------
# figures


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_residual_figure(path, traces: Mapping[str, Sequence[TraceRow]], title: str) -> None:
    """Semilog residual-versus-iteration curves, one line per labeled trace."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(traces):
        rows = traces[label]
        ax.semilogy([r.iter for r in rows], [max(r.residual, 1e-300) for r in rows], label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("natural residual")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if traces:
        ax.legend(fontsize=8)
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_PNG_METADATA)
    plt.close(fig)


def render_sweep_figures(outdir, sweep: SweepReport) -> list[Path]:
    """One residual overlay per cell plus the cost box-plot figure."""
    outdir = Path(outdir)
    written = []
    for cell in sweep.cells:
        traces = {}
        for result in sweep.results:
            if result.cell != cell:
                continue
            for name, report in sorted(result.runs.items()):
                traces[f"{name} #{result.instance}"] = report.trace
        path = outdir / f"residual_{safe_name(cell)}.png"
        render_residual_figure(path, traces, f"residuals, {cell}")
        written.append(path)
    path = outdir / "cost_quantiles.png"
    render_cost_figure(path, sweep)
    written.append(path)
    return written


def render_cost_figure(path, sweep: SweepReport) -> None:
    """Grouped box plots of equilibrium costs per agent across sweep cells."""
    plt = _pyplot()
    rows = aggregate_cost_quantiles(sweep.results, sweep.config.N, sweep.quantile_source)
    cells = sweep.cells
    N = sweep.config.N
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * len(cells), 4))
    width = 0.8 / max(N, 1)
    stats_by_cell_agent = {(r["cell"], r["agent"]): r for r in rows}
    for agent_idx in range(1, N + 1):
        boxes = []
        positions = []
        for c_idx, cell in enumerate(cells):
            r = stats_by_cell_agent.get((cell, agent_idx))
            if r is None:
                continue
            boxes.append(
                {
                    "med": r["median"],
                    "q1": r["q25"],
                    "q3": r["q75"],
                    "whislo": r["min"],
                    "whishi": r["max"],
                    "label": cell,
                }
            )
            positions.append(c_idx + (agent_idx - (N + 1) / 2.0) * width)
        if boxes:
            ax.bxp(boxes, positions=positions, widths=width * 0.9, showfliers=False)
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels(cells, fontsize=8)
    ax.set_ylabel("equilibrium cost")
    ax.set_title(f"per-agent cost spread ({sweep.quantile_source})")
    ax.grid(True, axis="y", alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_PNG_METADATA)
    plt.close(fig)
