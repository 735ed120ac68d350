"""Figure rendering from a finished run's CSV files.

Reads costs.csv / prices.csv / convergence.csv in an output directory and
writes PNG figures next to them.  Import of matplotlib is deferred so the
solver library works headless without it installed.
"""

from __future__ import annotations

import csv
import os

import numpy as np


def _read_csv(path):
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fig():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def fig_costs(out_dir):
    """Mean normalized cost vs the swept parameter, one line per scheme."""
    rows = _read_csv(os.path.join(out_dir, "costs.csv"))
    if not rows:
        return None
    plt = _fig()
    swept = "uncertainty_mw" if any(r["uncertainty_mw"] for r in rows) \
        else "storage_mw"
    fig, ax = plt.subplots(figsize=(6, 4))
    schemes = sorted({r["scheme"] for r in rows})
    for scheme in schemes:
        pts = {}
        for r in rows:
            if r["scheme"] != scheme or r[swept] == "":
                continue
            pts.setdefault(float(r[swept]), []).append(
                float(r["normalized_cost"]))
        xs = sorted(pts)
        ax.plot(xs, [np.mean(pts[x]) for x in xs], marker="o", label=scheme)
    ax.set_xlabel(swept.replace("_mw", " (MW)"))
    ax.set_ylabel("normalized cost ($/h/bus)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = os.path.join(out_dir, "costs.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def fig_prices(out_dir):
    """Conjectured price vs expected LMP per aggregator."""
    rows = _read_csv(os.path.join(out_dir, "prices.csv"))
    rows = [r for r in rows if r.get("expected_lmp") not in ("", "nan")]
    if not rows:
        return None
    plt = _fig()
    aggs = sorted({int(r["aggregator"]) for r in rows})
    conj = [np.mean([float(r["conjectured_price"]) for r in rows
                     if int(r["aggregator"]) == i]) for i in aggs]
    lmp = [np.mean([float(r["expected_lmp"]) for r in rows
                    if int(r["aggregator"]) == i]) for i in aggs]
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(aggs))
    ax.bar(x - 0.18, conj, width=0.36, label="conjectured")
    ax.bar(x + 0.18, lmp, width=0.36, label="expected LMP")
    ax.set_xticks(x)
    ax.set_xticklabels([f"agg {i}" for i in aggs])
    ax.set_ylabel("$/MW")
    ax.legend()
    path = os.path.join(out_dir, "prices.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def fig_convergence(out_dir):
    """Value-table shift per coordination round."""
    rows = _read_csv(os.path.join(out_dir, "convergence.csv"))
    rows = [r for r in rows if r["value_shift"] not in ("", "inf")]
    if not rows:
        return None
    plt = _fig()
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [int(r["k"]) for r in rows]
    shifts = [float(r["value_shift"]) for r in rows]
    ax.semilogy(ks, shifts, ".", markersize=3)
    ax.set_xlabel("coordination round")
    ax.set_ylabel("sup-norm value shift")
    ax.grid(True, alpha=0.3)
    path = os.path.join(out_dir, "convergence.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def render_figures(out_dir):
    """All applicable figures; returns the list of files written."""
    written = []
    for fn in (fig_costs, fig_prices, fig_convergence):
        path = fn(out_dir)
        if path:
            written.append(path)
    return written
