"""Optional figures for CLI curve outputs (files only, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden = (np.sqrt(5.0) - 1.0) / 2.0
width = 4.5

params = {
    "figure.figsize": (width, width * golden),
    "figure.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "srpfmc",
}


def curve(records, x, y, err=None, target=None, xlabel=None, ylabel=None, title=None, logx=False, logy=False,
          group=None, path=None):
    """Plot ``y`` against ``x`` from a list of records; one line per value of ``group``.

    Records missing ``x`` or ``y`` are skipped.  Returns the written path.
    """
    rows = [r for r in records if r.get(x) is not None and r.get(y) is not None]
    if not rows:
        return None
    groups = {}
    for r in rows:
        groups.setdefault(r.get(group) if group else None, []).append(r)
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for key, rs in groups.items():
            xs = np.array([float(r[x]) for r in rs])
            ys = np.array([float(r[y]) for r in rs])
            order = np.argsort(xs)
            label = f"{group}={key}" if group else y
            if err and all(r.get(err) is not None for r in rs):
                es = np.array([float(r[err]) for r in rs])
                ax.errorbar(xs[order], ys[order], yerr=es[order], fmt="o-", capsize=2, label=label)
            else:
                ax.plot(xs[order], ys[order], "o-", label=label)
            if target and all(r.get(target) is not None for r in rs):
                ts = np.array([float(r[target]) for r in rs])
                ax.plot(xs[order], ts[order], "k--", lw=0.8, label=f"{target}" if key == list(groups)[0] else None)
        ax.set_xlabel(xlabel or x)
        ax.set_ylabel(ylabel or y)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path
