"""Deterministic SVG line plots of report tables (no timestamps, fixed hash salt)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import MissingColumnError  # noqa: E402
from .io import read_csv  # noqa: E402


def _rows(source):
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        return read_csv(source)
    return list(source)


def plot_table(source, x, ys, out, *, logx=False, logy=False, group=None, guides=(), title=None,
               xlabel=None, ylabel=None):
    """Line plot of columns `ys` against `x`; one line per distinct `group` value.

    guides: reference slopes (e.g. -1, -0.5) drawn through the first point of
    the first series, for log-log plots.
    """
    rows = _rows(source)
    if isinstance(ys, str):
        ys = [ys]
    cols = set(rows[0]) if rows else set()
    need = [x, *ys] + ([group] if group else [])
    missing = [c for c in need if c not in cols]
    if missing:
        raise MissingColumnError(f"missing column(s): {', '.join(missing)}")
    with plt.rc_context({"svg.hashsalt": "navslip", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        keys = sorted({r[group] for r in rows}, key=str) if group else [None]
        anchor = None
        for key in keys:
            sel = [r for r in rows if group is None or r[group] == key]
            xv = np.array([float(r[x]) for r in sel])
            order = np.argsort(xv, kind="stable")
            for y in ys:
                yv = np.array([float(r[y]) for r in sel])[order]
                label = y if key is None else f"{y} ({group}={key:.4g})" if isinstance(key, float) else f"{y} ({key})"
                ax.plot(xv[order], yv, marker="o", ms=3, label=label)
                if anchor is None and len(xv):
                    anchor = (xv[order][0], yv[0], xv[order][-1])
        if anchor and logx and logy:
            x0, y0, x1 = anchor
            xs = np.array([x0, x1])
            for s in guides:
                ax.plot(xs, y0 * (xs / x0) ** s, "k--", lw=0.8, label=f"slope {s:g}")
        ax.set_xscale("log" if logx else "linear")
        ax.set_yscale("log" if logy else "linear")
        ax.set_xlabel(xlabel or x)
        ax.set_ylabel(ylabel or ", ".join(ys))
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", lw=0.3)
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return out


def plot_resolvent_scan(source, out, column="norm_u"):
    return plot_table(source, "lambda_abs", column, out, logx=True, logy=True, group="ray_arg",
                      guides=(-1.0, -0.5), title="resolvent scan")


def plot_alpha_sweep(source, out, columns=("boundary_gap", "energy_gap")):
    return plot_table(source, "alpha", list(columns), out, logx=True, logy=True, guides=(-1.0,),
                      title="alpha sweep")


def plot_energy_trace(source, out):
    return plot_table(source, "time", ["kinetic", "cum_dissipation", "cum_friction"], out,
                      title="energy trace")
