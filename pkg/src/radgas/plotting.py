"""Static decay figures rendered off-screen to PNG files."""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _figure(width=5.0, height=3.6):
    fig = Figure(figsize=(width, height), dpi=120)
    FigureCanvasAgg(fig)
    return fig


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.grid(True, which="major", alpha=0.25, lw=0.5)
    ax.tick_params(labelsize=8)


def decay_figure(path, curves, title: str = "", window=None, xlabel="1 + t") -> None:
    """Log-log plot of norm series against ``1 + t``.

    ``curves`` is a list of dicts with keys ``label``, ``t``, ``values`` and
    optionally ``fit`` (a :class:`DecayFit` or its dict) drawn dashed over
    its window.
    """
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    for i, c in enumerate(curves):
        t = np.asarray(c["t"], dtype=float)
        v = np.asarray(c["values"], dtype=float)
        keep = v > 0
        if not np.any(keep):
            continue
        line, = ax.loglog(1 + t[keep], v[keep], lw=1.2, label=c["label"])
        fit = c.get("fit")
        if fit is not None:
            fit = fit if isinstance(fit, dict) else fit.to_dict()
            lo, hi = fit["window"]
            x = np.geomspace(1 + lo, 1 + hi, 32)
            y = np.exp(fit["intercept"]) * x ** fit["exponent"]
            if fit.get("log_correction"):
                y = y * np.log(x)
            ax.loglog(x, y, ls="--", lw=0.9, color=line.get_color(),
                      label=f"fit {fit['exponent']:.3f}")
    if window is not None:
        ax.axvspan(1 + window[0], 1 + window[1], color="0.85", alpha=0.4, lw=0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("norm")
    if title:
        ax.set_title(title, fontsize=9)
    _style(ax)
    ax.legend(fontsize=6, frameon=False, ncol=2)
    fig.tight_layout()
    fig.savefig(path)


def energy_figure(path, energies, title: str = "") -> None:
    """Running ``E, D, M, N`` and the combined energy on a log time axis."""
    fig = _figure(5.0, 3.2)
    ax = fig.add_subplot(1, 1, 1)
    t = 1 + np.asarray(energies.times)
    for name in ("E", "D", "M", "N", "combined"):
        y = np.asarray(getattr(energies, name))
        if np.any(y > 0):
            ax.semilogx(t, y / y[y > 0][-1], lw=1.1, label=name)
    ax.set_xlabel("1 + t")
    ax.set_ylabel("value / final value")
    if title:
        ax.set_title(title, fontsize=9)
    _style(ax)
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path)


def sweep_figure(path, values, exponents: dict, axis: str, title: str = "") -> None:
    """Fitted exponents against the swept parameter."""
    fig = _figure(4.5, 3.2)
    ax = fig.add_subplot(1, 1, 1)
    x = np.asarray(values, dtype=float)
    for label, ys in exponents.items():
        y = np.array([np.nan if v is None else v for v in ys], dtype=float)
        ax.plot(x, y, marker="o", ms=3, lw=1, label=label)
    if np.all(x > 0) and x.size > 1 and x.max() / x.min() > 20:
        ax.set_xscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("fitted exponent")
    if title:
        ax.set_title(title, fontsize=9)
    _style(ax)
    ax.legend(fontsize=6, frameon=False)
    fig.tight_layout()
    fig.savefig(path)
