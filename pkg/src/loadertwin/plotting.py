"""Figure emission for the report path.

Every figure is written twice: as a gnuplot data file plus a script that
renders it, and as a PNG drawn with matplotlib.  The data file is the
reproducible artifact; the PNG is a convenience.
"""
from __future__ import annotations

import os
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import IoError
from .io import SCHEMA_VERSION, _fmt, _write_text

Series = Tuple[str, np.ndarray, np.ndarray]  # label, x, y


def _quote(label: str) -> str:
    return label.replace("\\", "\\\\").replace('"', '\\"')


def dat_text(series: Sequence[Series], columns: Tuple[str, str]) -> str:
    """One gnuplot index block per series, separated by two blank lines."""
    out = [f"# schema_version={SCHEMA_VERSION} kind=figure_data\n"]
    for k, (label, x, y) in enumerate(series):
        if k:
            out.append("\n\n")
        out.append(f"# {label}\n# {columns[0]} {columns[1]}\n")
        out.extend(f"{_fmt(a)} {_fmt(b)}\n" for a, b in zip(x, y))
    return "".join(out)


def gnuplot_script(dat_name: str, png_name: str, labels: Sequence[str], title: str,
                   xlabel: str, ylabel: str) -> str:
    plots = ", \\\n     ".join(
        f'"{dat_name}" index {k} using 1:2 with linespoints title "{_quote(lab)}"'
        for k, lab in enumerate(labels))
    return (
        f"# schema_version={SCHEMA_VERSION} kind=gnuplot_script\n"
        "set terminal pngcairo size 900,500\n"
        f'set output "{png_name}"\n'
        f'set title "{_quote(title)}"\n'
        f'set xlabel "{_quote(xlabel)}"\n'
        f'set ylabel "{_quote(ylabel)}"\n'
        "set key outside right\n"
        "set grid\n"
        f"plot {plots}\n"
    )


def render_png(path, series: Sequence[Series], title: str, xlabel: str, ylabel: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9, 5))
    try:
        for label, x, y in series:
            ax.plot(x, y, marker=".", label=label)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=100, metadata={"Software": None})
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def emit_figure(out_dir, stem: str, series: Sequence[Series], *, title: str, xlabel: str,
                ylabel: str, png: bool = True) -> Dict[str, str]:
    """Write ``stem.dat``, ``stem.gp`` and (with ``png``) ``stem.png``."""
    paths = {k: os.path.join(out_dir, f"{stem}.{k}") for k in ("dat", "gp", "png")}
    labels = [s[0] for s in series]
    _write_text(paths["dat"], dat_text(series, (xlabel, ylabel)))
    _write_text(paths["gp"], gnuplot_script(f"{stem}.dat", f"{stem}.png", labels, title,
                                            xlabel, ylabel))
    if png:
        render_png(paths["png"], series, title, xlabel, ylabel)
    else:
        del paths["png"]
    return paths


def trace_series(traces) -> List[Series]:
    return [(tr.label or f"trace {k}", tr.t, tr.f / 1000.0) for k, tr in enumerate(traces)]


def history_series(result) -> List[Series]:
    """Objective per evaluation and its running minimum (infinite values dropped)."""
    idx = np.array([h.index for h in result.history], dtype=float)
    obj = np.array([h.objective for h in result.history], dtype=float)
    ok = np.isfinite(obj)
    best = np.minimum.accumulate(np.where(ok, obj, np.inf))
    keep = np.isfinite(best)
    return [("objective", idx[ok], obj[ok]), ("best so far", idx[keep], best[keep])]
