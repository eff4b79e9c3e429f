"""Delimited report writers and the figures rendered alongside them.

Every CSV starts with a comment line recording the package version and the
config hash, then a header row naming the columns.  Floats are written with
17 significant digits so identical runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, columns, rows, config_hash: str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# confspec-version={__version__} config-sha256={config_hash}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_keyvalue_csv(path, pairs, config_hash: str) -> Path:
    return write_csv(path, ("key", "value"), pairs, config_hash)


def _save(fig, path):
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return Path(path)


def spectrum_figure(path, eigenvalues, kernel_tol: float):
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    idx = np.arange(len(eigenvalues))
    ax.axhspan(-kernel_tol, kernel_tol, color="0.85", label=f"kernel band ±{kernel_tol:.1e}")
    ax.plot(idx, eigenvalues, "o", ms=4)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("lowest eigenvalues")
    return _save(fig, path)


def branch_figure(path, ts, eigenvalues):
    fig, ax = plt.subplots(figsize=(5.4, 3.4))
    for b in range(eigenvalues.shape[1]):
        ax.plot(ts, eigenvalues[:, b], "-o", ms=3, label=f"branch {b}")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("eigenvalue")
    if eigenvalues.shape[1] <= 8:
        ax.legend(fontsize=7)
    ax.set_title("eigenvalue branches")
    return _save(fig, path)


def multiplicity_figure(path, trace):
    fig, ax = plt.subplots(figsize=(4.6, 3.0))
    ax.step(range(len(trace)), trace, where="post", marker="o")
    ax.set_xlabel("round")
    ax.set_ylabel("kernel multiplicity")
    ax.set_yticks(range(max(trace) + 1))
    ax.set_title("kernel-breaking progress")
    return _save(fig, path)


def sweep_figure(path, ts, counts, admissible, lower_bound, printed_bound):
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    ts = np.asarray(ts)
    counts = np.asarray(counts)
    ok = np.asarray(admissible, dtype=bool)
    ax.plot(ts[~ok], counts[~ok], "o", ms=4, color="tab:red", label="inadmissible")
    ax.plot(ts[ok], counts[ok], "o", ms=4, color="tab:green", label="admissible")
    ax.axvline(lower_bound, color="k", ls=":", lw=1, label="t = R_G/2")
    ax.axvline(printed_bound, color="tab:purple", ls="--", lw=1, label="closed-form bound")
    ax.set_xlabel("t")
    ax.set_ylabel("negative designated modes")
    ax.legend(fontsize=7)
    ax.set_title("admissibility sweep")
    return _save(fig, path)


def curvature_check_figure(path, before, after):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(before, np.zeros_like(before), "|", ms=16, label="before")
    ax.plot(after, np.ones_like(after), "|", ms=16, label="after")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_yticks([0, 1], ["g", "rescaled"])
    ax.set_xlabel("eigenvalue")
    ax.set_ylim(-0.5, 1.5)
    ax.set_title("spectra before/after conformal rescale")
    return _save(fig, path)
