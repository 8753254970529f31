"""
CSV, JSON and SVG artifacts.

Column orders are fixed per table kind so repeated runs give byte-identical
files.  JSON keeps insertion order (the producers build dicts in a fixed
order) and floats use ``repr``, which round-trips exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from gifkit.errors import GifError

SWEEP_COLUMNS = ("alpha", "lhs", "bound1", "bound3", "pass3")
PROFILE_COLUMNS = ("atom_id", "k", "A_k", "f_star")
SUITE_COLUMNS = ("criterion", "name", "passed", "summary")


class ReportIOError(GifError):
    """Writing an artifact failed; the message names the path."""


def _plain(x: Any) -> Any:
    """Convert numpy scalars and arrays to JSON-native values."""
    if isinstance(x, Mapping):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        return v
    if hasattr(x, "to_dict"):
        return _plain(x.to_dict())
    return x


def to_json(data: Any) -> str:
    return json.dumps(_plain(data), indent=2, allow_nan=False) + "\n"


def _cell(v: Any) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


def to_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> str:
    """Rows rendered in ``columns`` order; an empty input gives the header only."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        missing = [c for c in columns if c not in row]
        if missing:
            raise GifError(f"row lacks columns {missing}")
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_json(path: str | Path, data: Any) -> Path:
    return _write(Path(path), to_json(data))


def write_csv(path: str | Path, rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> Path:
    return _write(Path(path), to_csv(rows, columns))


def sweep_rows(reports) -> list[dict]:
    return [{"alpha": r.alpha, "lhs": r.lhs, "bound1": r.bound1, "bound3": r.bound3,
             "pass3": r.pass3} for r in reports]


def alpha_column(alpha: float) -> str:
    return f"in_E_alpha({alpha!r})"


def profile_rows(profile, alphas: Sequence[float] = ()) -> tuple[list[dict], tuple[str, ...]]:
    """Long-format average profile with one membership column per level ``alpha``."""
    fstar = profile.maximal()
    alphas = [float(a) for a in alphas]
    cols = PROFILE_COLUMNS + tuple(alpha_column(a) for a in alphas)
    rows = []
    for i in range(profile.averages.shape[0]):
        for k in range(1, profile.averages.shape[1] + 1):
            row = {"atom_id": i, "k": k, "A_k": float(profile.at(k)[i]), "f_star": float(fstar[i])}
            for a in alphas:
                row[alpha_column(a)] = bool(fstar[i] > a)
            rows.append(row)
    return rows, cols


def emit_report(results: Mapping[str, Any], out_dir: str | Path, stem: str,
                table: Sequence[Mapping[str, Any]] | None = None,
                columns: Sequence[str] | None = None,
                plot: str | None = None) -> list[Path]:
    """
    Write ``<stem>.json`` and, when ``columns`` is given, ``<stem>.csv``.

    ``plot`` selects an optional SVG: ``"sweep"`` for an alpha sweep table or
    ``"profile"`` for an average-profile table.  Returns the written paths.
    """
    out = Path(out_dir)
    written = [write_json(out / f"{stem}.json", results)]
    if columns is not None:
        written.append(write_csv(out / f"{stem}.csv", table or [], columns))
    if plot is not None:
        written.append(_write_svg(out / f"{stem}.svg", table or [], plot))
    return written


def _write_svg(path: Path, rows: Sequence[Mapping[str, Any]], kind: str) -> Path:
    try:
        import matplotlib
    except ImportError as exc:
        raise GifError("SVG output needs matplotlib (pip install artifact[plot])") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed hash salt and no date stamp keep the SVG byte-stable
    matplotlib.rcParams["svg.hashsalt"] = "gifkit"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if kind == "sweep":
        a = [r["alpha"] for r in rows]
        ax.plot(a, [r["lhs"] for r in rows], "o-", label="alpha q(E_alpha)")
        ax.plot(a, [r["bound1"] for r in rows], "--", label="||f||_1")
        ax.plot(a, [r["bound3"] for r in rows], ":", label="3 ||f||_1")
        ax.set_xlabel("alpha")
    elif kind == "profile":
        atoms = sorted({r["atom_id"] for r in rows})
        for i in atoms:
            pts = [(r["k"], r["A_k"]) for r in rows if r["atom_id"] == i]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=1)
        ax.set_xlabel("k")
        ax.set_ylabel("A_k")
    else:
        plt.close(fig)
        raise GifError(f"unknown plot kind {kind!r}")
    if kind == "sweep":
        ax.legend(fontsize=8)
    fig.tight_layout()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return path
