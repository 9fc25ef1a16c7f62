"""Plain-text reflectivity tables.

Grammar (one record per line, UTF-8)::

    # key: value          metadata, any number, before the column line
    # free text           comment (no colon), ignored
    theta_deg, R, R_err   column-name line: the first line not starting with '#'
    84.0, 1.0e-5, 2.0e-6  data rows, same delimiter as the column line

The delimiter is a comma if the column line contains one, otherwise runs of
whitespace.  Exactly one abscissa column, ``theta_deg`` (degrees) or
``k_i_a`` (dimensionless), must be present, plus ``R``.  ``R_err`` and
``R_rough`` are optional; other columns are carried in ``ScanCurve.metadata``
under ``"extra_columns"``.  Blank lines and ``#`` lines inside the data block
are skipped.  Rows are sorted by the abscissa.
"""
from __future__ import annotations

import json
import math
import re
import warnings
from pathlib import Path

import numpy as np

from .beamscan import BeamModel, ScanCurve
from .errors import DataError

ABSCISSAE = ("theta_deg", "k_i_a")
KNOWN = ABSCISSAE + ("R", "R_err", "R_rough")
_META = re.compile(r"^#\s*([A-Za-z_][\w.\-]*)\s*:\s?(.*)$")


def _split(line, comma):
    if comma:
        return [c.strip() for c in line.split(",")]
    return line.split()


def parse_dataset(path) -> ScanCurve:
    text = Path(path).read_text(encoding="utf-8")
    meta: dict = {}
    columns = None
    comma = False
    rows, lines, errors = [], [], []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if columns is None:
                m = _META.match(line)
                if m:
                    meta[m.group(1)] = m.group(2).strip()
            continue
        if columns is None:
            comma = "," in line
            columns = _split(line, comma)
            if len(set(columns)) != len(columns):
                raise DataError(f"line {no}: repeated column names in {columns}")
            continue
        cells = _split(line, comma)
        if len(cells) != len(columns):
            errors.append(f"line {no}: expected {len(columns)} cells, found {len(cells)}")
            continue
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            errors.append(f"line {no}: non-numeric cell in {line!r}")
            continue
        if not all(math.isfinite(v) for v in vals):
            errors.append(f"line {no}: non-finite value in {line!r}")
            continue
        rows.append(vals)
        lines.append(no)
    if columns is None:
        raise DataError(f"{path}: no column-name line found")
    present = [c for c in ABSCISSAE if c in columns]
    if len(present) != 1:
        raise DataError(f"{path}: need exactly one abscissa column of {ABSCISSAE}, found {present}")
    if "R" not in columns:
        raise DataError(f"{path}: missing column 'R'")
    if errors:
        raise DataError(f"{path}: malformed rows\n  " + "\n  ".join(errors))
    absc = present[0]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    col = {c: arr[:, i] for i, c in enumerate(columns)}
    for c in ("R", "R_err", "R_rough"):
        if c in col:
            bad = np.nonzero(col[c] < 0)[0]
            if len(bad):
                raise DataError(f"{path}: negative {c} at line(s) {[lines[i] for i in bad]}")
    if not rows:
        warnings.warn(f"{path}: empty data section", stacklevel=2)
    order = np.argsort(col[absc], kind="stable")
    col = {c: v[order] for c, v in col.items()}
    if np.any(np.diff(col[absc]) == 0):
        warnings.warn(f"{path}: duplicate {absc} values kept", stacklevel=2)
    n = len(rows)
    if absc == "theta_deg":
        theta = np.radians(col["theta_deg"])
        if np.any(theta < 0) or np.any(theta >= math.pi / 2):
            raise DataError(f"{path}: theta_deg must lie in [0, 90)")
        ka = np.full(n, np.nan)
    else:
        theta = np.full(n, np.nan)
        ka = col["k_i_a"]
    extra = {c: v for c, v in col.items() if c not in KNOWN}
    if extra:
        meta["extra_columns"] = extra
    meta["abscissa"] = absc
    return ScanCurve(theta, np.full(n, np.nan), ka, col["R"], col.get("R_err"), col.get("R_rough"),
                     metadata=meta)


def with_kinematics(curve: ScanCurve, beam: BeamModel, a: float) -> ScanCurve:
    """Fill θᵢ, k and kᵢa from whichever is known, using the beam-mean λ."""
    theta = curve.theta_i.copy()
    ka = curve.k_i_a.copy()
    lam = beam.wavelength
    miss = ~np.isfinite(theta)
    if np.any(miss):
        c = ka[miss] * lam / (2 * math.pi * a)
        if np.any(c > 1) or np.any(c <= 0):
            raise DataError("k_i_a exceeds the beam's normal-incidence value 2πa/λ")
        theta[miss] = np.arccos(c)
    k = 2 * math.pi * np.cos(theta) / lam
    return ScanCurve(theta, k, k * a, curve.R, curve.R_err, curve.R_rough, curve.failures, curve.metadata)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    # shortest repr that round-trips exactly
    return repr(float(v))


def format_table(columns, data, metadata: dict | None = None, footer: str | None = None) -> str:
    """Render a table in the grammar above; ``data`` is a list of columns."""
    out = []
    for k, v in (metadata or {}).items():
        out.append(f"# {k}: {v}")
    out.append(", ".join(columns))
    for row in zip(*data):
        out.append(", ".join(_fmt(v) for v in row))
    if footer:
        out.append(f"# {footer}")
    return "\n".join(out) + "\n"


def config_header(cfg_dict: dict) -> str:
    return json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"))
