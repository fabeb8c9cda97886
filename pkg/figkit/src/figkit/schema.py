"""Documented CSV schemas of the trajtherm bundles and a strict loader.

Each file kind has a fixed column header; the loader hashes the header line
and refuses anything that does not match, so figures can never silently
render mismatched data.
"""

from __future__ import annotations

import hashlib

import numpy as np


class SchemaMismatch(Exception):
    pass


class MissingColumn(Exception):
    pass


class EmptyBundle(Exception):
    pass


# two-level bundles; the trajectory series carries the d = 2 amplitudes
COLUMNS = {
    "summary": ("quantity", "mean", "stderr", "n", "excluded"),
    "consistency": ("t", "trace_distance"),
    "histogram": ("bin_left", "bin_right", "count", "density"),
    "convergence": ("n", "ft_s_tot", "ft_s_mar", "ft_s_unc"),
    "trajectory": (
        "t", "E_gamma", "Q_cum", "W_drive_cum", "W_meas_cum", "W_chem_cum",
        "W_int_cum", "S_tot_partial", "S_mar_partial",
        "psi_re_0", "psi_im_0", "psi_re_1", "psi_im_1",
    ),
}


def header_hash(columns) -> str:
    return hashlib.sha256(",".join(columns).encode()).hexdigest()[:12]


HEADER_HASHES = {kind: header_hash(cols) for kind, cols in COLUMNS.items()}


def load_csv(path, kind: str):
    """Load one bundle CSV: returns (meta, column dict of float arrays).

    ``meta`` carries the key=value pairs of the leading comment lines
    (config hash, tool version, timestamp).
    """
    expected = COLUMNS[kind]
    meta = {}
    header = None
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, _, val = tok.partition("=")
                        meta[key] = val
                continue
            if header is None:
                header = tuple(line.split(","))
                if header_hash(header) != HEADER_HASHES[kind]:
                    raise SchemaMismatch(
                        f"{path}: header {header} does not match the documented "
                        f"{kind} schema {expected}"
                    )
                continue
            if line:
                rows.append(line.split(","))
    if header is None:
        raise SchemaMismatch(f"{path}: no column header found")
    if not rows:
        raise EmptyBundle(f"{path}: no data rows")
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        try:
            cols[name] = np.array(vals, dtype=float)
        except ValueError:
            cols[name] = np.array(vals)
    return meta, cols


def column(cols, name: str):
    if name not in cols:
        raise MissingColumn(name)
    return cols[name]
