"""Reading and writing designs as CSV.

Scalar designs use one row per sample point, with columns ``z, z_pf, aux_1..aux_m``
(Pick-Freeze) or ``x, z, aux_1..aux_m`` (rank). Distribution-valued designs
use the long layout ``replicate_id, branch, draw_index, value`` with branch
``plain`` or ``pf``; a rank design adds one ``x`` row per replicate
(``draw_index`` 0). Numbers are written with 17 significant digits so that
doubles survive the round trip.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DesignFormatError
from .estimators import PickFreezeDesign, RankDesign
from .indices import SCALAR, OutputSample

LONG_HEADER = ["replicate_id", "branch", "draw_index", "value"]


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _aux_rows(aux) -> list[np.ndarray]:
    rows = []
    for l, pool in enumerate(aux):
        sample = pool if isinstance(pool, OutputSample) else None
        if sample is not None and sample.kind != SCALAR:
            raise DesignFormatError(f"aux row {l + 1} holds distributions; only scalar aux rows can be saved")
        rows.append(sample.values if sample is not None else np.asarray(pool, dtype=float))
    return rows


def save_design(path, design: PickFreezeDesign | RankDesign) -> None:
    path = Path(path)
    if isinstance(design, PickFreezeDesign):
        first, second, lead = design.z, design.z_pf, ("z", "z_pf")
    elif isinstance(design, RankDesign):
        first, second, lead = None, design.z, ("x", "z")
    else:
        raise TypeError("expected a PickFreezeDesign or a RankDesign")
    aux = _aux_rows(design.aux)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if design.z.kind == SCALAR:
            w.writerow(list(lead) + [f"aux_{l + 1}" for l in range(len(aux))])
            cols = [design.x if first is None else first.values, second.values] + aux
            for row in zip(*cols):
                w.writerow([fmt(v) for v in row])
            return
        if aux:
            raise DesignFormatError("the long layout does not carry aux rows")
        w.writerow(LONG_HEADER)
        if first is None:
            for j, xv in enumerate(design.x):
                w.writerow([j, "x", 0, fmt(xv)])
            branches = (("plain", second),)
        else:
            branches = (("plain", first), ("pf", second))
        for name, sample in branches:
            for j, d in enumerate(sample.distributions()):
                for k, v in enumerate(d.atoms):
                    w.writerow([j, name, k, fmt(v)])


def _number(cell: str, row: int, column: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DesignFormatError(f"non-numeric cell {cell!r}", row=row, column=column) from None
    if not np.isfinite(v):
        raise DesignFormatError(f"non-finite cell {cell!r}", row=row, column=column)
    return v


def load_design(path) -> PickFreezeDesign | RankDesign:
    """Parse a design file; rows are reported 1-based, counting the header as row 1."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and not r[0].startswith("#")]
    if not rows:
        raise DesignFormatError("empty design file")
    (hrow, header), body = rows[0], rows[1:]
    header = [h.strip() for h in header]
    if header == LONG_HEADER:
        return _load_long(body)
    return _load_wide(header, body)


def _load_wide(header: list[str], body) -> PickFreezeDesign | RankDesign:
    if len(header) < 2 or tuple(header[:2]) not in (("z", "z_pf"), ("x", "z")):
        raise DesignFormatError(f"unrecognized header {header}; expected z,z_pf[,aux_k] or x,z[,aux_k]", row=1)
    for l, name in enumerate(header[2:]):
        if name != f"aux_{l + 1}":
            raise DesignFormatError(f"expected column aux_{l + 1}, found {name!r}", row=1, column=l + 3)
    cols: list[list[float]] = [[] for _ in header]
    for r, cells in body:
        if len(cells) != len(header):
            raise DesignFormatError(f"expected {len(header)} cells, found {len(cells)}", row=r)
        for c, cell in enumerate(cells):
            cols[c].append(_number(cell, r, header[c]))
    arrays = [np.asarray(c) for c in cols]
    if header[0] == "z":
        return PickFreezeDesign(arrays[0], arrays[1], arrays[2:])
    return RankDesign(arrays[0], arrays[1], arrays[2:])


def _load_long(body) -> PickFreezeDesign | RankDesign:
    data: dict[str, dict[int, dict[int, float]]] = {}
    for r, cells in body:
        if len(cells) != 4:
            raise DesignFormatError(f"expected 4 cells, found {len(cells)}", row=r)
        try:
            j, k = int(cells[0]), int(cells[2])
        except ValueError:
            raise DesignFormatError("replicate_id and draw_index must be integers", row=r) from None
        branch = cells[1].strip()
        if branch not in ("plain", "pf", "x"):
            raise DesignFormatError(f"unknown branch {branch!r}", row=r, column="branch")
        slot = data.setdefault(branch, {}).setdefault(j, {})
        if k in slot:
            raise DesignFormatError(f"duplicate draw {k} for replicate {j}", row=r)
        slot[k] = _number(cells[3], r, "value")
    if "plain" not in data:
        raise DesignFormatError("no plain branch rows")
    ids = sorted(data["plain"])
    if ids != list(range(len(ids))):
        raise DesignFormatError("replicate ids of the plain branch must be 0..N-1")

    def atoms(branch: str) -> np.ndarray:
        reps = data[branch]
        if sorted(reps) != ids:
            raise DesignFormatError(f"branch {branch!r} covers different replicates than plain")
        n = len(reps[0])
        out = np.empty((len(ids), n))
        for j in ids:
            draws = reps[j]
            if sorted(draws) != list(range(n)):
                raise DesignFormatError(f"replicate {j} of branch {branch!r} has draws "
                                        f"{len(draws)} instead of 0..{n - 1}")
            out[j] = np.sort([draws[k] for k in range(n)])
        return out

    z = OutputSample.from_atoms(atoms("plain"))
    if "x" in data:
        if "pf" in data:
            raise DesignFormatError("a design carries either an x branch or a pf branch, not both")
        x = atoms("x")
        if x.shape[1] != 1:
            raise DesignFormatError("the x branch holds one value per replicate")
        return RankDesign(x[:, 0], z)
    if "pf" not in data:
        raise DesignFormatError("no pf branch rows")
    return PickFreezeDesign(z, OutputSample.from_atoms(atoms("pf")))
