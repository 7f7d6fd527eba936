"""Artifact readers and writers.

Every written file starts with ``#`` provenance lines (tool version, config
hash, seed). Readers skip them. Float formatting is fixed so identical runs
give byte-identical files.
"""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import DepthProfile, MeasuredProfile, TitrationRecord
from .errors import ConfigError
from .mesostructure import (
    CircleAggregate,
    DomainRect,
    MaterialGrid,
    Mesostructure,
    PolygonAggregate,
    TendonDuct,
)
from .solver import ConcentrationField

FLOAT = "{:.10g}"


def _f(value: float) -> str:
    return FLOAT.format(float(value))


def provenance(config_hash: str = "none", seed: Optional[int] = None, **extra) -> list[str]:
    lines = [f"# chloromeso {__version__}", f"# config_hash={config_hash}", f"# seed={'none' if seed is None else seed}"]
    lines += [f"# {k}={v}" for k, v in extra.items()]
    return lines


def _data_lines(path: Path) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("cannot read input file", path=str(path), detail=exc.strerror) from None
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def _write(path: Path, header: Sequence[str], body: Iterable[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for line in header:
            fh.write(line + "\n")
        for line in body:
            fh.write(line + "\n")
    return path


# --------------------------------------------------------------------------- mesostructure


def write_mesostructure(path, meso: Mesostructure, header: Sequence[str] = ()) -> Path:
    """Records: META key=value ..., DOMAIN, DUCT, then one POLY per aggregate.

    ``POLY cx cy r n x1 y1 ... xn yn`` (circumscribed circle, vertex count, vertices).
    """
    body = [
        "META "
        + " ".join(
            [
                f"seed={meso.seed}",
                f"target_fraction={_f(meso.target_fraction)}",
                f"achieved_area_fraction={_f(meso.achieved_area_fraction)}",
                f"itz_width={_f(meso.itz_width)}",
                f"eta={_f(meso.eta)}",
                f"aggregates={len(meso.aggregates)}",
            ]
        ),
        f"DOMAIN {_f(meso.domain.width)} {_f(meso.domain.height)}",
    ]
    if meso.duct is not None:
        body.append(f"DUCT {_f(meso.duct.center[0])} {_f(meso.duct.center[1])} {_f(meso.duct.diameter)}")
    for poly in meso.aggregates:
        c = poly.circumscribed
        coords = " ".join(f"{_f(x)} {_f(y)}" for x, y in poly.vertices)
        body.append(f"POLY {_f(c.center[0])} {_f(c.center[1])} {_f(c.radius)} {len(poly.vertices)} {coords}")
    return _write(path, header, body)


def read_mesostructure(path) -> Mesostructure:
    meta: dict[str, str] = {}
    domain, duct, polys = None, None, []
    for line in _data_lines(path):
        tag, *rest = line.split()
        if tag == "META":
            meta.update(item.split("=", 1) for item in rest)
        elif tag == "DOMAIN":
            domain = DomainRect(float(rest[0]), float(rest[1]))
        elif tag == "DUCT":
            duct = TendonDuct((float(rest[0]), float(rest[1])), float(rest[2]))
        elif tag == "POLY":
            cx, cy, r = map(float, rest[:3])
            n = int(rest[3])
            xy = list(map(float, rest[4 : 4 + 2 * n]))
            polys.append(PolygonAggregate(tuple(zip(xy[0::2], xy[1::2])), CircleAggregate((cx, cy), r)))
        else:
            raise ConfigError("unknown mesostructure record", path=str(path), record=tag)
    if domain is None:
        raise ConfigError("mesostructure file lacks a DOMAIN record", path=str(path))
    return Mesostructure(
        domain=domain,
        aggregates=tuple(polys),
        itz_width=float(meta.get("itz_width", 0.0)),
        duct=duct,
        seed=int(meta.get("seed", 0)),
        achieved_area_fraction=float(meta.get("achieved_area_fraction", 0.0)),
        target_fraction=float(meta.get("target_fraction", 0.0)),
        eta=float(meta.get("eta", 1.05)),
    )


def write_material_grid(path, grid: MaterialGrid, header: Sequence[str] = ()) -> Path:
    """First data line ``nx=..,ny=..,h=..``; then one CSV row of codes per depth row."""
    body = [f"nx={grid.nx},ny={grid.ny},h={_f(grid.h)}"]
    body += [",".join(str(int(c)) for c in row) for row in grid.codes]
    return _write(path, header, body)


def read_material_grid(path) -> MaterialGrid:
    lines = _data_lines(path)
    meta = dict(item.split("=", 1) for item in lines[0].split(","))
    nx, ny, h = int(meta["nx"]), int(meta["ny"]), float(meta["h"])
    codes = np.array([[int(v) for v in ln.split(",")] for ln in lines[1:]], dtype=np.int8)
    return MaterialGrid(nx, ny, h, codes.reshape(ny, nx), DomainRect(nx * h, ny * h))


# --------------------------------------------------------------------------- fields


FIELD_COLUMNS = ("x_mm", "y_mm", "material_code", "concentration_percent")


def field_filename(time: float, suffix: str = "csv") -> str:
    return f"field_t{time:07.3f}.{suffix}"


def write_field_csv(path, field: ConcentrationField, header: Sequence[str] = ()) -> Path:
    """Row-major (depth rows, then x); inactive cells carry ``nan``."""
    grid = field.grid
    xs = [_f(x) for x in grid.x_centers]
    body = [f"# time_years={_f(field.time)} nx={grid.nx} ny={grid.ny} h={_f(grid.h)}", ",".join(FIELD_COLUMNS)]
    for j, y in enumerate(grid.depths):
        ys = _f(y)
        codes = grid.codes[j]
        vals = field.values[j]
        for i in range(grid.nx):
            v = vals[i]
            body.append(f"{xs[i]},{ys},{int(codes[i])},{'nan' if math.isnan(v) else _f(v)}")
    return _write(path, header, body)


def read_field_csv(path) -> ConcentrationField:
    text = Path(path).read_text()
    match = re.search(r"time_years=(\S+) nx=(\d+) ny=(\d+) h=(\S+)", text)
    if not match:
        raise ConfigError("field file lacks its grid header", path=str(path))
    time, nx, ny, h = float(match[1]), int(match[2]), int(match[3]), float(match[4])
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")][1:]
    data = np.array([ln.split(",") for ln in rows])
    codes = data[:, 2].astype(np.int8).reshape(ny, nx)
    values = data[:, 3].astype(float).reshape(ny, nx)
    grid = MaterialGrid(nx, ny, h, codes, DomainRect(nx * h, ny * h))
    return ConcentrationField(grid, values, time)


def write_field_vtk(path, field: ConcentrationField, title: str = "chloromeso field") -> Path:
    """Legacy VTK ASCII STRUCTURED_POINTS with cell data; y increases with depth."""
    grid = field.grid
    n = grid.nx * grid.ny
    conc = np.where(np.isnan(field.values), -1.0, field.values)
    body = [
        "# vtk DataFile Version 3.0",
        f"{title} t={_f(field.time)} yr (masked cells = -1)",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_f(grid.h)} {_f(grid.h)} 1",
        f"CELL_DATA {n}",
        "SCALARS concentration_percent double 1",
        "LOOKUP_TABLE default",
    ]
    body += [" ".join(_f(v) for v in row) for row in conc]
    body += ["SCALARS material_code int 1", "LOOKUP_TABLE default"]
    body += [" ".join(str(int(c)) for c in row) for row in grid.codes]
    return _write(path, (), body)


# --------------------------------------------------------------------------- profiles and measured data


def write_columns(path, columns: Mapping[str, Sequence[float]], header: Sequence[str] = ()) -> Path:
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    body = [",".join(names)]
    for row in zip(*arrays):
        body.append(",".join("nan" if math.isnan(v) else _f(v) for v in row))
    return _write(path, header, body)


def write_profile_csv(path, profile: DepthProfile, free: Optional[DepthProfile] = None, header: Sequence[str] = ()) -> Path:
    cols = {"depth_mm": profile.depths, "concentration_percent": profile.max_concentration}
    if free is not None:
        cols["free_chloride_percent"] = free.max_concentration
    return write_columns(path, cols, [*header, f"# time_years={_f(profile.time)}"])


def read_profile_csv(path) -> DepthProfile:
    text = Path(path).read_text()
    match = re.search(r"time_years=(\S+)", text)
    rows = list(csv.DictReader(ln for ln in text.splitlines() if ln and not ln.startswith("#")))
    return DepthProfile(
        [float(r["depth_mm"]) for r in rows],
        [float(r["concentration_percent"]) for r in rows],
        float(match[1]) if match else float("nan"),
    )


def _dict_rows(path) -> list[dict[str, str]]:
    return list(csv.DictReader(_data_lines(path)))


def read_measured_csv(path) -> MeasuredProfile:
    """Columns ``depth_mm, free_chloride_percent``."""
    rows = _dict_rows(path)
    try:
        return MeasuredProfile([float(r["depth_mm"]) for r in rows], [float(r["free_chloride_percent"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ConfigError("measured profile CSV is malformed", path=str(path), detail=str(exc)) from None


TITRATION_COLUMNS = (
    "depth_mm",
    "silver_nitrate_titer_mg_per_ml",
    "titrant_volume_ml",
    "water_volume_ml",
    "extract_volume_ml",
    "powder_mass_g",
)


def read_titration_csv(path) -> list[TitrationRecord]:
    rows = _dict_rows(path)
    try:
        return [TitrationRecord(*(float(r[c]) for c in TITRATION_COLUMNS)) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError("titration CSV is malformed", path=str(path), detail=str(exc)) from None


def write_key_values(path, values: Mapping[str, object], header: Sequence[str] = ()) -> Path:
    return _write(path, header, [f"{k} = {v}" for k, v in values.items()])
