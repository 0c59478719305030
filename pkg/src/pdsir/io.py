"""CSV and JSON serialization, run manifests.

Incidence files look like::

    # units: days
    interval_end_time,count
    7,0
    14,3

Lines starting with ``#`` are comments; a ``# units: <name>`` comment
declares the time unit. The grid is ``0`` followed by the end times.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from pdsir.mcmc import ChainOutput
from pdsir.model import IncidenceCounts, LatentPath, ObservationGrid

INCIDENCE_HEADER = ("interval_end_time", "count")
PATH_HEADER = ("individual", "infection_time", "removal_time", "initially_infectious")
SAMPLES_HEADER = ("iter", "beta", "lambda", "r0", "loglik", "accepted")
_UNITS = re.compile(r"^#\s*units\s*[:=]\s*(\S.*?)\s*$", re.IGNORECASE)


class IncidenceFormatError(ValueError):
    """Malformed incidence file; the message names the file and line."""

    def __init__(self, path, line: int | None, msg: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {msg}")
        self.line = line


@dataclass(frozen=True, eq=False)
class IncidenceData:
    grid: ObservationGrid
    counts: IncidenceCounts
    units: str | None = None


def fmt(x) -> str:
    """Round-trip float formatting used by every writer."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _parse_count(text, path, lineno):
    try:
        v = float(text)
    except ValueError:
        raise IncidenceFormatError(path, lineno, f"count {text!r} is not a number") from None
    if not math.isfinite(v) or v != int(v):
        raise IncidenceFormatError(path, lineno, f"count {text!r} is not an integer")
    if v < 0:
        raise IncidenceFormatError(path, lineno, f"count {text!r} is negative")
    return int(v)


def read_incidence_csv(path) -> IncidenceData:
    path = Path(path)
    units = None
    header_seen = False
    ends, counts = [], []
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _UNITS.match(line)
                if m:
                    units = m.group(1)
                continue
            cells = [c.strip() for c in next(csv.reader([line]))]
            if not header_seen:
                if tuple(c.lower() for c in cells) != INCIDENCE_HEADER:
                    raise IncidenceFormatError(path, lineno,
                                               f"expected header {','.join(INCIDENCE_HEADER)!r}, got {line!r}")
                header_seen = True
                continue
            if len(cells) != 2:
                raise IncidenceFormatError(path, lineno, f"expected 2 fields, got {len(cells)}")
            try:
                t = float(cells[0])
            except ValueError:
                raise IncidenceFormatError(path, lineno, f"time {cells[0]!r} is not a number") from None
            if not math.isfinite(t) or t <= 0:
                raise IncidenceFormatError(path, lineno, f"time {cells[0]!r} must be positive and finite")
            if ends and t <= ends[-1][0]:
                raise IncidenceFormatError(path, lineno, f"time {cells[0]!r} does not increase "
                                           f"(previous {fmt(ends[-1][0])} on line {ends[-1][1]})")
            ends.append((t, lineno))
            counts.append(_parse_count(cells[1], path, lineno))
    if not header_seen:
        raise IncidenceFormatError(path, None, "missing header line 'interval_end_time,count'")
    if not ends:
        raise IncidenceFormatError(path, None, "no data rows")
    grid = ObservationGrid(np.concatenate(([0.0], [t for t, _ in ends])))
    return IncidenceData(grid, IncidenceCounts(np.array(counts, dtype=np.int64)), units)


def load_incidence_csv(path) -> tuple[ObservationGrid, IncidenceCounts]:
    d = read_incidence_csv(path)
    return d.grid, d.counts


def write_incidence_csv(path, grid: ObservationGrid, counts: IncidenceCounts,
                        units: str | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        if units:
            fh.write(f"# units: {units}\n")
        fh.write(",".join(INCIDENCE_HEADER) + "\n")
        for t, c in zip(grid.breakpoints[1:], counts.counts):
            fh.write(f"{fmt(t)},{int(c)}\n")


def write_path_csv(path, latent: LatentPath) -> None:
    flags = latent.initially_infectious
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(PATH_HEADER) + "\n")
        for j, (a, b) in enumerate(zip(latent.infection_time, latent.removal_time)):
            fh.write(f"{j},{fmt(a)},{fmt(b)},{int(flags[j])}\n")


def read_path_csv(path, s0: int) -> LatentPath:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    inf = np.array([float(r["infection_time"]) for r in rows])
    rem = np.array([float(r["removal_time"]) for r in rows])
    i0 = sum(int(r["initially_infectious"]) for r in rows)
    return LatentPath(inf, rem, s0, i0)


def write_samples_csv(path, chain: ChainOutput) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(SAMPLES_HEADER) + "\n")
        for it, b, l, r, ll, acc in zip(chain.iteration, chain.beta, chain.lam, chain.r0,
                                         chain.loglik, chain.accepted):
            fh.write(f"{int(it)},{fmt(b)},{fmt(l)},{fmt(r)},{fmt(ll)},{int(acc)}\n")


def read_samples_csv(path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def write_rows_csv(path, rows, columns=None) -> None:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for c in columns:
                v = row[c]
                if isinstance(v, (bool, np.bool_)):
                    cells.append(str(int(v)))
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                elif isinstance(v, (float, np.floating)):
                    cells.append(fmt(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to replay a CLI run.

    ``wall_time`` is informational; replay compares the other outputs.
    """

    command: str
    args: dict
    seed: int | None
    data_sha256: str | None
    version: str
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    backend: str = ""

    def write(self, path) -> None:
        write_json(path, asdict(self))

    @classmethod
    def read(cls, path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text()))
