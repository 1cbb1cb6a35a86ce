"""CSV formats for GPT tables, gridded conductivities and run outputs.

GPT file::

    gptlab-gpt,1
    N,<order>
    R,<radius>
    cc,<m>,<M_m1>,...,<M_mN>      (N rows per block, blocks cc, cs, sc, ss)

Grid file::

    gptlab-grid,1
    R,<radius>
    angular_order,<K>
    gauss_order,<g>
    radial_nodes,<r_1>,...,<R>
    value,<i>,<sigma(r_i, theta_0)>,...   (one row per radial quadrature point)

Floats are written with 17 significant digits, so reading back a written
file reproduces every finite value exactly.
"""

import csv
import io

import numpy as np

from .basis import DiskGrid
from .conductivity import GriddedConductivity
from .gpt import BLOCKS, ContractedGPTTable

GPT_MAGIC = "gptlab-gpt"
GRID_MAGIC = "gptlab-grid"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def fmt(x):
    return f"{float(x):.17g}"


def _read_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and not row[0].startswith("#")]


def _floats(cells, what):
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise FormatError(f"non-numeric entry in {what}: {exc}") from exc


def _header(rows, magic):
    if not rows or rows[0][0] != magic:
        raise FormatError(f"missing '{magic}' header line")
    if len(rows[0]) != 2 or rows[0][1] != str(FORMAT_VERSION):
        raise FormatError(f"unsupported {magic} format version {rows[0][1:]}")


def gpt_to_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    N = table.max_order
    w.writerow([GPT_MAGIC, FORMAT_VERSION])
    w.writerow(["N", N])
    w.writerow(["R", fmt(table.radius)])
    for name in BLOCKS:
        block = getattr(table, name)
        for m in range(N):
            w.writerow([name, m + 1, *map(fmt, block[m])])
    return buf.getvalue()


def write_gpt_table(table, path):
    with open(path, "w") as fh:
        fh.write(gpt_to_csv(table))


def read_gpt_table(path):
    """Parse a GPT file; raises :class:`FormatError` on any structural problem."""
    rows = _read_rows(path)
    _header(rows, GPT_MAGIC)
    try:
        if rows[1][0] != "N" or rows[2][0] != "R":
            raise FormatError("expected N and R header lines")
        N = int(rows[1][1])
        R = float(rows[2][1])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"bad header: {exc}") from exc
    if N < 1 or not R > 0:
        raise FormatError(f"invalid header values N={N}, R={R}")
    body = rows[3:]
    if len(body) != 4 * N:
        raise FormatError(f"expected {4 * N} block rows, found {len(body)}")
    blocks = {}
    for b, name in enumerate(BLOCKS):
        block = np.empty((N, N))
        for m in range(N):
            row = body[b * N + m]
            if row[0] != name or row[1] != str(m + 1) or len(row) != N + 2:
                raise FormatError(f"malformed row {b * N + m + 4}: expected '{name},{m + 1}' and {N} values")
            block[m] = _floats(row[2:], f"{name} row {m + 1}")
        blocks[name] = block
    if not all(np.all(np.isfinite(v)) for v in blocks.values()):
        raise FormatError("GPT file contains non-finite values")
    return ContractedGPTTable(radius=R, **blocks)


def write_grid_conductivity(sigma, path):
    g = sigma.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([GRID_MAGIC, FORMAT_VERSION])
        w.writerow(["R", fmt(g.radius)])
        w.writerow(["angular_order", g.angular_order])
        w.writerow(["gauss_order", g.gauss_order])
        w.writerow(["radial_nodes", *map(fmt, g.radial_nodes)])
        for i, row in enumerate(sigma.values):
            w.writerow(["value", i, *map(fmt, row)])


def read_grid_conductivity(path, label=None):
    rows = _read_rows(path)
    _header(rows, GRID_MAGIC)
    try:
        keys = [r[0] for r in rows[1:5]]
        if keys != ["R", "angular_order", "gauss_order", "radial_nodes"]:
            raise FormatError(f"unexpected header keys {keys}")
        R = float(rows[1][1])
        K = int(rows[2][1])
        g = int(rows[3][1])
        nodes = _floats(rows[4][1:], "radial_nodes")
        grid = DiskGrid(R, nodes, K, g)
    except (IndexError, ValueError) as exc:
        raise FormatError(f"bad grid header: {exc}") from exc
    body = rows[5:]
    if len(body) != grid.shape[0] or any(r[0] != "value" or len(r) != grid.shape[1] + 2 for r in body):
        raise FormatError(f"expected {grid.shape[0]} value rows of {grid.shape[1]} entries")
    values = np.array([_floats(r[2:], "values") for r in body])
    return GriddedConductivity(grid, values, label or str(path))


def write_columns(path, header, columns):
    """Write equal-length columns as a CSV with a header row."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([v if isinstance(v, (str, np.str_)) else (int(v) if isinstance(v, (int, np.integer)) else fmt(v)) for v in row])


def read_points(path):
    """``x,y`` points, one per line (an optional non-numeric header row is skipped)."""
    rows = _read_rows(path)
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if any(len(r) < 2 for r in rows):
        raise FormatError("each point row needs x and y")
    return np.array([_floats(r[:2], "points") for r in rows]).reshape(-1, 2)


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False
