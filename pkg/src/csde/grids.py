"""Uniform space-time grids, sampled fields, and their file formats.

A :class:`Grid` is a closed box ``[lo, hi]`` in ``d`` spatial dimensions
crossed with a time interval ``[t0, t1]``, sampled at ``nx[i]`` nodes per
axis and ``nt`` time slices.  Spatial spacing is ``h_i = (hi-lo)/(nx_i-1)``
(both endpoints are nodes).  Periodic problems use :meth:`Grid.periodic`,
which drops the duplicate endpoint so that ``h = period / nx``.

A :class:`GridFunction` stores one scalar or one length-``d`` vector per
node, shape ``(nt, *nx)`` or ``(nt, *nx, d)``.

Fields round-trip through CSV (``t,x1..xd,v`` or ``v1..vd``) and a compact
binary format: magic ``CSDE``, a ``u32`` version, the grid dimensions, then
little-endian ``f64`` samples in C order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Invalid grid geometry or a field/grid mismatch."""


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid over a box.

    Parameters
    ----------
    dim : spatial dimension, >= 1
    box_lo, box_hi : per-axis bounds, ``lo < hi`` componentwise
    nx : per-axis node counts, each >= 2
    nt : number of stored time slices, >= 1
    t0, t1 : time interval bounds
    periodic : if True the box is a torus of period ``hi - lo + h``
        (the duplicate endpoint node is not stored)
    """

    dim: int
    box_lo: tuple[float, ...]
    box_hi: tuple[float, ...]
    nx: tuple[int, ...]
    nt: int = 1
    t0: float = 0.0
    t1: float = 0.0
    periodic: bool = field(default=False)

    def __post_init__(self):
        if self.dim < 1:
            raise GridError(f"dim must be >= 1, got {self.dim}")
        for name in ("box_lo", "box_hi", "nx"):
            v = getattr(self, name)
            if len(v) != self.dim:
                raise GridError(f"{name} must have length dim={self.dim}")
            object.__setattr__(self, name, tuple(v))
        if any(lo >= hi for lo, hi in zip(self.box_lo, self.box_hi)):
            raise GridError("box_lo < box_hi must hold componentwise")
        if any(n < 2 for n in self.nx):
            raise GridError("nx >= 2 per axis required")
        if self.nt < 1:
            raise GridError("nt >= 1 required")
        if self.nt > 1 and not self.t1 > self.t0:
            raise GridError("t1 > t0 required when nt > 1")

    @classmethod
    def periodic_box(cls, period, nx, dim=None, origin=0.0, nt=1, t0=0.0, t1=0.0):
        """Torus of the given period per axis; node spacing ``period / nx``."""
        if dim is None:
            dim = len(period) if np.ndim(period) else 1
        period = np.broadcast_to(np.asarray(period, float), (dim,))
        origin = np.broadcast_to(np.asarray(origin, float), (dim,))
        nxs = np.broadcast_to(np.asarray(nx, int), (dim,))
        hi = origin + period * (nxs - 1) / nxs
        return cls(dim, tuple(origin), tuple(hi), tuple(int(n) for n in nxs),
                   nt=nt, t0=t0, t1=t1, periodic=True)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1)
                     for lo, hi, n in zip(self.box_lo, self.box_hi, self.nx))

    @property
    def h_min(self) -> float:
        return min(self.h)

    @property
    def periods(self) -> tuple[float, ...]:
        if not self.periodic:
            raise GridError("grid is not periodic")
        return tuple(h * n for h, n in zip(self.h, self.nx))

    @property
    def dt(self) -> float:
        if self.nt < 2:
            return 0.0
        return (self.t1 - self.t0) / (self.nt - 1)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n)
                     for lo, hi, n in zip(self.box_lo, self.box_hi, self.nx))

    @property
    def times(self) -> np.ndarray:
        if self.nt == 1:
            return np.array([self.t0])
        return np.linspace(self.t0, self.t1, self.nt)

    @property
    def n_space_nodes(self) -> int:
        return int(np.prod(self.nx))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def meshgrid(self):
        """Spatial coordinate arrays of shape ``nx``, one per axis."""
        return np.meshgrid(*self.axes, indexing="ij")

    def space_points(self) -> np.ndarray:
        """All spatial nodes as an ``(n_space_nodes, dim)`` array."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def space_weights(self) -> np.ndarray:
        """Per-node quadrature weights of shape ``nx``.

        Trapezoidal on closed boxes (half weight at the faces), uniform
        ``prod(h)`` on periodic grids.
        """
        if self.periodic:
            return np.full(self.nx, self.cell_volume)
        w = np.ones(())
        for n, h in zip(self.nx, self.h):
            w1 = np.full(n, h)
            w1[0] *= 0.5
            w1[-1] *= 0.5
            w = np.multiply.outer(w, w1)
        return w.reshape(self.nx)

    def time_weights(self) -> np.ndarray:
        """Trapezoidal weights over the stored time slices (length ``nt``)."""
        if self.nt == 1:
            return np.array([1.0])
        w = np.full(self.nt, self.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def spatial_only(self) -> "Grid":
        return Grid(self.dim, self.box_lo, self.box_hi, self.nx,
                    nt=1, t0=0.0, t1=0.0, periodic=self.periodic)

    def same_geometry(self, other: "Grid") -> bool:
        return (self.dim == other.dim and self.nx == other.nx
                and self.nt == other.nt and self.periodic == other.periodic
                and np.allclose(self.box_lo, other.box_lo)
                and np.allclose(self.box_hi, other.box_hi)
                and np.allclose([self.t0, self.t1], [other.t0, other.t1]))


@dataclass(frozen=True)
class Cylinder:
    """Parabolic cylinder ``(t - r^2, t] x B_r(x)`` with top time ``t``."""

    t: float
    x: tuple[float, ...]
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise GridError("cylinder radius must be positive")
        object.__setattr__(self, "x", tuple(self.x))

    def shrink(self, factor: float) -> "Cylinder":
        return Cylinder(self.t, self.x, self.r * factor)


@dataclass(frozen=True)
class Ball:
    """Closed spatial ball ``|x - center| <= radius``."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GridError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(self.center))


def space_mask(grid: Grid, region) -> np.ndarray:
    """Boolean mask of shape ``nx`` for the spatial part of ``region``.

    ``region`` may be None (whole box), a Ball, or a Cylinder (its ball).
    """
    if region is None:
        return np.ones(grid.nx, dtype=bool)
    if isinstance(region, Cylinder):
        center, radius = region.x, region.r
    elif isinstance(region, Ball):
        center, radius = region.center, region.radius
    else:
        raise GridError(f"unsupported region type {type(region).__name__}")
    mesh = grid.meshgrid()
    d2 = np.zeros(grid.nx)
    for m, c in zip(mesh, center):
        d2 += (m - c) ** 2
    return d2 <= radius**2 * (1 + 1e-12)


def time_mask(grid: Grid, region) -> np.ndarray:
    """Boolean mask of length ``nt`` for the time part of ``region``."""
    if region is None or isinstance(region, Ball):
        return np.ones(grid.nt, dtype=bool)
    if isinstance(region, Cylinder):
        lo, hi = region.t - region.r**2, region.t
        eps = 1e-12 * max(1.0, abs(hi), abs(lo))
        return (grid.times >= lo - eps) & (grid.times <= hi + eps)
    raise GridError(f"unsupported region type {type(region).__name__}")


class GridFunction:
    """Scalar or vector samples on a :class:`Grid`.

    ``values`` has shape ``(nt, *nx)`` for scalars and ``(nt, *nx, dim)``
    for vectors; all entries must be finite.
    """

    def __init__(self, grid: Grid, values: np.ndarray, kind: str = "scalar",
                 validate: bool = True):
        values = np.asarray(values, dtype=np.float64)
        scalar_shape = (grid.nt, *grid.nx)
        if kind == "scalar":
            expected = scalar_shape
        elif kind == "vector":
            expected = (*scalar_shape, grid.dim)
        else:
            raise GridError(f"kind must be 'scalar' or 'vector', got {kind!r}")
        if values.shape != expected:
            raise GridError(
                f"values shape {values.shape} != expected {expected} for {kind}")
        if validate and not np.all(np.isfinite(values)):
            raise GridError("field has non-finite samples")
        self.grid = grid
        self.values = values
        self.kind = kind

    @classmethod
    def from_callable(cls, grid: Grid, fn, kind: str = "scalar") -> "GridFunction":
        """Sample ``fn(t, X)`` (with ``X`` of shape ``(n, dim)``) on the grid."""
        pts = grid.space_points()
        out = []
        for t in grid.times:
            v = np.asarray(fn(float(t), pts), dtype=np.float64)
            if kind == "scalar":
                out.append(v.reshape(grid.nx))
            else:
                out.append(v.reshape(*grid.nx, grid.dim))
        return cls(grid, np.stack(out, axis=0), kind=kind)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full((grid.nt, *grid.nx), float(value)))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.kind,
                            validate=False)

    def magnitude(self) -> "GridFunction":
        """Pointwise euclidean magnitude; identity-like for scalars (abs)."""
        if self.kind == "scalar":
            return GridFunction(self.grid, np.abs(self.values), validate=False)
        mag = np.sqrt(np.sum(self.values**2, axis=-1))
        return GridFunction(self.grid, mag, validate=False)

    def slice_at(self, t_index: int) -> "GridFunction":
        g = self.grid.spatial_only()
        return GridFunction(g, self.values[t_index][None, ...], self.kind,
                            validate=False)

    def is_spatial(self) -> bool:
        return self.grid.nt == 1

    def __add__(self, other):
        self._compat(other)
        return GridFunction(self.grid, self.values + other.values, self.kind,
                            validate=False)

    def __sub__(self, other):
        self._compat(other)
        return GridFunction(self.grid, self.values - other.values, self.kind,
                            validate=False)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * float(c), self.kind,
                            validate=False)

    __rmul__ = __mul__

    def _compat(self, other):
        if self.kind != other.kind or not self.grid.same_geometry(other.grid):
            raise GridError("incompatible grid functions")


def interpolate(f: GridFunction, t: float, points: np.ndarray,
                fill_value: float = 0.0) -> np.ndarray:
    """Multilinear interpolation of ``f`` at time ``t`` and spatial ``points``.

    Time is interpolated linearly between stored slices.  Off-grid points
    evaluate to ``fill_value`` (periodic grids wrap instead).  Shape of the
    result is ``(n,)`` for scalars, ``(n, dim)`` for vectors.
    """
    grid = f.grid
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if grid.nt == 1:
        slices = [(0, 1.0)]
    else:
        s = (t - grid.t0) / grid.dt
        s = min(max(s, 0.0), grid.nt - 1.0)
        i0 = int(np.floor(s))
        i0 = min(i0, grid.nt - 2)
        w1 = s - i0
        slices = [(i0, 1.0 - w1), (i0 + 1, w1)]

    out = None
    for it, wt in slices:
        if wt == 0.0:
            continue
        v = _interp_space(grid, f.values[it], points, fill_value)
        out = wt * v if out is None else out + wt * v
    return out


def _interp_space(grid: Grid, values: np.ndarray, points: np.ndarray,
                  fill_value: float) -> np.ndarray:
    n = points.shape[0]
    idx0 = []
    frac = []
    inside = np.ones(n, dtype=bool)
    for ax in range(grid.dim):
        lo, h, nax = grid.box_lo[ax], grid.h[ax], grid.nx[ax]
        s = (points[:, ax] - lo) / h
        if grid.periodic:
            s = np.mod(s, nax)
            i0 = np.floor(s).astype(np.int64) % nax
            fr = s - np.floor(s)
        else:
            inside &= (s >= -1e-12) & (s <= nax - 1 + 1e-12)
            s = np.clip(s, 0.0, nax - 1.0)
            i0 = np.minimum(np.floor(s).astype(np.int64), nax - 2)
            fr = s - i0
        idx0.append(i0)
        frac.append(fr)

    vector = values.ndim == grid.dim + 1
    shape = (n, grid.dim) if vector else (n,)
    acc = np.zeros(shape)
    for corner in range(1 << grid.dim):
        w = np.ones(n)
        ix = []
        for ax in range(grid.dim):
            hi = (corner >> ax) & 1
            i = idx0[ax] + hi
            if grid.periodic:
                i = i % grid.nx[ax]
            w = w * (frac[ax] if hi else 1.0 - frac[ax])
            ix.append(i)
        vals = values[tuple(ix)]
        acc += w[:, None] * vals if vector else w * vals
    if not grid.periodic and not inside.all():
        acc[~inside] = fill_value
    return acc


# ---------------------------------------------------------------------------
# file formats

_MAGIC = b"CSDE"
_VERSION = 1


def write_csde(path, f: GridFunction) -> None:
    """Write a field in the binary format (magic, version, dims, f64 data)."""
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        kind = 0 if f.kind == "scalar" else 1
        fh.write(struct.pack("<BBBB", kind, g.dim, 1 if g.periodic else 0, 0))
        fh.write(struct.pack("<I", g.nt))
        fh.write(struct.pack(f"<{g.dim}I", *g.nx))
        fh.write(struct.pack("<2d", g.t0, g.t1))
        fh.write(struct.pack(f"<{g.dim}d", *g.box_lo))
        fh.write(struct.pack(f"<{g.dim}d", *g.box_hi))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_csde(path) -> GridFunction:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise GridError(f"{path}: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != _VERSION:
        raise GridError(f"{path}: unsupported version {version}")
    kind_u, dim, per, _ = struct.unpack_from("<BBBB", data, 8)
    off = 12
    (nt,) = struct.unpack_from("<I", data, off)
    off += 4
    nx = struct.unpack_from(f"<{dim}I", data, off)
    off += 4 * dim
    t0, t1 = struct.unpack_from("<2d", data, off)
    off += 16
    lo = struct.unpack_from(f"<{dim}d", data, off)
    off += 8 * dim
    hi = struct.unpack_from(f"<{dim}d", data, off)
    off += 8 * dim
    grid = Grid(dim, lo, hi, nx, nt=nt, t0=t0, t1=t1, periodic=bool(per))
    kind = "scalar" if kind_u == 0 else "vector"
    count = nt * int(np.prod(nx)) * (1 if kind_u == 0 else dim)
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off)
    shape = (nt, *nx) if kind_u == 0 else (nt, *nx, dim)
    return GridFunction(grid, values.reshape(shape).astype(np.float64), kind)


def write_csv(path, f: GridFunction, header_comment: str | None = None) -> None:
    """Write ``t,x1..xd,v`` (or ``v1..vd``) rows, one per node."""
    g = f.grid
    pts = g.space_points()
    ncomp = 1 if f.kind == "scalar" else g.dim
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        cols = ["t"] + [f"x{i+1}" for i in range(g.dim)]
        cols += ["v"] if ncomp == 1 else [f"v{i+1}" for i in range(ncomp)]
        fh.write(",".join(cols) + "\n")
        for it, t in enumerate(g.times):
            vals = f.values[it].reshape(-1, ncomp) if ncomp > 1 \
                else f.values[it].reshape(-1, 1)
            for p, v in zip(pts, vals):
                row = [repr(float(t))] + [repr(float(c)) for c in p]
                row += [repr(float(c)) for c in v]
                fh.write(",".join(row) + "\n")


def read_csv(path) -> GridFunction:
    """Rebuild a field from CSV rows; node coordinates must form a uniform grid."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    dim = sum(1 for c in header if c.startswith("x"))
    ncomp = sum(1 for c in header if c.startswith("v"))
    raw = np.array([[float(tok) for tok in ln.split(",")] for ln in lines[1:]])
    times = np.unique(raw[:, 0])
    axes = [np.unique(raw[:, 1 + i]) for i in range(dim)]
    nx = tuple(len(a) for a in axes)
    nt = len(times)
    for a in axes:
        if len(a) >= 3 and not np.allclose(np.diff(a), a[1] - a[0], rtol=1e-9, atol=1e-12):
            raise GridError("CSV nodes are not on a uniform grid")
    grid = Grid(dim, tuple(a[0] for a in axes), tuple(a[-1] for a in axes), nx,
                nt=nt, t0=float(times[0]), t1=float(times[-1]))
    if raw.shape[0] != nt * int(np.prod(nx)):
        raise GridError("CSV rows do not fill the grid")
    # rows were written t-major then C-order over space; re-sort defensively
    keys = [raw[:, 1 + i] for i in range(dim - 1, -1, -1)] + [raw[:, 0]]
    order = np.lexsort(keys)
    data = raw[order, 1 + dim:]
    if ncomp == 1:
        values = data.reshape(nt, *nx)
        return GridFunction(grid, values)
    values = data.reshape(nt, *nx, ncomp)
    return GridFunction(grid, values, kind="vector")
