"""Periodic fields on the unit cube with spectral calculus.

Scalar, vector and matrix fields are nodal samples on a uniform N^n grid over
(0,1)^n, n in {2,3}, understood as trigonometric interpolants tiling R^n.
All derivative operators act in Fourier space (multiply mode k by 2*pi*i*k),
so operator identities like div(grad) = laplacian hold to machine precision.
Fields are immutable after construction.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import BandLimitError, NonZeroMeanError, ParameterRangeError
from .rng import as_rng

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform N-per-axis grid on the unit cube, N a power of two >= 8."""

    dim: int
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ParameterRangeError(f"dim must be 2 or 3, got {self.dim}")
        n = self.points_per_axis
        if n < 8 or (n & (n - 1)) != 0:
            raise ParameterRangeError(
                f"points_per_axis must be a power of two >= 8, got {n}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def max_band(self) -> int:
        """Largest admissible wavenumber under the dealiasing margin N/3."""
        return self.points_per_axis // 3

    def wavevectors(self) -> np.ndarray:
        """Integer wave vectors, shape (N,...,N,dim)."""
        return _wavevectors(self.dim, self.points_per_axis)

    def coordinates(self) -> np.ndarray:
        """Node coordinates in [0,1)^n, shape (N,...,N,dim)."""
        ax = np.arange(self.points_per_axis) * self.spacing
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)


@lru_cache(maxsize=None)
def _wavevectors(dim, n):
    freq = np.fft.fftfreq(n, d=1.0 / n)
    mesh = np.meshgrid(*([freq] * dim), indexing="ij")
    k = np.stack(mesh, axis=-1)
    k.setflags(write=False)
    return k


@lru_cache(maxsize=None)
def _ksq(dim, n):
    k = _wavevectors(dim, n)
    ks = np.sum(k * k, axis=-1)
    ks.setflags(write=False)
    return ks


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != self.grid.shape:
            raise ParameterRangeError(
                f"scalar field shape {self.values.shape} != {self.grid.shape}")


@dataclass(frozen=True)
class VectorField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        want = self.grid.shape + (self.grid.dim,)
        if self.values.shape != want:
            raise ParameterRangeError(
                f"vector field shape {self.values.shape} != {want}")


@dataclass(frozen=True)
class MatrixField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        want = self.grid.shape + (self.grid.dim, self.grid.dim)
        if self.values.shape != want:
            raise ParameterRangeError(
                f"matrix field shape {self.values.shape} != {want}")


_KIND_BY_TYPE = {ScalarField: "scalar", VectorField: "vector",
                 MatrixField: "matrix"}
_TYPE_BY_KIND = {v: k for k, v in _KIND_BY_TYPE.items()}


@dataclass(frozen=True)
class SpectralCoefficients:
    """Complex amplitudes c_k with field(x) = sum_k c_k exp(2 pi i k.x).

    Normalized so the grid mean of |field|^2 equals sum_k |c_k|^2.
    """

    grid: PeriodicGrid
    kind: str
    values: np.ndarray


def _spatial_axes(grid):
    return tuple(range(grid.dim))


def _fft(grid, values):
    n_total = grid.points_per_axis ** grid.dim
    return np.fft.fftn(values, axes=_spatial_axes(grid)) / n_total


def _ifft(grid, coeffs):
    n_total = grid.points_per_axis ** grid.dim
    return np.real(np.fft.ifftn(coeffs * n_total, axes=_spatial_axes(grid)))


def to_spectral(field) -> SpectralCoefficients:
    return SpectralCoefficients(
        grid=field.grid, kind=_KIND_BY_TYPE[type(field)],
        values=_fft(field.grid, field.values))


def from_spectral(coeffs: SpectralCoefficients):
    cls = _TYPE_BY_KIND[coeffs.kind]
    return cls(coeffs.grid, _ifft(coeffs.grid, coeffs.values))


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------

def gradient(phi: ScalarField) -> VectorField:
    g = phi.grid
    c = _fft(g, phi.values)
    k = g.wavevectors()
    out = np.empty(g.shape + (g.dim,))
    for j in range(g.dim):
        out[..., j] = _ifft(g, c * (_TWO_PI * 1j) * k[..., j])
    return VectorField(g, out)


def jacobian(v: VectorField) -> MatrixField:
    """Row-by-row gradient: entry (i, j) is the x_j derivative of component i."""
    g = v.grid
    k = g.wavevectors()
    out = np.empty(g.shape + (g.dim, g.dim))
    for i in range(g.dim):
        c = _fft(g, v.values[..., i])
        for j in range(g.dim):
            out[..., i, j] = _ifft(g, c * (_TWO_PI * 1j) * k[..., j])
    return MatrixField(g, out)


def hessian(phi: ScalarField) -> MatrixField:
    g = phi.grid
    c = _fft(g, phi.values)
    k = g.wavevectors()
    out = np.empty(g.shape + (g.dim, g.dim))
    for i in range(g.dim):
        for j in range(i, g.dim):
            block = _ifft(g, c * (-_TWO_PI ** 2) * k[..., i] * k[..., j])
            out[..., i, j] = block
            out[..., j, i] = block
    return MatrixField(g, out)


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    k = g.wavevectors()
    acc = np.zeros(g.shape, dtype=complex)
    for j in range(g.dim):
        acc += _fft(g, v.values[..., j]) * (_TWO_PI * 1j) * k[..., j]
    return ScalarField(g, _ifft(g, acc))


def matrix_divergence(m: MatrixField) -> VectorField:
    """Row-wise divergence: component i is sum_j d m_ij / d x_j."""
    g = m.grid
    k = g.wavevectors()
    out = np.empty(g.shape + (g.dim,))
    for i in range(g.dim):
        acc = np.zeros(g.shape, dtype=complex)
        for j in range(g.dim):
            acc += _fft(g, m.values[..., i, j]) * (_TWO_PI * 1j) * k[..., j]
        out[..., i] = _ifft(g, acc)
    return VectorField(g, out)


def laplacian(phi: ScalarField) -> ScalarField:
    g = phi.grid
    c = _fft(g, phi.values)
    return ScalarField(g, _ifft(g, c * (-_TWO_PI ** 2)
                                * _ksq(g.dim, g.points_per_axis)))


def vector_laplacian(v: VectorField) -> VectorField:
    g = v.grid
    ks = _ksq(g.dim, g.points_per_axis)
    out = np.empty_like(np.asarray(v.values))
    for i in range(g.dim):
        out[..., i] = _ifft(g, _fft(g, v.values[..., i]) * (-_TWO_PI ** 2) * ks)
    return VectorField(g, out)


def solve_poisson(rhs: ScalarField) -> ScalarField:
    """Zero-mean periodic solution of laplacian(phi) = rhs.

    Divides mode k != 0 by -4 pi^2 |k|^2 and zeroes the mean mode; raises
    NonZeroMeanError when the right-hand side has mean above 1e-10 relative.
    """
    g = rhs.grid
    c = _fft(g, rhs.values)
    scale = float(np.sqrt(np.sum(np.abs(c) ** 2)))
    mean = abs(c[(0,) * g.dim])
    if mean > 1e-10 * max(scale, 1e-300):
        raise NonZeroMeanError(
            f"rhs mean {mean:.3e} exceeds 1e-10 relative tolerance")
    ks = _ksq(g.dim, g.points_per_axis).copy()
    ks[(0,) * g.dim] = 1.0  # avoid 0/0; mode is zeroed below
    sol = c / (-_TWO_PI ** 2 * ks)
    sol[(0,) * g.dim] = 0.0
    return ScalarField(g, _ifft(g, sol))


def helmholtz(varphi: VectorField):
    """Split varphi into gradient(potential) + solenoidal, div solenoidal = 0.

    The potential carries the zero-mean gauge.  Exact in spectral space.
    """
    potential = solve_poisson(divergence(varphi))
    solenoidal = VectorField(
        varphi.grid, varphi.values - gradient(potential).values)
    return potential, solenoidal


def sym_part(m: MatrixField) -> MatrixField:
    v = m.values
    return MatrixField(m.grid, 0.5 * (v + np.swapaxes(v, -1, -2)))


def antisym_part(m: MatrixField) -> MatrixField:
    v = m.values
    return MatrixField(m.grid, 0.5 * (v - np.swapaxes(v, -1, -2)))


def integrate(f: ScalarField) -> float:
    """Cell average over the unit cube; exact for sub-Nyquist trig polynomials."""
    return float(np.mean(f.values))


def l2_norm(field) -> float:
    """L2 norm over the unit cube of a scalar/vector/matrix field."""
    v = field.values
    comp_axes = tuple(range(field.grid.dim, v.ndim))
    sq = np.sum(v * v, axis=comp_axes) if comp_axes else v * v
    return float(np.sqrt(np.mean(sq)))


# ---------------------------------------------------------------------------
# band-limited random fields
# ---------------------------------------------------------------------------

def _band_indices(n, kmax):
    return np.arange(-kmax, kmax + 1) % n


def random_field(grid: PeriodicGrid, kind: str, max_wavenumber: int, seed):
    """Band-limited random trig polynomial with unit L2 norm.

    Coefficients are drawn only on the (2 kmax + 1)^dim band block, so a seed
    pins the same polynomial on every grid that can hold it.  kind
    'divfree-vector' projects each mode amplitude orthogonal to its wave
    vector, making the divergence vanish in exact arithmetic.
    """
    if kind not in ("scalar", "vector", "divfree-vector"):
        raise ParameterRangeError(f"unknown field kind {kind!r}")
    kmax = int(max_wavenumber)
    if kmax < 1:
        raise BandLimitError("max_wavenumber must be >= 1")
    if kmax > grid.max_band:
        raise BandLimitError(
            f"max_wavenumber {kmax} exceeds dealiasing margin "
            f"N/3 = {grid.max_band}")
    rng = as_rng(seed)
    dim = grid.dim
    side = 2 * kmax + 1
    comps = 1 if kind == "scalar" else dim
    block = (rng.standard_normal((side,) * dim + (comps,))
             + 1j * rng.standard_normal((side,) * dim + (comps,)))
    # Hermitian symmetry on the block: c(-k) = conj(c(k))
    flipped = block
    for ax in range(dim):
        flipped = np.flip(flipped, axis=ax)
    block = 0.5 * (block + np.conj(flipped))
    center = (kmax,) * dim
    block[center] = 0.0  # zero mean
    if kind == "divfree-vector":
        kb = np.arange(-kmax, kmax + 1, dtype=float)
        mesh = np.stack(np.meshgrid(*([kb] * dim), indexing="ij"), axis=-1)
        ks = np.sum(mesh * mesh, axis=-1)
        ks[center] = 1.0
        dot = np.sum(block * mesh, axis=-1)
        block = block - mesh * (dot / ks)[..., None]
    n = grid.points_per_axis
    coeffs = np.zeros(grid.shape + (comps,), dtype=complex)
    coeffs[np.ix_(*([_band_indices(n, kmax)] * dim))] = block
    vals = np.empty(grid.shape + (comps,))
    for c in range(comps):
        vals[..., c] = _ifft(grid, coeffs[..., c])
    if kind == "scalar":
        field = ScalarField(grid, vals[..., 0])
    else:
        field = VectorField(grid, vals)
    norm = l2_norm(field)
    cls = type(field)
    return cls(grid, field.values / norm)


def band_mask(grid: PeriodicGrid, kmax: int) -> np.ndarray:
    """Boolean mask of modes with |k_i| <= kmax and k != 0."""
    k = grid.wavevectors()
    mask = np.all(np.abs(k) <= kmax, axis=-1)
    mask = mask.copy()
    mask[(0,) * grid.dim] = False
    return mask


def refine(field, factor=2):
    """Resample onto a grid factor times finer by spectral zero-padding.

    Exact for band-limited fields (trigonometric interpolation).
    """
    if factor < 1 or int(factor) != factor:
        raise ParameterRangeError("factor must be a positive integer")
    g = field.grid
    if factor == 1:
        return field
    fine = PeriodicGrid(g.dim, g.points_per_axis * int(factor))
    n, m = g.points_per_axis, fine.points_per_axis
    kmax = n // 2 - 1  # drop the ambiguous Nyquist row
    idx_src = np.ix_(*([_band_indices(n, kmax)] * g.dim))
    idx_dst = np.ix_(*([_band_indices(m, kmax)] * g.dim))
    v = field.values
    comp_shape = v.shape[g.dim:]
    flat = v.reshape(g.shape + (-1,))
    out = np.empty(fine.shape + (flat.shape[-1],))
    for c in range(flat.shape[-1]):
        coeffs = _fft(g, flat[..., c])
        big = np.zeros(fine.shape, dtype=complex)
        big[idx_dst] = coeffs[idx_src]
        out[..., c] = _ifft(fine, big)
    cls = type(field)
    return cls(fine, out.reshape(fine.shape + comp_shape))


# ---------------------------------------------------------------------------
# serialization: flat binary + JSON sidecar
# ---------------------------------------------------------------------------

_MAGIC = b"QCXF"
_KIND_CODE = {"scalar": 0, "vector": 1, "matrix": 2}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


def save_field(field, path) -> str:
    """Write header (dim, N, kind) + float64 payload, plus a JSON sidecar."""
    path = Path(path)
    kind = _KIND_BY_TYPE[type(field)]
    g = field.grid
    header = _MAGIC + struct.pack(
        "<III", g.dim, g.points_per_axis, _KIND_CODE[kind])
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    path.write_bytes(header + payload)
    sidecar = {
        "format": "qcx-field/1",
        "dim": g.dim,
        "points_per_axis": g.points_per_axis,
        "kind": kind,
        "shape": list(field.values.shape),
        "dtype": "float64",
        "byte_order": "little",
        "layout": "row-major node order, components fastest",
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
    return str(path)


def load_field(path):
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not a field file (bad magic)")
    dim, n, code = struct.unpack("<III", raw[4:16])
    grid = PeriodicGrid(dim, n)
    kind = _KIND_NAME[code]
    comp = {"scalar": (), "vector": (dim,), "matrix": (dim, dim)}[kind]
    shape = grid.shape + comp
    values = np.frombuffer(raw[16:], dtype="<f8").reshape(shape)
    return _TYPE_BY_KIND[kind](grid, values)
