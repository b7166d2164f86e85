"""Grids, the x-Fourier transform, Fourier multipliers and y-quadrature.

Fields live on an x-periodic, y-truncated grid.  Arrays are stored with
shape ``(Nx, Ny)``: axis 0 is x, axis 1 is y.  Spectral arrays use numpy's
FFT ordering, so ``grid.xi[k]`` is the frequency of row ``k``.  The DFT is
unitary (``norm="ortho"``) and derivatives follow ``d/dx <-> i xi``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import GridMismatch

__all__ = [
    "GridSpec",
    "Field",
    "LineFunction",
    "MultiplierTable",
    "transform",
    "abs_dx_power",
    "dx",
    "dx_abs_dx",
    "apply_symbol",
    "integrate_y",
    "dy",
    "dyy",
    "dealias",
    "fd_weights",
    "save_field",
    "load_field",
]

TAIL_RTOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the half plane.

    Parameters
    ----------
    Lx : float
        Half-period of the x-torus; x nodes cover ``[-Lx, Lx)``.
    Nx : int
        Number of x nodes (even power of two).
    Ly : float
        Truncation height in y.
    Ny : int
        Number of y nodes.
    grading : float
        Nodes are ``y_j = Ly (j/(Ny-1))**grading``; 1 gives a uniform grid.
    """

    Lx: float = 40.0
    Nx: int = 512
    Ly: float = 30.0
    Ny: int = 1025
    grading: float = 1.5

    def __post_init__(self):
        if not (isinstance(self.Nx, (int, np.integer)) and self.Nx >= 2 and self.Nx & (self.Nx - 1) == 0):
            raise GridMismatch(f"Nx must be a power of two >= 2, got {self.Nx!r}")
        if not (isinstance(self.Ny, (int, np.integer)) and self.Ny >= 6):
            raise GridMismatch(f"Ny must be an integer >= 6, got {self.Ny!r}")
        if not (self.Lx > 0 and self.Ly > 0 and math.isfinite(self.Lx) and math.isfinite(self.Ly)):
            raise GridMismatch("Lx and Ly must be positive and finite")
        if not self.grading >= 1.0:
            raise GridMismatch("grading must be >= 1")

    @property
    def shape(self):
        return (self.Nx, self.Ny)

    @property
    def hx(self) -> float:
        """Uniform x spacing."""
        return 2.0 * self.Lx / self.Nx

    @cached_property
    def x(self) -> np.ndarray:
        return -self.Lx + self.hx * np.arange(self.Nx)

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequencies ``pi k / Lx`` in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.Nx, d=self.hx)

    @property
    def nyquist(self) -> int:
        """Row index of the unpaired frequency ``-pi Nx/(2 Lx)``."""
        return self.Nx // 2

    @cached_property
    def y(self) -> np.ndarray:
        s = np.arange(self.Ny) / (self.Ny - 1)
        y = self.Ly * s ** self.grading
        y[-1] = self.Ly
        return y

    @cached_property
    def wy(self) -> np.ndarray:
        """Composite trapezoid weights on the y nodes."""
        h = np.diff(self.y)
        w = np.zeros(self.Ny)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    @cached_property
    def d1(self) -> sparse.csr_matrix:
        return _fd_matrix(self.y, 1)

    @cached_property
    def d2(self) -> sparse.csr_matrix:
        return _fd_matrix(self.y, 2)

    def to_dict(self) -> dict:
        return {"Lx": self.Lx, "Nx": self.Nx, "Ly": self.Ly, "Ny": self.Ny, "grading": self.grading}

    def refined(self) -> "GridSpec":
        """Grid with Nx doubled and Ny-1 doubled."""
        return GridSpec(self.Lx, 2 * self.Nx, self.Ly, 2 * (self.Ny - 1) + 1, self.grading)


@dataclass
class Field:
    """Scalar field on a :class:`GridSpec`.

    ``values`` has shape ``(Nx, Ny)`` and holds physical samples, or the
    x-spectrum of each y-slice when ``spectral`` is true.
    """

    grid: GridSpec
    values: np.ndarray
    spectral: bool = False
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise GridMismatch(f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        """Sample ``fn(x, y)`` on the grid (broadcast over ``(Nx, Ny)``)."""
        return cls(grid, np.asarray(fn(grid.x[:, None], grid.y[None, :])) * np.ones(grid.shape))

    def physical(self) -> np.ndarray:
        if self.spectral:
            return np.fft.ifft(self.values, axis=0, norm="ortho")
        return self.values

    def spectrum(self) -> np.ndarray:
        if self.spectral:
            return self.values
        return np.fft.fft(self.values, axis=0, norm="ortho")

    def like(self, values) -> "Field":
        """New physical field on the same grid."""
        return Field(self.grid, values)


@dataclass
class LineFunction:
    """Function of x alone (A, the pressure, Neumann data)."""

    grid: GridSpec
    values: np.ndarray
    spectral: bool = False
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.Nx,):
            raise GridMismatch(f"line shape {self.values.shape} does not match Nx={self.grid.Nx}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "LineFunction":
        return cls(grid, np.zeros(grid.Nx))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "LineFunction":
        return cls(grid, np.asarray(fn(grid.x)) * np.ones(grid.Nx))

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spec, real: bool = True) -> "LineFunction":
        vals = np.fft.ifft(np.asarray(spec), norm="ortho")
        return cls(grid, vals.real if real else vals)

    def physical(self) -> np.ndarray:
        if self.spectral:
            return np.fft.ifft(self.values, norm="ortho")
        return self.values

    @property
    def spectrum(self) -> np.ndarray:
        if self.spectral:
            return self.values
        return np.fft.fft(self.values, norm="ortho")

    def like(self, values) -> "LineFunction":
        return LineFunction(self.grid, values)


@dataclass(frozen=True)
class MultiplierTable:
    """A Fourier symbol sampled on the grid frequencies."""

    name: str
    xi: np.ndarray
    values: np.ndarray

    def apply(self, f):
        return apply_symbol(f, self.values)


# ---------------------------------------------------------------------------
# transform and multipliers


def transform(f, direction: str = "forward"):
    """Unitary DFT in x of a :class:`Field` or :class:`LineFunction`.

    Parameters
    ----------
    f : Field or LineFunction
    direction : {"forward", "inverse"}
        ``forward`` maps physical to spectral, ``inverse`` the reverse.

    Returns
    -------
    Field or LineFunction
        Same type as ``f`` with the representation flag flipped.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    if direction == "forward" and f.spectral:
        raise ValueError("input is already spectral")
    if direction == "inverse" and not f.spectral:
        raise ValueError("input is already physical")
    _check_shape(f)
    fn = np.fft.fft if direction == "forward" else np.fft.ifft
    vals = fn(f.values, axis=0, norm="ortho")
    return type(f)(f.grid, vals, spectral=(direction == "forward"))


def _check_shape(f):
    expected = f.grid.shape if isinstance(f, Field) else (f.grid.Nx,)
    if np.shape(f.values) != expected:
        raise GridMismatch(f"values shape {np.shape(f.values)} does not match {expected}")


def hermitian_fix(grid: GridSpec, symbol: np.ndarray) -> np.ndarray:
    """Make a symbol act on the unpaired Nyquist row by its real part.

    A symbol with ``s(-xi) = conj(s(xi))`` maps real fields to real
    fields, except at the Nyquist row, which has no partner.  Taking the
    real part there restores that property (odd symbols such as ``i xi``
    become zero).
    """
    symbol = np.array(symbol, dtype=complex)
    symbol[grid.nyquist] = symbol[grid.nyquist].real
    return symbol


def apply_symbol(f, symbol: np.ndarray):
    """Multiply the x-spectrum of ``f`` by ``symbol``.

    The result is physical.  Real input stays real when the symbol is
    Hermitian.
    """
    _check_shape(f)
    symbol = hermitian_fix(f.grid, symbol)
    spec = f.values if f.spectral else np.fft.fft(f.values, axis=0, norm="ortho")
    if isinstance(f, Field):
        out = np.fft.ifft(spec * symbol[:, None], axis=0, norm="ortho")
    else:
        out = np.fft.ifft(spec * symbol, norm="ortho")
    if not f.spectral and np.isrealobj(f.values):
        out = out.real
    return type(f)(f.grid, out)


def abs_dx_power(f, s: float):
    """Apply ``|d/dx|^s``, the multiplier ``|xi|^s``.

    The ``xi = 0`` mode maps to zero for ``s > 0``.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    xi = np.abs(f.grid.xi)
    if s == 0:
        return apply_symbol(f, np.ones_like(xi))
    return apply_symbol(f, xi ** s)


def dx(f):
    """Spectral x-derivative."""
    return apply_symbol(f, 1j * f.grid.xi)


def dx_abs_dx(f):
    """Apply ``d/dx |d/dx|``, the multiplier ``i xi |xi|``."""
    xi = f.grid.xi
    return apply_symbol(f, 1j * xi * np.abs(xi))


def dealias(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero the top third of the x-spectrum of a physical array."""
    k = np.abs(np.fft.fftfreq(grid.Nx) * grid.Nx)
    mask = k <= grid.Nx / 3.0
    spec = np.fft.fft(values, axis=0, norm="ortho")
    spec = spec * (mask[:, None] if np.ndim(values) == 2 else mask)
    out = np.fft.ifft(spec, axis=0, norm="ortho")
    return out.real if np.isrealobj(values) else out


# ---------------------------------------------------------------------------
# y-integration


def _cumtrapz(values, grid):
    h = np.diff(grid.y)
    inc = 0.5 * (values[:, 1:] + values[:, :-1]) * h
    out = np.zeros(values.shape, dtype=np.result_type(values, float))
    out[:, 1:] = np.cumsum(inc, axis=1)
    return out


def _tail_warning(values, grid):
    scale = np.max(np.abs(values))
    tail = np.max(np.abs(values[:, -1]))
    if scale > 0 and tail > TAIL_RTOL * scale:
        return f"field not decayed at Ly: |f(., Ly)| = {tail:.2e} (max {scale:.2e})"
    return None


def integrate_y(f: Field, mode: str = "full"):
    """Trapezoid integration in y.

    Parameters
    ----------
    f : Field
        Physical field.
    mode : {"from_zero", "to_infinity", "full"}
        ``from_zero`` gives ``int_0^y f``, ``to_infinity`` gives
        ``int_y^Ly f`` and ``full`` gives ``int_0^Ly f`` as a line function.

    Returns
    -------
    Field or LineFunction
        For the tail modes, a truncation note is stored in
        ``result.meta["warning"]`` when ``f`` has not decayed at ``Ly``.
    """
    if f.spectral:
        raise ValueError("integrate_y requires a physical field")
    grid = f.grid
    vals = f.values
    if mode == "from_zero":
        return Field(grid, _cumtrapz(vals, grid))
    if mode not in ("to_infinity", "full"):
        raise ValueError("mode must be 'from_zero', 'to_infinity' or 'full'")
    note = _tail_warning(vals, grid)
    meta = {"warning": note} if note else {}
    if note:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    if mode == "full":
        return LineFunction(grid, vals @ grid.wy, meta=meta)
    cum = _cumtrapz(vals, grid)
    return Field(grid, cum[:, -1:] - cum, meta=meta)


def integral_full(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array version of ``integrate_y(mode="full")`` without tail checks."""
    return values @ grid.wy


def cumulative_from_zero(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array version of ``integrate_y(mode="from_zero")``."""
    return _cumtrapz(values, grid)


def cumulative_to_top(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array version of ``integrate_y(mode="to_infinity")`` without tail checks."""
    cum = _cumtrapz(values, grid)
    return cum[:, -1:] - cum


# ---------------------------------------------------------------------------
# y-derivatives


def fd_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights on arbitrary nodes (Fornberg's recursion).

    Parameters
    ----------
    x0 : float
        Evaluation point.
    nodes : ndarray
        Stencil nodes.
    order : int
        Derivative order.

    Returns
    -------
    ndarray
        Weights ``c`` with ``f^{(order)}(x0) ~ sum c_j f(nodes_j)``.
    """
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _fd_matrix(y: np.ndarray, order: int) -> sparse.csr_matrix:
    """Five-point centred stencils inside, six-point one-sided near the ends."""
    n = len(y)
    rows, cols, vals = [], [], []
    for i in range(n):
        if 2 <= i <= n - 3:
            idx = np.arange(i - 2, i + 3)
        elif i < 2:
            idx = np.arange(0, 6)
        else:
            idx = np.arange(n - 6, n)
        w = fd_weights(y[i], y[idx], order)
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def dy_array(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """First y-derivative of an ``(..., Ny)`` array."""
    return np.asarray(grid.d1 @ np.asarray(values).T).T


def dyy_array(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Second y-derivative of an ``(..., Ny)`` array."""
    return np.asarray(grid.d2 @ np.asarray(values).T).T


def dy(f: Field) -> Field:
    """Fourth-order finite-difference ``d/dy``."""
    return Field(f.grid, dy_array(f.physical(), f.grid))


def dyy(f: Field) -> Field:
    """Finite-difference ``d^2/dy^2``."""
    return Field(f.grid, dyy_array(f.physical(), f.grid))


# ---------------------------------------------------------------------------
# serialization


def save_field(path, f, kind: str | None = None) -> tuple[Path, Path]:
    """Write a field as ``<path>.bin`` plus a ``<path>.json`` header.

    The binary file holds complex128 samples as little-endian float64
    (real, imag) pairs in C order: for a :class:`Field` the y index runs
    fastest, i.e. sample ``(i, j)`` is at pair offset ``i*Ny + j``.

    Returns
    -------
    tuple of Path
        The binary and header paths.
    """
    path = Path(path)
    if kind is None:
        base = "field" if isinstance(f, Field) else "line"
        kind = f"{base}-{'spectral' if f.spectral else 'physical'}"
    data = np.ascontiguousarray(np.asarray(f.values, dtype=np.complex128))
    pairs = np.empty(data.shape + (2,), dtype="<f8")
    pairs[..., 0] = data.real
    pairs[..., 1] = data.imag
    bin_path = path.with_suffix(".bin")
    json_path = path.with_suffix(".json")
    bin_path.write_bytes(pairs.tobytes(order="C"))
    header = dict(f.grid.to_dict())
    header["kind"] = kind
    header["shape"] = list(data.shape)
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return bin_path, json_path


def load_field(path):
    """Read a field written by :func:`save_field`."""
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    grid = GridSpec(header["Lx"], header["Nx"], header["Ly"], header["Ny"], header.get("grading", 1.5))
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    pairs = raw.reshape(tuple(header["shape"]) + (2,))
    values = pairs[..., 0] + 1j * pairs[..., 1]
    spectral = header["kind"].endswith("spectral")
    if header["kind"].startswith("line"):
        return LineFunction(grid, values, spectral=spectral)
    return Field(grid, values, spectral=spectral)
