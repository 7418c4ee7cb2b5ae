"""
Periodic grids on [-pi, pi)^d, Fourier transforms, spectral derivatives and
2/3-rule dealiasing.

Coefficients are true Fourier coefficients: f(x) = sum_k c_k exp(i k.x) with
grid points x_j = -pi + j*h. The forward transform carries 1/N and the phase
factor (-1)^k that accounts for the grid starting at -pi.

Fields may carry leading component axes: an array of shape (3, n1, n2, n3) on a
3D grid is a 3-vector field. All transforms act on the trailing grid axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid on [-pi, pi)^d.

    Parameters
    ----------
    dims : tuple of int
        Points per axis, each even and >= 8.
    axis_roles : tuple of str
        "h" (horizontal) or "v" (vertical) per axis. At most one vertical axis.
    """

    dims: tuple[int, ...]
    axis_roles: tuple[str, ...]
    spacing: tuple[float, ...] = field(init=False)
    wavenumbers: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        dims = tuple(int(n) for n in self.dims)
        roles = tuple(self.axis_roles)
        if len(dims) not in (1, 2, 3):
            raise ValueError("grid dimension must be 1, 2 or 3")
        if len(roles) != len(dims):
            raise ValueError("axis_roles must have one entry per axis")
        if any(r not in ("h", "v") for r in roles) or roles.count("v") > 1:
            raise ValueError("axis_roles entries must be 'h' or 'v', at most one 'v'")
        for n in dims:
            if n % 2 != 0 or n < MIN_POINTS:
                raise ValueError(f"grid size {n} must be even and >= {MIN_POINTS}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "axis_roles", roles)
        object.__setattr__(self, "spacing", tuple(2.0 * np.pi / n for n in dims))

        d = len(dims)
        waves = []
        kb, phase, nyq, keep = [], [], [], []
        for ax, n in enumerate(dims):
            k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
            k[n // 2] = n // 2  # store Nyquist as +n/2
            k.setflags(write=False)
            waves.append(k)
            shape = [1] * d
            shape[ax] = n
            kb.append(k.astype(np.float64).reshape(shape))
            phase.append(np.where(k % 2 == 0, 1.0, -1.0).reshape(shape))
            nyq.append((k == n // 2).reshape(shape))
            keep.append((np.abs(k) <= n // 3).reshape(shape))
        object.__setattr__(self, "wavenumbers", tuple(waves))
        object.__setattr__(self, "_k", tuple(kb))
        object.__setattr__(self, "_nyquist", tuple(nyq))
        ph = phase[0]
        mask = keep[0]
        for ax in range(1, d):
            ph = ph * phase[ax]
            mask = mask & keep[ax]
        object.__setattr__(self, "_phase", ph)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "_any_nyquist", np.logical_or.reduce(np.broadcast_arrays(*nyq)))

    # geometry -----------------------------------------------------------
    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def horizontal_axes(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.axis_roles) if r == "h")

    @property
    def vertical_axis(self) -> int | None:
        return self.axis_roles.index("v") if "v" in self.axis_roles else None

    def coords(self, axis: int) -> np.ndarray:
        """1D coordinates -pi + j*h along one axis."""
        n = self.dims[axis]
        return -np.pi + self.spacing[axis] * np.arange(n)

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of full grid shape (ij indexing)."""
        return tuple(np.meshgrid(*(self.coords(a) for a in range(self.ndim)), indexing="ij"))

    def k(self, axis: int) -> np.ndarray:
        """Broadcastable float wavenumber array along ``axis``."""
        return self._k[axis]

    def nyquist(self, axis: int) -> np.ndarray:
        return self._nyquist[axis]

    @property
    def any_nyquist(self) -> np.ndarray:
        """Boolean mask of modes that sit on the Nyquist plane of any axis."""
        return self._any_nyquist

    def ksq(self, axes: tuple[int, ...] | None = None) -> np.ndarray:
        axes = tuple(range(self.ndim)) if axes is None else axes
        out = np.zeros([1] * self.ndim)
        for a in axes:
            out = out + self._k[a] ** 2
        return out

    # raw array transforms -------------------------------------------------
    def _axes(self) -> tuple[int, ...]:
        return tuple(range(-self.ndim, 0))

    def fft(self, values: np.ndarray) -> np.ndarray:
        """Grid samples -> Fourier coefficients over the trailing grid axes."""
        return np.fft.fftn(values, axes=self._axes()) * (self._phase / self.size)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        """Fourier coefficients -> real grid samples (imaginary part dropped)."""
        return np.fft.ifftn(coeffs * (self._phase * self.size), axes=self._axes()).real

    def check_shape(self, arr: np.ndarray) -> None:
        if arr.shape[arr.ndim - self.ndim:] != self.dims or arr.ndim < self.ndim:
            raise ValueError(f"array shape {arr.shape} does not match grid {self.dims}")


def make_grid(n_h: int, n_v: int) -> Grid:
    """3D grid with horizontal axes (x1, x2) and vertical axis x3."""
    return Grid((n_h, n_h, n_v), ("h", "h", "v"))


def make_grid_2d(n: int) -> Grid:
    return Grid((n, n), ("h", "h"))


def make_grid_1d(n: int, role: str = "v") -> Grid:
    return Grid((n,), (role,))


def horizontal_grid(grid: Grid) -> Grid:
    """The 2D horizontal grid underlying a 3D grid."""
    ha = grid.horizontal_axes
    return Grid(tuple(grid.dims[a] for a in ha), ("h",) * len(ha))


def _readonly(a: np.ndarray) -> np.ndarray:
    view = np.asarray(a).view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class PhysicalField:
    """Real grid samples; leading axes (if any) index components."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        self.grid.check_shape(vals)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(vals))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients in FFT ordering; leading axes index components."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        self.grid.check_shape(c)
        object.__setattr__(self, "coeffs", _readonly(c))


def forward(f: PhysicalField) -> SpectralField:
    return SpectralField(f.grid, f.grid.fft(f.values))


def inverse(F: SpectralField) -> PhysicalField:
    return PhysicalField(F.grid, F.grid.ifft(F.coeffs))


def derivative_symbol(grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    """Broadcastable multiplier (i k_axis)^order with odd-order Nyquist zeroed."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    sym = (1j * grid.k(axis)) ** order
    if order % 2 == 1:
        sym = np.where(grid.nyquist(axis), 0.0, sym)
    return sym


def derivative(F: SpectralField, axis: int, order: int = 1) -> SpectralField:
    return SpectralField(F.grid, F.coeffs * derivative_symbol(F.grid, axis, order))


def dealias(F: SpectralField) -> SpectralField:
    """2/3 rule: zero every mode with |k_axis| > floor(n_axis/3) on some axis."""
    return SpectralField(F.grid, F.coeffs * F.grid.dealias_mask)


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    ncomp: int | None = None,
    decay: float = 2.5,
    mean_free: bool = False,
) -> np.ndarray:
    """
    Real random field with spectrum ~ |k|^-decay and the top third zeroed.

    Returns grid values of shape ``dims`` or ``(ncomp, *dims)``.
    """
    shape = grid.dims if ncomp is None else (ncomp, *grid.dims)
    noise = rng.standard_normal(shape)
    c = grid.fft(noise)
    kmag = np.sqrt(grid.ksq())
    amp = np.where(kmag > 0, np.maximum(kmag, 1.0) ** (-decay), 0.0 if mean_free else 1.0)
    c = c * amp * grid.dealias_mask
    c = np.where(grid.any_nyquist, 0.0, c)
    return grid.ifft(c)
