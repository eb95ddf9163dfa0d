"""Periodic grid, spectral Sobolev norms, and interpolation-inequality checks.

Everything here lives on a uniform N x N grid over the periodic box
[-L/2, L/2)^2.  Fourier coefficients are normalized so that the order-zero
Sobolev norm coincides with the physical L2 norm of the box (discrete
Parseval), which makes norms of different orders directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, UnsupportedOrderError

__all__ = [
    "Grid",
    "GridFunction",
    "SpectralField",
    "make_grid",
    "to_spectral",
    "to_physical",
    "sobolev_norm",
    "ck_norm",
    "interpolation_check",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the square box [-L/2, L/2)^2.

    Parameters
    ----------
    L : float
        Side length of the periodic box.
    N : int
        Number of nodes per side.  Must be even and at least 8 so the
        frequency lattice is symmetric up to the Nyquist row.

    Derived attributes (computed once, read-only):
    h        -- node spacing L / N
    nodes1d  -- node coordinates -L/2 + i*h, i = 0..N-1
    xi1d     -- angular frequencies (2*pi/L)*m in FFT ordering
    """

    L: float
    N: int
    h: float = field(init=False)
    nodes1d: np.ndarray = field(init=False, repr=False, compare=False)
    xi1d: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.L) or self.L <= 0:
            raise InvalidParameterError(f"box size L must be positive, got {self.L}")
        if self.N % 2 != 0 or self.N < 8:
            raise InvalidParameterError(
                f"node count N must be even and >= 8, got {self.N}"
            )
        h = self.L / self.N
        object.__setattr__(self, "h", h)
        object.__setattr__(
            self, "nodes1d", -self.L / 2 + h * np.arange(self.N, dtype=float)
        )
        object.__setattr__(
            self, "xi1d", 2.0 * np.pi * np.fft.fftfreq(self.N, d=h)
        )

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, Y) node coordinate arrays of shape (N, N), axis 0 = x."""
        return np.meshgrid(self.nodes1d, self.nodes1d, indexing="ij")

    def xi_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (XI1, XI2) frequency arrays of shape (N, N) in FFT order."""
        return np.meshgrid(self.xi1d, self.xi1d, indexing="ij")

    def node_radii_sq(self) -> np.ndarray:
        """Squared distance of every node from the origin, shape (N, N)."""
        x, y = self.node_mesh()
        return x * x + y * y


def make_grid(L: float, N: int) -> Grid:
    """Construct a periodic grid, validating the box size and node count."""
    return Grid(L=float(L), N=int(N))


@dataclass(frozen=True)
class GridFunction:
    """Nodal samples of a function on a :class:`Grid`.

    ``values`` has shape (N, N) with axis 0 indexing x and axis 1 indexing y;
    flattening with ``values.ravel()`` gives the row-major node order used by
    the assembled operator matrices.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.shape != (self.grid.N, self.grid.N):
            raise InvalidInputError(
                f"values must have shape ({self.grid.N}, {self.grid.N}), "
                f"got {v.shape}"
            )
        if not np.iscomplexobj(v):
            v = v.astype(float)
        object.__setattr__(self, "values", v)

    def l2_norm(self) -> float:
        """Physical L2 norm of the box: h * sqrt(sum |f|^2)."""
        return float(self.grid.h * np.linalg.norm(self.values))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a grid function, FFT-ordered, shape (N, N).

    The normalization ties the coefficients to the box L2 norm:
    sum |c|^2 over the lattice equals the squared physical L2 norm.
    """

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coefficients)
        if c.shape != (self.grid.N, self.grid.N):
            raise InvalidInputError(
                f"coefficients must have shape ({self.grid.N}, {self.grid.N}), "
                f"got {c.shape}"
            )


def to_spectral(f: GridFunction) -> SpectralField:
    """Forward DFT with Parseval normalization (see :class:`SpectralField`)."""
    g = f.grid
    coeff = np.fft.fft2(f.values) * (g.L / g.N**2)
    return SpectralField(grid=g, coefficients=coeff)


def to_physical(F: SpectralField) -> GridFunction:
    """Inverse of :func:`to_spectral`; round-trips to relative 1e-12."""
    g = F.grid
    values = np.fft.ifft2(F.coefficients * (g.N**2 / g.L))
    return GridFunction(grid=g, values=values)


def sobolev_norm(f: GridFunction, s: float) -> float:
    """Spectral Sobolev norm of order ``s`` on the periodic box.

    Computed as ``sqrt(sum (1 + |xi|^2)^s |c(xi)|^2)`` over the frequency
    lattice.  Order zero reproduces the physical L2 norm by Parseval.
    """
    if not np.isfinite(s):
        raise InvalidParameterError(f"Sobolev order must be finite, got {s}")
    if not np.all(np.isfinite(f.values)):
        raise InvalidInputError("grid function contains non-finite values")
    coeff = to_spectral(f).coefficients
    xi1, xi2 = f.grid.xi_mesh()
    weight = (1.0 + xi1 * xi1 + xi2 * xi2) ** s
    return float(np.sqrt(np.sum(weight * np.abs(coeff) ** 2)))


def _central_diff(values: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    """Apply an order-2 accurate central difference of given order along axis."""
    out = values
    for _ in range(order // 2):
        out = (np.roll(out, -1, axis) - 2.0 * out + np.roll(out, 1, axis)) / h**2
    if order % 2:
        out = (np.roll(out, -1, axis) - np.roll(out, 1, axis)) / (2.0 * h)
    return out


def ck_norm(f: GridFunction, k: int) -> float:
    """Discrete C^k norm: max over nodes of |f| and all partials up to order k.

    Partial derivatives are second-order central differences on the periodic
    grid (mixed partials compose the one-dimensional stencils), so the value
    is a quadrature-level stand-in for the continuum C^k norm; it is intended
    for relative comparisons, not sharp constants.
    """
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise InvalidParameterError(f"derivative order must be a non-negative int, got {k}")
    if k > 4:
        raise UnsupportedOrderError(
            f"C^k norms are supported for k <= 4, got k = {k}"
        )
    if not np.all(np.isfinite(f.values)):
        raise InvalidInputError("grid function contains non-finite values")
    h = f.grid.h
    best = float(np.max(np.abs(f.values)))
    for total in range(1, k + 1):
        for a1 in range(total + 1):
            a2 = total - a1
            d = _central_diff(f.values, 0, h, a1)
            d = _central_diff(d, 1, h, a2)
            best = max(best, float(np.max(np.abs(d))))
    return best


def interpolation_check(
    f: GridFunction, s1: float, s2: float, alpha1: float
) -> float:
    """Ratio testing the convexity inequality between Sobolev norms.

    For ``s = alpha1*s1 + (1-alpha1)*s2`` returns

        ||f||_{H^s} / (||f||_{H^s1}^alpha1 * ||f||_{H^s2}^(1-alpha1)),

    which Hoelder's inequality on the spectral sum bounds by 1 exactly
    (up to roundoff).  The zero function returns 1 by convention.
    """
    if not (0.0 <= alpha1 <= 1.0):
        raise InvalidParameterError(f"alpha1 must lie in [0, 1], got {alpha1}")
    alpha2 = 1.0 - alpha1
    s = alpha1 * s1 + alpha2 * s2
    n_mid = sobolev_norm(f, s)
    if n_mid == 0.0:
        return 1.0
    n1 = sobolev_norm(f, s1)
    n2 = sobolev_norm(f, s2)
    return float(n_mid / (n1**alpha1 * n2**alpha2))
