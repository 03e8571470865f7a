"""Spectral fields on the unit torus T^n, n in {1, 2}.

Fields are real valued and stored as Fourier coefficients in numpy FFT
layout, normalized so that ``coeffs[k]`` multiplies ``exp(2*pi*i*k.x)``.
The retained integer wavevectors are ``-N/2 < k_i <= N/2``.  Products of
fields are dealiased by the 3/2 padding rule, which is exact for quadratic
nonlinearities of band-limited fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "dealiased_product",
    "sqrt_neg_laplacian",
    "random_band_limited",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit torus with N points per direction."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"horizontal dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N % 2 != 0:
            raise ValueError(f"N must be even and >= 8, got {self.N}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def npoints(self) -> int:
        return self.N**self.n

    def axis_wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers along one axis, FFT ordering, band -N/2 < k <= N/2."""
        k = np.rint(np.fft.fftfreq(self.N, 1.0 / self.N)).astype(int)
        k[k == -self.N // 2] = self.N // 2
        return k

    def wavevectors(self) -> np.ndarray:
        """Integer wavevector components, shape (n, N[, N])."""
        k = self.axis_wavenumbers()
        return np.stack(np.meshgrid(*([k] * self.n), indexing="ij"))

    def ksq(self) -> np.ndarray:
        """|2 pi k|^2 on the coefficient grid."""
        kk = self.wavevectors()
        return (2.0 * np.pi) ** 2 * np.sum(kk.astype(float) ** 2, axis=0)

    def nodes(self) -> np.ndarray:
        """Sample points x_j = j / N, shape (n, N[, N])."""
        x = np.arange(self.N) / self.N
        return np.stack(np.meshgrid(*([x] * self.n), indexing="ij"))

    def padded(self) -> "TorusGrid":
        """Grid for 3/2-rule dealiasing (padded size rounded up to even)."""
        M = (3 * self.N + 1) // 2
        if M % 2:
            M += 1
        return TorusGrid(self.n, M)


@lru_cache(maxsize=None)
def _transfer_matrices(N: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Spectral embedding (N -> M) and truncation (M -> N) along one axis.

    The Nyquist mode k = N/2 of the coarse grid stands for the pair +-N/2;
    embedding splits it evenly and truncation gathers both halves, so that
    real fields round-trip exactly.
    """
    if M < N:
        raise ValueError("padded size must not be smaller than source size")
    ks = np.rint(np.fft.fftfreq(N, 1.0 / N)).astype(int)
    P = np.zeros((M, N))
    Q = np.zeros((N, M))
    for j, k in enumerate(ks):
        if abs(k) < N // 2:
            P[k % M, j] = 1.0
            Q[j, k % M] = 1.0
        else:  # k == N/2
            P[k % M, j] = 0.5
            P[(-k) % M, j] = 0.5
            Q[j, k % M] = 1.0
            Q[j, (-k) % M] = 1.0
    P.flags.writeable = False
    Q.flags.writeable = False
    return P, Q


def _apply_axes(mat: np.ndarray, coeffs: np.ndarray, n: int) -> np.ndarray:
    out = coeffs
    for axis in range(n):
        out = np.tensordot(mat, out, axes=([1], [axis]))
        out = np.moveaxis(out, 0, axis)
    return out


def embed_coeffs(coeffs: np.ndarray, src: TorusGrid, dst: TorusGrid) -> np.ndarray:
    """Zero-pad spectral coefficients from grid `src` onto the finer `dst`."""
    P, _ = _transfer_matrices(src.N, dst.N)
    return _apply_axes(P, coeffs, src.n)


def truncate_coeffs(coeffs: np.ndarray, src: TorusGrid, dst: TorusGrid) -> np.ndarray:
    """Restrict spectral coefficients from the finer `src` grid onto `dst`."""
    _, Q = _transfer_matrices(dst.N, src.N)
    return _apply_axes(Q, coeffs, dst.n)


def coeffs_to_samples(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Physical samples of a Hermitian coefficient array (real output)."""
    axes = tuple(range(-grid.n, 0))
    return np.fft.ifftn(coeffs, axes=axes).real * grid.npoints


def samples_to_coeffs(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    axes = tuple(range(-grid.n, 0))
    return np.fft.fftn(values, axes=axes) / grid.npoints


@dataclass(frozen=True)
class SpectralField:
    """Real scalar field on the torus, held as Fourier coefficients."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} != grid shape {self.grid.shape}")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(grid: TorusGrid) -> "SpectralField":
        return SpectralField(grid, np.zeros(grid.shape, dtype=complex))

    @staticmethod
    def from_samples(grid: TorusGrid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError("sample shape does not match grid")
        return SpectralField(grid, samples_to_coeffs(values, grid))

    @staticmethod
    def from_modes(grid: TorusGrid, modes: dict) -> "SpectralField":
        """Build a real field from {wavevector: complex amplitude}.

        Each entry contributes a exp(2 pi i k.x) + conj(a) exp(-2 pi i k.x);
        self-conjugate wavevectors (k = -k mod N) take the real part.
        """
        c = np.zeros(grid.shape, dtype=complex)
        for k, a in modes.items():
            kt = (k,) if np.isscalar(k) else tuple(int(ki) for ki in k)
            if len(kt) != grid.n:
                raise ValueError(f"wavevector {kt} has wrong dimension")
            if any(not (-grid.N // 2 < ki <= grid.N // 2) for ki in kt):
                raise ValueError(f"wavevector {kt} outside retained band")
            idx = tuple(ki % grid.N for ki in kt)
            idx_conj = tuple((-ki) % grid.N for ki in kt)
            if idx == idx_conj:
                c[idx] += complex(a).real
            else:
                c[idx] += a
                c[idx_conj] += np.conj(a)
        return SpectralField(grid, c)

    # -- basic queries -----------------------------------------------------

    def samples(self) -> np.ndarray:
        return coeffs_to_samples(self.coeffs, self.grid)

    def mean(self) -> float:
        idx = (0,) * self.grid.n
        return float(self.coeffs[idx].real)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        flipped = self.coeffs
        for axis in range(self.grid.n):
            flipped = np.flip(np.roll(flipped, -1, axis=axis), axis=axis)
        return bool(np.max(np.abs(self.coeffs - np.conj(flipped))) <= tol)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def _check_same_grid(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    # -- calculus ----------------------------------------------------------

    def derivative(self, multi_index: tuple[int, ...]) -> "SpectralField":
        """Partial derivative d^|m| / dx^m, computed mode by mode.

        The Nyquist plane is zeroed for odd derivative orders (it has no
        consistent sign for real fields).
        """
        mi = (multi_index,) if np.isscalar(multi_index) else tuple(multi_index)
        if len(mi) != self.grid.n:
            raise ValueError(
                f"multi-index length {len(mi)} does not match dimension {self.grid.n}"
            )
        if any(m < 0 or m != int(m) for m in mi):
            raise ValueError("multi-index entries must be non-negative integers")
        c = self.coeffs.copy()
        k1 = self.grid.axis_wavenumbers()
        for axis, m in enumerate(mi):
            if m == 0:
                continue
            mult = (2j * np.pi * k1) ** m
            if m % 2 == 1:
                mult[k1 == self.grid.N // 2] = 0.0
            shape = [1] * self.grid.n
            shape[axis] = self.grid.N
            c = c * mult.reshape(shape)
        return SpectralField(self.grid, c)

    def sobolev_norm(self, s: float, homogeneous: bool = False) -> float:
        """H^s norm, bracket convention (1 + |2 pi k|^2)^(s/2).

        With ``homogeneous=True`` returns (sum_{k != 0} |2 pi k|^(2s) |c_k|^2)^(1/2).
        """
        ksq = self.grid.ksq()
        power = np.abs(self.coeffs) ** 2
        if homogeneous:
            mask = ksq > 0
            total = np.sum(ksq[mask] ** s * power[mask])
        else:
            total = np.sum((1.0 + ksq) ** s * power)
        return float(np.sqrt(total))

    def l2_inner(self, other: "SpectralField") -> float:
        """Integral of the product of two real fields over the torus."""
        self._check_same_grid(other)
        return float(np.sum(self.coeffs * np.conj(other.coeffs)).real)


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product on a 3/2-padded grid, truncated back to the band."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    fine = f.grid.padded()
    fv = coeffs_to_samples(embed_coeffs(f.coeffs, f.grid, fine), fine)
    gv = coeffs_to_samples(embed_coeffs(g.coeffs, g.grid, fine), fine)
    prod = samples_to_coeffs(fv * gv, fine)
    return SpectralField(f.grid, truncate_coeffs(prod, fine, f.grid))


def sqrt_neg_laplacian(f: SpectralField) -> SpectralField:
    """Fourier multiplier 2 pi |k| (the operator sqrt(-Laplace))."""
    kk = f.grid.wavevectors().astype(float)
    mult = 2.0 * np.pi * np.sqrt(np.sum(kk**2, axis=0))
    return SpectralField(f.grid, f.coeffs * mult)


def random_band_limited(
    grid: TorusGrid,
    kmax: int,
    amplitude: float,
    rng: np.random.Generator,
    zero_average: bool = True,
) -> SpectralField:
    """Random real field supported on 0 < |k|_inf <= kmax, sup-norm ~ amplitude."""
    modes = {}
    ranges = [range(-kmax, kmax + 1)] * grid.n
    for k in np.ndindex(*[2 * kmax + 1] * grid.n):
        kt = tuple(k[i] - kmax for i in range(grid.n))
        if all(ki == 0 for ki in kt) and zero_average:
            continue
        a = rng.standard_normal() + 1j * rng.standard_normal()
        modes[kt] = a
    f = SpectralField.from_modes(grid, modes)
    peak = np.max(np.abs(f.samples()))
    if peak == 0.0:
        return f
    return f * (amplitude / peak)
