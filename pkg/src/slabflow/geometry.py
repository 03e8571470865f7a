"""Flattened-slab geometry: the map from the fixed strip to the fluid domain.

The fixed domain is T^n x (-b, 0), discretized spectrally in the horizontal
and by Chebyshev-Gauss-Lobatto collocation in the vertical.  A surface
elevation eta induces the flattening map

    Phi = id + chi(x3) (E eta) e3,      chi(x3) = 1 + x3 / b,

where E is the per-mode exponential (harmonic) extension.  All geometric
coefficients (J = det grad Phi, A = (grad Phi)^(-T), the transformed
normals) have exact per-mode expressions here, so the identity residuals
measure only the vertical interpolation error of exponential profiles.

Bulk fields store physical samples with component axes first and the
vertical axis last: scalar (*grid, Mv), vector (c, *grid, Mv), matrix
(c, c, *grid, Mv) with c = n + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .densities import EnergyDensity
from .fourier import SpectralField, TorusGrid, sqrt_neg_laplacian
from . import surface_energy as se

__all__ = [
    "FlattenedDomain",
    "BulkField",
    "DomainDegenerate",
    "harmonic_extension",
    "GeometricCoefficients",
    "geometric_coefficients",
    "full_gradient",
    "geo_gradient",
    "geo_symgrad",
    "geo_divergence",
    "piola_residual",
    "div_theorem_residual",
    "geo_energy",
    "geo_dissipation",
    "bulk_integral",
    "bulk_sobolev_norm",
]


class DomainDegenerate(RuntimeError):
    """The flattening map fails to be a diffeomorphism (min J too small)."""

    def __init__(self, min_j: float):
        super().__init__(f"flattening map degenerates: min J = {min_j:.3e}")
        self.min_j = min_j


def chebyshev_lobatto(m: int) -> tuple[np.ndarray, np.ndarray]:
    """CGL points on [-1, 1] (descending) and the differentiation matrix."""
    if m < 2:
        raise ValueError("need at least two collocation points")
    j = np.arange(m)
    x = np.cos(np.pi * j / (m - 1))
    c = np.ones(m)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** j
    X = np.tile(x, (m, 1)).T
    dX = X - X.T + np.eye(m)
    D = np.outer(c, 1.0 / c) / dX
    D -= np.diag(D.sum(axis=1))
    return x, D


def clenshaw_curtis(m: int) -> np.ndarray:
    """Quadrature weights for the CGL points on [-1, 1]."""
    N = m - 1
    theta = np.pi * np.arange(m) / N
    w = np.zeros(m)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k * k - 1.0)
        v -= np.cos(N * theta[ii]) / (N**2 - 1.0)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k * k - 1.0)
    w[ii] = 2.0 * v / N
    return w


@dataclass(frozen=True)
class FlattenedDomain:
    """T^n x (-b, 0): spectral horizontal grid, CGL vertical collocation."""

    b: float
    horizontal: TorusGrid
    M_v: int

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("depth b must be positive")
        if self.M_v < 8:
            raise ValueError("need M_v >= 8 vertical points")

    @property
    def n(self) -> int:
        return self.horizontal.n

    @property
    def ncomp(self) -> int:
        """Spatial dimension of the slab (horizontal + vertical)."""
        return self.n + 1

    @cached_property
    def x3(self) -> np.ndarray:
        """Vertical nodes, strictly decreasing from 0 to -b, endpoints included."""
        xi, _ = chebyshev_lobatto(self.M_v)
        return self.b * (xi - 1.0) / 2.0

    @cached_property
    def D3(self) -> np.ndarray:
        """Differentiation matrix in x3."""
        _, D = chebyshev_lobatto(self.M_v)
        return (2.0 / self.b) * D

    @cached_property
    def w3(self) -> np.ndarray:
        """Quadrature weights for int_{-b}^0 dx3 at the vertical nodes."""
        return clenshaw_curtis(self.M_v) * self.b / 2.0

    @cached_property
    def chi(self) -> np.ndarray:
        """Cutoff chi(x3) = 1 + x3/b: one on top, zero at the bottom."""
        return 1.0 + self.x3 / self.b


@dataclass(frozen=True)
class BulkField:
    """Real field on the strip; component axes lead, vertical axis is last."""

    dom: FlattenedDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expect_tail = self.dom.horizontal.shape + (self.dom.M_v,)
        if v.shape[-len(expect_tail):] != expect_tail:
            raise ValueError(f"bulk field shape {v.shape} does not end in {expect_tail}")
        if v.ndim - len(expect_tail) not in (0, 1, 2):
            raise ValueError("bulk fields are scalars, vectors, or matrices")
        object.__setattr__(self, "values", v)

    @property
    def rank(self) -> int:
        return self.values.ndim - self.dom.n - 1

    def __add__(self, other):
        return BulkField(self.dom, self.values + other.values)

    def __sub__(self, other):
        return BulkField(self.dom, self.values - other.values)

    def __mul__(self, scalar):
        return BulkField(self.dom, self.values * scalar)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# harmonic extension and geometric coefficients
# ---------------------------------------------------------------------------


def _extend_coeffs(eta: SpectralField, dom: FlattenedDomain) -> np.ndarray:
    """Spectral coefficients of E eta per vertical level, shape (*grid, Mv)."""
    grid = eta.grid
    kk = grid.wavevectors().astype(float)
    kmod = 2.0 * np.pi * np.sqrt(np.sum(kk**2, axis=0))
    return eta.coeffs[..., None] * np.exp(kmod[..., None] * dom.x3)


def harmonic_extension(eta: SpectralField, dom: FlattenedDomain) -> BulkField:
    """E eta: per-mode profile eta_hat(k) exp(2 pi |k| x3); constant for k = 0."""
    c = _extend_coeffs(eta, dom)
    axes = tuple(range(-1 - dom.n, -1))
    vals = np.fft.ifftn(c, axes=axes).real * eta.grid.npoints
    return BulkField(dom, vals)


@dataclass(frozen=True)
class GeometricCoefficients:
    """Flattening map data: Phi, J = det grad Phi, A = (grad Phi)^(-T), normals."""

    dom: FlattenedDomain
    Phi: BulkField            # mapped positions, (n+1, *grid, Mv)
    J: BulkField              # scalar Jacobian
    A: BulkField              # (n+1, n+1, *grid, Mv)
    grad_Phi: BulkField       # I + e3 x grad(chi E eta), (n+1, n+1, *grid, Mv)
    grad_chi_ext: BulkField   # grad(chi E eta), (n+1, *grid, Mv)
    nu_top: np.ndarray        # (-grad eta, 1) on the top boundary, (n+1, *grid)
    nu_bot: np.ndarray        # -e3
    min_j: float


def geometric_coefficients(
    eta: SpectralField, dom: FlattenedDomain, min_j_floor: float = 1e-6
) -> GeometricCoefficients:
    """All coefficients of Phi = id + chi (E eta) e3, exactly per mode.

    Raises DomainDegenerate if min J <= min_j_floor (the map would stop
    being a diffeomorphism, or A would blow up in tests).
    """
    n = dom.n
    nc = dom.ncomp
    ext = harmonic_extension(eta, dom).values
    ext_sq = harmonic_extension(sqrt_neg_laplacian(eta), dom).values
    chi = dom.chi

    grad = np.zeros((nc,) + ext.shape)
    for i in range(n):
        di = harmonic_extension(eta.derivative(tuple(1 if a == i else 0 for a in range(n))), dom)
        grad[i] = chi * di.values
    grad[n] = ext / dom.b + chi * ext_sq  # d3(chi E eta) = E eta / b + chi E sqrt(-lap) eta

    J = 1.0 + grad[n]
    min_j = float(np.min(J))
    if min_j <= min_j_floor:
        raise DomainDegenerate(min_j)

    A = np.zeros((nc, nc) + ext.shape)
    gP = np.zeros((nc, nc) + ext.shape)
    for i in range(nc):
        A[i, i] = 1.0
        gP[i, i] = 1.0
    for i in range(nc):
        A[i, n] -= grad[i] / J
        gP[n, i] += grad[i]

    x = dom.horizontal.nodes()
    phi = np.zeros((nc,) + ext.shape)
    for i in range(n):
        phi[i] = x[i][..., None]
    phi[n] = dom.x3 + chi * ext

    nu_top = np.zeros((nc,) + dom.horizontal.shape)
    for i in range(n):
        nu_top[i] = -eta.derivative(tuple(1 if a == i else 0 for a in range(n))).samples()
    nu_top[n] = 1.0
    nu_bot = np.zeros(nc)
    nu_bot[n] = -1.0

    return GeometricCoefficients(
        dom=dom,
        Phi=BulkField(dom, phi),
        J=BulkField(dom, J),
        A=BulkField(dom, A),
        grad_Phi=BulkField(dom, gP),
        grad_chi_ext=BulkField(dom, grad),
        nu_top=nu_top,
        nu_bot=nu_bot,
        min_j=min_j,
    )


# ---------------------------------------------------------------------------
# differential operators on bulk fields
# ---------------------------------------------------------------------------


def _horizontal_derivative(values: np.ndarray, dom: FlattenedDomain, axis: int) -> np.ndarray:
    """Spectral d/dx_axis per vertical level (axis < n)."""
    grid = dom.horizontal
    haxes = tuple(range(-1 - grid.n, -1))
    c = np.fft.fftn(values, axes=haxes)
    k1 = grid.axis_wavenumbers().astype(float)
    mult = 2j * np.pi * k1
    mult[grid.axis_wavenumbers() == grid.N // 2] = 0.0
    shape = [1] * values.ndim
    shape[haxes[axis]] = grid.N
    c = c * mult.reshape(shape)
    return np.fft.ifftn(c, axes=haxes).real


def _vertical_derivative(values: np.ndarray, dom: FlattenedDomain) -> np.ndarray:
    return np.einsum("ab,...b->...a", dom.D3, values)


def full_gradient(v: BulkField) -> BulkField:
    """grad v with components stacked first: (grad v)[i, ...] = d_i v[...]."""
    dom = v.dom
    nc = dom.ncomp
    out = np.zeros((nc,) + v.values.shape)
    for i in range(dom.n):
        out[i] = _horizontal_derivative(v.values, dom, i)
    out[dom.n] = _vertical_derivative(v.values, dom)
    return BulkField(dom, out)


def geo_gradient(v: BulkField, A: BulkField) -> BulkField:
    """A-gradient: (grad^A v)_ij = A_ik d_k v_j (vector v), or A_ik d_k v."""
    g = full_gradient(v).values
    if v.rank == 0:
        return BulkField(v.dom, np.einsum("ik...,k...->i...", A.values, g))
    if v.rank == 1:
        return BulkField(v.dom, np.einsum("ik...,kj...->ij...", A.values, g))
    raise ValueError("geo_gradient expects a scalar or vector field")


def geo_symgrad(v: BulkField, A: BulkField) -> BulkField:
    """D^A v = grad^A v + (grad^A v)^T."""
    G = geo_gradient(v, A).values
    return BulkField(v.dom, G + np.swapaxes(G, 0, 1))


def geo_divergence(v: BulkField, A: BulkField) -> BulkField:
    """div^A v = A_ij d_j v_i."""
    if v.rank != 1:
        raise ValueError("geo_divergence expects a vector field")
    g = full_gradient(v).values  # g[j, i] = d_j v_i
    return BulkField(v.dom, np.einsum("ij...,ji...->...", A.values, g))


# ---------------------------------------------------------------------------
# quadrature and integral identities
# ---------------------------------------------------------------------------


def bulk_integral(f: BulkField | np.ndarray, dom: FlattenedDomain | None = None) -> float:
    """Integral over the strip: horizontal mean times Clenshaw-Curtis in x3."""
    if isinstance(f, BulkField):
        dom = f.dom
        values = f.values
    else:
        values = np.asarray(f)
    per_level = values.mean(axis=tuple(range(values.ndim - 1 - dom.n, values.ndim - 1)))
    return float(np.tensordot(per_level, dom.w3, axes=([-1], [0])))


def surface_integral(values: np.ndarray) -> float:
    """Integral over one horizontal boundary (torus mean)."""
    return float(np.mean(values))


def piola_residual(eta: SpectralField, dom: FlattenedDomain) -> float:
    """Max norm of div(J A) over the grid (zero in the continuum).

    Computed from J A - I, whose divergence is the same; this keeps the
    flat-surface residual exactly zero instead of leaving the rounding of
    the differentiation-matrix row sums.
    """
    geo = geometric_coefficients(eta, dom)
    JA = geo.J.values * geo.A.values
    for i in range(dom.ncomp):
        JA[i, i] -= 1.0
    res = np.zeros((dom.ncomp,) + geo.J.values.shape)
    for i in range(dom.ncomp):
        for j in range(dom.n):
            res[i] += _horizontal_derivative(JA[i, j], dom, j)
        res[i] += _vertical_derivative(JA[i, dom.n], dom)
    return float(np.max(np.abs(res)))


def div_theorem_residual(v: BulkField, eta: SpectralField, dom: FlattenedDomain) -> float:
    """|int_Omega (div^A v) J - int_bdry v . nu^A| for the A-divergence theorem."""
    if v.rank != 1:
        raise ValueError("div_theorem_residual expects a vector field")
    geo = geometric_coefficients(eta, dom)
    volume = bulk_integral(BulkField(dom, geo_divergence(v, geo.A).values * geo.J.values))
    top = surface_integral(np.einsum("i...,i...->...", v.values[..., 0], geo.nu_top))
    bot = surface_integral(-v.values[dom.n, ..., -1])
    return float(abs(volume - (top + bot)))


def geo_energy(u: BulkField, eta: SpectralField, f: EnergyDensity, g: float) -> float:
    """Zeroth-order geometric energy: 1/2 int |u|^2 J + W(eta) + g/2 int eta^2."""
    dom = u.dom
    geo = geometric_coefficients(eta, dom)
    kinetic = 0.5 * bulk_integral(
        BulkField(dom, np.einsum("i...,i...->...", u.values, u.values) * geo.J.values)
    )
    surf = se.energy(f, eta)
    grav = 0.5 * g * float(np.mean(eta.samples() ** 2))
    return kinetic + surf + grav


def geo_dissipation(u: BulkField, eta: SpectralField) -> float:
    """Zeroth-order geometric dissipation: 1/2 int |D^A u|^2 J."""
    dom = u.dom
    geo = geometric_coefficients(eta, dom)
    Dv = geo_symgrad(u, geo.A).values
    return 0.5 * bulk_integral(
        BulkField(dom, np.einsum("ij...,ij...->...", Dv, Dv) * geo.J.values)
    )


def bulk_sobolev_norm(f: BulkField, s: int) -> float:
    """Integer-order H^s norm on the strip (all derivatives up to order s)."""
    if s < 0 or s != int(s):
        raise ValueError("bulk Sobolev norms are integer order only")
    dom = f.dom
    total = 0.0
    for order in range(s + 1):
        for multi in product(range(order + 1), repeat=dom.ncomp):
            if sum(multi) != order:
                continue
            d = f.values
            for axis in range(dom.n):
                for _ in range(multi[axis]):
                    d = _horizontal_derivative(d, dom, axis)
            for _ in range(multi[dom.ncomp - 1]):
                d = _vertical_derivative(d, dom)
            total += bulk_integral(BulkField(dom, np.sum(d * d, axis=tuple(range(f.rank)))))
    return float(np.sqrt(total))
