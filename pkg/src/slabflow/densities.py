"""Surface energy densities f(p, M) and their exact derivative tensors.

A density acts on the jet of a height function: p stands for the gradient
(a vector in R^n) and M for the Hessian (a symmetric n x n matrix).  Every
built-in family has the bending form

    f(p, M) = 1/2 * w(p) * (C(p) : M)^2 + b(p)

with closed-form derivatives up to third order, assembled by the product
rule from the derivatives of the scalar weight w, the matrix form C, and
the gradient-only well b.  All evaluation routines are vectorized: p has
shape (..., n) and M has shape (..., n, n), where leading axes range over
grid points.

Derivative tensor layout (leading grid axes elided):
    grad  -> fp[k],            fM[i,j]
    hess  -> fpp[k,l],         fpM[k,i,j],        fMM[i,j,k,l]
    third -> fppp[k,l,m],      fppM[k,l,i,j],     fpMM[m,i,j,k,l],   fMMM[6 slots]

fpM[k,i,j] means d^2 f / dp_k dM_ij, and similarly for the rest; equality
of mixed partials makes any other slot order a transpose of these.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "EnergyDensity",
    "BendingDensity",
    "normalize_density",
    "area",
    "willmore",
    "scalar_willmore",
    "anisotropic",
    "combo",
    "DENSITY_FAMILIES",
]


# ---------------------------------------------------------------------------
# scalar families g(p) with derivatives to third order
# ---------------------------------------------------------------------------


class _Scalar:
    """Smooth scalar function of p with derivatives up to order three."""

    def value(self, p):
        raise NotImplementedError

    def d1(self, p):
        raise NotImplementedError

    def d2(self, p):
        raise NotImplementedError

    def d3(self, p):
        raise NotImplementedError


class PolyRadial(_Scalar):
    """c0 + c1 |p|^2."""

    def __init__(self, c0: float, c1: float = 0.0):
        self.c0 = float(c0)
        self.c1 = float(c1)

    def value(self, p):
        return self.c0 + self.c1 * np.sum(p**2, axis=-1)

    def d1(self, p):
        return 2.0 * self.c1 * p

    def d2(self, p):
        n = p.shape[-1]
        eye = np.eye(n)
        return np.broadcast_to(2.0 * self.c1 * eye, p.shape[:-1] + (n, n)).copy()

    def d3(self, p):
        n = p.shape[-1]
        return np.zeros(p.shape[:-1] + (n, n, n))


def _sym3_outer(delta, p):
    """delta_kl p_m + delta_km p_l + delta_lm p_k, shape (..., n, n, n)."""
    t = delta[..., :, :, None] * p[..., None, None, :]
    return t + np.swapaxes(t, -1, -2) + np.swapaxes(t, -1, -3)


class SqrtRadial(_Scalar):
    """scale * (sqrt(m0 + m1 |p|^2) + shift).

    With (m0, m1, shift) = (1, 1, -1) this is the area well
    sigma (sqrt(1 + |p|^2) - 1).
    """

    def __init__(self, m0: float, m1: float, scale: float = 1.0, shift: float = 0.0):
        if m0 <= 0:
            raise ValueError("m0 must be positive")
        self.m0, self.m1, self.scale, self.shift = float(m0), float(m1), float(scale), float(shift)

    def _v(self, p):
        return self.m0 + self.m1 * np.sum(p**2, axis=-1)

    def value(self, p):
        return self.scale * (np.sqrt(self._v(p)) + self.shift)

    def d1(self, p):
        v = self._v(p)
        return self.scale * self.m1 * p * v[..., None] ** -0.5

    def d2(self, p):
        n = p.shape[-1]
        v = self._v(p)[..., None, None]
        eye = np.eye(n)
        pp = p[..., :, None] * p[..., None, :]
        return self.scale * (self.m1 * eye * v**-0.5 - self.m1**2 * pp * v**-1.5)

    def d3(self, p):
        n = p.shape[-1]
        v = self._v(p)[..., None, None, None]
        eye = np.eye(n)
        sym = _sym3_outer(np.broadcast_to(eye, p.shape[:-1] + (n, n)), p)
        ppp = p[..., :, None, None] * p[..., None, :, None] * p[..., None, None, :]
        return self.scale * (-self.m1**2 * sym * v**-1.5 + 3.0 * self.m1**3 * ppp * v**-2.5)


class InvSqrtRadial(_Scalar):
    """scale * (m0 + m1 |p|^2)^(-1/2)."""

    def __init__(self, m0: float, m1: float, scale: float = 1.0):
        if m0 <= 0:
            raise ValueError("m0 must be positive")
        self.m0, self.m1, self.scale = float(m0), float(m1), float(scale)

    def _v(self, p):
        return self.m0 + self.m1 * np.sum(p**2, axis=-1)

    def value(self, p):
        return self.scale * self._v(p) ** -0.5

    def d1(self, p):
        v = self._v(p)
        return -self.scale * self.m1 * p * v[..., None] ** -1.5

    def d2(self, p):
        n = p.shape[-1]
        v = self._v(p)[..., None, None]
        eye = np.eye(n)
        pp = p[..., :, None] * p[..., None, :]
        return self.scale * (-self.m1 * eye * v**-1.5 + 3.0 * self.m1**2 * pp * v**-2.5)

    def d3(self, p):
        n = p.shape[-1]
        v = self._v(p)[..., None, None, None]
        eye = np.eye(n)
        sym = _sym3_outer(np.broadcast_to(eye, p.shape[:-1] + (n, n)), p)
        ppp = p[..., :, None, None] * p[..., None, :, None] * p[..., None, None, :]
        return self.scale * (3.0 * self.m1**2 * sym * v**-2.5 - 15.0 * self.m1**3 * ppp * v**-3.5)


# ---------------------------------------------------------------------------
# matrix families C(p) with derivatives to third order
# ---------------------------------------------------------------------------


class _Matrix:
    """Smooth symmetric-matrix function of p with derivatives to order three.

    Layout: value[i,j]; d1[i,j,k] = d C_ij / dp_k; d2[i,j,k,l]; d3[i,j,k,l,m].
    """

    def value(self, p):
        raise NotImplementedError

    def d1(self, p):
        raise NotImplementedError

    def d2(self, p):
        raise NotImplementedError

    def d3(self, p):
        raise NotImplementedError


class ConstMatrix(_Matrix):
    def __init__(self, C0):
        C0 = np.asarray(C0, dtype=float)
        if C0.ndim != 2 or C0.shape[0] != C0.shape[1]:
            raise ValueError("C0 must be a square matrix")
        if not np.allclose(C0, C0.T):
            raise ValueError("C0 must be symmetric")
        self.C0 = C0

    def value(self, p):
        n = self.C0.shape[0]
        return np.broadcast_to(self.C0, p.shape[:-1] + (n, n)).copy()

    def d1(self, p):
        n = self.C0.shape[0]
        return np.zeros(p.shape[:-1] + (n, n, n))

    def d2(self, p):
        n = self.C0.shape[0]
        return np.zeros(p.shape[:-1] + (n,) * 4)

    def d3(self, p):
        n = self.C0.shape[0]
        return np.zeros(p.shape[:-1] + (n,) * 5)


class TangentProjection(_Matrix):
    """G(p) = I - p otimes p / (1 + |p|^2), the inverse metric of a graph."""

    @staticmethod
    def _w_chain(p):
        # w = (1 + |p|^2)^(-1), with derivatives to third order
        u = 1.0 + np.sum(p**2, axis=-1)
        n = p.shape[-1]
        eye = np.eye(n)
        w = u**-1.0
        w1 = -2.0 * p * u[..., None] ** -2.0
        pp = p[..., :, None] * p[..., None, :]
        w2 = -2.0 * eye * u[..., None, None] ** -2.0 + 8.0 * pp * u[..., None, None] ** -3.0
        sym = _sym3_outer(np.broadcast_to(eye, p.shape[:-1] + (n, n)), p)
        ppp = p[..., :, None, None] * p[..., None, :, None] * p[..., None, None, :]
        w3 = 8.0 * sym * u[..., None, None, None] ** -3.0 - 48.0 * ppp * u[..., None, None, None] ** -4.0
        return w, w1, w2, w3

    def value(self, p):
        n = p.shape[-1]
        w, _, _, _ = self._w_chain(p)
        eye = np.eye(n)
        return eye - w[..., None, None] * p[..., :, None] * p[..., None, :]

    def d1(self, p):
        n = p.shape[-1]
        w, w1, _, _ = self._w_chain(p)
        eye = np.eye(n)
        pp = p[..., :, None] * p[..., None, :]
        # h_ij,k = w_k p_i p_j + w (delta_ik p_j + delta_jk p_i)
        h1 = pp[..., :, :, None] * w1[..., None, None, :]
        h1 += w[..., None, None, None] * (
            eye[:, None, :] * p[..., None, :, None] + eye[None, :, :] * p[..., :, None, None]
        )
        return -h1

    def d2(self, p):
        n = p.shape[-1]
        w, w1, w2, _ = self._w_chain(p)
        eye = np.eye(n)
        pp = p[..., :, None] * p[..., None, :]
        h2 = pp[..., :, :, None, None] * w2[..., None, None, :, :]
        h2 += np.einsum("...k,il,...j->...ijkl", w1, eye, p)
        h2 += np.einsum("...k,jl,...i->...ijkl", w1, eye, p)
        h2 += np.einsum("...l,ik,...j->...ijkl", w1, eye, p)
        h2 += np.einsum("...l,jk,...i->...ijkl", w1, eye, p)
        h2 += np.einsum("...,ik,jl->...ijkl", w, eye, eye)
        h2 += np.einsum("...,jk,il->...ijkl", w, eye, eye)
        return -h2

    def d3(self, p):
        n = p.shape[-1]
        w, w1, w2, w3 = self._w_chain(p)
        eye = np.eye(n)
        h3 = np.einsum("...i,...j,...klm->...ijklm", p, p, w3)
        h3 += np.einsum("...kl,im,...j->...ijklm", w2, eye, p)
        h3 += np.einsum("...kl,jm,...i->...ijklm", w2, eye, p)
        h3 += np.einsum("...km,il,...j->...ijklm", w2, eye, p)
        h3 += np.einsum("...km,jl,...i->...ijklm", w2, eye, p)
        h3 += np.einsum("...lm,ik,...j->...ijklm", w2, eye, p)
        h3 += np.einsum("...lm,jk,...i->...ijklm", w2, eye, p)
        h3 += np.einsum("...k,il,jm->...ijklm", w1, eye, eye)
        h3 += np.einsum("...k,jl,im->...ijklm", w1, eye, eye)
        h3 += np.einsum("...l,ik,jm->...ijklm", w1, eye, eye)
        h3 += np.einsum("...l,jk,im->...ijklm", w1, eye, eye)
        h3 += np.einsum("...m,ik,jl->...ijklm", w1, eye, eye)
        h3 += np.einsum("...m,jk,il->...ijklm", w1, eye, eye)
        return -h3


class IsotropicMatrix(_Matrix):
    """C(p) = s(p) I for a scalar family s."""

    def __init__(self, scalar: _Scalar, n: int):
        self.scalar = scalar
        self.n = n

    def value(self, p):
        eye = np.eye(self.n)
        return self.scalar.value(p)[..., None, None] * eye

    def d1(self, p):
        eye = np.eye(self.n)
        return np.einsum("ij,...k->...ijk", eye, self.scalar.d1(p))

    def d2(self, p):
        eye = np.eye(self.n)
        return np.einsum("ij,...kl->...ijkl", eye, self.scalar.d2(p))

    def d3(self, p):
        eye = np.eye(self.n)
        return np.einsum("ij,...klm->...ijklm", eye, self.scalar.d3(p))


# ---------------------------------------------------------------------------
# the density itself
# ---------------------------------------------------------------------------


def _as_jet_arrays(p, M):
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=float)
    if p.ndim == 0:
        p = p[None]
    if p.shape[-1] != M.shape[-1] or M.shape[-2] != M.shape[-1]:
        raise ValueError("incompatible jet shapes")
    return p, M


class EnergyDensity:
    """Interface: value / grad / hess / third plus a label.

    Subclasses must be normalized, f(0,0) = 0 and grad f(0,0) = 0; use
    `normalize_density` to strip the affine part of an arbitrary density.
    """

    name = "density"

    def value(self, p, M):
        raise NotImplementedError

    def grad(self, p, M):
        raise NotImplementedError

    def hess(self, p, M):
        raise NotImplementedError

    def third(self, p, M):
        raise NotImplementedError

    # -- convenience -------------------------------------------------------

    def at_origin(self, n: int):
        cache = getattr(self, "_origin_cache", None)
        if cache is None:
            cache = {}
            try:
                object.__setattr__(self, "_origin_cache", cache)
            except AttributeError:
                self._origin_cache = cache
        if n not in cache:
            p0 = np.zeros((1, n))
            M0 = np.zeros((1, n, n))
            f0 = float(self.value(p0, M0)[0])
            fp, fM = self.grad(p0, M0)
            fpp, fpM, fMM = self.hess(p0, M0)
            cache[n] = (f0, (fp[0], fM[0]), (fpp[0], fpM[0], fMM[0]))
        return cache[n]


class BendingDensity(EnergyDensity):
    """f(p, M) = 1/2 w(p) (C(p):M)^2 + b(p) with exact tensor derivatives."""

    def __init__(self, name, weight: _Scalar | None = None, form: _Matrix | None = None,
                 well: _Scalar | None = None):
        if (weight is None) != (form is None):
            raise ValueError("weight and form must be supplied together")
        self.name = name
        self.weight = weight
        self.form = form
        self.well = well

    # helper: everything the product rule needs at the given jets, up to the
    # requested derivative order of w and C
    def _pieces(self, p, M, order: int = 3):
        n = p.shape[-1]
        base = p.shape[:-1]
        if self.weight is None:
            zero = np.zeros(base)
            w = (zero, np.zeros(base + (n,)), np.zeros(base + (n, n)), np.zeros(base + (n, n, n)))
            Cv = np.zeros(base + (n, n))
            C = (Cv, np.zeros(base + (n,) * 3), np.zeros(base + (n,) * 4), np.zeros(base + (n,) * 5))
            c = (zero, np.zeros(base + (n,)), np.zeros(base + (n, n)), np.zeros(base + (n, n, n)))
            return w[:order + 1], C[:order + 1], c[:order + 1]
        w = [self.weight.value(p)]
        C = [self.form.value(p)]
        if order >= 1:
            w.append(self.weight.d1(p))
            C.append(self.form.d1(p))
        if order >= 2:
            w.append(self.weight.d2(p))
            C.append(self.form.d2(p))
        if order >= 3:
            w.append(self.weight.d3(p))
            C.append(self.form.d3(p))
        c = [np.einsum("...ij,...ij->...", C[0], M)]
        if order >= 1:
            c.append(np.einsum("...ijk,...ij->...k", C[1], M))
        if order >= 2:
            c.append(np.einsum("...ijkl,...ij->...kl", C[2], M))
        if order >= 3:
            c.append(np.einsum("...ijklm,...ij->...klm", C[3], M))
        return tuple(w), tuple(C), tuple(c)

    def value(self, p, M):
        p, M = _as_jet_arrays(p, M)
        w, _, c = self._pieces(p, M, order=0)
        out = 0.5 * w[0] * c[0] ** 2
        if self.well is not None:
            out = out + self.well.value(p)
        return out

    def grad(self, p, M):
        p, M = _as_jet_arrays(p, M)
        (w, w1), (Cv, _), (c, c1) = self._pieces(p, M, order=1)
        fp = 0.5 * w1 * (c**2)[..., None] + (w * c)[..., None] * c1
        if self.well is not None:
            fp = fp + self.well.d1(p)
        fM = (w * c)[..., None, None] * Cv
        return fp, fM

    def hess(self, p, M):
        p, M = _as_jet_arrays(p, M)
        (w, w1, w2), (Cv, C1, _), (c, c1, c2) = self._pieces(p, M, order=2)
        c2d = c[..., None, None]
        fpp = (
            0.5 * (c**2)[..., None, None] * w2
            + c2d * (w1[..., :, None] * c1[..., None, :] + w1[..., None, :] * c1[..., :, None])
            + w[..., None, None] * (c1[..., :, None] * c1[..., None, :] + c2d * c2)
        )
        if self.well is not None:
            fpp = fpp + self.well.d2(p)
        fpM = (
            np.einsum("...k,...ij->...kij", w1 * c[..., None], Cv)
            + np.einsum("...,...k,...ij->...kij", w, c1, Cv)
            + np.einsum("...,...ijk->...kij", w * c, C1)
        )
        fMM = np.einsum("...,...ij,...kl->...ijkl", w, Cv, Cv)
        return fpp, fpM, fMM

    def third(self, p, M):
        p, M = _as_jet_arrays(p, M)
        (w, w1, w2, w3), (Cv, C1, C2, _), (c, c1, c2, c3) = self._pieces(p, M)
        n = p.shape[-1]
        # fppp
        fppp = 0.5 * (c**2)[..., None, None, None] * w3
        fppp += c[..., None, None, None] * (
            np.einsum("...kl,...m->...klm", w2, c1)
            + np.einsum("...km,...l->...klm", w2, c1)
            + np.einsum("...lm,...k->...klm", w2, c1)
        )
        cc = np.einsum("...l,...m->...lm", c1, c1) + c[..., None, None] * c2
        fppp += (
            np.einsum("...k,...lm->...klm", w1, cc)
            + np.einsum("...l,...km->...klm", w1, cc)
            + np.einsum("...m,...kl->...klm", w1, cc)
        )
        fppp += w[..., None, None, None] * (
            np.einsum("...kl,...m->...klm", c2, c1)
            + np.einsum("...km,...l->...klm", c2, c1)
            + np.einsum("...lm,...k->...klm", c2, c1)
            + c[..., None, None, None] * c3
        )
        if self.well is not None:
            fppp = fppp + self.well.d3(p)
        # fppM[k,l,i,j] = d_k d_l (w c C_ij)
        fppM = (
            np.einsum("...kl,...,...ij->...klij", w2, c, Cv)
            + np.einsum("...l,...k,...ij->...klij", w1, c1, Cv)
            + np.einsum("...l,...,...ijk->...klij", w1, c, C1)
            + np.einsum("...k,...l,...ij->...klij", w1, c1, Cv)
            + np.einsum("...,...kl,...ij->...klij", w, c2, Cv)
            + np.einsum("...,...l,...ijk->...klij", w, c1, C1)
            + np.einsum("...k,...,...ijl->...klij", w1, c, C1)
            + np.einsum("...,...k,...ijl->...klij", w, c1, C1)
            + np.einsum("...,...ijkl->...klij", w * c, C2)
        )
        # fpMM[m,i,j,k,l] = d_m (w C_ij C_kl)
        fpMM = (
            np.einsum("...m,...ij,...kl->...mijkl", w1, Cv, Cv)
            + np.einsum("...,...ijm,...kl->...mijkl", w, C1, Cv)
            + np.einsum("...,...ij,...klm->...mijkl", w, Cv, C1)
        )
        fMMM = np.zeros(p.shape[:-1] + (n,) * 6)
        return fppp, fppM, fpMM, fMMM


class NormalizedDensity(EnergyDensity):
    """base(p, M) - base(0,0) - grad_p base(0,0).p - grad_M base(0,0):M."""

    def __init__(self, base: EnergyDensity, n: int):
        self.base = base
        self.name = f"normalized({getattr(base, 'name', 'density')})"
        self._n = n
        p0 = np.zeros((1, n))
        M0 = np.zeros((1, n, n))
        self._f0 = np.asarray(base.value(p0, M0))[0]
        fp0, fM0 = base.grad(p0, M0)
        self._fp0 = np.asarray(fp0)[0]
        self._fM0 = np.asarray(fM0)[0]

    def value(self, p, M):
        p, M = _as_jet_arrays(p, M)
        lin = np.einsum("k,...k->...", self._fp0, p) + np.einsum("ij,...ij->...", self._fM0, M)
        return self.base.value(p, M) - self._f0 - lin

    def grad(self, p, M):
        p, M = _as_jet_arrays(p, M)
        fp, fM = self.base.grad(p, M)
        return fp - self._fp0, fM - self._fM0

    def hess(self, p, M):
        return self.base.hess(p, M)

    def third(self, p, M):
        return self.base.third(p, M)


def normalize_density(raw: EnergyDensity, n: int = 2) -> EnergyDensity:
    """Strip the null-Lagrangian affine part so f(0,0) = 0, grad f(0,0) = 0."""
    return NormalizedDensity(raw, n)


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------


def area(sigma: float = 1.0) -> BendingDensity:
    """Surface tension: f = sigma (sqrt(1 + |p|^2) - 1)."""
    return BendingDensity(f"area({sigma:g})", well=SqrtRadial(1.0, 1.0, sigma, -1.0))


def willmore() -> BendingDensity:
    """Bending of a graph: f = 1/2 (1+|p|^2)^(-1/2) ((I - p p/(1+|p|^2)) : M)^2."""
    return BendingDensity("willmore", weight=InvSqrtRadial(1.0, 1.0, 1.0), form=TangentProjection())


def scalar_willmore(m0: float = 1.0, m1: float = 0.0, n: int = 2) -> BendingDensity:
    """f = 1/2 m(p) (tr M)^2 with m(p) = m0 + m1 |p|^2, m0 > 0."""
    if m0 <= 0:
        raise ValueError("m(0) must be positive")
    return BendingDensity(
        f"scalar-willmore(m0={m0:g},m1={m1:g})",
        weight=PolyRadial(m0, m1),
        form=ConstMatrix(np.eye(n)),
    )


def anisotropic(C0=None, m0: float = None, m1: float = None, n: int = 2) -> BendingDensity:
    """f = 1/2 (C(p) : M)^2.

    With a constant matrix C0 (positive definite at the origin) or, if m0/m1
    are given, with C(p) = sqrt(m0 + m1 |p|^2) I, which reproduces the
    scalar bending family.
    """
    if (C0 is None) == (m0 is None):
        raise ValueError("supply exactly one of C0 or (m0, m1)")
    if C0 is not None:
        C0 = np.asarray(C0, dtype=float)
        if np.any(np.linalg.eigvalsh(C0) <= 0):
            raise ValueError("C0 must be positive definite")
        return BendingDensity("anisotropic", weight=PolyRadial(1.0), form=ConstMatrix(C0))
    m1 = 0.0 if m1 is None else m1
    return BendingDensity(
        f"anisotropic(m0={m0:g},m1={m1:g})",
        weight=PolyRadial(1.0),
        form=IsotropicMatrix(SqrtRadial(m0, m1), n),
    )


def combo(alpha: float, beta: float) -> BendingDensity:
    """alpha * area(1) density + beta * willmore density (beta > 0)."""
    if beta <= 0:
        raise ValueError("bending coefficient beta must be positive")
    return BendingDensity(
        f"combo(alpha={alpha:g},beta={beta:g})",
        weight=InvSqrtRadial(1.0, 1.0, beta),
        form=TangentProjection(),
        well=SqrtRadial(1.0, 1.0, alpha, -1.0),
    )


def _build_from_params(params: dict, n: int = 2) -> EnergyDensity:
    params = dict(params)
    family = params.pop("family")
    if family == "area":
        return area(params.pop("sigma", 1.0))
    if family == "willmore":
        return willmore()
    if family == "scalar-willmore":
        return scalar_willmore(params.pop("m0", 1.0), params.pop("m1", 0.0), n=n)
    if family == "anisotropic":
        if "matrix" in params:
            return anisotropic(C0=params.pop("matrix"), n=n)
        return anisotropic(m0=params.pop("m0"), m1=params.pop("m1", 0.0), n=n)
    if family == "combo":
        return combo(params.pop("alpha"), params.pop("beta"))
    raise ValueError(f"unknown density family {family!r}")


DENSITY_FAMILIES = {
    "area": {"sigma"},
    "willmore": set(),
    "scalar-willmore": {"m0", "m1"},
    "anisotropic": {"matrix", "m0", "m1"},
    "combo": {"alpha", "beta"},
}
