"""Fourier representation of mean-zero divergence-free velocity fields on the torus.

Fields live on the periodic box [0, 2*pi)^d (d = 2 or 3) and are stored as
complex Fourier-series coefficients on the integer wavevector lattice in
standard FFT layout, one coefficient array per velocity component.  Real
fields satisfy the conjugate symmetry ``coeff(-k) == conj(coeff(k))``.

Norms and inner products are evaluated spectrally (Parseval); physical-space
samples are materialised only for sup-norms and for the pointwise products
of the advection term.  All operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product as _iproduct

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "NormReport",
    "make_grid",
    "zero_field",
    "single_mode_field",
    "random_field",
    "hermitian_symmetrize",
    "leray_project",
    "apply_A",
    "apply_A_power",
    "galerkin_project",
    "galerkin_complement",
    "dealias",
    "norms",
    "sobolev_norm",
    "pairing",
    "to_physical",
    "from_physical",
    "gradient_physical",
    "sup_norm",
    "w1inf_norm",
    "hermitian_defect",
    "divergence_defect",
    "field_to_text",
    "field_from_text",
]


class TorusGrid:
    """Wavevector lattice of a d-dimensional periodic box, d in {2, 3}.

    ``N`` collocation points per axis (even, 4 <= N <= 512) give integer
    wavevectors k with components in [-N/2, N/2).  The sharp dealias mask
    keeps modes with ``|k_i| <= floor(dealias_fraction * N/2)`` on every
    axis; everything the quadratic term produces outside that box is
    discarded, which is what makes the discrete advection cancellation
    identity exact.

    Derived arrays (wavevector meshes, |k|^2, masks, mode ordering) are
    cached lazily so that grid construction stays O(N).
    """

    def __init__(self, d: int, N: int, dealias_fraction: float = 2.0 / 3.0):
        if d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {d}")
        if N % 2 != 0 or not 4 <= N <= 512:
            raise ValueError(
                f"resolution must be even with 4 <= N <= 512, got {N}"
            )
        if not 0.0 < dealias_fraction <= 1.0:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {dealias_fraction}")
        self.d = d
        self.N = N
        self.dealias_fraction = float(dealias_fraction)

    def __repr__(self) -> str:
        return f"TorusGrid(d={self.d}, N={self.N}, dealias_fraction={self.dealias_fraction:g})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TorusGrid)
            and (self.d, self.N, self.dealias_fraction)
            == (other.d, other.N, other.dealias_fraction)
        )

    def __hash__(self) -> int:
        return hash((self.d, self.N, self.dealias_fraction))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def field_shape(self) -> tuple[int, ...]:
        return (self.d,) + self.shape

    @cached_property
    def kvec(self) -> np.ndarray:
        """Per-axis integer wavevector values in FFT layout."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavevector meshes, shape (d,) + shape."""
        meshes = np.meshgrid(*([self.kvec] * self.d), indexing="ij")
        return np.stack(meshes)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @cached_property
    def k2_safe(self) -> np.ndarray:
        """|k|^2 with the origin replaced by 1 (safe divisor; k=0 content is zero)."""
        out = self.k2.copy()
        out[(0,) * self.d] = 1.0
        return out

    @property
    def dealias_cut(self) -> int:
        # capped below Nyquist: the lone +-N/2 slot is aliased, so a sharp
        # mask that includes it cannot define a truncated convolution
        return min(int(np.floor(self.dealias_fraction * self.N / 2)), self.N // 2 - 1)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.dealias_cut
        mask = np.ones(self.shape, dtype=bool)
        for axis_k in self.k:
            mask &= np.abs(axis_k) <= cut
        return mask

    @cached_property
    def nyquist_free_mask(self) -> np.ndarray:
        """True on modes with every |k_i| < N/2.

        The lone Nyquist slot aliases +N/2 and -N/2, so mixed Nyquist modes
        cannot carry a conjugate pair; projections are reflection-consistent
        (real fields stay real) only on this sublattice.  The dealias mask is
        strictly inside it.
        """
        mask = np.ones(self.shape, dtype=bool)
        for axis_k in self.k:
            mask &= np.abs(axis_k) < self.N // 2
        return mask

    @cached_property
    def _neg_axis_index(self) -> np.ndarray:
        return (-np.arange(self.N)) % self.N

    def reflect(self, arr: np.ndarray) -> np.ndarray:
        """Reindex the trailing d axes by k -> -k (mod N)."""
        out = arr
        for axis in range(arr.ndim - self.d, arr.ndim):
            out = np.take(out, self._neg_axis_index, axis=axis)
        return out

    # -- Galerkin mode ordering -------------------------------------------

    @cached_property
    def _mode_order(self) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero wavevectors sorted by (|k|^2, lexicographic k).

        Returns (flat storage indices in sorted order, eigenvalues |k|^2 sorted).
        """
        kflat = self.k.reshape(self.d, -1)
        k2flat = self.k2.ravel()
        # np.lexsort: last key is primary.
        keys = tuple(kflat[i] for i in reversed(range(self.d))) + (k2flat,)
        order = np.lexsort(keys)
        order = order[k2flat[order] > 0]  # drop the mean mode
        return order, k2flat[order]

    @property
    def mode_count(self) -> int:
        """Number of nonzero lattice wavevectors."""
        return self.N**self.d - 1

    def level_eigenvalue(self, n: int) -> float:
        """|k|^2 of the n-th retained wavevector (1-based count)."""
        if not 1 <= n <= self.mode_count:
            raise ValueError(f"level must lie in [1, {self.mode_count}], got {n}")
        return float(self._mode_order[1][n - 1])

    def level_mask(self, n: int) -> np.ndarray:
        """Boolean lattice mask retaining the n smallest-eigenvalue wavevectors."""
        if not 0 <= n <= self.mode_count:
            raise ValueError(f"level must lie in [0, {self.mode_count}], got {n}")
        flat = np.zeros(self.N**self.d, dtype=bool)
        flat[self._mode_order[0][:n]] = True
        return flat.reshape(self.shape)

    def level_is_conjugate_closed(self, n: int) -> bool:
        """Whether the level-n retained set is closed under k -> -k (mod N).

        Only closed levels map real fields to real fields; partial shells
        split conjugate pairs.
        """
        mask = self.level_mask(n)
        return bool(np.array_equal(self.reflect(mask), mask))


def make_grid(d: int, N: int, dealias_fraction: float = 2.0 / 3.0) -> TorusGrid:
    return TorusGrid(d, N, dealias_fraction)


@dataclass
class SpectralField:
    """Velocity field as complex Fourier coefficients, shape (d,) + (N,)*d."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        expected = self.grid.field_shape
        if self.coeffs.shape != expected:
            raise ValueError(
                f"coefficient array has shape {self.coeffs.shape}, expected {expected}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())


@dataclass(frozen=True)
class NormReport:
    """Norm suite of one field: L^2, gradient-L^2, Stokes, Sobolev, W^{1,inf}."""

    h: float
    v: float
    da: float
    hm: float
    w1inf: float
    m: int


def _check_same_grid(x: SpectralField, y: SpectralField) -> None:
    if x.grid != y.grid:
        raise ValueError("fields live on different grids")


# -- constructors ----------------------------------------------------------


def zero_field(grid: TorusGrid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.field_shape, dtype=np.complex128))


def _perpendicular_direction(k: np.ndarray) -> np.ndarray:
    """Deterministic real unit vector orthogonal to the wavevector k."""
    k = np.asarray(k, dtype=float)
    if k.shape[0] == 2:
        sigma = np.array([-k[1], k[0]])
    else:
        pivot = np.zeros(3)
        pivot[int(np.argmin(np.abs(k)))] = 1.0
        sigma = np.cross(k, pivot)
    nrm = np.linalg.norm(sigma)
    if nrm == 0:
        raise ValueError("wavevector must be nonzero")
    return sigma / nrm


def single_mode_field(
    grid: TorusGrid,
    k: tuple[int, ...],
    amplitude: float = 1.0,
    direction: np.ndarray | None = None,
) -> SpectralField:
    """Real field with a single conjugate mode pair: u(x) = 2*a*cos(k.x)*sigma.

    ``sigma`` defaults to a deterministic unit vector orthogonal to k, so the
    field is divergence-free.
    """
    kk = np.asarray(k, dtype=int)
    if kk.shape != (grid.d,):
        raise ValueError(f"wavevector must have {grid.d} components")
    if np.any(np.abs(kk) > grid.N // 2) or not np.any(kk):
        raise ValueError(f"wavevector {k} not representable on this grid")
    sigma = _perpendicular_direction(kk) if direction is None else np.asarray(direction, float)
    u = zero_field(grid)
    idx_pos = tuple(int(c) % grid.N for c in kk)
    idx_neg = tuple(int(-c) % grid.N for c in kk)
    for c in range(grid.d):
        u.coeffs[(c,) + idx_pos] += amplitude * sigma[c]
        u.coeffs[(c,) + idx_neg] += amplitude * sigma[c]
    return u


def hermitian_symmetrize(u: SpectralField) -> SpectralField:
    out = 0.5 * (u.coeffs + np.conj(u.grid.reflect(u.coeffs)))
    return SpectralField(u.grid, out)


def random_field(
    grid: TorusGrid,
    rng: np.random.Generator,
    decay: float = 2.0,
    v_norm: float | None = None,
) -> SpectralField:
    """Random real divergence-free dealiased field with |coeff| ~ |k|^(-decay).

    Optionally rescaled so that its gradient-L^2 norm equals ``v_norm``.
    """
    shape = grid.field_shape
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    amp = np.where(grid.k2 > 0, grid.k2_safe ** (-decay / 2.0), 0.0)
    u = SpectralField(grid, g * amp)
    u = hermitian_symmetrize(u)
    u = dealias(u)
    u = leray_project(u)
    u.coeffs[(slice(None),) + (0,) * grid.d] = 0.0
    if v_norm is not None:
        current = np.sqrt(_weighted_energy(u, u.grid.k2))
        if current == 0:
            raise ValueError("cannot rescale a zero field")
        u = SpectralField(grid, u.coeffs * (v_norm / current))
    return u


# -- linear operators ------------------------------------------------------


def leray_project(u: SpectralField) -> SpectralField:
    """Remove the gradient part: u_k -> u_k - k (k.u_k)/|k|^2; mean mode untouched.

    Commutes with conjugate symmetry on Nyquist-free content (every dealiased
    field); at mixed Nyquist modes the aliased +-N/2 slot has no conjugate
    partner, so realness is only guaranteed inside ``grid.nyquist_free_mask``.
    """
    g = u.grid
    dot = np.sum(g.k * u.coeffs, axis=0)
    out = u.coeffs - g.k * (dot / g.k2_safe)
    return SpectralField(g, out)


def apply_A(u: SpectralField, nu: float) -> SpectralField:
    """Dissipative operator: multiply each mode by nu*|k|^2."""
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    return SpectralField(u.grid, (nu * u.grid.k2) * u.coeffs)


def apply_A_power(u: SpectralField, alpha: float, nu: float = 1.0) -> SpectralField:
    """Fractional power: multiply each mode by (nu*|k|^2)^alpha.

    The mean mode is annihilated, so negative powers are well defined on
    mean-zero fields.
    """
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    g = u.grid
    mult = np.where(g.k2 > 0, (nu * g.k2_safe) ** alpha, 0.0)
    return SpectralField(g, mult * u.coeffs)


def galerkin_project(u: SpectralField, n: int) -> SpectralField:
    """Keep the n wavevectors of smallest |k|^2, ties broken lexicographically.

    The retained set is closed under conjugation only when n does not split
    a conjugate pair (``grid.level_is_conjugate_closed``); arbitrary n is
    legal for the projection itself.
    """
    mask = u.grid.level_mask(n)
    return SpectralField(u.grid, u.coeffs * mask)


def galerkin_complement(u: SpectralField, n: int) -> SpectralField:
    mask = u.grid.level_mask(n)
    return SpectralField(u.grid, u.coeffs * ~mask)


def dealias(u: SpectralField) -> SpectralField:
    return SpectralField(u.grid, u.coeffs * u.grid.dealias_mask)


# -- norms and pairings ----------------------------------------------------


def _weighted_energy(u: SpectralField, weights: np.ndarray | float) -> float:
    return float(np.sum(weights * np.abs(u.coeffs) ** 2).real)


def sobolev_norm(u: SpectralField, m: int) -> float:
    return float(np.sqrt(_weighted_energy(u, (1.0 + u.grid.k2) ** m)))


def sup_norm(u: SpectralField) -> float:
    """Max over collocation points of the pointwise Euclidean magnitude."""
    phys = to_physical(u)
    return float(np.max(np.sqrt(np.sum(phys**2, axis=0))))


def w1inf_norm(u: SpectralField) -> float:
    """Collocation surrogate of the W^{1,inf} norm: max|u| + max|grad u|."""
    grad = gradient_physical(u)
    grad_mag = np.sqrt(np.sum(grad**2, axis=(0, 1)))
    return sup_norm(u) + float(np.max(grad_mag))


def norms(u: SpectralField, m: int = 3) -> NormReport:
    g = u.grid
    return NormReport(
        h=float(np.sqrt(_weighted_energy(u, 1.0))),
        v=float(np.sqrt(_weighted_energy(u, g.k2))),
        da=float(np.sqrt(_weighted_energy(u, g.k2**2))),
        hm=sobolev_norm(u, m),
        w1inf=w1inf_norm(u),
        m=m,
    )


_PAIRING_KINDS = ("H", "V", "DA", "Hm")


def pairing(kind: str, x: SpectralField, y: SpectralField, m: int = 3) -> float:
    """Weighted spectral inner product: H, V, DA, or Hm (Sobolev order m)."""
    _check_same_grid(x, y)
    g = x.grid
    if kind == "H":
        w: np.ndarray | float = 1.0
    elif kind == "V":
        w = g.k2
    elif kind == "DA":
        w = g.k2**2
    elif kind == "Hm":
        w = (1.0 + g.k2) ** m
    else:
        raise ValueError(f"unknown pairing kind {kind!r}; expected one of {_PAIRING_KINDS}")
    return float(np.sum(w * np.real(x.coeffs * np.conj(y.coeffs))))


# -- physical transforms ---------------------------------------------------


def to_physical(u: SpectralField) -> np.ndarray:
    """Collocation samples u(x_j) with x_j = 2*pi*j/N; real part returned."""
    g = u.grid
    axes = tuple(range(1, g.d + 1))
    return np.real(np.fft.ifftn(u.coeffs, axes=axes)) * g.N**g.d


def from_physical(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    if values.shape != grid.field_shape:
        raise ValueError(
            f"physical array has shape {values.shape}, expected {grid.field_shape}"
        )
    axes = tuple(range(1, grid.d + 1))
    coeffs = np.fft.fftn(values, axes=axes) / grid.N**grid.d
    return SpectralField(grid, coeffs)


def gradient_physical(u: SpectralField) -> np.ndarray:
    """Physical samples of grad u, shape (d, d) + shape; entry [a, c] = d_a u_c."""
    g = u.grid
    axes = tuple(range(2, g.d + 2))
    dcoeffs = 1j * g.k[:, None] * u.coeffs[None, :]
    return np.real(np.fft.ifftn(dcoeffs, axes=axes)) * g.N**g.d


# -- diagnostics -----------------------------------------------------------


def hermitian_defect(u: SpectralField) -> float:
    """Max |coeff(k) - conj(coeff(-k))| relative to the largest coefficient."""
    scale = float(np.max(np.abs(u.coeffs)))
    if scale == 0:
        return 0.0
    defect = float(np.max(np.abs(u.coeffs - np.conj(u.grid.reflect(u.coeffs)))))
    return defect / scale


def divergence_defect(u: SpectralField) -> float:
    """Max over modes of |k.u_k| / (|k| |u_k|), zero modes skipped."""
    g = u.grid
    dot = np.abs(np.sum(g.k * u.coeffs, axis=0))
    mag = np.sqrt(g.k2) * np.sqrt(np.sum(np.abs(u.coeffs) ** 2, axis=0))
    mask = mag > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(dot[mask] / mag[mask]))


# -- text serialization ----------------------------------------------------


def field_to_text(u: SpectralField) -> str:
    """Serialize as 'd N' header plus one line per lattice mode.

    Modes are listed in lexicographic order of the integer wavevector, each
    line holding the wavevector followed by re/im pairs per component at 17
    significant digits (exact float64 round-trip).
    """
    g = u.grid
    lines = [f"{g.d} {g.N}"]
    axis_vals = range(-g.N // 2, g.N // 2)
    for ktuple in _iproduct(*([axis_vals] * g.d)):
        idx = tuple(c % g.N for c in ktuple)
        parts = [str(c) for c in ktuple]
        for comp in range(g.d):
            z = u.coeffs[(comp,) + idx]
            parts.append(f"{z.real:.17g}")
            parts.append(f"{z.imag:.17g}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def field_from_text(text: str, dealias_fraction: float = 2.0 / 3.0) -> SpectralField:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty field serialization")
    try:
        d, N = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise ValueError(f"malformed header {lines[0]!r}") from exc
    grid = TorusGrid(d, N, dealias_fraction)
    u = zero_field(grid)
    expected = N**d
    if len(lines) - 1 != expected:
        raise ValueError(f"expected {expected} mode lines, got {len(lines) - 1}")
    for ln in lines[1:]:
        toks = ln.split()
        if len(toks) != d + 2 * d:
            raise ValueError(f"malformed mode line {ln!r}")
        ktuple = tuple(int(t) for t in toks[:d])
        if any(not -N // 2 <= c < N // 2 for c in ktuple):
            raise ValueError(f"wavevector {ktuple} outside the N = {N} lattice")
        idx = tuple(c % N for c in ktuple)
        vals = [float(t) for t in toks[d:]]
        for comp in range(d):
            u.coeffs[(comp,) + idx] = complex(vals[2 * comp], vals[2 * comp + 1])
    return u
