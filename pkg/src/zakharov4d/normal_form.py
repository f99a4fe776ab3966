"""Bilinear frequency splittings and the normal-form kernel operators.

The high-low region HL_iota = {(j,k) dyadic : iota*j >= max(k, 2)} keeps the
resonant denominators

    omega_pm:    |xi|^2 -+ |xi - eta| - |eta|^2   ~  j^2,
    omega_tilde: |xi| - |xi - eta|^2 + |eta|^2    ~  1 + j^2 + k^2,

bounded away from zero, which is what buys the two-derivative gain.  Kernels
are evaluated by direct quadrature (grid nodes in |eta| times a Chebyshev
rule in the angle), preserving radial exactness at O(n^2 n_theta) cost.

The convolution carries the (2 pi)^{-4} normalization of this package's
Fourier convention so the operators compose consistently with pointwise
products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    FOURIER_NORM,
    PHYSICAL,
    RadialField,
    RadialGrid,
    SPECTRAL,
    lp_norm,
    to_physical,
    to_spectral,
    transform,
    zero_field,
)
from .dyadic import chi0, dyadic_blocks

OMEGA_PLUS = "omega_plus"
OMEGA_MINUS = "omega_minus"
OMEGA_TILDE = "omega_tilde"

DENOMINATOR_FLOOR = 1e-12

# blocks carrying less than this share of a factor's peak are transform
# round-trip noise (~1e-13) and are skipped by the kernel loops
LIVE_BLOCK_RTOL = 1e-12


class KernelError(RuntimeError):
    """Resonant denominator inside a restricted support: restriction bug."""


def _check_iota(iota: float):
    if not 0.0 < iota < 1.0:
        raise ValueError(f"iota must lie in (0, 1), got {iota}")


@dataclass(frozen=True)
class AngularQuadrature:
    """Gauss-Chebyshev (second kind) rule for the S^3 angular reduction.

    integral_{S^3} F(cos theta) dOmega = 4 pi * integral_{-1}^{1} F(c)
    sqrt(1 - c^2) dc; the rule is exact for polynomials in c up to degree
    2 n_theta - 1.
    """

    n_theta: int = 64

    @property
    def nodes(self) -> np.ndarray:
        i = np.arange(1, self.n_theta + 1)
        return np.cos(i * np.pi / (self.n_theta + 1))

    @property
    def weights(self) -> np.ndarray:
        i = np.arange(1, self.n_theta + 1)
        return (np.pi / (self.n_theta + 1)) * np.sin(i * np.pi / (self.n_theta + 1)) ** 2


# -- dyadic pair restrictions -------------------------------------------------


def hl_pairs(grid: RadialGrid, iota: float):
    """Dyadic pairs (j, k) in the grid's range with iota*j >= max(k, 2)."""
    _check_iota(iota)
    blocks = dyadic_blocks(grid)
    return [(float(j), float(k)) for j in blocks for k in blocks
            if iota * j >= max(k, 2.0)]


def hl_product(f: RadialField, g: RadialField, iota: float) -> RadialField:
    """(f, g)_{HL_iota} = sum over HL pairs of P_j f * P_k g (pointwise)."""
    _check_iota(iota)
    grid = f.grid
    fs = to_spectral(f).values
    gs = to_spectral(g).values
    rho = grid.rho_nodes
    f_scale = np.abs(fs).max() or 1.0
    g_scale = np.abs(gs).max() or 1.0
    out = np.zeros(grid.n, dtype=np.complex128)
    for j in dyadic_blocks(grid):
        if iota * j < 2.0:
            continue
        fj = fs * chi0(rho / j)
        if np.abs(fj).max() <= LIVE_BLOCK_RTOL * f_scale:
            continue
        low = np.zeros(grid.n)
        for k in dyadic_blocks(grid):
            if iota * j >= max(k, 2.0):
                low += chi0(rho / k)
        gk = gs * low
        if np.abs(gk).max() <= LIVE_BLOCK_RTOL * g_scale:
            continue
        fj_phys = grid.to_physical_values(fj)
        gk_phys = grid.to_physical_values(gk)
        out += fj_phys * gk_phys
    return RadialField(grid, out, PHYSICAL)


def lh_product(f: RadialField, g: RadialField, iota: float) -> RadialField:
    """(f, g)_{LH_iota} = f g - (f, g)_{HL_iota}."""
    prod = to_physical(f).values * to_physical(g).values
    hl = hl_product(f, g, iota)
    return RadialField(f.grid, prod - hl.values, PHYSICAL)


def hh_product(f: RadialField, g: RadialField, iota: float) -> RadialField:
    """Pairs with neither (j,k) nor (k,j) in HL_iota."""
    _check_iota(iota)
    grid = f.grid
    fs = to_spectral(f).values
    gs = to_spectral(g).values
    rho = grid.rho_nodes
    f_scale = np.abs(fs).max() or 1.0
    g_scale = np.abs(gs).max() or 1.0
    out = np.zeros(grid.n, dtype=np.complex128)
    for j in dyadic_blocks(grid):
        fj = fs * chi0(rho / j)
        if np.abs(fj).max() <= LIVE_BLOCK_RTOL * f_scale:
            continue
        low = np.zeros(grid.n)
        for k in dyadic_blocks(grid):
            if iota * j >= max(k, 2.0) or iota * k >= max(j, 2.0):
                continue
            low += chi0(rho / k)
        gk = gs * low
        if np.abs(gk).max() <= LIVE_BLOCK_RTOL * g_scale:
            continue
        out += grid.to_physical_values(fj) * grid.to_physical_values(gk)
    return RadialField(grid, out, PHYSICAL)


# -- kernel specifications ----------------------------------------------------


@dataclass(frozen=True)
class BilinearKernelSpec:
    """One of the three resonant-denominator kernels at separation iota."""

    kind: str
    iota: float

    def __post_init__(self):
        if self.kind not in (OMEGA_PLUS, OMEGA_MINUS, OMEGA_TILDE):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        _check_iota(self.iota)

    def denominator(self, rho, tau, sigma):
        """rho = |xi|, tau = |xi - eta|, sigma = |eta|."""
        if self.kind == OMEGA_PLUS:
            return rho**2 - tau - sigma**2
        if self.kind == OMEGA_MINUS:
            return rho**2 + tau - sigma**2
        return rho - tau**2 + sigma**2

    def pairs(self, grid: RadialGrid):
        """(k, l) block pairs: f carries block k, g carries block l."""
        base = hl_pairs(grid, self.iota)
        if self.kind == OMEGA_TILDE:
            sym = set(base) | {(l, k) for (k, l) in base}
            return sorted(sym)
        return base


def _interp_complex(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    re = np.interp(x, xp, fp.real, left=0.0, right=0.0)
    im = np.interp(x, xp, fp.imag, left=0.0, right=0.0)
    return re + 1j * im


def _low_mask(x: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Telescoped sum of chi0(x/l) over grid blocks mu <= l <= lam."""
    from .dyadic import bump_profile
    return bump_profile(x / lam) - bump_profile(2.0 * x / mu)


_OUT_CHUNK = 96


def apply_bilinear(spec: BilinearKernelSpec, f: RadialField, g: RadialField,
                   quad: AngularQuadrature | None = None) -> RadialField:
    """Evaluate the bilinear kernel operator, returning a physical field.

    Output spectrum at rho_m:
        (2 pi)^{-4} sum_{(k,l)} int f_k(|xi-eta|) g_l(|eta|) / den  d eta
    with the eta integral reduced to grid quadrature in sigma = |eta| and a
    Chebyshev rule in cos(theta).  The denominator is pair-independent, so
    the low-frequency side is telescoped into one bump-profile mask per
    high block instead of looping over individual (k, l) pairs.
    """
    quad = quad or AngularQuadrature()
    grid = f.grid
    fs = to_spectral(f).values
    gs = to_spectral(g).values
    f_scale = np.abs(fs).max()
    g_scale = np.abs(gs).max()
    if f_scale == 0.0 or g_scale == 0.0:
        return zero_field(grid)

    blocks = dyadic_blocks(grid)
    mu = blocks[0]
    iota = spec.iota
    out_spec = np.zeros(grid.n, dtype=np.complex128)

    def high_blocks_with_lam():
        for k in blocks:
            if iota * k < 2.0:
                continue
            lows = blocks[blocks <= iota * k]
            if lows.size:
                yield float(k), float(lows[-1])

    rho = grid.rho_nodes
    for k, lam in high_blocks_with_lam():
        # f carries the high block k, g the telescoped lows
        if np.abs(fs * chi0(rho / k)).max() > LIVE_BLOCK_RTOL * f_scale:
            f_cut = lambda tau, k=k: chi0(tau / k)
            g_vals = gs * _low_mask(rho, lam, mu)
            _accumulate(spec, grid, quad, out_spec, fs, g_vals,
                        g_scale, f_cut, tau_lo=k / 2.0, tau_hi=2.0 * k,
                        sigma_hi=2.0 * lam, label=f"k={k:g}")
        if spec.kind == OMEGA_TILDE and (
                np.abs(fs * _low_mask(rho, lam, mu)).max()
                > LIVE_BLOCK_RTOL * f_scale):
            # mirrored pairs (l, k): g carries the high block, f the lows
            f_cut = lambda tau, lam=lam: _low_mask(tau, lam, mu)
            g_vals = gs * chi0(rho / k)
            _accumulate(spec, grid, quad, out_spec, fs, g_vals,
                        g_scale, f_cut, tau_lo=0.0, tau_hi=2.0 * lam,
                        sigma_hi=2.0 * k, label=f"l={k:g} (mirrored)")

    out_spec *= FOURIER_NORM**-2                        # (2 pi)^{-4}
    return transform(RadialField(grid, out_spec, SPECTRAL))


def _accumulate(spec, grid, quad, out_spec, fs, g_vals, g_scale, f_cut,
                tau_lo, tau_hi, sigma_hi, label):
    rho = grid.rho_nodes
    live = np.nonzero(np.abs(g_vals) > LIVE_BLOCK_RTOL * g_scale)[0]
    if live.size == 0:
        return
    sigma = rho[live]
    g_w = g_vals[live] * grid.quad_weights_rho[live]
    # triangle inequality window for |xi| given the tau and sigma supports
    lo = max(tau_lo - sigma_hi, rho[0])
    hi = min(tau_hi + sigma_hi, rho[-1])
    sel = np.nonzero((rho >= lo) & (rho <= hi))[0]
    if sel.size == 0:
        return
    c = quad.nodes
    wc = quad.weights
    for start in range(0, sel.size, _OUT_CHUNK):
        idx = sel[start:start + _OUT_CHUNK]
        rr = rho[idx][:, None, None]
        ss = sigma[None, :, None]
        cc = c[None, None, :]
        tau = np.sqrt(np.maximum(rr**2 + ss**2 - 2.0 * rr * ss * cc, 0.0))
        cut = f_cut(tau)
        mask = cut > 0
        if not np.any(mask):
            continue
        fk_tau = np.zeros(tau.shape, dtype=np.complex128)
        fk_tau[mask] = cut[mask] * _interp_complex(tau[mask], rho, fs)
        den = spec.denominator(rr, tau, ss)
        if np.abs(den[mask]).min() < DENOMINATOR_FLOOR:
            raise KernelError(
                f"{spec.kind} denominator vanished on restricted support "
                f"({label})")
        integrand = np.where(mask, fk_tau / np.where(mask, den, 1.0), 0.0)
        angular = integrand @ wc                       # -> (chunk, n_sigma)
        out_spec[idx] += 4.0 * np.pi * (angular @ g_w)


def omega(f: RadialField, g: RadialField, iota: float,
          quad: AngularQuadrature | None = None) -> RadialField:
    """Omega_iota(f, g) = (1/2) Omega^+(f, g) + (1/2) Omega^-(conj f, g)."""
    plus = apply_bilinear(BilinearKernelSpec(OMEGA_PLUS, iota), f, g, quad)
    minus = apply_bilinear(BilinearKernelSpec(OMEGA_MINUS, iota),
                           to_physical(f).conj(), g, quad)
    return RadialField(f.grid, 0.5 * (plus.values + minus.values), PHYSICAL)


def omega_tilde(f: RadialField, g: RadialField, iota: float,
                quad: AngularQuadrature | None = None) -> RadialField:
    return apply_bilinear(BilinearKernelSpec(OMEGA_TILDE, iota), f, g, quad)


def normal_transform(u: RadialField, N: RadialField, iota1: float,
                     iota2: float, quad: AngularQuadrature | None = None):
    """Psi_{iota1,iota2}(u, N) = (u - Omega_{iota1}(N, u),
                                  N - D Omega_tilde_{iota2}(u, conj u))."""
    from .grid import op_D
    u_p, N_p = to_physical(u), to_physical(N)
    corr_u = omega(N_p, u_p, iota1, quad)
    corr_N = op_D(omega_tilde(u_p, u_p.conj(), iota2, quad))
    return (RadialField(u.grid, u_p.values - corr_u.values, PHYSICAL),
            RadialField(u.grid, N_p.values - corr_N.values, PHYSICAL))


class NonContractionError(RuntimeError):
    def __init__(self, factor):
        super().__init__(
            f"normal-form inversion is not contracting (factor {factor:.3g})")
        self.factor = factor


def normal_inverse(u_t: RadialField, N_t: RadialField, iota1: float,
                   iota2: float, max_iter: int = 30, tol: float = 1e-10,
                   quad: AngularQuadrature | None = None):
    """Invert Psi by fixed point (phi, psi) <- (u', N') + OmegaVec(phi, psi).

    Raises NonContractionError once the measured per-iteration contraction
    factor stays >= 1 for three consecutive iterations.
    """
    from .grid import op_D
    u_t, N_t = to_physical(u_t), to_physical(N_t)
    phi, psi = u_t.copy(), N_t.copy()
    scale = max(lp_norm(u_t, 2) + lp_norm(N_t, 2), 1e-300)
    prev_inc = None
    bad_streak = 0
    for iteration in range(max_iter):
        corr_u = omega(psi, phi, iota1, quad)
        corr_N = op_D(omega_tilde(phi, phi.conj(), iota2, quad))
        new_phi = RadialField(u_t.grid, u_t.values + corr_u.values)
        new_psi = RadialField(u_t.grid, N_t.values + corr_N.values)
        inc = (lp_norm(new_phi - phi, 2) + lp_norm(new_psi - psi, 2))
        phi, psi = new_phi, new_psi
        if inc / scale < tol:
            return phi, psi
        if prev_inc is not None and prev_inc > 0:
            factor = inc / prev_inc
            bad_streak = bad_streak + 1 if factor >= 1.0 else 0
            if bad_streak >= 3:
                raise NonContractionError(factor)
        prev_inc = inc
    raise NonContractionError(np.inf if prev_inc is None else 1.0)


def angular_convergence_defect(spec: BilinearKernelSpec, f: RadialField,
                               g: RadialField, n_theta: int = 64) -> float:
    """Relative change of the kernel output when the angle count doubles."""
    coarse = apply_bilinear(spec, f, g, AngularQuadrature(n_theta))
    fine = apply_bilinear(spec, f, g, AngularQuadrature(2 * n_theta))
    ref = lp_norm(fine, 2)
    if ref == 0:
        return 0.0
    return lp_norm(coarse - fine, 2) / ref
