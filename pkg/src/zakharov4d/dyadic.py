"""Littlewood-Paley calculus, Besov norms, the adapted frequency weight,
and the endpoint space-time norms used by the Strichartz probes.

The dyadic cutoff chi0 is built from a C^1 cosine-squared bump so the
partition of unity telescopes exactly; the dyadic range is clamped to the
grid's resolvable frequencies [rho_min, rho_max] and mass outside the
covered band is reported, never silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import (
    RadialField,
    RadialGrid,
    SPECTRAL,
    SPHERE_S3,
    FOURIER_NORM,
    lp_norm,
    to_spectral,
    transform,
)

DELTA_STAR = 3.0 / 7.0  # (d-1)/(2d-1) at d = 4


def bump_profile(t: np.ndarray) -> np.ndarray:
    """C^1 bump: 1 on t <= 1, cos^2(pi (t-1)/2) on 1 < t < 2, 0 beyond."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t <= 1.0] = 1.0
    mid = (t > 1.0) & (t < 2.0)
    out[mid] = np.cos(np.pi * (t[mid] - 1.0) / 2.0) ** 2
    return out


def chi0(x: np.ndarray) -> np.ndarray:
    """Annulus cutoff chi0 = bump(x) - bump(2x), supported in (1/2, 2)."""
    return bump_profile(x) - bump_profile(2.0 * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class DyadicCutoff:
    """Dyadic range 2^[kmin, kmax] resolvable on a grid, with profile chi0."""

    j_min: float
    j_max: float

    @classmethod
    def for_grid(cls, grid: RadialGrid) -> "DyadicCutoff":
        rho_min, rho_max = grid.rho_nodes[0], grid.rho_nodes[-1]
        # keep every j whose annulus (j/2, 2j) meets [rho_min, rho_max]
        kmin = int(np.floor(np.log2(rho_min)))
        kmax = int(np.ceil(np.log2(rho_max)))
        return cls(2.0**kmin, 2.0**kmax)

    def blocks(self) -> np.ndarray:
        kmin = int(round(np.log2(self.j_min)))
        kmax = int(round(np.log2(self.j_max)))
        return 2.0 ** np.arange(kmin, kmax + 1)


def dyadic_blocks(grid: RadialGrid) -> np.ndarray:
    return DyadicCutoff.for_grid(grid).blocks()


def lp_project(f: RadialField, j: float) -> RadialField:
    """P_j f = F^{-1}[chi0(rho/j) F f]; returns f's incoming space."""
    spec = to_spectral(f)
    cut = chi0(f.grid.rho_nodes / j)
    out = RadialField(f.grid, spec.values * cut, SPECTRAL)
    return out if f.space == SPECTRAL else transform(out)


def lp_project_spectral(spec_values: np.ndarray, grid: RadialGrid,
                        j: float) -> np.ndarray:
    return spec_values * chi0(grid.rho_nodes / j)


def coverage_defect(f: RadialField) -> float:
    """Relative spectral mass of f outside the grid's dyadic range."""
    spec = to_spectral(f)
    total = chi_partition_sum(f.grid)
    w = f.grid.quad_weights_rho
    out = np.sum(w * np.abs(spec.values * (1.0 - total)) ** 2)
    tot = np.sum(w * np.abs(spec.values) ** 2)
    return float(np.sqrt(out / tot)) if tot > 0 else 0.0


def chi_partition_sum(grid: RadialGrid) -> np.ndarray:
    """Sum of chi0(rho/j) over the grid's dyadic range (telescopes)."""
    blocks = dyadic_blocks(grid)
    rho = grid.rho_nodes
    return bump_profile(rho / blocks[-1]) - bump_profile(2.0 * rho / blocks[0])


def besov_norm(f: RadialField, s: float, p: float, q: float) -> float:
    """Homogeneous Besov norm (sum over the grid's dyadic range).

    (sum_j (j^s |P_j f|_p)^q)^{1/q}, with q = inf taking the sup.
    """
    if p < 1 or q < 1:
        raise ValueError(f"Besov exponents need p, q >= 1, got p={p}, q={q}")
    spec = to_spectral(f)
    return besov_from_spectrum(spec.values, f.grid, s, p, q,
                               dyadic_blocks(f.grid))


# -- frequency weight ---------------------------------------------------------


class SeparationError(ValueError):
    """Scale set too dense for the requested flatness beta."""


@dataclass(frozen=True)
class FrequencyWeight:
    """Piecewise log-linear frequency weight adapted to (beta, S).

    Flat plateaus w = sigma on [sigma/beta^2, beta^2 sigma] around each
    scale sigma in S, w = 1 below the lowest plateau, w = r/beta^2 beyond
    the highest, log-linear with exponent 1 + p(r) in between.
    """

    beta: float
    scales: tuple
    separation: float = dc_field(init=False, default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "separation", _separation(self.scales))

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r <= 0):
            raise ValueError("frequency weight is defined for r > 0")
        out = np.empty_like(r)
        b2 = self.beta**2
        S = np.array(self.scales)
        smax = S[-1]

        done = np.zeros(r.shape, dtype=bool)
        for sigma in S:
            on = (r >= sigma / b2) & (r <= b2 * sigma)
            out[on] = sigma
            done |= on

        rest = ~done
        low = rest & (r < S[0])
        out[low] = 1.0
        high = rest & (r > smax)
        out[high] = r[high] / b2
        mid = rest & ~low & ~high
        if np.any(mid):
            rm = r[mid]
            i = np.searchsorted(S, rm)
            s_lo = S[i - 1]
            s_hi = S[i]
            p = np.log(b2) / np.log(np.sqrt(s_hi / (self.beta**4 * s_lo)))
            out[mid] = rm * (rm / np.sqrt(s_hi * s_lo)) ** p
        return out[0] if scalar else out


def _separation(scales) -> float:
    S = np.asarray(scales, dtype=float)
    if len(S) < 2:
        return np.inf
    ratios = S[1:] / S[:-1]
    return float(ratios.min())


def build_weight(beta: float, scales) -> FrequencyWeight:
    """Validate (beta, S) and build the adapted weight.

    Requires beta > 1, 1 in S, S subset of [1, inf), and separation
    S-tilde > beta^4; violations name the offending pair.
    """
    if not beta > 1:
        raise ValueError(f"beta must exceed 1, got {beta}")
    S = np.array(sorted(set(float(s) for s in scales)))
    if len(S) == 0 or S[0] != 1.0:
        raise ValueError("scale set must contain 1 as its minimum")
    if np.any(S < 1.0):
        raise ValueError("scales must lie in [1, inf)")
    if len(S) > 1:
        ratios = S[1:] / S[:-1]
        worst = int(np.argmin(ratios))
        if ratios[worst] <= beta**4:
            raise SeparationError(
                f"scales {S[worst]:g} and {S[worst + 1]:g} have ratio "
                f"{ratios[worst]:g} <= beta^4 = {beta**4:g}")
    return FrequencyWeight(beta=float(beta), scales=tuple(S))


def weight_multiplier(f: RadialField, w: FrequencyWeight, s: float) -> RadialField:
    """sum_j w(j)^s P_j f over the grid's dyadic range."""
    spec = to_spectral(f)
    acc = np.zeros(f.grid.n, dtype=np.complex128)
    for j in dyadic_blocks(f.grid):
        acc += w(j) ** s * lp_project_spectral(spec.values, f.grid, j)
    out = RadialField(f.grid, acc, SPECTRAL)
    return out if f.space == SPECTRAL else transform(out)


# -- trajectories and space-time norms ---------------------------------------


@dataclass
class TrajectorySamples:
    """Time-sampled radial fields along one run (role: "u" or "N")."""

    times: np.ndarray
    fields: list
    role: str = "u"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.fields):
            raise ValueError("one field per sample instant required")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample times must be strictly increasing")
        grids = {f.grid for f in self.fields}
        if len(grids) > 1:
            raise ValueError("all trajectory fields must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.fields[0].grid

    def restricted(self, t0: float, t1: float) -> "TrajectorySamples":
        keep = (self.times >= t0) & (self.times <= t1)
        return TrajectorySamples(self.times[keep],
                                 [f for f, k in zip(self.fields, keep) if k],
                                 self.role)


def _sobolev_p(inv_half_shift: float) -> float:
    # 1/p = 1/2 + shift/4 on R^4
    inv = 0.5 + inv_half_shift / 4.0
    if inv <= 0:
        return np.inf
    return 1.0 / inv


def spacetime_norm_X(traj: TrajectorySamples, delta: float,
                     dual: bool = False) -> float:
    """Endpoint space-time norm of a sampled trajectory.

    dual=False: max( cL^inf_t L^2 , X^delta ) with
    X^delta = L^2_t Besov(delta, 2(delta-1), 2); the cL^inf norm square-sums
    per-dyadic-block sups (a lower bound of the continuum norm on discrete
    samples).  dual=True evaluates X^delta_* = L^2_t Besov(-delta, 2(1-delta), 2).
    Time integrals by trapezoid over the samples.
    """
    if not 0 <= delta < DELTA_STAR:
        raise ValueError(f"delta must lie in [0, {DELTA_STAR:.4f}), got {delta}")
    grid = traj.grid
    blocks = dyadic_blocks(grid)
    w = grid.quad_weights_rho
    spectra = [to_spectral(f).values for f in traj.fields]

    if dual:
        p = _sobolev_p(1.0 - delta)
        vals = np.array([besov_from_spectrum(sv, grid, -delta, p, 2.0, blocks)
                         for sv in spectra])
        return _l2_time(traj.times, vals)

    p = _sobolev_p(delta - 1.0)
    x_vals = np.array([besov_from_spectrum(sv, grid, delta, p, 2.0, blocks)
                       for sv in spectra])
    x_part = _l2_time(traj.times, x_vals)

    sup_sq = 0.0
    for j in blocks:
        cut = chi0(grid.rho_nodes / j)
        if not np.any(cut):
            continue
        block_l2 = [np.sqrt(SPHERE_S3 * FOURIER_NORM**-2
                            * np.sum(w * np.abs(sv * cut) ** 2))
                    for sv in spectra]
        sup_sq += max(block_l2) ** 2
    return max(x_part, float(np.sqrt(sup_sq)))


def besov_from_spectrum(spec_values: np.ndarray, grid: RadialGrid, s: float,
                        p: float, q: float, blocks: np.ndarray) -> float:
    terms = []
    for j in blocks:
        cut = spec_values * chi0(grid.rho_nodes / j)
        if not np.any(cut):
            continue
        piece = transform(RadialField(grid, cut, SPECTRAL))
        terms.append(j**s * lp_norm(piece, p))
    if not terms:
        return 0.0
    t = np.array(terms)
    return float(t.max()) if np.isinf(q) else float((t**q).sum() ** (1.0 / q))


def _l2_time(times: np.ndarray, values: np.ndarray) -> float:
    if len(times) == 1:
        return float(values[0])
    return float(np.sqrt(np.trapezoid(values**2, times)))
