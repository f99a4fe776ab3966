"""Time evolution of the first-order Zakharov system on the radial grid.

One Strang step is

    half linear:  u <- e^{-i (dt/2) Lap} u,   N <- e^{i alpha (dt/2) D} N
    nonlinear:    N <- N - i dt D|u|^2,       u <- e^{-i dt Re N} u
    half linear again,

where the nonlinear substep is exact: |u| is constant during it, so D|u|^2
is a constant real field and Re N never changes while the source is added.
Every substep is a unitary spectral multiplier or a pointwise phase
rotation, which is what keeps the mass drift at transform roundoff over
10^4 steps.

Modes: "full" (everything on), "linear_potential" (wave source dropped: N
evolves freely, u still sees Re N), "free" (all nonlinearities off).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .grid import (
    PHYSICAL,
    RadialField,
    RadialGrid,
    SPHERE_S3,
    lp_norm,
    to_physical,
)
from .dyadic import TrajectorySamples, dyadic_blocks, spacetime_norm_X
from .variational import (
    ES_W_EXACT,
    MASS_THRESHOLD_EXACT,
    nehari_K,
    zakharov_energy,
)
from .grid import gradient_norm_sq

FULL = "full"
LINEAR_POTENTIAL = "linear_potential"
FREE = "free"

SCATTERING_LIKE = "scattering_like"
BLOWUP_LIKE = "blowup_like"
INCONCLUSIVE = "inconclusive"


@dataclass
class ZakharovState:
    """(u, N) fields in physical space plus the current time."""

    u: RadialField
    N: RadialField
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.N.grid:
            raise ValueError("u and N must share one grid")
        self.u = to_physical(self.u)
        self.N = to_physical(self.N)

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    def copy(self) -> "ZakharovState":
        return ZakharovState(self.u.copy(), self.N.copy(), self.t)


@dataclass
class IntegratorConfig:
    dt: float = 1e-3
    mode: str = FULL
    alpha: float = 1.0               # wave speed multiplier e^{i alpha t D}
    adaptive: bool = False
    dt_floor: float = 1e-7
    drift_tol: float = 1e-5          # per-step relative E_Z drift triggering a halving
    grad_ceiling_factor: float = 20.0
    sponge: bool = False
    sponge_strength: float = 5.0
    sponge_start_fraction: float = 0.8
    monitor_every: int = 10
    store_every: int = 0             # 0: no trajectory kept
    s_decay: float = 0.5             # s in the L^{2(-s)} scattering monitor
    r_local: float = 10.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.mode not in (FULL, LINEAR_POTENTIAL, FREE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.adaptive and self.dt_floor <= 0:
            raise ValueError("adaptive stepping needs a positive dt floor")


@dataclass
class RunLog:
    times: list = dc_field(default_factory=list)
    mass: list = dc_field(default_factory=list)
    energy_Z: list = dc_field(default_factory=list)
    grad_u: list = dc_field(default_factory=list)
    N_L2: list = dc_field(default_factory=list)
    u_L4: list = dc_field(default_factory=list)
    K_u: list = dc_field(default_factory=list)
    local_mass: list = dc_field(default_factory=list)
    u_decay_norm: list = dc_field(default_factory=list)
    dt_hist: list = dc_field(default_factory=list)
    sponge_active: bool = False
    events: list = dc_field(default_factory=list)
    traj_u: TrajectorySamples | None = None
    traj_N: TrajectorySamples | None = None
    final_state: ZakharovState | None = None

    def add_event(self, t: float, kind: str, detail: str = ""):
        self.events.append({"t": t, "kind": kind, "detail": detail})

    def has_event(self, kind: str) -> bool:
        return any(e["kind"] == kind for e in self.events)

    def as_rows(self):
        cols = zip(self.times, self.mass, self.energy_Z, self.grad_u,
                   self.N_L2, self.u_L4, self.K_u, self.local_mass,
                   self.u_decay_norm, self.dt_hist)
        return [row + (int(self.sponge_active),) for row in cols]


CSV_COLUMNS = ("t", "mass", "energy_Z", "grad_u_L2", "N_L2", "u_L4", "K_u",
               "local_mass", "u_L2ms", "dt_current", "sponge_active")


class _Propagator:
    """Precomputed multiplier phases and sponge profile for one (grid, cfg)."""

    def __init__(self, grid: RadialGrid, cfg: IntegratorConfig):
        self.grid = grid
        self.cfg = cfg
        self._cache = {}
        r = grid.r_nodes
        if cfg.sponge:
            from .grid import smooth_transition
            x = (r / grid.r_max - cfg.sponge_start_fraction) / (
                1.0 - cfg.sponge_start_fraction)
            self.sponge_profile = cfg.sponge_strength * smooth_transition(x)
        else:
            self.sponge_profile = None

    def phases(self, dt: float):
        key = dt
        if key not in self._cache:
            rho = self.grid.rho_nodes
            self._cache[key] = (np.exp(0.5j * dt * rho**2),
                                np.exp(0.5j * self.cfg.alpha * dt * rho))
        return self._cache[key]

    def linear_half(self, u: np.ndarray, N: np.ndarray, dt: float):
        ph_u, ph_N = self.phases(dt)
        both = self.grid.to_spectral_values(np.column_stack([u, N]))
        both[:, 0] *= ph_u
        both[:, 1] *= ph_N
        back = self.grid.to_physical_values(both)
        return back[:, 0], back[:, 1]

    def step_values(self, u: np.ndarray, N: np.ndarray, dt: float,
                    skip_sponge: bool = False):
        cfg = self.cfg
        u, N = self.linear_half(u, N, dt)
        if cfg.mode != FREE:
            # exact nonlinear substep: Re N is untouched by the source
            phase = np.exp(-1j * dt * N.real)
            if cfg.mode == FULL:
                w = np.abs(u) ** 2
                Dw = self.grid.to_physical_values(
                    self.grid.rho_nodes * self.grid.to_spectral_values(w))
                N = N - 1j * dt * Dw
            u = u * phase
        u, N = self.linear_half(u, N, dt)
        if self.sponge_profile is not None and not skip_sponge:
            damp = np.exp(-dt * self.sponge_profile)
            u = u * damp
            N = N * damp
        return u, N

    def apply_sponge(self, u: np.ndarray, N: np.ndarray, dt: float):
        if self.sponge_profile is None:
            return u, N
        damp = np.exp(-dt * self.sponge_profile)
        return u * damp, N * damp


class BlowupError(RuntimeError):
    """Step produced non-finite values."""


def step(state: ZakharovState, cfg: IntegratorConfig,
         dt: float | None = None) -> ZakharovState:
    """Advance one Strang step; raises BlowupError on non-finite output."""
    dt = cfg.dt if dt is None else dt
    prop = _Propagator(state.grid, cfg)
    u, N = prop.step_values(state.u.values, state.N.values, dt)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(N))):
        raise BlowupError(f"non-finite state at t={state.t + dt:g}")
    return ZakharovState(RadialField(state.grid, u),
                         RadialField(state.grid, N), state.t + dt)


def flow_energy(u: RadialField, N: RadialField, mode: str) -> float:
    """Conserved energy of the selected flow: E_Z in full mode, its
    quadratic part when the coupling is off (the cross term is not an
    invariant of the free flows)."""
    if mode == FULL:
        return zakharov_energy(u, N)
    return 0.5 * (gradient_norm_sq(u) + 0.5 * lp_norm(N, 2) ** 2)


def _monitor(log: RunLog, grid, u_vals, N_vals, t, dt, cfg):
    u = RadialField(grid, u_vals)
    N = RadialField(grid, N_vals)
    log.times.append(t)
    log.mass.append(lp_norm(u, 2) ** 2)
    log.energy_Z.append(flow_energy(u, N, cfg.mode))
    log.grad_u.append(np.sqrt(gradient_norm_sq(u)))
    log.N_L2.append(lp_norm(N, 2))
    log.u_L4.append(lp_norm(u, 4))
    log.K_u.append(nehari_K(u))
    inside = grid.r_nodes < cfg.r_local
    log.local_mass.append(np.sqrt(
        SPHERE_S3 * np.sum((grid.quad_weights_r * np.abs(u_vals) ** 2)[inside])))
    p = 1.0 / (0.5 - cfg.s_decay / 4.0)
    log.u_decay_norm.append(lp_norm(u, p))
    log.dt_hist.append(dt)


def run(state0: ZakharovState, cfg: IntegratorConfig, t_end: float,
        stop_when=None) -> RunLog:
    """Step to t_end (or a blow-up trip), logging every monitor_every steps.

    Adaptive mode halves dt whenever the single-step E_Z drift estimate
    exceeds cfg.drift_tol and trips blow-up when dt underflows or |grad u|
    exceeds the configured ceiling.  Errors become events, never raises.
    `stop_when(log) -> bool`, checked at monitor instants, allows early exit
    (verdict already established).
    """
    if t_end <= state0.t:
        raise ValueError("t_end must exceed the initial time")
    grid = state0.grid
    prop = _Propagator(grid, cfg)
    log = RunLog(sponge_active=cfg.sponge)
    u = state0.u.values.copy()
    N = state0.N.values.copy()
    t = state0.t
    dt = cfg.dt

    _monitor(log, grid, u, N, t, dt, cfg)
    e_prev = log.energy_Z[0]
    grad_ceiling = cfg.grad_ceiling_factor * max(log.grad_u[0], 1e-12)

    store = cfg.store_every > 0
    if store:
        times_s = [t]
        fields_u = [RadialField(grid, u.copy())]
        fields_N = [RadialField(grid, N.copy())]

    k = 0
    while t < t_end - 1e-12:
        dt_step = min(dt, t_end - t)
        nu, nN = prop.step_values(u, N, dt_step)
        finite = np.all(np.isfinite(nu)) and np.all(np.isfinite(nN))
        if cfg.adaptive and finite:
            u_field = RadialField(grid, nu)
            n_field = RadialField(grid, nN)
            e_new = flow_energy(u_field, n_field, cfg.mode)
            scale = max(abs(e_prev), 1e-12)
            if abs(e_new - e_prev) > cfg.drift_tol * scale:
                if dt / 2.0 < cfg.dt_floor:
                    log.add_event(t, "blowup", "dt underflow")
                    break
                dt = dt / 2.0
                continue
            e_prev = e_new
        if not finite:
            if cfg.adaptive and dt / 2.0 >= cfg.dt_floor:
                dt = dt / 2.0
                continue
            log.add_event(t, "blowup", "non-finite values")
            break
        u, N, t = nu, nN, t + dt_step
        k += 1
        if store and k % cfg.store_every == 0:
            times_s.append(t)
            fields_u.append(RadialField(grid, u.copy()))
            fields_N.append(RadialField(grid, N.copy()))
        if k % cfg.monitor_every == 0 or t >= t_end - 1e-12:
            _monitor(log, grid, u, N, t, dt_step, cfg)
            if log.grad_u[-1] > grad_ceiling:
                log.add_event(t, "blowup",
                              f"grad ceiling {grad_ceiling:.3g} exceeded")
                break
            if log.grad_u[-1] > 5.0 * log.grad_u[0]:
                if not log.has_event("grad_growth_5x"):
                    log.add_event(t, "grad_growth_5x",
                                  f"grad {log.grad_u[-1]:.3g}")
            if stop_when is not None and stop_when(log):
                log.add_event(t, "early_exit", "stop condition met")
                break

    if store:
        log.traj_u = TrajectorySamples(np.array(times_s), fields_u, "u")
        log.traj_N = TrajectorySamples(np.array(times_s), fields_N, "N")
    log.final_state = ZakharovState(RadialField(grid, u),
                                    RadialField(grid, N), t)
    return log


# -- decomposition of the wave component --------------------------------------


@dataclass
class WaveDecomposition:
    free: TrajectorySamples
    bilinear: TrajectorySamples
    duhamel: TrajectorySamples
    sup_L2_free: float
    sup_L2_bilinear: float
    sup_L2_duhamel: float


def decompose_N(traj_u: TrajectorySamples, traj_N: TrajectorySamples,
                iota: float, quad=None) -> WaveDecomposition:
    """Split N = N_F + N_N + N_D along a stored trajectory.

    N_N(t) = D Omega_tilde_iota(u, conj u); N_F propagates N(0) - N_N(0) by
    the free half-wave flow; N_D is the remainder (the Duhamel content).
    """
    from .grid import apply_multiplier, op_D
    from .normal_form import omega_tilde
    if not np.array_equal(traj_u.times, traj_N.times):
        raise ValueError("u and N trajectories must share sample times")
    grid = traj_u.grid
    t0 = traj_u.times[0]
    nn_fields = [op_D(omega_tilde(uf, uf.conj(), iota, quad))
                 for uf in traj_u.fields]
    seed = RadialField(grid,
                       traj_N.fields[0].values - nn_fields[0].values)
    nf_fields = [apply_multiplier(seed,
                                  np.exp(1j * (t - t0) * grid.rho_nodes))
                 for t in traj_u.times]
    nd_fields = [RadialField(grid, N.values - f.values - b.values)
                 for N, f, b in zip(traj_N.fields, nf_fields, nn_fields)]
    times = traj_u.times
    return WaveDecomposition(
        free=TrajectorySamples(times, nf_fields, "N_F"),
        bilinear=TrajectorySamples(times, nn_fields, "N_N"),
        duhamel=TrajectorySamples(times, nd_fields, "N_D"),
        sup_L2_free=max(lp_norm(f, 2) for f in nf_fields),
        sup_L2_bilinear=max(lp_norm(f, 2) for f in nn_fields),
        sup_L2_duhamel=max(lp_norm(f, 2) for f in nd_fields),
    )


# -- Strichartz probe ----------------------------------------------------------


def band_limited_unit_field(grid: RadialGrid, rng: np.random.Generator,
                            band=(0.2, 0.55)) -> RadialField:
    """Random band-limited field normalized to unit L^2."""
    from .grid import SPECTRAL, transform
    spec = np.zeros(grid.n, dtype=complex)
    i0, i1 = int(band[0] * grid.n), int(band[1] * grid.n)
    spec[i0:i1] = (rng.standard_normal(i1 - i0)
                   + 1j * rng.standard_normal(i1 - i0))
    f = transform(RadialField(grid, spec, SPECTRAL))
    return (1.0 / lp_norm(f, 2)) * f


def potential_from_family(grid: RadialGrid, family: dict,
                          rng: np.random.Generator | None = None) -> RadialField:
    """Initial wave datum V(0) for the probe families.

    kinds: "zero"; "gaussian_mass" (mass = target |V(0)|_2, width);
    "ground_state_squared" (lam: V = W_lam^2 with W_lam = lam W(lam x)).
    """
    kind = family.get("kind", "zero")
    if kind == "zero":
        return RadialField(grid, np.zeros(grid.n, dtype=complex))
    if kind == "gaussian_mass":
        width = family.get("width", 2.0)
        target = family["mass"]
        vals = np.exp(-grid.r_nodes**2 / (2 * width**2)).astype(complex)
        f = RadialField(grid, vals)
        return (target / lp_norm(f, 2)) * f
    if kind == "ground_state_squared":
        lam = family.get("lam", 1.0)
        from .variational import w_profile
        vals = (lam * w_profile(lam * grid.r_nodes)) ** 2
        return RadialField(grid, vals.astype(complex))
    raise ValueError(f"unknown potential family {kind!r}")


@dataclass
class ProbeEstimate:
    horizons: np.ndarray
    max_ratio: np.ndarray            # max over the ensemble at each horizon
    potential_mass: float


def strichartz_probe(grid: RadialGrid, family: dict, delta: float,
                     ensemble_size: int, horizons, rng: np.random.Generator,
                     dt: float = 0.02, alpha: float = 1.0,
                     store_every: int = 5) -> ProbeEstimate:
    """Empirical X~^delta / L^2 ratio growth profile.

    Evolves random unit-L^2 band-limited data under
    (i d/dt - Lap - Re V) u = 0 with V carried by the free wave flow
    (linear_potential mode), and reports the worst ratio at each horizon.
    """
    horizons = np.sort(np.asarray(horizons, dtype=float))
    V0 = potential_from_family(grid, family, rng)
    cfg = IntegratorConfig(dt=dt, mode=LINEAR_POTENTIAL, alpha=alpha,
                           store_every=store_every,
                           monitor_every=max(1, int(1.0 / dt)))
    worst = np.zeros(len(horizons))
    for _ in range(ensemble_size):
        u0 = band_limited_unit_field(grid, rng)
        log = run(ZakharovState(u0, V0, 0.0), cfg, float(horizons[-1]))
        for i, T in enumerate(horizons):
            restricted = log.traj_u.restricted(0.0, T)
            ratio = spacetime_norm_X(restricted, delta)  # |u(0)|_2 = 1
            worst[i] = max(worst[i], ratio)
    return ProbeEstimate(horizons=horizons, max_ratio=worst,
                         potential_mass=lp_norm(V0, 2))


# -- scattering diagnostics ----------------------------------------------------


@dataclass
class ScatteringVerdict:
    verdict: str
    detail: dict


def scattering_diagnostics(log: RunLog, decay_fraction: float = 0.5,
                           grad_growth_factor: float = 5.0) -> ScatteringVerdict:
    """Heuristic verdict from a completed run.

    scattering_like: the L^{2(-s)} norm and the local mass both fall below
    decay_fraction of their run maxima over the final quarter while |grad u|
    and |N|_2 stay bounded.  blowup_like: a blow-up event fired or |grad u|
    grew past grad_growth_factor times its initial value.  Otherwise
    inconclusive.  Infinite-time scattering is not decidable at desk scale;
    thresholds are configurable and reported.
    """
    t = np.asarray(log.times)
    grad = np.asarray(log.grad_u)
    detail = {"events": list(log.events)}
    if log.has_event("blowup") or (len(grad) and
                                   grad.max() >= grad_growth_factor * grad[0]):
        detail["grad_growth"] = float(grad.max() / max(grad[0], 1e-300))
        return ScatteringVerdict(BLOWUP_LIKE, detail)
    if len(t) < 8:
        return ScatteringVerdict(INCONCLUSIVE, detail)
    last_quarter = t >= t[0] + 0.75 * (t[-1] - t[0])
    decay = np.asarray(log.u_decay_norm)
    local = np.asarray(log.local_mass)
    decay_ratio = decay[last_quarter].max() / max(decay.max(), 1e-300)
    local_ratio = local[last_quarter].max() / max(local.max(), 1e-300)
    detail.update(decay_ratio=float(decay_ratio),
                  local_ratio=float(local_ratio),
                  grad_growth=float(grad.max() / max(grad[0], 1e-300)))
    bounded = grad.max() < grad_growth_factor * max(grad[0], 1e-300)
    if bounded and decay_ratio < decay_fraction and local_ratio < decay_fraction:
        return ScatteringVerdict(SCATTERING_LIKE, detail)
    return ScatteringVerdict(INCONCLUSIVE, detail)
