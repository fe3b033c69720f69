"""Time integration of the truncated stochastic flow with optional cut-off.

The scheme is an integrating-factor Euler-Maruyama step: the dissipative
part is propagated by its exact per-mode exponential, the advection term and
the multiplicative noise are frozen at the left endpoint,

    u+ = exp(-nu |k|^2 dt) * [ u + dt * (-theta * B(u, u)) + theta * u * sum_j sigma_j dW_j ].

``theta`` is 1 when no cut-off is configured; otherwise it is a smooth
[0, 1]-valued function of either the gradient-norm distance to the exactly
advanced heat flow of the initial data, or of the W^{1,inf} norm of the
state.  Both the advection term and the noise are multiplied by the same
theta; the dissipative part is never cut.

Stopping events are detected on the time grid (first grid point at or after
the crossing); the running blow-up functional sup ||u||^2 + int |Au|^2 uses
trapezoidal quadrature on the sampled values.  Blow-up at desk scale is
operationalised as the gradient norm crossing ``overflow_guard``, reported
separately from non-finite arithmetic overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nonlinear import bilinear_B
from .noise import NoiseModel, WienerIncrement, sample_increment
from .spectral import NormReport, SpectralField, TorusGrid, norms, w1inf_norm

__all__ = [
    "SolverConfig",
    "CutoffConfig",
    "PathRecord",
    "EvolState",
    "CoupledReport",
    "heat_flow",
    "heat_flow_balance",
    "smooth_cutoff",
    "step",
    "evolve",
    "detect_sigma",
    "detect_blowup_level",
    "energy_functional",
    "coupled_evolve",
]

CUTOFF_V_DIST = "V-distance-to-heat-flow"
CUTOFF_W1INF = "W1inf"

STATUS_SURVIVED = "survived"
STATUS_STOPPED = "stopped"
STATUS_BLOWNUP = "blown-up"
STATUS_OVERFLOW = "overflow"

_NORM_KEYS = ("H", "V", "DA", "Hm", "W1inf")


@dataclass(frozen=True)
class CutoffConfig:
    kappa: float
    norm_kind: str = CUTOFF_V_DIST

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"cutoff radius kappa must be positive, got {self.kappa}")
        if self.norm_kind not in (CUTOFF_V_DIST, CUTOFF_W1INF):
            raise ValueError(
                f"norm_kind must be {CUTOFF_V_DIST!r} or {CUTOFF_W1INF!r}, got {self.norm_kind!r}"
            )


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    T: float
    n: int | None = None  # Galerkin level (wavevector count); None keeps all modes
    scheme: str = "exp-EM"
    cutoff: CutoffConfig | None = None
    overflow_guard: float = 1e6
    advection: bool = True

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"viscosity nu must be positive, got {self.nu}")
        if self.dt <= 0:
            raise ValueError(f"time step dt must be positive, got {self.dt}")
        if self.T <= 0 or self.dt > self.T:
            raise ValueError(f"horizon T must satisfy 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if self.n is not None and self.n < 1:
            raise ValueError(f"Galerkin level must be >= 1, got {self.n}")
        if self.scheme != "exp-EM":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.overflow_guard <= 0:
            raise ValueError("overflow_guard must be positive")


@dataclass
class PathRecord:
    """Sampled diagnostics of one trajectory."""

    t: np.ndarray
    h: np.ndarray
    v: np.ndarray
    da: np.ndarray
    hm: np.ndarray
    w1inf: np.ndarray
    theta: np.ndarray
    blowup: np.ndarray  # running sup ||u||^2 + trapezoid of |Au|^2
    status: str
    hits: dict[str, float] = field(default_factory=dict)
    m: int = 3

    def norm_series(self, kind: str) -> np.ndarray:
        table = {"H": self.h, "V": self.v, "DA": self.da, "Hm": self.hm, "W1inf": self.w1inf}
        if kind not in table:
            raise ValueError(f"unknown norm kind {kind!r}; expected one of {_NORM_KEYS}")
        return table[kind]

    def csv_text(self) -> str:
        lines = ["t,norm_h,norm_v,norm_da,norm_hm,norm_w1inf,theta,blowup_functional,status"]
        last = len(self.t) - 1
        for i in range(len(self.t)):
            status = self.status if i == last else "running"
            vals = (
                self.t[i], self.h[i], self.v[i], self.da[i],
                self.hm[i], self.w1inf[i], self.theta[i], self.blowup[i],
            )
            lines.append(",".join(f"{x:.17g}" for x in vals) + f",{status}")
        return "\n".join(lines) + "\n"


@dataclass
class EvolState:
    """Integrator state: time, truncated velocity field, exact heat flow companion."""

    t: float
    u: SpectralField
    ustar: SpectralField


# -- heat flow ---------------------------------------------------------------


def heat_flow(u0: SpectralField, t: float, nu: float) -> SpectralField:
    """Exact dissipative flow: each mode scaled by exp(-nu |k|^2 t)."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    return SpectralField(u0.grid, np.exp(-nu * u0.grid.k2 * t) * u0.coeffs)


def heat_flow_balance(u0: SpectralField, T: float, nu: float) -> dict:
    """Closed-form energy balance of the dissipative flow over [0, T].

    Returns, per mode sums: the L^2 energy drop and 2*nu*int ||grad u||^2 dt
    (equal), the gradient-energy drop and 2*nu*int |Au|^2 dt (equal), plus
    int |Au|^2 dt itself, which is bounded by ||u0||_V^2 / (2 nu).
    """
    g = u0.grid
    e = np.sum(np.abs(u0.coeffs) ** 2, axis=0)
    decay = -np.expm1(-2.0 * nu * g.k2 * T)  # 1 - exp(-2 nu |k|^2 T), accurate for small exponents
    drop_h = float(np.sum(e * decay))
    int_v = float(np.sum(e * decay) / (2.0 * nu))
    drop_v = float(np.sum(g.k2 * e * decay))
    int_da = float(np.sum(g.k2 * e * decay) / (2.0 * nu))
    return {
        "drop_h": drop_h,
        "two_nu_int_v": 2.0 * nu * int_v,
        "drop_v": drop_v,
        "two_nu_int_da": 2.0 * nu * int_da,
        "int_da": int_da,
    }


# -- cut-off -----------------------------------------------------------------


def smooth_cutoff(x, kappa: float):
    """Smooth transition from 1 (|x| <= kappa) to 0 (|x| >= 2 kappa).

    The ramp is psi(s) = f(s) / (f(s) + f(1 - s)) with f(s) = exp(-1/s) for
    s > 0 (else 0), evaluated at s = 2 - |x|/kappa; psi(1/2) = 1/2 by symmetry.
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    ax = np.abs(np.asarray(x, dtype=float))
    s = 2.0 - ax / kappa

    def f(val):
        out = np.zeros_like(val)
        pos = val > 0
        out[pos] = np.exp(-1.0 / val[pos])
        return out

    with np.errstate(over="ignore"):
        num = f(s)
        den = num + f(1.0 - s)
    ramp = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    result = np.where(ax <= kappa, 1.0, np.where(ax >= 2.0 * kappa, 0.0, ramp))
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(result)
    return result


# -- stepping ----------------------------------------------------------------


class _StepPlan:
    """Per-configuration precomputed arrays shared by every step of a path."""

    def __init__(self, grid: TorusGrid, cfg: SolverConfig, model: NoiseModel | None):
        self.grid = grid
        self.cfg = cfg
        self.exp_factor = np.exp(-cfg.nu * grid.k2 * cfg.dt)
        if cfg.n is None:
            self.pn_mask = None
            self.level = grid.mode_count
        else:
            if cfg.n > grid.mode_count:
                raise ValueError(
                    f"Galerkin level {cfg.n} exceeds mode count {grid.mode_count}"
                )
            if not grid.level_is_conjugate_closed(cfg.n):
                raise ValueError(
                    f"Galerkin level {cfg.n} splits a conjugate mode pair; "
                    "real dynamics requires a conjugate-closed level"
                )
            self.pn_mask = grid.level_mask(cfg.n)
            self.level = cfg.n
        self.sigma = np.asarray(model.sigma) if model is not None else np.zeros(0)

    def truncate(self, coeffs: np.ndarray) -> np.ndarray:
        if self.pn_mask is None:
            return coeffs
        return coeffs * self.pn_mask


def _theta_of(u: SpectralField, ustar: SpectralField, cfg: SolverConfig) -> float:
    if cfg.cutoff is None:
        return 1.0
    if cfg.cutoff.norm_kind == CUTOFF_V_DIST:
        diff = SpectralField(u.grid, u.coeffs - ustar.coeffs)
        x = float(np.sqrt(np.sum(u.grid.k2 * np.abs(diff.coeffs) ** 2)))
    else:
        x = w1inf_norm(u)
    return float(smooth_cutoff(x, cfg.cutoff.kappa))


def _leray_inplace(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    dot = np.sum(grid.k * coeffs, axis=0)
    return coeffs - grid.k * (dot / grid.k2_safe)


def _step_core(
    plan: _StepPlan,
    u: np.ndarray,
    ustar: np.ndarray,
    dW: np.ndarray,
    theta: float,
) -> tuple[np.ndarray, np.ndarray]:
    cfg = plan.cfg
    g = plan.grid
    drive = 1.0 + theta * float(np.dot(plan.sigma, dW)) if dW.size else 1.0
    if cfg.advection and theta != 0.0:
        bhat = plan.truncate(bilinear_B(SpectralField(g, u), SpectralField(g, u)).coeffs)
        unew = plan.exp_factor * (u * drive - cfg.dt * theta * bhat)
    else:
        unew = plan.exp_factor * (u * drive)
    unew = _leray_inplace(g, plan.truncate(unew))
    return unew, plan.exp_factor * ustar


def step(
    state: EvolState,
    cfg: SolverConfig,
    model: NoiseModel | None,
    inc: WienerIncrement,
) -> EvolState:
    """One integrating-factor Euler-Maruyama step from the given state."""
    if model is not None and inc.dW.shape != (model.K,):
        raise ValueError(f"increment has {inc.dW.shape[0]} directions, model has {model.K}")
    if abs(inc.dt - cfg.dt) > 1e-15 * max(cfg.dt, 1.0):
        raise ValueError("increment time step does not match the solver time step")
    plan = _StepPlan(state.u.grid, cfg, model)
    theta = _theta_of(state.u, state.ustar, cfg)
    unew, ustarnew = _step_core(plan, state.u.coeffs, state.ustar.coeffs, inc.dW, theta)
    return EvolState(
        t=state.t + cfg.dt,
        u=SpectralField(state.u.grid, unew),
        ustar=SpectralField(state.u.grid, ustarnew),
    )


def _v_norm_of(grid: TorusGrid, coeffs: np.ndarray) -> float:
    return float(np.sqrt(np.sum(grid.k2 * np.abs(coeffs) ** 2)))


def evolve(
    u0: SpectralField,
    cfg: SolverConfig,
    model: NoiseModel | None,
    rng: np.random.Generator | None = None,
    *,
    increments: np.ndarray | None = None,
    sample_every: int = 1,
    stop_level: tuple[str, float] | None = None,
    m: int = 3,
) -> PathRecord:
    """Integrate one path to the horizon or to a terminal event.

    ``increments`` may supply the full (steps, K) array of Wiener increments,
    which is how coarse levels of a common Brownian path are driven; otherwise
    increments are drawn from ``rng``.  ``stop_level = (kind, value)`` stops
    the path at the first sampled time whose named norm reaches the value.
    """
    g = u0.grid
    plan = _StepPlan(g, cfg, model)
    K = model.K if model is not None else 0
    steps = int(round(cfg.T / cfg.dt))
    if steps < 1:
        raise ValueError("horizon shorter than one step")
    if increments is not None:
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (steps, K):
            raise ValueError(f"increments must have shape ({steps}, {K})")
    elif K > 0 and rng is None:
        raise ValueError("an rng is required when the noise is active")

    u = _leray_inplace(g, plan.truncate(u0.coeffs.copy()))
    ustar = u.copy()

    ts: list[float] = []
    reports: list[NormReport] = []
    thetas: list[float] = []
    hits: dict[str, float] = {}
    status = STATUS_SURVIVED

    def sample(t: float, coeffs: np.ndarray, theta: float) -> NormReport:
        rep = norms(SpectralField(g, coeffs), m=m)
        ts.append(t)
        reports.append(rep)
        thetas.append(theta)
        return rep

    theta0 = _theta_of(SpectralField(g, u), SpectralField(g, ustar), cfg)
    rep = sample(0.0, u, theta0)
    stopped = False
    if stop_level is not None:
        kind, level = stop_level
        if _norm_value(rep, kind) >= level:
            hits["sigma"] = 0.0
            status = STATUS_STOPPED
            stopped = True

    i = 0
    while i < steps and not stopped:
        i += 1
        theta = _theta_of(SpectralField(g, u), SpectralField(g, ustar), cfg)
        dW = (
            increments[i - 1]
            if increments is not None
            else sample_increment(rng, cfg.dt, K).dW if K else np.zeros(0)
        )
        u, ustar = _step_core(plan, u, ustar, dW, theta)
        t = i * cfg.dt

        if not np.all(np.isfinite(u)):
            status = STATUS_OVERFLOW
            hits["overflow"] = t
            u = np.where(np.isfinite(u), u, 0.0)
            sample(t, u, theta)
            break
        vnorm = _v_norm_of(g, u)
        if vnorm > cfg.overflow_guard:
            status = STATUS_BLOWNUP
            hits["blow-up"] = t
            sample(t, u, theta)
            break

        take_sample = (i % sample_every == 0) or (i == steps)
        if stop_level is not None:
            kind, level = stop_level
            quick = vnorm if kind == "V" else None
            if quick is not None and quick >= level:
                sample(t, u, theta)
                hits["sigma"] = t
                status = STATUS_STOPPED
                break
            if quick is None and take_sample:
                rep = sample(t, u, theta)
                if _norm_value(rep, kind) >= level:
                    hits["sigma"] = t
                    status = STATUS_STOPPED
                    break
                continue
        if take_sample:
            sample(t, u, theta)

    t_arr = np.array(ts)
    v_arr = np.array([r.v for r in reports])
    da_arr = np.array([r.da for r in reports])
    blowup = _running_blowup(t_arr, v_arr, da_arr)
    return PathRecord(
        t=t_arr,
        h=np.array([r.h for r in reports]),
        v=v_arr,
        da=da_arr,
        hm=np.array([r.hm for r in reports]),
        w1inf=np.array([r.w1inf for r in reports]),
        theta=np.array(thetas),
        blowup=blowup,
        status=status,
        hits=hits,
        m=m,
    )


def _norm_value(rep: NormReport, kind: str) -> float:
    return {"H": rep.h, "V": rep.v, "DA": rep.da, "Hm": rep.hm, "W1inf": rep.w1inf}[kind]


def _running_blowup(t: np.ndarray, v: np.ndarray, da: np.ndarray) -> np.ndarray:
    """Running sup ||u||^2 plus trapezoidal integral of |Au|^2 on sample times."""
    sup_v2 = np.maximum.accumulate(v**2)
    integ = np.zeros_like(t)
    if len(t) > 1:
        seg = 0.5 * (da[1:] ** 2 + da[:-1] ** 2) * np.diff(t)
        integ[1:] = np.cumsum(seg)
    return sup_v2 + integ


# -- detectors ---------------------------------------------------------------


def detect_sigma(record: PathRecord, level: float, kind: str = "V") -> float | None:
    """First sampled time at which the chosen norm reaches the level."""
    if level <= 0:
        raise ValueError(f"level must be positive, got {level}")
    series = record.norm_series(kind)
    idx = np.nonzero(series >= level)[0]
    if idx.size == 0:
        return None
    return float(record.t[idx[0]])


def detect_blowup_level(record: PathRecord, level: float) -> float | None:
    """First sampled time at which sup ||u||^2 + int |Au|^2 reaches the level."""
    idx = np.nonzero(record.blowup >= level)[0]
    if idx.size == 0:
        return None
    return float(record.t[idx[0]])


def energy_functional(record: PathRecord, p: int = 2) -> float:
    """sup ||u||^p + int |Au|^2 ||u||^{p-2} dt over the recorded samples."""
    if p < 2:
        raise ValueError("exponent must be >= 2")
    sup_term = float(np.max(record.v**p)) if len(record.v) else 0.0
    integrand = record.da**2 * record.v ** (p - 2)
    return sup_term + float(np.trapezoid(integrand, record.t))


# -- two-solution coupling -----------------------------------------------------


@dataclass
class CoupledReport:
    t: np.ndarray
    w_v: np.ndarray  # ||difference||_V per sample
    sup_w_v: float
    int_da_w: float  # trapezoid of |A(difference)|^2
    xi_hit: float | None  # first time the two-solution functional reaches K
    status_a: str
    status_b: str


def coupled_evolve(
    u0a: SpectralField,
    u0b: SpectralField,
    cfg: SolverConfig,
    model: NoiseModel | None,
    rng: np.random.Generator | None = None,
    *,
    K_level: float | None = None,
    sample_every: int = 1,
    m: int = 3,
) -> CoupledReport:
    """Evolve two initial states under identical Wiener increments.

    Reports the gradient norm of the difference, its time integral of |A w|^2,
    and the first crossing of the two-solution functional
    sup(||u1||^2 + ||u2||^2) + int(||u1||^2 |Au1|^2 + ||u2||^2 |Au2|^2)
    at the configured level, when one is given.
    """
    if u0a.grid != u0b.grid:
        raise ValueError("fields live on different grids")
    g = u0a.grid
    plan = _StepPlan(g, cfg, model)
    K = model.K if model is not None else 0
    steps = int(round(cfg.T / cfg.dt))
    if K > 0 and rng is None:
        raise ValueError("an rng is required when the noise is active")

    ua = _leray_inplace(g, plan.truncate(u0a.coeffs.copy()))
    ub = _leray_inplace(g, plan.truncate(u0b.coeffs.copy()))
    usa, usb = ua.copy(), ub.copy()
    status_a = status_b = STATUS_SURVIVED

    def v_da(coeffs: np.ndarray) -> tuple[float, float]:
        e = np.sum(np.abs(coeffs) ** 2, axis=0)
        return float(np.sqrt(np.sum(g.k2 * e))), float(np.sqrt(np.sum(g.k2**2 * e)))

    ts = [0.0]
    wv, pair_v2, pair_int = [], [], []

    def push(a: np.ndarray, b: np.ndarray):
        w = a - b
        wv.append(v_da(w))
        va, daa = v_da(a)
        vb, dab = v_da(b)
        pair_v2.append(va**2 + vb**2)
        pair_int.append(va**2 * daa**2 + vb**2 * dab**2)

    push(ua, ub)
    for i in range(1, steps + 1):
        tha = _theta_of(SpectralField(g, ua), SpectralField(g, usa), cfg)
        thb = _theta_of(SpectralField(g, ub), SpectralField(g, usb), cfg)
        dW = sample_increment(rng, cfg.dt, K).dW if K else np.zeros(0)
        ua, usa = _step_core(plan, ua, usa, dW, tha)
        ub, usb = _step_core(plan, ub, usb, dW, thb)
        if not np.all(np.isfinite(ua)):
            status_a = STATUS_OVERFLOW
        if not np.all(np.isfinite(ub)):
            status_b = STATUS_OVERFLOW
        if status_a != STATUS_SURVIVED or status_b != STATUS_SURVIVED:
            break
        if (i % sample_every == 0) or (i == steps):
            ts.append(i * cfg.dt)
            push(ua, ub)

    t = np.array(ts)
    w_v = np.array([x[0] for x in wv])
    w_da = np.array([x[1] for x in wv])
    int_da_w = float(np.trapezoid(w_da**2, t)) if len(t) > 1 else 0.0

    xi_hit = None
    if K_level is not None:
        integrand = np.array(pair_int)
        integ = np.zeros(len(t))
        if len(t) > 1:
            integ[1:] = np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))
        functional = np.maximum.accumulate(np.array(pair_v2)) + integ
        idx = np.nonzero(functional >= K_level)[0]
        if idx.size:
            xi_hit = float(t[idx[0]])

    return CoupledReport(
        t=t,
        w_v=w_v,
        sup_w_v=float(np.max(w_v)) if len(w_v) else 0.0,
        int_da_w=int_da_w,
        xi_hit=xi_hit,
        status_a=status_a,
        status_b=status_b,
    )
