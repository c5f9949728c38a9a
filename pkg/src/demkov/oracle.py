"""Independent reference: adaptive integration of the Bloch equations.

Dormand-Prince 5(4) with local extrapolation and a standard PI-free step
controller.  Step boundaries are forced onto t = 0 (the cusp of Omega) and
onto every requested sample time, so no interpolation is involved in the
returned states and no step straddles the derivative discontinuity.

The integrator works on plain Python floats; a 3-component state is far
too small for numpy to pay off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import BlochVector, ModelParams
from .errors import StepLimitError, ToleranceNotMetError

# Butcher tableau (Dormand & Prince 1980)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# 5th-order minus embedded 4th-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_MIN_STEP_REL = 1e-14


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    t_start_factor: float = 40.0
    t_end_factor: float = 40.0
    max_steps: int = 1_000_000
    force_cusp: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.t_start_factor < 10 or self.t_end_factor < 10:
            raise ValueError("t_start_factor and t_end_factor must be >= 10")
        if self.max_steps < 1000:
            raise ValueError("max_steps must be >= 1000")


@dataclass(frozen=True)
class Trajectory:
    times: list[float]
    states: list[BlochVector]
    step_count: int
    max_est_local_error: float

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    @property
    def w(self) -> list[float]:
        return [s.w for s in self.states]


def _rhs(params: ModelParams):
    gam = params.gamma_deph
    dlt = params.delta
    om0 = params.omega0
    inv_t = 1.0 / params.t_width

    def f(t, u, v, w):
        om = om0 * math.exp(-abs(t) * inv_t)
        return (-gam * u - dlt * v, dlt * u - gam * v - om * w, om * v)

    return f


def _step(f, t, y, h, k1):
    """One DP5 step; returns (y_new, k7, error vector)."""
    ks = [k1]
    for i in range(1, 7):
        a = _A[i]
        yi = [y[j] + h * sum(a[m] * ks[m][j] for m in range(i)) for j in range(3)]
        ks.append(f(t + _C[i] * h, *yi))
    # stage 7 is evaluated at y_new (FSAL)
    y_new = [y[j] + h * sum(_B[m] * ks[m][j] for m in range(6)) for j in range(3)]
    err = [h * sum(_E[m] * ks[m][j] for m in range(7)) for j in range(3)]
    return y_new, ks[6], err


def integrate_bloch(
    params: ModelParams,
    cfg: IntegratorConfig = IntegratorConfig(),
    sample_times: Sequence[float] = (),
) -> Trajectory:
    """Integrate from (0, 0, -1) at -t_start_factor*T and report states at ``sample_times``."""
    t_width = params.t_width
    t0 = -cfg.t_start_factor * t_width
    t_end = cfg.t_end_factor * t_width
    samples = sorted(float(t) for t in sample_times)
    if samples and (samples[0] < t0 or samples[-1] > t_end):
        raise ValueError(f"sample times must lie within [{t0}, {t_end}]")
    if any(b <= a for a, b in zip(samples, samples[1:])):
        raise ValueError("sample times must be strictly increasing")

    stops = sorted(set(samples) | ({0.0} if cfg.force_cusp else set()))
    stops = [s for s in stops if s > t0]
    f = _rhs(params)

    t = t0
    y = [0.0, 0.0, -1.0]
    out_t: list[float] = []
    out_y: list[BlochVector] = []
    if samples and samples[0] == t0:
        out_t.append(t0)
        out_y.append(BlochVector(*y, source="oracle"))
    sample_set = set(samples)

    h = 0.01 * t_width
    steps = 0
    max_err = 0.0
    k1 = f(t, *y)
    stop_idx = 0
    while stop_idx < len(stops):
        target = stops[stop_idx]
        while t < target:
            if steps >= cfg.max_steps:
                raise StepLimitError(f"exceeded {cfg.max_steps} steps at t={t}")
            landing = target - t <= h * 1.0000001
            step = target - t if landing else h
            y_new, k7, err = _step(f, t, y, step, k1)
            scale_err = 0.0
            for j in range(3):
                sc = cfg.abs_tol + cfg.rel_tol * max(abs(y[j]), abs(y_new[j]))
                scale_err += (err[j] / sc) ** 2
            scale_err = math.sqrt(scale_err / 3.0)
            if scale_err <= 1.0:
                t = target if landing else t + step
                y = y_new
                k1 = k7
                steps += 1
                max_err = max(max_err, max(abs(e) for e in err))
                factor = _MAX_FACTOR if scale_err == 0 else min(
                    _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * scale_err ** -0.2)
                )
                if not landing:
                    h = step * factor
                elif factor < 1.0:
                    # a shortened landing step only ever lowers the natural step
                    h = min(h, step * factor)
            else:
                h = step * max(_MIN_FACTOR, _SAFETY * scale_err ** -0.2)
                if h < _MIN_STEP_REL * max(1.0, abs(t)) * t_width:
                    raise ToleranceNotMetError(f"step size underflow at t={t}")
        if target in sample_set:
            out_t.append(t)
            out_y.append(BlochVector(*y, source="oracle"))
        stop_idx += 1
        # the right-hand side is not smooth across t = 0: restart the FSAL stage
        if target == 0.0:
            k1 = f(t, *y)
    return Trajectory(out_t, out_y, steps, max_err)


def integrate_to_end(params: ModelParams, cfg: IntegratorConfig = IntegratorConfig()) -> BlochVector:
    t_end = cfg.t_end_factor * params.t_width
    return integrate_bloch(params, cfg, [t_end]).states[-1]


@dataclass(frozen=True)
class OracleFinal:
    w_inf: float
    tail_bound: float


def oracle_final(params: ModelParams, cfg: IntegratorConfig = IntegratorConfig()) -> OracleFinal:
    """w at t_end plus the bound |dw| <= integral of Omega over the discarded tail = Omega(t_end) T."""
    state = integrate_to_end(params, cfg)
    t_end = cfg.t_end_factor * params.t_width
    return OracleFinal(state.w, params.rabi(t_end) * params.t_width)


def oracle_w_infinity(params: ModelParams, cfg: IntegratorConfig = IntegratorConfig()) -> float:
    if params.omega0 == 0.0:
        return -1.0
    return oracle_final(params, cfg).w_inf


def sample_grid(t_min: float, t_max: float, n: int) -> list[float]:
    """n uniformly spaced times, endpoints included."""
    if n < 2:
        raise ValueError("need at least two samples")
    step = (t_max - t_min) / (n - 1)
    return [t_min + i * step for i in range(n - 1)] + [t_max]


def norms(traj: Trajectory) -> Iterable[float]:
    return (s.norm_sq for s in traj.states)
