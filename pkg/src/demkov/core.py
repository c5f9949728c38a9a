"""Exact population inversion for the Demkov pulse with dephasing.

The Rabi frequency Omega(t) = Omega0 exp(-|t|/T) has a cusp at t = 0, so the
third-order equation for w(t) is solved separately on t <= 0 and t >= 0.

* t <= 0: w1(t) = -1F2(1/2+g; 1/2+g+id, 1/2+g-id; -w^2 e^{2t/T}), the only
  combination that tends to -1 at t -> -inf.
* t >= 0: w2(t) = A f1 + B f2 + C f3 with the three 1F2-based solutions of
  the mirrored equation; A, B, C follow from w, w', w'' at the cusp.

(g, d, w) are the reduced parameters T*Gamma/2, T*Delta/2, T*Omega0/2.  Powers
of the negative argument x = -w^2 e^{-2t/T} use (-r)^s = r^s e^{i pi s}
everywhere, so any complex phase cancels in the real w.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateParameterError,
    InversionUnavailableError,
    SingularSystemError,
)
from .specialfn import (
    DEFAULT_POLICY,
    EPS_DEGEN,
    GhfParams,
    PrecisionPolicy,
    ghf_1f2,
    ghf_1f2_derivative,
    principal_power,
)

TOL_REAL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs: detuning, peak Rabi frequency, pulse width, dephasing rate."""

    delta: float
    omega0: float
    t_width: float = 1.0
    gamma_deph: float = 0.0

    def __post_init__(self):
        for name in ("delta", "omega0", "t_width", "gamma_deph"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.t_width <= 0.0:
            raise ValueError(f"t_width must be positive, got {self.t_width}")
        if self.omega0 < 0.0:
            raise ValueError(f"omega0 must be nonnegative, got {self.omega0}")
        if self.gamma_deph < 0.0:
            raise ValueError(f"gamma_deph must be nonnegative, got {self.gamma_deph}")

    @classmethod
    def from_reduced(cls, gamma: float, delta: float, omega: float, t_width: float = 1.0) -> "ModelParams":
        return cls(
            delta=2.0 * delta / t_width,
            omega0=2.0 * omega / t_width,
            t_width=t_width,
            gamma_deph=2.0 * gamma / t_width,
        )

    def rabi(self, t: float) -> float:
        return self.omega0 * math.exp(-abs(t) / self.t_width)


@dataclass(frozen=True)
class ReducedParams:
    gamma: float
    delta: float
    omega: float
    t_width: float = 1.0

    @property
    def ghf_branch1(self) -> GhfParams:
        b1 = complex(0.5 + self.gamma, self.delta)
        return GhfParams(b1.real, b1, b1.conjugate())

    @property
    def ghf_branch2(self) -> GhfParams:
        """Base parameters of f1; f2 and f3 are its z^{1-b1}, z^{1-b2} partners."""
        b1 = complex(0.5 - self.gamma, -self.delta)
        return GhfParams(b1.real, b1, b1.conjugate())

    @property
    def is_resonant(self) -> bool:
        return abs(self.delta) <= EPS_DEGEN


def reduce(params: ModelParams) -> ReducedParams:
    half_t = 0.5 * params.t_width
    return ReducedParams(
        gamma=half_t * params.gamma_deph,
        delta=half_t * params.delta,
        omega=half_t * params.omega0,
        t_width=params.t_width,
    )


@dataclass(frozen=True)
class BlochVector:
    u: float
    v: float
    w: float
    source: str = "analytic"

    @property
    def norm_sq(self) -> float:
        return self.u * self.u + self.v * self.v + self.w * self.w


@dataclass(frozen=True)
class CuspState:
    w0: float
    w1dot: float
    w2dot_left: float
    w2dot_right: float


@dataclass(frozen=True)
class IntegrationConstants:
    a_plus: complex
    b_plus: complex
    c_plus: complex
    wronskian: complex


@dataclass(frozen=True)
class TimeSeries:
    times: list[float]
    states: list[BlochVector]

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")


# ---------------------------------------------------------------------------
# Basis functions in time
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisFunction:
    """t -> x(t)^s 1F2(inner; x(t)) with x(t) = -omega^2 exp(2 sign t / T).

    Derivatives use D = x d/dx, for which d/dt = (2 sign / T) D.
    """

    inner: GhfParams
    power: complex
    omega: float
    t_width: float
    sign: int
    policy: PrecisionPolicy = DEFAULT_POLICY

    def x(self, t: float) -> float:
        return -self.omega**2 * math.exp(2.0 * self.sign * t / self.t_width)

    def __call__(self, t: float, order: int = 2) -> tuple[complex, ...]:
        """(f, df/dt, d2f/dt2) truncated to ``order`` derivatives."""
        x = self.x(t)
        s = self.power
        g = ghf_1f2(self.inner, x, self.policy).value
        xs = principal_power(x, s) if s != 0 else 1.0
        out = [xs * g]
        if order == 0:
            return tuple(out)
        dg = x * ghf_1f2_derivative(self.inner, x, 1, self.policy).value
        rate = 2.0 * self.sign / self.t_width
        out.append(rate * xs * (s * g + dg))
        if order == 1:
            return tuple(out)
        d2g = x * x * ghf_1f2_derivative(self.inner, x, 2, self.policy).value + dg
        out.append(rate * rate * xs * (s * s * g + 2.0 * s * dg + d2g))
        return tuple(out)


@dataclass(frozen=True)
class FundamentalSet:
    f1: BasisFunction
    f2: BasisFunction
    f3: BasisFunction

    def __iter__(self):
        return iter((self.f1, self.f2, self.f3))

    def matrix(self, t: float) -> np.ndarray:
        """Rows (f, f', f''), columns f1, f2, f3."""
        return np.array([f(t) for f in self], dtype=complex).T


def branch1_function(rp: ReducedParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> BasisFunction:
    """w1 = -(this function) on t <= 0."""
    return BasisFunction(rp.ghf_branch1, 0j, rp.omega, rp.t_width, +1, policy)


def fundamental_set(rp: ReducedParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> FundamentalSet:
    if rp.is_resonant:
        raise DegenerateParameterError(
            f"|delta|={abs(rp.delta)} <= {EPS_DEGEN}: f2 and f3 coincide; use the resonant solution"
        )
    base = rp.ghf_branch2
    if base.degenerate:
        raise DegenerateParameterError(f"fundamental set invalid for {base}")
    a, b1, b2 = base.a1, base.b1, base.b2
    make = lambda inner, s: BasisFunction(inner, s, rp.omega, rp.t_width, -1, policy)
    return FundamentalSet(
        f1=make(base, 0j),
        f2=make(GhfParams(a + 1 - b1, 2 - b1, b2 + 1 - b1), 1 - b1),
        f3=make(GhfParams(a + 1 - b2, b1 + 1 - b2, 2 - b2), 1 - b2),
    )


# ---------------------------------------------------------------------------
# Branch 1 and the cusp
# ---------------------------------------------------------------------------

def w_branch1(rp: ReducedParams, t: float, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    """w(t) for t <= 0."""
    if t > 0:
        raise ValueError("w_branch1 is defined for t <= 0")
    return -branch1_function(rp, policy)(t, order=0)[0].real


def matching_at_cusp(rp: ReducedParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> CuspState:
    """w, w' and both one-sided w'' at t = 0.

    w'' jumps because w' = Omega v with v, v' continuous while dOmega/dt
    jumps by -2 Omega0/T: w''(0+) - w''(0-) = -(2/T) w'(0).
    """
    value, first, second = branch1_function(rp, policy)(0.0)
    w0, w1dot, w2_left = -value.real, -first.real, -second.real
    return CuspState(w0, w1dot, w2_left, w2_left - 2.0 / rp.t_width * w1dot)


# ---------------------------------------------------------------------------
# Branch 2 constants
# ---------------------------------------------------------------------------

def branch2_constants(cusp: CuspState, fs: FundamentalSet) -> IntegrationConstants:
    """Solve [f_i; f_i'; f_i''](0) (A, B, C)^T = (w, w', w''(0+))^T by pivoted LU."""
    m = fs.matrix(0.0)
    rhs = np.array([cusp.w0, cusp.w1dot, cusp.w2dot_right], dtype=complex)
    det = np.linalg.det(m)
    scale = float(np.prod(np.linalg.norm(m, axis=0)))
    if not abs(det) > 1e-12 * scale:
        raise SingularSystemError(f"matching system singular: |W|={abs(det):.3e}, scale={scale:.3e}")
    a, b, c = np.linalg.solve(m, rhs)
    return IntegrationConstants(complex(a), complex(b), complex(c), complex(det))


def cramer_constants(cusp: CuspState, fs: FundamentalSet) -> IntegrationConstants:
    """Same constants from the explicit determinant ratios."""
    m = fs.matrix(0.0)
    rhs = np.array([cusp.w0, cusp.w1dot, cusp.w2dot_right], dtype=complex)
    det = np.linalg.det(m)
    out = []
    for j in range(3):
        mj = m.copy()
        mj[:, j] = rhs
        out.append(complex(np.linalg.det(mj) / det))
    return IntegrationConstants(*out, complex(det))


# ---------------------------------------------------------------------------
# Assembled solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinalInversion:
    w_inf: float
    probability: float
    est_error: float
    route: str


@dataclass(frozen=True)
class DemkovSolution:
    """Analytic solution for one parameter set; immutable and shareable."""

    params: ModelParams
    rp: ReducedParams
    cusp: CuspState
    fs: FundamentalSet
    constants: IntegrationConstants
    policy: PrecisionPolicy = DEFAULT_POLICY
    route: str = "general"

    def w_complex(self, t: float, order: int = 0) -> tuple[complex, ...]:
        """w and its time derivatives before the real part is taken.

        At t = 0 the left branch is used (w, w' are continuous there).
        """
        if t <= 0.0:
            vals = branch1_function(self.rp, self.policy)(t, order)
            return tuple(-v for v in vals)
        k = self.constants
        cols = [f(t, order) for f in self.fs]
        return tuple(
            k.a_plus * cols[0][i] + k.b_plus * cols[1][i] + k.c_plus * cols[2][i]
            for i in range(order + 1)
        )

    def w(self, t: float) -> float:
        return self.w_complex(t)[0].real

    def w_derivatives(self, t: float) -> tuple[float, float, float]:
        return tuple(v.real for v in self.w_complex(t, 2))

    @property
    def w_inf(self) -> float:
        return self.constants.a_plus.real

    def final_inversion(self) -> FinalInversion:
        m = self.fs.matrix(0.0)
        scaled = m / np.linalg.norm(m, axis=0)
        cond = float(np.linalg.cond(scaled))
        err = abs(self.constants.a_plus.imag) + cond * max(self.policy.target_rel_error, 2.2e-16)
        w_inf = self.w_inf
        return FinalInversion(w_inf, 0.5 * (1.0 + w_inf), err, self.route)

    def bloch(self, t: float) -> BlochVector:
        """(u, v, w) from w and its derivatives by inverting the Bloch rows.

        v = w'/Omega and u = (v' + Gamma v + Omega w)/Delta, with
        v' = (w'' - kappa w')/Omega and kappa = dOmega/dt / Omega = -sign(t)/T.
        """
        return _bloch_from_derivatives(self.params, t, self.w_derivatives(t), resonant=False)


def _bloch_from_derivatives(
    params: ModelParams, t: float, derivs: tuple[float, float, float], resonant: bool
) -> BlochVector:
    w, w1, w2 = derivs
    rabi = params.rabi(t)
    if rabi == 0.0:
        raise InversionUnavailableError(f"Omega({t}) underflows to zero; v cannot be recovered from w")
    kappa = (1.0 if t <= 0.0 else -1.0) / params.t_width
    v = w1 / rabi
    if resonant:
        return BlochVector(0.0, v, w, source="resonant")
    v_dot = (w2 - kappa * w1) / rabi
    u = (v_dot + params.gamma_deph * v + rabi * w) / params.delta
    return BlochVector(u, v, w)


def solve(params: ModelParams, policy: PrecisionPolicy = DEFAULT_POLICY):
    """Build the analytic solution, routing near-resonant inputs to the resonant form."""
    rp = reduce(params)
    if rp.is_resonant:
        from .resonant import solve_resonant

        return solve_resonant(params, policy)
    cusp = matching_at_cusp(rp, policy)
    fs = fundamental_set(rp, policy)
    constants = branch2_constants(cusp, fs)
    return DemkovSolution(params, rp, cusp, fs, constants, policy)


def w_full(params: ModelParams, t: float, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    if params.omega0 == 0.0:
        return -1.0
    return solve(params, policy).w(t)


def w_infinity(params: ModelParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    return final_inversion(params, policy).w_inf


def final_inversion(params: ModelParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> FinalInversion:
    """w(+inf) = A+, the transition probability (1 + w(+inf))/2 and an error estimate."""
    if params.omega0 == 0.0:
        return FinalInversion(-1.0, 0.0, 0.0, "trivial")
    return solve(params, policy).final_inversion()


def bloch_from_w(
    params: ModelParams,
    t: float,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    solution=None,
) -> BlochVector:
    if params.omega0 == 0.0:
        return BlochVector(0.0, 0.0, -1.0, source="trivial")
    sol = solution if solution is not None else solve(params, policy)
    try:
        return sol.bloch(t)
    except InversionUnavailableError:
        return _oracle_fallback(params, t)


def _oracle_fallback(params: ModelParams, t: float) -> BlochVector:
    from .oracle import IntegratorConfig, integrate_bloch

    cfg = IntegratorConfig()
    lo = -cfg.t_start_factor * params.t_width
    hi = cfg.t_end_factor * params.t_width
    if t <= lo:
        return BlochVector(0.0, 0.0, -1.0, source="initial")
    if t > hi:
        raise InversionUnavailableError(f"t={t} beyond the oracle window [{lo}, {hi}]")
    state = integrate_bloch(params, cfg, [t]).states[0]
    return BlochVector(state.u, state.v, state.w, source="oracle")


def time_series(
    params: ModelParams,
    t_min: float,
    t_max: float,
    n_points: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> TimeSeries:
    if not t_min < t_max:
        raise ValueError("t_min must be below t_max")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    times = [float(t) for t in np.linspace(t_min, t_max, n_points)]
    sol: Optional[object] = None if params.omega0 == 0.0 else solve(params, policy)
    states = [bloch_from_w(params, t, policy, solution=sol) for t in times]
    return TimeSeries(times, states)
