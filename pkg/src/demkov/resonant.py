"""Resonant (Delta = 0) solution.

At resonance u decouples (du/dt = -Gamma u, hence u = 0 for a system that
starts in state 1) and (v, w) obey a second-order equation.  With
p = 1/2 + g and x(t) = -w^2 e^{-2t/T} the two solutions used on t >= 0 are

    f1r = 0F1(; 1-p; x)          -> 1 as t -> +inf
    f2r = x^p 0F1(; 1+p; x)      -> 0 as t -> +inf

i.e. f1 and f2 of the general solution at delta = 0.  When p is an integer
n, 0F1(; 1-n; x) does not exist; f1r is then replaced by the solution built
from Y_n, normalised to tend to 1 as well, so w(+inf) is always A+.

On t <= 0, w = -Gamma(p) (w e^{t/T})^{1-p} J_{p-1}(2 w e^{t/T}).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from .core import (
    BlochVector,
    CuspState,
    FinalInversion,
    ModelParams,
    ReducedParams,
    _bloch_from_derivatives,
    reduce,
)
from .errors import ConvergenceError, SingularSystemError
from .specialfn import (
    DEFAULT_POLICY,
    EPS_DEGEN,
    PrecisionPolicy,
    bessel_j,
    complex_gamma,
    ghf_0f1,
    principal_power,
    working_bits,
)


@dataclass(frozen=True)
class ResonantState:
    u_r: float
    v_r: float
    w_r: float


@dataclass(frozen=True)
class ResonantConstants:
    a_plus_r: float
    b_plus_r: complex
    wronskian2: complex


def _order(rp: ReducedParams) -> float:
    return 0.5 + rp.gamma


def _integer_order(p: float) -> int | None:
    n = round(p)
    return n if abs(p - n) <= EPS_DEGEN else None


def w_resonant_branch1(rp: ReducedParams, t: float, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    """w(t) for t <= 0 in the Bessel form."""
    if t > 0:
        raise ValueError("w_resonant_branch1 is defined for t <= 0")
    p = _order(rp)
    y = rp.omega * math.exp(t / rp.t_width)
    if y == 0.0:
        return -1.0
    return -complex_gamma(p).real * y ** (1.0 - p) * bessel_j(p - 1.0, 2.0 * y, policy)


def resonant_cusp(rp: ReducedParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> CuspState:
    """w, w' from the Bessel forms; w'' from the resonant Bloch rows.

    For t < 0, w'' = Omega' v + Omega v' = (1/T - Gamma) w' - Omega0^2 w, and
    w''(0+) = w''(0-) - (2/T) w'(0) as in the general case.
    """
    p = _order(rp)
    t_w = rp.t_width
    om = rp.omega
    if om == 0.0:
        return CuspState(-1.0, 0.0, 0.0, 0.0)
    w0 = -complex_gamma(p).real * om ** (1.0 - p) * bessel_j(p - 1.0, 2.0 * om, policy)
    w1 = 2.0 / (t_w * p) * complex_gamma(p + 1.0).real * om ** (2.0 - p) * bessel_j(p, 2.0 * om, policy)
    w2_left = (1.0 - 2.0 * rp.gamma) / t_w * w1 - (2.0 * om / t_w) ** 2 * w0
    return CuspState(w0, w1, w2_left, w2_left - 2.0 / t_w * w1)


# ---------------------------------------------------------------------------
# t >= 0 solutions
# ---------------------------------------------------------------------------

def _x(rp: ReducedParams, t: float) -> float:
    return -rp.omega**2 * math.exp(-2.0 * t / rp.t_width)


def _power_0f1(b: float, s: float, x: float, policy: PrecisionPolicy) -> tuple[complex, complex, complex]:
    """x^s 0F1(; b; x) and its first two D = x d/dx derivatives."""
    g = ghf_0f1(b, x, policy).value
    g1 = ghf_0f1(b + 1, x, policy).value / b
    g2 = ghf_0f1(b + 2, x, policy).value / (b * (b + 1))
    dg = x * g1
    d2g = x * x * g2 + dg
    xs = principal_power(x, s) if s != 0 else 1.0
    return xs * g, xs * (s * g + dg), xs * (s * s * g + 2 * s * dg + d2g)


def _log_solution(n: int, big_x: float, policy: PrecisionPolicy) -> tuple[float, float, float]:
    """Solution of X u'' + (1-n) u' + u = 0 with u(0) = 1, for integer n >= 1.

    u = -pi/(2^n (n-1)!) y^n Y_n(y), y = 2 sqrt(X); expanded,
    u = [sum_{k<n} (n-k-1)!/k! X^k
         + X^n sum_k (h_k - ln X) (-X)^k / (k! (n+k)!)] / (n-1)!
    with h_k = psi(k+1) + psi(n+k+1).  Returns (u, Du, D^2 u), D = X d/dX.
    """
    if big_x == 0.0:
        return 1.0, 0.0, 0.0
    bits = working_bits(big_x, policy)
    target = policy.target_rel_error
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        xx = mpfr(big_x)
        log_x = gmpy2.log(xx)
        s0 = mpfr(0)
        s1 = mpfr(0)
        s2 = mpfr(0)
        term = mpfr(1)
        for k in range(n):
            coef = mpfr(math.factorial(n - k - 1)) / math.factorial(k)
            piece = coef * term
            s0 += piece
            s1 += k * piece
            s2 += k * k * piece
            term *= xx
        # term == X^n
        euler = gmpy2.const_euler()
        harmonic_k = mpfr(0)
        harmonic_nk = sum(mpfr(1) / j for j in range(1, n + 1)) if n else mpfr(0)
        c = term / math.factorial(n)
        consecutive = 0
        k = 0
        while True:
            m = n + k
            h = harmonic_k + harmonic_nk - 2 * euler
            weight = h - log_x
            s0 += c * weight
            s1 += c * (m * weight - 1)
            s2 += c * (m * m * weight - 2 * m)
            k += 1
            harmonic_k += mpfr(1) / k
            harmonic_nk += mpfr(1) / (n + k)
            c = -c * xx / (k * (n + k))
            # geometric majorant for the tail; the log weight and the m^2 factor
            # of D^2 grow by at most a factor 2 per step once rho < 1/2
            rho = 2.0 * big_x / ((k + 1) * (n + k + 1))
            m = n + k
            tail = float(abs(c)) * (abs(float(weight)) + 2 * m + 4) * m * m
            tail = tail / (1.0 - rho) if rho < 1.0 else math.inf
            scale = max(abs(float(s0)), abs(float(s1)), abs(float(s2)))
            if tail <= target * scale:
                consecutive += 1
                if consecutive >= 3:
                    break
            else:
                consecutive = 0
            if k >= policy.max_terms:
                raise ConvergenceError(f"log-type resonant series not converged for X={big_x}")
        norm = math.factorial(n - 1)
        return float(s0) / norm, float(s1) / norm, float(s2) / norm


@dataclass(frozen=True)
class ResonantBasis:
    rp: ReducedParams
    policy: PrecisionPolicy = DEFAULT_POLICY

    def __call__(self, t: float) -> tuple[tuple[complex, complex, complex], tuple[complex, complex, complex]]:
        """((f1r, f1r', f1r''), (f2r, f2r', f2r'')) in time."""
        p = _order(self.rp)
        x = _x(self.rp, t)
        n = _integer_order(p)
        if n is None:
            first = _power_0f1(1.0 - p, 0.0, x, self.policy)
        else:
            first = _log_solution(n, -x, self.policy)
        second = _power_0f1(1.0 + p, p, x, self.policy)
        rate = -2.0 / self.rp.t_width
        to_time = lambda d: (d[0], rate * d[1], rate * rate * d[2])
        return to_time(first), to_time(second)


def resonant_constants(cusp: CuspState, basis: ResonantBasis) -> ResonantConstants:
    """A+ and B+ by Cramer's rule on the 2x2 system (w, w') at t = 0."""
    (f1, f1d, _), (f2, f2d, _) = basis(0.0)
    det = f1 * f2d - f2 * f1d
    scale = math.hypot(abs(f1), abs(f1d)) * math.hypot(abs(f2), abs(f2d))
    if not abs(det) > 1e-12 * scale:
        raise SingularSystemError(f"resonant Wronskian {det} vanishes")
    a = (cusp.w0 * f2d - f2 * cusp.w1dot) / det
    b = (f1 * cusp.w1dot - cusp.w0 * f1d) / det
    return ResonantConstants(complex(a).real, complex(b), complex(det))


@dataclass(frozen=True)
class ResonantSolution:
    params: ModelParams
    rp: ReducedParams
    cusp: CuspState
    basis: ResonantBasis
    constants: ResonantConstants
    policy: PrecisionPolicy = DEFAULT_POLICY
    route: str = "resonant"

    def w_derivatives(self, t: float) -> tuple[float, float, float]:
        if t <= 0.0:
            return self._branch1_derivatives(t)
        k = self.constants
        f1, f2 = self.basis(t)
        return tuple((k.a_plus_r * f1[i] + k.b_plus_r * f2[i]).real for i in range(3))

    def _branch1_derivatives(self, t: float) -> tuple[float, float, float]:
        rp = self.rp
        p = _order(rp)
        t_w = rp.t_width
        y = rp.omega * math.exp(t / t_w)
        if y == 0.0:
            return -1.0, 0.0, 0.0
        w = -complex_gamma(p).real * y ** (1.0 - p) * bessel_j(p - 1.0, 2.0 * y, self.policy)
        w1 = 2.0 / (t_w * p) * complex_gamma(p + 1.0).real * y ** (2.0 - p) * bessel_j(p, 2.0 * y, self.policy)
        rabi = 2.0 * y / t_w
        w2 = (1.0 - 2.0 * rp.gamma) / t_w * w1 - rabi * rabi * w
        return w, w1, w2

    def w(self, t: float) -> float:
        if t <= 0.0:
            return w_resonant_branch1(self.rp, t, self.policy)
        k = self.constants
        f1, f2 = self.basis(t)
        return (k.a_plus_r * f1[0] + k.b_plus_r * f2[0]).real

    def w_complex(self, t: float) -> complex:
        if t <= 0.0:
            return complex(w_resonant_branch1(self.rp, t, self.policy))
        k = self.constants
        f1, f2 = self.basis(t)
        return k.a_plus_r * f1[0] + k.b_plus_r * f2[0]

    @property
    def w_inf(self) -> float:
        return self.constants.a_plus_r

    def final_inversion(self) -> FinalInversion:
        (f1, f1d, _), (f2, f2d, _) = self.basis(0.0)
        scale = math.hypot(abs(f1), abs(f1d)) * math.hypot(abs(f2), abs(f2d))
        cond = scale / abs(self.constants.wronskian2)
        err = cond * max(self.policy.target_rel_error, 2.2e-16)
        w_inf = self.w_inf
        return FinalInversion(w_inf, 0.5 * (1.0 + w_inf), err, self.route)

    def bloch(self, t: float) -> BlochVector:
        return _bloch_from_derivatives(self.params, t, self.w_derivatives(t), resonant=True)

    def state(self, t: float) -> ResonantState:
        b = self.bloch(t)
        return ResonantState(b.u, b.v, b.w)


def solve_resonant(params: ModelParams, policy: PrecisionPolicy = DEFAULT_POLICY) -> ResonantSolution:
    """Resonant solution; the detuning of ``params`` is ignored (treated as 0)."""
    rp = reduce(params)
    rp = ReducedParams(rp.gamma, 0.0, rp.omega, rp.t_width)
    cusp = resonant_cusp(rp, policy)
    basis = ResonantBasis(rp, policy)
    constants = resonant_constants(cusp, basis)
    return ResonantSolution(params, rp, cusp, basis, constants, policy)


def w_resonant_full(params: ModelParams, t: float, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    if params.omega0 == 0.0:
        return -1.0
    return solve_resonant(params, policy).w(t)
