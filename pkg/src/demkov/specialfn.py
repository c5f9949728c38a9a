"""Special functions needed by the Demkov solution.

The workhorse is the generalized hypergeometric function 1F2 evaluated by
its power series.  On the physics paths the argument is real, negative and
as large as |z| ~ 625; there the series terms grow to ~exp(2 sqrt|z|) before
decaying, so the partial sums are accumulated in software extended precision
(gmpy2/MPC) with a working precision chosen from |z|.  The result is rounded
back to a Python ``complex``.

Everything here is a pure function.  gmpy2 precision contexts are
thread-local, so concurrent calls do not interfere.
"""
from __future__ import annotations

import cmath
import enum
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpc

from .errors import (
    ConvergenceError,
    DegenerateParameterError,
    DomainError,
    PoleError,
)

EPS_DEGEN = 1e-8
POLE_TOL = 1e-12
_LOG10_E = math.log10(math.e)
_LOG2_10 = math.log2(10.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_PI = math.sqrt(math.pi)

# B_{2k} / (2k (2k-1)), k = 1..8
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)


def _near_integer(z: complex, tol: float) -> bool:
    return abs(z.imag) < tol and abs(z.real - round(z.real)) < tol


def _near_nonpositive_integer(z: complex, tol: float) -> bool:
    return z.real < 0.5 and _near_integer(z, tol)


def default_working_digits(abs_z: float) -> int:
    """Decimal digits for summing a series whose terms peak near exp(2 sqrt|z|).

    The floor can be raised through ``DEMKOV_PRECISION_DIGITS``.
    """
    floor = int(os.environ.get("DEMKOV_PRECISION_DIGITS", "20"))
    return floor + math.ceil(2.0 * math.sqrt(abs_z) * _LOG10_E) + 10


@dataclass(frozen=True)
class PrecisionPolicy:
    target_rel_error: float = 1e-16
    max_terms: int = 10_000
    z_switch: float = 1e4
    working_digits_fn: Callable[[float], int] = field(default=default_working_digits, compare=False)

    def __post_init__(self):
        if not 0.0 < self.target_rel_error < 1.0:
            raise ValueError(f"target_rel_error must lie in (0, 1), got {self.target_rel_error}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")
        if not self.z_switch > 0.0:
            raise ValueError(f"z_switch must be positive, got {self.z_switch}")


DEFAULT_POLICY = PrecisionPolicy()


class Method(str, enum.Enum):
    SERIES = "series"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class EvalResult:
    value: complex
    est_rel_error: float
    method: Method


@dataclass(frozen=True)
class GhfParams:
    """Parameters (a1; b1, b2) of 1F2."""

    a1: complex
    b1: complex
    b2: complex

    def __post_init__(self):
        for name in ("a1", "b1", "b2"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        for name in ("b1", "b2"):
            b = getattr(self, name)
            if _near_nonpositive_integer(b, POLE_TOL):
                raise PoleError(f"{name}={b} is a nonpositive integer; the 1F2 series is undefined")

    @property
    def degenerate(self) -> bool:
        """True when b1, b2 or b1-b2 is within EPS_DEGEN of an integer."""
        return (
            _near_integer(self.b1, EPS_DEGEN)
            or _near_integer(self.b2, EPS_DEGEN)
            or _near_integer(self.b1 - self.b2, EPS_DEGEN)
        )

    def shifted(self, n: int) -> "GhfParams":
        return GhfParams(self.a1 + n, self.b1 + n, self.b2 + n)

    @property
    def chi(self) -> complex:
        """Exponent of the oscillatory large-|z| term."""
        return 0.5 * (self.a1 - self.b1 - self.b2 + 0.5)


# ---------------------------------------------------------------------------
# Pochhammer symbol and gamma function
# ---------------------------------------------------------------------------

def pochhammer(alpha: complex, k: int) -> complex:
    """Rising factorial alpha (alpha+1) ... (alpha+k-1); equals 1 for k = 0."""
    if k < 0:
        raise ValueError("pochhammer needs k >= 0")
    out = complex(1.0)
    alpha = complex(alpha)
    for j in range(k):
        out *= alpha + j
    return out


def _log_gamma_right(z: complex) -> complex:
    # Shift into the Stirling region, then divide the shifts back out.
    acc = complex(1.0)
    while abs(z) < 18.0 or z.real < 8.0:
        acc *= z
        z += 1.0
    s = (z - 0.5) * cmath.log(z) - z + _HALF_LOG_2PI
    inv_z2 = 1.0 / (z * z)
    power = 1.0 / z
    for c in _STIRLING:
        s += c * power
        power *= inv_z2
    return s - cmath.log(acc)


def complex_gamma(z: complex) -> complex:
    """Gamma function on the complex plane.

    Stirling series after an upward shift, reflection for Re z < 1/2.
    Relative error stays below 1e-13 for |z| <= 50 away from the poles.
    """
    z = complex(z)
    if _near_nonpositive_integer(z, POLE_TOL):
        raise PoleError(f"gamma has a pole at {z}")
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * complex_gamma(1.0 - z))
    return cmath.exp(_log_gamma_right(z))


def _rgamma(z: complex) -> complex:
    """1/Gamma(z), zero at the poles."""
    if _near_nonpositive_integer(complex(z), POLE_TOL):
        return 0j
    return 1.0 / complex_gamma(z)


def principal_power(z: complex, s: complex) -> complex:
    """z**s on the principal branch, with (-r)**s = r**s exp(i pi s) for r > 0."""
    z = complex(z)
    s = complex(s)
    if z == 0:
        if s == 0:
            return 1 + 0j
        if s.real > 0:
            return 0j
        raise DomainError(f"0**{s} is undefined")
    if z.imag == 0.0 and z.real < 0.0:
        log_z = complex(math.log(-z.real), math.pi)
    else:
        log_z = cmath.log(z)
    return cmath.exp(s * log_z)


# ---------------------------------------------------------------------------
# Extended-precision hypergeometric series
# ---------------------------------------------------------------------------

def working_bits(abs_z: float, policy: PrecisionPolicy, extra_digits: int = 0) -> int:
    digits = max(policy.working_digits_fn(abs_z), math.ceil(-math.log10(policy.target_rel_error)) + 3)
    return int(math.ceil((digits + extra_digits) * _LOG2_10))


def _ratio_majorant(upper: Sequence[complex], lower: Sequence[complex], abs_z: float, k: int) -> float:
    """Bound on |t_{j+1}/t_j| valid for every j >= k, or inf if none is available yet."""
    bound = abs_z / (k + 1.0)
    for b in lower:
        denom = k + b.real
        if denom <= 0.0:
            return math.inf
        bound /= denom
    for a in upper:
        # (|a| + j) / (j + 1) is monotone in j and tends to 1.
        bound *= max(1.0, (abs(a) + k) / (k + 1.0))
    return bound


def hyp_series(
    upper: Sequence[complex],
    lower: Sequence[complex],
    z: complex,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    extra_digits: int = 0,
) -> EvalResult:
    """Sum pFq(upper; lower; z) for p <= 1, q <= 2 in extended precision.

    Stops once the tail bound |t_k| rho/(1-rho), with rho a majorant of all
    later term ratios, stays below target_rel_error * |partial sum| for three
    consecutive k.
    """
    upper = [complex(a) for a in upper]
    lower = [complex(b) for b in lower]
    if len(upper) > 1:
        raise ValueError("the tail majorant pairs at most one upper parameter with k!")
    z = complex(z)
    abs_z = abs(z)
    if z == 0:
        return EvalResult(1 + 0j, 0.0, Method.SERIES)
    bits = working_bits(abs_z, policy, extra_digits)
    target = policy.target_rel_error
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        zz = mpc(z)
        ups = [mpc(a) for a in upper]
        lows = [mpc(b) for b in lower]
        term = mpc(1)
        total = mpc(1)
        max_abs_term = 1.0
        consecutive = 0
        k = 0
        while True:
            num = zz
            for a in ups:
                num *= a + k
            den = mpc(k + 1)
            for b in lows:
                den *= b + k
            term = term * num / den
            k += 1
            total += term
            abs_term = float(abs(term))
            if abs_term > max_abs_term:
                max_abs_term = abs_term
            abs_total = float(abs(total))
            if abs_term == 0.0:
                tail = 0.0
            else:
                rho = _ratio_majorant(upper, lower, abs_z, k)
                tail = abs_term * rho / (1.0 - rho) if rho < 1.0 else math.inf
            if tail <= target * abs_total:
                consecutive += 1
                if consecutive >= 3 or abs_term == 0.0:
                    break
            else:
                consecutive = 0
            if k >= policy.max_terms:
                raise ConvergenceError(
                    f"series for pFq({upper}; {lower}; {z}) not converged after {k} terms"
                )
        value = complex(total)
    rounding = max_abs_term * (k + 1) * 2.0 ** (-bits)
    est = (tail + rounding) / abs_total if abs_total > 0 else math.inf
    return EvalResult(value, est, Method.SERIES)


# ---------------------------------------------------------------------------
# 1F2, its derivatives and asymptotics
# ---------------------------------------------------------------------------

def _on_negative_axis(z: complex) -> bool:
    return z.imag == 0.0 and z.real < 0.0


def ghf_1f2(p: GhfParams, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY) -> EvalResult:
    """1F2(a1; b1, b2; z).

    Uses the extended-precision series below ``policy.z_switch`` and the
    two-term large-argument expansion on the negative axis beyond it.
    """
    z = complex(z)
    if z == 0:
        return EvalResult(1 + 0j, 0.0, Method.SERIES)
    if abs(z) >= policy.z_switch and _on_negative_axis(z):
        return ghf_1f2_asymptotic(p, z, policy)
    return hyp_series((p.a1,), (p.b1, p.b2), z, policy)


def ghf_1f2_derivative(
    p: GhfParams, z: complex, n: int, policy: PrecisionPolicy = DEFAULT_POLICY
) -> EvalResult:
    """n-th z-derivative: (a1)_n / ((b1)_n (b2)_n) * 1F2(a1+n; b1+n, b2+n; z)."""
    if n < 1:
        raise ValueError("derivative order must be >= 1")
    coef = pochhammer(p.a1, n) / (pochhammer(p.b1, n) * pochhammer(p.b2, n))
    inner = ghf_1f2(p.shifted(n), z, policy)
    return EvalResult(coef * inner.value, inner.est_rel_error, inner.method)


def ghf_1f2_asymptotic(
    p: GhfParams, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY
) -> EvalResult:
    """Two-term large-|z| expansion of 1F2 on the negative real axis.

    The oscillatory amplitude carries Gamma(b1)Gamma(b2)/(sqrt(pi)Gamma(a1)).
    est_rel_error is the size of the omitted correction orders of each term
    (1/sqrt(-z) and 1/z for the oscillatory wave, 1/z and 1/z^2 for the
    algebraic one) relative to ``asymptotic_envelope``, not to |value|,
    since the value itself passes through zeros.
    """
    z = complex(z)
    if not _on_negative_axis(z):
        raise DomainError(f"asymptotic form implemented on the negative real axis only, got z={z}")
    if abs(z) < policy.z_switch:
        raise DomainError(f"|z|={abs(z)} below z_switch={policy.z_switch}")
    value, envelope, est = _asymptotic_parts(p, -z.real)
    return EvalResult(value, est, Method.ASYMPTOTIC)


def asymptotic_envelope(p: GhfParams, z: complex) -> float:
    """Magnitude scale of the two asymptotic terms at negative real z."""
    z = complex(z)
    if not _on_negative_axis(z):
        raise DomainError(f"negative real z required, got {z}")
    return _asymptotic_parts(p, -z.real)[1]


def _asymptotic_parts(p: GhfParams, x: float) -> tuple[complex, float, float]:
    a, b1, b2 = p.a1, p.b1, p.b2
    root = math.sqrt(x)
    chi = p.chi
    gb = complex_gamma(b1) * complex_gamma(b2)

    # 2 cos(.) = e^{+i.} + e^{-i.}: the amplitude is Gamma(b1)Gamma(b2)/(sqrt(pi) Gamma(a1)),
    # as required by the a1 = b1 reduction to J_{b2-1}.
    osc_amp = gb * _rgamma(a) / _SQRT_PI * x**chi
    osc = osc_amp * cmath.cos(math.pi * chi + 2.0 * root)
    alg = gb * _rgamma(b1 - a) * _rgamma(b2 - a) * x ** (-a)

    c1, c2 = _oscillatory_corrections(a, b1, b2)
    d1 = -a * (a - b1 + 1) * (a - b2 + 1)
    d2 = a * (a + 1) * (a - b1 + 1) * (a - b1 + 2) * (a - b2 + 1) * (a - b2 + 2) / 2
    osc_next = abs(c1) / root + abs(c2) / x
    alg_next = abs(d1) / x + abs(d2) / (x * x)

    osc_env = abs(osc_amp) * math.cosh(math.pi * chi.imag)
    alg_env = abs(alg)
    envelope = osc_env + alg_env
    if envelope == 0.0:
        return 0j, 0.0, math.inf
    est = (osc_env * osc_next + alg_env * alg_next) / envelope
    return osc + alg, envelope, est


def _oscillatory_corrections(a: complex, b1: complex, b2: complex) -> tuple[complex, complex]:
    """Coefficients of 1/sqrt(-z) and 1/(-z) multiplying the e^{2i sqrt(-z)} wave.

    Obtained by substituting the asymptotic ansatz into the 1F2 ODE; the
    e^{-2i sqrt(-z)} wave carries the complex-conjugate pattern (same moduli).
    """
    c1 = -1j * (
        12 * a**2 - 8 * a * b1 - 8 * a * b2 - 8 * a - 4 * b1**2 + 8 * b1 * b2
        + 8 * b1 - 4 * b2**2 + 8 * b2 - 3
    ) / 16
    c2 = -(
        144 * a**4 - 192 * a**3 * b1 - 192 * a**3 * b2 - 448 * a**3
        - 32 * a**2 * b1**2 + 320 * a**2 * b1 * b2 + 576 * a**2 * b1
        - 32 * a**2 * b2**2 + 576 * a**2 * b2 + 344 * a**2
        + 64 * a * b1**3 - 64 * a * b1**2 * b2 - 64 * a * b1**2
        - 64 * a * b1 * b2**2 - 640 * a * b1 * b2 - 400 * a * b1
        + 64 * a * b2**3 - 64 * a * b2**2 - 400 * a * b2 - 16 * a
        + 16 * b1**4 - 64 * b1**3 * b2 - 64 * b1**3 + 96 * b1**2 * b2**2
        + 64 * b1**2 * b2 + 56 * b1**2 - 64 * b1 * b2**3 + 64 * b1 * b2**2
        + 400 * b1 * b2 + 16 * b1 + 16 * b2**4 - 64 * b2**3 + 56 * b2**2
        + 16 * b2 - 15
    ) / 512
    return c1, c2


def ghf_0f1(b: complex, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY) -> EvalResult:
    """0F1(; b; z) by the extended-precision series."""
    b = complex(b)
    if _near_nonpositive_integer(b, POLE_TOL):
        raise PoleError(f"0F1 undefined for b={b}")
    return hyp_series((), (b,), z, policy)


def bessel_j(nu: float, x: float, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    """Bessel function of the first kind J_nu(x) for real nu and x >= 0.

    J_nu(x) = (x/2)^nu / Gamma(nu+1) * 0F1(; nu+1; -x^2/4); negative integer
    orders use J_{-n} = (-1)^n J_n.
    """
    nu = float(nu)
    x = float(x)
    if x < 0.0:
        raise DomainError("bessel_j needs x >= 0")
    if nu < 0 and abs(nu - round(nu)) < POLE_TOL:
        n = -int(round(nu))
        return (-1) ** n * bessel_j(float(n), x, policy)
    if x == 0.0:
        if nu == 0.0:
            return 1.0
        return 0.0 if nu > 0 else math.inf
    series = ghf_0f1(nu + 1.0, -0.25 * x * x, policy).value.real
    prefactor = math.exp(nu * math.log(0.5 * x)) / complex_gamma(nu + 1.0).real
    return prefactor * series


# ---------------------------------------------------------------------------
# Fundamental set around the origin and its Wronskian
# ---------------------------------------------------------------------------

def origin_solutions(
    p: GhfParams, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY
) -> list[tuple[complex, complex, complex]]:
    """Three independent solutions of the 1F2 ODE near the origin.

    Returns [(g, g', g'') for g in (F, z^{1-b1} F_b1, z^{1-b2} F_b2)] where
    F_bi are the shifted 1F2 functions and powers use the principal branch.
    """
    if p.degenerate:
        raise DegenerateParameterError(f"fundamental set invalid for {p}")
    a, b1, b2 = p.a1, p.b1, p.b2
    out = [_value_and_derivs(p, z, policy)]
    for s, inner in (
        (1 - b1, GhfParams(a + 1 - b1, 2 - b1, b2 + 1 - b1)),
        (1 - b2, GhfParams(a + 1 - b2, b1 + 1 - b2, 2 - b2)),
    ):
        g, g1, g2 = _value_and_derivs(inner, z, policy)
        zs = principal_power(z, s)
        # derivatives of z^s g(z), with z^{s-1} = z^s / z on one branch
        v0 = zs * g
        v1 = zs * (s * g / z + g1)
        v2 = zs * (s * (s - 1) * g / (z * z) + 2 * s * g1 / z + g2)
        out.append((v0, v1, v2))
    return out


def _value_and_derivs(p: GhfParams, z: complex, policy: PrecisionPolicy) -> tuple[complex, complex, complex]:
    return (
        ghf_1f2(p, z, policy).value,
        ghf_1f2_derivative(p, z, 1, policy).value,
        ghf_1f2_derivative(p, z, 2, policy).value,
    )


def wronskian_identity(p: GhfParams, z: complex) -> complex:
    """Closed-form Wronskian (b1-1)(b2-1)(b1-b2) z^(-b1-b2-1) of ``origin_solutions``."""
    if p.degenerate:
        raise DegenerateParameterError(f"Wronskian vanishes or set is invalid for {p}")
    b1, b2 = p.b1, p.b2
    return (b1 - 1) * (b2 - 1) * (b1 - b2) * principal_power(z, -b1 - b2 - 1)
