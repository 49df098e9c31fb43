"""Numerical building blocks: special functions, Gamma sampling, exact
combinatorics and truncated Taylor series ("jets").

A jet stores Taylor coefficients ``coeffs[j] = f^(j)(s0) / j!`` about an
expansion point ``s0``. Products and compositions of jets give exact
higher-order derivatives without finite differencing, which is what the
coverage and rate expressions need for the derivatives of their Laplace
transforms.

Besides the plain jets, two helpers return *relative* coefficients
``d[j] = coeffs[j] * s0**j``, i.e. the Taylor coefficients of
``eps -> f(s0 * (1 + eps))``. They stay bounded where ``s0**j`` would
overflow and are what the radial integrals consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "MAX_JET_ORDER",
    "TaylorJet",
    "MultinomialIndex",
    "bessel_j0",
    "ln_beta",
    "sample_gamma",
    "binomial",
    "enumerate_compositions",
    "jet_constant",
    "jet_identity",
    "jet_scale",
    "jet_add",
    "jet_multiply",
    "jet_exp",
    "jet_power",
    "jet_of_gamma_laplace",
    "jet_of_stretched_exp",
    "gamma_laplace_rel",
    "stretched_exp_rel",
]

#: Highest derivative order any jet may carry (supports M - K <= 32).
MAX_JET_ORDER = 32


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------
def _j0_series(x: float) -> float:
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)):
            return total


def _j0_trapezoid(x: float, nodes: int = 64) -> float:
    # J0(x) = (1/pi) int_0^pi cos(x sin t) dt; the integrand is pi-periodic
    # so the trapezoidal rule converges geometrically once nodes > x.
    t = np.pi * np.arange(nodes) / nodes
    return float(np.cos(x * np.sin(t)).sum() / nodes)


def _j0_asymptotic(x: float) -> float:
    # Hankel expansion; the smallest term near k = 2x is about exp(-2x).
    p = 0.0
    q = 0.0
    a = 1.0
    prev = math.inf
    k = 0
    while True:
        term = a / x**k
        if term > prev or term < 1e-17:
            break
        # a_k carries (-1)^k from the factors (0 - (2j-1)^2)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * term
        else:
            q -= sign * term
        prev = term
        k += 1
        a *= (2 * k - 1) ** 2 / (8.0 * k)
    chi = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j0(x: float) -> float:
    """Zeroth-order Bessel function of the first kind.

    Power series for ``|x| < 8``, a periodic trapezoidal rule on the
    integral representation up to ``|x| < 25`` and the Hankel asymptotic
    expansion beyond. Absolute error stays below 1e-12 for ``|x| <= 100``.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"bessel_j0 needs a finite argument, got {x!r}")
    x = abs(x)
    if x < 8.0:
        return _j0_series(x)
    if x < 25.0:
        return _j0_trapezoid(x)
    return _j0_asymptotic(x)


def ln_beta(x: float, y: float) -> float:
    """Natural log of the Beta function B(x, y) for x, y > 0."""
    if not (x > 0 and y > 0):
        raise DomainError(f"ln_beta needs positive arguments, got ({x}, {y})")
    return math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y)


def sample_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Draw from the Gamma distribution with the given shape and scale.

    ``rng`` is the only state touched. Returns a float when ``size`` is
    None, an array otherwise.
    """
    if not (np.all(np.asarray(shape) > 0) and np.all(np.asarray(scale) > 0)):
        raise DomainError("Gamma shape and scale must be positive")
    draw = rng.gamma(shape, scale, size=size)
    return float(draw) if size is None and np.ndim(draw) == 0 else draw


# ---------------------------------------------------------------------------
# Combinatorics
# ---------------------------------------------------------------------------
def binomial(n: int, k: int) -> int:
    """Exact n-choose-k; zero when k > n."""
    if n < 0 or k < 0:
        raise DomainError(f"binomial needs nonnegative arguments, got ({n}, {k})")
    return math.comb(n, k)


@dataclass(frozen=True)
class MultinomialIndex:
    """One ordered triple ``(u1, u2, u3)`` and its multinomial coefficient."""

    u1: int
    u2: int
    u3: int
    weight: int


@lru_cache(maxsize=None)
def _compositions(n: int) -> tuple[MultinomialIndex, ...]:
    out = []
    fact_n = math.factorial(n)
    for u1 in range(n + 1):
        for u2 in range(n - u1 + 1):
            u3 = n - u1 - u2
            weight = fact_n // (
                math.factorial(u1) * math.factorial(u2) * math.factorial(u3)
            )
            out.append(MultinomialIndex(u1, u2, u3, weight))
    return tuple(out)


def enumerate_compositions(n: int) -> tuple[MultinomialIndex, ...]:
    """All ordered triples of nonnegative integers summing to ``n``."""
    if n < 0 or n > MAX_JET_ORDER - 1:
        raise ConfigError(
            f"composition target must lie in [0, {MAX_JET_ORDER - 1}], got {n}"
        )
    return _compositions(int(n))


# ---------------------------------------------------------------------------
# Taylor jets
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TaylorJet:
    """Truncated Taylor expansion ``coeffs[j] = f^(j)(s0) / j!``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("jet coefficients must be a non-empty 1-D sequence")
        if c.size - 1 > MAX_JET_ORDER:
            raise ConfigError(
                f"jet order {c.size - 1} exceeds the maximum {MAX_JET_ORDER}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("jet coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, j: int) -> float:
        """The j-th derivative at the expansion point."""
        return float(self.coeffs[j]) * math.factorial(j)

    def derivatives(self) -> np.ndarray:
        return self.coeffs * np.array(
            [math.factorial(j) for j in range(self.order + 1)], dtype=float
        )


def _check_order(order: int) -> int:
    order = int(order)
    if order < 0:
        raise ValueError(f"jet order must be nonnegative, got {order}")
    if order > MAX_JET_ORDER:
        raise ConfigError(f"jet order {order} exceeds the maximum {MAX_JET_ORDER}")
    return order


def jet_constant(value: float, order: int) -> TaylorJet:
    order = _check_order(order)
    c = np.zeros(order + 1)
    c[0] = value
    return TaylorJet(c)


def jet_identity(s0: float, order: int) -> TaylorJet:
    order = _check_order(order)
    c = np.zeros(order + 1)
    c[0] = s0
    if order >= 1:
        c[1] = 1.0
    return TaylorJet(c)


def jet_scale(a: TaylorJet, factor: float) -> TaylorJet:
    return TaylorJet(a.coeffs * factor)


def jet_add(a: TaylorJet, b: TaylorJet) -> TaylorJet:
    if a.order != b.order:
        raise ValueError(f"jet orders differ: {a.order} vs {b.order}")
    return TaylorJet(a.coeffs + b.coeffs)


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: a.size]


def jet_multiply(a: TaylorJet, b: TaylorJet) -> TaylorJet:
    """Product of two jets expanded about the same point (Cauchy product)."""
    if a.order != b.order:
        raise ValueError(f"jet orders differ: {a.order} vs {b.order}")
    return TaylorJet(_cauchy(a.coeffs, b.coeffs))


def _exp_series(a: np.ndarray) -> np.ndarray:
    # b = exp(a): b_0 = e^{a_0}, j b_j = sum_{m=1..j} m a_m b_{j-m}
    n = a.size
    b = np.empty(n)
    b[0] = math.exp(a[0])
    m = np.arange(1, n)
    for j in range(1, n):
        b[j] = np.dot(m[:j] * a[1 : j + 1], b[j - 1 :: -1][:j]) / j
    return b


def jet_exp(a: TaylorJet) -> TaylorJet:
    """exp of a jet."""
    return TaylorJet(_exp_series(a.coeffs))


def _power_rel(p: float, order: int) -> np.ndarray:
    # Taylor coefficients of (1 + eps)^p: generalized binomial coefficients.
    d = np.empty(order + 1)
    d[0] = 1.0
    for j in range(1, order + 1):
        d[j] = d[j - 1] * (p - j + 1) / j
    return d


def jet_power(s0: float, p: float, order: int) -> TaylorJet:
    """Jet of ``s**p`` about ``s0 > 0``."""
    order = _check_order(order)
    if s0 == 0 and float(p).is_integer() and p >= 0:
        c = np.zeros(order + 1)
        if p <= order:
            c[int(p)] = 1.0
        return TaylorJet(c)
    if not s0 > 0:
        raise DomainError(f"power jet needs s0 > 0 for exponent {p}, got {s0}")
    d = _power_rel(p, order)
    return TaylorJet(s0**p * d / s0 ** np.arange(order + 1))


def gamma_laplace_rel(c: float, n: float, s0: float, order: int) -> np.ndarray:
    """Relative coefficients of ``(1 + c s)**(-n)`` about ``s0``."""
    order = _check_order(order)
    x = c * s0
    if not 1.0 + x > 0:
        raise DomainError(f"need 1 + c*s0 > 0, got c={c}, s0={s0}")
    ratio = x / (1.0 + x)
    d = _power_rel(-n, order) * ratio ** np.arange(order + 1)
    return d * (1.0 + x) ** (-n)


def jet_of_gamma_laplace(c: float, n: float, s0: float, order: int) -> TaylorJet:
    """Jet of the Gamma(n, c) Laplace transform ``(1 + c s)**(-n)`` at ``s0``.

    Closed form: ``f^(j)(s0) = (-c)^j n (n+1) ... (n+j-1) (1 + c s0)^(-n-j)``.
    """
    order = _check_order(order)
    x = 1.0 + c * s0
    if not x > 0:
        raise DomainError(f"need 1 + c*s0 > 0, got c={c}, s0={s0}")
    coeffs = np.empty(order + 1)
    coeffs[0] = x ** (-n)
    for j in range(1, order + 1):
        coeffs[j] = coeffs[j - 1] * (-c) * (n + j - 1) / (j * x)
    return TaylorJet(coeffs)


def stretched_exp_rel(y: float, exponent: float, order: int) -> np.ndarray:
    """Relative coefficients of ``exp(-coef * s**exponent)`` about ``s0``.

    Only ``y = coef * s0**exponent`` enters, since
    ``coef * (s0 (1 + eps))**exponent = y (1 + eps)**exponent``.
    """
    order = _check_order(order)
    return _exp_series(-y * _power_rel(exponent, order))


def jet_of_stretched_exp(
    coef: float, exponent: float, s0: float, order: int
) -> TaylorJet:
    """Jet of ``exp(-coef * s**exponent)`` at ``s0 > 0``, by composing the
    power jet with the series exponential."""
    order = _check_order(order)
    if coef == 0.0:
        return jet_constant(1.0, order)
    return jet_exp(jet_scale(jet_power(s0, exponent, order), -coef))
