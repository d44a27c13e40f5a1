"""Closed-form entropy approximations for near-Gaussian densities.

All entropies are in nats. Densities are described by :class:`DensitySpec`
with signed coefficients, so ``exp(-eps x^p)`` is the term ``(p, -eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidSpecError, RegimeError
from .series import (
    DensitySpec,
    MomentSet,
    double_factorial,
    truncated_series,
)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _df(n: int) -> float:
    return float(double_factorial(n))


@dataclass(frozen=True)
class EntropyReport:
    value: float
    order: int
    error_bound: float
    gaussian_baseline: float
    beta: float

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if not self.error_bound >= 0:
            raise ValueError(f"error bound must be nonnegative, got {self.error_bound}")

    @property
    def lower(self) -> float:
        return self.value - self.error_bound

    @property
    def upper(self) -> float:
        return self.value + self.error_bound

    def contains(self, h: float) -> bool:
        return self.lower <= h <= self.upper


def gaussian_entropy(sigma: float) -> float:
    """``log(sqrt(2 pi) sigma) + 1/2``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return LOG_SQRT_2PI + math.log(sigma) + 0.5


def entropy_identity(spec: DensitySpec, moments: MomentSet, normalization_value: float) -> float:
    """Entropy from the normalisation constant and a handful of raw moments.

    ``H = 1/2 log(2 pi sigma^2 / C^2) + mu_2 / (2 sigma^2) - sum_k eps_k mu_k``,
    where ``C`` is the constant multiplying the Gaussian density.
    """
    if not normalization_value > 0:
        raise ValueError("normalization value must be positive")
    needed = {2, *spec.exponents}
    missing = sorted(k for k in needed if k not in moments)
    if missing:
        raise KeyError(f"missing moment orders {missing}")
    s = spec.sigma
    h = 0.5 * math.log(2.0 * math.pi * s * s / normalization_value**2)
    h += moments[2] / (2.0 * s * s)
    h -= math.fsum(c * moments[e] for e, c in spec.terms)
    return h


def _split_single(spec: DensitySpec) -> tuple[int, float]:
    if len(spec.terms) != 1:
        raise InvalidSpecError("first-order closed form needs exactly one perturbation term")
    p, coef = spec.terms[0]
    return p, -coef


def _split_pair(spec: DensitySpec) -> tuple[int, float, int, float]:
    """Return ``(q, eps_q, p, eps_p)`` with ``eps_q = 0`` when no odd term is present."""
    if len(spec.terms) == 1:
        p, coef = spec.terms[0]
        return 3, 0.0, p, -coef
    if len(spec.terms) != 2:
        raise InvalidSpecError("second-order closed form covers terms {(q, eps_q), (p, -eps_p)} only")
    (q, eps_q), (p, coef_p) = spec.terms
    if q % 2 == 0 or q < 3:
        raise InvalidSpecError(f"asymmetric exponent must be odd and >= 3, got {q}")
    return q, eps_q, p, -coef_p


def first_order_entropy(p: int, eps: float, sigma: float = 1.0) -> EntropyReport:
    """First-order entropy of ``exp(-x^2/2 sigma^2 - eps x^p)`` with its error bound.

    ``eps = 0`` is accepted and returns the Gaussian entropy with zero bound.
    """
    if p % 2 or p < 4:
        raise InvalidSpecError(f"p must be even and >= 4, got {p}")
    if eps < 0:
        raise InvalidSpecError("eps must be nonnegative")
    a = eps * sigma**p * _df(p - 1)
    denom = 1.0 - a - 0.5 * eps**2 * _df(2 * p - 1) * sigma ** (2 * p)
    if not denom > 0:
        raise RegimeError(f"beta denominator {denom:.6g} <= 0; eps*sigma^p={eps * sigma**p:.6g} is not perturbative")
    beta = 1.0 / denom
    if not 1.0 - a > 0:
        raise RegimeError("first-order partition value is non-positive")
    value = (
        LOG_SQRT_2PI
        + math.log(sigma * (1.0 - a))
        + (0.5 + eps * sigma**p * (_df(p - 1) - 0.5 * _df(p + 1))) / (1.0 - a)
    )
    bound = (
        math.log1p(beta * 0.5 * eps**2 * _df(2 * p - 1) * sigma ** (2 * p))
        + beta * 0.25 * eps**2 * _df(2 * p + 1) * sigma ** (2 * p)
        + beta * 0.5 * eps**3 * _df(3 * p - 1) * sigma ** (3 * p)
    )
    return EntropyReport(value, 1, bound, gaussian_entropy(sigma), beta)


def entropy_first_order(spec: DensitySpec) -> EntropyReport:
    """First-order entropy for a single even term ``(p, -eps)``, ``eps > 0``."""
    p, eps = _split_single(spec)
    if eps <= 0:
        raise InvalidSpecError("the single term must have a negative coefficient")
    return first_order_entropy(p, eps, spec.sigma)


def second_order_entropy(
    q: int,
    eps_q: float,
    p: int,
    eps_p: float,
    sigma: float = 1.0,
    variant: str = "consistent",
) -> EntropyReport:
    """Second-order entropy of ``exp(-x^2/2 sigma^2 + eps_q x^q - eps_p x^p)``.

    ``variant="consistent"`` keeps every term of the second-order expansion
    with its correct weight: the squared-coefficient corrections carry
    ``(2j+1)!!/4 - (2j-1)!!``. ``variant="printed"`` uses ``(2j+1)!!/2`` in
    their place, which reproduces the commonly quoted closed form (e.g.
    ``0.5 - 4.5 eps + 367.5 eps^2`` for ``p = 4``) but is not the Taylor
    expansion of the entropy at second order. The error bound is the same
    for both.
    """
    if variant not in ("consistent", "printed"):
        raise ValueError(f"unknown variant {variant!r}")
    if p % 2 or p < 4:
        raise InvalidSpecError(f"p must be even and >= 4, got {p}")
    if q % 2 == 0 or not 3 <= q < p:
        raise InvalidSpecError(f"q must be odd with 3 <= q < p, got q={q}, p={p}")
    if eps_p < 0:
        raise InvalidSpecError("eps_p must be nonnegative")
    s = sigma
    half = 0.25 if variant == "consistent" else 0.5
    inv_c2 = (
        1.0
        - _df(p - 1) * eps_p * s**p
        + 0.5 * eps_q**2 * _df(2 * q - 1) * s ** (2 * q)
        + 0.5 * eps_p**2 * _df(2 * p - 1) * s ** (2 * p)
    )
    if not inv_c2 > 0:
        raise RegimeError("second-order partition value is non-positive")
    c2 = 1.0 / inv_c2
    inner = (
        0.5
        + eps_p * s**p * (_df(p - 1) - 0.5 * _df(p + 1))
        + eps_q**2 * s ** (2 * q) * (half * _df(2 * q + 1) - _df(2 * q - 1))
        + eps_p**2 * s ** (2 * p) * (half * _df(2 * p + 1) - _df(2 * p - 1))
    )
    value = LOG_SQRT_2PI + math.log(s / c2) + c2 * inner

    eq2 = eps_q**2
    z_cubic = _df(3 * p - 1) / 6 * eps_p**3 * s ** (3 * p) + _df(2 * q + p - 1) / 2 * eq2 * eps_p * s ** (
        2 * q + p
    )
    denom = inv_c2 - z_cubic
    if not denom > 0:
        raise RegimeError(f"beta denominator {denom:.6g} <= 0; density is not perturbative")
    beta = 1.0 / denom
    g0 = beta * z_cubic
    g2 = beta * (
        _df(3 * p + 1) / 12 * eps_p**3 * s ** (3 * p)
        + _df(2 * q + 2 * p + 1) / 4 * eq2 * eps_p * s ** (2 * q + p)
    )
    gq = beta * (
        _df(4 * q - 1) / 6 * eq2**2 * s ** (4 * q)
        + _df(2 * q + 2 * p - 1) / 2 * eq2 * eps_p**2 * s ** (2 * q + 2 * p)
    )
    gp = beta * (
        _df(4 * p - 1) / 6 * eps_p**4 * s ** (4 * p)
        + _df(2 * q + 2 * p - 1) / 2 * eq2 * eps_p**2 * s ** (2 * q + 2 * p)
    )
    bound = math.log1p(g0) + g2 + gq + gp
    return EntropyReport(value, 2, bound, gaussian_entropy(s), beta)


def entropy_second_order(spec: DensitySpec, variant: str = "consistent") -> EntropyReport:
    """Second-order entropy for terms ``{(q, eps_q), (p, -eps_p)}`` or ``{(p, -eps_p)}``."""
    q, eps_q, p, eps_p = _split_pair(spec)
    if eps_p <= 0:
        raise InvalidSpecError("the even term must have a negative coefficient")
    if len(spec.terms) == 1 and p < 4:
        raise InvalidSpecError(f"p must be even and >= 4, got {p}")
    return second_order_entropy(q, eps_q, p, eps_p, spec.sigma, variant=variant)


def _generic_first_order_bound(spec: DensitySpec) -> tuple[float, float]:
    """Moment-truncation bound on the first-order entropy for any spec.

    Mirrors the single-term construction: ``log(1 + beta dS_0)`` plus the
    moment errors ``beta dS_k`` weighted by their coefficients in the
    entropy identity, with ``beta = 1 / (S_0 - dS_0)``.
    """
    z = truncated_series(spec, 0, 1)
    lower = z.value - z.bound
    if not lower > 0:
        raise RegimeError(f"beta denominator {lower:.6g} <= 0; density is not perturbative")
    beta = 1.0 / lower
    s2 = spec.sigma**2
    bound = math.log1p(beta * z.bound) + beta * truncated_series(spec, 2, 1).bound / (2.0 * s2)
    for e, c in spec.terms:
        bound += abs(c) * beta * truncated_series(spec, e, 1).bound
    return bound, beta


def first_order_asymmetry_check(spec: DensitySpec) -> tuple[EntropyReport, EntropyReport]:
    """First-order entropy of a skewed density and of its symmetric part.

    The first report follows the two-parameter route: normalisation
    ``1 / (1 - eps_p mu_p^G)``, moments kept to linear order in each
    coefficient, products of coefficients dropped. The odd coefficient
    cancels out, so both values coincide.
    """
    q, eps_q, p, eps_p = _split_pair(spec)
    if eps_p <= 0:
        raise InvalidSpecError("the even term must have a negative coefficient")
    s = spec.sigma
    mu_p = _df(p - 1) * s**p
    mu_p2 = _df(p + 1) * s ** (p + 2)
    inv_c = 1.0 - eps_p * mu_p
    if not inv_c > 0:
        raise RegimeError("first-order partition value is non-positive")
    c = 1.0 / inv_c
    value = LOG_SQRT_2PI + math.log(s / c) + c * (0.5 + eps_p * mu_p - eps_p / (2.0 * s * s) * mu_p2)
    bound, beta = _generic_first_order_bound(spec)
    skewed = EntropyReport(value, 1, bound, gaussian_entropy(s), beta)
    symmetric = first_order_entropy(p, eps_p, s)
    return skewed, symmetric
