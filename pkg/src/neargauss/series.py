"""Gaussian moments and the perturbative moment/partition series.

A near-Gaussian density is written as

    p(x) = C / (sqrt(2 pi) sigma) * exp(-x^2 / (2 sigma^2) + sum_k eps_k x^k)

and every moment is expanded by Taylor-expanding the perturbation factor
under the Gaussian expectation. The order-``n`` term of the ``k``-th
moment series is ``E_G[x^k P(x)^n] / n!`` with ``P(x) = sum_k eps_k x^k``.
The multinomial expansion of ``P^n`` is done over integer exponent
multisets, so the combinatorial prefactors stay exact integers until they
meet the floating-point coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InvalidSpecError, RegimeError

DEFAULT_MAX_ORDER = 20
MAX_ORDER_CAP = 64

# exp() overflows beyond this; terms are assembled in log space past it
_LOG_FLOAT_MAX = 709.0


@dataclass(frozen=True)
class DensitySpec:
    """Parameters of ``exp(-x^2/2 sigma^2 + sum_k eps_k x^k)``.

    ``terms`` holds ``(exponent, coefficient)`` pairs with signed
    coefficients. A density ``exp(-eps x^p)`` is the single term
    ``(p, -eps)``. An empty ``terms`` tuple is the plain Gaussian.
    """

    sigma: float
    terms: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        sigma = float(self.sigma)
        if not math.isfinite(sigma) or sigma <= 0:
            raise InvalidSpecError(f"sigma must be positive and finite, got {self.sigma!r}")
        terms = []
        seen = set()
        for item in self.terms:
            try:
                exponent, coef = item
            except (TypeError, ValueError):
                raise InvalidSpecError(f"term must be an (exponent, coefficient) pair: {item!r}") from None
            if isinstance(exponent, float):
                if not exponent.is_integer():
                    raise InvalidSpecError(f"exponent must be an integer, got {exponent!r}")
            exponent = int(exponent)
            coef = float(coef)
            if exponent < 1:
                raise InvalidSpecError(f"exponent must be >= 1, got {exponent}")
            if exponent == 2:
                raise InvalidSpecError("exponent 2 is absorbed into sigma")
            if exponent in seen:
                raise InvalidSpecError(f"duplicate exponent {exponent}")
            if not math.isfinite(coef) or not math.isfinite(abs(coef) * sigma**exponent):
                raise InvalidSpecError(f"coefficient of x^{exponent} is not finite")
            seen.add(exponent)
            terms.append((exponent, coef))
        terms.sort()
        if terms:
            top, top_coef = terms[-1]
            if top % 2 or top_coef >= 0:
                raise InvalidSpecError(
                    "largest exponent must be even with a strictly negative coefficient "
                    f"(got x^{top} with coefficient {top_coef})"
                )
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def single(cls, p: int, eps: float, sigma: float = 1.0) -> DensitySpec:
        """Density ``exp(-x^2/2 sigma^2 - eps x^p)``, the one-parameter family."""
        return cls(sigma, ((p, -eps),))

    @classmethod
    def skewed(cls, q: int, eps_q: float, p: int, eps_p: float, sigma: float = 1.0) -> DensitySpec:
        """Density ``exp(-x^2/2 sigma^2 + eps_q x^q - eps_p x^p)``."""
        return cls(sigma, ((q, eps_q), (p, -eps_p)))

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(e for e, _ in self.terms)

    def coefficient(self, exponent: int) -> float:
        for e, c in self.terms:
            if e == exponent:
                return c
        return 0.0

    def perturbation(self, x):
        """``sum_k eps_k x^k`` evaluated elementwise."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for e, c in self.terms:
            out = out + c * x**e
        return out

    def log_density_unnormalized(self, x):
        """Exponent ``-x^2/2 sigma^2 + sum_k eps_k x^k``."""
        x = np.asarray(x, dtype=float)
        return -0.5 * (x / self.sigma) ** 2 + self.perturbation(x)

    def perturbative_metrics(self) -> dict[int, float]:
        """``|eps_k| sigma^k`` for each term."""
        return {e: abs(c) * self.sigma**e for e, c in self.terms}

    def with_absolute_coefficients(self) -> tuple[tuple[int, float], ...]:
        return tuple((e, abs(c)) for e, c in self.terms)


@dataclass(frozen=True)
class SeriesResult:
    """A truncated series value with a bound on its truncation error."""

    value: float
    order: int
    bound: float

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError("order must be nonnegative")
        if not self.bound >= 0:
            raise ValueError(f"bound must be nonnegative, got {self.bound}")


@dataclass(frozen=True)
class MomentSet:
    """Raw moments indexed by order.

    ``source`` is ``"computed"`` or ``"empirical"``. ``results`` carries the
    per-order series metadata for computed sets.
    """

    entries: Mapping[int, float]
    source: str = "computed"
    results: Mapping[int, SeriesResult] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source not in ("computed", "empirical"):
            raise ValueError(f"unknown moment source {self.source!r}")
        entries = {int(k): float(v) for k, v in dict(self.entries).items()}
        for k in entries:
            if k < 0:
                raise ValueError(f"moment order must be nonnegative, got {k}")
        if 0 in entries and not math.isclose(entries[0], 1.0, rel_tol=1e-12):
            raise InvalidSpecError(f"order-0 moment must equal 1, got {entries[0]}")
        object.__setattr__(self, "entries", dict(sorted(entries.items())))
        object.__setattr__(self, "results", dict(self.results))

    def __getitem__(self, k: int) -> float:
        return self.entries[k]

    def __contains__(self, k: object) -> bool:
        return k in self.entries

    def orders(self) -> list[int]:
        return list(self.entries)

    def bound(self, k: int) -> float:
        return self.results[k].bound


def double_factorial(n: int) -> int:
    """``n (n-2) (n-4) ... 1`` with ``0!! = (-1)!! = 1``."""
    n = int(n)
    if n < -1:
        raise ValueError(f"double factorial undefined for n={n} < -1")
    return _double_factorial(n)


@lru_cache(maxsize=None)
def _double_factorial(n: int) -> int:
    out = 1
    for j in range(n, 1, -2):
        out *= j
    return out


def _log_double_factorial(n: int) -> float:
    if n <= 0:
        return 0.0
    if n % 2:
        j = (n + 1) // 2  # n = 2j - 1
        return math.lgamma(2 * j + 1) - j * math.log(2.0) - math.lgamma(j + 1)
    j = n // 2
    return j * math.log(2.0) + math.lgamma(j + 1)


def gaussian_moment(k: int, sigma: float) -> float:
    """``E[x^k]`` for a centred Gaussian: ``sigma^k (k-1)!!``, zero for odd ``k``."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if k % 2:
        return 0.0
    return float(_double_factorial(k - 1)) * sigma**k


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` nonnegative integers summing to ``n``."""
    if parts == 1:
        yield (n,)
        return
    for head in range(n, -1, -1):
        for tail in _compositions(n - head, parts - 1):
            yield (head,) + tail


def _monomial_sum(
    sigma: float, terms: tuple[tuple[int, float], ...], k: int, n: int
) -> float:
    """``E_G[x^k (sum_j c_j x^e_j)^n] / n!`` by exact multinomial expansion."""
    if n == 0:
        return gaussian_moment(k, sigma)
    if not terms:
        return 0.0
    exps = [e for e, _ in terms]
    coefs = [c for _, c in terms]
    n_fact = math.factorial(n)
    pieces: list[tuple[int, float]] = []  # (sign, log magnitude) fallback
    direct: list[float] = []
    for a in _compositions(n, len(terms)):
        m = k + sum(ai * ei for ai, ei in zip(a, exps))
        if m % 2:
            continue
        if any(ai and c == 0.0 for ai, c in zip(a, coefs)):
            continue
        multinom = n_fact
        for ai in a:
            multinom //= math.factorial(ai)
        sign = 1
        for ai, c in zip(a, coefs):
            if c < 0 and ai % 2:
                sign = -sign
        try:
            # exact integer ratio, rounded once
            comb = (multinom * _double_factorial(m - 1)) / n_fact
        except OverflowError:
            comb = math.inf
        if comb < 1e250:
            mag = comb * sigma**m
            for ai, c in zip(a, coefs):
                if ai:
                    mag *= abs(c) ** ai
            if math.isfinite(mag) and (mag > 1e-280 or mag == 0.0):
                direct.append(sign * mag)
                continue
        log_mag = (
            -sum(math.lgamma(ai + 1) for ai in a)
            + _log_double_factorial(m - 1)
            + m * math.log(sigma)
            + sum(ai * math.log(abs(c)) for ai, c in zip(a, coefs) if ai)
        )
        pieces.append((sign, log_mag))
    if not pieces:
        return math.fsum(direct)
    top = max(lm for _, lm in pieces)
    if top > _LOG_FLOAT_MAX:
        total = sum(s * math.exp(lm - top) for s, lm in pieces)
        if total == 0.0:
            return math.fsum(direct)
        return math.copysign(math.inf, total)
    return math.fsum(direct + [s * math.exp(lm) for s, lm in pieces])


@lru_cache(maxsize=65536)
def _cached_term(sigma: float, terms: tuple, k: int, n: int) -> float:
    return _monomial_sum(sigma, terms, k, n)


def _check_order(order: int, name: str = "order") -> int:
    order = int(order)
    if order < 0:
        raise ValueError(f"{name} must be nonnegative")
    if order > MAX_ORDER_CAP:
        raise ValueError(f"{name}={order} exceeds the hard cap {MAX_ORDER_CAP}")
    return order


def series_term(spec: DensitySpec, k: int, n: int) -> float:
    """Order-``n`` term of the ``k``-th moment series, ``E_G[x^k P^n] / n!``.

    For a single term ``(p, -eps)`` this is
    ``(-eps)^n / n! * (np + k - 1)!! * sigma^(np + k)``.
    """
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    n = _check_order(n, "n")
    return _cached_term(spec.sigma, spec.terms, int(k), n)


def _first_omitted_bound(spec: DensitySpec, k: int, order: int) -> float:
    return abs(_cached_term(spec.sigma, spec.with_absolute_coefficients(), int(k), order + 1))


def truncated_series(spec: DensitySpec, k: int, order: int) -> SeriesResult:
    """Partial sum of the ``k``-th moment series through ``order``.

    The bound is the first omitted term evaluated with every coefficient
    replaced by its magnitude. For one-term densities this is exactly
    ``eps^(N+1)/(N+1)! (Np + k - 1 + p)!! sigma^((N+1)p + k)``.
    """
    order = _check_order(order)
    value = math.fsum(_cached_term(spec.sigma, spec.terms, int(k), n) for n in range(order + 1))
    return SeriesResult(value=value, order=order, bound=_first_omitted_bound(spec, k, order))


def optimal_order(
    spec: DensitySpec, k: int, max_order: int = DEFAULT_MAX_ORDER, floor: float = 0.0
) -> int:
    """Truncation order in ``[0, max_order]`` minimising the certified bound.

    Ties go to the smaller order. Bounds at or below ``floor`` count as
    tied with each other, so an order already certified to ``floor`` is not
    refined further.
    """
    max_order = int(max_order)
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if max_order > MAX_ORDER_CAP:
        raise ValueError(f"max_order exceeds the hard cap {MAX_ORDER_CAP}")
    best_n, best = 0, math.inf
    for n in range(max_order + 1):
        b = max(_first_omitted_bound(spec, k, n), floor)
        if b < best:
            best_n, best = n, b
    return best_n


def bound_sequence(spec: DensitySpec, k: int, max_order: int = DEFAULT_MAX_ORDER) -> list[float]:
    """Certified bounds for truncation orders ``0..max_order``."""
    return [_first_omitted_bound(spec, k, n) for n in range(_check_order(max_order) + 1)]


def normalization(spec: DensitySpec, order: int) -> SeriesResult:
    """Normalisation constant ``C`` as the reciprocal of the partition series.

    With partition value ``S`` and bound ``dS``, the true ``C`` lies within
    ``dS / (S (S - dS))`` of ``1/S``.
    """
    z = truncated_series(spec, 0, order)
    lower = z.value - z.bound
    if not lower > 0:
        raise RegimeError(
            f"partition series lower bound {lower:.6g} <= 0 at order {order}; "
            "no certified normalisation exists"
        )
    return SeriesResult(value=1.0 / z.value, order=z.order, bound=z.bound / (z.value * lower))


def approx_moments(spec: DensitySpec, orders_wanted: Iterable[int], truncation: int) -> MomentSet:
    """Raw moments ``C_N * S_k(N)`` with interval-propagated bounds."""
    c = normalization(spec, truncation)
    c_hi = c.value + c.bound
    entries: dict[int, float] = {}
    results: dict[int, SeriesResult] = {}
    for k in orders_wanted:
        s = truncated_series(spec, k, truncation)
        value = c.value * s.value
        bound = c_hi * s.bound + abs(s.value) * c.bound
        entries[int(k)] = value
        results[int(k)] = SeriesResult(value=value, order=s.order, bound=bound)
    return MomentSet(entries=entries, source="computed", results=results)


def moment_vector(spec: DensitySpec, orders: Sequence[int], truncation: int) -> np.ndarray:
    """Truncated model moments ``S_k / S_0`` without bound bookkeeping."""
    terms, sigma = spec.terms, spec.sigma
    s0 = math.fsum(_cached_term(sigma, terms, 0, n) for n in range(truncation + 1))
    return np.array(
        [math.fsum(_cached_term(sigma, terms, k, n) for n in range(truncation + 1)) / s0 for k in orders]
    )
