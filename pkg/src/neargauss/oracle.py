"""Quadrature reference values for normalisation, moments and entropy.

Everything here is computed by adaptive Gauss-Kronrod integration
(QUADPACK via :func:`scipy.integrate.quad`) on a finite interval chosen so
that the neglected tails are below ``tail_mass_tol`` relative to the peak
of the integrand. The integrand is always evaluated as ``exp(f(x) - f_max)``
with ``f`` the analytic exponent, so nothing underflows in the bulk and
``log p`` never comes from the log of an evaluated density.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .entropy import entropy_identity
from .errors import QuadratureError
from .series import DensitySpec, MomentSet


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    tail_mass_tol: float = 1e-14
    max_subdivisions: int = 500

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "tail_mass_tol"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


DEFAULT_CONFIG = QuadratureConfig()


def _peak(spec: DensitySpec, k: int = 0) -> tuple[float, float]:
    """Location and value of the maximum of ``f(x) + k log|x|``."""
    s = spec.sigma
    span = 12.0 * s
    xs = np.linspace(-span, span, 4001)
    h = spec.log_density_unnormalized(xs)
    if k:
        with np.errstate(divide="ignore"):
            h = h + k * np.log(np.abs(xs))
    i = int(np.argmax(h))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]

    def neg(x: float) -> float:
        v = float(spec.log_density_unnormalized(x))
        if k:
            v += k * math.log(abs(x)) if x != 0 else -math.inf
        return -v

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * s})
    if -res.fun >= h[i]:
        return float(res.x), float(-res.fun)
    return float(xs[i]), float(h[i])


def integration_half_width(spec: DensitySpec, k: int = 0, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Half-width ``L`` of the integration window for ``x^k exp(f(x))``.

    Bisects for the point beyond which the log-integrand has dropped by
    ``log(tail_mass_tol)`` below its peak on each side, then doubles it.
    """
    x0, top = _peak(spec, k)
    drop = math.log(cfg.tail_mass_tol)

    def excess(x: float) -> float:
        v = float(spec.log_density_unnormalized(x))
        if k and x != 0:
            v += k * math.log(abs(x))
        return v - top - drop

    widths = []
    for direction in (1.0, -1.0):
        inner = abs(x0) + spec.sigma
        outer = inner
        while excess(direction * outer) > 0:
            outer *= 2.0
            if outer > 1e6 * spec.sigma:
                raise QuadratureError("could not bracket the integrand tail")
        lo, hi = 0.0, outer
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if excess(direction * mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-9 * spec.sigma:
                break
        widths.append(hi)
    return 2.0 * max(widths)


def _quad(func, a: float, b: float, cfg: QuadratureConfig, points=None) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            func,
            a,
            b,
            epsabs=cfg.abs_tol,
            epsrel=cfg.rel_tol,
            limit=cfg.max_subdivisions,
            points=points,
            full_output=True,
        )
    value, err, _info, *warning = out
    # QUADPACK appends a message only when it flags a problem
    if warning and not err <= 10 * max(cfg.abs_tol, cfg.rel_tol * abs(value)):
        raise QuadratureError(f"quadrature failed (err={err:.3g}): {warning[0]}")
    return value


def _scalar_exponent(spec: DensitySpec):
    inv2s2 = 0.5 / spec.sigma**2
    terms = spec.terms

    def f(x: float) -> float:
        v = -inv2s2 * x * x
        for e, c in terms:
            v += c * x**e
        return v

    return f


class _Integrator:
    """Integrals of ``g(x) = exp(f(x) - f_max)`` against simple weights."""

    def __init__(self, spec: DensitySpec, cfg: QuadratureConfig, k_max: int = 0):
        self.spec = spec
        self.cfg = cfg
        self.f = _scalar_exponent(spec)
        self.mode, _ = _peak(spec, 0)
        self.f_max = self.f(self.mode)
        self.half_width = max(integration_half_width(spec, k, cfg) for k in {0, k_max})
        self.center = self.mode

    def g(self, x: float) -> float:
        return math.exp(self.f(x) - self.f_max)

    def integrate(self, weight) -> float:
        a = self.center - self.half_width
        b = self.center + self.half_width
        return _quad(lambda x: weight(x) * self.g(x), a, b, self.cfg, points=[self.center])

    def mass(self) -> float:
        return self.integrate(lambda x: 1.0)

    def log_partition(self) -> float:
        """``log`` of ``int exp(f(x)) dx``."""
        return math.log(self.mass()) + self.f_max


def oracle_partition_ratio(spec: DensitySpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``E_G[exp(P(x))]``, i.e. ``1/C``: the exact sum of the partition series."""
    return math.exp(_Integrator(spec, cfg).log_partition() - math.log(math.sqrt(2 * math.pi) * spec.sigma))


def oracle_normalization(spec: DensitySpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Constant ``C`` with ``C / (sqrt(2 pi) sigma) * int exp(f) = 1``."""
    return 1.0 / oracle_partition_ratio(spec, cfg)


def oracle_gaussian_expectation(spec: DensitySpec, k: int, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """``E_G[x^k exp(P(x))] = mu_k / C``, the exact sum of the k-th moment series."""
    it = _Integrator(spec, cfg, k)
    scale = math.exp(it.f_max - math.log(math.sqrt(2 * math.pi) * spec.sigma))
    return scale * it.integrate(lambda x: x**k)


def oracle_moment(spec: DensitySpec, k: int, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Raw moment ``int x^k p(x) dx``."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    if k == 0:
        return 1.0
    it = _Integrator(spec, cfg, k)
    return it.integrate(lambda x: x**k) / it.mass()


def oracle_moments(spec: DensitySpec, orders, cfg: QuadratureConfig = DEFAULT_CONFIG) -> MomentSet:
    orders = list(orders)
    it = _Integrator(spec, cfg, max(orders, default=0))
    mass = it.mass()
    entries = {k: (1.0 if k == 0 else it.integrate(lambda x, k=k: x**k) / mass) for k in orders}
    return MomentSet(entries=entries, source="computed")


def _direct_entropy(spec: DensitySpec, cfg: QuadratureConfig) -> float:
    it = _Integrator(spec, cfg, 2)
    mass = it.mass()
    log_z = math.log(mass) + it.f_max
    # -log p(x) = log Z - f(x)
    return it.integrate(lambda x: log_z - it.f(x)) / mass


def oracle_entropy(spec: DensitySpec, cfg: QuadratureConfig = DEFAULT_CONFIG, check: bool = True) -> float:
    """Differential entropy ``-int p log p`` in nats.

    With ``check`` the result is cross-checked against the moment identity
    fed with quadrature moments; a disagreement beyond ``10 * rel_tol``
    raises :class:`QuadratureError`.
    """
    h = _direct_entropy(spec, cfg)
    if check:
        h_id = identity_entropy(spec, cfg)
        tol = 10.0 * (cfg.rel_tol * max(abs(h), abs(h_id)) + cfg.abs_tol)
        if abs(h - h_id) > tol:
            raise QuadratureError(
                f"entropy routes disagree: direct {h!r} vs identity {h_id!r} (tol {tol:.3g})"
            )
    return h


def identity_entropy(spec: DensitySpec, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """Entropy via the moment identity using quadrature moments and ``C``."""
    orders = sorted({2, *spec.exponents})
    moments = oracle_moments(spec, orders, cfg)
    return entropy_identity(spec, moments, oracle_normalization(spec, cfg))
