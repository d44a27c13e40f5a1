"""Rejection sampling from a near-Gaussian density."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InvalidSpecError, SamplerError
from .oracle import integration_half_width
from .series import DensitySpec


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    proposal_sigma_scale: float = 1.25
    max_rejections_per_draw: int = 10**6

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.proposal_sigma_scale >= 1:
            raise ValueError("proposal_sigma_scale must be >= 1")
        if self.max_rejections_per_draw < 1:
            raise ValueError("max_rejections_per_draw must be positive")


def _log_ratio(spec: DensitySpec, scale: float):
    """Log of target/proposal up to a constant, as a vectorised function."""
    s = spec.sigma
    shrink = 0.5 / s**2 - 0.5 / (scale * s) ** 2

    def r(x):
        x = np.asarray(x, dtype=float)
        return spec.perturbation(x) - shrink * x * x

    return r


def envelope_log_sup(spec: DensitySpec, scale: float) -> float:
    """``sup_x`` of the log acceptance ratio on the oracle's integration window."""
    r = _log_ratio(spec, scale)
    half = integration_half_width(spec)
    xs = np.linspace(-half, half, 20001)
    vals = r(xs)
    i = int(np.argmax(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(
        lambda x: -float(r(x)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
    )
    return max(float(vals[i]), float(-res.fun))


def _draw(spec: DensitySpec, n: int, cfg: SamplerConfig, rng: np.random.Generator, log_sup: float) -> np.ndarray:
    r = _log_ratio(spec, cfg.proposal_sigma_scale)
    width = cfg.proposal_sigma_scale * spec.sigma
    budget = cfg.max_rejections_per_draw * n
    out: list[np.ndarray] = []
    have = 0
    rejected = 0
    rate = 0.5
    while have < n:
        need = n - have
        batch = int(min(max(1024, math.ceil(1.1 * need / rate)), 4_000_000))
        x = rng.normal(0.0, width, size=batch)
        log_u = np.log(rng.random(batch))
        keep = x[log_u < r(x) - log_sup]
        rejected += batch - keep.size
        if keep.size:
            rate = max(keep.size / batch, 1e-6)
            out.append(keep[:need])
            have += min(keep.size, need)
        if rejected > budget:
            raise SamplerError(
                f"rejection budget exhausted after {rejected} rejections for {have}/{n} draws"
            )
    return np.concatenate(out)


def sample(spec: DensitySpec, n: int, cfg: SamplerConfig = SamplerConfig(), shards: int = 1) -> np.ndarray:
    """Draw ``n`` i.i.d. values from ``spec`` by rejection from a wide Gaussian.

    The proposal is ``N(0, (scale * sigma)^2)``. Output is a deterministic
    function of ``(spec, n, cfg, shards)``; each shard uses its own child
    stream spawned from ``cfg.seed``.
    """
    n = int(n)
    if n < 1:
        raise InvalidSpecError("number of draws must be positive")
    if shards < 1:
        raise ValueError("shards must be positive")
    log_sup = envelope_log_sup(spec, cfg.proposal_sigma_scale)
    if not math.isfinite(log_sup):
        raise SamplerError("acceptance envelope is unbounded")
    children = np.random.SeedSequence(cfg.seed).spawn(shards)
    sizes = [n // shards + (1 if i < n % shards else 0) for i in range(shards)]
    parts = [
        _draw(spec, size, cfg, np.random.Generator(np.random.PCG64(child)), log_sup)
        for size, child in zip(sizes, children)
        if size
    ]
    return np.concatenate(parts)


def acceptance_rate(spec: DensitySpec, cfg: SamplerConfig = SamplerConfig(), trials: int = 100_000) -> float:
    """Empirical fraction of proposals accepted."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    log_sup = envelope_log_sup(spec, cfg.proposal_sigma_scale)
    x = rng.normal(0.0, cfg.proposal_sigma_scale * spec.sigma, size=trials)
    log_u = np.log(rng.random(trials))
    return float(np.mean(log_u < _log_ratio(spec, cfg.proposal_sigma_scale)(x) - log_sup))
