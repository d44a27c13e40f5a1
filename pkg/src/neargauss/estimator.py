"""Near-Gaussian maximum-entropy density fitting by moment matching.

The fitted family is ``exp(-x^2/2 sigma^2 + sum_{k != 2, k <= M} eps_k x^k)``
with unknowns ``(sigma, eps_1, eps_3, ..., eps_M)``. At stage ``n`` the
observed raw moments ``1..M`` are equated to the moment series truncated at
order ``n`` and the resulting ``M x M`` algebraic system is solved by damped
Newton iteration from a Gaussian starting point. Stages advance while the
bound-minimising truncation order of some moment exceeds the current stage.

Even-order stages can have no root at all: a truncated series of even order
bounds the kurtosis it can represent from below, so once the data are
flatter than that floor the system is infeasible. When that happens the
last solved stage is returned with ``saturated = False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidSpecError, NearGaussError, RegimeError
from .oracle import oracle_moments
from .series import (
    DEFAULT_MAX_ORDER,
    DensitySpec,
    MomentSet,
    approx_moments,
    moment_vector,
    optimal_order,
)

# even coefficients are kept at or below -EVEN_BARRIER
EVEN_BARRIER = 1e-15


@dataclass(frozen=True)
class EstimationConfig:
    M: int = 4
    max_stage: int = 6
    solver_tol: float = 1e-10
    perturbative_threshold: float = 0.1
    max_iter: int = 100
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self) -> None:
        if self.M < 3:
            raise ValueError("M must be >= 3")
        if self.M % 2:
            raise ValueError(
                "M must be even: the fitted density needs a dominant even term with a negative coefficient"
            )
        if self.max_stage < 1:
            raise ValueError("max_stage must be positive")
        for name in ("solver_tol", "perturbative_threshold"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


@dataclass
class EstimationResult:
    spec: DensitySpec
    stage: int
    optimal_orders: dict[int, int]
    perturbative_metrics: dict[int, float]
    residuals: dict[int, float]
    converged: bool
    near_gaussian: bool = True
    solver_converged: bool = True
    saturated: bool = True
    iterations: int = 0
    moment_bounds: dict[int, float] = field(default_factory=dict)
    certified_metrics: dict[int, float] = field(default_factory=dict)
    parameter_bounds: dict[str, float] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    message: str = ""

    @property
    def status(self) -> str:
        if not self.solver_converged:
            return "solver_failed"
        if not self.near_gaussian:
            return "not_near_gaussian"
        return "converged"

    @property
    def params(self) -> dict[str, float]:
        out = {"sigma": self.spec.sigma}
        out.update({f"eps_{e}": c for e, c in self.spec.terms})
        return out

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "converged": self.converged,
            "near_gaussian": self.near_gaussian,
            "solver_converged": self.solver_converged,
            "saturated": self.saturated,
            "stage": self.stage,
            "iterations": self.iterations,
            "sigma": self.spec.sigma,
            "terms": [[e, c] for e, c in self.spec.terms],
            "optimal_orders": {str(k): v for k, v in self.optimal_orders.items()},
            "perturbative_metrics": {str(k): v for k, v in self.perturbative_metrics.items()},
            "residuals": {str(k): v for k, v in self.residuals.items()},
            "moment_bounds": {str(k): v for k, v in self.moment_bounds.items()},
            "certified_metrics": {str(k): v for k, v in self.certified_metrics.items()},
            "parameter_bounds": dict(self.parameter_bounds),
            "history": self.history,
            "message": self.message,
        }


def unknown_exponents(M: int) -> list[int]:
    """Exponents carried by the fit: ``1, 3, 4, ..., M``."""
    return [1] + list(range(3, M + 1))


def param_names(M: int) -> list[str]:
    return ["sigma"] + [f"eps_{e}" for e in unknown_exponents(M)]


def spec_from_params(theta: Sequence[float], M: int) -> DensitySpec:
    exps = unknown_exponents(M)
    return DensitySpec(float(theta[0]), tuple(zip(exps, (float(t) for t in theta[1:]))))


def params_from_spec(spec: DensitySpec, M: int) -> np.ndarray:
    extra = set(spec.exponents) - set(unknown_exponents(M))
    if extra:
        raise InvalidSpecError(f"spec has exponents {sorted(extra)} outside the fitted family")
    return np.array([spec.sigma] + [spec.coefficient(e) for e in unknown_exponents(M)])


def empirical_moments(series, M: int) -> MomentSet:
    """Sample raw moments ``(1/T) sum x_t^m`` for ``m = 1..M``."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise InvalidSpecError("empty series")
    if M < 1:
        raise ValueError("M must be >= 1")
    if not np.all(np.isfinite(x)):
        raise InvalidSpecError("series contains non-finite values")
    entries = {}
    power = np.ones_like(x)
    for m in range(1, M + 1):
        power = power * x
        entries[m] = float(np.mean(power))
    return MomentSet(entries=entries, source="empirical")


def moment_equations(observed: MomentSet, stage: int, M: int | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Residual map ``theta -> mu_hat_m - model_m(theta)`` for ``m = 1..M``.

    The model moment is the moment series truncated at ``stage`` divided by
    the partition series truncated at the same order. Parameters outside the
    normalisable family give a NaN residual vector.
    """
    if stage < 1:
        raise ValueError("stage must be >= 1")
    if M is None:
        M = max(observed.orders())
    orders = list(range(1, M + 1))
    missing = [m for m in orders if m not in observed]
    if missing:
        raise InvalidSpecError(f"observed moments missing orders {missing}")
    target = np.array([observed[m] for m in orders])

    def residual(theta) -> np.ndarray:
        try:
            spec = spec_from_params(theta, M)
        except InvalidSpecError:
            return np.full(M, np.nan)
        with np.errstate(all="ignore"):
            model = moment_vector(spec, orders, stage)
        return target - model

    return residual


def _project(theta: np.ndarray, M: int) -> np.ndarray:
    theta = np.array(theta, dtype=float)
    for i, e in enumerate(unknown_exponents(M), start=1):
        if e % 2 == 0:
            theta[i] = min(theta[i], -EVEN_BARRIER)
    return theta


def _jacobian(func, theta: np.ndarray, M: int, f0: np.ndarray) -> np.ndarray:
    """Finite-difference Jacobian with steps scaled to each parameter's units."""
    sigma = theta[0]
    exps = [0] + unknown_exponents(M)
    J = np.empty((f0.size, theta.size))
    for i, e in enumerate(exps):
        h = 1e-6 * (sigma if i == 0 else sigma ** (-e))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        if i > 0 and e % 2 == 0 and up[i] > -EVEN_BARRIER:
            J[:, i] = (f0 - func(dn)) / h
        else:
            J[:, i] = (func(up) - func(dn)) / (2 * h)
    return J


def _newton(func, theta0: np.ndarray, M: int, tol: float, max_iter: int) -> tuple[np.ndarray, np.ndarray, int, bool, str]:
    theta = _project(theta0, M)
    r = func(theta)
    if not np.all(np.isfinite(r)):
        return theta, r, 0, False, "initial point is outside the normalisable family"
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) <= tol:
            return theta, r, it - 1, True, ""
        J = _jacobian(func, theta, M, r)
        if not np.all(np.isfinite(J)):
            return theta, r, it, False, "non-finite Jacobian"
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        norm = np.linalg.norm(r)
        lam = 1.0
        while lam >= 1e-10:
            trial = _project(theta + lam * step, M)
            rt = func(trial)
            if np.all(np.isfinite(rt)) and np.linalg.norm(rt) < norm:
                theta, r = trial, rt
                break
            lam *= 0.5
        else:
            return theta, r, it, bool(np.max(np.abs(r)) <= tol), "line search stalled"
    ok = bool(np.max(np.abs(r)) <= tol)
    return theta, r, max_iter, ok, "" if ok else "iteration cap reached"


def _oracle_jacobian(spec: DensitySpec, M: int) -> np.ndarray:
    """Jacobian of the exact moment map ``theta -> (mu_1, ..., mu_M)``."""
    theta = params_from_spec(spec, M)
    orders = list(range(1, M + 1))
    exps = [0] + unknown_exponents(M)

    def mom(t):
        ms = oracle_moments(spec_from_params(t, M), orders)
        return np.array([ms[m] for m in orders])

    J = np.empty((M, M))
    for i, e in enumerate(exps):
        h = 1e-4 * (theta[0] if i == 0 else theta[0] ** (-e))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        if i > 0 and e % 2 == 0 and up[i] > -EVEN_BARRIER:
            J[:, i] = (mom(theta) - mom(dn)) / h
        else:
            J[:, i] = (mom(up) - mom(dn)) / (2 * h)
    return J


def parameter_bounds(spec: DensitySpec, M: int, stage: int) -> tuple[dict[int, float], dict[str, float]]:
    """Truncation bounds on the model moments and their effect on the parameters.

    At a solution the model moments equal the observed ones, and the true
    moments of the fitted density differ from them by at most the moment
    bound ``b``. Those moment errors are mapped to parameter errors through
    the inverse Jacobian of the exact moment map: ``|J^-1| b``, to first order.
    """
    orders = list(range(1, M + 1))
    names = param_names(M)
    try:
        ms = approx_moments(spec, orders, stage)
    except RegimeError:
        return {m: math.inf for m in orders}, {n: math.inf for n in names}
    mb = {m: ms.bound(m) for m in orders}
    try:
        Jinv = np.linalg.inv(_oracle_jacobian(spec, M))
    except (np.linalg.LinAlgError, NearGaussError):
        return mb, {n: math.inf for n in names}
    b = np.array([mb[m] for m in orders])
    with np.errstate(over="ignore", invalid="ignore"):
        pb = np.abs(Jinv) @ b
    return mb, {n: float(v) for n, v in zip(names, pb)}


def solve_stage(observed: MomentSet, stage: int, init, cfg: EstimationConfig = EstimationConfig()) -> EstimationResult:
    """Solve the stage-``stage`` moment system from ``init`` and check the result."""
    M = cfg.M
    init = np.asarray(init, dtype=float)
    if init.size != M or not init[0] > 0:
        raise InvalidSpecError(f"init must have {M} entries with sigma > 0")
    func = moment_equations(observed, stage, M)
    theta, r, iters, ok, msg = _newton(func, init, M, cfg.solver_tol, cfg.max_iter)
    spec = spec_from_params(theta, M)
    metrics = spec.perturbative_metrics()
    near = all(v < cfg.perturbative_threshold for v in metrics.values())
    if ok and not near:
        worst = max(metrics, key=metrics.get)
        msg = (
            f"perturbative hypothesis fails: |eps_{worst}| sigma^{worst} = {metrics[worst]:.4g} "
            f">= {cfg.perturbative_threshold}; data cannot be treated as near-Gaussian"
        )
    residuals = {m: float(abs(v)) for m, v in zip(range(1, M + 1), r)}
    return EstimationResult(
        spec=spec,
        stage=stage,
        optimal_orders={},
        perturbative_metrics=metrics,
        residuals=residuals,
        converged=ok and near,
        near_gaussian=near,
        solver_converged=ok,
        iterations=iters,
        message=msg,
    )


def _validate_moments(observed: MomentSet, M: int) -> None:
    missing = [m for m in range(1, M + 1) if m not in observed]
    if missing:
        raise InvalidSpecError(f"moments of orders {missing} are required")
    values = [observed[m] for m in range(1, M + 1)]
    if not all(math.isfinite(v) for v in values):
        raise InvalidSpecError("moments must be finite")
    mu1, mu2 = observed[1], observed[2]
    if mu2 < 0:
        raise InvalidSpecError(f"second moment must be positive, got {mu2}")
    if not mu2 - mu1 * mu1 > 1e-14 * mu2 or mu2 == 0:
        raise InvalidSpecError("degenerate variance: the data have no spread")
    for m in range(2, M + 1, 2):
        if not observed[m] > 0:
            raise InvalidSpecError(f"even moment of order {m} must be positive, got {observed[m]}")


def _history_row(res: EstimationResult, M: int) -> dict:
    return {
        "stage": res.stage,
        "params": dict(zip(param_names(M), map(float, params_from_spec(res.spec, M)))),
        "optimal_orders": {str(k): v for k, v in res.optimal_orders.items()},
        "max_residual": max(res.residuals.values()),
        "status": res.status,
    }


def estimate(data, cfg: EstimationConfig = EstimationConfig()) -> EstimationResult:
    """Fit the near-Gaussian density to a series or to a set of raw moments.

    Starts from the Gaussian fit at stage 1 and moves to stage ``n + 1``
    while some moment's bound-minimising truncation order is at least
    ``n + 1``. Orders whose bound is already below ``solver_tol`` relative
    to the moment are treated as saturated. If a later stage has no
    solution the previous stage's estimate is kept and ``saturated`` is
    cleared.
    """
    M = cfg.M
    observed = data if isinstance(data, MomentSet) else empirical_moments(data, M)
    _validate_moments(observed, M)
    sd = math.sqrt(observed[2] - observed[1] ** 2)
    theta = np.array([sd] + [0.0] * (M - 1))
    history: list[dict] = []
    total_iters = 0
    best: EstimationResult | None = None
    stage = 1
    while True:
        res = solve_stage(observed, stage, theta, cfg)
        total_iters += res.iterations
        if res.solver_converged:
            res.optimal_orders = {
                m: optimal_order(res.spec, m, cfg.max_order, floor=cfg.solver_tol * max(1.0, abs(observed[m])))
                for m in range(1, M + 1)
            }
        history.append(_history_row(res, M))
        if not res.solver_converged and best is not None:
            best.saturated = False
            best.message = f"stage {stage} system has no solution from the stage {best.stage} estimate; {res.message}"
            res = best
            break
        if not res.solver_converged:
            mu1, mu2, mu3, mu4 = (observed[m] for m in range(1, 5))
            var = mu2 - mu1 * mu1
            kurt = (mu4 - 4 * mu1 * mu3 + 6 * mu1 * mu1 * mu2 - 3 * mu1**4) / var**2
            if kurt >= 3.0:
                res.message += (
                    f"; sample kurtosis {kurt:.4g} >= 3 cannot be matched with a negative even coefficient"
                )
        best = res
        if not res.converged:
            break
        theta = params_from_spec(res.spec, M)
        if any(n >= stage + 1 for n in res.optimal_orders.values()):
            if stage < cfg.max_stage:
                stage += 1
                continue
            res.saturated = False
            res.message = f"max_stage {cfg.max_stage} reached before the expansions saturated"
        break
    res.history = history
    res.iterations = total_iters
    if res.solver_converged:
        res.moment_bounds, res.parameter_bounds = parameter_bounds(res.spec, M, res.stage)
        _certify(res, cfg)
    return res


def _certify(res: EstimationResult, cfg: EstimationConfig) -> None:
    """Apply the perturbative test at the far edge of each coefficient's bound.

    The point metric ``|eps_k| sigma^k`` can look tiny while the truncation
    error on ``eps_k`` is many times larger; the hypothesis is only
    accepted if ``(|eps_k| + bound_k) sigma^k`` passes as well. The linear
    term is left out: it only shifts the mean to first order.
    """
    s = res.spec.sigma
    res.certified_metrics = {
        e: (abs(c) + res.parameter_bounds.get(f"eps_{e}", math.inf)) * s**e for e, c in res.spec.terms if e >= 3
    }
    if res.near_gaussian and not all(v < cfg.perturbative_threshold for v in res.certified_metrics.values()):
        worst = max(res.certified_metrics, key=res.certified_metrics.get)
        res.near_gaussian = False
        res.converged = False
        res.message = (
            f"perturbative hypothesis not certified: (|eps_{worst}| + bound) sigma^{worst} = "
            f"{res.certified_metrics[worst]:.4g} >= {cfg.perturbative_threshold}; "
            f"data cannot be treated as near-Gaussian"
        )


def bootstrap(series, cfg: EstimationConfig = EstimationConfig(), n_resamples: int = 20, seed: int = 0) -> dict:
    """Bootstrap standard errors of the fitted parameters.

    Returns ``{"estimates": array (n_resamples, M), "std_error": {name: se}}``.
    Resamples whose fit does not converge are kept out of the spread and
    counted in ``"failed"``.
    """
    x = np.asarray(series, dtype=float).ravel()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    rows = []
    failed = 0
    for _ in range(n_resamples):
        xs = x[rng.integers(0, x.size, x.size)]
        res = estimate(xs, cfg)
        if res.converged:
            rows.append(params_from_spec(res.spec, cfg.M))
        else:
            failed += 1
    est = np.array(rows) if rows else np.empty((0, cfg.M))
    se = est.std(axis=0, ddof=1) if len(rows) > 1 else np.full(cfg.M, np.nan)
    return {
        "estimates": est,
        "std_error": dict(zip(param_names(cfg.M), map(float, se))),
        "failed": failed,
    }
