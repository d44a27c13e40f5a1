import functools

import sympy as sp
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_x = sp.Symbol("x", real=True)


@functools.lru_cache(maxsize=None)
def _std_gaussian_moment(m: int) -> sp.Expr:
    return sp.integrate(_x**m * sp.exp(-(_x**2) / 2), (_x, -sp.oo, sp.oo)) / sp.sqrt(2 * sp.pi)


def symbolic_term(sigma, terms, k, n):
    """Order-``n`` moment-series term by symbolic expansion and exact Gaussian integrals."""
    coefs = [sp.Rational(str(c)) for _, c in terms]
    poly = sp.Poly(_x**k * sum(c * _x**e for (e, _), c in zip(terms, coefs)) ** n / sp.factorial(n), _x)
    s = sp.Rational(str(sigma))
    total = sum(c * s**m * _std_gaussian_moment(m) for (m,), c in poly.terms())
    return float(total)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
