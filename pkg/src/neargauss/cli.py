"""Command-line front end.

Subcommands: ``entropy``, ``figure1``, ``estimate``, ``sample``, ``validate``.
Terms are given as ``--term EXP:COEF`` with the coefficient signed as it
appears in the exponent, so a quartic damping ``exp(-0.03 x^4)`` is
``--term 4:-0.03``.

Exit codes: 0 success, 2 invalid input, 3 regime violation or data not
near-Gaussian, 4 solver or quadrature failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .entropy import (
    EntropyReport,
    entropy_first_order,
    entropy_second_order,
    first_order_asymmetry_check,
    first_order_entropy,
    second_order_entropy,
)
from .errors import InvalidSpecError, QuadratureError, RegimeError, SamplerError
from .estimator import EstimationConfig, bootstrap, estimate
from .oracle import QuadratureConfig, identity_entropy, oracle_entropy, oracle_moment, oracle_partition_ratio
from .sampler import SamplerConfig, sample
from .series import DensitySpec, optimal_order, truncated_series

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_REGIME = 3
EXIT_FAILURE = 4

FIGURE_COLUMNS = ("eps", "H1", "H1_lo", "H1_hi", "H2", "H2_lo", "H2_hi", "H2_printed", "oracle")


@dataclass
class RunReport:
    command: list[str]
    input_digest: str
    results: dict
    versions: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        raw = json.loads(text)
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {raw.get('schema_version')!r}")
        return cls(**raw)


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"package": pkg, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _digest(payload) -> str:
    if isinstance(payload, bytes):
        data = payload
    else:
        data = json.dumps(payload, sort_keys=True).encode()
    return "sha256:" + hashlib.sha256(data).hexdigest()


def parse_term(text: str) -> tuple[int, float]:
    try:
        e, c = text.split(":")
        return int(e), float(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected EXP:COEF, got {text!r}") from None


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def read_series(path: Path) -> np.ndarray:
    """One number per line; blank lines and ``#`` comments are skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise InvalidSpecError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not values:
        raise InvalidSpecError(f"{path}: no data")
    return np.array(values)


def _spec(args) -> DensitySpec:
    return DensitySpec(args.sigma, tuple(args.term or ()))


def _entropy_report(spec: DensitySpec, order: int, variant: str) -> EntropyReport:
    if order == 1:
        if len(spec.terms) == 2:
            return first_order_asymmetry_check(spec)[0]
        return entropy_first_order(spec)
    return entropy_second_order(spec, variant=variant)


def cmd_entropy(args) -> tuple[dict, int]:
    spec = _spec(args)
    rep = _entropy_report(spec, args.order, args.variant)
    out = {
        "spec": {"sigma": spec.sigma, "terms": [list(t) for t in spec.terms]},
        "order": rep.order,
        "value": rep.value,
        "error_bound": rep.error_bound,
        "gaussian_baseline": rep.gaussian_baseline,
        "beta": rep.beta,
    }
    if args.order == 2:
        out["variant"] = args.variant
    if args.oracle:
        h = oracle_entropy(spec)
        out["oracle"] = h
        out["containment"] = "PASS" if rep.contains(h) else "FAIL"
    return out, EXIT_OK


def figure1_rows(eps_max: float = 0.065, steps: int = 66, sigma: float = 1.0, p: int = 4, oracle: bool = True) -> list[dict]:
    """Entropy of ``exp(-x^2/2 sigma^2 - eps x^p)`` on an even grid ``eps in [0, eps_max]``."""
    if steps < 2:
        raise InvalidSpecError("steps must be at least 2")
    rows = []
    for eps in np.linspace(0.0, eps_max, steps):
        eps = float(eps)
        h1 = first_order_entropy(p, eps, sigma)
        h2 = second_order_entropy(3, 0.0, p, eps, sigma)
        h2p = second_order_entropy(3, 0.0, p, eps, sigma, variant="printed")
        row = {
            "eps": eps,
            "H1": h1.value,
            "H1_lo": h1.lower,
            "H1_hi": h1.upper,
            "H2": h2.value,
            "H2_lo": h2.lower,
            "H2_hi": h2.upper,
            "H2_printed": h2p.value,
            "oracle": math.nan,
        }
        if oracle:
            spec = DensitySpec(sigma, ((p, -eps),) if eps > 0 else ())
            row["oracle"] = oracle_entropy(spec)
        rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    lines = ["\t".join(FIGURE_COLUMNS)]
    lines += ["\t".join(f"{r[c]:.12g}" for c in FIGURE_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_figure1(args) -> int:
    rows = figure1_rows(args.eps_max, args.steps, args.sigma, args.p, oracle=not args.no_oracle)
    table = format_table(rows)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return EXIT_OK


def cmd_estimate(args) -> tuple[dict, int]:
    x = read_series(args.data)
    if x.size < 10 * args.M:
        raise InvalidSpecError(f"need at least {10 * args.M} observations for M={args.M}, got {x.size}")
    cfg = EstimationConfig(
        M=args.M,
        max_stage=args.max_stage,
        solver_tol=args.solver_tol,
        perturbative_threshold=args.threshold,
    )
    res = estimate(x, cfg)
    out = res.to_dict()
    out["T"] = int(x.size)
    if args.bootstrap:
        bs = bootstrap(x, cfg, n_resamples=args.bootstrap, seed=args.seed)
        out["bootstrap"] = {"n_resamples": args.bootstrap, "std_error": bs["std_error"], "failed": bs["failed"]}
    code = {"converged": EXIT_OK, "not_near_gaussian": EXIT_REGIME, "solver_failed": EXIT_FAILURE}[res.status]
    return out, code


def cmd_sample(args) -> int:
    x = sample(_spec(args), args.n, SamplerConfig(seed=args.seed))
    text = "".join(f"{v!r}\n" for v in x.tolist())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> tuple[dict, int]:
    """Series partial sums and bounds against quadrature, plus the two entropy routes."""
    spec = _spec(args)
    rows = []
    z = oracle_partition_ratio(spec)
    for k in range(args.max_k + 1):
        exact = oracle_moment(spec, k) * z
        top = max(args.max_order, optimal_order(spec, k, args.max_order))
        for n in range(top + 1):
            tr = truncated_series(spec, k, n)
            err = abs(exact - tr.value)
            rows.append({"k": k, "order": n, "series": tr.value, "bound": tr.bound, "exact": exact, "error": err,
                         "contained": bool(err <= tr.bound)})
    h_direct = oracle_entropy(spec, check=False)
    h_id = identity_entropy(spec)
    tol = 10 * QuadratureConfig().rel_tol * max(abs(h_direct), abs(h_id))
    out = {
        "spec": {"sigma": spec.sigma, "terms": [list(t) for t in spec.terms]},
        "series": rows,
        "violations": sum(not r["contained"] for r in rows),
        "entropy_direct": h_direct,
        "entropy_identity": h_id,
        "entropy_routes_agree": bool(abs(h_direct - h_id) <= tol),
    }
    ok = out["violations"] == 0 and out["entropy_routes_agree"]
    return out, EXIT_OK if ok else EXIT_FAILURE


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=1.0, help="background standard deviation")
    p.add_argument("--term", type=parse_term, action="append", metavar="EXP:COEF",
                   help="exponent term, repeatable; coefficient signed as in exp(+coef x^exp)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neargauss", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="closed-form entropy with error bound")
    _add_spec_args(p)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--variant", choices=("consistent", "printed"), default="consistent",
                   help="second-order coefficient convention")
    p.add_argument("--oracle", action="store_true", help="also compute the quadrature entropy")
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")

    p = sub.add_parser("figure1", help="tab-separated entropy sweep over eps")
    p.add_argument("--eps-max", type=float, default=0.065)
    p.add_argument("--steps", type=int, default=66)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--no-oracle", action="store_true", help="skip the quadrature column")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("estimate", help="fit a near-Gaussian density to a data file")
    p.add_argument("data", type=Path, help="text file, one value per line")
    p.add_argument("--M", type=int, default=4, help="highest matched moment (even)")
    p.add_argument("--max-stage", type=int, default=6)
    p.add_argument("--solver-tol", type=float, default=1e-10)
    p.add_argument("--threshold", type=float, default=0.1, help="perturbative threshold on |eps_k| sigma^k")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N", help="bootstrap resamples for standard errors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sample", help="draw from a density by rejection sampling")
    _add_spec_args(p)
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("validate", help="check series bounds and entropy routes against quadrature")
    _add_spec_args(p)
    p.add_argument("--max-k", type=int, default=4)
    p.add_argument("--max-order", type=int, default=3)
    p.add_argument("--out", type=Path)
    return ap


_REPORTING = {"entropy": cmd_entropy, "estimate": cmd_estimate, "validate": cmd_validate}
_PLAIN = {"figure1": cmd_figure1, "sample": cmd_sample}


def _input_digest(args) -> str:
    if args.command == "estimate":
        return _digest(Path(args.data).read_bytes())
    skip = {"out", "data"}
    return _digest({k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip})


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command in _PLAIN:
            return _PLAIN[args.command](args)
        results, code = _REPORTING[args.command](args)
        report = RunReport(
            command=["neargauss", *argv],
            input_digest=_input_digest(args),
            results=results,
            versions=_versions(),
            timing={"seconds": time.perf_counter() - t0},
        )
        text = report.to_json() + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return code
    except RegimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (InvalidSpecError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (QuadratureError, SamplerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
