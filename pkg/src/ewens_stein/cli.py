"""Command-line interface.

Subcommands: pmf (probability queries), bounds (one bound report),
verify (named self-check suites), experiment (parameter sweeps to CSV).
Exit codes: 0 success, 1 runtime/numeric failure (e.g. degenerate
variance), 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .bounds import CSV_COLUMNS, bound_report
from .ewens import EwensParams, cycle_type_pmf, ewens_pmf
from .permutations import CycleType, Permutation

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

GENERATORS = ("uniform01", "integer-range")


class UsageError(Exception):
    pass


def _parse_perm(text: str) -> Permutation:
    values = []
    for pos, token in enumerate(text.split(","), start=1):
        token = token.strip()
        try:
            values.append(int(token))
        except ValueError:
            raise UsageError(
                f"cannot parse permutation: entry {token!r} at position {pos} "
                "is not an integer"
            ) from None
    return Permutation(values)


def _parse_ctype(text: str, n: int) -> CycleType:
    counts = []
    for pos, token in enumerate(text.split(","), start=1):
        token = token.strip()
        try:
            counts.append(int(token))
        except ValueError:
            raise UsageError(
                f"cannot parse cycle type: entry {token!r} at position {pos} "
                "is not an integer"
            ) from None
    if len(counts) > n:
        raise UsageError(f"cycle type has {len(counts)} entries but n = {n}")
    counts.extend([0] * (n - len(counts)))
    return CycleType(tuple(counts))


def _parse_grid(text: str, kind: str, cast):
    items = []
    for pos, token in enumerate(text.split(","), start=1):
        token = token.strip()
        if not token:
            continue
        try:
            items.append(cast(token))
        except ValueError:
            raise UsageError(
                f"cannot parse {kind} grid: entry {token!r} at position {pos}"
            ) from None
    return items


def _load_matrix(path: str, symmetrize: bool) -> np.ndarray:
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                A = np.asarray(json.load(fh), dtype=float)
        else:
            A = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except OSError as exc:
        raise UsageError(f"cannot read matrix file {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"cannot parse matrix file {path}: {exc}") from None
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError(f"matrix in {path} is not square: shape {A.shape}")
    if symmetrize:
        A = (A + A.T) / 2.0
    return A


def _generate_matrix(name: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if name == "uniform01":
        raw = rng.random((n, n))
    elif name == "integer-range":
        raw = rng.integers(0, 10, size=(n, n)).astype(float)
    else:
        raise UsageError(
            f"unknown generator {name!r}; available: {', '.join(GENERATORS)}"
        )
    upper = np.triu(raw)
    return upper + np.triu(raw, 1).T


def _resolve_matrix(args, n: int, seed_key: list[int]) -> np.ndarray:
    if args.matrix:
        A = _load_matrix(args.matrix, args.symmetrize)
        if A.shape[0] != n:
            raise UsageError(
                f"matrix in {args.matrix} is {A.shape[0]}x{A.shape[0]} but n = {n}"
            )
        return A
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    return _generate_matrix(args.generator, n, rng)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_pmf(args) -> int:
    if (args.perm is None) == (args.ctype is None):
        raise UsageError("pmf needs exactly one of --perm or --ctype")
    params = EwensParams(n=args.n, theta=args.theta)
    if args.perm is not None:
        perm = _parse_perm(args.perm)
        if perm.n != args.n:
            raise UsageError(f"permutation has {perm.n} entries but n = {args.n}")
        value = ewens_pmf(perm, params)
    else:
        ctype = _parse_ctype(args.ctype, args.n)
        value = cycle_type_pmf(ctype, params)
    print(value)
    return EXIT_OK


def cmd_bounds(args) -> int:
    params = EwensParams(n=args.n, theta=args.theta)
    A = _resolve_matrix(args, args.n, [args.seed, 0])
    report = bound_report(
        A,
        params,
        samples=args.samples,
        seed=args.seed,
        exact=args.exact,
        force_integer_lower_bound=args.force_integer_lower_bound,
    )
    if args.format == "json":
        _emit(report.to_json_str() + "\n", args.out)
    else:
        _emit(CSV_COLUMNS + "\n" + report.csv_row() + "\n", args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    ns = _parse_grid(args.n_grid, "n", int) if args.n_grid else (
        [args.n] if args.n else []
    )
    thetas = _parse_grid(args.theta_grid, "theta", float) if args.theta_grid else (
        [args.theta] if args.theta is not None else []
    )
    if not ns or not thetas:
        raise UsageError("experiment grid is empty: provide --n/--n-grid and --theta/--theta-grid")
    reports = []
    combo = 0
    for n in ns:
        for theta in thetas:
            params = EwensParams(n=n, theta=theta)
            A = _resolve_matrix(args, n, [args.seed, combo])
            reports.append(
                bound_report(
                    A,
                    params,
                    samples=args.samples,
                    seed=args.seed,
                    exact=args.exact,
                    force_integer_lower_bound=args.force_integer_lower_bound,
                )
            )
            combo += 1
    if args.format == "json":
        text = json.dumps([r.to_json() for r in reports], sort_keys=True, indent=2) + "\n"
    else:
        text = CSV_COLUMNS + "\n" + "".join(r.csv_row() + "\n" for r in reports)
    _emit(text, args.out)
    return EXIT_OK


# -- verify suites -----------------------------------------------------------


def _suite_ewens(n: int, theta: float, seed: int) -> tuple[bool, dict]:
    from .ewens import ewens_pmf
    from .oracle import enumerate_permutations

    n = min(n, 6)
    worst = 0.0
    for th in (0.5, 1.0, 2.0, theta):
        params = EwensParams(n=n, theta=th)
        total = math.fsum(ewens_pmf(p, params) for p in enumerate_permutations(n))
        worst = max(worst, abs(total - 1.0))
    params = EwensParams(n=n, theta=1.0)
    uniform = 1.0 / math.factorial(n)
    worst_uniform = max(
        abs(ewens_pmf(p, params) - uniform) for p in enumerate_permutations(n)
    )
    ok = worst <= 1e-12 and worst_uniform <= 1e-15
    return ok, {"max_total_deviation": worst, "max_uniform_deviation": worst_uniform}


def _suite_moments(n: int, theta: float, seed: int) -> tuple[bool, dict]:
    from .ewens import c1_moments, cycle_count_factorial_moment
    from .oracle import exact_expectation
    from .permutations import cycle_type

    n = min(n, 7)
    params = EwensParams(n=n, theta=theta)

    def fact_moment_oracle(m):
        def g(perm):
            counts = cycle_type(perm).counts
            value = 1.0
            for j, mj in enumerate(m, start=1):
                if mj:
                    cj = counts[j - 1]
                    for t in range(mj):
                        value *= cj - t
            return value

        return exact_expectation(g, params)

    worst = 0.0
    probes = [
        (1,),
        (2,),
        (0, 1),
        (1, 1),
        (0, 0, 1),
        (2, 1),
    ]
    for m in probes:
        expected = fact_moment_oracle(m)
        got = cycle_count_factorial_moment(tuple(m) + (0,) * (n - len(m)), params)
        scale = max(abs(expected), 1e-15)
        worst = max(worst, abs(got - expected) / scale)
    mom = c1_moments(params)
    for got, m in ((mom.mean, (1,)), (mom.factorial2, (2,))):
        expected = fact_moment_oracle(m)
        worst = max(worst, abs(got - expected) / max(abs(expected), 1e-15))
    ok = worst <= 1e-12
    return ok, {"max_relative_error": worst}


def _suite_stein_identity(n: int, theta: float, seed: int) -> tuple[bool, dict]:
    from .oracle import enumerate_permutations
    from .statistic import b_value, center, classify, statistic, t_statistic

    n = min(n, 6)
    params = EwensParams(n=n, theta=theta)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        raw = rng.random((n, n))
        A = center(np.triu(raw) + np.triu(raw, 1).T, params)
        for perm in enumerate_permutations(n):
            total = math.fsum(
                b_value(
                    i,
                    j,
                    perm.inverse(i),
                    perm.inverse(j),
                    perm(i),
                    perm(j),
                    classify(i, j, perm),
                    A,
                )
                for i in range(1, n + 1)
                for j in range(1, n + 1)
                if i != j
            )
            rhs = 4.0 * (n - 1) * statistic(A, perm) - t_statistic(A, perm, params)
            # scale floor at M: rhs can cancel to ~0, where a pure relative
            # error would amplify roundoff into a fake failure
            worst = max(worst, abs(total - rhs) / max(abs(rhs), A.max_abs))
    ok = worst <= 1e-9
    return ok, {"max_relative_error": worst}


def _suite_square_bias(n: int, theta: float, seed: int) -> tuple[bool, dict]:
    from .coupling import constructive_square_bias_law
    from .oracle import exact_square_bias_law
    from .statistic import center

    n = min(n, 6)
    params = EwensParams(n=n, theta=theta)
    rng = np.random.default_rng(seed)
    raw = rng.random((n, n))
    A = center(np.triu(raw) + np.triu(raw, 1).T, params)
    constructive = constructive_square_bias_law(A, params)
    oracle_law = exact_square_bias_law(A.centered, params)
    tv = constructive.tv_distance(oracle_law)
    ok = tv <= 1e-8
    return ok, {"tv_distance": tv}


def _suite_zero_bias_identity(n: int, theta: float, seed: int) -> tuple[bool, dict]:
    from .coupling import constructive_square_bias_law
    from .oracle import enumerate_permutations, exact_expectation
    from .statistic import center, statistic, t_statistic, variance_decomposition

    n = min(n, 6)
    params = EwensParams(n=n, theta=theta)
    rng = np.random.default_rng(seed)
    raw = rng.random((n, n))
    A = center(np.triu(raw) + np.triu(raw, 1).T, params)
    lam = 4.0 / n
    decomposition = variance_decomposition(A, params)
    sigma_sq, e_yr = decomposition.sigma_sq, decomposition.e_yr
    law = constructive_square_bias_law(A, params)
    scale = 1.0 / (n * (n - 1))
    worst = 0.0
    for power in (2, 3, 4):
        f = lambda y: y**power
        fp = lambda pair: (f(pair[0]) - f(pair[1])) / (pair[0] - pair[1])
        lhs = exact_expectation(lambda p: statistic(A, p) * f(statistic(A, p)), params)
        e_fprime = law.expectation(fp)
        e_rf = exact_expectation(
            lambda p: t_statistic(A, p, params) * f(statistic(A, p)) * scale, params
        )
        rhs = sigma_sq * e_fprime - (e_yr / lam) * e_fprime + e_rf / lam
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-12))
    ok = worst <= 1e-8
    return ok, {"max_relative_error": worst}


def _suite_bounds(n: int, theta: float, seed: int) -> tuple[bool, dict]:
    from .bounds import kappa1, kappa2
    from .distances import kolmogorov_exact, wasserstein_exact
    from .oracle import exact_statistic_law
    from .statistic import center

    n = min(n, 6)
    rng = np.random.default_rng(seed)
    worst_margin = -math.inf
    violations = 0
    for _ in range(3):
        raw = rng.integers(0, 10, size=(n, n)).astype(float)
        A_raw = np.triu(raw) + np.triu(raw, 1).T
        params = EwensParams(n=n, theta=theta)
        report = bound_report(A_raw, params, exact=True)
        if report.d1_exact > report.d1_upper or report.dinf_exact > report.dinf_upper:
            violations += 1
        if report.dinf_lower is not None and report.dinf_lower > report.dinf_exact:
            violations += 1
        worst_margin = max(worst_margin, report.dinf_exact - report.dinf_upper)
    params1 = EwensParams(n=max(n, 6), theta=1.0)
    const_ok = abs(kappa1(params1) - math.sqrt(2.0)) <= 1e-14 and abs(
        kappa2(params1) - math.sqrt(7.0)
    ) <= 1e-14
    ok = violations == 0 and const_ok
    return ok, {"violations": violations, "theta1_constants_exact": const_ok}


SUITES = {
    "ewens": _suite_ewens,
    "moments": _suite_moments,
    "stein-identity": _suite_stein_identity,
    "square-bias": _suite_square_bias,
    "zero-bias-identity": _suite_zero_bias_identity,
    "bounds": _suite_bounds,
}


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(
            f"unknown suite {args.suite!r}; available: {', '.join(sorted(SUITES))}"
        )
    ok, details = SUITES[args.suite](args.n, args.theta, args.seed)
    record = {"suite": args.suite, "passed": ok, **details}
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK if ok else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewens-stein",
        description="Ewens-measure combinatorial CLT: sampling, bounds, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_pmf = sub.add_parser("pmf", help="probability of a permutation or cycle type")
    p_pmf.add_argument("--n", type=int, required=True)
    p_pmf.add_argument("--theta", type=float, default=1.0)
    p_pmf.add_argument("--perm", type=str, default=None, help="comma-separated images")
    p_pmf.add_argument("--ctype", type=str, default=None, help="comma-separated cycle counts")
    p_pmf.set_defaults(func=cmd_pmf)

    def add_common(p, need_n=True):
        p.add_argument("--n", type=int, required=need_n)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--matrix", type=str, default=None, help="CSV or JSON matrix path")
        p.add_argument("--generator", type=str, default="uniform01", choices=GENERATORS)
        p.add_argument("--samples", type=int, default=0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--exact", action="store_true")
        p.add_argument("--symmetrize", action="store_true")
        p.add_argument("--force-integer-lower-bound", action="store_true")
        p.add_argument("--format", type=str, default="json", choices=("json", "csv"))
        p.add_argument("--out", type=str, default=None)

    p_bounds = sub.add_parser("bounds", help="one bound report for (A, n, theta)")
    add_common(p_bounds)
    p_bounds.set_defaults(func=cmd_bounds, theta_default=1.0)

    p_exp = sub.add_parser("experiment", help="sweep n and/or theta, emit CSV rows")
    add_common(p_exp, need_n=False)
    p_exp.add_argument("--n-grid", type=str, default=None, help="comma-separated n values")
    p_exp.add_argument("--theta-grid", type=str, default=None)
    p_exp.set_defaults(func=cmd_experiment)

    p_ver = sub.add_parser("verify", help="run a named self-check suite")
    p_ver.add_argument("--suite", type=str, required=True)
    p_ver.add_argument("--n", type=int, default=6)
    p_ver.add_argument("--theta", type=float, default=1.0)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code or 0)
    if getattr(args, "theta", None) is None and args.command in ("bounds", "pmf"):
        args.theta = 1.0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        message = str(exc)
        print(f"error: {message}", file=sys.stderr)
        if "degenerate" in message:
            return EXIT_RUNTIME
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
