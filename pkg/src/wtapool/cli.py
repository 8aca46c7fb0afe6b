"""
Command-line interface for wtapool.

Every command prints machine-readable output (JSON or CSV) on stdout or to
``--out``; logs go to stderr. Option labels on the command line and in the
output are 1-based.

Exit codes: 0 success, 2 usage or domain error, 3 capacity exceeded,
4 non-convergence, 5 internal consistency failure.
"""
import argparse
import logging
import sys
from typing import List, Optional

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError
from tqdm import tqdm

from wtapool import __version__
from wtapool.analytic import boundary_curve, conjecture_probe, s1_curve, symmetric_equilibria_two_process
from wtapool.config import settings
from wtapool.dist import compare
from wtapool.errors import CapacityError, DomainError, WtaPoolError
from wtapool.game import PayoffTensor, exact_payoff_tensor, induced_outcome_distribution, mc_payoff_tensor
from wtapool.models import Rates, SweepConfig
from wtapool.serialization import get_serializer, load_tensor, open_output, to_json, tensor_to_document, write_csv
from wtapool.solver import best_response_dynamics, diversification_metric, find_symmetric_equilibrium

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                low, high = part.split("-", 1)
                values.extend(range(int(low), int(high) + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected integers or ranges like 3-6, got {text!r}")
    return values


def _emit(args, text: str):
    stream = open_output(getattr(args, "out", None))
    try:
        stream.write(text if text.endswith("\n") else text + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


def build_tensor(n: int, rates: Rates, samples: Optional[int] = None, seed: int = 0,
                 exact: bool = True) -> PayoffTensor:
    """
    Exact tensor when ``exact`` and feasible; otherwise a Monte Carlo tensor
    if ``samples`` is set. Without samples an infeasible exact tensor is an
    error naming the bound that was hit.
    """
    if exact:
        try:
            return exact_payoff_tensor(n, induced_outcome_distribution(rates))
        except CapacityError as e:
            if samples is None:
                raise CapacityError(f"{e}; pass --samples to use a Monte Carlo tensor") from e
            logger.info(f"Exact tensor infeasible for n={n}, m={rates.m}; using Monte Carlo")
    if samples is None:
        raise DomainError("a Monte Carlo tensor needs --samples")
    return mc_payoff_tensor(n, rates, samples=samples, seed=seed)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_compare(args) -> int:
    probs = compare(args.l1, args.l2, args.tol)
    config = {"command": "compare", "l1": args.l1, "l2": args.l2, "tol": args.tol or settings.tail_tol}
    _emit(args, to_json({"config": config, "result": probs}))
    return 0


def cmd_boundary(args) -> int:
    grid = np.linspace(args.l1_min, args.l1_max, args.points).tolist()
    rows = []
    for n in args.n_list:
        for point in boundary_curve(n, grid):
            rows.append([point.n, repr(point.lambda1), "" if point.lambda2 is None else repr(point.lambda2)])
    header = {
        "command": "boundary", "n_list": args.n_list, "l1_min": args.l1_min, "l1_max": args.l1_max,
        "points": args.points, "xtol": settings.bisection_xtol, "version": __version__,
    }
    stream = open_output(args.out)
    try:
        write_csv(stream, header, ["n", "lambda1", "lambda2"], rows)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def _odds_ratio_arg(args) -> float:
    if args.c is not None:
        return args.c
    if args.l1 is None or args.l2 is None:
        raise DomainError("give either --c or both --l1 and --l2")
    return compare(args.l1, args.l2).odds_ratio


def cmd_symmetric_eq(args) -> int:
    c = _odds_ratio_arg(args)
    equilibria = symmetric_equilibria_two_process(args.n, c)
    config = {"command": "symmetric-eq", "n": args.n, "c": c, "l1": args.l1, "l2": args.l2}
    _emit(args, to_json({"config": config, "equilibria": equilibria}))
    return 0


def cmd_probe(args) -> int:
    n = args.n
    low = args.c_min if args.c_min is not None else 1.0 / (n - 1)
    high = args.c_max if args.c_max is not None else float(n - 1)
    if args.full:
        grid = np.linspace(low, high, args.points).tolist()
        points = s1_curve(n, grid)
        extra = {}
    else:
        # interior grid, endpoints excluded
        grid = np.linspace(low, high, args.points + 2)[1:-1].tolist()
        report = conjecture_probe(n, grid)
        points = report.points
        extra = {"unique": report.unique, "increasing": report.increasing, "findings": report.findings}

    rows = [
        [n, repr(p.c), "" if p.s1 is None else repr(p.s1), p.root_count, repr(p.limit_share)]
        for p in points
    ]
    header = {"command": "probe", "n": n, "c_min": low, "c_max": high, "points": args.points,
              "full": args.full, **extra, "version": __version__}
    stream = open_output(args.out)
    try:
        write_csv(stream, header, ["n", "c", "s1", "root_count", "limit_share"], rows)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def cmd_payoff(args) -> int:
    rates = Rates.coerce(args.rates)
    tensor = build_tensor(args.n, rates, samples=args.samples, seed=args.seed, exact=args.samples is None)
    tensor.check_invariants(tol=1e-10 if tensor.stderr is None else 1e-8)
    config = {"command": "payoff", "n": args.n, "rates": list(rates.lambdas),
              "samples": args.samples, "seed": args.seed, "version": __version__}
    if args.format == "msgpack":
        if args.out is None or args.out == "-":
            raise DomainError("--format msgpack needs --out FILE")
        with open(args.out, "wb") as f:
            f.write(get_serializer().pack_tensor(tensor, config))
        logger.info(f"Wrote {len(tensor)} entries to {args.out}")
        return 0
    _emit(args, to_json(tensor_to_document(tensor, config)))
    return 0


def cmd_solve(args) -> int:
    if args.tensor:
        tensor = load_tensor(args.tensor)
        config = {"command": "solve", "tensor": args.tensor}
    else:
        if args.n is None or args.rates is None:
            raise DomainError("give --tensor FILE or both --n and --rates")
        rates = Rates.coerce(args.rates)
        tensor = build_tensor(args.n, rates, samples=args.samples, seed=args.seed, exact=args.samples is None)
        config = {"command": "solve", "n": args.n, "rates": list(rates.lambdas), "samples": args.samples}
    config.update({"starts": args.starts, "seed": args.seed, "asymmetric": args.asymmetric,
                   "tol": settings.solver_tol, "version": __version__})

    output = {"config": config, "symmetric": find_symmetric_equilibrium(tensor, starts=args.starts, seed=args.seed)}
    if args.asymmetric:
        output["asymmetric"] = best_response_dynamics(tensor, seed=args.seed)
    _emit(args, to_json(output))
    return 0


def _sweep_config(args) -> SweepConfig:
    values = {}
    if args.config:
        for key, value in dotenv_values(args.config).items():
            if value is not None and value != "":
                values[key.lower()] = value
        for key in ("n_range", "m_range"):
            if isinstance(values.get(key), str):
                try:
                    values[key] = _int_list(values[key])
                except argparse.ArgumentTypeError as e:
                    raise DomainError(f"{args.config}: {key}: {e}") from e
    for key in ("n_range", "m_range", "k", "offset", "t", "seed", "samples", "layout", "out"):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    if args.mc:
        values["exact"] = False
    try:
        return SweepConfig.model_validate(values)
    except ValidationError as e:
        raise DomainError(f"invalid sweep configuration: {e}") from e


def cmd_sweep(args) -> int:
    config = _sweep_config(args)
    cells = config.cells()
    rows = []
    for n, m in tqdm(cells, desc="sweep", unit="cell", file=sys.stderr, disable=args.quiet):
        rates = config.rates_for(m)
        tensor = build_tensor(n, rates, samples=config.samples, seed=config.seed, exact=config.exact)
        metric = diversification_metric(tensor, t=config.t, seed=config.seed)
        if args.verbose:
            tqdm.write(f"n={n} m={m}: {np.round(metric.avg_probs, 3).tolist()} ({metric.t}/{metric.requested} runs)",
                       file=sys.stderr)
        for j, (p, sd) in enumerate(zip(metric.avg_probs, metric.dispersion)):
            rows.append([n, m, j + 1, repr(p), repr(sd), repr(metric.entropy()), metric.t])

    header = {"command": "sweep", **config.model_dump(mode="json"), "version": __version__}
    stream = open_output(config.out)
    try:
        write_csv(stream, header, ["n", "m", "process", "avg_prob", "stddev", "entropy", "runs"], rows)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wtapool",
        description="Equilibria of winners-take-all and Poisson-picking pools",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    verbosity.add_argument("--quiet", action="store_true", help="Log warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="Comparison probabilities of two Poisson counts (JSON)")
    p.add_argument("--l1", type=float, required=True, help="Rate of process 1")
    p.add_argument("--l2", type=float, required=True, help="Rate of process 2")
    p.add_argument("--tol", type=float, default=None, help="Residual tail mass (default: WTAPOOL_TAIL_TOL)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser(
        "boundary",
        help="Favorite/underdog boundary curves (CSV columns: n, lambda1, lambda2; "
             "lambda2 empty when no boundary exists)",
    )
    p.add_argument("--n-list", type=_int_list, default=[2, 3, 4, 5, 6], help="Agent counts, e.g. 2-6 or 3,5")
    p.add_argument("--l1-min", type=float, default=0.1)
    p.add_argument("--l1-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("symmetric-eq", help="Symmetric equilibria of a two-process pool (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=float, default=None, help="Odds ratio prob(Y1>Y2)/prob(Y1<Y2)")
    p.add_argument("--l1", type=float, default=None)
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_symmetric_eq)

    p = sub.add_parser(
        "probe",
        help="s1 as a function of c (CSV columns: n, c, s1, root_count, limit_share)",
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c-min", type=float, default=None, help="Default 1/(n-1)")
    p.add_argument("--c-max", type=float, default=None, help="Default n-1")
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--full", action="store_true",
                   help="Include the endpoints and pure regimes instead of probing the interior")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("payoff", help="Payoff tensor for n agents and given rates")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rates", type=_float_list, required=True, help="Comma-separated rates, process 1 first")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples (default: exact)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["json", "msgpack"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_payoff)

    p = sub.add_parser("solve", help="Symmetric (and optionally one asymmetric) equilibrium (JSON)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rates", type=_float_list, default=None)
    p.add_argument("--tensor", default=None, help="Stored tensor (.json or .msgpack) instead of --n/--rates")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--asymmetric", action="store_true", help="Also run best response dynamics once")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser(
        "sweep",
        help="Diversification sweep (CSV columns: n, m, process, avg_prob, stddev, entropy, runs)",
    )
    p.add_argument("--config", default=None, help="key=value file with SweepConfig fields")
    p.add_argument("--n-range", dest="n_range", type=_int_list, default=None)
    p.add_argument("--m-range", dest="m_range", type=_int_list, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--offset", type=float, default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--mc", action="store_true", help="Always use Monte Carlo tensors")
    p.add_argument("--layout", choices=["grid", "lines"], default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)

    try:
        return args.func(args)
    except WtaPoolError as e:
        logger.error(f"{type(e).__name__}: {e}")
        for key, value in getattr(e, "diagnostics", {}).items():
            logger.error(f"  {key}: {value}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
