"""Command-line front end: CSV ingestion, the subgroup predicate DSL,
and the audit / bounds / oracle commands with versioned JSON output.

Every command is deterministic given --seed; reports carry the resolved
configuration and a format-version field and contain no timestamps, so a
fixed seed reproduces them byte for byte.  Exit codes: 0 for pass or
inconclusive, 2 for a failed audit verdict, 1 for usage or runtime
errors (reported as a machine-readable JSON error object).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from collections.abc import Callable, Mapping

import numpy as np

from . import bounds as bounds_mod
from . import concentration as conc_mod
from . import mechanisms as mech_mod
from .core import (
    Collection,
    Dataset,
    EmpiricalDistribution,
    FeatureValue,
    Lens,
    Record,
    Subpopulation,
)
from .errors import (
    ConfigError,
    DemcohError,
    DuplicateHeaderError,
    EmptyFileError,
    RaggedRowError,
)
from .experiment import (
    AuditConfig,
    VERDICT_FAIL,
    audit_report,
    estimate_beta,
)
from .metric import wasserstein1, wasserstein1_lp_oracle

DEFAULT_NULL_TOKEN = "NULL"


def load_csv(path: str, null_token: str = DEFAULT_NULL_TOKEN) -> Dataset:
    """One record per data row; header row gives the schema; cells equal
    to the null token become the null symbol."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError(f"{path}: no header row") from None
        if len(set(header)) != len(header):
            raise DuplicateHeaderError(f"{path}: duplicate header names")
        rows = []
        for line_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise RaggedRowError(line_number, len(header), len(row))
            rows.append(tuple(None if cell == null_token else cell for cell in row))
    return Dataset.from_rows(header, rows)


def parse_predicate(expr: str) -> Callable[[Mapping[str, FeatureValue]], bool]:
    """Compile a conjunction of feature=value / feature!=value atoms.

    The empty expression accepts everything.  A null feature never equals
    a value atom and always satisfies a != atom.
    """
    atoms = []
    for raw in expr.split("&"):
        raw = raw.strip()
        if not raw:
            continue
        if "!=" in raw:
            name, value = raw.split("!=", 1)
            atoms.append((name.strip(), value.strip(), False))
        elif "=" in raw:
            name, value = raw.split("=", 1)
            atoms.append((name.strip(), value.strip(), True))
        else:
            raise ConfigError(f"cannot parse predicate atom {raw!r}")

    def check(cell: Mapping[str, FeatureValue]) -> bool:
        for name, value, want_equal in atoms:
            if name not in cell:
                raise ConfigError(f"predicate references unknown feature {name!r}")
            if (cell[name] == value) != want_equal:
                return False
        return True

    return check


def compile_subpopulation(name: str, expr: str, schema: tuple[str, ...]) -> Subpopulation:
    check = parse_predicate(expr)
    # Validate feature names once, against an all-null row.
    check(dict(zip(schema, [None] * len(schema))))
    index = {feat: i for i, feat in enumerate(schema)}

    def predicate(record: Record) -> bool:
        return check({feat: record.features[i] for feat, i in index.items()})

    return Subpopulation(name, predicate)


def _lens_from_spec(spec, schema: tuple[str, ...]) -> Lens:
    if spec is None or spec == "all":
        return Lens.full(schema)
    return Lens(frozenset(spec))


def build_curator_factory(spec: Mapping, schema: tuple[str, ...]):
    name = spec.get("name")
    if name == "clear-release":
        return mech_mod.clear_release
    if name == "randomized-response":
        epsilon = float(spec["epsilon"])
        features = spec.get("features")
        return lambda: mech_mod.randomized_response(epsilon, features)
    if name == "laplace-histogram":
        epsilon = float(spec["epsilon"])
        lens = _lens_from_spec(spec.get("lens"), schema)
        domains = spec["domains"]
        return lambda: mech_mod.laplace_histogram(epsilon, lens, domains)
    if name == "subsample":
        k = int(spec["k"])
        return lambda: mech_mod.subsample_release(k)
    raise ConfigError(f"unknown curator {name!r}")


def build_learner_factory(spec: Mapping, schema: tuple[str, ...]):
    name = spec.get("name")
    if name == "memorizing":
        lens = None if spec.get("lens") is None else _lens_from_spec(spec["lens"], schema)
        return lambda: mech_mod.memorizing_learner(lens)
    if name == "histogram-threshold":
        target = parse_predicate(spec["target"])
        lens = None if spec.get("lens") is None else _lens_from_spec(spec["lens"], schema)
        return lambda: mech_mod.histogram_threshold_learner(target, lens)
    if name == "constant":
        value = float(spec.get("value", 0.0))
        return lambda: mech_mod.constant_learner(value)
    raise ConfigError(f"unknown learner {name!r}")


def _coherence_params(bounds_spec: Mapping, collection_size: int, n: int) -> bounds_mod.CoherenceParams:
    return bounds_mod.CoherenceParams(
        alpha=float(bounds_spec["alpha"]),
        beta=float(bounds_spec["beta"]),
        collection_size=int(bounds_spec.get("collection_size") or collection_size),
        n=float(bounds_spec.get("n") or n),
    )


def compute_bound(bounds_spec: Mapping, collection_size: int, n: int) -> bounds_mod.BoundResult:
    regime = bounds_spec.get("regime")
    params = _coherence_params(bounds_spec, collection_size, n)
    if regime == "maxinfo":
        return bounds_mod.gamma_from_maxinfo(float(bounds_spec["zeta"]), params)
    if regime == "pure":
        return bounds_mod.gamma_pure_dp(float(bounds_spec["epsilon"]), params)
    if regime == "approx":
        return bounds_mod.gamma_approx_dp(
            float(bounds_spec["epsilon"]),
            float(bounds_spec["delta"]),
            params,
            formula=bounds_spec.get("formula", "proof"),
        )
    raise ConfigError(f"unknown bounds regime {regime!r}")


def _resolve_config(args) -> dict:
    config: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    for key in ("dataset", "null_token", "alpha", "gamma", "trials", "seed", "threads"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            config[key] = value
    config.setdefault("null_token", DEFAULT_NULL_TOKEN)
    missing = [
        key
        for key in ("dataset", "alpha", "gamma", "trials", "seed", "curator", "learner", "subpopulations")
        if key not in config
    ]
    if missing:
        raise ConfigError(f"missing required config keys: {missing}")
    return config


def _echo_config(config: Mapping, gamma: float) -> dict:
    # Execution details (thread count, output path) are deliberately left
    # out so reports are identical across machines and --threads values.
    echo = {k: v for k, v in config.items() if k not in ("threads",)}
    echo["gamma"] = gamma
    return echo


def cmd_audit(args) -> int:
    config = _resolve_config(args)
    dataset = load_csv(config["dataset"], config["null_token"])
    if len(dataset) < 2 or len(dataset) % 2:
        raise ConfigError(f"audit needs an even dataset size >= 2, got {len(dataset)}")
    schema = dataset.schema
    collection = Collection(
        tuple(
            compile_subpopulation(s["name"], s.get("where", ""), schema)
            for s in config["subpopulations"]
        )
    )
    lens = _lens_from_spec(config.get("lens"), schema)

    bound = None
    if config.get("bounds"):
        bound = compute_bound(config["bounds"], len(collection), len(dataset))

    gamma = config["gamma"]
    if gamma == "from-bounds":
        if bound is None:
            raise ConfigError('gamma "from-bounds" needs a bounds spec')
        gamma = bound.gamma
    gamma = float(gamma)

    audit_config = AuditConfig(
        alpha=float(config["alpha"]),
        gamma=gamma,
        trials=int(config["trials"]),
        seed=int(config["seed"]),
        collection=collection,
        lens=lens,
    )
    make_curator = build_curator_factory(config["curator"], schema)
    make_learner = build_learner_factory(config["learner"], schema)
    threads = int(config.get("threads") or os.cpu_count() or 1)
    estimate = estimate_beta(make_curator, make_learner, dataset, audit_config, threads)
    report = audit_report(estimate, bound, _echo_config(config, gamma))
    _emit(report.to_json_dict(), args.out)
    return 2 if report.verdict == VERDICT_FAIL else 0


def cmd_bounds(args) -> int:
    params_kwargs = dict(
        alpha=args.alpha,
        beta=args.beta,
        collection_size=args.collection_size,
        n=args.n,
    )
    if args.invert:
        if args.target_gamma is None:
            raise ConfigError("--invert needs --target-gamma")
        params = bounds_mod.CoherenceParams(**params_kwargs)
        epsilon = bounds_mod.max_epsilon_for(
            args.target_gamma, params, regime=args.regime, delta=args.delta
        )
        _emit({"epsilon": epsilon, "regime": args.regime, "target_gamma": args.target_gamma}, args.out)
        return 0
    if args.zeta is not None:
        params = bounds_mod.CoherenceParams(**params_kwargs)
        result = bounds_mod.gamma_from_maxinfo(args.zeta, params)
    elif args.regime == "pure":
        if args.epsilon is None:
            raise ConfigError("the pure regime needs --epsilon")
        params = bounds_mod.CoherenceParams(**params_kwargs)
        result = bounds_mod.gamma_pure_dp(args.epsilon, params)
    elif args.regime == "approx":
        if args.epsilon is None or args.delta is None:
            raise ConfigError("the approx regime needs --epsilon and --delta")
        params = bounds_mod.CoherenceParams(**params_kwargs)
        result = bounds_mod.gamma_approx_dp(
            args.epsilon, args.delta, params, formula=args.formula
        )
    else:
        raise ConfigError("give --zeta, or --regime pure/approx with a budget")
    _emit(result.to_json_dict(), args.out)
    return 0


def _parse_values(text: str) -> EmpiricalDistribution:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse value list {text!r}: {exc}") from None
    return EmpiricalDistribution(np.asarray(values))


def cmd_oracle(args) -> int:
    sub = args.oracle
    if sub == "hypergeom":
        table = conc_mod.hypergeom_exact(conc_mod.HypergeomParams(args.b, args.a, args.s))
        payload = {
            "support": [int(k) for k in table.support],
            "pmf": [float(p) for p in table.pmf],
            "cdf": [float(c) for c in table.cdf],
            "mean": table.mean(),
        }
    elif sub == "hypergeom-bound":
        bound = conc_mod.hypergeom_tail_bound(
            conc_mod.HypergeomParams(args.b, args.a, args.s), args.dev
        )
        payload = {"bound": bound, "dev": args.dev}
    elif sub == "mcdiarmid":
        if args.half_split:
            value = conc_mod.mcdiarmid_half_split(args.n, args.sensitivity, args.t)
        else:
            value = conc_mod.mcdiarmid_without_replacement(
                args.n, args.m, args.sensitivity, args.t
            )
        payload = {"bound": value}
    elif sub == "azuma":
        result = conc_mod.azuma_tail(args.n, args.step_bound, args.drift, args.t)
        payload = {"bound": result.probability, "threshold": result.threshold}
    elif sub == "fixed-predictor-bound":
        result = conc_mod.fixed_predictor_gap_bound(args.m, args.alpha, args.mu)
        payload = {"bound": result.probability, "vacuous": result.vacuous}
    elif sub == "maxinfo-exact":
        table = json.loads(args.table)
        value = bounds_mod.exact_max_information(table, args.beta_level)
        payload = {"max_information": _json_float(value)}
    elif sub == "w1":
        payload = {"distance": wasserstein1(_parse_values(args.p), _parse_values(args.q))}
    elif sub == "w1-lp":
        payload = {
            "distance": wasserstein1_lp_oracle(_parse_values(args.p), _parse_values(args.q))
        }
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown oracle {sub!r}")
    _emit(payload, args.out)
    return 0


def _json_float(value: float):
    # JSON has no infinities; report them symbolically.
    if value == float("inf"):
        return "inf"
    if value == float("-inf"):
        return "-inf"
    return value


def _emit(payload: dict, out_path: str | None):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the report surface
    # reserves 2 for failed audits, so usage errors become ConfigError.
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="demcoh", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    audit = commands.add_parser("audit", help="run the split-audit experiment")
    audit.add_argument("--config", help="JSON config file; flags override it")
    audit.add_argument("--dataset", help="CSV file with a header row")
    audit.add_argument("--null-token", dest="null_token")
    audit.add_argument("--alpha", type=float)
    audit.add_argument("--gamma")
    audit.add_argument("--trials", type=int)
    audit.add_argument("--seed", type=int)
    audit.add_argument("--threads", type=int)
    audit.add_argument("--out")
    audit.set_defaults(handler=cmd_audit)

    bounds = commands.add_parser("bounds", help="evaluate the budget calculators")
    bounds.add_argument("--alpha", type=float, required=True)
    bounds.add_argument("--beta", type=float, required=True)
    bounds.add_argument("--collection-size", dest="collection_size", type=int, default=1)
    bounds.add_argument("--n", type=float)
    bounds.add_argument("--zeta", type=float)
    bounds.add_argument("--regime", choices=("pure", "approx"))
    bounds.add_argument("--epsilon", type=float)
    bounds.add_argument("--delta", type=float)
    bounds.add_argument(
        "--formula", choices=("proof", "printed-265", "printed-133"), default="proof"
    )
    bounds.add_argument("--invert", action="store_true")
    bounds.add_argument("--target-gamma", dest="target_gamma", type=float)
    bounds.add_argument("--out")
    bounds.set_defaults(handler=cmd_bounds)

    oracle = commands.add_parser("oracle", help="verification oracles")
    oracles = oracle.add_subparsers(dest="oracle", required=True)

    hyp = oracles.add_parser("hypergeom")
    hyp.add_argument("--b", type=int, required=True)
    hyp.add_argument("--a", type=int, required=True)
    hyp.add_argument("--s", type=int, required=True)

    hyb = oracles.add_parser("hypergeom-bound")
    hyb.add_argument("--b", type=int, required=True)
    hyb.add_argument("--a", type=int, required=True)
    hyb.add_argument("--s", type=int, required=True)
    hyb.add_argument("--dev", type=float, required=True)

    mcd = oracles.add_parser("mcdiarmid")
    mcd.add_argument("--n", type=int, required=True)
    mcd.add_argument("--m", type=int)
    mcd.add_argument("--sensitivity", type=float, required=True)
    mcd.add_argument("--t", type=float, required=True)
    mcd.add_argument("--half-split", dest="half_split", action="store_true")

    azu = oracles.add_parser("azuma")
    azu.add_argument("--n", type=int, required=True)
    azu.add_argument("--step-bound", dest="step_bound", type=float, required=True)
    azu.add_argument("--drift", type=float, default=0.0)
    azu.add_argument("--t", type=float, required=True)

    fpb = oracles.add_parser("fixed-predictor-bound")
    fpb.add_argument("--m", type=int, required=True)
    fpb.add_argument("--alpha", type=float, required=True)
    fpb.add_argument("--mu", type=float, required=True)

    mie = oracles.add_parser("maxinfo-exact")
    mie.add_argument("--table", required=True, help="JSON 2-D probability table")
    mie.add_argument("--beta-level", dest="beta_level", type=float, default=0.0)

    w1p = oracles.add_parser("w1")
    w1p.add_argument("--p", required=True, help="comma-separated values")
    w1p.add_argument("--q", required=True, help="comma-separated values")

    wlp = oracles.add_parser("w1-lp")
    wlp.add_argument("--p", required=True)
    wlp.add_argument("--q", required=True)

    for sub in (hyp, hyb, mcd, azu, fpb, mie, w1p, wlp):
        sub.add_argument("--out")
    oracle.set_defaults(handler=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except DemcohError as exc:
        sys.stdout.write(
            json.dumps(
                {"error": {"type": type(exc).__name__, "message": str(exc)}},
                sort_keys=True,
            )
            + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
