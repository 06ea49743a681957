"""Command-line front end: parse tree files, run the requested analysis, and
emit a machine-readable JSON report.

Exit codes: 0 when every checked verdict passes, 1 when a verdict fails, 2 on
usage, schema or I/O problems.  Tree-side subcommands are exact, so their exit
codes never depend on floating point.  Reports are written atomically and echo
the fully resolved configuration, a provenance stamp and wall-clock timing.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from fractions import Fraction
from typing import Optional

from . import __version__, scenarios, treeio
from .arbitrage import WealthProblem, check_both, check_na, check_na1
from .deflator import Na1FailsOnAtom, construct_deflator, verify_deflation
from .enlargement import (EnlargementSpec, IncompleteMarketError, insider_example,
                          jacod_check, log_utility_identity, universal_density)
from .filtered_space import AdaptedProcess, StoppingTime
from .kunita_yoeurp import (KyError, build_dominating_measure,
                            check_stopped_price, verify_ky)
from .montecarlo import (DiffusionScenario, InsiderDriftScenario, LevyScenario,
                         MartingaleTest, analytic_frozen_mean,
                         deflated_price_test, density_mean_test,
                         information_drift_deflator, sample_diffusion_paths,
                         sample_insider_paths, sample_levy_paths,
                         simulate_deflated_wealth, simulate_levy_counterexample,
                         simulate_survival_measure)

SCHEMA_VERSION = "1"


class CliError(Exception):
    """Usage or input problem: exits with code 2."""


def fr(x: Fraction) -> str:
    return str(x)


def strategy_json(strategy) -> dict:
    return {str(node): [fr(x) for x in vec]
            for node, vec in sorted(strategy.steps.items())}


def test_json(t: MartingaleTest) -> dict:
    return {"mean": t.mean, "se": t.se, "z": t.z, "n_paths": t.n_paths,
            "target": t.target, "crit": t.crit, "verdict": t.verdict}


def load_tree(path: str) -> treeio.TreeFile:
    try:
        return treeio.load(path)
    except FileNotFoundError as exc:
        raise CliError(f"tree file not found: {path}") from exc
    except treeio.TreeFileError as exc:
        raise CliError(f"malformed tree file {path}: {exc}") from exc


def need_process(tf: treeio.TreeFile, name: str, path: str) -> AdaptedProcess:
    if name not in tf.processes:
        raise CliError(f"{path}: no process named {name!r} "
                       f"(available: {sorted(tf.processes)})")
    proc = tf.processes[name]
    proc.validate_for(tf.tree)
    return proc


def need_measure(tf: treeio.TreeFile, path: str):
    if tf.P is None:
        raise CliError(f"{path}: tree file carries no measure P")
    return tf.P


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if hasattr(value, "item"):          # numpy scalars
        return value.item()
    raise TypeError(f"not JSON serializable: {value!r}")


def emit_report(report: dict, out: Optional[str]) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out:
        treeio.write_atomic(out, text)
    else:
        sys.stdout.write(text)


def make_report(args, operation: str, started: float, verdicts: dict,
                values: dict, witnesses: Optional[dict] = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items())
                   if k not in ("func",)},
        "provenance": {"module": operation.split(".")[0], "operation": operation},
        "verdicts": verdicts,
        "values": values,
        "witnesses": witnesses or {},
        "timing_s": round(time.perf_counter() - started, 6),
        "version": __version__,
    }


# -- subcommands -----------------------------------------------------------------


def cmd_check(args) -> int:
    started = time.perf_counter()
    tf = load_tree(args.tree)
    problem = WealthProblem(tf.tree, need_measure(tf, args.tree),
                            need_process(tf, args.price, args.tree))
    if args.na and not args.na1 and not args.both:
        result = check_na(problem)
    elif args.na1 and not args.na and not args.both:
        result = check_na1(problem)
    else:
        result = check_both(problem)
    verdicts = {}
    values = {}
    if result.na_holds is not None:
        verdicts["na"] = result.na_holds
        values["na_optimum"] = fr(result.na_optimum)
    if result.na1_holds is not None:
        verdicts["na1"] = result.na1_holds
        values["optimal_value"] = ("inf" if result.unbounded
                                   else fr(result.optimal_value))
    witnesses = {}
    if result.witness is not None:
        witnesses["strategy"] = strategy_json(result.witness)
    emit_report(make_report(args, "arbitrage.check", started, verdicts, values,
                            witnesses), args.out)
    return 0 if all(verdicts.values()) else 1


def cmd_deflate(args) -> int:
    started = time.perf_counter()
    tf = load_tree(args.tree)
    problem = WealthProblem(tf.tree, need_measure(tf, args.tree),
                            need_process(tf, args.price, args.tree))
    try:
        deflator = construct_deflator(problem)
    except Na1FailsOnAtom as exc:
        report = make_report(args, "deflator.construct", started,
                             {"na1": False, "constructed": False},
                             {"atom": exc.atom,
                              "ray": [fr(x) for x in exc.ray]})
        emit_report(report, args.report)
        return 1
    if args.normalize:
        deflator = deflator.normalized(tf.tree, tf.P)
    certificate = verify_deflation(problem, deflator)
    tf.processes[args.name] = deflator.Z
    treeio.save(tf, args.out)
    report = make_report(
        args, "deflator.construct", started,
        {"na1": True, "constructed": True, "certified": certificate.certified},
        {"initial_value": fr(deflator.Z.at(tf.tree.root)), "written": args.out})
    emit_report(report, args.report)
    return 0 if certificate.certified else 1


def _dominating_measure(args, tf):
    P = need_measure(tf, args.tree)
    Z = need_process(tf, args.deflator, args.tree)
    if args.normalize:
        scale = Z.at(tf.tree.root)
        Z = AdaptedProcess.of_scalars(
            {v.id: Z.at(v.id) / scale for v in tf.tree.nodes})
    try:
        return build_dominating_measure(tf.tree, P, Z)
    except (KyError, ValueError) as exc:
        raise CliError(f"cannot build the dominating measure: {exc}") from exc


def cmd_foellmer(args) -> int:
    started = time.perf_counter()
    tf = load_tree(args.tree)
    dm = _dominating_measure(args, tf)
    points = [{"leaf": leaf, "zeta": "inf" if zeta is None else zeta,
               "mass": fr(mass)}
              for (leaf, zeta), mass in sorted(
                  dm.Q.items(), key=lambda kv: (kv[0][0], kv[0][1] or 10 ** 9))]
    payload = {"points": points}
    treeio.write_atomic(args.out, treeio.canonical_dumps(payload))
    report = make_report(args, "kunita_yoeurp.build", started,
                         {"built": True},
                         {"points": len(points), "written": args.out})
    emit_report(report, args.report)
    return 0


def cmd_ky_verify(args) -> int:
    started = time.perf_counter()
    tf = load_tree(args.tree)
    dm = _dominating_measure(args, tf)
    taus = []
    if args.hitting > 0:
        import random as _random

        rng = _random.Random(args.seed)
        price = tf.processes.get(args.price) if args.price else None
        source = price if price is not None else dm.Z
        for _ in range(args.hitting):
            level = Fraction(rng.randint(-16, 16), 4)
            taus.append(StoppingTime.hitting_time(tf.tree, source, level))
    result = verify_ky(dm, taus)
    report = make_report(args, "kunita_yoeurp.verify", started,
                         {"kunita_yoeurp": result.passed},
                         {"failures": result.failures,
                          "stopping_times": len(taus)})
    emit_report(report, args.out)
    return 0 if result.passed else 1


def cmd_stopped_check(args) -> int:
    started = time.perf_counter()
    tf = load_tree(args.tree)
    dm = _dominating_measure(args, tf)
    S = need_process(tf, args.price, args.tree)
    result = check_stopped_price(dm, S)
    report = make_report(
        args, "kunita_yoeurp.stopped_price", started,
        {"martingale": result.is_martingale,
         "deflation": result.deflation_ok},
        {"violations": [{"atom": atom, "drift": [fr(x) for x in drift]}
                        for atom, drift in result.violations]})
    emit_report(report, args.out)
    return 0 if result.is_martingale and result.deflation_ok else 1


def load_labels(path: str, tf: treeio.TreeFile) -> dict[int, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"label map not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed label map {path}: {exc}") from exc
    try:
        return {int(k): str(v) for k, v in raw.items()}
    except (TypeError, ValueError) as exc:
        raise CliError(f"label map {path}: keys must be leaf ids") from exc


def cmd_enlarge(args) -> int:
    started = time.perf_counter()
    tf = load_tree(args.tree)
    spec = EnlargementSpec(tf.tree, need_measure(tf, args.tree),
                           load_labels(args.label_map, args.tree))
    if args.action == "jacod":
        result = jacod_check(spec)
        report = make_report(
            args, "enlargement.jacod", started,
            {"jacod": result.holds, "reverse": result.reverse_holds,
             "equivalent": result.equivalent},
            {"density": {f"{v},{lab}": fr(y)
                         for (v, lab), y in sorted(result.Y.items())}})
        emit_report(report, args.out)
        return 0 if result.holds else 1
    if args.action == "universal-z":
        Z = universal_density(spec)
        report = make_report(
            args, "enlargement.universal_density", started,
            {"built": True},
            {"density": {f"{v},{lab}": fr(z)
                         for (v, lab), z in sorted(Z.values.items())}})
        emit_report(report, args.out)
        return 0
    S = need_process(tf, args.price, args.tree)
    if args.action == "insider":
        if not args.event:
            raise CliError("insider analysis needs --event LABEL[,LABEL...]")
        try:
            result = insider_example(spec, S, set(args.event.split(",")))
        except (IncompleteMarketError, ValueError) as exc:
            raise CliError(str(exc)) from exc
        report = make_report(
            args, "enlargement.insider", started,
            {"emm_infeasible": result.emm_infeasible,
             "na1_enlarged": bool(result.na1_product.na1_holds),
             "certified": result.contradiction_certified},
            {"replication_cost": fr(result.value_process.at(0)),
             "emm_program_value": (fr(result.emm_result.value)
                                   if result.emm_result.value is not None
                                   else "infeasible")},
            {"hedge": strategy_json(result.hedge)})
        emit_report(report, args.out)
        return 0 if result.contradiction_certified else 1
    if args.action == "logutility":
        try:
            result = log_utility_identity(spec, S)
        except (IncompleteMarketError, ValueError) as exc:
            raise CliError(str(exc)) from exc
        report = make_report(
            args, "enlargement.log_utility", started,
            {"identity": abs(result.identity_gap) <= result.FLOAT_TOLERANCE},
            {"u_base": result.u_base, "u_insider": result.u_insider,
             "mutual_information": result.mutual_information,
             "gap": result.identity_gap,
             "float_tolerance": result.FLOAT_TOLERANCE})
        emit_report(report, args.out)
        return 0
    raise CliError(f"unknown enlarge action {args.action!r}")


def load_params(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"params file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed params file {path}: {exc}") from exc


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    defaults = {"diffusion": {"mu": 0.2, "sigma": 1.0},
                "levy": {"a": 2.0, "b": 1.0},
                "insider": {}}
    params = defaults.get(args.scenario, {}) | (
        load_params(args.params) if args.params else {})
    for key in ("paths", "steps", "seed"):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    params.setdefault("seed", 0)
    tests: dict[str, MartingaleTest] = {}
    expectations: dict[str, bool] = {}
    values: dict = {}
    threads = args.threads

    def adjust(t: MartingaleTest) -> MartingaleTest:
        return dataclasses.replace(t, crit=args.confidence)

    sampler = None
    try:
        if args.scenario == "diffusion":
            pi = params.pop("pi", 1.0)
            sc = DiffusionScenario(**params)
            sampler = lambda n: sample_diffusion_paths(sc, n)
            tests["density_mean"] = adjust(density_mean_test(sc, threads))
            tests["deflated_price"] = adjust(deflated_price_test(sc, threads))
            tests["deflated_wealth"] = adjust(
                simulate_deflated_wealth(sc, pi, threads))
            allowance = 2.0 / sc.steps
            expectations = {
                "density_mean": tests["density_mean"].consistent,
                "deflated_price": abs(tests["deflated_price"].mean)
                <= tests["deflated_price"].crit * tests["deflated_price"].se
                + allowance,
                "deflated_wealth": abs(tests["deflated_wealth"].mean)
                <= tests["deflated_wealth"].crit * tests["deflated_wealth"].se
                + allowance,
            }
            values["discretization_allowance"] = allowance
        elif args.scenario == "levy":
            pi = params.pop("pi", 1.0)
            sc = LevyScenario(**params)
            sampler = lambda n: sample_levy_paths(sc, n)
            raw, corrected = simulate_levy_counterexample(sc, threads)
            survival = simulate_survival_measure(sc, pi, threads)
            tests = {"frozen": adjust(raw), "repaired": adjust(corrected),
                     "survival": adjust(survival)}
            raw, corrected, survival = (tests["frozen"], tests["repaired"],
                                        tests["survival"])
            analytic = analytic_frozen_mean(sc)
            expectations = {
                "frozen_rejects": raw.rejects,
                "frozen_matches_analytic":
                    abs(raw.mean - analytic) <= raw.crit * raw.se,
                "repaired_consistent": corrected.consistent,
                "survival_gap_nonpositive":
                    survival.mean <= survival.crit * survival.se,
            }
            values["analytic_frozen_mean"] = analytic
        elif args.scenario == "insider":
            sc = InsiderDriftScenario(**params)
            sampler = lambda n: sample_insider_paths(sc, n)
            result = information_drift_deflator(sc, threads)
            tests = {"density_mean": adjust(result.density_mean),
                     "deflated_motion": adjust(result.deflated_motion)}
            allowance = 2.0 / sc.steps
            expectations = {
                name: abs(t.mean) <= t.crit * t.se + allowance
                for name, t in tests.items()
            }
            values["discretization_allowance"] = allowance
        else:
            raise CliError(f"unknown scenario {args.scenario!r}")
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid simulation parameters: {exc}") from exc

    values["tests"] = {name: test_json(t) for name, t in tests.items()}
    report = make_report(args, f"montecarlo.{args.scenario}", started,
                         expectations, values)
    emit_report(report, args.out)
    if args.csv:
        rows = ["name,mean,se,z,n_paths,verdict"]
        rows += [f"{name},{t.mean!r},{t.se!r},{t.z!r},{t.n_paths},{t.verdict}"
                 for name, t in tests.items()]
        treeio.write_atomic(args.csv, "\n".join(rows) + "\n")
    if args.paths_csv and sampler is not None:
        batch = sampler(args.sample_paths)
        rows = batch.summary_rows()
        header = list(rows[0]) if rows else ["path", "seed"]
        lines = [",".join(header)]
        lines += [",".join(repr(row[k]) if isinstance(row[k], float)
                           else str(row[k]) for k in header) for row in rows]
        treeio.write_atomic(args.paths_csv, "\n".join(lines) + "\n")
    return 0 if all(expectations.values()) else 1


def cmd_scenario(args) -> int:
    started = time.perf_counter()
    try:
        written = scenarios.write_scenario(args.name, args.dir)
    except KeyError:
        raise CliError(f"unknown scenario {args.name!r}; available: "
                       f"{', '.join(scenarios.available())}")
    report = make_report(args, "cli.scenario", started, {"written": True},
                         {"files": written})
    emit_report(report, args.out)
    return 0


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deflator-lab",
        description="Exact arbitrage and deflator laboratory on event trees, "
                    "with seeded Monte Carlo for the continuous-time examples.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--pivot-rule", choices=["bland"], default="bland",
                        help="simplex pivot selection (only the anti-cycling "
                             "rule is implemented; echoed into reports)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--out", default=out_default,
                       help="write the JSON report here (default: stdout)")

    p = sub.add_parser("check", help="decide (NA) and (NA1) for a priced tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--price", default="S")
    p.add_argument("--na", action="store_true")
    p.add_argument("--na1", action="store_true")
    p.add_argument("--both", action="store_true",
                   help="check both notions (the default)")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("deflate", help="construct the optimal-value density")
    p.add_argument("--tree", required=True)
    p.add_argument("--price", default="S")
    p.add_argument("--out", required=True,
                   help="tree file to write, with the density added")
    p.add_argument("--name", default="Z")
    p.add_argument("--normalize", action="store_true",
                   help="rescale so the initial value is 1")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_deflate)

    p = sub.add_parser("foellmer",
                       help="build the dominating measure on the death-time "
                            "extension")
    p.add_argument("--tree", required=True)
    p.add_argument("--deflator", default="Z")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True, help="extension measure JSON")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_foellmer)

    p = sub.add_parser("ky-verify", help="verify the decomposition properties")
    p.add_argument("--tree", required=True)
    p.add_argument("--deflator", default="Z")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--price", default=None,
                   help="process whose hitting times drive the stopped checks")
    p.add_argument("--hitting", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_ky_verify)

    p = sub.add_parser("stopped-check",
                       help="Q-martingale test of the pre-death price")
    p.add_argument("--tree", required=True)
    p.add_argument("--deflator", default="Z")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--price", default="S")
    common(p)
    p.set_defaults(func=cmd_stopped_check)

    p = sub.add_parser("enlarge", help="label-enlargement analysis")
    p.add_argument("action", choices=["jacod", "universal-z", "insider",
                                      "logutility"])
    p.add_argument("--tree", required=True)
    p.add_argument("--label-map", required=True)
    p.add_argument("--price", default="S")
    p.add_argument("--event", default=None,
                   help="comma-separated labels forming the insider event")
    common(p)
    p.set_defaults(func=cmd_enlarge)

    p = sub.add_parser("simulate", help="seeded Monte Carlo scenarios")
    p.add_argument("--scenario", required=True,
                   choices=["diffusion", "levy", "insider"])
    p.add_argument("--params", default=None, help="scenario parameter JSON")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--confidence", type=float, default=3.0,
                   help="two-sided verdict threshold in standard errors")
    p.add_argument("--csv", default=None, help="write test summaries as CSV")
    p.add_argument("--paths-csv", default=None,
                   help="write per-path summaries of sampled trajectories")
    p.add_argument("--sample-paths", type=int, default=100,
                   help="how many trajectories --paths-csv summarizes")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="write a bundled fixture")
    p.add_argument("name")
    p.add_argument("--dir", default=".")
    common(p)
    p.set_defaults(func=cmd_scenario)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through
        return int(exc.code or 0)
    env_seed = os.environ.get("DEFLATOR_LAB_SEED")
    if env_seed is not None and hasattr(args, "seed"):
        try:
            args.seed = int(env_seed)
        except ValueError:
            sys.stderr.write(f"DEFLATOR_LAB_SEED must be an integer, got "
                             f"{env_seed!r}\n")
            return 2
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
