"""Command-line entry point.

Subcommands: run, sweep-n, sweep-gamma, compare, tune, verify, bounds.
Flags mirror ExperimentConfig fields; --config loads a JSON file whose
keys override the defaults, and explicit flags override the file.
Exits nonzero on invalid configuration or any failed verify check.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import consensus, harness, mixing, theory
from .compression import CompressionError
from .graph import GraphError
from .harness import ExperimentConfig, HarnessError

_UNSET = object()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--out", dest="out_dir", type=str, default=_UNSET)
    p.add_argument("--topology", type=str, default=_UNSET, help="path|ring|complete|file:<path>")
    p.add_argument("--n", type=int, default=_UNSET)
    p.add_argument("--d", type=int, default=_UNSET)
    p.add_argument("--compressor", type=str, default=_UNSET, help="identity|rand_<k>|top_<k>|qsgd_<k>")
    p.add_argument("--gamma", type=float, default=_UNSET)
    p.add_argument("--sigma", type=float, default=_UNSET, help="momentum override")
    p.add_argument("--epsilon", type=float, default=_UNSET)
    p.add_argument("--max-rounds", dest="max_rounds", type=int, default=_UNSET)
    p.add_argument("--trials", type=int, default=_UNSET)
    p.add_argument("--seed", dest="base_seed", type=int, default=_UNSET)
    p.add_argument("--init", type=str, default=_UNSET, choices=["uniform", "normal"])
    p.add_argument("--workers", type=int, default=_UNSET)
    p.add_argument("--no-traces", dest="save_traces", action="store_const", const=False, default=_UNSET)
    p.add_argument("--trace-stride", dest="trace_stride", type=int, default=_UNSET)


def _csv_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _csv_strs(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossipsim",
        description="Deterministic simulator for compressed gossip average consensus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one configuration, one or more trials")
    p_run.add_argument("--variant", type=str, default=_UNSET, choices=list(consensus.VARIANTS))
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep-n", help="sweep network size for one or more variants")
    p_sweep.add_argument("--variants", type=_csv_strs, default=_UNSET, help="comma-separated")
    p_sweep.add_argument("--n-list", dest="n_list", type=_csv_ints, default=_UNSET)
    p_sweep.add_argument("--gamma-grid", dest="gamma_grid", type=_csv_floats, default=_UNSET,
                         help="tune per cell instead of fixed gamma")
    _add_common(p_sweep)

    p_sg = sub.add_parser("sweep-gamma", help="sweep step-size (and optionally n) for one variant")
    p_sg.add_argument("--variant", type=str, default=_UNSET, choices=list(consensus.VARIANTS))
    p_sg.add_argument("--gamma-grid", dest="gamma_grid", type=_csv_floats, default=_UNSET)
    p_sg.add_argument("--n-list", dest="n_list", type=_csv_ints, default=_UNSET)
    _add_common(p_sg)

    p_cmp = sub.add_parser("compare", help="several variants on one topology")
    p_cmp.add_argument("--variants", type=_csv_strs, default=_UNSET)
    p_cmp.add_argument("--gamma-grid", dest="gamma_grid", type=_csv_floats, default=_UNSET,
                       help="tune per variant instead of fixed gamma")
    _add_common(p_cmp)

    p_tune = sub.add_parser("tune", help="grid line search for the best step-size")
    p_tune.add_argument("--variants", type=_csv_strs, default=_UNSET)
    p_tune.add_argument("--n-list", dest="n_list", type=_csv_ints, default=_UNSET)
    p_tune.add_argument("--gamma-grid", dest="gamma_grid", type=_csv_floats, default=_UNSET)
    _add_common(p_tune)

    p_ver = sub.add_parser("verify", help="numerical verification checks")
    p_ver.add_argument("--checks", type=_csv_strs, default=None,
                       help="subset of check names (default: all)")
    p_ver.add_argument("--json", dest="json_out", type=str, default=None,
                       help="also write the report as JSON")

    p_b = sub.add_parser("bounds", help="closed-form constants for one configuration")
    p_b.add_argument("--n", type=int, required=True)
    p_b.add_argument("--gamma", type=float, required=True)
    p_b.add_argument("--topology", type=str, default="path")
    p_b.add_argument("--C", dest="c_constant", type=float, default=1.0)

    return parser


def _merge_config(
    args: argparse.Namespace, kind: str, extra: dict, defaults: dict | None = None
) -> ExperimentConfig:
    # precedence: subcommand defaults < config file < explicit flags
    data: dict = {"kind": kind, **(defaults or {})}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        loaded.pop("kind", None)
        data.update(loaded)
    for key in ExperimentConfig.__dataclass_fields__:
        val = getattr(args, key, _UNSET)
        if val is not _UNSET and val is not None:
            data[key] = val
    data.update({k: v for k, v in extra.items() if v is not _UNSET and v is not None})
    return ExperimentConfig.from_dict(data)


def _print_outcome(outcome: harness.ExperimentOutcome) -> None:
    for agg in outcome.cells:
        rounds = "n/a" if agg.mean_rounds is None else format(agg.mean_rounds, ".6g")
        print(
            f"{agg.cell_id}: mean_rounds={rounds} diverged={agg.diverged_count}"
            f"/{len(agg.results)}"
        )
    if outcome.out_dir is not None:
        print(f"outputs written to {outcome.out_dir}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (HarnessError, consensus.ConfigError, CompressionError, GraphError,
            mixing.MixingError, theory.TheoryError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd == "verify":
        report = harness.verify_suite(args.checks)
        failed = 0
        for check in report:
            status = "PASS" if check.passed else "FAIL"
            print(f"{status} {check.name} margin={check.margin:.6g}")
            failed += 0 if check.passed else 1
        if args.json_out:
            with open(args.json_out, "w") as fh:
                json.dump([c.to_json_dict() for c in report], fh, indent=2, sort_keys=True)
                fh.write("\n")
        return 1 if failed else 0

    if cmd == "bounds":
        g = harness.make_topology(args.topology, args.n)
        w = mixing.metropolis_hastings(g)
        beta = mixing.deviation_norm(w)
        bundle = theory.theory_bundle(g.n, args.gamma, beta, args.c_constant)
        print(json.dumps(bundle.to_json_dict(), indent=2, sort_keys=True))
        return 0

    kind_map = {
        "run": "single-run",
        "sweep-n": "sweep-n",
        "sweep-gamma": "sweep-gamma",
        "compare": "compare-variants",
        "tune": "sweep-n",
    }
    extra = {}
    defaults = None
    if cmd == "run":
        extra["variant"] = getattr(args, "variant", _UNSET)
        defaults = {"trials": 1}
    if cmd in ("sweep-n", "compare", "tune"):
        extra["variants"] = getattr(args, "variants", _UNSET)
        if cmd == "tune" and extra["variants"] is _UNSET:
            extra["variants"] = ["SCG"]
    if cmd in ("sweep-n", "sweep-gamma", "tune"):
        extra["n_list"] = getattr(args, "n_list", _UNSET)
    if cmd == "sweep-gamma":
        extra["variant"] = getattr(args, "variant", _UNSET)
        extra["gamma_grid"] = getattr(args, "gamma_grid", _UNSET)
    if cmd == "tune" and getattr(args, "n_list", _UNSET) is _UNSET and getattr(args, "n", _UNSET) is not _UNSET:
        extra["n_list"] = [args.n]

    cfg = _merge_config(args, kind_map[cmd], extra, defaults)

    grid = getattr(args, "gamma_grid", _UNSET)
    if grid is _UNSET or grid is None:
        grid = cfg.gamma_grid if cfg.kind != "sweep-gamma" else None
    if cmd == "tune" and not grid:
        print("error: tune needs --gamma-grid", file=sys.stderr)
        return 1
    if cmd != "sweep-gamma" and grid:
        outcomes = harness.tune_gamma(cfg, grid)
        for outcome in outcomes:
            cid = harness.cell_id_of(outcome.base_cell)
            if outcome.infeasible:
                print(f"{cid}: infeasible (no grid point converged)")
            else:
                rounds = [r.rounds for r in outcome.best_results]
                print(
                    f"{cid}: best_gamma={format(outcome.best_gamma, '.17g')}"
                    f" mean_rounds={sum(rounds) / len(rounds):.6g}"
                )
        print(f"outputs written to {cfg.out_dir}")
        return 0

    outcome = harness.run_experiment(cfg)
    _print_outcome(outcome)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
