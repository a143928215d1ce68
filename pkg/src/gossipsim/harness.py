"""Experiment harness: configuration, deterministic seeding, sweeps, persistence.

Every run's seed is a pure function of (base_seed, cell, trial):

    run_seed = mix64(mix64(base_seed XOR fnv1a64(cell_id)) XOR trial)

where mix64 is the splitmix64 finalizer and fnv1a64 hashes the cell-id
string, so trials are independent and any language can reproduce the
streams. Initial iterates come from a generator seeded with
mix64(run_seed XOR fnv1a64("init")); agent i's compression stream is
seeded with run_seed XOR i. Outputs use fixed float formatting (17
significant digits) and sorted row order, so identical configurations
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import compression, consensus, graph as graphmod, metrics, mixing, theory

__all__ = [
    "Cell",
    "CellAggregate",
    "CheckResult",
    "ExperimentConfig",
    "ExperimentOutcome",
    "HarnessError",
    "RunResult",
    "TuneCellOutcome",
    "cell_id_of",
    "fnv1a64",
    "make_topology",
    "mix64",
    "run_experiment",
    "run_seed_for",
    "tune_gamma",
    "verify_suite",
    "write_summary_csv",
    "write_trace_csv",
]

_MASK = (1 << 64) - 1

EXPERIMENT_KINDS = (
    "single-run",
    "sweep-n",
    "sweep-gamma",
    "compare-variants",
    "verify-lemma",
    "verify-gap",
    "bounds",
)

SUMMARY_COLUMNS = [
    "cell_id",
    "variant",
    "topology",
    "n",
    "d",
    "gamma",
    "sigma",
    "compressor",
    "k",
    "epsilon",
    "trials",
    "mean_rounds",
    "std_rounds",
    "mean_bits",
    "std_bits",
    "rho_mean",
    "diverged_count",
]

CANDIDATE_COLUMNS = [
    "cell_id",
    "variant",
    "topology",
    "n",
    "d",
    "gamma",
    "status",
    "trials_run",
    "mean_rounds",
]


class HarnessError(ValueError):
    """Invalid experiment configuration."""


def mix64(x: int) -> int:
    """splitmix64 finalizer: advance by the golden-ratio increment and mix."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    """FNV-1a over the UTF-8 bytes of text."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


_INIT_TAG = fnv1a64("init")


def run_seed_for(base_seed: int, cell_id: str, trial: int) -> int:
    return mix64(mix64((base_seed & _MASK) ^ fnv1a64(cell_id)) ^ trial)


@dataclass(frozen=True)
class Cell:
    """One experiment grid point."""

    variant: str
    topology: str
    n: int
    d: int
    gamma: float
    compressor: str
    sigma: float | None = None


def cell_id_of(cell: Cell) -> str:
    return (
        f"{cell.variant}-{cell.topology}-n{cell.n}-d{cell.d}"
        f"-g{format(cell.gamma, '.17g')}-{cell.compressor}"
    )


def _fs_name(cell_id: str) -> str:
    return cell_id.replace("/", "_").replace(":", "_")


@dataclass
class ExperimentConfig:
    """Flat experiment description; numeric fields are validated against
    the owning module's preconditions before any run starts."""

    kind: str
    topology: str = "path"
    n: int | None = None
    n_list: list[int] | None = None
    d: int = 150
    variant: str | None = None
    variants: list[str] | None = None
    gamma: float | None = None
    gamma_grid: list[float] | None = None
    sigma: float | None = None
    compressor: str = "identity"
    epsilon: float = 1e-4
    max_rounds: int = 100_000
    trials: int = 10
    base_seed: int = 0
    init: str = "uniform"
    out_dir: str = "out"
    workers: int = 1
    save_traces: bool = True
    trace_stride: int = 1
    c_constant: float = 1.0

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise HarnessError(f"unknown experiment kind {self.kind!r}")
        if self.init not in ("uniform", "normal"):
            raise HarnessError(f"init must be 'uniform' or 'normal', got {self.init!r}")
        if self.epsilon <= 0:
            raise HarnessError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_rounds < 0:
            raise HarnessError(f"max_rounds must be nonnegative, got {self.max_rounds}")
        if self.trials < 1:
            raise HarnessError(f"trials must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise HarnessError(f"workers must be >= 1, got {self.workers}")
        if self.trace_stride < 1:
            raise HarnessError(f"trace_stride must be >= 1, got {self.trace_stride}")
        if self.base_seed < 0:
            raise HarnessError(f"base_seed must be nonnegative, got {self.base_seed}")
        if self.d < 1:
            raise HarnessError(f"d must be >= 1, got {self.d}")
        compression.parse_compressor_spec(self.compressor)

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        fields = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - fields
        if unknown:
            raise HarnessError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def make_topology(topology: str, n: int | None) -> graphmod.Graph:
    """Build or load a topology by name: path, ring, complete, file:<path>."""
    if topology.startswith("file:"):
        path = topology[len("file:") :]
        return graphmod.parse_edge_list(Path(path).read_text(), label=topology)
    if n is None:
        raise HarnessError(f"topology {topology!r} needs an explicit n")
    if topology == "path":
        return graphmod.build_path(n)
    if topology == "ring":
        return graphmod.build_ring(n)
    if topology == "complete":
        return graphmod.build_complete(n)
    raise HarnessError(f"unknown topology {topology!r}")


@dataclass
class RunResult:
    """One (cell, trial) outcome; trace is absent only for diverged runs."""

    cell: Cell
    cell_id: str
    trial: int
    run_seed: int
    status: str  # converged | max-rounds | diverged | pruned
    trace: consensus.RunTrace | None
    diverged_round: int | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def rounds(self) -> int | None:
        return self.trace.rounds_to_eps if self.trace is not None else None

    @property
    def bits_to_eps(self) -> int | None:
        if self.trace is None or not self.converged:
            return None
        return int(self.trace.bits_cumulative[-1])


@dataclass
class CellAggregate:
    cell: Cell
    cell_id: str
    results: list[RunResult]
    sigma: float
    mean_rounds: float | None
    std_rounds: float | None
    mean_bits: float | None
    std_bits: float | None
    rho_mean: float | None
    diverged_count: int


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    cells: list[CellAggregate]
    out_dir: Path | None


@dataclass
class TuneCellOutcome:
    """Grid-search outcome for one (variant, topology, n, d, compressor) cell."""

    base_cell: Cell
    best_gamma: float | None  # None when every candidate failed
    best_results: list[RunResult]
    candidates: list[dict]

    @property
    def infeasible(self) -> bool:
        return self.best_gamma is None


# ---------------------------------------------------------------------------
# run execution


def _draw_x0(n: int, d: int, run_seed: int, init: str) -> np.ndarray:
    rng = np.random.default_rng(mix64(run_seed ^ _INIT_TAG))
    if init == "uniform":
        return rng.random((n, d))
    return rng.standard_normal((n, d))


def _execute_run(
    cell: Cell,
    trial: int,
    cfg: ExperimentConfig,
    g: graphmod.Graph,
    w: mixing.MixingMatrix,
    max_rounds: int | None = None,
) -> RunResult:
    cid = cell_id_of(cell)
    seed = run_seed_for(cfg.base_seed, cid, trial)
    x0 = _draw_x0(g.n, cell.d, seed, cfg.init)
    algo = consensus.AlgorithmConfig(
        variant=cell.variant, gamma=cell.gamma, compressor=cell.compressor, sigma=cell.sigma
    )
    state = consensus.init(x0, g, w, algo, seed)
    budget = cfg.max_rounds if max_rounds is None else max_rounds
    try:
        trace = state.run(cfg.epsilon, budget)
    except consensus.DivergenceError as exc:
        return RunResult(
            cell=cell,
            cell_id=cid,
            trial=trial,
            run_seed=seed,
            status="diverged",
            trace=None,
            diverged_round=exc.round_index,
        )
    if trace.converged:
        status = "converged"
    else:
        status = "pruned" if budget < cfg.max_rounds else "max-rounds"
    trace.metadata.update(
        {
            "cell_id": cid,
            "trial": trial,
            "base_seed": cfg.base_seed,
            "run_seed": seed,
            "init": cfg.init,
            "kind": cfg.kind,
            "status": status,
            "experiment": cfg.to_json_dict(),
        }
    )
    _attach_rates(trace.metadata, cell)
    return RunResult(
        cell=cell, cell_id=cid, trial=trial, run_seed=seed, status=status, trace=trace
    )


def _attach_rates(meta: dict, cell: Cell) -> None:
    # closed-form rates exist only in the momentum step-size range
    if cell.n >= 2 and 0.0 < cell.gamma <= 0.5:
        meta["lambda"] = theory.rate_lambda(cell.n, cell.gamma)
        meta["lambda_tilde"] = theory.rate_lambda_tilde(cell.n, cell.gamma)
    else:
        meta["lambda"] = None
        meta["lambda_tilde"] = None


def _fit_rho(result: RunResult) -> float | None:
    if result.trace is None:
        return None
    try:
        return metrics.fit_linear_rate(result.trace.psis).rho
    except metrics.MetricsError:
        return None


def _aggregate(cell: Cell, results: list[RunResult]) -> CellAggregate:
    conv = [r for r in results if r.converged]
    rounds = np.array([r.rounds for r in conv], dtype=float)
    bits = np.array([r.bits_to_eps for r in conv], dtype=float)
    rhos = [rho for r in conv if (rho := _fit_rho(r)) is not None]
    sigma = (
        results[0].trace.metadata["sigma"]
        if results and results[0].trace is not None
        else consensus.AlgorithmConfig(
            cell.variant, cell.gamma, cell.compressor, cell.sigma
        ).resolved_sigma(cell.n)
    )
    return CellAggregate(
        cell=cell,
        cell_id=cell_id_of(cell),
        results=results,
        sigma=float(sigma),
        mean_rounds=float(rounds.mean()) if rounds.size else None,
        std_rounds=float(rounds.std()) if rounds.size else None,
        mean_bits=float(bits.mean()) if bits.size else None,
        std_bits=float(bits.std()) if bits.size else None,
        rho_mean=float(np.mean(rhos)) if rhos else None,
        diverged_count=sum(1 for r in results if r.status == "diverged"),
    )


# ---------------------------------------------------------------------------
# experiment expansion


def _expand_cells(cfg: ExperimentConfig) -> list[Cell]:
    if cfg.kind == "single-run":
        if cfg.variant is None or cfg.gamma is None:
            raise HarnessError("single-run needs variant and gamma")
        ns = [cfg.n]
    elif cfg.kind == "sweep-n":
        if not cfg.n_list:
            raise HarnessError("sweep-n needs n_list")
        ns = list(cfg.n_list)
    elif cfg.kind == "sweep-gamma":
        if not cfg.gamma_grid:
            raise HarnessError("sweep-gamma needs gamma_grid")
        if not (cfg.n_list or cfg.n is not None):
            raise HarnessError("sweep-gamma needs n or n_list")
        ns = list(cfg.n_list) if cfg.n_list else [cfg.n]
    elif cfg.kind == "compare-variants":
        if not (cfg.variants or cfg.variant):
            raise HarnessError("compare-variants needs variants")
        ns = [cfg.n]
    else:
        raise HarnessError(f"kind {cfg.kind!r} does not expand to run cells")

    variants = cfg.variants if cfg.variants else [cfg.variant]
    if any(v is None for v in variants):
        raise HarnessError("variant(s) must be set")
    gammas = [cfg.gamma]
    if cfg.kind == "sweep-gamma":
        gammas = list(cfg.gamma_grid)
    if any(g is None for g in gammas):
        raise HarnessError("gamma (or gamma_grid for sweep-gamma) must be set")

    file_n = make_topology(cfg.topology, None).n if cfg.topology.startswith("file:") else None
    cells = []
    for variant in variants:
        for n in ns:
            for gamma in gammas:
                resolved_n = file_n if file_n is not None else n
                if resolved_n is None:
                    raise HarnessError("n must be set for generated topologies")
                # exact variants never compress
                comp = "identity" if variant in ("EG", "SEG") else cfg.compressor
                cells.append(
                    Cell(
                        variant=variant,
                        topology=cfg.topology,
                        n=resolved_n,
                        d=cfg.d,
                        gamma=float(gamma),
                        compressor=comp,
                        sigma=cfg.sigma,
                    )
                )
    return cells


def _topology_cache(cfg: ExperimentConfig, cells: list[Cell]):
    cache = {}
    for cell in cells:
        key = (cell.topology, cell.n)
        if key not in cache:
            g = make_topology(cell.topology, cell.n)
            cache[key] = (g, mixing.metropolis_hastings(g))
    return cache


# ---------------------------------------------------------------------------
# public operations


def _run_task(args) -> RunResult:
    cell, trial, cfg, g, w = args
    return _execute_run(cell, trial, cfg, g, w)


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    """Run every (cell, trial), aggregate per cell, and persist outputs.

    Module errors (including divergence) are attached to their cell and
    the sweep continues; divergent runs are recorded, not dropped.
    Workers > 1 runs (cell, trial) tasks in a process pool; results are
    merged by their deterministic key, so output is order-independent.
    """
    cfg.validate()
    cells = _expand_cells(cfg)
    for cell in cells:
        consensus.AlgorithmConfig(cell.variant, cell.gamma, cell.compressor, cell.sigma)
    cache = _topology_cache(cfg, cells)

    tasks = [
        (cell, trial, cfg, *cache[(cell.topology, cell.n)])
        for cell in cells
        for trial in range(cfg.trials)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    by_cell: dict[str, list[RunResult]] = {}
    for res in results:
        by_cell.setdefault(res.cell_id, []).append(res)
    aggregates = [
        _aggregate(cell, sorted(by_cell[cell_id_of(cell)], key=lambda r: r.trial))
        for cell in cells
    ]

    out_dir = _persist(cfg, aggregates)
    return ExperimentOutcome(config=cfg, cells=aggregates, out_dir=out_dir)


def tune_gamma(cfg: ExperimentConfig, gamma_grid: list[float]) -> list[TuneCellOutcome]:
    """Grid line search for the step-size minimizing mean rounds-to-epsilon.

    Candidates are evaluated from the largest step-size down; a
    candidate is abandoned (pruned) once its cumulative rounds exceed
    the best total so far, which cannot change the winner. Ties go to
    the smallest step-size. Cells where no candidate converges on all
    trials are marked infeasible.
    """
    cfg.validate()
    if not gamma_grid:
        raise HarnessError("gamma grid must be nonempty")
    probe = replace(cfg, gamma=float(gamma_grid[0]))
    if probe.kind == "sweep-gamma":
        raise HarnessError("tune goes with sweep-n/compare-variants/single-run kinds")
    base_cells = _expand_cells(probe)
    cache = _topology_cache(cfg, base_cells)

    tasks = [
        (base, list(gamma_grid), cfg, *cache[(base.topology, base.n)]) for base in base_cells
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_tune_task, tasks))
    else:
        outcomes = [_tune_task(t) for t in tasks]
    _persist_tune(cfg, outcomes)
    return outcomes


def _tune_task(args) -> TuneCellOutcome:
    base, grid, cfg, g, w = args
    return _tune_one_cell(base, grid, cfg, g, w)


def _tune_one_cell(
    base: Cell,
    grid: list[float],
    cfg: ExperimentConfig,
    g: graphmod.Graph,
    w: mixing.MixingMatrix,
) -> TuneCellOutcome:
    best: tuple[int, float, list[RunResult]] | None = None
    records = []
    for gamma in sorted(set(grid), reverse=True):
        cell = replace(base, gamma=float(gamma))
        try:
            consensus.AlgorithmConfig(cell.variant, cell.gamma, cell.compressor, cell.sigma)
        except consensus.ConfigError:
            records.append(_candidate_record(cell, "invalid", []))
            continue
        total = 0
        results: list[RunResult] = []
        status = "evaluated"
        for trial in range(cfg.trials):
            budget = cfg.max_rounds
            if best is not None:
                budget = min(budget, best[0] - total)
            res = _execute_run(cell, trial, cfg, g, w, max_rounds=budget)
            if res.status == "diverged":
                status = "diverged"
                results.append(res)
                break
            if not res.converged:
                status = "pruned" if budget < cfg.max_rounds else "max-rounds"
                results.append(res)
                break
            total += res.rounds
            results.append(res)
        if status == "evaluated":
            if best is None or total <= best[0]:
                best = (total, float(gamma), results)
        records.append(_candidate_record(cell, status, results))
    if best is None:
        return TuneCellOutcome(base_cell=base, best_gamma=None, best_results=[], candidates=records)
    return TuneCellOutcome(
        base_cell=base, best_gamma=best[1], best_results=best[2], candidates=records
    )


def _candidate_record(cell: Cell, status: str, results: list[RunResult]) -> dict:
    conv = [r.rounds for r in results if r.converged]
    return {
        "cell_id": cell_id_of(cell),
        "variant": cell.variant,
        "topology": cell.topology,
        "n": cell.n,
        "d": cell.d,
        "gamma": cell.gamma,
        "status": status,
        "trials_run": len(results),
        "mean_rounds": float(np.mean(conv)) if conv else None,
    }


# ---------------------------------------------------------------------------
# persistence


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_trace_csv(path: Path, trace: consensus.RunTrace, stride: int = 1) -> None:
    """Trace rows t,psi,bits_cumulative; strided but always keeping the last row."""
    last = trace.psis.size - 1
    with open(path, "w") as fh:
        fh.write("t,psi,bits_cumulative\n")
        for t in range(trace.psis.size):
            if t % stride == 0 or t == last:
                fh.write(
                    f"{t},{format(float(trace.psis[t]), '.17g')},{int(trace.bits_cumulative[t])}\n"
                )


def write_summary_csv(path: Path, aggregates: list[CellAggregate], epsilon: float, trials: int) -> None:
    rows = []
    for agg in sorted(aggregates, key=lambda a: a.cell_id):
        kind, k = compression.parse_compressor_spec(agg.cell.compressor)
        rows.append(
            [
                agg.cell_id,
                agg.cell.variant,
                agg.cell.topology,
                agg.cell.n,
                agg.cell.d,
                agg.cell.gamma,
                agg.sigma,
                kind.removesuffix("_k"),
                k,
                epsilon,
                trials,
                agg.mean_rounds,
                agg.std_rounds,
                agg.mean_bits,
                agg.std_bits,
                agg.rho_mean,
                agg.diverged_count,
            ]
        )
    with open(path, "w") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_candidates_csv(path: Path, outcomes: list[TuneCellOutcome]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CANDIDATE_COLUMNS) + "\n")
        for outcome in sorted(outcomes, key=lambda o: cell_id_of(o.base_cell)):
            for rec in sorted(outcome.candidates, key=lambda r: -r["gamma"]):
                fh.write(",".join(_fmt(rec[c]) for c in CANDIDATE_COLUMNS) + "\n")


def _write_run_files(out: Path, results: list[RunResult], stride: int) -> None:
    runs = out / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    for res in results:
        name = f"{_fs_name(res.cell_id)}__t{res.trial}"
        if res.trace is None:
            meta = {
                "cell_id": res.cell_id,
                "trial": res.trial,
                "run_seed": res.run_seed,
                "status": "diverged",
                "diverged_round": res.diverged_round,
            }
        else:
            write_trace_csv(runs / f"{name}.csv", res.trace, stride)
            meta = dict(res.trace.metadata)
        with open(runs / f"{name}.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _persist(cfg: ExperimentConfig, aggregates: list[CellAggregate]) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "experiment.json", "w") as fh:
        json.dump(cfg.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_summary_csv(out / "summary.csv", aggregates, cfg.epsilon, cfg.trials)
    if cfg.save_traces:
        all_results = [r for agg in aggregates for r in agg.results]
        _write_run_files(out, all_results, cfg.trace_stride)
    return out


def _persist_tune(cfg: ExperimentConfig, outcomes: list[TuneCellOutcome]) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "experiment.json", "w") as fh:
        json.dump({**cfg.to_json_dict(), "tuned": True}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_candidates_csv(out / "candidates.csv", outcomes)
    aggregates = [
        _aggregate(replace(o.base_cell, gamma=o.best_gamma), o.best_results)
        for o in outcomes
        if not o.infeasible
    ]
    write_summary_csv(out / "summary.csv", aggregates, cfg.epsilon, cfg.trials)
    if cfg.save_traces:
        best_results = [r for o in outcomes for r in o.best_results]
        _write_run_files(out, best_results, cfg.trace_stride)
    return out


# ---------------------------------------------------------------------------
# verification suite


@dataclass
class CheckResult:
    """One named verification check with its worst-case margin.

    margin is headroom: nonnegative means the checked inequality holds,
    with larger meaning more slack.
    """

    name: str
    passed: bool
    margin: float
    details: dict

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "margin": self.margin,
            "details": self.details,
        }


def verify_suite(checks: list[str] | None = None) -> list[CheckResult]:
    """Run the named numerical checks; failures become report entries."""
    registry = {
        "mixing-invariants": _check_mixing_invariants,
        "compressor-contract": _check_compressor_contract,
        "mean-preservation": _check_mean_preservation,
        "lazy-gap-bound": _check_lazy_gap_bound,
        "momentum-contraction": _check_momentum_contraction,
        "zero-mean-growth": _check_zero_mean_growth,
    }
    selected = checks if checks else list(registry)
    unknown = [c for c in selected if c not in registry]
    if unknown:
        raise HarnessError(f"unknown verify checks: {unknown}")
    report = []
    for name in selected:
        try:
            report.append(registry[name]())
        except Exception as exc:  # a blown invariant inside a check is a failure, not a crash
            report.append(
                CheckResult(name=name, passed=False, margin=-math.inf, details={"error": str(exc)})
            )
    return report


def _check_mixing_invariants() -> CheckResult:
    rng = np.random.default_rng(2024)
    worst = math.inf
    cases = 0
    for _ in range(30):
        n = int(rng.integers(2, 40))
        g = graphmod.random_connected_graph(n, 0.15, rng)
        w = mixing.metropolis_hastings(g)
        e = w.entries
        row_err = float(np.max(np.abs(e.sum(axis=1) - 1.0)))
        sym_ok = np.array_equal(e, e.T)
        diag_ok = bool(np.all(np.diag(e) > 0))
        gap = mixing.spectrum(w).spectral_gap
        margin = min(1e-12 - row_err, gap)
        if not (sym_ok and diag_ok):
            margin = -1.0
        worst = min(worst, margin)
        cases += 1
    return CheckResult(
        name="mixing-invariants",
        passed=worst >= 0.0,
        margin=worst,
        details={"cases": cases},
    )


def _check_compressor_contract() -> CheckResult:
    rng = np.random.default_rng(9)
    details = {}
    worst = math.inf
    # random-subset sparsifier: mean relative error must match 1 - k/d
    for k in (1, 10, 25):
        d = 50
        comp = compression.Compressor("rand_k", k, d, seed=101 + k)
        ratios = []
        for rep in range(20):
            x = rng.standard_normal(d)
            nx2 = float(x @ x)
            for _ in range(500):
                q = comp.compress(x)
                ratios.append(float(np.sum((q - x) ** 2)) / nx2)
        est = float(np.mean(ratios))
        expect = 1.0 - k / d
        rel = abs(est - expect) / expect
        details[f"rand_{k}_rel_err"] = rel
        worst = min(worst, 0.05 - rel)
    # magnitude sparsifier: deterministic inequality
    comp = compression.Compressor("top_k", 10, 50, seed=0)
    for _ in range(1000):
        x = rng.standard_normal(50)
        lhs = float(np.sum((comp.compress(x) - x) ** 2))
        rhs = (1.0 - 10 / 50) * float(x @ x)
        worst = min(worst, rhs - lhs)
    # quantizer: Monte Carlo mean below omega^2 with 5% slack
    comp = compression.Compressor("qsgd_k", 5, 150, seed=7)
    ratios = []
    for rep in range(20):
        x = rng.standard_normal(150)
        nx2 = float(x @ x)
        for _ in range(500):
            q = comp.compress(x)
            ratios.append(float(np.sum((q - x) ** 2)) / nx2)
    est = float(np.mean(ratios))
    omega2 = comp.omega_squared()
    details["qsgd_5_mc"] = est
    details["qsgd_5_omega2"] = omega2
    worst = min(worst, omega2 * 1.05 - est)
    return CheckResult(
        name="compressor-contract", passed=worst >= 0.0, margin=worst, details=details
    )


def _check_mean_preservation() -> CheckResult:
    worst = math.inf
    details = {}
    for variant in consensus.VARIANTS:
        comp = "identity" if variant in ("EG", "SEG") else "qsgd_5"
        for topo in ("path", "ring"):
            g = make_topology(topo, 20)
            w = mixing.metropolis_hastings(g)
            cfg = consensus.AlgorithmConfig(variant=variant, gamma=0.5, compressor=comp)
            rng = np.random.default_rng(55)
            x0 = rng.random((20, 5))
            state = consensus.init(x0, g, w, cfg, seed=77)
            ref = x0.mean(axis=0)
            scale = 1.0 + float(np.linalg.norm(ref))
            drift = 0.0
            for _ in range(200):
                state.step()
                drift = max(
                    drift,
                    float(np.linalg.norm(state.X.mean(axis=0) - ref)) / scale,
                    float(np.linalg.norm(state.Y.mean(axis=0) - ref)) / scale,
                )
            details[f"{variant}_{topo}_drift"] = drift
            worst = min(worst, 1e-9 - drift)
    return CheckResult(
        name="mean-preservation", passed=worst >= 0.0, margin=worst, details=details
    )


def _check_lazy_gap_bound() -> CheckResult:
    rng = np.random.default_rng(3)
    worst = math.inf
    details = {}
    graphs = [graphmod.build_path(n) for n in (10, 50, 100, 200)]
    graphs += [graphmod.build_ring(n) for n in (10, 60, 120)]
    graphs += [graphmod.random_connected_graph(40, 0.1, rng)]
    for g in graphs:
        w = mixing.metropolis_hastings(g)
        for gamma in (0.1, 0.5):
            m = mixing.lazy_mix(w, gamma)
            measured = mixing.spectrum(m).spectral_gap
            bound = theory.gap_lower_bound(g.n, gamma)
            details[f"{g.label}{g.n}_g{gamma}"] = {"gap": measured, "bound": bound}
            worst = min(worst, measured - bound)
    return CheckResult(
        name="lazy-gap-bound", passed=worst >= 0.0, margin=worst, details=details
    )


def _lemma_instance(n: int, gamma: float):
    """Augmented operator at the worst-case parameterization p = 5n/sqrt(gamma).

    This is the regime the convergence guarantees rely on: the lazy
    matrix's second eigenvalue satisfies lam2 <= 1 - 1/p^2 with slack,
    so every mode stays under-damped and the factor-2 envelope holds.
    (At the tight p = 1/sqrt(1 - lam2) the second mode is critically
    damped and its t*lam^t Jordan transient breaks the factor 2.)
    """
    g = graphmod.build_path(n)
    a = mixing.lazy_mix(mixing.metropolis_hastings(g), gamma)
    lam2 = abs(mixing.spectrum(a).eigenvalues[1])
    p = 5.0 * n / math.sqrt(gamma)
    if lam2 > 1.0 - 1.0 / p**2:
        raise HarnessError(f"gap hypothesis violated: lam2={lam2}, p={p}")
    sigma = (p - 1.0) / (p + 1.0)
    lam = 1.0 - 1.0 / p
    return mixing.build_augmented(a, sigma), lam


def _check_momentum_contraction() -> CheckResult:
    rng = np.random.default_rng(12)
    worst = math.inf
    t_max = 300
    for n in (5, 10, 20):
        for gamma in (0.1, 0.5):
            b, lam = _lemma_instance(n, gamma)
            for _ in range(4):
                q = rng.standard_normal(n)
                v = np.concatenate([q, q])
                norms = mixing.power_contraction(b, v, t_max)
                v0 = norms[0]
                bounds = 2.0 * lam ** np.arange(t_max + 1) * v0
                # ignore rounds where the bound itself is below fp noise
                valid = bounds >= 1e-12 * v0
                rel = (bounds[valid] - norms[valid]) / bounds[valid]
                worst = min(worst, float(np.min(rel)))
    return CheckResult(
        name="momentum-contraction",
        passed=worst >= -1e-9,
        margin=worst,
        details={"t_max": t_max, "worst_relative_headroom": worst},
    )


def _check_zero_mean_growth() -> CheckResult:
    rng = np.random.default_rng(13)
    worst_ratio = 0.0
    c_hat_max = 0.0
    t_max = 500
    for n in (5, 10, 20):
        for gamma in (0.1, 0.5):
            b, lam = _lemma_instance(n, gamma)
            for _ in range(4):
                q = rng.standard_normal(n)
                q -= q.mean()
                v = np.concatenate([q, np.zeros(n)])
                norms = mixing.power_contraction(b, v, t_max)
                t = np.arange(1, t_max + 1)
                # iterates below the fp floor carry no envelope information
                valid = norms[1:] >= 1e-13 * norms[0]
                t_hi = int(np.max(t[valid])) if np.any(valid) else 1
                tv = t[:t_hi]
                ratios = norms[1 : t_hi + 1] / (tv * lam**tv)
                running_sup = np.maximum.accumulate(ratios)
                c_hat_max = max(c_hat_max, float(running_sup[-1]))
                if t_hi >= 50:
                    worst_ratio = max(worst_ratio, float(running_sup[-1] / running_sup[49]))
    return CheckResult(
        name="zero-mean-growth",
        passed=math.isfinite(worst_ratio) and 0.0 < worst_ratio <= 2.0,
        margin=2.0 - worst_ratio,
        details={"max_running_sup_ratio": worst_ratio, "c_hat_max": c_hat_max, "t_max": t_max},
    )
