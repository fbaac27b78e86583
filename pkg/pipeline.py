"""
Misguided Learning Lab Pipeline

Solves limit beliefs, simulates learners and synthetic experiment panels,
estimates the result tables, clusters beliefs and draws the figures.

Usage:
    python pipeline.py equilibrium --config scenarios/default.json
    python pipeline.py simulate --config scenarios/default.json --seed 7
    python pipeline.py panel --config scenarios/calibrated.json --out data/calibrated
    python pipeline.py estimate data/calibrated/panel.csv --which all
    python pipeline.py cluster data/calibrated/panel.csv --scale-check --compare-criteria
    python pipeline.py figures data/calibrated/panel.csv
    python pipeline.py replay data/calibrated/manifest_panel.json

Features:
    - JSON scenarios with strict sections (see scenario.py)
    - One master seed split per subject/agent, so runs replay byte for byte
    - A manifest with sha256 hashes for every artifact of every command
    - Exit codes: 0 ok, 2 configuration, 3 panel schema, 4 numerical failure
"""

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional

import analysis
import clustering
import figures
from berk_nash import equilibrium_table
from dynamics import draw_population, monte_carlo, round_summary, write_trajectories
from econometrics.tables import write_frame, write_text
from errors import ConfigurationError, MllabError, ReplayMismatchError, SchemaError
from protocol import PanelDataset, generate_panel
from scenario import RunManifest, Scenario, load_scenario, sha256_file

DEFAULT_OUT = "data"
OUT_ENV = "MLLAB_OUT"
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEMA = 3
EXIT_NUMERICAL = 4
WHICH = analysis.TABLES + ("all",)


def resolve_out_dir(cli_out: Optional[str], default: str = DEFAULT_OUT) -> str:
    """MLLAB_OUT beats --out, which beats the default."""
    out_dir = os.environ.get(OUT_ENV) or cli_out or default
    out_dir = os.path.abspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def setup_logger(out_dir: str) -> None:
    """Configure logging to <out>/mllab_runtime.log for this run."""
    logging.basicConfig(
        filename=os.path.join(out_dir, "mllab_runtime.log"),
        filemode="a",
        level=logging.INFO,
        format="%(asctime)s\t%(levelname)s\t%(message)s",
        force=True,
    )
    # Reduce noise from plotting libraries
    for noisy in ("matplotlib", "PIL"):
        logging.getLogger(noisy).setLevel(logging.WARNING)


def log_step_duration(step: str, start_ts: float, end_ts: float, seconds: float, success: bool = True,
                      error_message: Optional[str] = None) -> None:
    """Log start time, end time and duration (in seconds) of a pipeline step."""
    start_iso = datetime.fromtimestamp(start_ts).isoformat(timespec="seconds")
    end_iso = datetime.fromtimestamp(end_ts).isoformat(timespec="seconds")
    if success:
        logging.info(f"step={step}\tstart={start_iso}\tend={end_iso}\tduration_s={seconds:.3f}")
    else:
        logging.error(
            f"step={step}\tstart={start_iso}\tend={end_iso}\tduration_s={seconds:.3f}\terror={error_message}"
        )


def _load_panel(path: str, manifest: RunManifest) -> PanelDataset:
    dataset = PanelDataset.from_csv(path)
    manifest.record_input(path)
    print(f"Loaded {dataset.rounds['subject_id'].nunique()} subjects from {path}")
    return dataset


def cmd_equilibrium(scenario: Scenario, out_dir: str, options: Dict[str, Any],
                    manifest: RunManifest) -> List[MllabError]:
    settings = scenario.equilibrium
    print("Solving limit beliefs over the (a, a~, Phi) grid...")
    table = equilibrium_table(scenario.technology, settings.true_abilities, settings.believed_abilities,
                              settings.phi_trues)
    path = write_frame(table, os.path.join(out_dir, "equilibrium.csv"))
    manifest.record(out_dir, path)
    print(f"Saved {len(table)} equilibria to {path}")
    return []


def cmd_simulate(scenario: Scenario, out_dir: str, options: Dict[str, Any],
                 manifest: RunManifest) -> List[MllabError]:
    settings = scenario.simulation
    rounds = options.get("rounds") or settings.rounds
    print(f"Simulating {settings.n_agents} agents for {rounds} rounds ({settings.mode})...")
    population = draw_population(settings.n_agents, scenario.seed, settings.true_ability, settings.gap_range,
                                 settings.prior_mean_range, settings.prior_sd)
    trajectories = monte_carlo(population, scenario.technology, settings.phi_true, rounds,
                               seed=scenario.seed, mode=settings.mode)

    path = write_trajectories(trajectories, os.path.join(out_dir, "trajectories.csv"))
    manifest.record(out_dir, path)
    print(f"Saved trajectories to {path}")
    path = write_frame(round_summary(trajectories), os.path.join(out_dir, "trajectory_summary.csv"))
    manifest.record(out_dir, path)
    print(f"Saved round summary to {path}")
    path = figures.plot_belief_paths(trajectories, settings.phi_true, os.path.join(out_dir, "belief_paths.svg"),
                                     max_agents=settings.max_agents_plotted)
    manifest.record(out_dir, path)
    print(f"Saved belief paths to {path}")
    return []


def cmd_panel(scenario: Scenario, out_dir: str, options: Dict[str, Any],
              manifest: RunManifest) -> List[MllabError]:
    spec = scenario.population
    print(f"Generating a panel of {spec.n_subjects} subjects x {scenario.experiment.rounds} rounds...")
    dataset = generate_panel(spec, scenario.experiment, scenario.seed, scenario.technology,
                             mode=scenario.simulation.mode)
    path = dataset.to_csv(os.path.join(out_dir, "panel.csv"))
    manifest.record(out_dir, path)
    print(f"Saved panel to {path}")
    path = dataset.payoffs_to_csv(os.path.join(out_dir, "payoffs.csv"))
    manifest.record(out_dir, path)
    print(f"Saved payoffs to {path}")
    return []


def cmd_estimate(scenario: Scenario, out_dir: str, options: Dict[str, Any],
                 manifest: RunManifest) -> List[MllabError]:
    dataset = _load_panel(options["panel"], manifest)
    which = list(analysis.TABLES) if options["which"] == "all" else [options["which"]]
    outputs, failures = analysis.build_tables(dataset, scenario, which)
    for output in outputs:
        print("\n" + output.text)
        path = write_text(output.text, os.path.join(out_dir, f"{output.name}.txt"))
        manifest.record(out_dir, path)
        path = write_frame(output.frame, os.path.join(out_dir, f"{output.name}.csv"))
        manifest.record(out_dir, path)
        print(f"Saved {output.name} to {path}")
    for name, error in failures:
        print(f"Could not compute {name}: {error}")
    return [error for _, error in failures]


def cmd_cluster(scenario: Scenario, out_dir: str, options: Dict[str, Any],
                manifest: RunManifest) -> List[MllabError]:
    settings = scenario.clustering
    dataset = _load_panel(options["panel"], manifest)
    rounds = tuple(options.get("rounds") or settings.rounds)
    criterion = options.get("criterion") or settings.criterion
    stacked = clustering.stack_rounds(dataset.retained(), rounds, settings.columns, settings.overconfident_only)
    points = stacked[list(settings.columns)].to_numpy(dtype=float)
    print(f"Clustering {len(points)} points from rounds {rounds[0]} and {rounds[1]}...")

    if options.get("k") is not None:
        model = clustering.em_fit(points, options["k"], seed=scenario.seed, n_init=settings.n_init)
        scores = None
    else:
        selection = clustering.select_model(points, settings.k_range, criterion, scenario.seed, settings.n_init)
        model, scores = selection.best, selection.scores
    labels = clustering.hard_assignments(model, points)
    print(f"Selected k={model.k} (log-likelihood {model.log_likelihood:.3f}, BIC {model.bic:.3f})")

    path = write_frame(clustering.assignments_frame(stacked, labels), os.path.join(out_dir, "clusters.csv"))
    manifest.record(out_dir, path)
    print(f"Saved cluster assignments to {path}")
    if scores is not None:
        path = write_frame(scores, os.path.join(out_dir, "cluster_scores.csv"))
        manifest.record(out_dir, path)
        print(f"Saved model scores to {path}")
    path = figures.plot_clusters(points, labels, os.path.join(out_dir, "clusters.svg"),
                                 axis_labels=(settings.columns[0], settings.columns[1]),
                                 title=f"Clusters in rounds {rounds[0]} and {rounds[1]}")
    manifest.record(out_dir, path)

    report: Dict[str, Any] = {"k": model.k, "criterion": criterion, "rounds": list(rounds)}
    if options.get("scale_check"):
        scaled = clustering.scale_robustness(points, settings.scale_dim, settings.scale_factor, scenario.seed,
                                             settings.k_range, criterion, settings.n_init)
        report["scale_check"] = {"dim": scaled.dim, "factor": scaled.factor, "k_before": scaled.k_before,
                                 "k_after": scaled.k_after, "rand_index": round(scaled.rand_index, 10)}
        print(f"Scaling check: k {scaled.k_before} -> {scaled.k_after}, Rand index {scaled.rand_index:.3f}")
    if options.get("compare_criteria"):
        compared = clustering.compare_criteria(points, scenario.seed, settings.k_range, settings.n_init)
        report["criteria"] = {"bic_k": compared.bic_k, "aic_k": compared.aic_k,
                              "rand_index": round(compared.rand_index, 10)}
        print(f"BIC vs AIC: k {compared.bic_k} vs {compared.aic_k}, Rand index {compared.rand_index:.3f}")
    path = os.path.join(out_dir, "cluster_report.json")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    manifest.record(out_dir, path)
    print(f"Saved cluster report to {path}")
    return []


def cmd_figures(scenario: Scenario, out_dir: str, options: Dict[str, Any],
                manifest: RunManifest) -> List[MllabError]:
    dataset = _load_panel(options["panel"], manifest)
    retained = dataset.retained()
    marker_phi = scenario.experiment.marker_phi
    print("Generating belief figures...")

    paths = [figures.plot_kde_by_round(retained, os.path.join(out_dir, "belief_kde.svg"), marker_phi)]
    band_path, summary = figures.plot_mean_band(retained, os.path.join(out_dir, "belief_mean_band.svg"), marker_phi)
    paths.append(band_path)
    paths.append(write_frame(summary, os.path.join(out_dir, "belief_mean_band.csv")))
    paths.append(figures.plot_confidence(dataset.rounds, os.path.join(out_dir, "confidence.svg"),
                                         scenario.experiment.questions_per_round))
    paths.append(figures.plot_scores_by_round(dataset.rounds, os.path.join(out_dir, "scores_by_round.svg")))
    for path in paths:
        manifest.record(out_dir, path)
        print(f"Saved {os.path.basename(path)} to {path}")
    return []


COMMANDS: Dict[str, Callable[[Scenario, str, Dict[str, Any], RunManifest], List[MllabError]]] = {
    "equilibrium": cmd_equilibrium,
    "simulate": cmd_simulate,
    "panel": cmd_panel,
    "estimate": cmd_estimate,
    "cluster": cmd_cluster,
    "figures": cmd_figures,
}


def run_command(command: str, scenario: Scenario, out_dir: str, options: Dict[str, Any]) -> RunManifest:
    """Run one command, time it, and write its manifest."""
    print(f"\n{'=' * 60}")
    print(f"Command: {command}  scenario: {scenario.name}  seed: {scenario.seed}")
    print(f"Output directory: {out_dir}")
    print(f"{'=' * 60}")

    manifest = RunManifest(command=command, scenario=scenario.name, config=scenario.snapshot(),
                           seed=scenario.seed, options=options)
    start_perf = time.perf_counter()
    start_wall = time.time()
    try:
        deferred = COMMANDS[command](scenario, out_dir, options, manifest)
    except Exception as e:
        log_step_duration(command, start_wall, time.time(), time.perf_counter() - start_perf,
                          success=False, error_message=str(e))
        raise
    path = manifest.write(out_dir)
    print(f"Saved run manifest to {path}")
    if deferred:
        log_step_duration(command, start_wall, time.time(), time.perf_counter() - start_perf,
                          success=False, error_message="; ".join(str(e) for e in deferred))
        raise deferred[0]
    log_step_duration(command, start_wall, time.time(), time.perf_counter() - start_perf)
    return manifest


def replay(manifest_path: str, out_dir: str) -> RunManifest:
    """Re-run a recorded command and compare every artifact hash."""
    original = RunManifest.read(manifest_path)
    if original.command not in COMMANDS:
        raise ConfigurationError(f"Manifest command '{original.command}' cannot be replayed")
    for path, digest in original.inputs.items():
        if not os.path.exists(path):
            raise ConfigurationError(f"Replay input '{path}' no longer exists")
        if sha256_file(path) != digest:
            raise ConfigurationError(f"Replay input '{path}' changed since the recorded run")

    scenario = Scenario.from_dict(original.config)
    replayed = run_command(original.command, scenario, out_dir, dict(original.options))
    mismatched = sorted(
        name for name, digest in original.artifacts.items() if replayed.artifacts.get(name) != digest
    )
    if mismatched:
        raise ReplayMismatchError(mismatched)
    print(f"Replay reproduced {len(original.artifacts)} artifacts byte for byte")
    return replayed


def exit_code_for(error: MllabError) -> int:
    if isinstance(error, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(error, SchemaError):
        return EXIT_SCHEMA
    return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="master seed, overrides the scenario seed")
    common.add_argument("--out", help=f"output directory (default {DEFAULT_OUT}; {OUT_ENV} overrides)")

    parser = argparse.ArgumentParser(description="Misguided learning lab")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", parents=[common], help="limit beliefs over a parameter grid")
    simulate = sub.add_parser("simulate", parents=[common], help="belief paths of simulated learners")
    simulate.add_argument("--rounds", type=int, help="number of rounds, overrides the scenario")
    sub.add_parser("panel", parents=[common], help="synthetic experiment panel")

    estimate = sub.add_parser("estimate", parents=[common], help="study tables from a panel CSV")
    estimate.add_argument("panel")
    estimate.add_argument("--which", choices=WHICH, default="all")

    cluster = sub.add_parser("cluster", parents=[common], help="Gaussian mixture clusters of beliefs")
    cluster.add_argument("panel")
    cluster.add_argument("--rounds", type=int, nargs=2, metavar=("FIRST", "SECOND"))
    cluster.add_argument("--criterion", choices=clustering.CRITERIA)
    cluster.add_argument("--k", type=int, help="fit exactly k components instead of selecting")
    cluster.add_argument("--scale-check", action="store_true", help="refit with one axis scaled")
    cluster.add_argument("--compare-criteria", action="store_true", help="compare BIC and AIC partitions")

    figures_parser = sub.add_parser("figures", parents=[common], help="belief densities and means")
    figures_parser.add_argument("panel")

    replay_parser = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    replay_parser.add_argument("manifest")
    replay_parser.add_argument("--out", help="directory for the replayed run (default: <manifest dir>/replay)")
    return parser


def _options(args: argparse.Namespace) -> Dict[str, Any]:
    options: Dict[str, Any] = {}
    if getattr(args, "panel", None):
        options["panel"] = os.path.abspath(args.panel)
    for name in ("which", "criterion", "k", "rounds", "scale_check", "compare_criteria"):
        value = getattr(args, name, None)
        if value is not None and value is not False:
            options[name] = list(value) if isinstance(value, list) else value
    return options


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            default = os.path.join(os.path.dirname(os.path.abspath(args.manifest)), "replay")
            out_dir = resolve_out_dir(args.out, default)
            setup_logger(out_dir)
            replay(args.manifest, out_dir)
        else:
            out_dir = resolve_out_dir(args.out)
            setup_logger(out_dir)
            scenario = load_scenario(args.config).with_seed(args.seed)
            run_command(args.command, scenario, out_dir, _options(args))
    except MllabError as e:
        code = exit_code_for(e)
        logging.error(f"command={args.command}\texit={code}\terror={e}")
        print(f"Error: {e}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
