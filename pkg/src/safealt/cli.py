"""Command-line driver for the whole pipeline.

Subcommands mirror the artifact flow: world-validate -> solve-expert ->
collect-demos -> train-bc -> fit-value / fit-reward-sum -> eval-value /
monitor-eval -> filter / sirl-train / rank-eval / align-eval -> serve.
Every produced artifact gets a .manifest.json next to it. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import grids, manifests, monitors, policies, rankmetrics, simhuman
from .errors import ConfigError, SafealtError
from .filtering import FilterOutcome, FilterRequest, filter_continuous, filter_discrete
from .similarity import (
    CosineMeasure,
    EmbeddingTable,
    EuclideanMeasure,
    GoalCatalog,
    SirlEncoder,
    SirlMeasure,
    load_intents,
    packaged_data_path,
    train_sirl,
)
from .world import GoalValue, State, WorldSpec


def _load_world(path: str | None) -> WorldSpec:
    return WorldSpec.from_json(path) if path else WorldSpec()


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _parse_dims(text: str) -> tuple[int, ...]:
    dims = tuple(int(v) for v in text.split(","))
    if len(dims) != 4:
        raise ConfigError("grid dims must be four comma-separated counts")
    return dims


def _parse_state(text: str) -> State:
    vals = _parse_floats(text)
    if len(vals) != 3:
        raise ConfigError("state must be x,y,phi")
    return State(*vals)


def _load_catalog(path: str | None) -> GoalCatalog:
    return GoalCatalog.load(path or packaged_data_path("catalog.json"))


def _load_intents(path: str | None):
    return load_intents(path or packaged_data_path("intents.json"))


def _load_eval_goals(path: str | None) -> dict[str, list[int]]:
    doc = json.loads(Path(path or packaged_data_path("intents.json")).read_text())
    return {i["id"]: list(i.get("eval_goals", [])) for i in doc["intents"]}


def _emit(args, text_lines, json_objs) -> None:
    if getattr(args, "format", "text") == "json-lines":
        for obj in json_objs:
            print(json.dumps(obj, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


# --- subcommands ---------------------------------------------------------------


def cmd_world_validate(args) -> int:
    spec = _load_world(args.world)
    print(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_solve_expert(args) -> int:
    wspec = _load_world(args.world)
    gspec = grids.GridSpec.from_world(wspec, _parse_dims(args.grid_dims))
    actions = grids.default_action_set(wspec, args.n_actions)
    schedule = _parse_floats(args.gamma)
    grid, report = grids.solve_optimal(wspec, gspec, actions, schedule,
                                       args.tol, args.max_iters, args.threads,
                                       margin_shape=args.margin_shape)
    grids.save_grid(grid, args.out, provenance={
        "world_config_sha256": manifests.sha256_of_dict(wspec.to_dict()),
        "solver": {"gamma_schedule": list(schedule), "tol": args.tol,
                   "max_iters": args.max_iters, "iterations": report.iterations,
                   "margin_shape": args.margin_shape},
    })
    manifests.write_manifest(args.out, command="solve-expert",
                             configs={"world": wspec.to_dict(), "grid": gspec.to_dict()},
                             settings={"gamma_schedule": list(schedule), "tol": args.tol,
                                       "max_iters": args.max_iters,
                                       "n_actions": args.n_actions,
                                       "threads": args.threads})
    print(f"expert grid written to {args.out}: {report.iterations} sweeps, "
          f"residual {report.residual_history[-1]:.2e}, {report.seconds:.1f}s")
    return 0


def cmd_collect_demos(args) -> int:
    wspec = _load_world(args.world)
    expert = grids.load_grid(args.expert)
    demos = policies.collect_demos(expert, wspec, _parse_floats(args.goals),
                                   args.per_goal, seed=args.seed)
    Path(args.out).write_text(json.dumps(demos.to_dict()) + "\n")
    manifests.write_manifest(args.out, command="collect-demos",
                             configs={"world": wspec.to_dict()},
                             inputs={"expert": args.expert},
                             seeds={"demos": args.seed},
                             settings={"goals": list(_parse_floats(args.goals)),
                                       "per_goal": args.per_goal})
    print(f"{demos.n_trajectories} demo trajectories ({len(demos)} records, "
          f"{demos.rejected_rollouts} rejected) written to {args.out}")
    return 0


def cmd_train_bc(args) -> int:
    demos = policies.DemoSet.from_dict(json.loads(Path(args.demos).read_text()))
    wspec = _load_world(args.world)
    policy, report = policies.train_bc(
        demos, seed=args.seed, epochs=args.epochs, patience=args.patience,
        lr=args.lr, batch=args.batch, omega_bounds=wspec.omega_bounds)
    policy.save(args.out)
    manifests.write_manifest(args.out, command="train-bc",
                             inputs={"demos": args.demos},
                             seeds={"train": args.seed},
                             settings={"epochs": args.epochs, "patience": args.patience,
                                       "lr": args.lr, "batch": args.batch,
                                       "epochs_run": report.epochs_run,
                                       "best_val_loss": report.best_val_loss})
    print(f"policy written to {args.out}: best val loss {report.best_val_loss:.6f} "
          f"after {report.epochs_run} epochs"
          + (f" (early stop at {report.early_stop_epoch})" if report.early_stop_epoch else ""))
    return 0


def _fit(args, solver, kind_label: str, default_gamma: str) -> int:
    wspec = _load_world(args.world)
    gspec = grids.GridSpec.from_world(wspec, _parse_dims(args.grid_dims))
    policy = policies.MlpPolicy.load(args.policy)
    schedule = _parse_floats(args.gamma or default_gamma)
    kwargs = {}
    if solver is grids.evaluate_policy:
        kwargs["margin_shape"] = args.margin_shape
    grid, report = solver(policy, wspec, gspec, schedule, args.tol,
                          args.max_iters, args.threads, **kwargs)
    grids.save_grid(grid, args.out, provenance={
        "world_config_sha256": manifests.sha256_of_dict(wspec.to_dict()),
        "policy_sha256": manifests.sha256_of_file(args.policy),
        "solver": {"gamma_schedule": list(schedule), "tol": args.tol,
                   "max_iters": args.max_iters, "iterations": report.iterations,
                   "margin_shape": kwargs.get("margin_shape", "raw")},
    })
    manifests.write_manifest(args.out, command=kind_label,
                             configs={"world": wspec.to_dict(), "grid": gspec.to_dict()},
                             inputs={"policy": args.policy},
                             settings={"gamma_schedule": list(schedule), "tol": args.tol,
                                       "max_iters": args.max_iters, "threads": args.threads})
    print(f"{kind_label} grid written to {args.out}: {report.iterations} sweeps, "
          f"residual {report.residual_history[-1]:.2e}, {report.seconds:.1f}s")
    return 0


def cmd_fit_value(args) -> int:
    return _fit(args, grids.evaluate_policy, "fit-value", "0.9,0.99,0.999,0.9999")


def cmd_fit_reward_sum(args) -> int:
    return _fit(args, grids.evaluate_reward_sum, "fit-reward-sum", "0.99")


def cmd_eval_value(args) -> int:
    wspec = _load_world(args.world)
    grid = grids.load_grid(args.grid)
    policy = policies.MlpPolicy.load(args.policy)
    monitor = monitors.ReachAvoidMonitor(grid)
    if args.mode == "exhaustive":
        cm = monitors.evaluate_monitor_exhaustive(monitor, policy, wspec, grid.spec)
    else:
        def sampler(rng, count):
            return monitors.boundary_sampler(grid, args.band, count,
                                             int(rng.integers(2 ** 31)))
        cm = monitors.evaluate_monitor(monitor, policy, wspec, sampler, args.n, args.seed)
    _emit(args, [monitors.render_report("reach_avoid", cm)],
          [json.loads(monitors.render_report("reach_avoid", cm, "json-lines"))])
    return 0


def cmd_monitor_eval(args) -> int:
    wspec = _load_world(args.world)
    value_grid = grids.load_grid(args.value)
    reward_grid = grids.load_grid(args.reward)
    policy = policies.MlpPolicy.load(args.policy)
    members = [policies.MlpPolicy.load(p) for p in args.ensemble]
    ens = policies.EnsemblePolicy(members)
    mons = [monitors.ReachAvoidMonitor(value_grid),
            monitors.EnsembleMonitor(ens, wspec, args.eps),
            monitors.RewardSumMonitor(reward_grid, args.threshold)]

    text, objs = [], []
    for mon in mons:
        merged = None
        for k in range(args.seeds):
            seed = args.seed + k

            def sampler(rng, count, _seed=seed):
                return monitors.boundary_sampler(value_grid, args.band, count, _seed)

            cm = monitors.evaluate_monitor(mon, policy, wspec, sampler, args.n, seed)
            merged = cm if merged is None else merged.merged(cm)
        text.append(monitors.render_report(mon.name, merged))
        objs.append(json.loads(monitors.render_report(mon.name, merged, "json-lines")))
    _emit(args, text, objs)
    return 0


def _build_measure(args, catalog):
    name = args.measure
    if name == "euclid":
        return EuclideanMeasure()
    if name == "cosine":
        table = EmbeddingTable.load(args.embeddings or packaged_data_path("embeddings.json"))
        return CosineMeasure(table)
    if name == "sirl":
        if not args.sirl:
            raise ConfigError("--sirl encoder file required for the sirl measure")
        return SirlMeasure(SirlEncoder.load(args.sirl))
    raise ConfigError(f"unknown measure {name!r} for this command")


def cmd_filter(args) -> int:
    grid = grids.load_grid(args.grid)
    state = _parse_state(args.state)
    catalog = _load_catalog(args.catalog)
    if args.goal is not None:
        req = FilterRequest(state, GoalValue(gy=args.goal), args.measure,
                            args.intent, args.seed)
        decision = filter_continuous(req, grid, n=args.samples,
                                     sigma2_init=args.sigma2,
                                     max_doublings=args.max_doublings)
    elif args.goal_id is not None:
        entry = catalog.by_name(args.goal_id) if not args.goal_id.isdigit() \
            else catalog.entries[int(args.goal_id)]
        req = FilterRequest(state, GoalValue(goal_id=entry.id), args.measure,
                            args.intent, args.seed)
        decision = filter_discrete(req, catalog, grid, _build_measure(args, catalog))
    else:
        raise ConfigError("one of --goal / --goal-id is required")
    print(json.dumps(decision.to_dict(catalog), sort_keys=True))
    return 0


def cmd_sirl_train(args) -> int:
    catalog = _load_catalog(args.catalog)
    intents = _load_intents(args.intents)
    wanted = list(intents) if args.intent == "all" else [args.intent]
    encoder = SirlEncoder()
    for intent_id in wanted:
        human = simhuman.SimHuman(intents[intent_id])
        triplets = simhuman.make_triplets(human, catalog, args.triplets, args.seed)
        train_sirl(catalog, intents[intent_id], triplets, margin=args.margin,
                   seed=args.seed, epochs=args.epochs, encoder=encoder)
        rep = encoder.reports[intent_id]
        print(f"intent {intent_id}: final triplet loss {rep.final_loss:.6f}")
    encoder.save(args.out)
    manifests.write_manifest(args.out, command="sirl-train",
                             seeds={"triplets": args.seed},
                             settings={"triplets": args.triplets, "margin": args.margin,
                                       "epochs": args.epochs, "intents": wanted})
    print(f"encoder written to {args.out}")
    return 0


def cmd_rank_eval(args) -> int:
    catalog = _load_catalog(args.catalog)
    intents = _load_intents(args.intents)
    eval_goals = _load_eval_goals(args.intents)
    table = EmbeddingTable.load(args.embeddings or packaged_data_path("embeddings.json"))
    measures = {"euclid": EuclideanMeasure(), "cosine": CosineMeasure(table)}
    if args.sirl:
        measures["sirl"] = SirlMeasure(SirlEncoder.load(args.sirl))
    from .similarity import rank_alternatives

    rows = []
    for intent_id, profile in intents.items():
        human = simhuman.SimHuman(profile)
        for gh in eval_goals.get(intent_id, []):
            reference = simhuman.gt_ranking(human, catalog, gh)
            for mname, measure in measures.items():
                ranked = rank_alternatives(measure, catalog, gh, intent_id)
                rows.append((intent_id, catalog.entries[gh].name, mname,
                             rankmetrics.top_rank(reference, ranked),
                             rankmetrics.rel_rank(reference, ranked)))
    if args.csv:
        Path(args.csv).write_text(rankmetrics.render_rank_report(rows, "csv"))
    _emit(args, [rankmetrics.render_rank_report(rows)],
          [{"intent": r[0], "g_h": r[1], "measure": r[2],
            "top_rank": r[3], "rel_rank": r[4]} for r in rows])
    return 0


def cmd_align_eval(args) -> int:
    wspec = _load_world(args.world)
    grid = grids.load_grid(args.grid)
    catalog = _load_catalog(args.catalog)
    intents = _load_intents(args.intents)
    measure = _build_measure(args, catalog)
    human = simhuman.SimHuman(intents[args.intent])
    cases = simhuman.simulated_cases(human, catalog)
    rng = np.random.default_rng(args.seed)
    sampler = policies.default_start_sampler(wspec)
    states = [sampler(rng) for _ in range(args.n_states)]

    def runner(state, gh_id, intent_id, seed):
        req = FilterRequest(state, GoalValue(goal_id=gh_id), args.measure, intent_id, seed)
        return filter_discrete(req, catalog, grid, measure)

    result = simhuman.alignment_eval(cases, runner, states, args.seed)
    text = [f"alignment ({args.measure}, intent {args.intent}, n={args.n_states}): "
            f"mean {result.mean:.1f}% (std {result.std:.1f})"]
    if result.alt_mean is not None:
        text.append(f"  AltSuggest-only: mean {result.alt_mean:.1f}% (std {result.alt_std:.1f})")
    for gh, pct in result.per_case.items():
        alt = result.per_case_alt[gh]
        text.append(f"  {catalog.entries[gh].name:<18} {pct:6.1f}%"
                    + (f"  alt {alt:6.1f}%" if alt is not None else "  alt     --"))
    _emit(args, text, [{
        "measure": args.measure, "intent": args.intent, "n_states": args.n_states,
        "mean": result.mean, "std": result.std,
        "alt_mean": result.alt_mean, "alt_std": result.alt_std,
        "per_case": {str(k): v for k, v in result.per_case.items()},
    }])
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_artifacts

    artifacts = load_artifacts(args.artifacts_dir)
    app = create_app(artifacts, static_dir=args.static_dir, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="safealt",
        description="Reach-avoid analysis and safe goal filtering for "
                    "goal-conditioned navigation policies. Units: meters, "
                    "radians, seconds throughout.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_world(sp):
        sp.add_argument("--world", help="world config JSON (defaults to the built-in corridor)")

    sp = sub.add_parser("world-validate", help="validate a world config and echo its canonical form")
    add_world(sp)
    sp.set_defaults(fn=cmd_world_validate)

    sp = sub.add_parser("solve-expert", help="optimal reach-avoid synthesis on the dense grid")
    add_world(sp)
    sp.add_argument("--grid-dims", default="50,50,20,20", help="samples per axis: x,y,phi,g")
    sp.add_argument("--gamma", default="0.9,0.99,0.999,0.9999",
                    help="discount annealing schedule (comma separated)")
    sp.add_argument("--n-actions", type=int, default=21, help="discretized control count")
    sp.add_argument("--tol", type=float, default=1e-6, help="sup-norm residual tolerance")
    sp.add_argument("--max-iters", type=int, default=5000, help="sweep budget per stage")
    sp.add_argument("--threads", type=int, default=1, help="sweep worker count (1 = baseline)")
    sp.add_argument("--margin-shape", choices=("distance", "raw"), default="distance",
                    help="target-margin representation inside the solver")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_solve_expert)

    sp = sub.add_parser("collect-demos", help="sample successful expert rollouts")
    add_world(sp)
    sp.add_argument("--expert", required=True, help="optimal grid artifact")
    sp.add_argument("--goals", default="-3,0,3", help="demo goal gy values")
    sp.add_argument("--per-goal", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_collect_demos)

    sp = sub.add_parser("train-bc", help="behavior-clone a policy from demos")
    add_world(sp)
    sp.add_argument("--demos", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epochs", type=int, default=500)
    sp.add_argument("--patience", type=int, default=100)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch", type=int, default=64)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train_bc)

    for name, fn, gamma_help in (
            ("fit-value", cmd_fit_value, "default 0.9,0.99,0.999,0.9999"),
            ("fit-reward-sum", cmd_fit_reward_sum, "default 0.99")):
        sp = sub.add_parser(name, help=f"{name} for a fixed policy on the dense grid")
        add_world(sp)
        sp.add_argument("--policy", required=True)
        sp.add_argument("--grid-dims", default="50,50,20,20")
        sp.add_argument("--gamma", default=None, help=f"discount schedule ({gamma_help})")
        sp.add_argument("--tol", type=float, default=1e-6)
        sp.add_argument("--max-iters", type=int, default=5000)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--margin-shape", choices=("distance", "raw"), default="distance",
                        help="target-margin representation inside the solver")
        sp.add_argument("--out", required=True)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("eval-value", help="confusion matrix of a value grid vs rollout truth")
    add_world(sp)
    sp.add_argument("--grid", required=True)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--mode", choices=("exhaustive", "boundary"), default="exhaustive")
    sp.add_argument("--n", type=int, default=1000, help="samples (boundary mode)")
    sp.add_argument("--band", type=float, default=0.5, help="|V| band (boundary mode)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("text", "json-lines"), default="text")
    sp.set_defaults(fn=cmd_eval_value)

    sp = sub.add_parser("monitor-eval", help="compare monitors under the near-boundary protocol")
    add_world(sp)
    sp.add_argument("--value", required=True, help="policy-conditioned grid")
    sp.add_argument("--reward", required=True, help="reward-sum grid")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--ensemble", nargs="+", required=True, help="member policy files")
    sp.add_argument("--eps", type=float, default=2.5, help="ensemble variance threshold")
    sp.add_argument("--threshold", type=float, default=0.0, help="reward-sum flag threshold")
    sp.add_argument("--band", type=float, default=0.5)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seeds", type=int, default=10, help="number of seeded repetitions")
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--format", choices=("text", "json-lines"), default="text")
    sp.set_defaults(fn=cmd_monitor_eval)

    sp = sub.add_parser("filter", help="monitor a goal request and propose an alternative")
    sp.add_argument("--grid", required=True, help="policy-conditioned value grid")
    sp.add_argument("--state", required=True, help="x,y,phi")
    sp.add_argument("--goal", type=float, help="continuous goal gy")
    sp.add_argument("--goal-id", help="catalog goal (name or index)")
    sp.add_argument("--measure", choices=("euclid", "cosine", "sirl", "llm"), default="euclid")
    sp.add_argument("--intent", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=100, help="draws per round")
    sp.add_argument("--sigma2", type=float, default=0.1, help="initial sampling variance")
    sp.add_argument("--max-doublings", type=int, default=8)
    sp.add_argument("--catalog", default=None)
    sp.add_argument("--embeddings", default=None)
    sp.add_argument("--sirl", default=None, help="trained encoder file")
    sp.set_defaults(fn=cmd_filter)

    sp = sub.add_parser("sirl-train", help="train the intent-conditioned similarity encoder")
    sp.add_argument("--catalog", default=None)
    sp.add_argument("--intents", default=None)
    sp.add_argument("--intent", default="all")
    sp.add_argument("--triplets", type=int, default=1000)
    sp.add_argument("--margin", type=float, default=1.0)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_sirl_train)

    sp = sub.add_parser("rank-eval", help="TopRank/RelRank of each measure vs the simulated human")
    sp.add_argument("--catalog", default=None)
    sp.add_argument("--intents", default=None)
    sp.add_argument("--embeddings", default=None)
    sp.add_argument("--sirl", default=None)
    sp.add_argument("--csv", default=None, help="also write scores as CSV")
    sp.add_argument("--format", choices=("text", "json-lines"), default="text")
    sp.set_defaults(fn=cmd_rank_eval)

    sp = sub.add_parser("align-eval", help="alternative-alignment harness on the discrete catalog")
    add_world(sp)
    sp.add_argument("--grid", required=True)
    sp.add_argument("--catalog", default=None)
    sp.add_argument("--intents", default=None)
    sp.add_argument("--measure", choices=("euclid", "cosine", "sirl"), default="euclid")
    sp.add_argument("--intent", required=True)
    sp.add_argument("--embeddings", default=None)
    sp.add_argument("--sirl", default=None)
    sp.add_argument("--n-states", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("text", "json-lines"), default="text")
    sp.set_defaults(fn=cmd_align_eval)

    sp = sub.add_parser("serve", help="HTTP API over pre-built artifacts")
    sp.add_argument("--artifacts-dir", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8008)
    sp.add_argument("--static-dir", default=None, help="built console files to serve at /ui")
    sp.add_argument("--seed", type=int, default=0, help="seed for server-generated propose seeds")
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SafealtError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
