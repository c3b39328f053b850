"""Operator command line: parse/lint corpora, batch-score, fit role
groups, sweep cluster counts, run the toy trainer, and serve.

Exit codes: 0 success, 1 validation failures under --strict, 2 usage or
config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ServiceConfig, load_config
from .grouping import (
    DEFAULT_CLUSTER_COUNT,
    fit_kmeans,
    inertia,
    load_group_model,
    load_profiles,
    save_group_model,
    silhouette,
    sweep_cluster_counts,
)
from .grpo import GrpoConfig
from .normalizer import NormalizerState, SnapshotError, restore, snapshot
from .pipeline import RewardPipeline
from .rewards import GoldAnnotation
from .trajectory import FocusDimension, Severity, parse_trajectory
from .trainer import (
    TOY_GRPO_CONFIG,
    default_task,
    emit_curves,
    load_task,
    run_training,
    save_task,
)

__all__ = ["main"]


def _read_corpus(path: str):
    """Yield (line_number, record_or_None, error_or_None) per non-blank line."""
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
                if not isinstance(record, dict):
                    raise ValueError("record must be a JSON object")
                yield line_number, record, None
            except ValueError as exc:
                yield line_number, None, str(exc)


def _gold_from_record(record: dict, character_id: str) -> GoldAnnotation:
    gold = record["gold"]
    foci = []
    for label in gold["gold_foci"]:
        dim = FocusDimension.from_label(label)
        if dim is None:
            raise ValueError(f"unknown gold focus label: {label!r}")
        foci.append(dim)
    attrs = {}
    for label, text in gold.get("gold_attrs", {}).items():
        dim = FocusDimension.from_label(label)
        if dim is None:
            raise ValueError(f"unknown gold focus label: {label!r}")
        attrs[dim] = text
    return GoldAnnotation(
        character_id=gold.get("character_id", character_id),
        gold_foci=frozenset(foci),
        gold_attrs=attrs,
        reference_response=gold["reference_response"],
    )


def cmd_parse(args: argparse.Namespace) -> int:
    records = 0
    invalid = 0
    bad_lines = 0
    for line_number, record, error in _read_corpus(args.input):
        if error is not None:
            bad_lines += 1
            print(f"line {line_number}: bad JSON: {error}", file=sys.stderr)
            continue
        records += 1
        parsed = parse_trajectory(record.get("raw_output", ""))
        if not parsed.format_valid:
            invalid += 1
        for diagnostic in parsed.diagnostics:
            marker = "ERROR" if diagnostic.severity is Severity.ERROR else "warn"
            detail = f" ({diagnostic.detail})" if diagnostic.detail else ""
            print(f"line {line_number}: {marker}: {diagnostic.code.value}{detail}")
    print(f"{records} records, {records - invalid} valid, {invalid} invalid, {bad_lines} bad lines")
    if args.strict and (invalid > 0 or bad_lines > 0):
        return 1
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config) if args.config else ServiceConfig()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        model = load_group_model(args.groups)
    except (OSError, ValueError) as exc:
        print(f"cannot load group model: {exc}", file=sys.stderr)
        return 2

    normalizer = NormalizerState(epsilon=config.epsilon_norm, decay=config.decay)
    if args.stats_in:
        try:
            normalizer = restore(json.loads(Path(args.stats_in).read_text(encoding="utf-8")))
        except (OSError, ValueError, SnapshotError) as exc:
            print(f"cannot restore stats: {exc}", file=sys.stderr)
            return 2

    pipeline = RewardPipeline(
        weights=config.weights,
        ref_config=config.ref_config(),
        normalizer=normalizer,
        group_model=model,
    )

    out_handle = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for line_number, record, error in _read_corpus(args.input):
            if error is not None:
                print(f"line {line_number}: bad JSON: {error}", file=sys.stderr)
                continue
            try:
                character_id = record["character_id"]
                gold = _gold_from_record(record, character_id)
            except (KeyError, ValueError) as exc:
                print(f"line {line_number}: bad record: {exc}", file=sys.stderr)
                continue
            request_id = str(record.get("request_id", line_number))
            result = pipeline.score_item(
                character_id=character_id,
                raw_output=record.get("raw_output", ""),
                gold=gold,
                update_stats=args.update,
            )
            out_handle.write(json.dumps(result.to_wire(request_id)) + "\n")
    finally:
        if out_handle is not sys.stdout:
            out_handle.close()

    if args.update and args.stats_out:
        Path(args.stats_out).write_text(
            json.dumps(snapshot(pipeline.normalizer)), encoding="utf-8"
        )
    return 0


def _parse_sweep(spec: str) -> range:
    try:
        low, high = spec.split("..")
        return range(int(low), int(high) + 1)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"sweep range must look like 2..6: {spec!r}") from exc


def cmd_fit_groups(args: argparse.Namespace) -> int:
    if args.G < 1:
        print("--G must be >= 1", file=sys.stderr)
        return 2
    try:
        profiles = load_profiles(args.profiles)
    except (OSError, ValueError) as exc:
        print(f"cannot load profiles: {exc}", file=sys.stderr)
        return 2
    seeds = (
        [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    )
    if args.sweep:
        print("G,inertia,silhouette")
        for row in sweep_cluster_counts(profiles, args.sweep, seeds):
            sil = "" if row.silhouette is None else f"{row.silhouette:.6g}"
            print(f"{row.cluster_count},{row.inertia:.6g},{sil}")
        return 0
    try:
        model = fit_kmeans(profiles, args.G, seed=args.seed)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 2
    save_group_model(model, args.out)
    sil = (
        silhouette(model, profiles)
        if model.cluster_count >= 2 and len(profiles) >= 2
        else None
    )
    print(
        f"G={model.cluster_count} inertia={inertia(model, profiles):.6g} "
        f"silhouette={'n/a' if sil is None else format(sil, '.6g')} -> {args.out}"
    )
    return 0


def cmd_train_toy(args: argparse.Namespace) -> int:
    try:
        task = load_task(args.task) if args.task else default_task()
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot load task: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        task = type(task)(
            prompts=task.prompts, candidate_pool=task.candidate_pool, seed=args.seed
        )
    if args.dump_task:
        save_task(task, args.dump_task)

    config = GrpoConfig(
        kl_beta=args.beta,
        grpo_group_size=args.group_size,
        adv_epsilon=args.adv_epsilon,
    )
    normalizer = NormalizerState()
    from .normalizer import DEFAULT_WEIGHTS

    try:
        log = run_training(
            task, config, normalizer, DEFAULT_WEIGHTS, steps=args.steps, lr=args.lr
        )
    except ValueError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 2
    emit_curves(log, args.out)
    if log.records:
        final = log.records[-1]
        print(
            f"steps={args.steps} r_focus={final.r_focus:.4f} r_attr={final.r_attr:.4f} "
            f"r_ref={final.r_ref:.4f} r_scalar={final.r_scalar:.4f} -> {args.out}"
        )
    else:
        pools = sum(len(p) for p in task.candidate_pool.values())
        print(
            f"steps=0; initial policy is uniform over {pools} candidates "
            f"across {len(task.prompts)} prompts -> {args.out}"
        )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    try:
        config = load_config(args.config) if args.config else load_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rolereward",
        description="Reward engine operations: lint, score, group, train, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="lint a JSONL corpus of raw outputs")
    p.add_argument("input")
    p.add_argument("--strict", action="store_true", help="exit 1 on any invalid record")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("score", help="batch-score a JSONL corpus")
    p.add_argument("input")
    p.add_argument("--groups", required=True, help="fitted group model JSON")
    p.add_argument("--stats-in", default=None, help="normalizer snapshot to start from")
    p.add_argument("--stats-out", default=None, help="write updated snapshot here")
    p.add_argument("--update", action="store_true", help="update normalizer stats")
    p.add_argument("--out", default=None, help="output JSONL (default stdout)")
    p.add_argument("--config", default=None, help="service config JSON for weights etc.")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fit-groups", help="fit k-means role groups over profiles")
    p.add_argument("profiles", help="JSONL with character_id, profile_text, embedding")
    p.add_argument("--G", type=int, default=DEFAULT_CLUSTER_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", default=None, help="comma list for sweeps (default: --seed)")
    p.add_argument("--out", default="group_model.json")
    p.add_argument("--sweep", type=_parse_sweep, default=None, help="e.g. 2..6")
    p.set_defaults(func=cmd_fit_groups)

    p = sub.add_parser("train-toy", help="run the toy trainer and write curves")
    p.add_argument("task", nargs="?", default=None, help="task JSON (default: built-in)")
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=None, help="override the task seed")
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.02)
    p.add_argument("--group-size", type=int, default=4)
    p.add_argument("--adv-epsilon", type=float, default=TOY_GRPO_CONFIG.adv_epsilon)
    p.add_argument("--out", default="curves.csv")
    p.add_argument("--dump-task", default=None, help="write the resolved task JSON here")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("serve", help="run the scoring service")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
