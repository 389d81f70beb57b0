"""Command-line front door.

Subcommands: ``search`` runs a strategy end to end and persists its
outputs; ``pareto`` and ``hypervolume`` are pure readers over result
files; ``space-info`` describes a search space. Exit codes: 0 success,
2 configuration or input error, 3 evaluation failure (partial outputs
are kept).
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

from . import __version__
from .evaluators import build_evaluator
from .pareto import hypervolume_2d, non_dominated_sort
from .search import (
    SearchAbortedError,
    SearchConfig,
    run_directory,
    run_search,
    write_run_result,
)
from .space import PRESETS, SpaceValidationError, cardinality, load_space

CONFIG_SCHEMA_VERSION = 1

DEFAULT_EVALUATOR_SPEC = {"kind": "analytic-proxy"}


class ConfigError(Exception):
    """Anything wrong with flags, config files, or input files."""


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    version = data.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version}")
    return data


def _parse_ref(text: str) -> tuple[float, ...]:
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--ref must be comma-separated numbers: {exc}") from None
    if len(parts) != 2:
        raise ConfigError("--ref needs exactly two components, e.g. --ref 0.55,2.5e8")
    return parts


def cmd_search(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config) if args.config else {}
    space_spec = file_cfg.get("space", "hytnas-default")
    evaluator_spec = file_cfg.get("evaluator", DEFAULT_EVALUATOR_SPEC)

    search_keys = {
        k: v
        for k, v in file_cfg.items()
        if k not in ("schema_version", "space", "evaluator")
    }
    if args.strategy is not None:
        search_keys["strategy"] = args.strategy
    if args.budget is not None:
        search_keys["eval_budget"] = args.budget
    if args.seed is not None:
        search_keys["seed"] = args.seed
    if args.ref is not None:
        search_keys["ref_point"] = _parse_ref(args.ref)
    if args.jobs is not None:
        search_keys["jobs"] = args.jobs
    if "init_size" not in search_keys and "eval_budget" in search_keys:
        # a small --budget should not trip over the defaulted init size
        default_init = SearchConfig.__dataclass_fields__["init_size"].default
        search_keys["init_size"] = min(default_init, search_keys["eval_budget"])

    try:
        if isinstance(space_spec, dict):
            from .space import space_from_dict

            space = space_from_dict(space_spec)
        else:
            space = load_space(str(space_spec))
        evaluator = build_evaluator(space, evaluator_spec)
        cfg = SearchConfig.from_dict(search_keys)
    except (SpaceValidationError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    run_dir = run_directory(args.out, cfg.strategy, cfg.seed)
    try:
        run_dir.mkdir(parents=True, exist_ok=args.force)
    except FileExistsError:
        raise ConfigError(
            f"run directory {run_dir} already exists (pass --force to overwrite)"
        ) from None

    manifest = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "tool_version": __version__,
        "config_path": args.config,
        "output_dir": str(run_dir),
        "space": space_spec if isinstance(space_spec, dict) else str(space_spec),
        "evaluator": evaluator_spec,
        "resolved_config": cfg.to_dict(),
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )

    try:
        result = run_search(space, evaluator, cfg)
    except SearchAbortedError as exc:
        write_run_result(exc.partial, run_dir)
        print(f"error: {exc.cause}", file=sys.stderr)
        for key, value in sorted(exc.cause.diagnostics.items()):
            print(f"  {key}: {value}", file=sys.stderr)
        print(f"partial outputs retained in {run_dir}", file=sys.stderr)
        return 3

    write_run_result(result, run_dir)
    print(f"strategy: {result.strategy}")
    print(f"evaluations: {len(result.records)}")
    print(f"final hypervolume: {repr(result.final_hypervolume)}")
    print(f"front size: {len(result.front)}")
    print(f"outputs: {run_dir}")
    return 0


def _read_archive_csv(path: str) -> tuple[list[str], list[str], list[list[str]]]:
    """Returns (gene columns, objective names, raw rows)."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"archive file not found: {path}")
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ConfigError(f"{path}: empty archive")
    header = [h.strip() for h in lines[0].split(",")]
    gene_cols = [h for h in header if h.startswith("g") and h[1:].isdigit()]
    rest = header[len(gene_cols):]
    obj_names = [h for h in rest if h != "eval_index"]
    if not obj_names:
        raise ConfigError(f"{path}: line 1: no objective columns found")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise ConfigError(
                f"{path}: line {lineno}: expected {len(header)} cells, got {len(cells)}"
            )
        rows.append(cells)
    return gene_cols, obj_names, rows


def cmd_pareto(args: argparse.Namespace) -> int:
    gene_cols, obj_names, rows = _read_archive_csv(args.archive)
    senses = [s.strip() for s in args.sense.split(",")]
    if len(senses) != len(obj_names) or any(s not in ("min", "max") for s in senses):
        raise ConfigError(
            f"--sense needs one min/max per objective ({len(obj_names)} objectives)"
        )
    import numpy as np

    try:
        values = np.array(
            [
                [float(r[len(gene_cols) + j]) for j in range(len(obj_names))]
                for r in rows
            ]
        )
    except ValueError as exc:
        raise ConfigError(f"{args.archive}: non-numeric objective cell: {exc}") from None
    if values.shape[0] == 0:
        raise ConfigError(f"{args.archive}: no data rows")

    signs = np.array([1.0 if s == "min" else -1.0 for s in senses])
    level0 = non_dominated_sort(values * signs)[0]

    header = ",".join(gene_cols + obj_names + ["eval_index"])
    out_lines = [header]
    for i in level0:
        out_lines.append(",".join(rows[i]))
    text = "\n".join(out_lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _read_points(path: str) -> list[tuple[float, float]]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input file not found: {path}")
    if p.suffix == ".json":
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
            return [tuple(map(float, e["minimized"])) for e in data["front"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: malformed front document: {exc}") from None
    points = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        try:
            values = [float(c) for c in cells]
        except ValueError:
            if lineno == 1:  # header line
                continue
            raise ConfigError(f"{path}: line {lineno}: non-numeric cell") from None
        if len(values) != 2:
            raise ConfigError(
                f"{path}: line {lineno}: expected exactly two objective columns, "
                f"got {len(values)}"
            )
        points.append(tuple(values))
    return points


def cmd_hypervolume(args: argparse.Namespace) -> int:
    if args.ref is None:
        raise ConfigError("an explicit reference point is required: --ref r1,r2")
    ref = _parse_ref(args.ref)
    points = _read_points(args.front)
    for f1, f2 in points:
        if not (f1 < ref[0] and f2 < ref[1]):
            print(
                f"warning: point ({f1}, {f2}) does not dominate the reference "
                "point and contributes zero",
                file=sys.stderr,
            )
    hv = hypervolume_2d(points, ref) if points else 0.0
    print(repr(float(hv)))
    return 0


def cmd_space_info(args: argparse.Namespace) -> int:
    try:
        space = load_space(args.space)
    except SpaceValidationError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"space: {args.space}")
    print(f"groups: {len(space.groups)}")
    print(f"genome length: {space.genome_length}")
    print(f"cardinality: {cardinality(space)}")
    print(f"input resolution: {space.input_resolution}")
    print()
    print(f"{'gene':<5} {'group':<6} {'kind':<10} {'hyperparam':<14} {'count':<6} options")
    pos = 0
    for gi, group, hp in space.gene_specs():
        options = ", ".join(
            str(int(o)) if float(o).is_integer() else str(o) for o in hp.options
        )
        print(f"{pos:<5} {gi:<6} {group.kind:<10} {hp.name:<14} {hp.n_options:<6} {options}")
        pos += 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hytsearch",
        description="Multi-objective architecture search over a hybrid conv/attention space",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="run a search strategy end to end")
    p_search.add_argument("--config", help="JSON config file; flags override its values")
    p_search.add_argument("--strategy", choices=("hytnas", "random", "nsga2"))
    p_search.add_argument("--budget", type=int, help="total evaluation budget")
    p_search.add_argument("--seed", type=int)
    p_search.add_argument("--ref", help="explicit reference point, e.g. 0.55,2.5e8")
    p_search.add_argument("--jobs", type=int, help="max concurrent evaluations")
    p_search.add_argument("--out", required=True, help="root output directory")
    p_search.add_argument(
        "--force", action="store_true", help="allow writing into an existing run directory"
    )
    p_search.set_defaults(func=cmd_search)

    p_pareto = sub.add_parser("pareto", help="print the non-dominated rows of an archive CSV")
    p_pareto.add_argument("archive", help="archive.csv produced by the search command")
    p_pareto.add_argument(
        "--sense",
        default="min,min",
        help="per-objective direction of the stored values (default: min,min)",
    )
    p_pareto.add_argument("--out", help="write the rows here instead of stdout")
    p_pareto.set_defaults(func=cmd_pareto)

    p_hv = sub.add_parser("hypervolume", help="hypervolume of a point file against --ref")
    p_hv.add_argument("front", help="front.json or a CSV of minimized objective pairs")
    p_hv.add_argument("--ref", help="reference point, e.g. 1.1,1.1")
    p_hv.set_defaults(func=cmd_hypervolume)

    p_info = sub.add_parser("space-info", help="describe a search space")
    p_info.add_argument(
        "--space",
        default="hytnas-default",
        help=f"preset name ({', '.join(PRESETS)}) or a space JSON file",
    )
    p_info.set_defaults(func=cmd_space_info)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
