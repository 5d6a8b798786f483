"""Command line interface.

Subcommands: ``run`` (execute a scenario ensemble and store the result),
``serve`` (start the HTTP service), ``ingest`` (merge case CSVs into the
store), ``validate`` (check a result directory), ``export`` (write one
percentile-band series as CSV) and ``search`` (find districts).

Settings resolve in a fixed order: a command line flag wins over the
environment (``EPISIM_STORE``, ``EPISIM_GRAPH``, ``EPISIM_BIND``), which
wins over the JSON config file given via ``--config``.

Exit codes: 0 on success, 1 when the work itself fails (invalid data,
unknown ids, format problems), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .api import create_app
from .ensemble import NATIONAL_ID, TOTAL_GROUP, ScenarioDefinition, run_ensemble
from .errors import EpisimError, ValidationError
from .graph import load_graph
from .store import Store, validate_format

log = logging.getLogger(__name__)

ENV_STORE = "EPISIM_STORE"
ENV_GRAPH = "EPISIM_GRAPH"
ENV_BIND = "EPISIM_BIND"

DEFAULT_BIND = "127.0.0.1:8000"

EXPORT_HEADER = ("day", "p5", "p25", "p50", "p75", "p95")


class UsageError(Exception):
    """Command line usage problem; exits with status 2."""


@dataclass
class Settings:
    """Effective settings after flag > environment > config resolution."""

    store: str | None
    graph: str | None
    bind: str


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return data


def _resolve(flag: str | None, env_name: str, config: dict, key: str) -> str | None:
    if flag is not None:
        return flag
    env = os.environ.get(env_name)
    if env:
        return env
    value = config.get(key)
    return None if value is None else str(value)


def _settings(args: argparse.Namespace) -> Settings:
    config = _load_config(args.config)
    return Settings(
        store=_resolve(args.store, ENV_STORE, config, "store"),
        graph=_resolve(getattr(args, "graph", None), ENV_GRAPH, config, "graph"),
        bind=_resolve(getattr(args, "bind", None), ENV_BIND, config, "bind")
        or DEFAULT_BIND,
    )


def _open_store(settings: Settings) -> Store:
    if settings.store is None:
        raise UsageError(
            f"no store configured (use --store, ${ENV_STORE} or the config file)"
        )
    return Store(settings.store)


def _parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not host:
        raise UsageError(f"bind address must look like host:port, got {bind!r}")
    try:
        return host, int(port)
    except ValueError:
        raise UsageError(f"invalid port in bind address {bind!r}") from None


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    store = _open_store(settings)
    if args.scenario_file is not None:
        try:
            data = json.loads(Path(args.scenario_file).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read scenario file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.scenario_file}: not valid JSON ({exc})") from exc
        scenario = ScenarioDefinition.from_dict(data)
        if settings.graph is None:
            raise UsageError(
                f"--scenario-file needs a graph (use --graph, ${ENV_GRAPH} or the config file)"
            )
        graph = load_graph(settings.graph)
        store.add_scenario(scenario, graph, overwrite=True)
    elif args.scenario is not None:
        scenario = store.get_scenario(args.scenario)
        graph = store.get_graph(args.scenario)
    else:
        raise UsageError("give a scenario id or --scenario-file")

    result = run_ensemble(
        graph,
        scenario,
        num_members=args.members,
        num_days=args.days,
        seed=args.seed,
        dt=args.dt,
        start_date=args.start_date,
    )
    path = store.save_result(result)
    _emit(
        args,
        {
            "scenario_id": result.scenario_id,
            "num_members": result.num_members,
            "num_days": result.num_days,
            "seed": result.seed,
            "result_path": str(path),
        },
        f"scenario {result.scenario_id}: {result.num_members} members x "
        f"{result.num_days} days (seed {result.seed})\n"
        f"result written to {path}",
    )
    return 0


def cmd_serve(args: argparse.Namespace, settings: Settings) -> int:
    import uvicorn

    store = _open_store(settings)
    host, port = _parse_bind(settings.bind)
    app = create_app(store)
    log.info("serving store %s on %s:%d", store.root, host, port)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def cmd_ingest(args: argparse.Namespace, settings: Settings) -> int:
    store = _open_store(settings)
    files = []
    total = 0
    for path in args.files:
        rows, total = store.ingest_cases(path)
        files.append({"path": str(path), "rows": rows})
    _emit(
        args,
        {"files": files, "total_records": total},
        "\n".join(f"{f['path']}: {f['rows']} rows" for f in files)
        + f"\nstore holds {total} case records",
    )
    return 0


def cmd_validate(args: argparse.Namespace, settings: Settings) -> int:
    problems = validate_format(args.path)
    _emit(
        args,
        {"path": str(args.path), "valid": not problems, "problems": problems},
        f"{args.path}: ok"
        if not problems
        else f"{args.path}: {len(problems)} problem(s)\n" + "\n".join(problems),
    )
    return 0 if not problems else 1


def cmd_export(args: argparse.Namespace, settings: Settings) -> int:
    store = _open_store(settings)
    result = store.load_result(args.scenario)
    series = {
        q: result.series(q, args.compartment, args.district, args.group)
        for q in result.percentiles
    }
    lines = [",".join(EXPORT_HEADER)]
    for day in range(result.num_days + 1):
        row = [str(day)] + [repr(float(series[q][day])) for q in result.percentiles]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.output is not None:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        _emit(
            args,
            {
                "scenario_id": args.scenario,
                "compartment": args.compartment,
                "district": args.district,
                "group": args.group,
                "rows": result.num_days + 1,
                "output": str(args.output),
            },
            f"wrote {result.num_days + 1} rows to {args.output}",
        )
    else:
        if args.json:
            raise UsageError("--json export needs --output (stdout carries the CSV)")
        sys.stdout.write(text)
    return 0


def cmd_search(args: argparse.Namespace, settings: Settings) -> int:
    store = _open_store(settings)
    matches = store.search_districts(args.query)
    _emit(
        args,
        {
            "query": args.query,
            "results": [{"id": i, "name": n} for i, n in matches],
        },
        "\n".join(f"{i}  {n}" for i, n in matches)
        if matches
        else f"no districts match {args.query!r}",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", help=f"store directory (or ${ENV_STORE})")
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    parser = argparse.ArgumentParser(
        prog="episim",
        description="Scenario-based epidemic simulation and analytics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a scenario ensemble")
    run.add_argument("scenario", nargs="?", help="scenario id in the store")
    run.add_argument("--scenario-file", help="scenario definition JSON to register and run")
    run.add_argument("--graph", help=f"graph JSON for --scenario-file (or ${ENV_GRAPH})")
    run.add_argument("--members", type=int, help="override ensemble size")
    run.add_argument("--days", type=int, help="override simulated days")
    run.add_argument("--seed", type=int, help="override the ensemble seed")
    run.add_argument("--dt", type=float, default=0.1, help="integration step in days")
    run.add_argument("--start-date", help="calendar date of day 0 (ISO)")
    run.set_defaults(handler=cmd_run)

    serve = sub.add_parser("serve", parents=[common], help="start the HTTP service")
    serve.add_argument("--bind", help=f"host:port (or ${ENV_BIND}; default {DEFAULT_BIND})")
    serve.set_defaults(handler=cmd_serve)

    ingest = sub.add_parser("ingest", parents=[common], help="ingest case CSV files")
    ingest.add_argument("files", nargs="+", help="case CSV files")
    ingest.set_defaults(handler=cmd_ingest)

    validate = sub.add_parser("validate", parents=[common],
                              help="validate a result directory")
    validate.add_argument("path", help="result directory to check")
    validate.set_defaults(handler=cmd_validate)

    export = sub.add_parser("export", parents=[common],
                            help="export percentile bands as CSV")
    export.add_argument("scenario", help="scenario id in the store")
    export.add_argument("--compartment", required=True,
                        help="compartment code (one of S E C I H U R D)")
    export.add_argument("--district", default=NATIONAL_ID,
                        help=f"district id (default {NATIONAL_ID})")
    export.add_argument("--group", default=TOTAL_GROUP,
                        help=f"age group label (default {TOTAL_GROUP})")
    export.add_argument("--output", help="write CSV here instead of stdout")
    export.set_defaults(handler=cmd_export)

    search = sub.add_parser("search", parents=[common], help="search districts")
    search.add_argument("query", help="id or name fragment")
    search.set_defaults(handler=cmd_search)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = _settings(args)
        return args.handler(args, settings)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except EpisimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry()
