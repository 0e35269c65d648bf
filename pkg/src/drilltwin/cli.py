"""Command-line entry points.

Failures print a single machine-readable JSON object to stderr and exit
nonzero, so wrapping scripts never have to scrape tracebacks.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path

from .fixtures import FIXTURE_DIR_ENV, packaged_fixture_dir
from .metrics import compare_runs, compute_metrics
from .runlog import RunLog, load_any
from .scenario import Scenario, builtin_scenario_names, resolve_scenario
from .simulate import run_simulation


def _fail(code: str, message: str, status: int = 1) -> int:
    print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)
    return status


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    d = scenario.to_dict()
    if getattr(args, "seed", None) is not None:
        d["seed"] = int(args.seed)
    if getattr(args, "assist", None) is not None:
        d["assist_enabled"] = args.assist == "on"
    if getattr(args, "duration", None) is not None:
        d["duration_s"] = float(args.duration)
    return Scenario.from_dict(d)


def _resolve_log(ref: str, fixture_dir: str | None) -> Path:
    """Find a log by path, allowing extension-less names and fixture-dir lookup.

    Search order: the path as given, then with known extensions appended, then
    the same two forms under the fixture directory (the --fixture-dir flag, the
    environment variable, or the fixtures shipped with the package).
    """
    roots = [Path(".")]
    if fixture_dir:
        roots.append(Path(fixture_dir))
    elif os.environ.get(FIXTURE_DIR_ENV):
        roots.append(Path(os.environ[FIXTURE_DIR_ENV]))
    else:
        roots.append(packaged_fixture_dir())
    for root in roots:
        base = root / ref
        for cand in (base, base.with_name(base.name + ".dtlog"),
                     base.with_name(base.name + ".csv")):
            if cand.is_file():
                return cand
    raise FileNotFoundError(f"no log found for {ref!r} (searched {[str(r) for r in roots]})")


def _cmd_run(args) -> int:
    scenario = resolve_scenario(args.scenario)
    scenario = _apply_overrides(scenario, args)
    log = run_simulation(scenario)
    out = Path(args.out) if args.out else Path(f"{scenario.name}_seed{scenario.seed}.dtlog")
    if args.csv or out.suffix.lower() == ".csv":
        log.to_csv(out)
    else:
        log.save(out)
    print(f"wrote {out} ({len(log.records)} ticks, {len(log.events)} events)")
    if args.report:
        print(compute_metrics(log).table())
    return 0


def _cmd_replay(args) -> int:
    path = _resolve_log(args.log, args.fixture_dir)
    source = load_any(path)
    d = dict(source.header["scenario"])
    d["input"] = {"type": "replay", "log": str(path)}
    log = run_simulation(Scenario.from_dict(d))
    if args.out:
        log.save(Path(args.out))
        print(f"wrote {args.out}")
    if args.check:
        import numpy as np

        same = (log.records.shape == source.records.shape
                and log.records.dtype == source.records.dtype
                and np.array_equal(log.records.view("u1"), source.records.view("u1")))
        if not same:
            return _fail("replay_mismatch", "replayed state trace differs from the recording")
        print("replay matches the recording tick for tick")
    return 0


def _cmd_report(args) -> int:
    report = compute_metrics(load_any(_resolve_log(args.log, args.fixture_dir)))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.table())
    return 0


def _cmd_compare(args) -> int:
    cmp = compare_runs(load_any(_resolve_log(args.log_a, args.fixture_dir)),
                       load_any(_resolve_log(args.log_b, args.fixture_dir)))
    if args.json:
        print(json.dumps(cmp.to_dict(), indent=2, sort_keys=True))
    else:
        print(cmp.table())
    return 0


def _cmd_describe(args) -> int:
    if args.scenario is None:
        # Full default parameter set plus the builtin catalogue.
        base = Scenario()
        out = {"defaults": base.to_dict(), "builtin_scenarios": builtin_scenario_names()}
        print(json.dumps(out, indent=2, sort_keys=True))
        return 0
    scenario = resolve_scenario(args.scenario)
    d = scenario.to_dict()
    d["config_hash"] = scenario.config_hash()
    print(json.dumps(d, indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    from .service import ServeConfig, serve_session

    scenario = resolve_scenario(args.scenario)
    scenario = _apply_overrides(scenario, args)
    config = ServeConfig(host=args.host, port=args.port, pace=args.pace,
                         snapshot_hz=args.rate, log_dir=args.log_dir)
    try:
        asyncio.run(serve_session(scenario, config))
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_phantom(args) -> int:
    from .phantom import PhantomSpec, make_phantom

    spec = PhantomSpec(size_voxels=args.n, spacing_mm=args.spacing)
    vol = make_phantom(spec)
    vol.save(Path(args.out))
    counts = {s.name: int((vol.labels == s.index).sum()) for s in vol.structures}
    print(f"wrote {args.out} shape={vol.shape} spacing={vol.spacing_mm.tolist()}")
    print(json.dumps(counts, indent=2))
    return 0


def _cmd_fixtures(args) -> int:
    from .fixtures import write_reference_fixtures

    for p in write_reference_fixtures(args.out_dir):
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drilltwin",
                                description="cooperative drilling twin: run, inspect, serve")
    sub = p.add_subparsers(dest="command", required=True)

    def add_overrides(sp):
        sp.add_argument("--seed", type=int, default=None, help="override scenario seed")
        sp.add_argument("--assist", choices=("on", "off"), default=None,
                        help="override assist_enabled")
        sp.add_argument("--duration", type=float, default=None,
                        help="override duration_s")

    def add_fixture_dir(sp):
        sp.add_argument("--fixture-dir", default=None,
                        help=f"directory searched for extension-less log names "
                             f"(default: ${FIXTURE_DIR_ENV} or the packaged fixtures)")

    sp = sub.add_parser("run", help="run a scenario and save its log")
    sp.add_argument("--scenario", required=True,
                    help="builtin scenario name or path to a scenario JSON")
    sp.add_argument("--out", default=None, help="output log path (.dtlog or .csv)")
    sp.add_argument("--csv", action="store_true", help="write CSV regardless of suffix")
    sp.add_argument("--report", action="store_true", help="print the metrics table")
    add_overrides(sp)
    sp.set_defaults(fn=_cmd_run)

    sp = sub.add_parser("replay", help="re-run a recorded log through the engine")
    sp.add_argument("--log", required=True)
    sp.add_argument("--out", default=None, help="save the replayed log here")
    sp.add_argument("--check", action="store_true",
                    help="fail unless the replay matches the recording bit for bit")
    add_fixture_dir(sp)
    sp.set_defaults(fn=_cmd_replay)

    sp = sub.add_parser("report", help="per-structure metrics for one log")
    sp.add_argument("--log", required=True)
    sp.add_argument("--json", action="store_true")
    add_fixture_dir(sp)
    sp.set_defaults(fn=_cmd_report)

    sp = sub.add_parser("compare", help="paired comparison of two logs (same seed)")
    sp.add_argument("log_a")
    sp.add_argument("log_b")
    sp.add_argument("--json", action="store_true")
    add_fixture_dir(sp)
    sp.set_defaults(fn=_cmd_compare)

    sp = sub.add_parser("describe",
                        help="print all defaults, list builtins, or dump one scenario")
    sp.add_argument("--scenario", default=None)
    sp.set_defaults(fn=_cmd_describe)

    sp = sub.add_parser("serve", help="serve live steering sessions over WebSocket")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--pace", choices=("real", "fast"), default="real")
    sp.add_argument("--rate", type=float, default=60.0, help="snapshot broadcast rate, Hz")
    sp.add_argument("--log-dir", default=None, help="save each session's log here")
    add_overrides(sp)
    sp.set_defaults(fn=_cmd_serve)

    sp = sub.add_parser("phantom", help="write the default phantom volume to a file")
    sp.add_argument("out")
    sp.add_argument("--n", type=int, default=48)
    sp.add_argument("--spacing", type=float, default=0.5)
    sp.set_defaults(fn=_cmd_phantom)

    sp = sub.add_parser("fixtures", help="write the reference metric fixture traces")
    sp.add_argument("out_dir")
    sp.set_defaults(fn=_cmd_fixtures)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        return _fail("not_found", str(exc))
    except (ValueError, KeyError) as exc:
        return _fail("invalid_input", str(exc))
    except OSError as exc:
        return _fail("io_error", str(exc))


if __name__ == "__main__":
    sys.exit(main())
