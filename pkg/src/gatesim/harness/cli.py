"""Command-line entry point: ``gatesim <subcommand> [options]``.

Each subcommand assembles a scenario and runs it. The artifact goes to
stdout, or into the output directory when ``--out-dir`` (or the
``GATESIM_OUT_DIR`` environment variable) is set. ``run`` always writes a
file, into the current directory by default.

Exit status: 0 ok, 2 usage error, 3 config or invariant violation, 4 output
I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ..power_gate import PROFILES
from .config import ConfigError, Entry, parse_value
from .scenarios import KEYS, bundled_names, bundled_path, load_scenario, render, run_scenario, scenario_from_entries

OUT_DIR_ENV = "GATESIM_OUT_DIR"
EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: usage error: {message}\n")


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # Accepted before or after the subcommand; only the top level sets defaults.
    p = argparse.ArgumentParser(add_help=False, argument_default=None if defaults else argparse.SUPPRESS)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="root seed (default 0)")
    g.add_argument("--profile", choices=sorted(PROFILES), help="power-gate profile (default: default)")
    g.add_argument("--table", metavar="FILE", help="stage table file (stage, min_idle, latency_cycles, power_watts)")
    g.add_argument("--out-dir", metavar="DIR", help=f"write artifacts here (env {OUT_DIR_ENV})")
    g.add_argument("--format", choices=("csv", "json"), help="artifact format (default csv)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _key_help() -> str:
    width = max(map(len, KEYS))
    return "scenario file keys:\n" + "\n".join(f"  {k.ljust(width)}  {v}" for k, v in KEYS.items())


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="gatesim", description="Power-gating timing side-channel simulator.",
                  parents=[_global_flags(True)], epilog="Run 'gatesim run --help' for the scenario file keys.")
    sub = top.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    common = [_global_flags(False)]

    sub.add_parser("characterize", parents=common, help="latency staircase over a log sweep of idle delays")

    a = sub.add_parser("attack", parents=common, help="run an end-to-end attack and score it")
    a.add_argument("target", choices=("moe", "early-exit", "mia"))
    a.add_argument("--threat", choices=("probe", "query-time"), default="probe")
    a.add_argument("--trials", type=int, default=10_000)
    a.add_argument("--gaps", help="MoE only: sweep these layer gaps (e.g. 2..14) instead of one attack")
    a.add_argument("--noise", choices=("none", "localhost", "one_hop"), default="none",
                   help="network noise preset for the query-time threat")

    c = sub.add_parser("covert", parents=common, help="send a message over the timing channel")
    c.add_argument("--message", default="I")
    c.add_argument("--source", choices=("amx", "avx512", "custom"), default="amx")
    c.add_argument("--delta", type=float, help="gap in cycles for --source custom")
    c.add_argument("--noise", choices=("none", "localhost", "one_hop"), default="one_hop")
    c.add_argument("--trials", type=int, default=1000, help="samples per bit")
    c.add_argument("--resolution", type=float, default=0.0, help="timer resolution in seconds")

    r = sub.add_parser("resilience", parents=common, help="largest noise sigma meeting a per-bit confidence")
    r.add_argument("--source", choices=("amx", "avx512", "custom"), default="amx")
    r.add_argument("--delta", type=float)
    r.add_argument("--trials", type=int, default=500, help="samples per bit")
    r.add_argument("--confidence", type=float, default=0.99)
    r.add_argument("--sigmas", help="also sweep decode accuracy at these sigmas (comma list)")
    r.add_argument("--reps", type=int, default=2000, help="Monte Carlo repetitions per sweep point")

    m = sub.add_parser("magnify", parents=common, help="magnifier output across snippet delays")
    m.add_argument("--boundary", type=int, default=3, help="lower stage of the straddled boundary")
    m.add_argument("--epsilon", type=int, default=100)
    m.add_argument("--deltas", help="comma list or lo..hi range of delays (default 0..2*epsilon step 10)")

    g = sub.add_parser("mitigate", parents=common, help="mitigation overhead and residual leakage")
    g.add_argument("--policy", choices=("none", "fixed", "reset"), default="reset")
    g.add_argument("--stage", type=int, help="stage for --policy fixed")
    g.add_argument("--rate", type=float, default=0.0, help="context switches per second")
    g.add_argument("--rates", help="CSV only: overhead curve at these rates")
    g.add_argument("--leakage", choices=("none", "early-exit", "moe", "mia"), default="none",
                   help="JSON only: also attack this gadget under the policy")
    g.add_argument("--trials", type=int, default=2000)

    run = sub.add_parser("run", parents=common, help="run a scenario file or a bundled scenario",
                         formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_key_help())
    run.add_argument("scenario", help="scenario file path, or one of: " + ", ".join(bundled_names()))
    return top


def _list(text: str | None):
    if text is None:
        return None
    v = parse_value(text)
    return v if isinstance(v, list) else [v]


def _entries_for(args) -> dict[str, object]:
    cmd = args.command
    e: dict[str, object] = {"scenario.name": cmd.replace("-", "_"), "scenario.pipeline": cmd}
    if cmd == "attack":
        kind = {"moe": "moe", "early-exit": "early_exit", "mia": "mia"}[args.target]
        e.update({"gadget.kind": kind, "threat": args.threat, "scenario.trials": args.trials,
                  "channel.preset": args.noise, "scenario.name": f"attack_{kind}"})
        if args.gaps:
            if kind != "moe":
                raise ConfigError("--gaps applies to the moe target only", key="sweep.gaps")
            e.update({"scenario.pipeline": "gap_sweep", "sweep.gaps": _list(args.gaps)})
    elif cmd == "covert":
        e.update({"covert.message": args.message, "channel.source": args.source, "channel.preset": args.noise,
                  "channel.trials_per_bit": args.trials, "channel.timer_resolution": args.resolution})
        if args.delta is not None:
            e["channel.delta"] = args.delta
    elif cmd == "resilience":
        e.update({"channel.source": args.source, "channel.trials_per_bit": args.trials,
                  "channel.confidence": args.confidence, "scenario.trials": args.reps})
        if args.delta is not None:
            e["channel.delta"] = args.delta
        if args.sigmas:
            e["sweep.sigmas"] = _list(args.sigmas)
    elif cmd == "magnify":
        e.update({"magnifier.boundary_stage": args.boundary, "magnifier.epsilon": args.epsilon})
        if args.deltas:
            e["sweep.deltas"] = _list(args.deltas)
    elif cmd == "mitigate":
        e.update({"mitigation.policy": args.policy, "mitigation.rate": args.rate, "scenario.trials": args.trials})
        if args.stage is not None:
            e["mitigation.stage"] = args.stage
        if args.rates:
            e["sweep.rates"] = _list(args.rates)
        if args.leakage != "none":
            e["gadget.kind"] = args.leakage.replace("-", "_")
    return e


def _global_overrides(args) -> dict[str, object]:
    o: dict[str, object] = {}
    if args.seed is not None:
        o["scenario.seed"] = args.seed
    if args.table is not None:
        o["scenario.table"] = args.table
    elif args.profile is not None:
        o["scenario.profile"] = args.profile
    if args.format is not None:
        o["output.format"] = args.format
    return o


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV)
    if args.table is not None and not Path(args.table).is_file():
        parser.exit(EXIT_USAGE, f"gatesim: usage error: table file not found: {args.table}\n")

    try:
        if args.command == "run":
            path = Path(args.scenario)
            if not path.is_file():
                try:
                    path = bundled_path(args.scenario)
                except FileNotFoundError as exc:
                    parser.exit(EXIT_USAGE, f"gatesim: usage error: scenario file not found: {args.scenario} ({exc})\n")
            sc = load_scenario(path, _global_overrides(args))
            status, written = run_scenario(sc, out_dir or ".")
            for p in written:
                print(p)
            return status
        entries = {k: Entry(v, 0) for k, v in {**_entries_for(args), **_global_overrides(args)}.items()}
        sc = scenario_from_entries(entries, f"<{args.command}>")
        if out_dir:
            status, written = run_scenario(sc, out_dir)
            for p in written:
                print(p)
            return status
        sys.stdout.write(render(sc))
        return 0
    except ConfigError as exc:
        print(f"gatesim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"gatesim: invariant violation: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"gatesim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
