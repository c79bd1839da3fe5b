"""Scenario model and runner.

A scenario names one pipeline (``characterize``, ``attack``, ``gap_sweep``,
``covert``, ``resilience``, ``magnify``, ``mitigate``), its seed and configs,
and the file it writes. Everything a run emits is a pure function of the
scenario, so repeated runs are byte-identical.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from .. import attacker, channel, magnifier, mitigations
from ..gadgets import EarlyExitConfig, MembershipModel, MoEConfig
from ..power_gate import PowerGateTable, characterize, get_profile, load_table, log_sweep, staircase_csv
from ..stats import make_rng
from .config import ConfigError, Entry, load_config, parse_config

log = logging.getLogger(__name__)

PIPELINES = ("characterize", "attack", "gap_sweep", "covert", "resilience", "magnify", "mitigate")
FORMATS = ("csv", "json")
GADGETS = {"moe": MoEConfig, "early_exit": EarlyExitConfig, "mia": MembershipModel}

# Every accepted key with a one-line description; also rendered by ``--help``.
KEYS: dict[str, str] = {
    "scenario.name": "scenario name, also the default output file stem",
    "scenario.pipeline": "one of " + ", ".join(PIPELINES),
    "scenario.seed": "root seed (integer)",
    "scenario.trials": "scored trials (attack, mitigate leakage) or repetitions (resilience sweep)",
    "scenario.profile": "power-gate profile: default, c1e, measured",
    "scenario.table": "path to a stage table file; overrides scenario.profile",
    "output.file": "output file name, relative to the output directory",
    "output.format": "csv or json",
    "gadget.kind": "moe, early_exit or mia",
    "threat": "probe or query-time",
    "attack.calibration_per_class": "labelled calibration trials per class (default 200)",
    "sweep.gaps": "MoE layer gaps, e.g. 2..14",
    "sweep.delays": "idle delays in cycles; default is a log sweep 1e2..1e9",
    "sweep.deltas": "magnifier snippet delays in cycles",
    "sweep.sigmas": "noise sigmas in cycles for the resilience sweep",
    "sweep.rates": "context-switch rates for the overhead curve",
    "channel.preset": "noise preset: none, localhost, one_hop",
    "channel.sigma": "Gaussian noise sigma in cycles (overrides preset)",
    "channel.timer_resolution": "timer resolution in seconds, 0 for exact",
    "channel.trials_per_bit": "samples averaged per bit",
    "channel.round_time": "seconds per sample round",
    "channel.source": "gap source: amx, avx512, custom",
    "channel.delta": "gap in cycles for the custom source",
    "channel.frequency": "core frequency in Hz",
    "channel.base_latency": "bit-0 response time in cycles",
    "channel.confidence": "per-bit confidence for resilience (default 0.99)",
    "covert.message": "message to send (latin-1 text)",
    "magnifier.boundary_stage": "stage whose upper threshold the magnifier straddles",
    "magnifier.epsilon": "cycles short of the threshold the unit is parked",
    "mitigation.policy": "none, fixed or reset",
    "mitigation.stage": "stage pinned by the fixed policy",
    "mitigation.rate": "context switches per second for the reset policy",
}
for _kind, _cls in GADGETS.items():
    for _f in dataclasses.fields(_cls):
        if _f.name != "gadget":
            KEYS[f"gadget.{_kind}.{_f.name}"] = f"{_cls.__name__}.{_f.name}"
for _f in dataclasses.fields(EarlyExitConfig):
    KEYS[f"gadget.mia.gadget.{_f.name}"] = f"early-exit model behind the MIA: {_f.name}"


@dataclass(frozen=True)
class Scenario:
    name: str
    pipeline: str
    seed: int = 0
    gadget: Any = None
    threat: attacker.Threat = attacker.Threat.PROBE
    channel: channel.ChannelConfig = field(default_factory=channel.ChannelConfig)
    policy: mitigations.MitigationPolicy = field(default_factory=mitigations.NoMitigation)
    trials: int = 1000
    table: PowerGateTable = field(default_factory=lambda: get_profile("default"))
    output_file: str = ""
    output_format: str = "csv"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ConfigError("name must be non-empty", key="scenario.name")
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}", key="scenario.pipeline")
        if self.output_format not in FORMATS:
            raise ConfigError(f"format must be csv or json, got {self.output_format!r}", key="output.format")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1", key="scenario.trials")

    @property
    def output_name(self) -> str:
        return self.output_file or f"{self.name}.{self.output_format}"


def _build(cls, prefix: str, entries: dict[str, Entry], **extra):
    kw = {k[len(prefix):]: e.value for k, e in entries.items() if k.startswith(prefix) and "." not in k[len(prefix):]}
    try:
        return cls(**kw, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key=prefix.rstrip(".")) from None


def _gadget(entries: dict[str, Entry]):
    kind = entries.get("gadget.kind")
    if kind is None:
        return None
    if kind.value not in GADGETS:
        raise ConfigError(f"unknown gadget {kind.value!r}", kind.line, "gadget.kind")
    extra = {}
    if kind.value == "mia" and any(k.startswith("gadget.mia.gadget.") for k in entries):
        base = dataclasses.asdict(MembershipModel().gadget)
        base.update({k.rsplit(".", 1)[1]: e.value for k, e in entries.items() if k.startswith("gadget.mia.gadget.")})
        try:
            extra["gadget"] = EarlyExitConfig(**base)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key="gadget.mia.gadget") from None
    return _build(GADGETS[kind.value], f"gadget.{kind.value}.", entries, **extra)


def _channel(entries: dict[str, Entry]) -> channel.ChannelConfig:
    get = lambda k, d=None: entries[k].value if k in entries else d  # noqa: E731
    kw = {}
    for k in ("timer_resolution", "trials_per_bit", "round_time", "frequency", "base_latency"):
        if f"channel.{k}" in entries:
            kw[k] = entries[f"channel.{k}"].value
    try:
        kw["source"] = channel.get_source(get("channel.source", "amx"), get("channel.delta"))
        if "channel.sigma" in entries:
            return channel.ChannelConfig(sigma=float(entries["channel.sigma"].value), **kw)
        return channel.ChannelConfig.preset(get("channel.preset", "none"), **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key="channel") from None


def scenario_from_entries(entries: dict[str, Entry], source: str = "<config>") -> Scenario:
    for k, e in entries.items():
        if k not in KEYS:
            raise ConfigError("unknown key", e.line, k, source)
    get = lambda k, d=None: entries[k].value if k in entries else d  # noqa: E731
    try:
        if "scenario.table" in entries:
            table = load_table(get("scenario.table"))
        else:
            table = get_profile(get("scenario.profile", "default"))
        policy = mitigations.parse_policy(get("mitigation.policy", "none"), get("mitigation.stage"),
                                          float(get("mitigation.rate", 0.0)))
        threat = attacker.Threat(get("threat", "probe"))
        params = {k: e.value for k, e in entries.items() if k.split(".")[0] in ("sweep", "covert", "magnifier", "attack")
                  or k == "channel.confidence"}
        return Scenario(
            name=str(get("scenario.name", "")),
            pipeline=get("scenario.pipeline", ""),
            seed=int(get("scenario.seed", 0)),
            gadget=_gadget(entries),
            threat=threat,
            channel=_channel(entries),
            policy=policy,
            trials=int(get("scenario.trials", 1000)),
            table=table,
            output_file=str(get("output.file", "")),
            output_format=get("output.format", "csv"),
            params=params,
        )
    except ConfigError as exc:
        if exc.line is None and exc.key in entries:
            raise ConfigError(str(exc).split(": ", 1)[-1], entries[exc.key].line, exc.key, source) from None
        raise
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(str(exc), source=source) from None


def load_scenario(path: str | Path, overrides: dict[str, Any] | None = None) -> Scenario:
    path = Path(path)
    entries = load_config(path)
    for k, v in (overrides or {}).items():
        entries[k] = Entry(v, 0)
    return scenario_from_entries(entries, str(path))


def parse_scenario(text: str, overrides: dict[str, Any] | None = None) -> Scenario:
    entries = parse_config(text)
    for k, v in (overrides or {}).items():
        entries[k] = Entry(v, 0)
    return scenario_from_entries(entries)


def bundled_names() -> list[str]:
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".conf"))


def bundled_path(name: str) -> Path:
    p = resources.files(__package__) / "scenarios" / f"{name}.conf"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}; available: {', '.join(bundled_names())}")
    return Path(str(p))


def _as_list(v) -> list:
    return v if isinstance(v, list) else [v]


def _rows_json(rows) -> str:
    return json.dumps(rows, sort_keys=True, indent=1) + "\n"


def _need_gadget(sc: Scenario, *kinds):
    if not isinstance(sc.gadget, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"pipeline {sc.pipeline!r} needs a {names} gadget", key="gadget.kind")
    return sc.gadget


def _run_characterize(sc: Scenario) -> str:
    delays = [int(d) for d in _as_list(sc.params.get("sweep.delays", log_sweep()))]
    rows = characterize(sc.table, delays)
    if sc.output_format == "json":
        return _rows_json({"profile": sc.table.profile_name,
                           "rows": [{"delay_cycles": d, "latency_cycles": lat} for d, lat in rows]})
    return staircase_csv(rows)


def _run_attack(sc: Scenario) -> str:
    g = _need_gadget(sc, MoEConfig, EarlyExitConfig, MembershipModel)
    res = attacker.run_attack(g, sc.trials, sc.threat, make_rng(sc.seed, 0),
                              calibration_per_class=int(sc.params.get("attack.calibration_per_class", 200)),
                              table=sc.table, policy=sc.policy,
                              channel=sc.channel if sc.threat is attacker.Threat.QUERY_TIME else None)
    if sc.output_format == "json":
        doc = res.metrics.to_dict()
        doc["auc"] = res.auc()
        doc["threshold"] = res.threshold.tau
        return json.dumps(doc, sort_keys=True) + "\n"
    return attacker.observations_csv(res.observations)


def _run_gap_sweep(sc: Scenario) -> str:
    base = _need_gadget(sc, MoEConfig)
    gaps = [int(g) for g in _as_list(sc.params.get("sweep.gaps", list(range(2, 15))))]
    for g in gaps:
        if not 1 <= g < base.layers_high:
            raise ConfigError(f"gap {g} outside 1..{base.layers_high - 1}", key="sweep.gaps")
    rows = attacker.moe_gap_sweep(base, gaps, sc.trials, sc.seed, sc.threat, sc.table)
    if sc.output_format == "json":
        return _rows_json([dataclasses.asdict(r) for r in rows])
    return attacker.gap_sweep_csv(rows)


def _run_covert(sc: Scenario) -> str:
    msg = str(sc.params.get("covert.message", "I"))
    res = channel.transmit_message(msg, sc.channel, make_rng(sc.seed, 0))
    if sc.output_format == "json":
        return res.to_json()
    return channel.histogram_csv(res.transmissions)


def _run_resilience(sc: Scenario) -> str:
    cfg = sc.channel
    conf = float(sc.params.get("channel.confidence", 0.99))
    sigma_max = channel.noise_resilience(cfg.source, cfg.trials_per_bit, conf)
    sigmas = sc.params.get("sweep.sigmas")
    if sc.output_format == "json":
        doc = {"source": cfg.source.name, "delta": cfg.delta, "trials_per_bit": cfg.trials_per_bit,
               "confidence": conf, "sigma_max": sigma_max}
        if sigmas is not None:
            doc["sweep"] = [{"sigma_cycles": s, "accuracy": a} for s, a in channel.resilience_sweep(
                cfg.source, cfg.trials_per_bit, [float(s) for s in _as_list(sigmas)], sc.trials, make_rng(sc.seed, 0))]
        return json.dumps(doc, sort_keys=True) + "\n"
    if sigmas is None:
        return ("source,delta,trials_per_bit,confidence,sigma_max_cycles\n"
                f"{cfg.source.name},{cfg.delta:g},{cfg.trials_per_bit},{conf:g},{sigma_max:.6f}\n")
    rows = channel.resilience_sweep(cfg.source, cfg.trials_per_bit, [float(s) for s in _as_list(sigmas)],
                                    sc.trials, make_rng(sc.seed, 0))
    return channel.resilience_csv(rows)


def _run_magnify(sc: Scenario) -> str:
    align = magnifier.MagnifierAlignment(int(sc.params.get("magnifier.boundary_stage", 3)),
                                         int(sc.params.get("magnifier.epsilon", 100)))
    deltas = [int(d) for d in _as_list(sc.params.get("sweep.deltas", list(range(0, 2 * align.epsilon + 1, 10))))]
    rows = magnifier.sweep(deltas, align, sc.table)
    if sc.output_format == "json":
        return _rows_json([{"delta_cycles": d, "observed_latency": o, "amplified_gap": g} for d, o, g in rows])
    return magnifier.sweep_csv(rows)


def _run_mitigate(sc: Scenario) -> str:
    policy = sc.policy
    if sc.output_format == "csv":
        rates = sc.params.get("sweep.rates")
        if rates is None:
            rates = [policy.switch_rate] if isinstance(policy, mitigations.ResetOnSwitch) else [0]
        return mitigations.overhead_csv([mitigations.overhead_curve(policy, [float(r) for r in _as_list(rates)])])
    rate = getattr(policy, "switch_rate", 0.0)
    power, perf = mitigations.overhead(policy, rate)
    doc = {"policy": mitigations.policy_label(policy), "switch_rate": rate, "power_pct": power, "perf_pct": perf}
    if sc.gadget is not None:
        res = attacker.run_attack(sc.gadget, sc.trials, sc.threat, make_rng(sc.seed, 0), table=sc.table, policy=policy)
        doc["leakage"] = res.metrics.to_dict()
        doc["leakage"]["auc"] = res.auc()
    return json.dumps(doc, sort_keys=True) + "\n"


RUNNERS: dict[str, Callable[[Scenario], str]] = {
    "characterize": _run_characterize,
    "attack": _run_attack,
    "gap_sweep": _run_gap_sweep,
    "covert": _run_covert,
    "resilience": _run_resilience,
    "magnify": _run_magnify,
    "mitigate": _run_mitigate,
}


def render(sc: Scenario) -> str:
    """Execute the scenario's pipeline and return the artifact text."""
    return RUNNERS[sc.pipeline](sc)


def run_scenario(sc: Scenario, out_dir: str | Path = ".") -> tuple[int, list[Path]]:
    """Run ``sc`` and write its artifact under ``out_dir``.

    Returns ``(status, written paths)``: 0 on success, 3 on an invariant or
    config violation, 4 on an output I/O error.
    """
    try:
        text = render(sc)
    except ValueError as exc:
        log.error("scenario %s: %s", sc.name, exc)
        return 3, []
    path = Path(out_dir) / sc.output_name
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        log.error("scenario %s: cannot write %s: %s", sc.name, path, exc)
        return 4, []
    return 0, [path]
