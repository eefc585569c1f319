"""Command-line experiment runner: learn, classify, measure, count.

Every experiment is a JSON document; command-line flags override its fields.
Example::

    {
      "target": "bell:phi+",
      "learners": ["free", "1|2"],
      "trials": 5,
      "seed": 0,
      "learning": {"optimizer": "natural", "max_iters": 2000},
      "sampler": {"backend": "exact"},
      "network": {"neurons_per_qubit": 2},
      "out": "runs/bell"
    }

``measure`` replaces ``target`` with a ``sweep`` block, e.g.
``{"family": "variable_bell", "grid": [0, 0.5, 1]}``.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .classify import (
    NetworkConfig,
    classify,
    critical_fidelity_oracle,
    gme,
    relative_fidelity,
    run_trials,
)
from .learning import LearningConfig, LearningError
from .sampling import SamplerConfig
from .separability import (
    MAX_BELL,
    MAX_ENUMERATE,
    PartitionSpec,
    bell_number,
    count_GK,
    enumerate_set_partitions,
)
from .states import NamedTarget, from_descriptor

log = logging.getLogger("snns")

LIST_PARTITIONS_UP_TO = 6
SWEEP_FAMILIES = ("variable_bell", "variable_w")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    target: str | None = None
    learners: list[str] = field(default_factory=lambda: ["free"])
    trials: int = 5
    seed: int = 0
    out: str = "runs"
    learning: LearningConfig = field(default_factory=LearningConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    sweep: dict | None = None
    name: str | None = None

    def named_target(self, descriptor: str | None = None) -> NamedTarget:
        text = descriptor or self.target
        if not text:
            raise ConfigError("config has no target")
        try:
            return from_descriptor(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def specs(self, n: int) -> list[PartitionSpec]:
        if not self.learners:
            raise ConfigError("learner list is empty")
        out = []
        for text in self.learners:
            try:
                out.append(PartitionSpec.parse(str(text), n))
            except ValueError as exc:
                raise ConfigError(f"learner {text!r}: {exc}") from exc
        return out


def _section(cls, doc, name):
    if doc is None:
        return cls()
    if not isinstance(doc, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name!r} section: {exc}") from exc


def load_config(doc: dict, overrides: argparse.Namespace | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc = dict(doc)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sampler_doc = dict(doc.pop("sampler", None) or {})
    learning = _section(LearningConfig, doc.pop("learning", None), "learning")
    network = _section(NetworkConfig, doc.pop("network", None), "network")
    if overrides is not None:
        for key in ("seed", "trials", "out"):
            val = getattr(overrides, key, None)
            if val is not None:
                doc[key] = val
        if getattr(overrides, "backend", None):
            sampler_doc["backend"] = overrides.backend
    cfg = ExperimentConfig(**doc, learning=learning, network=network)
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg.trials, int) or cfg.trials < 2:
        raise ConfigError("trials must be an integer >= 2")
    if not isinstance(cfg.learners, list):
        raise ConfigError("learners must be a list")
    # the sampler chain seed follows the experiment seed unless pinned
    sampler_doc.setdefault("seed", cfg.seed)
    cfg.sampler = _section(SamplerConfig, sampler_doc, "sampler")
    return cfg


def _read_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if getattr(args, "target", None):
        doc["target"] = args.target
    if getattr(args, "learners", None):
        doc["learners"] = args.learners
    return load_config(doc, args)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _trial_kwargs(cfg: ExperimentConfig) -> dict:
    return dict(M=cfg.trials, learn_cfg=cfg.learning, sampler_cfg=cfg.sampler,
                base_seed=cfg.seed, network=cfg.network)


def cmd_learn(cfg: ExperimentConfig) -> int:
    named = cfg.named_target()
    specs = cfg.specs(named.n)
    out = Path(cfg.out)
    summary = {"target": named.name, "seed": cfg.seed, "trials": cfg.trials, "learners": []}
    for spec in specs:
        ps = run_trials(named, spec, **_trial_kwargs(cfg))
        files = []
        for i, tr in enumerate(ps.traces):
            path = out / "traces" / f"{spec.label()}_trial{i}.csv"
            write_atomic(path, tr.to_csv())
            files.append(str(path.relative_to(out)))
        entry = ps.to_dict()
        entry["iterations"] = [tr.iterations for tr in ps.traces]
        entry["converged"] = [tr.converged for tr in ps.traces]
        entry["failures"] = ps.failures
        entry["traces"] = files
        summary["learners"].append(entry)
        print(f"{str(spec):<16} mean={ps.mean:.6f} spread={ps.spread:.2e}")
    write_atomic(out / "summary.json", _json(summary))
    return 0


def cmd_classify(cfg: ExperimentConfig) -> int:
    named = cfg.named_target()
    specs = cfg.specs(named.n)
    report = classify(named, specs, **_trial_kwargs(cfg))
    write_atomic(Path(cfg.out) / "report.json", _json(report.to_dict()))
    print(report.table())
    for note in report.notes:
        print(f"note: {note}")
    return 0


def _sweep_grid(sweep: dict) -> tuple[str, list[float]]:
    if not isinstance(sweep, dict):
        raise ConfigError("measure needs a 'sweep' object")
    family = sweep.get("family")
    if family not in SWEEP_FAMILIES:
        raise ConfigError(f"sweep family must be one of {SWEEP_FAMILIES}")
    if "grid" in sweep:
        grid = [float(p) for p in sweep["grid"]]
    elif {"start", "stop", "num"} <= set(sweep):
        grid = [round(float(p), 12) for p in np.linspace(sweep["start"], sweep["stop"], int(sweep["num"]))]
    else:
        raise ConfigError("sweep needs 'grid' or 'start'/'stop'/'num'")
    if not grid:
        raise ConfigError("sweep grid is empty")
    if any(not 0.0 <= p <= 1.0 for p in grid):
        raise ConfigError("sweep values must lie in [0, 1]")
    return family, grid


def cmd_measure(cfg: ExperimentConfig) -> int:
    family, grid = _sweep_grid(cfg.sweep)
    n = cfg.named_target(f"{family}:0").n
    restricted = [s for s in cfg.specs(n) if not s.is_free]
    if len(restricted) != 1:
        raise ConfigError("measure needs exactly one restricted learner")
    spec = restricted[0]
    buf = io.StringIO(newline="")
    buf.write("p,R,E,alpha_oracle\n")
    for p in grid:
        named = cfg.named_target(f"{family}:{p!r}")
        free = run_trials(named, PartitionSpec.free(n), **_trial_kwargs(cfg))
        ps = run_trials(named, spec, **_trial_kwargs(cfg))
        R = relative_fidelity(free, ps)
        alpha = critical_fidelity_oracle(named, spec).value
        buf.write(f"{p!r},{R!r},{gme(R)!r},{alpha!r}\n")
        print(f"p={p:<6g} R={R:.6f} E={gme(R):.6f} alpha={alpha:.6f}")
    write_atomic(Path(cfg.out) / "measure.csv", buf.getvalue())
    return 0


def cmd_count(n: int, k: int | None = None) -> int:
    if not 1 <= n <= MAX_BELL:
        raise ConfigError(f"n must lie in 1..{MAX_BELL}")
    if k is not None and not 1 <= k <= n:
        raise ConfigError(f"k must lie in 1..{n}")
    ks = [k] if k is not None else list(range(1, n + 1))
    print(f"{'K':>3}  {'G_K':>12}")
    for kk in ks:
        print(f"{kk:>3}  {count_GK(n, kk):>12}")
    print(f"B_{n} = {bell_number(n)}")
    if n <= min(LIST_PARTITIONS_UP_TO, MAX_ENUMERATE):
        for spec in enumerate_set_partitions(n, k):
            print(f"  {spec if not spec.is_free else ','.join(map(str, spec.blocks[0]))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snns", description="Separability classification with segmented neural quantum states.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("learn", "train learners and write fidelity traces"),
        ("classify", "witness separability forms against the free learner"),
        ("measure", "sweep a state family and report R, E and the critical fidelity"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="experiment JSON file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="base trial seed")
        p.add_argument("--backend", choices=("exact", "mcmc"))
        p.add_argument("--trials", type=int, help="trials per learner (M)")
        if name != "measure":
            p.add_argument("--target", help='target descriptor, e.g. "bell:phi+"')
        p.add_argument("--learners", nargs="+", help='partitions such as "free" or "1,2|3"')
    p = sub.add_parser("count", help="count separability forms of n qubits")
    p.add_argument("n", type=int)
    p.add_argument("--k", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "count":
            return cmd_count(args.n, args.k)
        cfg = _read_config(args)
        return {"learn": cmd_learn, "classify": cmd_classify, "measure": cmd_measure}[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LearningError as exc:
        print(f"learning failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
