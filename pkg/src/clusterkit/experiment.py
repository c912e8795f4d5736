"""Configuration-driven experiments: one run per seed, sweeps over a parameter."""

from __future__ import annotations

import configparser
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from .compose import PRESETS, preset, validate
from .core import AlgorithmComposition, Params, Role
from .network import ClusterNetwork
from .sim import RadioModel, TopologySpec, build_topology
from .wire import MsgType

log = logging.getLogger(__name__)

SEED_ENV = "CLUSTERKIT_SEED"
DEFAULT_SEEDS = tuple(range(20))
AXES = ("node_count", "p", "k", "d", "density")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    composition: AlgorithmComposition
    topology: TopologySpec = field(default_factory=TopologySpec)
    seeds: tuple = DEFAULT_SEEDS
    loss: float = 0.0
    epochs: int = 1
    csv: Optional[str] = None
    plot: Optional[str] = None
    trace: Optional[str] = None

    @property
    def algorithm(self) -> str:
        return self.composition.name

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        if axis == "node_count":
            return replace(self, topology=replace(self.topology, node_count=int(value)))
        if axis == "density":
            return replace(self, topology=replace(self.topology, target_density=float(value)))
        if axis == "p":
            name = "P_desired" if self.composition.chd == "leach" else "p"
            return replace(self, composition=self.composition.with_params(**{name: float(value)}))
        if axis in ("k", "d"):
            return replace(self, composition=self.composition.with_params(**{axis: int(value)}))
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")

    @classmethod
    def from_file(cls, path, environ=None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_parser(parser, Path(path).parent,
                               os.environ if environ is None else environ)

    @classmethod
    def from_parser(cls, parser, base_dir=Path("."), environ=None) -> "ExperimentConfig":
        environ = environ or {}
        topo = parser["topology"] if parser.has_section("topology") else {}
        algo = parser["algorithm"] if parser.has_section("algorithm") else {}
        radio = parser["radio"] if parser.has_section("radio") else {}
        out = parser["output"] if parser.has_section("output") else {}

        try:
            path = topo.get("path")
            if path is not None and not Path(path).is_absolute():
                path = str(base_dir / path)
            spec = TopologySpec(
                kind=topo.get("kind", "fixed-density"),
                node_count=int(topo.get("node_count", 100)),
                target_density=float(topo.get("density", 8.0)),
                world_side=float(topo.get("world_side", 200.0)),
                comm_range=float(topo.get("comm_range", 20.0)),
                seed=0,
                path=path,
            )
            composition = _composition(algo)
            epochs = int(algo.get("epochs", 1))
            loss = float(radio.get("loss", 0.0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

        if SEED_ENV in environ:
            seeds = (int(environ[SEED_ENV]),)
        elif "seeds" in topo:
            seeds = parse_seeds(topo["seeds"])
        elif "seed" in topo:
            seeds = (int(topo["seed"]),)
        else:
            seeds = DEFAULT_SEEDS
        if epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 <= loss <= 1.0:
            raise ConfigError("loss must lie in [0, 1]")
        return cls(composition, spec, seeds, loss, epochs,
                   out.get("csv"), out.get("plot"), out.get("trace"))


def _composition(section) -> AlgorithmComposition:
    numbers = {"p": float, "t": int, "k": int, "d": int, "P": float, "P_desired": float, "e_max": float}
    overrides = {}
    for key, cast in numbers.items():
        if key in section:
            overrides["P_desired" if key == "P" else key] = cast(section[key])
    name = section.get("preset")
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return preset(name, **overrides)
    try:
        chd, jd, it = section["chd"], section["jd"], section["it"]
    except KeyError:
        raise ConfigError("[algorithm] needs either 'preset' or all of 'chd', 'jd', 'it'") from None
    comp = AlgorithmComposition(chd, jd, it, Params(**overrides), name=f"{chd}+{jd}+{it}")
    validate(comp)
    return comp


def parse_seeds(text: str) -> tuple:
    seeds = []
    for part in re.split(r"[,\s]+", text.strip()):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("empty seed list")
    return tuple(seeds)


def parse_values(text: str, axis: str) -> list:
    cast = int if axis in ("node_count", "k", "d") else float
    values = [cast(v) for v in re.split(r"[,\s]+", text.strip()) if v]
    if not values:
        raise ConfigError("empty values list")
    return values


@dataclass
class MetricsRecord:
    algorithm: str
    seed: int
    node_count: int
    density: float
    k: int
    d: int
    p: float
    ch_count: int
    avg_cluster_size: float
    coverage_pct: float
    overlap_degree: float
    orphan_count: int
    rounds: int
    msgs_join_req: int = 0
    msgs_join_acc: int = 0
    msgs_join_deny: int = 0
    msgs_attr: int = 0
    msgs_resume: int = 0
    msgs_convergecast: int = 0
    msgs_hello: int = 0
    # kept out of the CSV
    chd_rounds: Optional[int] = field(default=None, compare=False)
    giant_fraction: Optional[float] = field(default=None, compare=False)
    aborted: bool = field(default=False, compare=False)
    trace_hash: str = field(default="", compare=False)

    @property
    def total_messages(self) -> int:
        return (self.msgs_join_req + self.msgs_join_acc + self.msgs_join_deny + self.msgs_attr
                + self.msgs_resume + self.msgs_convergecast + self.msgs_hello)


CSV_FIELDS = [f.name for f in fields(MetricsRecord) if f.compare]

_MESSAGE_COLUMNS = {
    MsgType.JOIN_REQUEST: "msgs_join_req",
    MsgType.JOIN_ACCEPT: "msgs_join_acc",
    MsgType.JOIN_DENY: "msgs_join_deny",
    MsgType.ATTRIBUTE: "msgs_attr",
    MsgType.RESUME: "msgs_resume",
    MsgType.CONVERGECAST: "msgs_convergecast",
    MsgType.NEIGHBOR_HELLO: "msgs_hello",
}


def measure(net: ClusterNetwork, config: ExperimentConfig, seed: int) -> MetricsRecord:
    n = len(net.topology)
    params = net.params
    heads = net.heads()
    orphans = net.orphans()
    memberships = net.cluster_lists()
    sizes: dict = {}
    for clusters in memberships.values():
        for c in clusters:
            sizes[c] = sizes.get(c, 0) + 1
    ch_count = len(heads)
    counts = {col: 0 for col in _MESSAGE_COLUMNS.values()}
    for tag, count in net.messages_by_type().items():
        column = _MESSAGE_COLUMNS.get(tag)
        if column is not None:
            counts[column] += count
    spec = config.topology
    density = spec.target_density if spec.kind == "fixed-density" else net.topology.mean_degree()
    leach = net.composition.chd == "leach"
    return MetricsRecord(
        algorithm=config.algorithm,
        seed=seed,
        node_count=n,
        density=float(density),
        k=1 if net.composition.jd == "leach" else params.k,
        d=params.d,
        p=params.P_desired if leach else params.p,
        ch_count=ch_count,
        avg_cluster_size=sum(sizes.get(h, 0) for h in heads) / ch_count if ch_count else 0.0,
        coverage_pct=100.0 * (n - len(orphans)) / n if n else 0.0,
        overlap_degree=sum(len(v) for v in memberships.values()) / n if n else 0.0,
        orphan_count=len(orphans),
        rounds=net.world.round,
        chd_rounds=net.chd_rounds(),
        giant_fraction=net.topology.giant_component_fraction(),
        aborted=net.aborted,
        trace_hash=net.world.trace_hash,
        **counts,
    )


def run_one(config: ExperimentConfig, seed: int,
            trace: Optional[Callable[[str], None]] = None) -> MetricsRecord:
    topology = build_topology(replace(config.topology, seed=seed))
    net = ClusterNetwork(topology, config.composition, RadioModel(config.loss), seed, trace)
    t = config.composition.params.t
    if t > 0:
        net.run(max_rounds=t * config.epochs - 1)
    else:
        net.run()
    if net.aborted:
        unclustered = sum(1 for s in net.states().values() if s.role is Role.UNCLUSTERED)
        log.warning("%s seed %d: no quiescence within %d rounds (%d nodes unclustered)",
                    config.algorithm, seed, net.world.round, unclustered)
    return measure(net, config, seed)


def run_experiment(config: ExperimentConfig) -> list:
    return [run_one(config, s) for s in config.seeds]


def _task(args) -> MetricsRecord:
    config, seed = args
    return run_one(config, seed)


def sweep(config: ExperimentConfig, axis: str, values: Sequence, jobs: int = 1) -> list:
    """One record per (value, seed), ordered by value then seed whatever ``jobs`` is."""
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")
    if not values:
        raise ConfigError("empty values list")
    tasks = [(config.with_value(axis, v), s) for v in values for s in config.seeds]
    if jobs <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_task, tasks))
