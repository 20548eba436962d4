"""Wires the store, simulator, network, kubelet and workflow controller together.

All mutation runs on one logical loop: a write is followed by :meth:`Engine.settle`,
which binds pods, lets the kubelet and workflow controller react, and repeats
until the store stops changing. Simulated time only moves in :meth:`Engine.step`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .controlplane import ApplyResult, Store
from .errors import EmptyCluster, NonQuiescent, NotSubmitted
from .kubelet import Behaviors, BehaviorRule, Kubelet, pod_key
from .model import Pod, Resource
from .network import Ipam, resolve
from .slurm import Behavior, NodeConfig, SimEvent, SlurmSim
from .workflow import WorkflowController

log = logging.getLogger(__name__)

DEFAULT_MAX_TICKS = 10000
SETTLE_LIMIT = 10000

STORE_FILE = "state.json"
ENGINE_FILE = "engine.json"
TRACE_FILE = "trace.log"
ACTIONS_FILE = "actions.log"


def default_nodes() -> list[NodeConfig]:
    return [NodeConfig(f"node-{i}", 16, 65536) for i in range(4)]


@dataclass
class EngineConfig:
    cluster_nodes: list[NodeConfig] = field(default_factory=default_nodes)
    behaviors: Behaviors = field(default_factory=Behaviors)
    max_ticks: int = DEFAULT_MAX_TICKS

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> EngineConfig:
        nodes = [
            NodeConfig(str(n["name"]), int(n["cpus"]), int(n.get("memMiB", n.get("mem_mib", 0))))
            for n in d.get("clusterNodes", [])
        ] if "clusterNodes" in d else default_nodes()
        rules = d.get("behaviors") or []
        if isinstance(rules, str):
            path = Path(rules)
            if base is not None and not path.is_absolute():
                path = base / path
            rules = yaml.safe_load(path.read_text()) or []
        default = d.get("defaultBehavior") or {}
        cfg = cls(
            cluster_nodes=nodes,
            behaviors=Behaviors(
                rules=[_rule(r) for r in rules],
                default=Behavior(int(default.get("runTicks", 3)), int(default.get("exitCode", 0))),
            ),
            max_ticks=int(d.get("maxTicks", DEFAULT_MAX_TICKS)),
        )
        cfg.check()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> EngineConfig:
        path = Path(path)
        return cls.from_dict(yaml.safe_load(path.read_text()) or {}, base=path.parent)

    def check(self) -> None:
        if not self.cluster_nodes:
            raise EmptyCluster("config lists no cluster nodes")
        for r in self.behaviors.rules:
            if r.run_ticks < 1:
                raise ValueError(f"behavior {r.pattern!r}: runTicks must be >= 1")
        if self.behaviors.default.run_ticks < 1:
            raise ValueError("default runTicks must be >= 1")

    def to_dict(self) -> dict:
        return {
            "clusterNodes": [
                {"name": n.name, "cpus": n.cpus, "memMiB": n.mem_mib} for n in self.cluster_nodes
            ],
            "behaviors": [
                {"pod": r.pattern, "runTicks": r.run_ticks, "exitCodes": list(r.exit_codes)}
                for r in self.behaviors.rules
            ],
            "defaultBehavior": {
                "runTicks": self.behaviors.default.run_ticks,
                "exitCode": self.behaviors.default.exit_code,
            },
            "maxTicks": self.max_ticks,
        }


def _rule(r: dict) -> BehaviorRule:
    codes = r.get("exitCodes")
    if codes is None:
        codes = [r.get("exitCode", 0)]
    return BehaviorRule(str(r["pod"]), int(r["runTicks"]), tuple(int(c) for c in codes))


class Engine:
    def __init__(self, config: EngineConfig | None = None, *, _restore: dict | None = None):
        self.config = config or EngineConfig()
        self.config.check()
        if _restore is None:
            self.store = Store()
            self.sim = SlurmSim(self.config.cluster_nodes)
            self.ipam = Ipam([n.name for n in self.config.cluster_nodes])
        else:
            self.store = Store.load(_restore["store"], _restore["engine"]["storeVersion"])
            self.sim = SlurmSim.from_dict(_restore["engine"]["slurm"])
            self.ipam = Ipam.from_dict(_restore["engine"]["ipam"])
        self.kubelet = Kubelet(self.store, self.sim, self.ipam, self.config.behaviors)
        self.workflows = WorkflowController(self.store)
        if _restore is None:
            self.kubelet.register_node()
        else:
            self.kubelet.restore(_restore["engine"]["kubelet"])
            self.kubelet.resync()
        self.settle()

    # -- writes

    def apply(self, resource: Resource) -> ApplyResult:
        result = self.store.apply(resource)
        self.settle()
        return result

    def put(self, resource: Resource) -> int:
        version = self.store.put(resource)
        self.settle()
        return version

    def delete(self, kind: str, namespace: str, name: str) -> None:
        self.store.delete(kind, namespace, name)
        self.settle()

    def settle(self) -> None:
        """Run controllers until the store reaches a fixpoint."""
        for _ in range(SETTLE_LIMIT):
            version = self.store.version
            self.store.bind_pending_pods()
            self.kubelet.process()
            self.workflows.process()
            if self.store.version == version:
                return
        raise RuntimeError("controllers did not settle")

    # -- time

    def step(self, ticks: int = 1) -> list[SimEvent]:
        events = []
        for _ in range(ticks):
            events += self.sim.step(1)
            self.settle()
        return events

    def run_until(self, tick: int) -> list[SimEvent]:
        if tick <= self.sim.tick:
            return []
        return self.step(tick - self.sim.tick)

    def quiescent(self) -> bool:
        return not self.sim.active_jobs()

    def run_to_quiescence(self, limit: int | None = None) -> list[SimEvent]:
        limit = self.config.max_ticks if limit is None else limit
        self.settle()
        events: list[SimEvent] = []
        ticks = 0
        while not self.quiescent():
            if ticks >= limit:
                raise NonQuiescent(limit)
            events += self.step(1)
            ticks += 1
        return events

    # -- reads

    def pod(self, namespace: str, name: str) -> Pod:
        return self.store.get("Pod", namespace, name)

    def resolve(self, name: str, namespace: str = "default") -> list[str] | None:
        return resolve(self.store, name, namespace)

    def script(self, namespace: str, name: str) -> str:
        binding = self.kubelet.bindings.get(f"{namespace}/{name}")
        if binding is None or binding.script is None:
            raise NotSubmitted(f"pod {namespace}/{name} has no submitted script")
        return binding.script

    def job_id(self, pod: Pod) -> int | None:
        b = self.kubelet.bindings.get(pod_key(pod))
        return b.job_id if b else None

    def trace(self) -> str:
        return self.sim.trace()

    # -- persistence

    def state(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "storeVersion": self.store.version,
            "slurm": self.sim.to_dict(),
            "ipam": self.ipam.to_dict(),
            "kubelet": self.kubelet.to_dict(),
            "actions": list(self.kubelet.log),
        }

    def save(self, state_dir: str | Path) -> None:
        d = Path(state_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / STORE_FILE).write_text(self.store.dumps())
        (d / ENGINE_FILE).write_text(json.dumps(self.state(), indent=2, sort_keys=True) + "\n")
        (d / TRACE_FILE).write_text(self.trace())
        (d / ACTIONS_FILE).write_text("".join(line + "\n" for line in self.kubelet.log))
        log.debug("saved state at tick %d to %s", self.sim.tick, d)

    @classmethod
    def exists(cls, state_dir: str | Path) -> bool:
        return (Path(state_dir) / ENGINE_FILE).exists()

    @classmethod
    def load(cls, state_dir: str | Path) -> Engine:
        d = Path(state_dir)
        engine_state = json.loads((d / ENGINE_FILE).read_text())
        store_dump = json.loads((d / STORE_FILE).read_text())
        config = EngineConfig.from_dict(engine_state["config"])
        engine = cls(config, _restore={"store": store_dump, "engine": engine_state})
        engine.kubelet.log[:0] = engine_state.get("actions", [])
        return engine
