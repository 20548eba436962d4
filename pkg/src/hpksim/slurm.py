"""Deterministic discrete-event Slurm cluster.

Virtual time advances in integer ticks (one tick is one minute of job time,
so ``--time`` minutes map one-to-one onto tick limits). At every tick the
simulator first retires running jobs whose scripted run time or time limit
has elapsed, then makes one strict FCFS dispatch pass with first-fit node
selection. There is no backfill: a pending head job blocks the queue.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, fields

from .errors import DemandMismatch, EmptyCluster, NeverSchedulable, UnknownJob

PENDING = "PENDING"
RUNNING = "RUNNING"
COMPLETED = "COMPLETED"
FAILED = "FAILED"
CANCELLED = "CANCELLED"
TIMEOUT = "TIMEOUT"
STATES = (PENDING, RUNNING, COMPLETED, FAILED, CANCELLED, TIMEOUT)
TERMINAL = frozenset({COMPLETED, FAILED, CANCELLED, TIMEOUT})
TRANSITIONS = {
    PENDING: frozenset({RUNNING, CANCELLED}),
    RUNNING: frozenset({COMPLETED, FAILED, CANCELLED, TIMEOUT}),
}

_ALIASES = {"-n": "--ntasks", "-c": "--cpus-per-task", "-t": "--time"}


@dataclass(frozen=True)
class NodeConfig:
    name: str
    cpus: int
    mem_mib: int


@dataclass(frozen=True)
class Demand:
    cpus: int
    mem_mib: int = 0
    time_limit: int | None = None  # ticks


@dataclass(frozen=True)
class Behavior:
    run_ticks: int
    exit_code: int = 0


@dataclass(frozen=True)
class SimEvent:
    tick: int
    job_id: int
    from_state: str
    to_state: str

    def line(self) -> str:
        return f"{self.tick} {self.job_id} {self.from_state}->{self.to_state}"


@dataclass(frozen=True)
class SlurmJobRecord:
    job_id: int
    name: str
    script: str
    demand: Demand
    behavior: Behavior
    state: str
    submit_tick: int
    start_tick: int | None = None
    end_tick: int | None = None
    node: str | None = None
    exit_code: int | None = None

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL


@dataclass
class SimNode:
    name: str
    cpus: int
    mem_mib: int
    allocations: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def used_cpus(self) -> int:
        return sum(c for c, _ in self.allocations.values())

    @property
    def used_mem(self) -> int:
        return sum(m for _, m in self.allocations.values())

    def fits(self, d: Demand) -> bool:
        return self.used_cpus + d.cpus <= self.cpus and self.used_mem + d.mem_mib <= self.mem_mib

    def could_ever_fit(self, d: Demand) -> bool:
        return d.cpus <= self.cpus and d.mem_mib <= self.mem_mib


# ------------------------------------------------------------ script parsing

def parse_mem(value: str) -> int:
    """Slurm memory spec to MiB; bare numbers are MiB."""
    m = re.fullmatch(r"(\d+)([KMGT]?)B?", value.strip(), re.IGNORECASE)
    if m is None:
        raise ValueError(f"bad memory spec {value!r}")
    n, unit = int(m.group(1)), m.group(2).upper()
    factor = {"K": 1 / 1024, "": 1, "M": 1, "G": 1024, "T": 1024**2}[unit]
    return math.ceil(n * factor)


def parse_time(value: str) -> int:
    """Slurm time spec to whole minutes (rounded up)."""
    value = value.strip()
    if value.upper() in ("INFINITE", "UNLIMITED"):
        return 0
    days = 0
    if "-" in value:
        d, value = value.split("-", 1)
        days = int(d)
        parts = [int(x) for x in value.split(":")]
        while len(parts) < 3:
            parts.append(0)
        h, mi, s = parts
    else:
        parts = [int(x) for x in value.split(":")]
        if len(parts) == 1:
            h, mi, s = 0, parts[0], 0
        elif len(parts) == 2:
            h, mi, s = 0, parts[0], parts[1]
        else:
            h, mi, s = parts
    return days * 1440 + h * 60 + mi + math.ceil(s / 60)


def script_directives(text: str) -> dict[str, str | None]:
    """Read ``#SBATCH`` header lines, later occurrences winning."""
    out: dict[str, str | None] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or (line.startswith("#") and not line.startswith("#SBATCH")):
            continue
        if not line.startswith("#SBATCH"):
            break
        body = line[len("#SBATCH"):].strip()
        if "=" in body and body.startswith("--"):
            flag, value = body.split("=", 1)
        elif " " in body:
            flag, value = body.split(None, 1)
        else:
            flag, value = body, None
        if value is not None and len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        out[_ALIASES.get(flag, flag)] = value
    return out


def script_demand(text: str) -> Demand:
    d = script_directives(text)
    ntasks = int(d.get("--ntasks") or 1)
    per_task = int(d.get("--cpus-per-task") or 1)
    mem = d.get("--mem")
    limit = parse_time(d["--time"]) if d.get("--time") else 0
    return Demand(
        cpus=ntasks * per_task,
        mem_mib=parse_mem(mem) if mem else 0,
        time_limit=limit or None,
    )


# ---------------------------------------------------------------- simulator

@dataclass
class _Job:
    job_id: int
    name: str
    script: str
    demand: Demand
    behavior: Behavior
    state: str
    submit_tick: int
    start_tick: int | None = None
    end_tick: int | None = None
    node: str | None = None
    exit_code: int | None = None


class SlurmSim:
    def __init__(self, nodes: list[NodeConfig]):
        if not nodes:
            raise EmptyCluster("cluster has no nodes")
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate node names")
        self.nodes = [SimNode(n.name, n.cpus, n.mem_mib) for n in nodes]
        self.tick = 0
        self._jobs: dict[int, _Job] = {}
        self._next_id = 1
        self._events: list[SimEvent] = []

    @property
    def config(self) -> list[NodeConfig]:
        return [NodeConfig(n.name, n.cpus, n.mem_mib) for n in self.nodes]

    def submit(self, script: str, demand: Demand, behavior: Behavior, name: str = "") -> int:
        if demand.cpus < 1:
            raise ValueError("demand must request at least one cpu")
        if behavior.run_ticks < 1:
            raise ValueError("runTicks must be >= 1")
        parsed = script_demand(script)
        if parsed != demand:
            raise DemandMismatch(f"script declares {parsed}, submitted {demand}")
        if not any(n.could_ever_fit(demand) for n in self.nodes):
            raise NeverSchedulable(
                f"demand of {demand.cpus} cpus / {demand.mem_mib} MiB exceeds every node"
            )
        job_id = self._next_id
        self._next_id += 1
        self._jobs[job_id] = _Job(job_id, name, script, demand, behavior, PENDING, self.tick)
        return job_id

    def step(self, ticks: int = 1) -> list[SimEvent]:
        if ticks < 1:
            raise ValueError("ticks must be positive")
        events: list[SimEvent] = []
        for _ in range(ticks):
            self.tick += 1
            events += self._retire()
            events += self._dispatch()
        return events

    def _retire(self) -> list[SimEvent]:
        events = []
        for job in self._running():
            run = job.behavior.run_ticks
            limit = job.demand.time_limit
            elapsed = self.tick - job.start_tick
            if limit is not None and limit < run and elapsed >= limit:
                events.append(self._finish(job, TIMEOUT))
            elif elapsed >= run:
                job.exit_code = job.behavior.exit_code
                events.append(self._finish(job, COMPLETED if job.exit_code == 0 else FAILED))
        return events

    def _dispatch(self) -> list[SimEvent]:
        events = []
        for job in sorted(
            (j for j in self._jobs.values() if j.state == PENDING), key=lambda j: j.job_id
        ):
            node = next((n for n in self.nodes if n.fits(job.demand)), None)
            if node is None:
                break
            node.allocations[job.job_id] = (job.demand.cpus, job.demand.mem_mib)
            job.node = node.name
            job.start_tick = self.tick
            events.append(self._transition(job, RUNNING))
        return events

    def _finish(self, job: _Job, state: str) -> SimEvent:
        if job.node is not None:
            self._node(job.node).allocations.pop(job.job_id, None)
        job.end_tick = self.tick
        return self._transition(job, state)

    def _transition(self, job: _Job, state: str) -> SimEvent:
        if state not in TRANSITIONS.get(job.state, ()):
            raise AssertionError(f"illegal transition {job.state}->{state} for job {job.job_id}")
        ev = SimEvent(self.tick, job.job_id, job.state, state)
        job.state = state
        self._events.append(ev)
        self._check_conservation()
        return ev

    def _check_conservation(self) -> None:
        for n in self.nodes:
            if n.used_cpus > n.cpus or n.used_mem > n.mem_mib:
                raise AssertionError(f"node {n.name} over-allocated")

    def cancel(self, job_id: int) -> str:
        job = self._job(job_id)
        if job.state in TERMINAL:
            return job.state
        if job.state == RUNNING:
            self._finish(job, CANCELLED)
        else:
            job.end_tick = self.tick
            self._transition(job, CANCELLED)
        return job.state

    def query(self, job_id: int) -> SlurmJobRecord:
        job = self._job(job_id)
        return SlurmJobRecord(**{f.name: getattr(job, f.name) for f in fields(job)})

    def _job(self, job_id: int) -> _Job:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJob(f"no job {job_id}") from None

    def _node(self, name: str) -> SimNode:
        return next(n for n in self.nodes if n.name == name)

    def _running(self) -> list[_Job]:
        return sorted((j for j in self._jobs.values() if j.state == RUNNING), key=lambda j: j.job_id)

    def jobs(self) -> list[SlurmJobRecord]:
        return [self.query(i) for i in sorted(self._jobs)]

    def active_jobs(self) -> list[SlurmJobRecord]:
        return [j for j in self.jobs() if not j.terminal]

    def events_since(self, n: int) -> list[SimEvent]:
        """Transitions in the order they happened, skipping the first ``n``."""
        return self._events[n:]

    @property
    def events(self) -> list[SimEvent]:
        return sorted(self._events, key=lambda e: (e.tick, e.job_id))

    def trace(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)

    # -- persistence

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "nextJobId": self._next_id,
            "nodes": [asdict(n) for n in self.config],
            "jobs": [asdict(j) for _, j in sorted(self._jobs.items())],
            "events": [asdict(e) for e in self._events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> SlurmSim:
        sim = cls([NodeConfig(**n) for n in d["nodes"]])
        sim.tick = d["tick"]
        sim._next_id = d["nextJobId"]
        for j in d["jobs"]:
            job = _Job(**{**j, "demand": Demand(**j["demand"]), "behavior": Behavior(**j["behavior"])})
            sim._jobs[job.job_id] = job
            if job.state == RUNNING:
                sim._node(job.node).allocations[job.job_id] = (job.demand.cpus, job.demand.mem_mib)
        sim._events = [SimEvent(**e) for e in d["events"]]
        return sim
