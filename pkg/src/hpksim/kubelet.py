"""The virtual node: turns bound pods into Slurm jobs and reports job state back.

One :class:`Kubelet` serves the single ``hpk-node``. It consumes the pod
watch stream in order, allocates the pod IP, renders and submits the batch
script, cancels jobs of deleted pods, and maps Slurm job transitions to pod
phases. Status-only pod updates are ignored so that its own status writes do
not feed back into reconciliation.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import asdict, dataclass, field, replace

from . import slurm
from .controlplane import DELETED, NODE_NAME, Store, WatchEvent
from .errors import (
    BadAnnotationSyntax,
    EmptyCluster,
    NeverSchedulable,
    NotAllocated,
)
from .model import FAILED, PENDING, RUNNING, SUCCEEDED, TERMINAL_PHASES, Node, ObjectMeta, Pod
from .network import Ipam
from .slurm import Behavior, Demand, SlurmSim
from .translator import (
    FLAG_ALIASES,
    annotations_to_flags,
    build_script,
    generated_directives,
    group_flags,
)

log = logging.getLogger(__name__)

RESTART_CAP = 3

PHASE_TABLE = {
    slurm.PENDING: (PENDING, None),
    slurm.RUNNING: (RUNNING, None),
    slurm.COMPLETED: (SUCCEEDED, None),
    slurm.FAILED: (FAILED, "Error"),
    slurm.TIMEOUT: (FAILED, "DeadlineExceeded"),
    slurm.CANCELLED: (FAILED, "Cancelled"),
}


def sync_status(job_state: str, exit_code: int | None = None) -> tuple[str, str | None]:
    """Pod phase and reason for a Slurm job state."""
    if job_state == slurm.COMPLETED and exit_code:
        return FAILED, "Error"
    return PHASE_TABLE[job_state]


def handle_restart_policy(restart_policy: str, job_state: str, restart_count: int) -> str:
    """``"resubmit"`` or ``"finalize"`` for a job that just reached a terminal state."""
    if restart_policy == "OnFailure" and job_state == slurm.FAILED and restart_count < RESTART_CAP:
        return "resubmit"
    return "finalize"


def pod_key(pod: Pod) -> str:
    return f"{pod.meta.namespace}/{pod.meta.name}"


@dataclass(frozen=True)
class BehaviorRule:
    """Scripted outcome for pods whose name matches ``pattern``.

    ``exit_codes`` lists the exit code of each attempt; the last entry repeats.
    Patterns containing ``/`` match ``namespace/name``, others just the name.
    """

    pattern: str
    run_ticks: int
    exit_codes: tuple[int, ...] = (0,)

    def matches(self, pod: Pod) -> bool:
        target = pod_key(pod) if "/" in self.pattern else pod.meta.name
        return fnmatch.fnmatchcase(target, self.pattern)

    def behavior(self, attempt: int) -> Behavior:
        return Behavior(self.run_ticks, self.exit_codes[min(attempt, len(self.exit_codes) - 1)])


@dataclass
class Behaviors:
    rules: list[BehaviorRule] = field(default_factory=list)
    default: Behavior = Behavior(run_ticks=3, exit_code=0)

    def for_pod(self, pod: Pod, attempt: int = 0) -> Behavior:
        for rule in self.rules:
            if rule.matches(pod):
                return rule.behavior(attempt)
        return self.default


@dataclass(frozen=True)
class VirtualNode:
    name: str
    cpus: int
    memory_mib: int


@dataclass
class PodJobBinding:
    pod_key: str
    job_id: int | None
    last_state: str | None = None
    restart_count: int = 0
    script: str | None = None


@dataclass(frozen=True)
class Action:
    kind: str  # Submit | Cancel | Restart | Phase | Fail
    pod: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.kind.lower()} {self.pod}" + (f" {self.detail}" if self.detail else "")


def job_demand(pod: Pod) -> Demand:
    """Slurm demand implied by the pod's generated directives plus pass-through flags."""
    eff: dict[str, str | None] = {}
    flags = annotations_to_flags(pod)
    for flag, value in [*generated_directives(pod), *group_flags(flags.flags)]:
        eff[FLAG_ALIASES.get(flag, flag)] = value
    limit = slurm.parse_time(eff["--time"]) if eff.get("--time") else 0
    return Demand(
        cpus=int(eff.get("--ntasks") or 1) * int(eff.get("--cpus-per-task") or 1),
        mem_mib=slurm.parse_mem(eff["--mem"]) if eff.get("--mem") else 0,
        time_limit=limit or None,
    )


class Kubelet:
    def __init__(self, store: Store, sim: SlurmSim, ipam: Ipam, behaviors: Behaviors | None = None):
        self.store = store
        self.sim = sim
        self.ipam = ipam
        self.behaviors = behaviors or Behaviors()
        self.bindings: dict[str, PodJobBinding] = {}
        self._by_job: dict[int, str] = {}
        self._watch = store.watch("pods", store.version)
        self._sim_cursor = 0
        self.log: list[str] = []

    # -- node

    def register_node(self) -> VirtualNode:
        nodes = self.sim.config
        if not nodes:
            raise EmptyCluster("cluster has no nodes")
        vn = VirtualNode(
            NODE_NAME, sum(n.cpus for n in nodes), sum(n.mem_mib for n in nodes)
        )
        self.store.put(Node(ObjectMeta(name=NODE_NAME, namespace=""), vn.cpus, vn.memory_mib))
        return vn

    # -- watch side

    def process(self) -> list[Action]:
        """Reconcile queued pod events, then fold in new simulator transitions."""
        actions = []
        for event in self._watch.drain():
            actions += self.reconcile(event)
        actions += self.observe()
        return actions

    def reconcile(self, event: WatchEvent) -> list[Action]:
        pod: Pod = event.object.body
        key = pod_key(pod)
        if event.type == DELETED:
            return self._forget(key)
        if pod.node_name != NODE_NAME or key in self.bindings:
            return []
        if pod.status.phase in TERMINAL_PHASES:
            return []
        return self._submit(pod)

    def resync(self) -> list[Action]:
        """Level-triggered pass over the whole store (used after loading state)."""
        actions = []
        live = {pod_key(p): p for p in self.store.list("Pod")}
        for key in sorted(set(self.bindings) - set(live)):
            actions += self._forget(key)
        for key, pod in sorted(live.items()):
            if pod.node_name == NODE_NAME and key not in self.bindings and pod.status.phase not in TERMINAL_PHASES:
                actions += self._submit(pod)
        return actions

    def _emit(self, action: Action) -> Action:
        self.log.append(action.line())
        log.debug("kubelet: %s", action.line())
        return action

    def _submit(self, pod: Pod) -> list[Action]:
        key = pod_key(pod)
        try:
            demand = job_demand(pod)
        except (BadAnnotationSyntax, ValueError) as exc:
            return self._fail(pod, "InvalidSlurmFlags", str(exc))
        # the address comes from the first node that could ever hold the job
        candidates = [
            n.name for n in self.sim.config if n.cpus >= demand.cpus and n.mem_mib >= demand.mem_mib
        ]
        if not candidates:
            return self._fail(pod, "Unschedulable")
        target = next((n for n in candidates if self.ipam.has_free(n)), None)
        if target is None:
            return self._fail(pod, "SubnetExhausted")
        ip = self.ipam.allocate(key, target)
        script = build_script(pod, ip).render()
        try:
            job_id = self.sim.submit(script, demand, self.behaviors.for_pod(pod, 0), name=key)
        except NeverSchedulable:
            self.ipam.release(key)
            return self._fail(pod, "Unschedulable")
        self.bindings[key] = PodJobBinding(key, job_id, slurm.PENDING, 0, script)
        self._by_job[job_id] = key
        return [self._emit(Action("Submit", key, f"job={job_id} ip={ip}"))]

    def _fail(self, pod: Pod, reason: str, message: str = "") -> list[Action]:
        current = self.store.find("Pod", pod.meta.namespace, pod.meta.name) or pod
        self.store.put(replace(current, status=replace(current.status, phase=FAILED, reason=reason)))
        self.bindings[pod_key(pod)] = PodJobBinding(pod_key(pod), None, None)
        detail = f"reason={reason}" + (f" ({message})" if message else "")
        return [self._emit(Action("Fail", pod_key(pod), detail))]

    def _forget(self, key: str) -> list[Action]:
        binding = self.bindings.pop(key, None)
        if binding is None:
            return []
        actions = []
        if binding.job_id is not None:
            self._by_job.pop(binding.job_id, None)
            if not self.sim.query(binding.job_id).terminal:
                self.sim.cancel(binding.job_id)
                actions.append(self._emit(Action("Cancel", key, f"job={binding.job_id}")))
        ip = self.ipam.address_of(key)
        if ip is not None:
            self.ipam.release(key)
            actions.append(self._emit(Action("Release", key, f"ip={ip}")))
        return actions

    # -- simulator side

    def observe(self) -> list[Action]:
        events = self.sim.events_since(self._sim_cursor)
        self._sim_cursor += len(events)
        actions = []
        for ev in events:
            actions += self._on_transition(ev)
        return actions

    def _on_transition(self, ev: slurm.SimEvent) -> list[Action]:
        key = self._by_job.get(ev.job_id)
        if key is None:
            return []
        binding = self.bindings[key]
        binding.last_state = ev.to_state
        ns, name = key.split("/", 1)
        pod = self.store.find("Pod", ns, name)
        if pod is None:
            return []
        job = self.sim.query(ev.job_id)
        if ev.to_state == slurm.RUNNING:
            ip = self.ipam.address_of(key)
            if pod.status.phase == RUNNING and pod.status.pod_ip == ip:
                return []
            pod.status = replace(pod.status, phase=RUNNING, reason=None, pod_ip=ip)
            self.store.put(pod)
            return [self._emit(Action("Phase", key, f"{RUNNING} ip={ip}"))]
        if ev.to_state not in slurm.TERMINAL:
            return []
        decision = handle_restart_policy(pod.restart_policy, ev.to_state, binding.restart_count)
        if decision == "resubmit":
            attempt = binding.restart_count + 1
            job_id = self.sim.submit(
                binding.script, job.demand, self.behaviors.for_pod(pod, attempt), name=key
            )
            self._by_job.pop(ev.job_id, None)
            self._by_job[job_id] = key
            binding.job_id = job_id
            binding.last_state = slurm.PENDING
            binding.restart_count = attempt
            pod.status = replace(pod.status, restart_count=attempt, exit_code=job.exit_code)
            self.store.put(pod)
            return [self._emit(Action("Restart", key, f"job={job_id} restartCount={attempt}"))]
        phase, reason = sync_status(ev.to_state, job.exit_code)
        pod.status = replace(pod.status, phase=phase, reason=reason, exit_code=job.exit_code)
        self.store.put(pod)
        actions = [self._emit(Action("Phase", key, phase + (f" reason={reason}" if reason else "")))]
        try:
            ip = self.ipam.address_of(key)
            self.ipam.release(key)
            actions.append(self._emit(Action("Release", key, f"ip={ip}")))
        except NotAllocated:
            pass
        return actions

    # -- introspection

    def live_job(self, key: str) -> int | None:
        b = self.bindings.get(key)
        if b is None or b.job_id is None or self.sim.query(b.job_id).terminal:
            return None
        return b.job_id

    def check_bijection(self) -> list[str]:
        """Violations of: live bound pods <-> non-terminal jobs."""
        problems = []
        live_pods = {
            pod_key(p)
            for p in self.store.list("Pod")
            if p.node_name == NODE_NAME and p.status.phase not in TERMINAL_PHASES
        }
        jobs = {j.job_id: j.name for j in self.sim.active_jobs()}
        job_pods = {self._by_job.get(j) for j in jobs}
        for key in sorted(live_pods):
            if self.live_job(key) is None:
                problems.append(f"pod {key} has no live job")
        for job_id, name in sorted(jobs.items()):
            owner = self._by_job.get(job_id)
            if owner is None or owner not in live_pods:
                problems.append(f"job {job_id} ({name}) has no live pod")
        if len(job_pods) != len(jobs):
            problems.append("two live jobs share one pod")
        return problems

    # -- persistence

    def to_dict(self) -> dict:
        return {
            "simCursor": self._sim_cursor,
            "bindings": [asdict(b) for _, b in sorted(self.bindings.items())],
        }

    def restore(self, d: dict) -> None:
        self._sim_cursor = d["simCursor"]
        for b in d["bindings"]:
            binding = PodJobBinding(**b)
            self.bindings[binding.pod_key] = binding
            if binding.job_id is not None:
                self._by_job[binding.job_id] = binding.pod_key
        self._watch = self.store.watch("pods", self.store.version)
