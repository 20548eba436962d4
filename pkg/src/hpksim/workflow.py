"""A small Argo-style DAG runner.

Supported: DAG templates with ``dependencies``, literal ``withItems`` lists,
input parameters with ``{{inputs.parameters.NAME}}`` placeholders in the
container command, args, image and annotations, and ``{{item}}`` in task
arguments. Steps of one task are created together, in item order. A failed
step fails its task; tasks depending on it are skipped and the workflow
ends Failed once nothing else can run.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass

from .controlplane import Store
from .errors import HpkError, UnboundParameter, UndeclaredPlaceholder
from .model import (
    FAILED,
    PENDING,
    RUNNING,
    SUCCEEDED,
    TERMINAL_PHASES,
    DagTask,
    ObjectMeta,
    Pod,
    StepStatus,
    Template,
    Workflow,
)

SKIPPED = "Skipped"
WORKFLOW_LABEL = "workflows.argoproj.io/workflow"
_PARAM = "inputs.parameters."
_DNS_RE = re.compile(r"[^a-z0-9.-]")


@dataclass(frozen=True)
class Step:
    name: str
    task: str
    index: int | None
    item: str | None
    # parameter name -> value expression, with {{item}} already bound
    arguments: tuple[tuple[str, str], ...]


def render_item(item) -> str:
    if isinstance(item, bool):
        return "true" if item else "false"
    return str(item)


def expand_with_items(task: DagTask) -> list[Step]:
    """One step per item (or a single step when the task has no item list).

    An empty item list yields no steps; the caller treats that as vacuous success.
    """
    if task.with_items is None:
        return [Step(task.name, task.name, None, None, tuple(task.arguments))]
    steps = []
    for i, raw in enumerate(task.with_items):
        item = render_item(raw)
        args = tuple((n, v.replace("{{item}}", item)) for n, v in task.arguments)
        steps.append(Step(f"{task.name}({i}:{item})", task.name, i, item, args))
    return steps


def _bind(text: str, values: dict[str, str], declared: set[str]) -> str:
    def sub(m: re.Match) -> str:
        ref = m.group(1)
        if not ref.startswith(_PARAM):
            raise UndeclaredPlaceholder(ref)
        name = ref[len(_PARAM):]
        if name not in declared:
            raise UndeclaredPlaceholder(name)
        return values[name]

    return re.sub(r"\{\{\s*([^{}]*?)\s*\}\}", sub, text)


def substitute_parameters(
    template: Template,
    bindings: dict[str, str],
    *,
    name: str | None = None,
    namespace: str = "default",
    labels: dict[str, str] | None = None,
) -> Pod:
    """Instantiate a container template as a pod.

    Every declared parameter needs a binding or a default. Bindings for
    parameters the template never declares are ignored unless a placeholder
    refers to them, which raises :class:`UndeclaredPlaceholder`.
    """
    if template.container is None:
        raise ValueError(f"template {template.name!r} has no container")
    declared = {p.name for p in template.inputs}
    values = {}
    for p in template.inputs:
        if p.name in bindings:
            values[p.name] = str(bindings[p.name])
        elif p.default is not None:
            values[p.name] = p.default
        else:
            raise UnboundParameter(p.name)
    c = copy.deepcopy(template.container)
    c.image = _bind(c.image, values, declared)
    c.command = [_bind(x, values, declared) for x in c.command]
    c.args = [_bind(x, values, declared) for x in c.args]
    return Pod(
        meta=ObjectMeta(
            name=name or template.name,
            namespace=namespace,
            labels={**template.labels, **(labels or {})},
            annotations={k: _bind(v, values, declared) for k, v in template.annotations.items()},
        ),
        containers=[c],
        restart_policy="Never",
    )


def pod_name(workflow: str, step: Step) -> str:
    if step.index is not None:
        base = f"{workflow}-{step.task}-{step.index}"
    elif step.task == workflow:
        base = workflow
    else:
        base = f"{workflow}-{step.task}"
    return _DNS_RE.sub("-", base.lower()).strip("-.")[:253]


def entry_tasks(wf: Workflow) -> list[DagTask]:
    """The entrypoint's tasks; a container entrypoint is one implicit task."""
    entry = wf.template(wf.entrypoint)
    if entry.dag is not None:
        return entry.dag
    return [DagTask(name=wf.meta.name, template=entry.name)]


class WorkflowController:
    """Drives every stored workflow forward; writes only pods and workflow status."""

    def __init__(self, store: Store):
        self.store = store
        self._watch = store.watch("", store.version)
        self.log: list[str] = []

    def process(self) -> None:
        events = self._watch.drain()
        if not events:
            return
        for wf in self.store.list("Workflow"):
            if wf.status.phase not in TERMINAL_PHASES:
                self.sync(wf)

    def sync(self, wf: Workflow) -> Workflow:
        before = copy.deepcopy(wf.status)
        status = wf.status
        tasks = entry_tasks(wf)
        for t in tasks:
            status.tasks.setdefault(t.name, PENDING)
        try:
            changed = True
            while changed:
                changed = False
                for t in tasks:
                    if self._advance(wf, t):
                        changed = True
        except HpkError as exc:
            status.phase = FAILED
            status.message = str(exc)
        else:
            states = [status.tasks[t.name] for t in tasks]
            if all(s in (SUCCEEDED, FAILED, SKIPPED) for s in states):
                status.phase = SUCCEEDED if all(s == SUCCEEDED for s in states) else FAILED
            elif any(s != PENDING for s in states):
                status.phase = RUNNING
        if status != before:
            self.store.put(wf)
            self.log.append(f"workflow {wf.meta.namespace}/{wf.meta.name} {status.phase}")
        return wf

    def _advance(self, wf: Workflow, task: DagTask) -> bool:
        status = wf.status
        state = status.tasks[task.name]
        if state == PENDING:
            deps = [status.tasks.get(d, PENDING) for d in task.dependencies]
            if any(d in (FAILED, SKIPPED) for d in deps):
                status.tasks[task.name] = SKIPPED
                return True
            if all(d == SUCCEEDED for d in deps):
                self._start(wf, task)
                return True
            return False
        if state == RUNNING:
            steps = [s for s in status.steps if s.task == task.name]
            changed = False
            for s in steps:
                pod = self.store.find("Pod", wf.meta.namespace, s.pod_name)
                phase = pod.status.phase if pod is not None else FAILED
                if phase != s.phase:
                    s.phase = phase
                    changed = True
            phases = [s.phase for s in steps]
            if all(p in TERMINAL_PHASES for p in phases):
                status.tasks[task.name] = SUCCEEDED if all(p == SUCCEEDED for p in phases) else FAILED
                changed = True
            return changed
        return False

    def _start(self, wf: Workflow, task: DagTask) -> None:
        template = wf.template(task.template)
        steps = expand_with_items(task)
        if not steps:
            wf.status.tasks[task.name] = SUCCEEDED
            return
        for step in steps:
            name = pod_name(wf.meta.name, step)
            pod = substitute_parameters(
                template,
                dict(step.arguments),
                name=name,
                namespace=wf.meta.namespace,
                labels={WORKFLOW_LABEL: wf.meta.name},
            )
            if self.store.find("Pod", wf.meta.namespace, name) is not None:
                raise HpkError(f"pod {name} already exists")
            self.store.put(pod)
            wf.status.steps.append(StepStatus(step.name, task.name, name, PENDING))
            self.log.append(f"step {wf.meta.namespace}/{wf.meta.name} {step.name} pod={name}")
        wf.status.tasks[task.name] = RUNNING


def unresolved(pod: Pod) -> list[str]:
    """Substituted fields that still contain a ``{{`` marker."""
    texts = list(pod.meta.annotations.values())
    for c in pod.containers:
        texts += [c.image, *c.command, *c.args]
    return [t for t in texts if "{{" in t]


__all__ = [
    "SKIPPED",
    "Step",
    "WorkflowController",
    "expand_with_items",
    "pod_name",
    "substitute_parameters",
    "unresolved",
]
