"""Typed model for the supported Kubernetes resource subset.

Three kinds are understood: ``Pod``, ``Service`` and ``Workflow`` (the Argo
CRD). ``Node`` objects exist only inside the engine and are never parsed from
user manifests.

Every resource round-trips through :func:`to_dict` / :func:`from_dict` and
serializes with a fixed field order.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, ClassVar, Union

import yaml

from .errors import (
    BadQuantity,
    MalformedYaml,
    ManifestError,
    MissingField,
    UnsupportedKind,
)
from .quantity import CPU, MEMORY, Quantity, parse_quantity

log = logging.getLogger(__name__)

PENDING = "Pending"
RUNNING = "Running"
SUCCEEDED = "Succeeded"
FAILED = "Failed"
POD_PHASES = (PENDING, RUNNING, SUCCEEDED, FAILED)
TERMINAL_PHASES = (SUCCEEDED, FAILED)

RESTART_POLICIES = ("Never", "OnFailure")
SERVICE_TYPES = ("ClusterIP", "NodePort", "LoadBalancer")
HEADLESS = "None"

_PLACEHOLDER_RE = re.compile(r"\{\{\s*([^{}]*?)\s*\}\}")


@dataclass
class ObjectMeta:
    name: str
    namespace: str = "default"
    labels: dict[str, str] = field(default_factory=dict)
    annotations: dict[str, str] = field(default_factory=dict)


@dataclass
class VolumeMount:
    name: str
    mount_path: str
    read_only: bool = False


@dataclass
class ContainerSpec:
    name: str
    image: str
    command: list[str] = field(default_factory=list)
    args: list[str] = field(default_factory=list)
    requests: dict[str, Quantity] = field(default_factory=dict)
    limits: dict[str, Quantity] = field(default_factory=dict)
    volume_mounts: list[VolumeMount] = field(default_factory=list)


@dataclass
class HostPathVolume:
    name: str
    host_path: str


@dataclass
class PodStatus:
    phase: str = PENDING
    reason: str | None = None
    pod_ip: str | None = None
    exit_code: int | None = None
    restart_count: int = 0


@dataclass
class Pod:
    kind: ClassVar[str] = "Pod"

    meta: ObjectMeta
    containers: list[ContainerSpec]
    restart_policy: str = "Never"
    node_name: str | None = None
    volumes: list[HostPathVolume] = field(default_factory=list)
    active_deadline_seconds: int | None = None
    status: PodStatus = field(default_factory=PodStatus)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind, self.meta.namespace, self.meta.name)


@dataclass
class ServicePort:
    port: int
    name: str | None = None
    target_port: int | str | None = None


@dataclass
class Service:
    kind: ClassVar[str] = "Service"

    meta: ObjectMeta
    selector: dict[str, str] = field(default_factory=dict)
    ports: list[ServicePort] = field(default_factory=list)
    cluster_ip: str | None = None
    type: str = "ClusterIP"

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind, self.meta.namespace, self.meta.name)

    @property
    def headless(self) -> bool:
        return self.cluster_ip == HEADLESS


@dataclass
class Node:
    kind: ClassVar[str] = "Node"

    meta: ObjectMeta
    cpus: int
    memory_mib: int

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind, "", self.meta.name)


@dataclass
class InputParameter:
    name: str
    default: str | None = None


@dataclass
class DagTask:
    name: str
    template: str
    dependencies: list[str] = field(default_factory=list)
    # (parameter name, value expression) pairs, order preserved
    arguments: list[tuple[str, str]] = field(default_factory=list)
    with_items: list[Any] | None = None


@dataclass
class Template:
    """A workflow template: either a DAG or a single-container pod template."""

    name: str
    dag: list[DagTask] | None = None
    container: ContainerSpec | None = None
    inputs: list[InputParameter] = field(default_factory=list)
    labels: dict[str, str] = field(default_factory=dict)
    annotations: dict[str, str] = field(default_factory=dict)


@dataclass
class StepStatus:
    name: str
    task: str
    pod_name: str | None
    phase: str = PENDING


@dataclass
class WorkflowStatus:
    phase: str = PENDING
    message: str | None = None
    steps: list[StepStatus] = field(default_factory=list)
    # task name -> Pending | Running | Succeeded | Failed | Skipped
    tasks: dict[str, str] = field(default_factory=dict)


@dataclass
class Workflow:
    kind: ClassVar[str] = "Workflow"

    meta: ObjectMeta
    entrypoint: str
    templates: list[Template] = field(default_factory=list)
    status: WorkflowStatus = field(default_factory=WorkflowStatus)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind, self.meta.namespace, self.meta.name)

    def template(self, name: str) -> Template | None:
        for t in self.templates:
            if t.name == name:
                return t
        return None


Resource = Union[Pod, Service, Workflow, Node]
KINDS: dict[str, type] = {"Pod": Pod, "Service": Service, "Workflow": Workflow, "Node": Node}
PLURALS = {"Pod": "pods", "Service": "services", "Workflow": "workflows", "Node": "nodes"}
API_VERSIONS = {
    "Pod": "v1",
    "Service": "v1",
    "Node": "v1",
    "Workflow": "argoproj.io/v1alpha1",
}


# ---------------------------------------------------------------- parsing

def _warn_unknown(d: dict, known: set[str], path: str) -> None:
    for k in d:
        if k not in known:
            log.warning("ignoring unknown field %s.%s", path, k)


def _req(d: dict, key: str, path: str) -> Any:
    value = d.get(key)
    if value is None or value == "":
        raise MissingField(f"{path}.{key}")
    return value


def _mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ManifestError(f"{path} must be a mapping")
    return value


def _seq(value: Any, path: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ManifestError(f"{path} must be a list")
    return value


def _str_map(value: Any, path: str) -> dict[str, str]:
    return {str(k): _scalar(v) for k, v in _mapping(value, path).items()}


def _scalar(value: Any) -> str:
    """Render a YAML scalar the way Kubernetes stringifies it."""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _meta(d: Any, path: str = "metadata") -> ObjectMeta:
    d = _mapping(d, path)
    _warn_unknown(d, {"name", "namespace", "labels", "annotations"}, path)
    return ObjectMeta(
        name=str(_req(d, "name", path)),
        namespace=str(d.get("namespace") or "default"),
        labels=_str_map(d.get("labels"), f"{path}.labels"),
        annotations=_str_map(d.get("annotations"), f"{path}.annotations"),
    )


def _quantities(d: Any, path: str) -> dict[str, Quantity]:
    out = {}
    for name, text in _mapping(d, path).items():
        if name not in (CPU, MEMORY):
            log.warning("ignoring unsupported resource %s.%s", path, name)
            continue
        out[name] = parse_quantity(text, name)
    return out


def _container(d: Any, path: str) -> ContainerSpec:
    d = _mapping(d, path)
    _warn_unknown(
        d, {"name", "image", "command", "args", "resources", "volumeMounts"}, path
    )
    res = _mapping(d.get("resources"), f"{path}.resources")
    mounts = []
    for i, m in enumerate(_seq(d.get("volumeMounts"), f"{path}.volumeMounts")):
        mp = f"{path}.volumeMounts[{i}]"
        m = _mapping(m, mp)
        mounts.append(
            VolumeMount(
                name=str(_req(m, "name", mp)),
                mount_path=str(_req(m, "mountPath", mp)),
                read_only=bool(m.get("readOnly", False)),
            )
        )
    return ContainerSpec(
        name=str(d.get("name") or "main"),
        image=str(_req(d, "image", path)),
        command=[_scalar(x) for x in _seq(d.get("command"), f"{path}.command")],
        args=[_scalar(x) for x in _seq(d.get("args"), f"{path}.args")],
        requests=_quantities(res.get("requests"), f"{path}.resources.requests"),
        limits=_quantities(res.get("limits"), f"{path}.resources.limits"),
        volume_mounts=mounts,
    )


def _pod(doc: dict) -> Pod:
    spec = _mapping(_req(doc, "spec", ""), "spec")
    _warn_unknown(
        spec,
        {"containers", "restartPolicy", "nodeName", "volumes", "activeDeadlineSeconds"},
        "spec",
    )
    containers = [
        _container(c, f"spec.containers[{i}]")
        for i, c in enumerate(_seq(_req(spec, "containers", "spec"), "spec.containers"))
    ]
    volumes = []
    for i, v in enumerate(_seq(spec.get("volumes"), "spec.volumes")):
        vp = f"spec.volumes[{i}]"
        v = _mapping(v, vp)
        hp = _mapping(_req(v, "hostPath", vp), f"{vp}.hostPath")
        volumes.append(
            HostPathVolume(
                name=str(_req(v, "name", vp)),
                host_path=str(_req(hp, "path", f"{vp}.hostPath")),
            )
        )
    deadline = spec.get("activeDeadlineSeconds")
    st = _mapping(doc.get("status"), "status")
    status = PodStatus(
        phase=str(st.get("phase") or PENDING),
        reason=st.get("reason"),
        pod_ip=st.get("podIP"),
        exit_code=st.get("exitCode"),
        restart_count=int(st.get("restartCount") or 0),
    )
    return Pod(
        meta=_meta(doc.get("metadata")),
        containers=containers,
        restart_policy=str(spec.get("restartPolicy") or "Never"),
        node_name=spec.get("nodeName") or None,
        volumes=volumes,
        active_deadline_seconds=int(deadline) if deadline is not None else None,
        status=status,
    )


def _service(doc: dict) -> Service:
    spec = _mapping(doc.get("spec"), "spec")
    _warn_unknown(spec, {"selector", "ports", "clusterIP", "type"}, "spec")
    ports = []
    for i, p in enumerate(_seq(spec.get("ports"), "spec.ports")):
        pp = f"spec.ports[{i}]"
        p = _mapping(p, pp)
        ports.append(
            ServicePort(
                port=int(_req(p, "port", pp)),
                name=p.get("name"),
                target_port=p.get("targetPort"),
            )
        )
    cluster_ip = spec.get("clusterIP")
    return Service(
        meta=_meta(doc.get("metadata")),
        selector=_str_map(spec.get("selector"), "spec.selector"),
        ports=ports,
        cluster_ip=str(cluster_ip) if cluster_ip not in (None, "") else None,
        type=str(spec.get("type") or "ClusterIP"),
    )


def _node(doc: dict) -> Node:
    cap = _mapping(_mapping(doc.get("status"), "status").get("capacity"), "status.capacity")
    meta = _meta(doc.get("metadata"))
    meta.namespace = ""
    return Node(
        meta=meta,
        cpus=int(_req(cap, "cpu", "status.capacity")),
        memory_mib=parse_quantity(_req(cap, "memory", "status.capacity"), MEMORY).value
        // 2**20,
    )


def _task(d: Any, path: str) -> DagTask:
    d = _mapping(d, path)
    _warn_unknown(d, {"name", "template", "dependencies", "arguments", "withItems"}, path)
    args = []
    arguments = _mapping(d.get("arguments"), f"{path}.arguments")
    for i, p in enumerate(_seq(arguments.get("parameters"), f"{path}.arguments.parameters")):
        pp = f"{path}.arguments.parameters[{i}]"
        p = _mapping(p, pp)
        args.append((str(_req(p, "name", pp)), _scalar(p.get("value", ""))))
    items = d.get("withItems")
    return DagTask(
        name=str(_req(d, "name", path)),
        template=str(_req(d, "template", path)),
        dependencies=[str(x) for x in _seq(d.get("dependencies"), f"{path}.dependencies")],
        arguments=args,
        with_items=list(_seq(items, f"{path}.withItems")) if items is not None else None,
    )


def _template(d: Any, path: str) -> Template:
    d = _mapping(d, path)
    _warn_unknown(d, {"name", "dag", "container", "inputs", "metadata"}, path)
    meta = _mapping(d.get("metadata"), f"{path}.metadata")
    inputs = []
    raw_inputs = _mapping(d.get("inputs"), f"{path}.inputs")
    for i, p in enumerate(_seq(raw_inputs.get("parameters"), f"{path}.inputs.parameters")):
        pp = f"{path}.inputs.parameters[{i}]"
        p = _mapping(p, pp)
        default = p.get("value")
        inputs.append(
            InputParameter(
                name=str(_req(p, "name", pp)),
                default=_scalar(default) if default is not None else None,
            )
        )
    dag = None
    if d.get("dag") is not None:
        dag_d = _mapping(d["dag"], f"{path}.dag")
        dag = [
            _task(t, f"{path}.dag.tasks[{i}]")
            for i, t in enumerate(_seq(dag_d.get("tasks"), f"{path}.dag.tasks"))
        ]
    container = None
    if d.get("container") is not None:
        container = _container(d["container"], f"{path}.container")
    if dag is None and container is None:
        raise MissingField(f"{path}.container")
    return Template(
        name=str(_req(d, "name", path)),
        dag=dag,
        container=container,
        inputs=inputs,
        labels=_str_map(meta.get("labels"), f"{path}.metadata.labels"),
        annotations=_str_map(meta.get("annotations"), f"{path}.metadata.annotations"),
    )


def _workflow(doc: dict) -> Workflow:
    spec = _mapping(_req(doc, "spec", ""), "spec")
    _warn_unknown(spec, {"entrypoint", "templates"}, "spec")
    templates = [
        _template(t, f"spec.templates[{i}]")
        for i, t in enumerate(_seq(spec.get("templates"), "spec.templates"))
    ]
    st = _mapping(doc.get("status"), "status")
    status = WorkflowStatus(
        phase=str(st.get("phase") or PENDING),
        message=st.get("message"),
        steps=[
            StepStatus(
                name=s["name"], task=s["task"], pod_name=s.get("podName"), phase=s["phase"]
            )
            for s in _seq(st.get("steps"), "status.steps")
        ],
        tasks={str(k): str(v) for k, v in _mapping(st.get("tasks"), "status.tasks").items()},
    )
    return Workflow(
        meta=_meta(doc.get("metadata")),
        entrypoint=str(_req(spec, "entrypoint", "spec")),
        templates=templates,
        status=status,
    )


_PARSERS = {"Pod": _pod, "Service": _service, "Workflow": _workflow, "Node": _node}


def from_dict(doc: Any, *, allow_node: bool = False) -> Resource:
    """Build a typed resource from one decoded manifest document."""
    if not isinstance(doc, dict):
        raise ManifestError("document must be a mapping")
    kind = doc.get("kind")
    if not kind:
        raise MissingField(".kind")
    if kind not in _PARSERS or (kind == "Node" and not allow_node):
        raise UnsupportedKind(str(kind))
    if not isinstance(doc.get("metadata"), dict):
        raise MissingField("metadata.name")
    return _PARSERS[kind](doc)


def parse_manifest(text: str) -> list[Resource | ManifestError]:
    """Parse a multi-document YAML stream.

    Returns one entry per non-empty document, in order. A document that cannot
    be turned into a resource (unknown kind, missing field, bad quantity)
    yields the corresponding :class:`ManifestError` instance in its slot, so
    the rest of the stream is still usable. A stream that is not valid YAML
    raises :class:`MalformedYaml`.
    """
    try:
        docs = list(yaml.safe_load_all(text))
    except yaml.YAMLError as exc:
        raise MalformedYaml(str(exc)) from exc
    out: list[Resource | ManifestError] = []
    for doc in docs:
        if doc is None:
            continue
        try:
            out.append(from_dict(doc))
        except ManifestError as exc:
            out.append(exc)
    return out


def load_resources(text: str) -> list[Resource]:
    """Like :func:`parse_manifest` but raises the first per-document error."""
    out = []
    for item in parse_manifest(text):
        if isinstance(item, ManifestError):
            raise item
        out.append(item)
    return out


# ---------------------------------------------------------- serialization

def _meta_dict(meta: ObjectMeta, namespaced: bool = True) -> dict:
    d: dict[str, Any] = {"name": meta.name}
    if namespaced:
        d["namespace"] = meta.namespace
    if meta.labels:
        d["labels"] = dict(sorted(meta.labels.items()))
    if meta.annotations:
        d["annotations"] = dict(sorted(meta.annotations.items()))
    return d


def _container_dict(c: ContainerSpec) -> dict:
    d: dict[str, Any] = {"name": c.name, "image": c.image}
    if c.command:
        d["command"] = list(c.command)
    if c.args:
        d["args"] = list(c.args)
    res = {}
    if c.requests:
        res["requests"] = {k: c.requests[k].text for k in sorted(c.requests)}
    if c.limits:
        res["limits"] = {k: c.limits[k].text for k in sorted(c.limits)}
    if res:
        d["resources"] = res
    if c.volume_mounts:
        d["volumeMounts"] = [
            {"name": m.name, "mountPath": m.mount_path, **({"readOnly": True} if m.read_only else {})}
            for m in c.volume_mounts
        ]
    return d


def _pod_dict(p: Pod) -> dict:
    spec: dict[str, Any] = {"containers": [_container_dict(c) for c in p.containers]}
    spec["restartPolicy"] = p.restart_policy
    if p.node_name:
        spec["nodeName"] = p.node_name
    if p.volumes:
        spec["volumes"] = [{"name": v.name, "hostPath": {"path": v.host_path}} for v in p.volumes]
    if p.active_deadline_seconds is not None:
        spec["activeDeadlineSeconds"] = p.active_deadline_seconds
    status: dict[str, Any] = {"phase": p.status.phase}
    if p.status.reason is not None:
        status["reason"] = p.status.reason
    if p.status.pod_ip is not None:
        status["podIP"] = p.status.pod_ip
    if p.status.exit_code is not None:
        status["exitCode"] = p.status.exit_code
    if p.status.restart_count:
        status["restartCount"] = p.status.restart_count
    return {"metadata": _meta_dict(p.meta), "spec": spec, "status": status}


def _service_dict(s: Service) -> dict:
    spec: dict[str, Any] = {"type": s.type}
    if s.cluster_ip is not None:
        spec["clusterIP"] = s.cluster_ip
    if s.selector:
        spec["selector"] = dict(sorted(s.selector.items()))
    if s.ports:
        ports = []
        for p in s.ports:
            pd: dict[str, Any] = {}
            if p.name is not None:
                pd["name"] = p.name
            pd["port"] = p.port
            if p.target_port is not None:
                pd["targetPort"] = p.target_port
            ports.append(pd)
        spec["ports"] = ports
    return {"metadata": _meta_dict(s.meta), "spec": spec}


def _node_dict(n: Node) -> dict:
    return {
        "metadata": _meta_dict(n.meta, namespaced=False),
        "status": {"capacity": {"cpu": str(n.cpus), "memory": f"{n.memory_mib}Mi"}},
    }


def _task_dict(t: DagTask) -> dict:
    d: dict[str, Any] = {"name": t.name, "template": t.template}
    if t.dependencies:
        d["dependencies"] = list(t.dependencies)
    if t.arguments:
        d["arguments"] = {"parameters": [{"name": n, "value": v} for n, v in t.arguments]}
    if t.with_items is not None:
        d["withItems"] = list(t.with_items)
    return d


def _template_dict(t: Template) -> dict:
    d: dict[str, Any] = {"name": t.name}
    meta = {}
    if t.labels:
        meta["labels"] = dict(sorted(t.labels.items()))
    if t.annotations:
        meta["annotations"] = dict(sorted(t.annotations.items()))
    if meta:
        d["metadata"] = meta
    if t.inputs:
        d["inputs"] = {
            "parameters": [
                {"name": p.name, **({"value": p.default} if p.default is not None else {})}
                for p in t.inputs
            ]
        }
    if t.dag is not None:
        d["dag"] = {"tasks": [_task_dict(x) for x in t.dag]}
    if t.container is not None:
        d["container"] = _container_dict(t.container)
    return d


def _workflow_dict(w: Workflow) -> dict:
    status: dict[str, Any] = {"phase": w.status.phase}
    if w.status.message is not None:
        status["message"] = w.status.message
    if w.status.tasks:
        status["tasks"] = dict(w.status.tasks)
    if w.status.steps:
        status["steps"] = [
            {"name": s.name, "task": s.task, "podName": s.pod_name, "phase": s.phase}
            for s in w.status.steps
        ]
    return {
        "metadata": _meta_dict(w.meta),
        "spec": {
            "entrypoint": w.entrypoint,
            "templates": [_template_dict(t) for t in w.templates],
        },
        "status": status,
    }


_SERIALIZERS = {Pod: _pod_dict, Service: _service_dict, Workflow: _workflow_dict, Node: _node_dict}


def to_dict(resource: Resource) -> dict:
    body = _SERIALIZERS[type(resource)](resource)
    return {"apiVersion": API_VERSIONS[resource.kind], "kind": resource.kind, **body}


def to_yaml(resources: list[Resource]) -> str:
    return yaml.safe_dump_all(
        [to_dict(r) for r in resources], sort_keys=False, default_flow_style=False
    )


# -------------------------------------------------------------- validation

def validate_pod(pod: Pod) -> list[str]:
    """Return every invariant violation found in ``pod`` (empty when valid)."""
    errors = []
    if not pod.containers:
        errors.append("pod must declare at least one container")
    seen = set()
    for c in pod.containers:
        if c.name in seen:
            errors.append(f"duplicate container name {c.name!r}")
        seen.add(c.name)
        if not c.image:
            errors.append(f"container {c.name!r}: image must not be empty")
        for res in sorted(set(c.requests) & set(c.limits)):
            if c.requests[res].value > c.limits[res].value:
                errors.append(
                    f"container {c.name!r}: {res} request {c.requests[res]} exceeds limit {c.limits[res]}"
                )
    if pod.restart_policy not in RESTART_POLICIES:
        errors.append(f"unsupported restartPolicy {pod.restart_policy!r}")
    volumes = set()
    for v in pod.volumes:
        if v.name in volumes:
            errors.append(f"duplicate volume name {v.name!r}")
        volumes.add(v.name)
        if not v.host_path.startswith("/"):
            errors.append(f"volume {v.name!r}: hostPath {v.host_path!r} is not absolute")
    for c in pod.containers:
        for m in c.volume_mounts:
            if m.name not in volumes:
                errors.append(f"container {c.name!r} mounts undeclared volume {m.name!r}")
    if pod.active_deadline_seconds is not None and pod.active_deadline_seconds <= 0:
        errors.append("activeDeadlineSeconds must be positive")
    if pod.status.phase not in POD_PHASES:
        errors.append(f"unknown phase {pod.status.phase!r}")
    return errors


def validate_service(svc: Service) -> list[str]:
    errors = []
    if svc.type not in SERVICE_TYPES:
        errors.append(f"unsupported service type {svc.type!r}")
    for p in svc.ports:
        if not 0 < p.port < 65536:
            errors.append(f"port {p.port} out of range")
    return errors


def placeholders(text: str) -> list[str]:
    """Names inside ``{{ ... }}`` markers, in order of appearance."""
    return _PLACEHOLDER_RE.findall(text)


def template_strings(t: Template) -> list[str]:
    """Every string of a pod template that takes part in substitution."""
    out = list(t.annotations.values())
    if t.container is not None:
        out += [t.container.image, *t.container.command, *t.container.args]
    return out


def validate_workflow(wf: Workflow) -> list[str]:
    """Structural checks; dependency cycles are reported by :func:`dag_cycle`."""
    errors = []
    names = [t.name for t in wf.templates]
    for dup in sorted({n for n in names if names.count(n) > 1}):
        errors.append(f"duplicate template name {dup!r}")
    if wf.template(wf.entrypoint) is None:
        errors.append(f"entrypoint {wf.entrypoint!r} names no template")
    for t in wf.templates:
        if t.container is not None and t.dag is not None:
            errors.append(f"template {t.name!r} declares both dag and container")
        if t.container is not None:
            declared = {p.name for p in t.inputs}
            for s in template_strings(t):
                for ph in placeholders(s):
                    if ph.startswith("inputs.parameters."):
                        name = ph[len("inputs.parameters."):]
                        if name not in declared:
                            errors.append(
                                f"template {t.name!r}: placeholder {{{{{ph}}}}} has no declared parameter"
                            )
        if t.dag is None:
            continue
        tasks = [x.name for x in t.dag]
        for dup in sorted({n for n in tasks if tasks.count(n) > 1}):
            errors.append(f"template {t.name!r}: duplicate task {dup!r}")
        for task in t.dag:
            ref = wf.template(task.template)
            if ref is None:
                errors.append(f"task {task.name!r}: unknown template {task.template!r}")
            elif ref.container is None:
                errors.append(f"task {task.name!r}: template {task.template!r} is not a container template")
            for dep in task.dependencies:
                if dep == task.name:
                    errors.append(f"task {task.name!r} depends on itself")
                elif dep not in tasks:
                    errors.append(f"task {task.name!r}: unknown dependency {dep!r}")
    return errors


def dag_cycle(tasks: list[DagTask]) -> list[str] | None:
    """Return one dependency cycle as a closed path of task names, or None."""
    deps = {t.name: [d for d in t.dependencies] for t in tasks}
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(name: str) -> list[str] | None:
        state[name] = 1
        stack.append(name)
        for dep in deps.get(name, ()):
            if dep not in deps:
                continue
            if state.get(dep) == 1:
                return stack[stack.index(dep):] + [dep]
            if dep not in state:
                found = visit(dep)
                if found:
                    return found
        stack.pop()
        state[name] = 2
        return None

    for t in tasks:
        if t.name not in state:
            found = visit(t.name)
            if found:
                return found
    return None


__all__ = [
    "BadQuantity",
    "ContainerSpec",
    "DagTask",
    "HostPathVolume",
    "InputParameter",
    "Node",
    "ObjectMeta",
    "Pod",
    "PodStatus",
    "Resource",
    "Service",
    "ServicePort",
    "StepStatus",
    "Template",
    "VolumeMount",
    "dag_cycle",
    "Workflow",
    "WorkflowStatus",
    "from_dict",
    "load_resources",
    "parse_manifest",
    "to_dict",
    "to_yaml",
    "validate_pod",
    "validate_service",
    "validate_workflow",
]
