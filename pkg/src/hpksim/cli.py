"""kubectl-like command line for the engine.

Every invocation loads the engine from the state directory (creating it on
first use), runs one command and saves the state back. Exit status is 0 on
success, 1 for user or validation errors, 2 for engine errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import model
from .controlplane import MUTATED
from .engine import Engine, EngineConfig
from .errors import (
    AdmissionRejected,
    HpkError,
    ManifestError,
    NonQuiescent,
    NotFound,
    NotSubmitted,
    ValidationFailed,
)
from .network import fqdn

EXIT_OK = 0
EXIT_USER = 1
EXIT_ENGINE = 2

DEFAULT_STATE_DIR = ".hpksim"

KIND_ALIASES = {
    "pod": "Pod", "pods": "Pod", "po": "Pod",
    "service": "Service", "services": "Service", "svc": "Service",
    "workflow": "Workflow", "workflows": "Workflow", "wf": "Workflow",
    "node": "Node", "nodes": "Node", "no": "Node",
}

USER_ERRORS = (ManifestError, ValidationFailed, AdmissionRejected, NotFound, NotSubmitted)


class UserError(Exception):
    pass


def _kind(text: str) -> str:
    try:
        return KIND_ALIASES[text.lower()]
    except KeyError:
        raise UserError(f"unknown resource type {text!r}") from None


def _split_name(text: str, namespace: str) -> tuple[str, str]:
    if "/" in text:
        ns, name = text.split("/", 1)
        return ns, name
    return namespace, text


def table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for r in [header, *rows]:
        lines.append("   ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _or_none(value) -> str:
    return "<none>" if value is None or value == "" else str(value)


# ------------------------------------------------------------------ commands

def cmd_apply(engine: Engine, args, out) -> int:
    text = Path(args.file).read_text() if args.file != "-" else sys.stdin.read()
    status = EXIT_OK
    for i, item in enumerate(model.parse_manifest(text), start=1):
        if isinstance(item, ManifestError):
            print(f"error: document {i}: {item}", file=sys.stderr)
            status = EXIT_USER
            continue
        ref = f"{item.kind.lower()}/{item.meta.name}"
        try:
            result = engine.apply(item)
        except AdmissionRejected as exc:
            print(f"{ref} rejected: {exc.reason}", file=sys.stderr)
            status = EXIT_USER
            continue
        except ValidationFailed as exc:
            print(f"{ref} invalid: {exc}", file=sys.stderr)
            status = EXIT_USER
            continue
        if result.admission is not None and result.admission.verdict == MUTATED:
            print(f"{ref} mutated: clusterIP={result.admission.object.cluster_ip}", file=out)
        print(f"{ref} {result.verdict}", file=out)
    return status


def _pod_row(engine: Engine, p: model.Pod) -> list[str]:
    job = engine.job_id(p)
    return [
        p.meta.namespace,
        p.meta.name,
        p.status.phase,
        _or_none(p.status.reason),
        _or_none(p.status.pod_ip),
        _or_none(job),
        str(p.status.restart_count),
    ]


def cmd_get(engine: Engine, args, out) -> int:
    kind = _kind(args.kind)
    if args.name:
        ns, name = _split_name(args.name, args.namespace or "default")
        objs = [engine.store.get(kind, "" if kind == "Node" else ns, name)]
    else:
        objs = engine.store.list(kind, args.namespace if kind != "Node" else None)
    if kind == "Pod":
        out.write(table(
            ["NAMESPACE", "NAME", "PHASE", "REASON", "IP", "JOB", "RESTARTS"],
            [_pod_row(engine, p) for p in objs],
        ))
    elif kind == "Service":
        out.write(table(
            ["NAMESPACE", "NAME", "TYPE", "CLUSTER-IP", "SELECTOR", "PORTS"],
            [[
                s.meta.namespace, s.meta.name, s.type, _or_none(s.cluster_ip),
                _or_none(",".join(f"{k}={v}" for k, v in sorted(s.selector.items()))),
                _or_none(",".join(str(p.port) for p in s.ports)),
            ] for s in objs],
        ))
    elif kind == "Workflow":
        rows = []
        for w in objs:
            done = sum(1 for s in w.status.steps if s.phase == model.SUCCEEDED)
            rows.append([w.meta.namespace, w.meta.name, w.status.phase, f"{done}/{len(w.status.steps)}"])
        out.write(table(["NAMESPACE", "NAME", "PHASE", "STEPS"], rows))
    else:
        out.write(table(
            ["NAME", "CPUS", "MEMORY", "PODS"],
            [[n.meta.name, str(n.cpus), f"{n.memory_mib}Mi",
              str(len(engine.store.list("Pod")))] for n in objs],
        ))
    return EXIT_OK


def _describe_pod(engine: Engine, p: model.Pod) -> list[str]:
    lines = [
        f"Name:           {p.meta.name}",
        f"Namespace:      {p.meta.namespace}",
        f"Node:           {_or_none(p.node_name)}",
        f"Phase:          {p.status.phase}",
        f"Reason:         {_or_none(p.status.reason)}",
        f"Pod IP:         {_or_none(p.status.pod_ip)}",
        f"Job ID:         {_or_none(engine.job_id(p))}",
        f"Restart Count:  {p.status.restart_count}",
        f"Exit Code:      {_or_none(p.status.exit_code)}",
        f"Restart Policy: {p.restart_policy}",
    ]
    if p.active_deadline_seconds is not None:
        lines.append(f"Deadline:       {p.active_deadline_seconds}s")
    lines.append("Labels:" + ("" if p.meta.labels else "         <none>"))
    lines += [f"  {k}={v}" for k, v in sorted(p.meta.labels.items())]
    lines.append("Annotations:" + ("" if p.meta.annotations else "    <none>"))
    lines += [f"  {k}: {v}" for k, v in sorted(p.meta.annotations.items())]
    lines.append("Containers:")
    for c in p.containers:
        lines.append(f"  {c.name}:")
        lines.append(f"    Image:     {c.image}")
        if c.command:
            lines.append(f"    Command:   {' '.join(c.command)}")
        if c.args:
            lines.append(f"    Args:      {' '.join(c.args)}")
        if c.requests:
            lines.append("    Requests:  " + ", ".join(f"{k}={c.requests[k]}" for k in sorted(c.requests)))
        if c.limits:
            lines.append("    Limits:    " + ", ".join(f"{k}={c.limits[k]}" for k in sorted(c.limits)))
        for m in c.volume_mounts:
            lines.append(f"    Mount:     {m.mount_path} from {m.name}" + (" (ro)" if m.read_only else ""))
    if p.volumes:
        lines.append("Volumes:")
        lines += [f"  {v.name}: hostPath {v.host_path}" for v in p.volumes]
    return lines


def _describe_workflow(w: model.Workflow) -> list[str]:
    lines = [
        f"Name:       {w.meta.name}",
        f"Namespace:  {w.meta.namespace}",
        f"Entrypoint: {w.entrypoint}",
        f"Phase:      {w.status.phase}",
        f"Message:    {_or_none(w.status.message)}",
        "Tasks:",
    ]
    lines += [f"  {k}: {v}" for k, v in w.status.tasks.items()]
    lines.append("Steps:")
    rows = [[s.name, _or_none(s.pod_name), s.phase] for s in w.status.steps]
    lines += ["  " + line for line in table(["STEP", "POD", "PHASE"], rows).splitlines()]
    return lines


def _describe_service(engine: Engine, s: model.Service) -> list[str]:
    eps = engine.resolve(s.meta.name, s.meta.namespace) or []
    return [
        f"Name:       {s.meta.name}",
        f"Namespace:  {s.meta.namespace}",
        f"Type:       {s.type}",
        f"Cluster IP: {_or_none(s.cluster_ip)}",
        "Selector:   " + _or_none(",".join(f"{k}={v}" for k, v in sorted(s.selector.items()))),
        "Ports:      " + _or_none(", ".join(
            f"{p.name or '-'} {p.port}->{p.target_port if p.target_port is not None else p.port}"
            for p in s.ports
        )),
        f"DNS:        {fqdn(s.meta.name, s.meta.namespace)}",
        "Endpoints:  " + _or_none(",".join(eps)),
    ]


def _describe_node(engine: Engine, n: model.Node) -> list[str]:
    lines = [
        f"Name:     {n.meta.name}",
        f"Capacity: cpu={n.cpus}, memory={n.memory_mib}Mi",
        "Cluster:",
    ]
    for sn in engine.sim.nodes:
        lines.append(
            f"  {sn.name}: cpu {sn.used_cpus}/{sn.cpus}, memory {sn.used_mem}/{sn.mem_mib}Mi, "
            f"subnet {engine.ipam.leases[sn.name].subnet}"
        )
    return lines


def cmd_describe(engine: Engine, args, out) -> int:
    kind = _kind(args.kind)
    ns, name = _split_name(args.name, args.namespace or "default")
    obj = engine.store.get(kind, "" if kind == "Node" else ns, name)
    if kind == "Pod":
        lines = _describe_pod(engine, obj)
    elif kind == "Workflow":
        lines = _describe_workflow(obj)
    elif kind == "Service":
        lines = _describe_service(engine, obj)
    else:
        lines = _describe_node(engine, obj)
    out.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_delete(engine: Engine, args, out) -> int:
    kind = _kind(args.kind)
    if kind == "Node":
        raise UserError("the virtual node cannot be deleted")
    ns, name = _split_name(args.name, args.namespace or "default")
    engine.delete(kind, ns, name)
    print(f"{kind.lower()}/{name} deleted", file=out)
    return EXIT_OK


def cmd_simulate(engine: Engine, args, out) -> int:
    if args.until is not None:
        events = engine.run_until(args.until)
    else:
        events = engine.run_to_quiescence(args.max_ticks)
    for e in sorted(events, key=lambda e: (e.tick, e.job_id)):
        print(e.line(), file=out)
    state = "quiescent" if engine.quiescent() else "active"
    print(f"# tick {engine.sim.tick}: {len(events)} events, {state}", file=out)
    return EXIT_OK


def cmd_resolve(engine: Engine, args, out) -> int:
    name = args.name
    suffix = ".svc.cluster.local"
    if name.endswith(suffix):
        name = name[: -len(suffix)]
    service, _, namespace = name.partition(".")
    addresses = engine.resolve(service, namespace or "default")
    if addresses is None:
        print(f"NXDOMAIN {fqdn(service, namespace or 'default')}", file=sys.stderr)
        return EXIT_USER
    for a in addresses:
        print(a, file=out)
    return EXIT_OK


def cmd_export_script(engine: Engine, args, out) -> int:
    ns, name = _split_name(args.pod, args.namespace or "default")
    engine.store.get("Pod", ns, name)
    text = engine.script(ns, name)
    path = Path(args.state_dir) / "scripts" / f"{ns}.{name}.sh"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode())
    print(path, file=out)
    return EXIT_OK


def cmd_trace(engine: Engine, args, out) -> int:
    out.write(engine.trace())
    return EXIT_OK


COMMANDS = {
    "apply": cmd_apply,
    "get": cmd_get,
    "describe": cmd_describe,
    "delete": cmd_delete,
    "simulate": cmd_simulate,
    "resolve": cmd_resolve,
    "export-script": cmd_export_script,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hpksim", description=__doc__.splitlines()[0])
    p.add_argument("--state-dir", default=DEFAULT_STATE_DIR,
                   help="engine state directory (HPK_STATE_DIR takes precedence)")
    p.add_argument("--config", help="YAML config with clusterNodes and behaviors")
    p.add_argument("-n", "--namespace", help="namespace (default: all for get, 'default' otherwise)")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("apply", help="create or update objects from a manifest")
    a.add_argument("-f", "--file", required=True)

    g = sub.add_parser("get", help="list objects")
    g.add_argument("kind")
    g.add_argument("name", nargs="?")

    d = sub.add_parser("describe", help="show one object in detail")
    d.add_argument("kind")
    d.add_argument("name")

    rm = sub.add_parser("delete", help="delete an object")
    rm.add_argument("kind")
    rm.add_argument("name")

    s = sub.add_parser("simulate", help="advance the simulated cluster")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--until", type=int, metavar="TICK")
    mode.add_argument("--to-quiescence", action="store_true", default=True)
    s.add_argument("--max-ticks", type=int, help="tick bound for --to-quiescence")

    r = sub.add_parser("resolve", help="resolve NAME.NAMESPACE to pod addresses")
    r.add_argument("name")

    e = sub.add_parser("export-script", help="write a pod's submitted batch script")
    e.add_argument("pod")

    sub.add_parser("trace", help="print the full simulator event trace")
    return p


def _open_engine(state_dir: Path, config_path: str | None) -> Engine:
    config = EngineConfig.from_file(config_path) if config_path else None
    if Engine.exists(state_dir):
        engine = Engine.load(state_dir)
        if config is not None and config.to_dict() != engine.config.to_dict():
            raise UserError(f"{state_dir} was initialized with a different config")
        return engine
    return Engine(config)


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    args.state_dir = os.environ.get("HPK_STATE_DIR") or args.state_dir
    state_dir = Path(args.state_dir)
    try:
        engine = _open_engine(state_dir, args.config)
        status = COMMANDS[args.command](engine, args, out)
        engine.save(state_dir)
        return status
    except (UserError, *USER_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except NonQuiescent as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (HpkError, ValueError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
