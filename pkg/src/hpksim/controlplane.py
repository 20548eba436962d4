"""Versioned object store with watches, service admission and a pass-through binder.

This stands in for the API server, etcd and scheduler. All writes go through
:meth:`Store.put` (or :meth:`Store.delete`), which validates, runs admission,
assigns a store-wide resource version and appends a watch event. Watches may
be drained from other threads; writers are serialized by one lock.
"""

from __future__ import annotations

import copy
import json
import threading
from dataclasses import dataclass, replace
from typing import Iterator

from . import model
from .errors import AdmissionRejected, CycleDetected, NotFound, ValidationFailed
from .model import HEADLESS, PLURALS, Pod, Resource, Service, Workflow

NODE_NAME = "hpk-node"

ADDED = "ADDED"
MODIFIED = "MODIFIED"
DELETED = "DELETED"

ALLOWED = "ALLOWED"
MUTATED = "MUTATED"
REJECTED = "REJECTED"

Key = tuple[str, str, str]


@dataclass(frozen=True)
class StoredObject:
    key: Key
    resource_version: int
    body: Resource


@dataclass(frozen=True)
class WatchEvent:
    type: str
    object: StoredObject


@dataclass(frozen=True)
class AdmissionOutcome:
    verdict: str
    object: Resource
    reason: str | None = None


@dataclass(frozen=True)
class ApplyResult:
    key: Key
    verdict: str  # created | configured | unchanged
    resource_version: int
    admission: AdmissionOutcome | None = None


def admit_service(svc: Service) -> AdmissionOutcome:
    """Headless-only admission.

    Manifests that do not care about a virtual IP are rewritten to headless;
    manifests that explicitly ask for one, or for a node-level port or load
    balancer, are refused.
    """
    if svc.type in ("NodePort", "LoadBalancer"):
        return AdmissionOutcome(
            REJECTED, svc, f"service type {svc.type} is not supported: no node-level proxy"
        )
    if svc.cluster_ip == HEADLESS:
        return AdmissionOutcome(ALLOWED, svc)
    if svc.cluster_ip is None or svc.cluster_ip == "":
        return AdmissionOutcome(MUTATED, replace(svc, cluster_ip=HEADLESS))
    return AdmissionOutcome(
        REJECTED, svc, f"clusterIP {svc.cluster_ip} requested: virtual service IPs are disabled"
    )


def admit(resource: Resource) -> AdmissionOutcome:
    if isinstance(resource, Service):
        return admit_service(resource)
    return AdmissionOutcome(ALLOWED, resource)


def validate(resource: Resource) -> None:
    if isinstance(resource, Pod):
        errors = model.validate_pod(resource)
    elif isinstance(resource, Service):
        errors = model.validate_service(resource)
    elif isinstance(resource, Workflow):
        errors = model.validate_workflow(resource)
        if not errors:
            for t in resource.templates:
                cycle = model.dag_cycle(t.dag) if t.dag else None
                if cycle:
                    raise CycleDetected(cycle)
    else:
        errors = []
    if errors:
        raise ValidationFailed(errors)


def _matches(kind: str, prefix: str) -> bool:
    return PLURALS[kind].startswith(prefix) or kind.lower().startswith(prefix.lower())


class Watch:
    """Cursor over the store's event log. Never misses or repeats an event."""

    def __init__(self, store: Store, prefix: str, from_version: int):
        self._store = store
        self._prefix = prefix
        self._from = from_version
        self._pos = store._first_index_after(from_version)

    def drain(self) -> list[WatchEvent]:
        """Return every matching event not yet delivered, without blocking."""
        with self._store._cond:
            events = self._store._log[self._pos:]
            self._pos = len(self._store._log)
        return [e for e in events if _matches(e.object.key[0], self._prefix)]

    def next(self, timeout: float | None = None) -> WatchEvent | None:
        """Block until the next matching event arrives or ``timeout`` expires."""
        with self._store._cond:
            while True:
                while self._pos < len(self._store._log):
                    e = self._store._log[self._pos]
                    self._pos += 1
                    if _matches(e.object.key[0], self._prefix):
                        return e
                if not self._store._cond.wait(timeout):
                    return None

    def __iter__(self) -> Iterator[WatchEvent]:
        return iter(self.drain())


class Store:
    def __init__(self) -> None:
        self._objects: dict[Key, StoredObject] = {}
        self._log: list[WatchEvent] = []
        self._version = 0
        self._cond = threading.Condition(threading.RLock())

    @property
    def version(self) -> int:
        return self._version

    # -- writes

    def put(self, resource: Resource) -> int:
        """Validate, admit and store ``resource``; return its new version."""
        return self._put(resource)[0]

    def _put(self, resource: Resource) -> tuple[int, AdmissionOutcome]:
        validate(resource)
        outcome = admit(resource)
        if outcome.verdict == REJECTED:
            raise AdmissionRejected(outcome.reason or "rejected")
        body = copy.deepcopy(outcome.object)
        with self._cond:
            self._version += 1
            key = body.key
            etype = MODIFIED if key in self._objects else ADDED
            obj = StoredObject(key, self._version, body)
            self._objects[key] = obj
            self._emit(etype, obj)
            return self._version, outcome

    def delete(self, kind: str, namespace: str, name: str) -> int:
        key = (kind, namespace, name)
        with self._cond:
            if key not in self._objects:
                raise NotFound(f"{kind.lower()}/{name} not found")
            old = self._objects.pop(key)
            self._version += 1
            self._emit(DELETED, StoredObject(key, self._version, old.body))
            return self._version

    def apply(self, resource: Resource) -> ApplyResult:
        """Create or update from a user manifest, keeping controller-owned state.

        Status and the bound node name are preserved from the stored object.
        Pod and workflow specs are immutable once created.
        """
        outcome = admit(resource)
        if outcome.verdict == REJECTED:
            raise AdmissionRejected(outcome.reason or "rejected")
        desired = outcome.object
        with self._cond:
            current = self._objects.get(desired.key)
            if current is None:
                version, _ = self._put(resource)
                return ApplyResult(desired.key, "created", version, outcome)
            old = current.body
            if isinstance(desired, (Pod, Workflow)):
                desired = replace(desired, status=copy.deepcopy(old.status))
            if isinstance(desired, Pod) and desired.node_name is None:
                desired = replace(desired, node_name=old.node_name)
            if desired == old:
                return ApplyResult(desired.key, "unchanged", current.resource_version, outcome)
            if isinstance(desired, (Pod, Workflow)):
                raise ValidationFailed([f"{desired.kind.lower()} spec is immutable"])
            version, _ = self._put(desired)
            return ApplyResult(desired.key, "configured", version, outcome)

    def _emit(self, etype: str, obj: StoredObject) -> None:
        self._log.append(WatchEvent(etype, obj))
        self._cond.notify_all()

    # -- reads

    def get(self, kind: str, namespace: str, name: str) -> Resource:
        return copy.deepcopy(self.get_object(kind, namespace, name).body)

    def get_object(self, kind: str, namespace: str, name: str) -> StoredObject:
        with self._cond:
            obj = self._objects.get((kind, namespace, name))
        if obj is None:
            raise NotFound(f"{kind.lower()}/{name} not found")
        return obj

    def find(self, kind: str, namespace: str, name: str) -> Resource | None:
        try:
            return self.get(kind, namespace, name)
        except NotFound:
            return None

    def list(self, kind: str, namespace: str | None = None) -> list[Resource]:
        with self._cond:
            objs = [o for k, o in self._objects.items() if k[0] == kind]
        objs.sort(key=lambda o: o.key)
        return [
            copy.deepcopy(o.body)
            for o in objs
            if namespace is None or o.key[1] == namespace
        ]

    def objects(self) -> list[StoredObject]:
        with self._cond:
            return sorted(self._objects.values(), key=lambda o: o.key)

    def watch(self, kind_prefix: str = "", from_version: int = 0) -> Watch:
        if from_version < 0:
            raise ValueError("fromVersion must be >= 0")
        return Watch(self, kind_prefix, from_version)

    def _first_index_after(self, version: int) -> int:
        with self._cond:
            for i, e in enumerate(self._log):
                if e.object.resource_version > version:
                    return i
            return len(self._log)

    # -- scheduler

    def bind_pending_pods(self) -> list[tuple[Key, str]]:
        """Bind every unbound pod to the single virtual node."""
        bindings = []
        unbound = [o.body for o in self.objects() if o.key[0] == "Pod" and not o.body.node_name]
        for pod in unbound:
            self.put(replace(pod, node_name=NODE_NAME))
            bindings.append((pod.key, NODE_NAME))
        return bindings

    # -- persistence

    def dump(self) -> dict[str, list[dict]]:
        """Snapshot as ``{kind: [object, ...]}``; each object carries its resourceVersion."""
        out: dict[str, list[dict]] = {}
        for obj in self.objects():
            d = model.to_dict(obj.body)
            d["metadata"]["resourceVersion"] = obj.resource_version
            out.setdefault(obj.key[0], []).append(d)
        return out

    def dumps(self) -> str:
        return json.dumps(self.dump(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, dump: dict[str, list[dict]], version: int = 0) -> Store:
        """Rebuild a store from :meth:`dump` output.

        The event log is reconstructed as one ADDED event per object, so a
        watch from version 0 replays the loaded contents.
        """
        store = cls()
        objs = []
        for items in dump.values():
            for d in items:
                d = copy.deepcopy(d)
                rv = int(d["metadata"].pop("resourceVersion"))
                body = model.from_dict(d, allow_node=True)
                objs.append(StoredObject(body.key, rv, body))
        objs.sort(key=lambda o: o.resource_version)
        for obj in objs:
            store._objects[obj.key] = obj
            store._log.append(WatchEvent(ADDED, obj))
        store._version = max([version] + [o.resource_version for o in objs])
        return store

