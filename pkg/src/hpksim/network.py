"""Pod address management and headless-service DNS.

Each simulated node leases one /24 out of 10.244.0.0/16, in node order.
Within a subnet ``.0`` and ``.1`` (network and gateway) are reserved and
``.255`` is broadcast, so pods get ``.2`` to ``.254``, lowest free first.

Service resolution is computed from the live store on every call.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field

from .errors import AlreadyAllocated, NotAllocated, SubnetExhausted
from .model import RUNNING, Pod, Service

CLUSTER_CIDR = ipaddress.ip_network("10.244.0.0/16")
FIRST_HOST = 2
LAST_HOST = 254

NXDOMAIN = None


@dataclass
class SubnetLease:
    node: str
    subnet: ipaddress.IPv4Network
    leased: dict[int, str] = field(default_factory=dict)  # host offset -> pod key

    def lowest_free(self) -> int | None:
        for offset in range(FIRST_HOST, LAST_HOST + 1):
            if offset not in self.leased:
                return offset
        return None

    def address(self, offset: int) -> str:
        return str(self.subnet.network_address + offset)


class Ipam:
    def __init__(self, node_names: list[str]):
        subnets = CLUSTER_CIDR.subnets(new_prefix=24)
        if len(node_names) > 256:
            raise ValueError("at most 256 nodes fit in the cluster CIDR")
        self.leases = {name: SubnetLease(name, next(subnets)) for name in node_names}
        self._by_pod: dict[str, tuple[str, int]] = {}

    def allocate(self, pod_key: str, node: str) -> str:
        if pod_key in self._by_pod:
            raise AlreadyAllocated(f"{pod_key} already holds {self.address_of(pod_key)}")
        lease = self.leases[node]
        offset = lease.lowest_free()
        if offset is None:
            raise SubnetExhausted(f"subnet {lease.subnet} of {node} is full")
        lease.leased[offset] = pod_key
        self._by_pod[pod_key] = (node, offset)
        return lease.address(offset)

    def release(self, pod_key: str) -> None:
        try:
            node, offset = self._by_pod.pop(pod_key)
        except KeyError:
            raise NotAllocated(f"{pod_key} holds no address") from None
        del self.leases[node].leased[offset]

    def address_of(self, pod_key: str) -> str | None:
        if pod_key not in self._by_pod:
            return None
        node, offset = self._by_pod[pod_key]
        return self.leases[node].address(offset)

    def has_free(self, node: str) -> bool:
        return self.leases[node].lowest_free() is not None

    def allocations(self) -> dict[str, str]:
        return {k: self.address_of(k) for k in sorted(self._by_pod)}

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.leases),
            "leases": {k: list(v) for k, v in sorted(self._by_pod.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> Ipam:
        ipam = cls(d["nodes"])
        for pod_key, (node, offset) in d["leases"].items():
            ipam.leases[node].leased[offset] = pod_key
            ipam._by_pod[pod_key] = (node, offset)
        return ipam


def fqdn(service: str, namespace: str) -> str:
    return f"{service}.{namespace}.svc.cluster.local"


def selects(selector: dict[str, str], pod: Pod) -> bool:
    return bool(selector) and all(pod.meta.labels.get(k) == v for k, v in selector.items())


def endpoints(service: Service, pods: list[Pod]) -> list[str]:
    ips = [
        p.status.pod_ip
        for p in pods
        if p.meta.namespace == service.meta.namespace
        and p.status.phase == RUNNING
        and p.status.pod_ip
        and selects(service.selector, p)
    ]
    return sorted(ips, key=ipaddress.ip_address)


def resolve(store, name: str, namespace: str) -> list[str] | None:
    """Addresses of the Running pods behind a headless service, or NXDOMAIN (None)."""
    svc = store.find("Service", namespace, name)
    if svc is None:
        return NXDOMAIN
    return endpoints(svc, store.list("Pod", namespace))
