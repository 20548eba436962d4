"""Shared builders for the test suite."""

from pathlib import Path

from hpksim import model
from hpksim.engine import Engine, EngineConfig
from hpksim.kubelet import BehaviorRule, Behaviors
from hpksim.slurm import Behavior, NodeConfig

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
POD_FIXTURES = sorted((FIXTURES / "pods").glob("*.yaml"))
GOLDEN = TESTS / "golden"


def load_one(path):
    (resource,) = model.load_resources(Path(path).read_text())
    return resource


def pod(name="p", namespace="default", cpu=None, memory=None, labels=None,
        annotations=None, restart_policy="Never", deadline=None, containers=1):
    requests = {}
    if cpu is not None:
        requests["cpu"] = cpu
    if memory is not None:
        requests["memory"] = memory
    doc = {
        "apiVersion": "v1",
        "kind": "Pod",
        "metadata": {
            "name": name,
            "namespace": namespace,
            "labels": labels or {},
            "annotations": annotations or {},
        },
        "spec": {
            "restartPolicy": restart_policy,
            "containers": [
                {"name": f"c{i}", "image": "busybox", "command": ["true"],
                 "resources": {"requests": requests}}
                for i in range(containers)
            ],
        },
    }
    if deadline is not None:
        doc["spec"]["activeDeadlineSeconds"] = deadline
    return model.from_dict(doc)


def service(name="svc", namespace="default", selector=None, cluster_ip=None, type_=None):
    spec = {"selector": selector if selector is not None else {"app": name},
            "ports": [{"port": 80}]}
    if cluster_ip is not None:
        spec["clusterIP"] = cluster_ip
    if type_ is not None:
        spec["type"] = type_
    return model.from_dict({
        "apiVersion": "v1", "kind": "Service",
        "metadata": {"name": name, "namespace": namespace}, "spec": spec,
    })


def engine(nodes=None, rules=(), default=Behavior(3, 0), max_ticks=10000):
    cfg = EngineConfig(
        cluster_nodes=[NodeConfig(*n) for n in nodes] if nodes else EngineConfig().cluster_nodes,
        behaviors=Behaviors([BehaviorRule(p, r, tuple(c)) for p, r, c in rules], default),
        max_ticks=max_ticks,
    )
    return Engine(cfg)


def exported_script(path):
    """Script for a fixture pod applied to a fresh default engine."""
    e = Engine()
    p = load_one(path)
    e.apply(p)
    return e.script(p.meta.namespace, p.meta.name)


def golden_path(path):
    return GOLDEN / (Path(path).stem + ".sh")


def job_script(cpus, mem=0, limit=None):
    lines = ["#!/bin/bash", "#SBATCH --ntasks=1", f"#SBATCH --cpus-per-task={cpus}"]
    if mem:
        lines.append(f"#SBATCH --mem={mem}M")
    if limit:
        lines.append(f"#SBATCH --time={limit}")
    return "\n".join(lines + ["true"]) + "\n"


def run_sim_against(nodes, jobs):
    """Drive a SlurmSim with oracle-style job dicts; return (sim, job ids)."""
    from hpksim.slurm import Demand, SlurmSim

    sim = SlurmSim([NodeConfig(f"n{i}", c, m) for i, (c, m) in enumerate(nodes)])
    ids = []
    for j in sorted(jobs, key=lambda j: j["submit"]):
        while sim.tick < j["submit"]:
            sim.step()
        ids.append(sim.submit(
            job_script(j["cpus"], j["mem"], j.get("limit")),
            Demand(j["cpus"], j["mem"], j.get("limit")),
            Behavior(j["run"], j.get("exit", 0)),
        ))
    while sim.active_jobs():
        sim.step()
    return sim, ids





def fcfs_cases():
    from hypothesis import strategies as st

    nodes = st.lists(
        st.tuples(st.integers(1, 8), st.integers(1, 4096)), min_size=1, max_size=2
    )

    @st.composite
    def case(draw):
        ns = draw(nodes)
        n = draw(st.integers(0, 6))
        jobs = []
        submit = 0
        for _ in range(n):
            submit += draw(st.integers(0, 3))
            # keep every job placeable on at least one node
            node = draw(st.sampled_from(ns))
            jobs.append({
                "submit": submit,
                "cpus": draw(st.integers(1, node[0])),
                "mem": draw(st.integers(0, node[1])),
                "run": draw(st.integers(1, 6)),
                "limit": draw(st.one_of(st.none(), st.integers(1, 6))),
            })
        return ns, jobs

    return case()
