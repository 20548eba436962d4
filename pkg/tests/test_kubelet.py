import pytest

from hpksim import slurm
from hpksim.controlplane import NODE_NAME
from hpksim.kubelet import (
    PHASE_TABLE,
    RESTART_CAP,
    BehaviorRule,
    Behaviors,
    handle_restart_policy,
    job_demand,
    sync_status,
)
from hpksim.model import FAILED, PENDING, RUNNING, SUCCEEDED
from hpksim.slurm import Behavior, Demand
from hpksim.translator import FLAGS_ANNOTATION

from helpers import engine, pod


def test_phase_table_is_total():
    assert set(PHASE_TABLE) == set(slurm.STATES)


def test_restart_policy():
    assert handle_restart_policy("OnFailure", slurm.FAILED, 0) == "resubmit"
    assert handle_restart_policy("OnFailure", slurm.FAILED, RESTART_CAP) == "finalize"
    assert handle_restart_policy("OnFailure", slurm.TIMEOUT, 0) == "finalize"
    assert handle_restart_policy("Never", slurm.FAILED, 0) == "finalize"
    assert handle_restart_policy("OnFailure", slurm.COMPLETED, 0) == "finalize"


def test_behavior_rules():
    b = Behaviors([BehaviorRule("ns/a*", 4, (1, 0)), BehaviorRule("b", 2)], Behavior(9, 0))
    assert b.for_pod(pod("abc", namespace="ns")) == Behavior(4, 1)
    assert b.for_pod(pod("abc", namespace="ns"), attempt=5) == Behavior(4, 0)
    assert b.for_pod(pod("abc")) == Behavior(9, 0)
    assert b.for_pod(pod("b")) == Behavior(2, 0)


def test_job_demand_uses_passthrough():
    p = pod("a", cpu="1", memory="1Gi", annotations={FLAGS_ANNOTATION: "--ntasks=4 -c 2 --time=5"})
    assert job_demand(p) == Demand(8, 1024, 5)


def test_pod_goes_pending_running_succeeded():
    e = engine(rules=[("a", 2, [0])])
    e.apply(pod("a"))
    p = e.pod("default", "a")
    assert p.node_name == NODE_NAME and p.status.phase == PENDING and p.status.pod_ip is None
    e.step(1)
    p = e.pod("default", "a")
    assert p.status.phase == RUNNING and p.status.pod_ip == "10.244.0.2"
    e.step(2)
    p = e.pod("default", "a")
    assert p.status.phase == SUCCEEDED and p.status.exit_code == 0
    assert p.status.pod_ip == "10.244.0.2"  # kept for inspection
    assert e.ipam.allocations() == {}


def test_failure_reason():
    e = engine(rules=[("a", 1, [2])])
    e.apply(pod("a"))
    e.run_to_quiescence()
    p = e.pod("default", "a")
    assert (p.status.phase, p.status.reason, p.status.exit_code) == (FAILED, "Error", 2)


def test_deadline_exceeded():
    e = engine(rules=[("a", 5, [0])])
    e.apply(pod("a", deadline=60))
    e.run_to_quiescence()
    p = e.pod("default", "a")
    assert (p.status.phase, p.status.reason) == (FAILED, "DeadlineExceeded")


def test_on_failure_restarts_until_success():
    e = engine(rules=[("a", 1, [1, 1, 0])])
    e.apply(pod("a", restart_policy="OnFailure"))
    e.run_to_quiescence()
    p = e.pod("default", "a")
    assert p.status.phase == SUCCEEDED and p.status.restart_count == 2
    assert len(e.sim.jobs()) == 3


def test_on_failure_gives_up_after_cap():
    e = engine(rules=[("a", 1, [1])])
    e.apply(pod("a", restart_policy="OnFailure"))
    e.run_to_quiescence()
    p = e.pod("default", "a")
    assert p.status.phase == FAILED and p.status.restart_count == RESTART_CAP
    assert len(e.sim.jobs()) == RESTART_CAP + 1


def test_restart_keeps_ip_and_running_phase():
    e = engine(rules=[("a", 1, [1, 0])])
    e.apply(pod("a", restart_policy="OnFailure"))
    e.step(2)  # first attempt failed at tick 2, resubmitted
    p = e.pod("default", "a")
    assert p.status.phase == RUNNING and p.status.restart_count == 1
    assert e.ipam.address_of("default/a") == "10.244.0.2"


def test_delete_cancels_and_releases():
    e = engine(rules=[("a", 10, [0])])
    e.apply(pod("a"))
    e.step(1)
    job = e.job_id(e.pod("default", "a"))
    e.delete("Pod", "default", "a")
    assert e.sim.query(job).state == slurm.CANCELLED
    assert e.ipam.allocations() == {}
    assert "cancel default/a job=1" in e.kubelet.log


def test_unschedulable_pod_fails():
    e = engine(nodes=[("n0", 2, 1024)])
    e.apply(pod("big", cpu="4"))
    p = e.pod("default", "big")
    assert (p.status.phase, p.status.reason) == (FAILED, "Unschedulable")
    assert e.sim.jobs() == []


def test_bad_flags_fail_pod():
    e = engine()
    e.apply(pod("a", annotations={FLAGS_ANNOTATION: '--x="'}))
    assert e.pod("default", "a").status.reason == "InvalidSlurmFlags"


def test_subnet_exhaustion_fails_pod():
    e = engine(nodes=[("n0", 1000, 10**6)], rules=[("*", 50, [0])])
    for i in range(254):
        e.apply(pod(f"p{i}"))
    assert e.pod("default", "p252").status.phase == PENDING
    assert e.pod("default", "p253").status.reason == "SubnetExhausted"


def test_status_only_updates_do_not_resubmit():
    e = engine(rules=[("a", 5, [0])])
    e.apply(pod("a"))
    e.step(1)
    p = e.pod("default", "a")
    p.meta.labels["touched"] = "1"
    e.put(p)
    assert len(e.sim.jobs()) == 1


def test_bijection_holds_throughout():
    e = engine(nodes=[("n0", 2, 4096)], rules=[("*", 2, [0])])
    for i in range(5):
        e.apply(pod(f"p{i}", cpu="1"))
    while not e.quiescent():
        assert e.kubelet.check_bijection() == []
        e.step(1)
    assert e.kubelet.check_bijection() == []


@pytest.mark.parametrize("state", slurm.STATES)
def test_sync_status_without_exit_code(state):
    assert sync_status(state) == PHASE_TABLE[state]


def test_replayed_event_does_not_resubmit():
    e = engine(rules=[("a", 5, [0])])
    e.apply(pod("a"))
    events = [ev for ev in e.store.watch("pods", 0).drain() if ev.object.body.node_name == NODE_NAME]
    for ev in events + events:
        assert e.kubelet.reconcile(ev) == []
    assert len(e.sim.jobs()) == 1


def test_phase_follows_last_job_state():
    e = engine(nodes=[("n0", 1, 1024)], rules=[("*", 2, [0])])
    for name in "abc":
        e.apply(pod(name, cpu="1"))
    while not e.quiescent():
        e.step(1)
        for p in e.store.list("Pod"):
            job = e.sim.query(e.job_id(p))
            assert p.status.phase == sync_status(job.state, job.exit_code)[0]
