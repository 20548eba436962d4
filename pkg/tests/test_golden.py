"""Exported scripts must match the committed golden files byte for byte.

After an intended rendering change run ``python3 tests/regen_golden.py`` and
review the diff.
"""

import pytest

from hpksim.slurm import script_directives

import oracles
from helpers import POD_FIXTURES, exported_script, golden_path, load_one


def test_corpus_size():
    assert len(POD_FIXTURES) >= 10


@pytest.mark.parametrize("path", POD_FIXTURES, ids=lambda p: p.stem)
def test_matches_golden(path):
    assert exported_script(path).encode() == golden_path(path).read_bytes()


@pytest.mark.parametrize("path", POD_FIXTURES, ids=lambda p: p.stem)
def test_containers_appear_once(path):
    p = load_one(path)
    text = golden_path(path).read_text()
    for c in p.containers:
        assert text.count(f'"$POD_DIR/{c.name}.out"') == 1
        assert text.count(f'echo "{c.name} $RC"') == 1
        assert text.count(f"CHILD_{p.containers.index(c)}=$!") == 1


@pytest.mark.parametrize("path", POD_FIXTURES, ids=lambda p: p.stem)
def test_generated_directives_match_oracle(path):
    p = load_one(path)
    lines = [l for l in golden_path(path).read_text().splitlines() if l.startswith("#SBATCH")]
    # the generated block ends with --error; pass-through flags follow it
    end = next(i for i, l in enumerate(lines) if l.startswith("#SBATCH --error="))
    generated = script_directives("\n".join(lines[: end + 1]))
    cpus = [str(c.requests["cpu"]) for c in p.containers if "cpu" in c.requests]
    mems = [str(c.requests["memory"]) for c in p.containers if "memory" in c.requests]
    assert generated["--ntasks"] == "1"
    assert int(generated["--cpus-per-task"]) == oracles.expected_cpus_per_task(cpus)
    mem = oracles.expected_mem_mib(mems)
    assert generated.get("--mem") == (None if mem is None else f"{mem}M")
    if p.active_deadline_seconds is None:
        assert "--time" not in generated
    else:
        assert int(generated["--time"]) == -(-p.active_deadline_seconds // 60)


@pytest.mark.parametrize("path", POD_FIXTURES, ids=lambda p: p.stem)
def test_mounted_volumes_are_bound(path):
    p = load_one(path)
    text = golden_path(path).read_text()
    hosts = {v.name: v.host_path for v in p.volumes}
    for c in p.containers:
        for m in c.volume_mounts:
            assert f"--bind {hosts[m.name]}:{m.mount_path}" in text
