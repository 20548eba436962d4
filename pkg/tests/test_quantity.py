import pytest
from hypothesis import given, strategies as st

from hpksim.errors import BadQuantity
from hpksim.quantity import cpu, memory, parse_quantity

import oracles


@pytest.mark.parametrize("text, millis", [
    ("1", 1000), ("500m", 500), ("0.5", 500), ("1.5", 1500), ("2", 2000),
    ("100u", 1), ("1n", 1), ("0", 0), ("+3", 3000), ("1e3", 1_000_000), (".25", 250),
])
def test_cpu_millicores(text, millis):
    assert cpu(text).value == millis


@pytest.mark.parametrize("text, nbytes", [
    ("2Gi", 2 * 1024**3), ("128Mi", 128 * 1024**2), ("1k", 1000), ("1Ki", 1024),
    ("8000m", 8), ("1m", 1), ("1G", 10**9), ("1.5Gi", 1610612736), ("1E", 10**18),
    ("1000000", 10**6), ("2e2", 200),
])
def test_memory_bytes(text, nbytes):
    assert memory(text).value == nbytes


def test_integer_input_is_accepted():
    assert cpu(2).value == 2000
    assert memory(1024).value == 1024


@pytest.mark.parametrize("bad", ["", "abc", "1Qi", "-1", "1.2.3", "Gi", "1 Gi", "1ki", "0x10"])
def test_malformed_quantities_raise(bad):
    with pytest.raises(BadQuantity):
        memory(bad)


def test_bool_is_not_a_quantity():
    with pytest.raises(BadQuantity):
        cpu(True)


def test_unknown_kind():
    with pytest.raises(ValueError):
        parse_quantity("1", "gpu")


def test_equality_ignores_spelling():
    assert cpu("1") == cpu("1000m")
    assert memory("1Ki") == memory("1024")


SUFFIXES = ["", "n", "u", "m", "k", "M", "G", "T", "Ki", "Mi", "Gi", "Ti"]


@given(
    whole=st.integers(min_value=0, max_value=10**6),
    frac=st.one_of(st.none(), st.integers(min_value=0, max_value=999)),
    suffix=st.sampled_from(SUFFIXES),
)
def test_parser_agrees_with_oracle(whole, frac, suffix):
    text = f"{whole}" + (f".{frac:03d}" if frac is not None else "") + suffix
    assert cpu(text).value == oracles.cpu_millis(text)
    assert memory(text).value == oracles.memory_bytes(text)


@given(st.integers(min_value=1, max_value=10**9))
def test_millicore_round_trip(m):
    assert cpu(f"{m}m").value == m


@given(st.integers(min_value=0, max_value=2**40), st.sampled_from(["Ki", "Mi", "Gi"]))
def test_binary_suffix_is_exact(n, suffix):
    factor = {"Ki": 1024, "Mi": 1024**2, "Gi": 1024**3}[suffix]
    assert memory(f"{n}{suffix}").value == n * factor
