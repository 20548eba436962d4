"""Kubernetes resource quantities.

CPU quantities canonicalize to millicores, memory quantities to bytes. The
grammar is the usual decimal/binary-suffix one::

    quantity := ["+"] number (binarySI | decimalSI | exponent)?
    binarySI := Ki | Mi | Gi | Ti | Pi | Ei
    decimalSI := n | u | m | k | M | G | T | P | E
    exponent := (e | E) [+-] digits

Fractional results are rounded up, so ``"8000m"`` of memory is 8 bytes and
``"1m"`` of memory is 1 byte.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import BadQuantity

CPU = "cpu"
MEMORY = "memory"

_BINARY = {"Ki": 2**10, "Mi": 2**20, "Gi": 2**30, "Ti": 2**40, "Pi": 2**50, "Ei": 2**60}
_DECIMAL = {
    "n": Fraction(1, 10**9),
    "u": Fraction(1, 10**6),
    "m": Fraction(1, 10**3),
    "": Fraction(1),
    "k": Fraction(10**3),
    "M": Fraction(10**6),
    "G": Fraction(10**9),
    "T": Fraction(10**12),
    "P": Fraction(10**15),
    "E": Fraction(10**18),
}

_QUANTITY_RE = re.compile(
    r"^\+?(?P<num>\d+(?:\.\d*)?|\.\d+)"
    r"(?:(?P<exp>[eE][+-]?\d+)|(?P<suffix>Ki|Mi|Gi|Ti|Pi|Ei|[numkMGTPE])?)$"
)


@dataclass(frozen=True)
class Quantity:
    """A parsed quantity. Equality ignores the original spelling."""

    value: int
    kind: str
    text: str = field(compare=False)

    def __str__(self) -> str:
        return self.text


def _amount(text: str) -> Fraction:
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise BadQuantity(text)
    amount = Fraction(m.group("num"))
    if m.group("exp"):
        amount *= Fraction(10) ** int(m.group("exp")[1:])
    else:
        suffix = m.group("suffix") or ""
        amount *= _BINARY[suffix] if suffix in _BINARY else _DECIMAL[suffix]
    return amount


def parse_quantity(text: str | int | float, kind: str) -> Quantity:
    if kind not in (CPU, MEMORY):
        raise ValueError(f"unknown resource kind {kind!r}")
    if isinstance(text, bool):
        raise BadQuantity(str(text))
    if isinstance(text, (int, float)):
        text = str(text)
    if not isinstance(text, str) or not text:
        raise BadQuantity(str(text))
    amount = _amount(text)
    if kind == CPU:
        amount *= 1000
    return Quantity(math.ceil(amount), kind, text)


def cpu(text: str) -> Quantity:
    return parse_quantity(text, CPU)


def memory(text: str) -> Quantity:
    return parse_quantity(text, MEMORY)
