"""Probability-bounds connectives.

With ``family="probability"`` a graph's bounds bracket the probability that
each formula is classically true under any distribution over interpretations
consistent with the input sentences.  Lower and upper bounds use different
update functions; the graph-level rules live in :mod:`inference`, this module
exposes them on plain :class:`Bounds`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tape
from .formula import Formula
from .inference import _prob_down, _prob_up
from .semantics import Bounds

KINDS = ("not", "and", "or", "implies")


@dataclass(frozen=True)
class Sentence:
    formula: Formula
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"need 0 <= l <= u <= 1, got ({self.lower}, {self.upper})")


def _pairs(bs: Sequence[Bounds]):
    return [(tape.Tensor(np.array([float(b[0])])), tape.Tensor(np.array([float(b[1])]))) for b in bs]


def _check(kind: str, n: int) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown connective {kind!r}")
    if kind == "not" and n != 1 or kind == "implies" and n != 2 or n < 1:
        raise ValueError(f"wrong operand count {n} for {kind}")


def prob_upward(kind: str, operands: Sequence[Bounds]) -> Bounds:
    """Probability bounds of a connective from its operands' bounds."""
    _check(kind, len(operands))
    if kind == "not":
        b = operands[0]
        return Bounds(1.0 - b[1], 1.0 - b[0])
    lo, hi = _prob_up(kind, _pairs(operands))
    return Bounds(float(lo.value[0]), float(hi.value[0]))


def prob_downward(kind: str, target: int, operands: Sequence[Bounds], output: Bounds) -> Bounds:
    """Probability bounds for operand ``target`` implied by the connective's bounds."""
    _check(kind, len(operands))
    if kind == "not":
        return Bounds(1.0 - output[1], 1.0 - output[0])
    res = _prob_down(kind, _pairs(operands), _pairs([output])[0])[target]
    return Bounds(float(res[0].value[0]), float(res[1].value[0]))
