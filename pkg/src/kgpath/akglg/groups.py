"""The three one-dimensional Lie groups used as coordinates of the product group."""
from __future__ import annotations

import numpy as np


class GroupInstance:
    """A base group ``G`` with its operation, identity, inverse and similarity.

    All methods act coordinate-wise on numpy arrays, so the same object also
    describes the product group ``G^n``.
    """

    kind: str = ""
    dtype: type = np.float64

    def op(self, x, y):
        raise NotImplementedError

    def identity(self, shape=()) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, x):
        raise NotImplementedError

    def similarity(self, x, y):
        raise NotImplementedError

    def fold(self, points: np.ndarray, axis: int = 0) -> np.ndarray:
        """Group-sum of ``points`` along ``axis`` (left to right)."""
        points = np.moveaxis(np.asarray(points), axis, 0)
        acc = points[0].copy()
        for p in points[1:]:
            acc = self.op(acc, p)
        return acc

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupInstance) and other.kind == self.kind

    def __hash__(self) -> int:
        return hash(self.kind)


class SignGroup(GroupInstance):
    """``{-1, 1}`` under multiplication; similarity is +1 on equality, -1 otherwise."""

    kind = "sign"

    def op(self, x, y):
        return np.multiply(x, y)

    def identity(self, shape=()):
        return np.ones(shape)

    def inverse(self, x):
        return np.asarray(x, dtype=np.float64).copy()

    def similarity(self, x, y):
        return np.where(np.asarray(x) == np.asarray(y), 1.0, -1.0)


class CircleGroup(GroupInstance):
    """Unit complex numbers under multiplication; ``d(x, y) = Re(x * conj(y))``."""

    kind = "circle"
    dtype = np.complex128

    def op(self, x, y):
        return np.multiply(x, y)

    def identity(self, shape=()):
        return np.ones(shape, dtype=np.complex128)

    def inverse(self, x):
        return np.conj(x)

    def similarity(self, x, y):
        return np.real(np.multiply(x, np.conj(y)))


class LineGroup(GroupInstance):
    """The reals under addition; ``d(x, y) = -(x - y)^2``."""

    kind = "line"

    def op(self, x, y):
        return np.add(x, y)

    def identity(self, shape=()):
        return np.zeros(shape)

    def inverse(self, x):
        return np.negative(x)

    def similarity(self, x, y):
        d = np.subtract(x, y)
        return -(d * d)


SIGN = SignGroup()
CIRCLE = CircleGroup()
LINE = LineGroup()

_GROUPS = {g.kind: g for g in (SIGN, CIRCLE, LINE)}


def get_group(kind: str) -> GroupInstance:
    try:
        return _GROUPS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown group {kind!r}; expected one of {sorted(_GROUPS)}") from None
