"""Ordered, named collections of parameter arrays.

A :class:`ParamSet` is the unit that moves between clients and the
aggregation server: model weights, gradients and Adam moments all use it.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Iterable, Iterator

import numpy as np

from .exceptions import AlignmentError, NumericDomainError


class ParamSet:
    """Ordered mapping ``name -> ndarray`` with a fixed layout.

    Entry order is part of the layout. Two sets are *aligned* when their
    ``(name, shape)`` sequences are identical; every arithmetic helper
    checks this before touching values.

    Parameters
    ----------
    entries : iterable of (str, array-like)
        Name and values for each entry, in order.
    dtype : numpy dtype, default float64
    """

    __slots__ = ("_names", "_arrays")

    def __init__(self, entries: Iterable[tuple[str, np.ndarray]] = (), dtype=np.float64):
        names = []
        arrays = {}
        for name, values in entries:
            if not isinstance(name, str) or not name:
                raise AlignmentError(f"entry names must be non-empty strings, got {name!r}")
            if name in arrays:
                raise AlignmentError(f"duplicate entry name {name!r}")
            arr = np.array(values, dtype=dtype, copy=True)
            arr.setflags(write=False)
            names.append(name)
            arrays[name] = arr
        self._names = tuple(names)
        self._arrays = arrays

    # -- mapping protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: object) -> bool:
        return name in self._arrays

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self._names:
            yield name, self._arrays[name]

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def layout(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        return tuple((n, self._arrays[n].shape) for n in self._names)

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self._arrays.values()))

    def __repr__(self) -> str:
        body = ", ".join(f"{n}{tuple(s)}" for n, s in self.layout)
        return f"ParamSet({body})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamSet):
            return NotImplemented
        return self.layout == other.layout and all(
            np.array_equal(a, other[n]) for n, a in self.items()
        )

    __hash__ = None  # type: ignore[assignment]

    # -- layout checks ----------------------------------------------------
    def is_aligned(self, other: "ParamSet") -> bool:
        return self.layout == other.layout

    def check_aligned(self, other: "ParamSet", what: str = "parameter sets") -> None:
        if not self.is_aligned(other):
            raise AlignmentError(
                f"{what} are not aligned: {self.layout!r} vs {other.layout!r}"
            )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self._arrays.values())

    def check_finite(self, what: str = "parameters") -> None:
        for name, arr in self.items():
            if not np.all(np.isfinite(arr)):
                raise NumericDomainError(f"{what} entry {name!r} holds non-finite values")

    # -- construction helpers ---------------------------------------------
    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ParamSet":
        return ParamSet((n, fn(a)) for n, a in self.items())

    def zeros_like(self) -> "ParamSet":
        return self.map(np.zeros_like)

    def combine(self, other: "ParamSet", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ParamSet":
        self.check_aligned(other)
        return ParamSet((n, fn(a, other[n])) for n, a in self.items())

    def __add__(self, other: "ParamSet") -> "ParamSet":
        return self.combine(other, np.add)

    def __sub__(self, other: "ParamSet") -> "ParamSet":
        return self.combine(other, np.subtract)

    def scale(self, factor: float) -> "ParamSet":
        return self.map(lambda a: a * factor)

    def to_vector(self) -> np.ndarray:
        """Concatenate every entry, row-major, in layout order."""
        if not self._names:
            return np.zeros(0)
        return np.concatenate([a.ravel() for a in self._arrays.values()])

    def with_vector(self, vector: np.ndarray) -> "ParamSet":
        """Return a set with this layout and values taken from ``vector``."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.size,):
            raise AlignmentError(f"expected a flat vector of {self.size} values, got shape {vector.shape}")
        out, start = [], 0
        for name, arr in self.items():
            out.append((name, vector[start:start + arr.size].reshape(arr.shape)))
            start += arr.size
        return ParamSet(out)

    def prefixed(self, prefix: str) -> "ParamSet":
        return ParamSet((prefix + n, a) for n, a in self.items())

    def select(self, prefix: str) -> "ParamSet":
        """Entries whose names start with ``prefix``, with the prefix stripped."""
        return ParamSet((n[len(prefix):], a) for n, a in self.items() if n.startswith(prefix))

    def concat(self, other: "ParamSet") -> "ParamSet":
        return ParamSet(list(self.items()) + list(other.items()))

    def digest(self) -> str:
        """SHA-256 over layout and float64 values; stable across runs."""
        h = hashlib.sha256()
        for name, arr in self.items():
            h.update(name.encode("utf-8"))
            h.update(np.asarray(arr.shape, dtype="<u8").tobytes())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()
