"""Eigenvalue sorting: which eigenvalue sits on which branch."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

# Primary parts closer than this (relative to the spectrum scale) count as equal
# and fall through to the tiebreak. Exactly-on-cut samples then sort the same
# way every time instead of by rounding noise.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SortKey:
    part: str  # "re" | "im"
    ascending: bool = True

    @property
    def name(self) -> str:
        return f"{self.part}_{'asc' if self.ascending else 'desc'}"

    @classmethod
    def parse(cls, text: str) -> "SortKey":
        try:
            return KEYS[text.strip().lower()]
        except KeyError:
            raise InvalidInputError(f"unknown sort key {text!r}; use one of {sorted(KEYS)}") from None

    def __str__(self):
        return self.name


ReAsc = SortKey("re", True)
ReDesc = SortKey("re", False)
ImAsc = SortKey("im", True)
ImDesc = SortKey("im", False)
KEYS = {k.name: k for k in (ReAsc, ReDesc, ImAsc, ImDesc)}


def _parts(values: np.ndarray, key: SortKey):
    if key.part == "re":
        prim, tie = values.real, values.imag
    else:
        prim, tie = values.imag, values.real
    return (prim if key.ascending else -prim), tie


def sort_values(values, key: SortKey = ReAsc, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Indices that put each row of ``values`` (..., n) into branch order.

    Primary parts within ``tie_tol`` times the row scale are chained into one
    group, and each group is ordered by the conjugate part ascending.
    """
    v = np.asarray(values, dtype=complex)
    prim, tie = _parts(v, key)
    first = np.argsort(prim, axis=-1, kind="stable")
    ps = np.take_along_axis(prim, first, axis=-1)
    scale = np.maximum(1.0, np.max(np.abs(v), axis=-1, keepdims=True))
    step = np.diff(ps, axis=-1) > tie_tol * scale
    group = np.concatenate([np.zeros(ps.shape[:-1] + (1,), dtype=int), np.cumsum(step, axis=-1)], axis=-1)
    ts = np.take_along_axis(tie, first, axis=-1)
    inner = np.lexsort((ts, group), axis=-1)
    return np.take_along_axis(first, inner, axis=-1)


def degenerate_mask(sorted_values, tie_tol: float = TIE_TOL) -> np.ndarray:
    """True where some pair of values agrees in both parts (within tolerance)."""
    v = np.asarray(sorted_values, dtype=complex)
    scale = np.maximum(1.0, np.max(np.abs(v), axis=-1))
    d = np.abs(v[..., :, None] - v[..., None, :])
    n = v.shape[-1]
    d[..., np.arange(n), np.arange(n)] = np.inf
    return np.min(d, axis=(-1, -2)) <= tie_tol * scale


@dataclass(frozen=True)
class SortedSpectrum:
    branch_values: np.ndarray
    sort_perm: np.ndarray  # sort_perm[i] = raw index of the value on branch i+1
    key: SortKey
    degenerate: bool

    @property
    def n(self) -> int:
        return self.branch_values.size


def sort_spectrum(s, key: SortKey = ReAsc, tie_tol: float = TIE_TOL) -> SortedSpectrum:
    """Sort a Spectrum (or a plain array of eigenvalues) into branches."""
    vals = np.asarray(getattr(s, "eigenvalues", s), dtype=complex)
    order = sort_values(vals, key, tie_tol)
    bv = vals[order]
    return SortedSpectrum(bv, order, key, bool(degenerate_mask(bv, tie_tol)))


def min_gap(ss) -> float:
    v = np.asarray(getattr(ss, "branch_values", ss), dtype=complex)
    return float(min_gap_batch(v))


def min_gap_batch(values) -> np.ndarray:
    v = np.asarray(values, dtype=complex)
    n = v.shape[-1]
    if n < 2:
        return np.full(v.shape[:-1], np.inf)
    d = np.abs(v[..., :, None] - v[..., None, :])
    d[..., np.arange(n), np.arange(n)] = np.inf
    return np.min(d, axis=(-1, -2))
