"""Small dense complex linear algebra.

Eigenvalues are the roots of the characteristic polynomial, found with the
Aberth-Ehrlich simultaneous iteration. Everything here works on a single
matrix and, where it matters for speed, on stacks of matrices with shape
``(..., n, n)``.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConvergenceError, InvalidInputError

TOL_EIG = 1e-10
MAX_ABERTH_ITER = 200
CLUSTER_TOL = 1e-7
MAX_DIM = 12

_EPS = np.finfo(float).eps


def as_cmatrix(m) -> np.ndarray:
    """Validate and convert to a square complex array (stack allowed)."""
    a = np.asarray(m, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class CPoly:
    """Polynomial with complex coefficients ``coeffs[k]`` multiplying x**k."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 1 or c[-1] == 0:
            raise InvalidInputError("polynomial needs a nonzero leading coefficient")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return horner(self.coeffs, x)

    def monic(self) -> "CPoly":
        return CPoly(self.coeffs / self.coeffs[-1])

    def derivative(self) -> "CPoly":
        if self.degree == 0:
            return CPoly(np.array([0j + 1e-300]))
        return CPoly(self.coeffs[1:] * np.arange(1, self.degree + 1))

    def scale(self, x) -> np.ndarray:
        """Magnitude bound sum |c_k| max(1,|x|)^k used for backward-error checks."""
        return horner(np.abs(self.coeffs), np.maximum(1.0, np.abs(x)))


def horner(coeffs, x):
    """Evaluate ascending coefficients at x; coeffs may carry a leading batch axis."""
    c = np.asarray(coeffs)
    x = np.asarray(x)
    if c.ndim == 1:
        out = np.zeros_like(x, dtype=np.result_type(c, x)) + c[-1]
        for k in range(c.size - 2, -1, -1):
            out = out * x + c[k]
        return out
    # batch axes of c line up with the leading axes of x
    cs = c.reshape(c.shape[:-1] + (1,) * (x.ndim - c.ndim + 1) + c.shape[-1:])
    out = np.zeros(x.shape, dtype=np.result_type(c, x)) + cs[..., -1]
    for k in range(c.shape[-1] - 2, -1, -1):
        out = out * x + cs[..., k]
    return out


# --------------------------------------------------------------------------
# characteristic polynomial
# --------------------------------------------------------------------------

def char_poly_coeffs(m) -> np.ndarray:
    """Faddeev-LeVerrier on a stack of matrices; returns ascending monic coefficients."""
    a = as_cmatrix(m)
    n = a.shape[-1]
    coeffs = np.zeros(a.shape[:-2] + (n + 1,), dtype=complex)
    coeffs[..., n] = 1.0
    eye = np.eye(n, dtype=complex)
    mk = np.zeros_like(a)
    for k in range(1, n + 1):
        mk = a @ mk + coeffs[..., n - k + 1, None, None] * eye
        coeffs[..., n - k] = -np.trace(a @ mk, axis1=-2, axis2=-1) / k
    return coeffs


def _gauss_int(z):
    if isinstance(z, (int, np.integer)):
        return int(z), 0
    z = complex(z)
    if z.real != int(z.real) or z.imag != int(z.imag):
        return None
    return int(z.real), int(z.imag)


def _char_poly_exact(entries):
    n = len(entries)
    re = [[Fraction(e[0]) for e in row] for row in entries]
    im = [[Fraction(e[1]) for e in row] for row in entries]

    def matmul(ar, ai, br, bi):
        cr = [[sum(ar[i][k] * br[k][j] - ai[i][k] * bi[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        ci = [[sum(ar[i][k] * bi[k][j] + ai[i][k] * br[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        return cr, ci

    cr = [Fraction(0)] * (n + 1)
    ci = [Fraction(0)] * (n + 1)
    cr[n] = Fraction(1)
    mr = [[Fraction(0)] * n for _ in range(n)]
    mi = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        mr, mi = matmul(re, im, mr, mi)
        for i in range(n):
            mr[i][i] += cr[n - k + 1]
            mi[i][i] += ci[n - k + 1]
        pr, pi = matmul(re, im, mr, mi)
        cr[n - k] = -sum(pr[i][i] for i in range(n)) / k
        ci[n - k] = -sum(pi[i][i] for i in range(n)) / k
    return cr, ci


def char_poly(m, exact: bool = False) -> CPoly:
    """Monic det(x I - m) by the Faddeev-LeVerrier recursion.

    With ``exact=True`` and Gaussian-integer entries the recursion runs in
    rational arithmetic; the (then exact) coefficients are returned as floats.
    """
    if exact:
        rows = np.asarray(m, dtype=object)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1] or rows.shape[0] == 0:
            raise InvalidInputError(f"expected a non-empty square matrix, got shape {rows.shape}")
        ints = [[_gauss_int(z) for z in row] for row in rows]
        if all(e is not None for row in ints for e in row):
            cr, ci = _char_poly_exact(ints)
            return CPoly(np.array([complex(float(r), float(i)) for r, i in zip(cr, ci)]))
    a = as_cmatrix(m)
    if a.ndim != 2:
        raise InvalidInputError("char_poly expects a single matrix; use char_poly_coeffs for stacks")
    return CPoly(char_poly_coeffs(a))


# --------------------------------------------------------------------------
# Aberth-Ehrlich
# --------------------------------------------------------------------------

def _initial_guess(c: np.ndarray) -> np.ndarray:
    n = c.shape[-1] - 1
    lead = c[..., -1:]
    monic = c / lead
    center = -monic[..., n - 1] / n
    # Fujiwara-type bound on root magnitudes of the monic polynomial
    k = np.arange(1, n + 1)
    bound = 2.0 * np.max(np.abs(monic[..., n - k]) ** (1.0 / k), axis=-1)
    radius = np.maximum(bound, 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    jitter = 1.0 + 0.01 * np.arange(n) / n
    return center[..., None] + radius[..., None] * jitter * np.exp(1j * angles)


def aberth(coeffs, tol: float = TOL_EIG, max_iter: int = MAX_ABERTH_ITER):
    """Roots of a stack of polynomials (ascending coefficients, shape (..., n+1)).

    Returns ``(roots, backward_error)``. Raises ConvergenceError if any root
    misses the backward-error tolerance ``tol`` after ``max_iter`` sweeps.
    """
    c = np.asarray(coeffs, dtype=complex)
    batch_shape = c.shape[:-1]
    n = c.shape[-1] - 1
    if n < 1:
        raise InvalidInputError("polynomial degree must be at least 1")
    c = c.reshape(-1, n + 1)
    if np.any(c[:, -1] == 0):
        raise InvalidInputError("leading coefficient is zero")
    c = c / c[:, -1:]
    if n == 1:
        z = -c[:, :1]
        return z.reshape(batch_shape + (1,)), np.zeros(batch_shape + (1,))
    dc = c[:, 1:] * np.arange(1, n + 1)
    absc = np.abs(c)
    z = _initial_guess(c)
    active = np.ones(z.shape[0], dtype=bool)
    offdiag = ~np.eye(n, dtype=bool)

    def backward(zz, cc, aa):
        p = horner(cc, zz)
        s = horner(aa, np.maximum(1.0, np.abs(zz)))
        return np.abs(p) / s

    for _ in range(max_iter):
        if not active.any():
            break
        za = z[active]
        ca = c[active]
        p = horner(ca, za)
        dp = horner(dc[active], za)
        diff = za[:, :, None] - za[:, None, :]
        diff = np.where(offdiag, diff, 1.0)
        diff = np.where(diff == 0, 1e-300, diff)
        inv = np.where(offdiag, 1.0 / diff, 0.0).sum(axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            w = ratio / (1.0 - ratio * inv)
        w = np.where(np.isfinite(w), w, 0.0)
        w = np.where(p == 0, 0.0, w)
        za = za - w
        z[active] = za
        small_step = np.all(np.abs(w) <= 4 * _EPS * (1 + np.abs(za)), axis=-1)
        at_floor = np.all(backward(za, ca, absc[active]) <= 8 * n * _EPS, axis=-1)
        idx = np.flatnonzero(active)
        active[idx[small_step | at_floor]] = False

    berr = backward(z, c, absc)
    if not np.all(berr <= tol):
        raise ConvergenceError(
            f"Aberth iteration missed tolerance {tol:g} (worst backward error {berr.max():.3g})",
            best=z.reshape(batch_shape + (n,)),
        )
    return z.reshape(batch_shape + (n,)), berr.reshape(batch_shape + (n,))


def poly_roots(p, tol: float = TOL_EIG) -> list:
    """All complex roots of ``p`` (a CPoly or ascending coefficient list)."""
    if not isinstance(p, CPoly):
        p = CPoly(p)
    if p.degree < 1:
        raise InvalidInputError("polynomial degree must be at least 1")
    roots, _ = aberth(p.coeffs, tol=tol)
    return [complex(r) for r in roots]


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    right_vectors: Optional[np.ndarray] = None
    left_vectors: Optional[np.ndarray] = None
    clusters: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.eigenvalues.size


def near_degenerate_clusters(values, tol: float = CLUSTER_TOL) -> tuple:
    """Groups (as index tuples) of eigenvalues closer than ``tol`` to each other."""
    vals = np.asarray(values)
    n = vals.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) <= tol * max(1.0, abs(vals[i])):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(g) for g in groups.values() if len(g) > 1)


def eigvals_batch(ms, tol: float = TOL_EIG) -> np.ndarray:
    """Eigenvalues for a stack of matrices, shape (..., n)."""
    a = as_cmatrix(ms)
    if a.shape[-1] > MAX_DIM:
        raise InvalidInputError(f"dimension {a.shape[-1]} exceeds {MAX_DIM}")
    roots, _ = aberth(char_poly_coeffs(a), tol=tol)
    if _audit is not None:
        _audit.record(a, roots)
    return roots


class TraceAudit:
    """Counts eigensolver calls and matrices whose trace identities fail."""

    def __init__(self, rel: float = 1e-8):
        self.rel = rel
        self.calls = 0
        self.matrices = 0
        self.failures = 0

    def record(self, a, roots):
        self.calls += 1
        a = a.reshape(-1, a.shape[-2], a.shape[-1])
        r = np.asarray(roots).reshape(a.shape[0], -1)
        self.matrices += a.shape[0]
        self.failures += int(np.count_nonzero(~_trace_ok(a, r, self.rel)))


_audit: Optional[TraceAudit] = None


@contextlib.contextmanager
def trace_audit(rel: float = 1e-8):
    """Check tr(A) and tr(A^2) against every spectrum computed inside the block."""
    global _audit
    prev, _audit = _audit, TraceAudit(rel)
    try:
        yield _audit
    finally:
        _audit = prev


def _trace_ok(a, lam, rel):
    norm = np.linalg.norm(a, axis=(-2, -1))
    ok1 = np.abs(lam.sum(-1) - np.trace(a, axis1=-2, axis2=-1)) <= rel * np.maximum(1.0, norm)
    ok2 = np.abs((lam ** 2).sum(-1) - np.trace(a @ a, axis1=-2, axis2=-1)) <= rel * np.maximum(1.0, norm ** 2)
    return ok1 & ok2


def check_trace_identities(m, eigenvalues, rel: float = 1e-8) -> bool:
    return bool(np.all(_trace_ok(as_cmatrix(m), np.asarray(eigenvalues), rel)))


def eig(m, tol: float = TOL_EIG, vectors: bool = False) -> Spectrum:
    a = as_cmatrix(m)
    if a.ndim != 2:
        raise InvalidInputError("eig expects a single matrix")
    if a.shape[0] > MAX_DIM:
        raise InvalidInputError(f"dimension {a.shape[0]} exceeds {MAX_DIM}")
    p = char_poly(a)
    roots, berr = aberth(p.coeffs, tol=tol)
    if _audit is not None:
        _audit.record(a, roots)
    right = left = None
    if vectors:
        pairs = [eig_vectors(a, lam) for lam in roots]
        right = np.stack([pv.right for pv in pairs], axis=1)
        left = np.stack([pv.left for pv in pairs], axis=1)
        residuals = np.array([pv.right_residual for pv in pairs])
    else:
        residuals = berr
    return Spectrum(roots, residuals, right, left, near_degenerate_clusters(roots))


class EigenPair(NamedTuple):
    right: np.ndarray
    left: np.ndarray
    right_residual: float
    left_residual: float
    near_defective: bool


def _inverse_iteration(a: np.ndarray, lam: complex, iters: int = 3) -> np.ndarray:
    n = a.shape[0]
    scale = max(1.0, np.linalg.norm(a))
    shifted = a - lam * np.eye(n)
    v = np.ones(n, dtype=complex) + 0.1j * np.arange(n)
    v /= np.linalg.norm(v)
    for k in range(iters):
        try:
            x = np.linalg.solve(shifted, v)
        except np.linalg.LinAlgError:
            shifted = shifted - (1e-13 * scale) * (1 + 1j) * np.eye(n)
            x = np.linalg.solve(shifted, v)
        nrm = np.linalg.norm(x)
        if not np.isfinite(nrm) or nrm == 0:
            shifted = shifted - (1e-13 * scale) * (1 + 1j) * np.eye(n)
            continue
        v = x / nrm
    return v


def eig_vectors(m, lam: complex, tol: float = 1e-8, tol_ep: float = CLUSTER_TOL) -> EigenPair:
    """Unit right and left eigenvectors for eigenvalue ``lam`` by inverse iteration.

    The left vector ``w`` satisfies ``w^H (m - lam I) = 0``.
    """
    a = as_cmatrix(m)
    n = a.shape[0]
    right = _inverse_iteration(a, lam)
    left = _inverse_iteration(a.conj().T, np.conj(lam))
    shifted = a - lam * np.eye(n)
    rres = float(np.linalg.norm(shifted @ right))
    lres = float(np.linalg.norm(left.conj() @ shifted))
    others = eigvals_batch(a)
    close = np.sum(np.abs(others - lam) <= tol_ep * max(1.0, abs(lam)))
    overlap = abs(np.vdot(left, right))
    near_defective = bool(close > 1 and overlap < np.sqrt(tol_ep))
    return EigenPair(right, left, rres, lres, near_defective)
