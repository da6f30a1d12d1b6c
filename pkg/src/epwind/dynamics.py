"""Slow dynamical encircling: integrate d psi/dt = -i H(kappa(t)) psi.

The parameter moves along a closed path with angular speed ``omega`` (the
path clock of :mod:`epwind.paths`), so a loop of total phase ``Phi`` takes
``T = Phi / |omega|``. Gain makes the norm explode over such long times, so
every accepted step renormalises the state and keeps the logarithm of the
discarded norm in a separate ledger.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .branches import ReAsc, SortKey, sort_values
from .errors import IntegrationError, InvalidInputError, TieError
from .matrix_core import eig_vectors, eigvals_batch, near_degenerate_clusters
from .model_dsl import MatrixFamily, eval_family, to_python
from .paths import Path

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
        [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
)
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


@dataclass(frozen=True)
class EvolutionConfig:
    omega: float = 1e-4
    rtol: float = 1e-8
    atol: float = 1e-10
    renorm: bool = True
    max_steps: int = 50_000_000
    n_snapshots: int = 400
    biorthogonal: bool = True

    def __post_init__(self):
        if self.omega == 0:
            raise InvalidInputError("omega must be nonzero")
        if self.rtol <= 0 or self.atol <= 0:
            raise InvalidInputError("rtol and atol must be positive")


@dataclass
class EvolutionResult:
    start_state: int
    times: np.ndarray
    kappas: np.ndarray
    overlap_series: np.ndarray  # (snapshots, n) coefficients onto sorted branches
    log_norm: np.ndarray  # accumulated log-norm at each snapshot
    final_coefficients: np.ndarray
    final_dominant: int  # 1-based branch/state index
    margin: float  # |c_dom| / |c_next|
    steps: int
    omega: float
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# compiled pieces
# --------------------------------------------------------------------------

_FAMILY_CACHE: dict = {}


def compile_family(f: MatrixFamily):
    """numba-compiled ``fill(kappa, out)`` writing H(kappa) into ``out``."""
    key = hash(f)
    if key in _FAMILY_CACHE:
        return _FAMILY_CACHE[key]
    names = {f.variable: "kappa"}
    consts = []
    for k, (pname, val) in enumerate(sorted(f.params.items())):
        names[pname] = f"_p{k}"
        consts.append(f"    _p{k} = complex({val.real!r}, {val.imag!r})")
    body = []
    for i, row in enumerate(f.entries):
        for j, ex in enumerate(row):
            body.append(f"    out[{i}, {j}] = {to_python(ex, names)}")
    src = "def fill(kappa, out):\n" + "\n".join(consts + body) + "\n"
    ns = {"cmath": __import__("cmath")}
    exec(compile(src, f"<family {f.name or 'anon'}>", "exec"), ns)
    fn = numba.njit(cache=False)(ns["fill"])
    _FAMILY_CACHE[key] = fn
    return fn


@numba.njit(cache=True)
def _path_point(phase, kinds, prm, cum):
    nseg = kinds.shape[0]
    k = 0
    while k < nseg - 1 and phase >= cum[k + 1]:
        k += 1
    span = cum[k + 1] - cum[k]
    u = (phase - cum[k]) / span if span > 0 else 0.0
    if u < 0.0:
        u = 0.0
    if u > 1.0:
        u = 1.0
    p = prm[k]
    if kinds[k] == 0:
        phi = p[5] + u * (p[6] - p[5])
        rot = complex(math.cos(p[4]), math.sin(p[4]))
        return complex(p[0], p[1]) + complex(p[2] * math.cos(phi), p[3] * math.sin(phi)) * rot
    return complex(p[0], p[1]) + u * complex(p[2] - p[0], p[3] - p[1])


@numba.njit(cache=False)
def _rhs(fill, t, y, hbuf, kinds, prm, cum, total, direction, wabs, out):
    phase = wabs * t
    if direction < 0:
        phase = total - phase
    kappa = _path_point(phase, kinds, prm, cum)
    fill(kappa, hbuf)
    n, m = y.shape
    for i in range(n):
        for c in range(m):
            acc = 0j
            for j in range(n):
                acc += hbuf[i, j] * y[j, c]
            out[i, c] = -1j * acc


@numba.njit(cache=False)
def _integrate(fill, kinds, prm, cum, total, direction, wabs, y0, rtol, atol,
               out_times, renorm, max_steps, A, B, C, E):
    n, m = y0.shape
    T = out_times[-1]
    nout = out_times.shape[0]
    ys = np.zeros((nout, n, m), dtype=np.complex128)
    logs = np.zeros((nout, m))
    y = y0.copy()
    lognorm = np.zeros(m)
    hbuf = np.zeros((n, n), dtype=np.complex128)
    K = np.zeros((7, n, m), dtype=np.complex128)
    ytmp = np.zeros((n, m), dtype=np.complex128)
    ynew = np.zeros((n, m), dtype=np.complex128)
    t = 0.0
    iout = 0
    while iout < nout and out_times[iout] <= 0.0:
        ys[iout] = y
        logs[iout] = lognorm
        iout += 1
    h = min(0.01, T / 10.0) if T > 0 else 0.0
    facold = 1e-4
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    steps = 0
    status = 0
    _rhs(fill, t, y, hbuf, kinds, prm, cum, total, direction, wabs, K[0])
    while iout < nout:
        if steps >= max_steps:
            status = 2
            break
        target = out_times[iout]
        last = False
        if t + h >= target:
            h = target - t
            last = True
        if h <= 1e-13 * (1.0 + abs(t)):
            if last:
                t = target
                ys[iout] = y
                logs[iout] = lognorm
                iout += 1
                h = 1e-3
                continue
            status = 1
            break
        for s in range(1, 7):
            for i in range(n):
                for c in range(m):
                    acc = y[i, c]
                    for r in range(s):
                        acc += h * A[s, r] * K[r, i, c]
                    ytmp[i, c] = acc
            _rhs(fill, t + C[s] * h, ytmp, hbuf, kinds, prm, cum, total, direction, wabs, K[s])
        # stage 6 is the 5th-order solution (FSAL)
        for i in range(n):
            for c in range(m):
                ynew[i, c] = ytmp[i, c]
        err = 0.0
        for i in range(n):
            for c in range(m):
                e = 0j
                for r in range(7):
                    e += E[r] * K[r, i, c]
                e *= h
                sc = atol + rtol * max(abs(y[i, c]), abs(ynew[i, c]))
                err += (abs(e) / sc) ** 2
        err = math.sqrt(err / (n * m))
        steps += 1
        if err <= 1.0:
            fac11 = err ** expo1 if err > 0 else 0.0
            fac = fac11 / facold ** beta
            fac = max(0.1, min(5.0, fac / 0.9)) if fac > 0 else 0.1
            facold = max(err, 1e-4)
            t = t + h
            for i in range(n):
                for c in range(m):
                    y[i, c] = ynew[i, c]
                    K[0, i, c] = K[6, i, c]
            if renorm:
                for c in range(m):
                    nrm = 0.0
                    for i in range(n):
                        nrm += abs(y[i, c]) ** 2
                    nrm = math.sqrt(nrm)
                    if nrm > 0:
                        for i in range(n):
                            y[i, c] /= nrm
                            K[0, i, c] /= nrm
                        lognorm[c] += math.log(nrm)
            if last:
                t = target
                ys[iout] = y
                logs[iout] = lognorm
                iout += 1
                h = h / fac
                continue
            h = h / fac
        else:
            fac11 = err ** expo1
            h = h / min(5.0, fac11 / 0.9)
    return ys, logs, status, steps, t


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

def instantaneous_basis(f: MatrixFamily, kappa: complex, key: SortKey = ReAsc):
    """Sorted eigenvalues with right (columns) and left eigenvectors at kappa."""
    h = eval_family(f, kappa)
    lam = eigvals_batch(h)
    order = sort_values(lam[None, :], key)[0]
    lam = lam[order]
    rights, lefts, flags = [], [], []
    for val in lam:
        pair = eig_vectors(h, val)
        rights.append(pair.right)
        lefts.append(pair.left)
        flags.append(pair.near_defective)
    return lam, np.stack(rights, axis=1), np.stack(lefts, axis=1), any(flags)


def project_state(psi, right, left, biorthogonal: bool = True) -> np.ndarray:
    """Expansion coefficients of psi on the right eigenvectors (columns of ``right``).

    Biorthogonal: c_i = (l_i^H psi) / (l_i^H r_i). Otherwise the plain overlap
    r_i^H psi is returned.
    """
    psi = np.asarray(psi, dtype=complex)
    if biorthogonal:
        num = left.conj().T @ psi
        den = np.einsum("ij,ij->j", left.conj(), right)
        if psi.ndim == 2:
            den = den[:, None]
        return num / den
    return right.conj().T @ psi


def dominant_state(coefficients, rel_tie: float = 1e-6) -> int:
    """1-based index of the largest |c_i|; near ties raise TieError."""
    mags = np.abs(np.asarray(coefficients))
    order = np.argsort(-mags, kind="stable")
    if mags.size > 1 and mags[order[0]] - mags[order[1]] <= rel_tie * mags[order[0]]:
        raise TieError(f"no dominant state: |c| = {mags[order[0]]:.6g} and {mags[order[1]]:.6g}")
    return int(order[0]) + 1


def _margin(c) -> float:
    mags = np.sort(np.abs(c))[::-1]
    return float(mags[0] / mags[1]) if mags.size > 1 and mags[1] > 0 else math.inf


def evolve_states(f: MatrixFamily, path: Path, start_states, cfg: EvolutionConfig = EvolutionConfig(),
                  key: SortKey = ReAsc) -> list:
    """Run several initial branch states through the same loop in one integration."""
    if not path.is_closed:
        raise InvalidInputError("dynamic encircling needs a closed path")
    starts = [int(s) for s in start_states]
    base = path.basepoint
    lam0, right0, left0, _ = instantaneous_basis(f, base, key)
    n = lam0.size
    for s in starts:
        if not 1 <= s <= n:
            raise InvalidInputError(f"start_state must be in 1..{n}")
    y0 = np.ascontiguousarray(right0[:, [s - 1 for s in starts]])
    y0 /= np.linalg.norm(y0, axis=0)

    total = path.total_phase
    wabs = abs(cfg.omega)
    T = total / wabs if total > 0 else 0.0
    out_times = np.linspace(0.0, T, cfg.n_snapshots + 1)
    if T == 0:
        ys = np.repeat(y0[None], out_times.size, axis=0)
        logs = np.zeros((out_times.size, len(starts)))
        status, steps = STATUS_OK, 0
    else:
        kinds, prm, spans = path.primitives()
        cum = np.concatenate([[0.0], np.cumsum(spans)])
        fill = compile_family(f)
        ys, logs, status, steps, t_end = _integrate(
            fill, kinds, prm, cum, float(cum[-1]), 1 if cfg.omega > 0 else -1, wabs, y0.astype(np.complex128),
            cfg.rtol, cfg.atol, out_times, cfg.renorm, cfg.max_steps, _A, _B, _C, _E,
        )
        if status != STATUS_OK:
            reason = "step size underflow" if status == STATUS_UNDERFLOW else "step budget exhausted"
            raise IntegrationError(f"integration stopped at t={t_end:.6g} of {T:.6g}: {reason}",
                                   partial={"states": ys, "log_norm": logs, "t": t_end})

    phases = np.abs(cfg.omega) * out_times
    if cfg.omega < 0:
        phases = total - phases
    kappas = path.point(phases / total) if total > 0 else np.full(out_times.shape, base)

    # projections on the instantaneous sorted eigenbasis at each snapshot
    coeffs = np.empty((out_times.size, n, len(starts)), dtype=complex)
    for k, kap in enumerate(kappas):
        _, r, l, _ = instantaneous_basis(f, kap, key)
        coeffs[k] = project_state(ys[k], r, l, cfg.biorthogonal)
    final = project_state(ys[-1], right0, left0, cfg.biorthogonal)

    results = []
    for c_idx, s in enumerate(starts):
        fc = final[:, c_idx]
        results.append(
            EvolutionResult(
                start_state=s,
                times=out_times,
                kappas=kappas,
                overlap_series=coeffs[:, :, c_idx],
                log_norm=logs[:, c_idx],
                final_coefficients=fc,
                final_dominant=dominant_state(fc),
                margin=_margin(fc),
                steps=int(steps),
                omega=cfg.omega,
            )
        )
    return results


def evolve_loop(f: MatrixFamily, path: Path, start_state: int, cfg: EvolutionConfig = EvolutionConfig(),
                key: SortKey = ReAsc) -> EvolutionResult:
    return evolve_states(f, path, [start_state], cfg, key)[0]


def evolution_csv(r: EvolutionResult) -> str:
    n = r.overlap_series.shape[1]
    lines = ["t," + ",".join(f"abs_c{i}" for i in range(1, n + 1)) + ",log_norm"]
    for k in range(r.times.size):
        mags = ",".join(f"{abs(c):.12e}" for c in r.overlap_series[k])
        lines.append(f"{r.times[k]:.12e},{mags},{r.log_norm[k]:.12e}")
    return "\n".join(lines) + "\n"


def evolution_summary(r: EvolutionResult, loop: str = "") -> dict:
    return {
        "loop": loop,
        "basepoint": [float(r.kappas[0].real), float(r.kappas[0].imag)],
        "start": r.start_state,
        "dominant": r.final_dominant,
        "margin": float(f"{r.margin:.6g}"),
        "omega": r.omega,
        "final_abs": [float(f"{abs(c):.6g}") for c in r.final_coefficients / np.max(np.abs(r.final_coefficients))],
    }
