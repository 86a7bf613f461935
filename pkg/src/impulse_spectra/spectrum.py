"""Truncated matrices of L and A = M^{-1} L, their eigenvalues, and evidence of
discreteness: self-convergence of eigenvalues inside a fixed disk as the
window grows, plus eigenvector tail masses.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import EigenSolverError, WindowError
from .lattice import ImpulseParams, LatticeWindow, PotentialSpec, Weights


@dataclass(frozen=True)
class OperatorMatrix:
    window: LatticeWindow
    entries: np.ndarray
    which: str
    delta: float
    c: float

    @property
    def sites(self) -> tuple[int, ...]:
        return self.window.z0_sites

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def off_tridiagonal(self) -> list[tuple[int, int]]:
        """Nonzero entries coupling sites more than one lattice step apart."""
        sites = self.sites
        rows, cols = np.nonzero(self.entries)
        return [(sites[i], sites[j]) for i, j in zip(rows, cols) if abs(sites[i] - sites[j]) > 1]

    def couplings(self, n: int) -> set[int]:
        i = self.sites.index(n)
        return {self.sites[j] for j in np.nonzero(self.entries[i])[0]}


def assemble(which: str, q: PotentialSpec, imp: ImpulseParams, window: LatticeWindow) -> OperatorMatrix:
    """Dense matrix of L or A on the z0 sites, with ghosts eliminated.

    Row -1 uses y_0 = (1 - d2/d1) y_{-1} + d2 y_2 and row 2 uses
    y_1 = y_{-1}/d1; values just outside the window are zero.
    """
    if which not in ("L", "A"):
        raise ValueError(f"which must be 'L' or 'A', got {which!r}")
    sites = window.z0_sites
    pos = {n: i for i, n in enumerate(sites)}
    size = len(sites)
    mat = np.zeros((size, size), dtype=np.complex128)
    for n in sites:
        i = pos[n]
        mat[i, i] = 2.0 + q(n)
        for m in (n - 1, n + 1):
            if m in pos:
                mat[i, pos[m]] = -1.0
    i, j = pos[-1], pos[2]
    mat[i, i] = 1.0 + imp.d2 / imp.d1 + q(-1)
    mat[i, j] = -imp.d2
    mat[j, i] = -1.0 / imp.d1
    if which == "A":
        mat = np.conj(Weights(imp.delta).rho_on(sites))[:, None] * mat
    mat.setflags(write=False)
    return OperatorMatrix(window, mat, which, imp.delta, q.c)


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: tuple[complex, ...]
    residuals: tuple[float, ...]
    window: LatticeWindow
    eigenvectors: np.ndarray = field(repr=False)  # unit columns, same order as eigenvalues

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    def in_disk(self, radius: float) -> list[complex]:
        return [lam for lam in self.eigenvalues if abs(lam) <= radius]


def eigenvalues(mat: OperatorMatrix, tol: float = 1e-8) -> SpectrumResult:
    """All eigenpairs of the assembled matrix, residual-checked.

    Exactly Hermitian matrices (delta = 0) go to the Hermitian solver, so the
    eigenvalues come out real; everything else to the general LAPACK solver.
    """
    a = np.asarray(mat.entries)
    try:
        if np.array_equal(a, a.conj().T):
            vals, vecs = np.linalg.eigh(a)
            vals = vals.astype(np.complex128)
        else:
            vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver did not converge (condition number {np.linalg.cond(a):.3e})") from exc
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    order = sorted(range(len(vals)), key=lambda k: (vals[k].real, vals[k].imag, k))
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    if res.size and np.max(res) > tol:
        k = int(np.argmax(res))
        raise EigenSolverError(
            f"eigenpair residual {res[k]:.3e} exceeds {tol:.1e} at lambda={vals[k]:.6g} "
            f"(condition number {np.linalg.cond(a):.3e})"
        )
    return SpectrumResult(tuple(complex(v) for v in vals), tuple(float(r) for r in res), mat.window, vecs)


# determinant-based oracle ----------------------------------------------------

def _log_derivative(a: np.ndarray, z: complex) -> complex | None:
    """p'(z)/p(z) for p(z) = det(z I - A), as the trace of the resolvent.

    Returns None when z I - A is exactly singular, i.e. z is already a root.
    """
    n = a.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(z * np.eye(n) - a, check_finite=False)
    if np.any(np.diag(lu) == 0):
        return None
    return complex(np.trace(scipy.linalg.lu_solve((lu, piv), np.eye(n), check_finite=False)))


def charpoly_roots(entries: np.ndarray, tol: float = 1e-13, max_iter: int = 1000) -> np.ndarray:
    """Roots of det(z I - A) by simultaneous (Aberth) iteration.

    Uses only LU factorizations of z I - A, never an eigensolver.
    """
    a = np.asarray(entries, dtype=np.complex128)
    n = a.shape[0]
    center = np.trace(a) / n
    radius = max(np.max(np.sum(np.abs(a), axis=1)), 1.0)
    angles = 2 * np.pi * (np.arange(n) + 0.25) / n
    z = center + radius * np.exp(1j * angles)
    scale = radius
    for _ in range(max_iter):
        biggest = 0.0
        for i in range(n):
            g = _log_derivative(a, z[i])
            if g is None or g == 0:
                continue
            if any(z[i] == z[j] for j in range(n) if j != i):
                z[i] += 1e-12 * scale
                biggest = max(biggest, 1e-12 * scale)
                continue
            newton = 1.0 / g
            repulsion = sum(1.0 / (z[i] - z[j]) for j in range(n) if j != i)
            step = newton / (1.0 - newton * repulsion)
            z[i] -= step
            biggest = max(biggest, abs(step))
        if biggest <= tol * scale:
            break
    else:
        raise EigenSolverError("determinant root search did not converge")
    return z


def multiset_distance(xs, ys) -> float:
    """Largest gap under the optimal one-to-one matching of two multisets."""
    xs, ys = np.asarray(xs, dtype=complex), np.asarray(ys, dtype=complex)
    if xs.size != ys.size:
        raise ValueError("multisets must have equal size")
    if xs.size == 0:
        return 0.0
    cost = np.abs(xs[:, None] - ys[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# convergence study -----------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    window: LatticeWindow
    n_sites: int
    count: int
    eigenvalues: tuple[complex, ...]  # those inside the disk
    drifts: tuple[float, ...]  # against the previous window, one per eigenvalue here
    max_drift: float | None
    ambiguous: tuple[complex, ...]


@dataclass(frozen=True)
class ConvergenceTable:
    disk_radius: float
    rows: tuple[ConvergenceRow, ...]

    @property
    def counts(self) -> list[int]:
        return [r.count for r in self.rows]

    @property
    def count_stabilized(self) -> bool:
        return len(self.rows) >= 2 and self.rows[-1].count == self.rows[-2].count

    @property
    def final_drift(self) -> float | None:
        return self.rows[-1].max_drift if self.rows else None


def _pair(prev: list[complex], cur: list[complex], tol: float) -> tuple[list[float], list[complex]]:
    """Greedy nearest-neighbour matching of cur to prev.

    Returns the drift of every eigenvalue in cur (inf if unmatched) and the
    eigenvalues whose match could not be decided because two candidates lie
    within ``tol`` of each other.
    """
    drifts = [math.inf] * len(cur)
    ambiguous = []
    if not prev or not cur:
        return drifts, ambiguous
    dist = np.abs(np.asarray(cur)[:, None] - np.asarray(prev)[None, :])
    candidates = sorted((dist[i, j], i, j) for i in range(len(cur)) for j in range(len(prev)))
    used_i, used_j = set(), set()
    for d, i, j in candidates:
        if i in used_i or j in used_j:
            continue
        row = np.sort(dist[i])
        if row.size > 1 and row[1] - row[0] <= tol and row[1] > tol:
            ambiguous.append(cur[i])
        used_i.add(i)
        used_j.add(j)
        drifts[i] = float(d)
    return drifts, ambiguous


def convergence_study(
    q: PotentialSpec,
    imp: ImpulseParams,
    windows: list[LatticeWindow],
    disk_radius: float,
    which: str = "A",
    workers: int = 1,
    tol: float = 1e-8,
) -> ConvergenceTable:
    """Eigenvalues inside |lambda| <= disk_radius for a growing ladder of windows."""
    if not windows:
        raise WindowError("need at least one window")
    for w0, w1 in zip(windows, windows[1:]):
        if not (w1.a <= w0.a and w1.b >= w0.b and w1.n_sites > w0.n_sites):
            raise WindowError("windows must be strictly increasing")

    def solve(w):
        return eigenvalues(assemble(which, q, imp, w), tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, windows))
    else:
        results = [solve(w) for w in windows]

    rows = []
    prev_all: list[complex] | None = None
    prev_res = 0.0
    for w, res in zip(windows, results):
        inside = res.in_disk(disk_radius)
        cur_res = max(res.residuals, default=0.0)
        if prev_all is None:
            drifts, amb, worst = (), (), None
        else:
            pair_tol = 10.0 * max(cur_res, prev_res)
            d, amb = _pair(prev_all, inside, pair_tol)
            drifts, worst = tuple(d), (max(d) if d else 0.0)
        rows.append(ConvergenceRow(w, w.n_sites, len(inside), tuple(inside), tuple(drifts), worst, tuple(amb)))
        prev_all, prev_res = list(res.eigenvalues), cur_res
    return ConvergenceTable(disk_radius, tuple(rows))


# eigenvector tails -----------------------------------------------------------

def tail_mass(vec: np.ndarray, sites, n0: int) -> float:
    """sum over |n| > n0 of |y_n|^2."""
    w = np.abs(np.asarray(vec)) ** 2
    mask = np.abs(np.asarray(sites)) > n0
    return math.fsum(w[mask].tolist())


def tail_check(result: SpectrumResult, epsilon: float) -> list[int]:
    """Per eigenvector, the smallest n0 >= 0 with tail mass <= epsilon.

    Tail masses are compared with a relative slack of a few ulps, since the
    full mass of a normalized vector can round to just above 1.
    """
    sites = np.asarray(result.window.z0_sites)
    reach = int(np.max(np.abs(sites)))
    out = []
    for k in range(result.eigenvectors.shape[1]):
        vec = result.eigenvectors[:, k]
        total = math.fsum((np.abs(vec) ** 2).tolist())
        vec = vec / math.sqrt(total)
        n0 = 0
        while n0 < reach and tail_mass(vec, sites, n0) > epsilon + 8 * np.finfo(float).eps:
            n0 += 1
        out.append(n0)
    return out


__all__ = [
    "OperatorMatrix",
    "SpectrumResult",
    "ConvergenceRow",
    "ConvergenceTable",
    "assemble",
    "eigenvalues",
    "charpoly_roots",
    "multiset_distance",
    "convergence_study",
    "tail_mass",
    "tail_check",
]
