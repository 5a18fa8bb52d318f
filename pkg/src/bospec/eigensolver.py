"""Lowest eigenpairs of a grid operator by Lanczos iteration with full
reorthogonalization, multiplicity clustering, and grid-convergence studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .grid import GridOperator, assemble_hamiltonian, build_grid
from .potential import Potential

__all__ = [
    "SpectrumResult",
    "MultiplicityCluster",
    "ConvergenceStudy",
    "lowest_eigenpairs",
    "cluster_multiplicities",
    "convergence_study",
]

DEFAULT_GAP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray   # ascending
    residuals: np.ndarray     # ||H u - lambda u|| per pair
    vectors: np.ndarray       # (dim, k), orthonormal columns
    iterations: int
    converged: np.ndarray     # per-pair flags
    h: float
    grid_signature: str

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


@dataclass(frozen=True)
class MultiplicityCluster:
    energy: float        # mean of the cluster
    multiplicity: int
    spread: float        # max - min within the cluster


def lowest_eigenpairs(op: GridOperator, k: int, tol: float = 1e-8,
                      max_iter: int | None = None, seed: int = 0) -> SpectrumResult:
    """k smallest eigenpairs with residual check ||Hu - lu|| <= tol*max(1, |l|).

    Deterministic for fixed inputs and seed.  On non-convergence the partial
    result is returned with per-pair `converged` flags set accordingly.
    """
    a = op.matrix
    dim = a.shape[0]
    if not 1 <= k <= dim // 4:
        raise ValueError(f"need 1 <= k <= dim/4 = {dim // 4}, got k={k}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    m_max = min(dim, max_iter if max_iter is not None else max(300, 12 * k))

    rng = np.random.default_rng(seed)
    basis = np.empty((m_max, dim))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    basis[0] = v
    alphas = np.empty(m_max)
    betas = np.empty(m_max)
    theta = None

    m = 0
    for j in range(m_max):
        w = a @ basis[j]
        alphas[j] = basis[j] @ w
        w -= alphas[j] * basis[j]
        if j > 0:
            w -= betas[j - 1] * basis[j - 1]
        # full reorthogonalization, applied twice for safety
        for _ in range(2):
            w -= basis[: j + 1].T @ (basis[: j + 1] @ w)
        beta = np.linalg.norm(w)
        betas[j] = beta
        m = j + 1

        check = m >= max(2 * k, k + 2) and (m % 10 == 0 or m == m_max)
        if check:
            theta, s = eigh_tridiagonal(alphas[:m], betas[: m - 1],
                                        select="i", select_range=(0, k - 1))
            ests = np.abs(beta * s[m - 1, :])
            if np.all(ests <= 0.5 * tol * np.maximum(1.0, np.abs(theta))):
                break
        if beta < 1e-12:
            # invariant subspace hit; restart direction orthogonal to the basis
            w = rng.standard_normal(dim)
            for _ in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1] @ w)
            beta = np.linalg.norm(w)
            if beta < 1e-12 or j + 1 >= m_max:
                break
            betas[j] = 0.0
        if j + 1 < m_max:
            basis[j + 1] = w / beta

    kk = min(k, m)
    theta, s = eigh_tridiagonal(alphas[:m], betas[: m - 1],
                                select="i", select_range=(0, kk - 1))
    vectors = basis[:m].T @ s
    vectors /= np.linalg.norm(vectors, axis=0)
    residuals = np.linalg.norm(a @ vectors - vectors * theta, axis=0)
    converged = residuals <= tol * np.maximum(1.0, np.abs(theta))
    order = np.argsort(theta)
    return SpectrumResult(
        eigenvalues=theta[order],
        residuals=residuals[order],
        vectors=vectors[:, order],
        iterations=m,
        converged=converged[order],
        h=op.h,
        grid_signature=op.grid.signature(),
    )


def cluster_multiplicities(eigs, gap_tol: float) -> list[MultiplicityCluster]:
    """Greedy left-to-right clustering of an ascending eigenvalue list.

    A value joins the current cluster iff it lies within gap_tol of the
    cluster's current maximum.
    """
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    eigs = [float(e) for e in eigs]
    if any(b < a for a, b in zip(eigs, eigs[1:])):
        raise ValueError("eigenvalues must be ascending")
    clusters: list[MultiplicityCluster] = []
    current: list[float] = []
    for e in eigs:
        if current and e - current[-1] > gap_tol:
            clusters.append(MultiplicityCluster(
                energy=float(np.mean(current)),
                multiplicity=len(current),
                spread=current[-1] - current[0]))
            current = []
        current.append(e)
    if current:
        clusters.append(MultiplicityCluster(
            energy=float(np.mean(current)),
            multiplicity=len(current),
            spread=current[-1] - current[0]))
    return clusters


@dataclass(frozen=True)
class ConvergenceStudy:
    deltas: tuple                 # max grid spacing per size
    errors: np.ndarray            # (num_sizes, k) absolute eigenvalue errors
    slopes: tuple                 # fitted log-log slope per eigenvalue, or None
    reference: tuple              # eigenvalues the errors are measured against
    converged: np.ndarray         # (num_sizes, k) inner-solve flags


def convergence_study(pot: Potential, half_widths, sizes, k: int,
                      h: float = 1.0, reference=None, tol: float = 1e-7,
                      max_iter: int | None = None, seed: int = 0) -> ConvergenceStudy:
    """Solve the same physics on a family of grids and fit eigenvalue-error
    slopes against the spacing.

    `sizes` are per-dimension interior point counts.  The reference spectrum is
    taken from `reference` if given, from the exact oscillator formulas for
    quadratic potentials, and by Richardson extrapolation of the two finest
    grids otherwise.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ValueError("need at least 3 grid sizes")
    if sorted(sizes) != sizes:
        raise ValueError("sizes must be ascending")

    eigs = np.empty((len(sizes), k))
    flags = np.empty((len(sizes), k), dtype=bool)
    deltas = []
    for i, nn in enumerate(sizes):
        grid = build_grid(pot.n, pot.p, half_widths, [nn] * pot.dim)
        op = assemble_hamiltonian(grid, pot, h)
        res = lowest_eigenpairs(op, k, tol=tol, max_iter=max_iter, seed=seed)
        eigs[i] = res.eigenvalues[:k]
        flags[i] = res.converged[:k]
        deltas.append(max(grid.spacing))

    if reference is not None:
        ref = np.asarray(reference, dtype=float)[:k]
    elif pot.kind == "quadratic":
        from .analytic import bo_spectrum

        spec = bo_spectrum(pot.a, pot.b, h, k=k)
        flat = [e for e, mult in spec.levels for _ in range(mult)]
        ref = np.asarray(flat[:k], dtype=float)
    else:
        # Richardson extrapolation assuming O(delta^2) error, two finest grids
        d1, d2 = deltas[-2], deltas[-1]
        r = (d1 / d2) ** 2
        ref = (r * eigs[-1] - eigs[-2]) / (r - 1)

    errors = np.abs(eigs - ref)
    slopes = []
    log_d = np.log(np.asarray(deltas))
    for j in range(k):
        err = errors[:, j]
        if np.max(err) < 1e-12 * max(1.0, abs(ref[j])):
            slopes.append(None)  # errors at round-off; slope not meaningful
            continue
        mask = err > 0
        if mask.sum() < 2:
            slopes.append(None)
            continue
        slope, _ = np.polyfit(log_d[mask], np.log(err[mask]), 1)
        slopes.append(float(slope))
    return ConvergenceStudy(
        deltas=tuple(deltas),
        errors=errors,
        slopes=tuple(slopes),
        reference=tuple(float(x) for x in ref),
        converged=flags,
    )
