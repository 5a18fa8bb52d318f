"""Closed-form spectra of harmonic oscillators, Hermite functions with ladder
relations, dilation scaling, and the eigenvalue counting function.

Energy levels come from weighted multi-index sums sum_i (2 n_i + 1) w_i, with
the slow-dimension weights carrying the semiclassical factor h.  Enumeration is
best-first over multi-indices, so no level below the cutoff is missed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "Frequencies",
    "AnalyticSpectrum",
    "HermiteBasis",
    "oscillator_frequencies",
    "enumerate_spectrum",
    "bo_spectrum",
    "dilate_spectrum",
    "counting_function",
    "hermite_function",
    "hermite_values",
    "build_hermite_basis",
    "ladder_residual",
    "annihilation_residual",
    "apply_dilation",
]

MERGE_RTOL = 1e-9


@dataclass(frozen=True)
class Frequencies:
    w: tuple   # slow-dimension frequencies, ascending
    mu: tuple  # fast-dimension frequencies, ascending


def oscillator_frequencies(a) -> tuple:
    """Ascending square roots of the eigenvalues of a symmetric PD matrix."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    eigs = np.linalg.eigvalsh(a)
    if np.any(eigs <= 0):
        raise ValueError(f"matrix is not positive definite (eigenvalue {eigs.min():g})")
    return tuple(np.sort(np.sqrt(eigs)))


@dataclass(frozen=True)
class AnalyticSpectrum:
    levels: tuple        # ((energy, multiplicity), ...) strictly ascending
    e_max: object | None  # energy cutoff, if used
    k: int | None        # level-count cutoff, if used
    params: dict         # provenance: h / h_scale, weights

    @property
    def truncation_energy(self):
        if self.e_max is not None:
            return self.e_max
        if not self.levels:
            raise ValueError("empty spectrum has no truncation energy")
        return self.levels[-1][0]

    def energies(self) -> list:
        return [e for e, _ in self.levels]

    def flat(self, count: int | None = None) -> list:
        """Eigenvalues repeated by multiplicity, optionally truncated."""
        out = []
        for e, mult in self.levels:
            out.extend([e] * mult)
            if count is not None and len(out) >= count:
                return out[:count]
        return out


def _is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool)
               for v in values)


def enumerate_spectrum(w, h_scale=1, e_max=None, k=None) -> AnalyticSpectrum:
    """Levels h_scale * sum_i (2 n_i + 1) w_i with multiplicities, below a cutoff.

    Exactly one of e_max (energy cutoff, inclusive) and k (number of distinct
    levels) must be given.  When every weight and h_scale are rational the
    enumeration and merging are exact; otherwise coinciding levels are merged
    with 1e-9 relative tolerance.
    """
    w = list(w)
    if not w or any(float(x) <= 0 for x in w):
        raise ValueError("weights must be positive and nonempty")
    if (e_max is None) == (k is None):
        raise ValueError("give exactly one of e_max or k")
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    exact = _is_exact(w) and _is_exact([h_scale])
    if exact:
        w = [Fraction(x) for x in w]
        h_scale = Fraction(h_scale)
    else:
        w = [float(x) for x in w]
        h_scale = float(h_scale)

    def energy(idx):
        return h_scale * sum((2 * n + 1) * wi for n, wi in zip(idx, w))

    def same_level(e, level):
        if exact:
            return e == level
        return abs(e - level) <= MERGE_RTOL * max(1.0, abs(level))

    ground_idx = (0,) * len(w)
    ground = energy(ground_idx)
    params = {"h_scale": h_scale, "w": tuple(w)}
    if e_max is not None and ground > e_max * (1 + (0 if exact else MERGE_RTOL)):
        import warnings

        warnings.warn(f"cutoff {e_max} lies below the ground energy {ground}")
        return AnalyticSpectrum(levels=(), e_max=e_max, k=None, params=params)

    heap = [(ground, ground_idx)]
    seen = {ground_idx}
    levels: list[list] = []  # [energy, multiplicity]
    while heap:
        e, idx = heapq.heappop(heap)
        if e_max is not None:
            limit = e_max if exact else e_max + MERGE_RTOL * max(1.0, abs(float(e_max)))
            if e > limit:
                break
        if levels and same_level(e, levels[-1][0]):
            levels[-1][1] += 1
        else:
            if k is not None and len(levels) == k:
                break
            levels.append([e, 1])
        for d in range(len(w)):
            succ = idx[:d] + (idx[d] + 1,) + idx[d + 1:]
            if succ not in seen:
                seen.add(succ)
                heapq.heappush(heap, (energy(succ), succ))
    return AnalyticSpectrum(
        levels=tuple((e, m) for e, m in levels),
        e_max=e_max,
        k=k,
        params=params,
    )


def bo_spectrum(a, b=None, h=1.0, e_max=None, k=None) -> AnalyticSpectrum:
    """Spectrum of -h^2 Lap_x - Lap_y + <Ax,x> + <By,y>: weighted sums with
    combined weight list (h*w_1, ..., h*w_n, mu_1, ..., mu_p)."""
    if h <= 0:
        raise ValueError("h must be positive")
    w = oscillator_frequencies(a)
    mu = oscillator_frequencies(b) if b is not None and np.size(b) > 0 else ()
    combined = [h * wi for wi in w] + list(mu)
    spec = enumerate_spectrum(combined, h_scale=1, e_max=e_max, k=k)
    return AnalyticSpectrum(levels=spec.levels, e_max=e_max, k=k,
                            params={"h": h, "w": w, "mu": tuple(mu)})


def dilate_spectrum(spec: AnalyticSpectrum, lam) -> AnalyticSpectrum:
    """Energies scale linearly under dilation; multiplicities are unchanged."""
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    levels = tuple((lam * e, m) for e, m in spec.levels)
    params = dict(spec.params)
    params["dilated_by"] = lam
    e_max = None if spec.e_max is None else lam * spec.e_max
    return AnalyticSpectrum(levels=levels, e_max=e_max, k=spec.k, params=params)


def counting_function(spec: AnalyticSpectrum, e) -> int:
    """N(E): number of eigenvalues (with multiplicity) not exceeding E."""
    if e > spec.truncation_energy:
        raise ValueError(
            f"E={e} exceeds the spectrum truncation {spec.truncation_energy}; "
            "the count would be incomplete")
    return sum(m for lev, m in spec.levels if lev <= e)


# ---------------------------------------------------------------------------
# Hermite functions
# ---------------------------------------------------------------------------

def hermite_values(max_order: int, x) -> np.ndarray:
    """Normalized Hermite functions, orders 0..max_order, at the points x.

    Uses the stable normalized three-term recurrence
    psi_{p+1} = x sqrt(2/(p+1)) psi_p - sqrt(p/(p+1)) psi_{p-1}.
    """
    if max_order < 0:
        raise ValueError("order must be >= 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = np.zeros((max_order + 1, x.size))
    vals[0] = np.pi ** -0.25 * np.exp(-x * x / 2)
    if max_order >= 1:
        vals[1] = x * np.sqrt(2.0) * vals[0]
    for p in range(1, max_order):
        vals[p + 1] = (x * np.sqrt(2.0 / (p + 1)) * vals[p]
                       - np.sqrt(p / (p + 1)) * vals[p - 1])
    return vals


def hermite_function(p: int, x):
    """psi_p(x); scalar in, scalar out."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    vals = hermite_values(p, x)[p]
    return float(vals[0]) if scalar else vals


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    max_order: int
    x: np.ndarray
    spacing: float
    values: np.ndarray  # (max_order+1, len(x))

    def gram(self) -> np.ndarray:
        return self.values @ self.values.T * self.spacing


def build_hermite_basis(max_order: int, half_width: float,
                        spacing: float) -> HermiteBasis:
    m = int(round(2 * half_width / spacing)) + 1
    x = np.linspace(-half_width, half_width, m)
    return HermiteBasis(max_order=max_order, x=x, spacing=x[1] - x[0],
                        values=hermite_values(max_order, x))


def _check_hermite_grid(p: int, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    delta = x[1] - x[0]
    need = np.sqrt(2 * p + 3) + 4
    if delta > 0.05 + 1e-12 or x[-1] < need or x[0] > -need:
        raise ValueError(
            f"grid does not resolve order {p + 1}: need spacing <= 0.05 and "
            f"half-width >= {need:.2f}")
    return delta


def _derivative_4th(f: np.ndarray, delta: float) -> np.ndarray:
    """4th-order central first derivative on the interior (trims 2 points/side)."""
    return (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * delta)


def ladder_residual(p: int, x) -> float:
    """Relative defect of (-d/dx + x) psi_p = sqrt(2(p+1)) psi_{p+1} on a grid."""
    if p < 0:
        raise ValueError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    delta = _check_hermite_grid(p, x)
    vals = hermite_values(p + 1, x)
    raised = -_derivative_4th(vals[p], delta) + x[2:-2] * vals[p][2:-2]
    target = np.sqrt(2.0 * (p + 1)) * vals[p + 1][2:-2]
    return float(np.linalg.norm(raised - target) / np.linalg.norm(vals[p + 1][2:-2]))


def annihilation_residual(x) -> float:
    """Relative norm of (d/dx + x) psi_0, which vanishes identically."""
    x = np.asarray(x, dtype=float)
    delta = _check_hermite_grid(0, x)
    psi0 = hermite_values(0, x)[0]
    lowered = _derivative_4th(psi0, delta) + x[2:-2] * psi0[2:-2]
    return float(np.linalg.norm(lowered) / np.linalg.norm(psi0[2:-2]))


def apply_dilation(f, x, theta: float):
    """Dilation theta^{1/2} f(theta x) resampled on the same grid by cubic
    interpolation.  Points carried outside the grid support are set to zero;
    the returned flag reports whether that happened."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if theta == 1.0:
        return f.copy(), False
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(x, f, extrapolate=False)
    out = np.sqrt(theta) * spline(theta * x)
    clipped = bool(np.any(np.isnan(out)))
    return np.nan_to_num(out, nan=0.0), clipped
