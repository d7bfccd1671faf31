"""The Ornstein-Uhlenbeck semigroup on periodic grids.

``[T(t) v](x) = [G(t) v](exp(tS) x)`` where G(t) is the diffusion semigroup
with zero-order term. In eigen-coordinates G(t) is the scalar Fourier
multiplier ``exp(-t lamA_j |k|^2 - t lamB_j)`` per component, applied
exactly on the periodic grid. The rotation is a final resampling.

Two resamplers are available. ``shear`` (default) splits exp(tS) into
planar rotations, each into exact quarter turns and three FFT shears, so
band-limited decayed data are rotated to near machine precision.
``cubic`` uses tensor cubic interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import GridField, GridSpec, SchwartzFunction, apply_L_infty, interpolate, lp_norm, sample
from .kernel import kernel_diagonal
from .spectral import EigenStructure, OUProblem, eigenstructure, rotation

DIRECT_MAX_N = 64


class ResolutionError(ValueError):
    """Time step too small for the grid to resolve the kernel width."""

    def __init__(self, message: str, min_spacing: float | None = None):
        super().__init__(message)
        self.min_spacing = min_spacing


def givens_factors(R: np.ndarray) -> list[tuple[int, int, float]]:
    """Planar rotations ``(i, j, theta)`` whose ordered product is R.

    Each factor is the identity except for ``[[c, -s], [s, c]]`` in rows and
    columns (i, j). R must be orthogonal with determinant 1.
    """
    d = R.shape[0]
    M = R.copy()
    factors = []
    for j in range(d - 1):
        for i in range(d - 1, j, -1):
            a, b = M[j, j], M[i, j]
            if abs(b) < 1e-15:
                continue
            # left-multiply by the rotation that zeroes M[i, j] against M[j, j]
            theta = np.arctan2(b, a)
            c, s = np.cos(theta), np.sin(theta)
            rows = M[[j, i], :].copy()
            M[j, :] = c * rows[0] + s * rows[1]
            M[i, :] = -s * rows[0] + c * rows[1]
            factors.append((j, i, theta))
    # M is now diagonal with entries +-1 and an even number of -1
    neg = [k for k in range(d) if M[k, k] < 0]
    for a, b in zip(neg[::2], neg[1::2]):
        factors.append((a, b, np.pi))
    return factors


def _planar_matrix(d: int, i: int, j: int, theta: float) -> np.ndarray:
    G = np.eye(d)
    c, s = np.cos(theta), np.sin(theta)
    G[i, i], G[i, j], G[j, i], G[j, j] = c, -s, s, c
    return G


@dataclass
class SemigroupPlan:
    problem: OUProblem
    eig: EigenStructure
    spec: GridSpec
    resample: str = "shear"
    k: list = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.problem.d != self.spec.d:
            raise ValueError("problem and grid dimensions differ")
        if np.min(self.eig.lamA.real) <= 0:
            raise ValueError("A2 violated: semigroup needs Re sigma(A) > 0")
        if self.resample not in ("shear", "cubic"):
            raise ValueError(f"unknown resampler {self.resample!r}")
        kk = 2 * np.pi * np.fft.fftfreq(self.spec.n, self.spec.h)
        self.k = [kk] * self.spec.d
        grids = np.meshgrid(*self.k, indexing="ij")
        self.k2 = sum(g * g for g in grids)
        self._rotating = bool(np.any(self.problem.S != 0))

    @classmethod
    def build(cls, problem: OUProblem, spec: GridSpec, resample: str = "shear") -> "SemigroupPlan":
        return cls(problem, eigenstructure(problem.A, problem.B), spec, resample)

    def multiplier(self, t: float) -> np.ndarray:
        """exp(-t lamA_j |k|^2 - t lamB_j), shape ``(n,)*d + (N,)``."""
        return np.exp(-t * (self.k2[..., None] * self.eig.lamA + self.eig.lamB))

    def diffuse(self, values: np.ndarray, t: float) -> np.ndarray:
        axes = tuple(range(self.spec.d))
        U = values @ self.eig.Yinv.T
        U = np.fft.ifftn(np.fft.fftn(U, axes=axes) * self.multiplier(t), axes=axes)
        return U @ self.eig.Y.T

    def rotate(self, values: np.ndarray, t: float) -> np.ndarray:
        """Resample ``values`` at exp(tS) x."""
        R = rotation(self.problem.S, t)
        if self.resample == "cubic":
            pts = self.spec.points() @ R.T
            # |Rx| = |x| can still leave the box at the corners; fold periodically
            L = self.spec.L
            pts = (pts + L) % (2 * L) - L
            return interpolate(GridField(self.spec, values), pts)
        out = values
        for i, j, theta in givens_factors(R):
            out = self._planar_rotate(out, i, j, theta)
        return out

    def _planar_rotate(self, u: np.ndarray, i: int, j: int, theta: float) -> np.ndarray:
        """w(x) = u(G x), G the rotation by theta in the (i, j) plane."""
        q = int(np.round(theta / (np.pi / 2)))
        phi = theta - q * np.pi / 2
        # u(G x) with G = Q^q G_phi: first apply Q^q to u, then G_phi
        for _ in range(q % 4):
            u = self._quarter_turn(u, i, j)
        if abs(phi) < 1e-15:
            return u
        alpha, beta = -np.tan(phi / 2), np.sin(phi)
        u = self._shear(u, i, j, alpha)
        u = self._shear(u, j, i, beta)
        return self._shear(u, i, j, alpha)

    def _quarter_turn(self, u: np.ndarray, i: int, j: int) -> np.ndarray:
        # w(x) = u(..., x_i' = -x_j, ..., x_j' = x_i, ...)
        n = self.spec.n
        idx_neg = (-np.arange(n)) % n  # node of -x
        w = np.swapaxes(u, i, j)
        return np.take(w, idx_neg, axis=j)

    def _shear(self, u: np.ndarray, a: int, b: int, coef: float) -> np.ndarray:
        """w(x) = u(x + coef * x_b e_a) by a Fourier shift along axis a."""
        xb = self.spec.axis()
        ka = self.k[a]
        shape = [1] * u.ndim
        shape[a], shape[b] = ka.size, xb.size
        phase = np.exp(1j * coef * np.multiply.outer(ka, xb) if a < b
                       else 1j * coef * np.multiply.outer(xb, ka)).reshape(shape)
        return np.fft.ifft(np.fft.fft(u, axis=a) * phase, axis=a)

    def apply(self, v: GridField, t: float) -> GridField:
        return apply_T(self, v, t)


def apply_T(plan: SemigroupPlan, v: GridField, t: float) -> GridField:
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return v
    if v.spec != plan.spec or v.N != plan.problem.N:
        raise ValueError("field does not match the plan")
    out = plan.diffuse(v.values, t)
    if plan._rotating:
        out = plan.rotate(out, t)
    return GridField(plan.spec, out)


def apply_T_direct(problem: OUProblem, eig: EigenStructure, v: GridField, t: float,
                   allow_large: bool = False, chunk: int = 512) -> GridField:
    """Nodal quadrature of ``int H(x, xi, t) v(xi) dxi`` over the grid; O(n^(2d)).

    H is applied in its diagonal eigen-form, ``Y diag(f_j) Y^-1``, which is
    the same sum with N instead of N^2 scalar kernels.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    spec = v.spec
    if spec.n > DIRECT_MAX_N and not allow_large:
        raise ValueError(f"direct quadrature refuses n > {DIRECT_MAX_N} per axis; pass allow_large=True")
    X = spec.points().reshape(-1, spec.d)
    RX = X @ rotation(problem.S, t).T
    W = v.values.reshape(-1, v.N) @ eig.Yinv.T
    out = np.empty_like(W)
    for s in range(0, X.shape[0], chunk):
        diff = RX[s : s + chunk, None, :] - X[None, :, :]
        f = kernel_diagonal(eig, np.sum(diff * diff, axis=-1), t, spec.d)
        out[s : s + chunk] = np.einsum("pqj,qj->pj", f, W) * spec.cell
    return GridField(spec, (out @ eig.Y.T).reshape(v.values.shape))


def semigroup_law_check(plan: SemigroupPlan, v: GridField, t: float, s: float, p: float = 2.0) -> float:
    """``|T(t+s) v - T(t) T(s) v|_p / |v|_p``."""
    lhs = apply_T(plan, v, t + s)
    rhs = apply_T(plan, apply_T(plan, v, s), t)
    return lp_norm(lhs - rhs, p) / lp_norm(v, p)


@dataclass
class GeneratorDefect:
    h: float
    field: GridField
    norm: float


def check_resolvable(spec: GridSpec, a_min: float, h_time: float):
    width = np.sqrt(2 * a_min * h_time)
    if width < 2 * spec.h:
        raise ResolutionError(
            f"grid cannot resolve kernel: sqrt(2 a_min h) = {width:.4g} < 2 h_grid = {2 * spec.h:.4g}",
            min_spacing=width / 2,
        )


def generator_difference(problem: OUProblem, phi: SchwartzFunction, spec: GridSpec, h_time: float,
                         p: float = 2.0, plan: SemigroupPlan | None = None) -> GeneratorDefect:
    """``(T(h) phi - phi)/h - L_infty phi`` on the grid, L_infty phi exact."""
    if not h_time > 0:
        raise ValueError("h_time must be positive")
    plan = plan or SemigroupPlan.build(problem, spec)
    check_resolvable(spec, float(np.min(np.abs(plan.eig.lamA))), h_time)
    v = sample(phi, spec)
    Lphi = sample(apply_L_infty(problem, phi), spec)
    diff = (apply_T(plan, v, h_time) - v) * (1 / h_time) - Lphi
    return GeneratorDefect(h_time, diff, lp_norm(diff, p))


def fitted_order(hs, values) -> float:
    """Least-squares slope of log(values) against log(hs)."""
    return float(np.polyfit(np.log(np.asarray(hs, float)), np.log(np.asarray(values, float)), 1)[0])
