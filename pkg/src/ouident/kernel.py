"""Matrix heat kernel of the perturbed Ornstein-Uhlenbeck operator and its moments.

All evaluations go through the joint eigenbasis: in eigen-coordinates the
kernel is diagonal with scalar Gaussian entries

    (4 pi t lam_j)^(-d/2) exp(-lamB_j t - r^2 / (4 t lam_j)),

where ``r = |exp(tS) x - xi|`` for H and ``r = |psi|`` for K. Powers use the
principal branch, which is safe because Re lam_j > 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .spectral import (
    EigenStructure,
    OUProblem,
    SpectralConstants,
    matrix_exp,
    rotation,
    spectral_constants,
)


class QuadratureRadiusError(ValueError):
    def __init__(self, radius: float, required: float):
        super().__init__(f"quadrature radius {radius:.6g} is below the required {required:.6g}")
        self.required = required


@dataclass(frozen=True)
class MomentQuad:
    """Composite Gauss-Legendre rule on [-R, R] per axis.

    ``radius`` defaults to ``radius_factor * sqrt(t a_max^2 / a_0)``; the
    Gaussian envelope then sits below ``exp(-radius_factor**2 / 4)``.
    """

    nodes: int = 16
    panels: int = 8
    radius_factor: float = 12.0
    radius: float | None = None

    def rule(self, R: float, panels: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        panels = panels or self.panels
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        edges = np.linspace(-R, R, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


MIN_RADIUS_FACTOR = 8.0


@dataclass
class MomentData:
    k: int
    t: float
    value: np.ndarray
    error_estimate: float
    radius: float


def _check_t(t: float):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


def _check_A2(eig: EigenStructure):
    if np.min(eig.lamA.real) <= 0:
        raise ValueError("A2 violated: kernel needs Re sigma(A) > 0")


def kernel_diagonal(eig: EigenStructure, r2, t: float, d: int) -> np.ndarray:
    """Eigen-coordinate kernel entries for squared distances ``r2``; shape ``r2.shape + (N,)``."""
    _check_t(t)
    _check_A2(eig)
    r2 = np.asarray(r2, dtype=float)[..., None]
    lamA, lamB = eig.lamA, eig.lamB
    pref = np.power(4 * np.pi * t * lamA, -0.5 * d)
    return pref * np.exp(-lamB * t - r2 / (4 * t * lamA))


def _to_matrix(eig: EigenStructure, diag: np.ndarray) -> np.ndarray:
    return np.einsum("ij,...j,jk->...ik", eig.Y, diag, eig.Yinv)


def heat_kernel(problem: OUProblem, eig: EigenStructure, x, xi, t: float) -> np.ndarray:
    """H(x, xi, t); ``x`` and ``xi`` may carry leading batch axes."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    R = rotation(problem.S, t)
    y = x @ R.T - xi
    return _to_matrix(eig, kernel_diagonal(eig, np.sum(y * y, axis=-1), t, problem.d))


def convolution_kernel(problem: OUProblem, eig: EigenStructure, psi, t: float) -> np.ndarray:
    """K(psi, t) = (4 pi t A)^(-d/2) exp(-Bt - |psi|^2 (4tA)^(-1))."""
    psi = np.asarray(psi, dtype=float)
    return _to_matrix(eig, kernel_diagonal(eig, np.sum(psi * psi, axis=-1), t, problem.d))


def kernel_envelope(problem: OUProblem, eig: EigenStructure, x, xi, t: float,
                    constants: SpectralConstants | None = None) -> np.ndarray:
    """Upper bound on ``|H(x, xi, t)|_2`` from the spectral constants."""
    c = constants or spectral_constants(problem.A, problem.B)
    d = problem.d
    y = np.asarray(x, dtype=float) @ rotation(problem.S, t).T - np.asarray(xi, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    return (eig.kappaY * (4 * np.pi * t * c.a_min) ** (-0.5 * d) * np.exp(-c.b_0 * t)
            * np.exp(-c.a_0 * r2 / (4 * t * c.a_max**2)))


def required_radius(constants: SpectralConstants, t: float) -> float:
    return MIN_RADIUS_FACTOR * np.sqrt(t * constants.a_max**2 / constants.a_0)


def _radius(constants: SpectralConstants, t: float, quad: MomentQuad) -> float:
    need = required_radius(constants, t)
    if quad.radius is not None:
        if quad.radius < need:
            raise QuadratureRadiusError(quad.radius, need)
        return float(quad.radius)
    return quad.radius_factor / MIN_RADIUS_FACTOR * need


def _tensor_grid(d: int, x: np.ndarray, w: np.ndarray):
    pts = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    return pts, wts


def _moment_sum(problem, eig, k, t, R, quad, panels):
    x, w = quad.rule(R, panels)
    pts, wts = _tensor_grid(problem.d, x, w)
    K = convolution_kernel(problem, eig, pts, t)
    if k == 0:
        return np.einsum("q,qab->ab", wts, K)
    if k == 1:
        return np.einsum("q,qi,qab->iab", wts, pts, K)
    return np.einsum("q,qi,qj,qab->ijab", wts, pts, pts, K)


def moment_matrix(problem: OUProblem, eig: EigenStructure, k: int, t: float,
                  quad: MomentQuad = MomentQuad()) -> MomentData:
    """Quadrature of the kernel moments of order 0, 1 or 2.

    Returns an ``(N, N)`` array for k=0, ``(d, N, N)`` for k=1 and
    ``(d, d, N, N)`` for k=2. The error estimate is the difference to the
    same rule with half the panels.
    """
    if k not in (0, 1, 2):
        raise ValueError("moment order must be 0, 1 or 2")
    _check_t(t)
    c = spectral_constants(problem.A, problem.B)
    R = _radius(c, t, quad)
    fine = _moment_sum(problem, eig, k, t, R, quad, quad.panels)
    coarse = _moment_sum(problem, eig, k, t, R, quad, max(1, quad.panels // 2))
    return MomentData(k, t, fine, float(np.max(np.abs(fine - coarse))), R)


def moment_identity(problem: OUProblem, k: int, t: float) -> np.ndarray:
    """Closed-form moments: e^{-Bt}, zero, and 2t e^{-Bt} A delta_ij."""
    N, d = problem.N, problem.d
    E = matrix_exp(-problem.B, t)
    if k == 0:
        return E
    if k == 1:
        return np.zeros((d, N, N), dtype=complex)
    out = np.zeros((d, d, N, N), dtype=complex)
    for i in range(d):
        out[i, i] = 2 * t * E @ problem.A
    return out


def moment_abs(problem: OUProblem, eig: EigenStructure, k: int, t: float,
               quad: MomentQuad = MomentQuad(), method: str = "radial") -> float:
    """Absolute moment ``int |K(psi,t)|_2 |psi|^k dpsi``.

    K depends on psi only through |psi|, so the default ``radial`` method
    integrates ``|S^{d-1}| int_0^R |K(r)|_2 r^(k+d-1) dr`` with composite
    Gauss-Legendre. ``tensor`` integrates over the d-dimensional box
    instead; it is slower and loses accuracy at the cusp of |psi|^k for odd k.
    """
    _check_t(t)
    c = spectral_constants(problem.A, problem.B)
    R = _radius(c, t, quad)
    d = problem.d
    if method == "radial":
        x, w = np.polynomial.legendre.leggauss(quad.nodes)
        panels = 8 * quad.panels
        edges = np.linspace(0.0, R, panels + 1)
        half = 0.5 * np.diff(edges)
        r = (0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * x).ravel()
        wr = (half[:, None] * w).ravel()
        K = _to_matrix(eig, kernel_diagonal(eig, r * r, t, d))
        nrm = np.linalg.norm(K, 2, axis=(-2, -1))
        sphere = 2 * np.pi ** (0.5 * d) / gamma_fn(0.5 * d)
        return float(sphere * np.sum(wr * nrm * r ** (k + d - 1)))
    if method == "tensor":
        x, w = quad.rule(R)
        pts, wts = _tensor_grid(d, x, w)
        K = convolution_kernel(problem, eig, pts, t)
        nrm = np.linalg.norm(K, 2, axis=(-2, -1))
        return float(np.sum(wts * nrm * np.linalg.norm(pts, axis=1) ** k))
    raise ValueError(f"unknown method {method!r}")


def moment_bound(constants: SpectralConstants, kappaY: float, d: int, k: int, t: float) -> float:
    """kappa a_1^{d/2} e^{-b_0 t} a_2^{k/2} Gamma((d+k)/2)/Gamma(d/2) t^{k/2}."""
    c = constants
    return float(kappaY * c.a_1 ** (0.5 * d) * np.exp(-c.b_0 * t) * c.a_2 ** (0.5 * k)
                 * gamma_fn(0.5 * (d + k)) / gamma_fn(0.5 * d) * t ** (0.5 * k))


def scaling_exponent(problem: OUProblem, eig: EigenStructure, k: int, ts,
                     quad: MomentQuad = MomentQuad()) -> float:
    """Least-squares slope of log moment_abs against log t.

    The zero-order factor e^{-Bt} is stripped first (B replaced by 0), since
    it multiplies the diffusive t^{k/2} law by a non-power factor.
    """
    free = OUProblem(problem.A, np.zeros_like(problem.B), problem.S, problem.p)
    eig0 = EigenStructure(eig.Y, eig.Yinv, eig.lamA, np.zeros_like(eig.lamB), eig.kappaY, eig.clustered)
    ts = np.asarray(ts, dtype=float)
    m = np.array([moment_abs(free, eig0, k, t, quad) for t in ts])
    return float(np.polyfit(np.log(ts), np.log(m), 1)[0])


def heat_equation_residual(problem: OUProblem, eig: EigenStructure, x, xi, t: float,
                           dt: float = 1e-5) -> float:
    """Relative gap between a centered time difference of H and L_infty H in x.

    L_infty acts on the x-variable of each column of H with exact Gaussian
    derivatives.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    d = problem.d
    R = rotation(problem.S, t)
    y = R @ x - xi
    r2 = float(y @ y)
    lam, lamB = eig.lamA, eig.lamB
    f = kernel_diagonal(eig, r2, t, d)
    # grad_x f_j = -R^T y / (2 t lam_j) f_j ; Laplacian is rotation invariant
    grad = -(R.T @ y)[:, None] / (2 * t * lam) * f
    lap = (r2 / (4 * t**2 * lam**2) - d / (2 * t * lam)) * f
    drift = (problem.S @ x) @ grad
    L = _to_matrix(eig, lam * lap + drift - lamB * f)
    dH = (heat_kernel(problem, eig, x, xi, t + dt) - heat_kernel(problem, eig, x, xi, t - dt)) / (2 * dt)
    return float(np.linalg.norm(dH - L) / max(np.linalg.norm(L), 1e-300))
