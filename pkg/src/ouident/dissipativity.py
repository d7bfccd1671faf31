"""Certification of the L^p-dissipativity constant gamma_A.

gamma_A is the minimum of

    F(z, w) = |z|^2 Re<w, Aw> + (p - 2) Re<w, z> Re<z, Aw>

over unit vectors z, w in C^N, with <u, v> = conj(u)^T v. A is
L^p-dissipative in the required sense iff gamma_A > 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools

import numpy as np

from .spectral import as_complex_matrix, hermitian_part


class CertificationError(RuntimeError):
    """No multistart run converged; carries the best incumbent anyway."""

    def __init__(self, message: str, certificate: "DissipativityCertificate"):
        super().__init__(message)
        self.certificate = certificate


@dataclass
class DissipativityCertificate:
    p: float
    gamma_A: float
    z_star: np.ndarray
    w_star: np.ndarray
    method: str
    n_starts: int = 0
    residual: float = 0.0
    certified: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def passes(self) -> bool:
        return self.certified and self.gamma_A > 0

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "gamma_A": float(self.gamma_A),
            "z_star": [[float(c.real), float(c.imag)] for c in self.z_star],
            "w_star": [[float(c.real), float(c.imag)] for c in self.w_star],
            "method": self.method,
            "n_starts": self.n_starts,
            "residual": float(self.residual),
            "certified": self.certified,
            "passes": self.passes,
        }


def form_value(A, p: float, z, w) -> float:
    A = as_complex_matrix(A, "A")
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    Aw = A @ w
    return float(
        np.vdot(z, z).real * np.vdot(w, Aw).real
        + (p - 2) * np.vdot(w, z).real * np.vdot(z, Aw).real
    )


def scalar_gamma(a: complex, p: float) -> float:
    """Exact gamma for N = 1: ``(p/2) Re a - (|p-2|/2) |a|``."""
    a = complex(a)
    return 0.5 * p * a.real - 0.5 * abs(p - 2) * abs(a)


def _form_matrix(A: np.ndarray, p: float, w: np.ndarray) -> np.ndarray:
    """Real symmetric 2N x 2N matrix of the quadratic form z -> F(z, w)."""
    Aw = A @ w
    a = np.vdot(w, Aw).real
    u = np.concatenate([w.real, w.imag])
    v = np.concatenate([Aw.real, Aw.imag])
    M = a * np.eye(2 * len(w)) + 0.5 * (p - 2) * (np.outer(u, v) + np.outer(v, u))
    return M


def _sphere_grid(N: int, resolution: int):
    """Unit vectors of C^N modulo a global phase, on a product angle grid."""
    if N == 1:
        yield np.ones(1, dtype=complex)
        return
    thetas = np.linspace(0.0, 0.5 * np.pi, resolution)
    phis = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    for angles in itertools.product(thetas, repeat=N - 1):
        mod = np.ones(N)
        for k, th in enumerate(angles):
            mod[k] *= np.cos(th)
            mod[k + 1 :] *= np.sin(th)
        for phases in itertools.product(phis, repeat=N - 1):
            yield mod * np.exp(1j * np.concatenate([[0.0], phases]))


def gamma_oracle(A, p: float, resolution: int = 64) -> float:
    """Brute-force upper estimate of gamma_A.

    w runs over an angle grid of the unit sphere (global phase removed, F is
    invariant under it); for each w the minimum over z is the smallest
    eigenvalue of the real quadratic form z -> F(z, w). Cost is
    ``resolution**(2N-2)`` symmetric eigen-solves, so keep N <= 2.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    A = as_complex_matrix(A, "A")
    best = np.inf
    for w in _sphere_grid(A.shape[0], resolution):
        best = min(best, np.linalg.eigvalsh(_form_matrix(A, p, w))[0])
    return float(best)


def _normalize(X: np.ndarray) -> np.ndarray:
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def _batch_value(A, p, Z, W):
    AW = W @ A.T
    zz = np.sum(np.abs(Z) ** 2, axis=1)
    a = np.sum(W.conj() * AW, axis=1).real
    u = np.sum(W.conj() * Z, axis=1).real
    v = np.sum(Z.conj() * AW, axis=1).real
    return zz * a + (p - 2) * u * v


def _batch_grad(A, H, p, Z, W):
    """Riemannian gradients of F on the product of unit spheres (complex form)."""
    AW = W @ A.T
    AhZ = Z @ A.conj()
    zz = np.sum(np.abs(Z) ** 2, axis=1)[:, None]
    a = np.sum(W.conj() * AW, axis=1).real[:, None]
    u = np.sum(W.conj() * Z, axis=1).real[:, None]
    v = np.sum(Z.conj() * AW, axis=1).real[:, None]
    gz = 2 * a * Z + (p - 2) * (v * W + u * AW)
    gw = 2 * zz * (W @ H.T) + (p - 2) * (v * Z + u * AhZ)
    gz = gz - np.sum(gz.conj() * Z, axis=1).real[:, None] * Z
    gw = gw - np.sum(gw.conj() * W, axis=1).real[:, None] * W
    return gz, gw


def _descend(A, p, Z, W, max_iter, tol):
    """Projected gradient with Barzilai-Borwein trial steps and Armijo backtracking."""
    H = hermitian_part(A)
    f = _batch_value(A, p, Z, W)
    gz, gw = _batch_grad(A, H, p, Z, W)
    gnorm = np.sqrt(np.sum(np.abs(gz) ** 2 + np.abs(gw) ** 2, axis=1))
    step = np.full(len(Z), 1.0 / max(1.0, np.linalg.norm(A, 2) * max(1.0, abs(p - 2)) * 4))
    active = gnorm > tol
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        alpha = step[idx].copy()
        g2 = gnorm[idx] ** 2
        for _ in range(60):
            Zn = _normalize(Z[idx] - alpha[:, None] * gz[idx])
            Wn = _normalize(W[idx] - alpha[:, None] * gw[idx])
            fn = _batch_value(A, p, Zn, Wn)
            # round-off slack, otherwise the line search stalls near 1e-8
            slack = 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(f[idx]))
            bad = fn > f[idx] - 1e-4 * alpha * g2 + slack
            if not bad.any():
                break
            alpha = np.where(bad, 0.5 * alpha, alpha)
        gzn, gwn = _batch_grad(A, H, p, Zn, Wn)
        # BB1 step from the difference of iterates and gradients
        sz, sw = Zn - Z[idx], Wn - W[idx]
        yz, yw = gzn - gz[idx], gwn - gw[idx]
        ss = np.sum(np.abs(sz) ** 2 + np.abs(sw) ** 2, axis=1)
        sy = np.sum((sz.conj() * yz + sw.conj() * yw).real, axis=1)
        bb = np.where(sy > 1e-300, ss / np.where(sy > 1e-300, sy, 1.0), 2 * alpha)
        step[idx] = np.clip(bb, 1e-8, 1e3)
        Z[idx], W[idx], f[idx] = Zn, Wn, fn
        gz[idx], gw[idx] = gzn, gwn
        gnorm[idx] = np.sqrt(np.sum(np.abs(gzn) ** 2 + np.abs(gwn) ** 2, axis=1))
        active = gnorm > tol
    return Z, W, f, gnorm


def certify_gamma(A, p: float, n_starts: int = 64, max_iter: int = 5000,
                  tol: float = 1e-10, seed: int = 0) -> DissipativityCertificate:
    """Minimize F over unit pairs and return a certificate for gamma_A.

    N = 1 uses the closed form. Otherwise ``n_starts`` seeded random starts
    run projected gradient descent; the winner is re-polished by an exact
    minimization over z followed by another descent.
    """
    A = as_complex_matrix(A, "A")
    N = A.shape[0]
    p = float(p)
    if N == 1:
        a = A[0, 0]
        # minimizing relative phase of w against z
        delta = 0.0 if p == 2 else 0.5 * (np.pi - np.angle(a)) if p > 2 else -0.5 * np.angle(a)
        z = np.ones(1, dtype=complex)
        w = np.exp(1j * delta) * z
        g = scalar_gamma(a, p)
        return DissipativityCertificate(p, g, z, w, "closed-form", 0, abs(form_value(A, p, z, w) - g))

    rng = np.random.default_rng(seed)
    shape = (n_starts, N)
    Z = _normalize(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    W = _normalize(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    Z, W, f, gnorm = _descend(A, p, Z, W, max_iter, tol)

    converged = gnorm <= tol
    pool = np.flatnonzero(converged) if converged.any() else np.arange(n_starts)
    # first index among ties keeps the reduction order fixed
    best = int(pool[np.argmin(f[pool])])
    z, w = Z[best].copy(), W[best].copy()

    # polish: exact z for the incumbent w, then descend once more
    vals, vecs = np.linalg.eigh(_form_matrix(A, p, w))
    z_exact = vecs[:N, 0] + 1j * vecs[N:, 0]
    if vals[0] < form_value(A, p, z, w):
        z = z_exact / np.linalg.norm(z_exact)
    Zr, Wr, fr, gr = _descend(A, p, z[None, :].copy(), w[None, :].copy(), max_iter, tol)
    if fr[0] <= f[best] and gr[0] <= tol:
        z, w, res = Zr[0], Wr[0], float(gr[0])
    else:
        res = float(gnorm[best])
    gamma = form_value(A, p, z, w)
    cert = DissipativityCertificate(p, gamma, z, w, "multistart", n_starts, res,
                                    certified=bool(converged.any()))
    if not converged.any():
        cert.notes.append("no start reached the gradient tolerance; incumbent is not certified")
        raise CertificationError("projected gradient did not converge from any start", cert)
    return cert
