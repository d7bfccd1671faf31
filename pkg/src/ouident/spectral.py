"""Matrix analysis for the coefficient triple (A, B, S).

Joint diagonalization of the commuting pair (A, B), the spectral constants
derived from it, and the small matrix-function helpers the other modules
build on (rotation group ``exp(tS)`` and ``exp(tM)``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

TOL_SKEW = 1e-10
TOL_DIAG = 1e-10
CLUSTER_GAP = 1e-8
# kappa(Y) beyond this means the computed eigenbasis is numerically singular
KAPPA_MAX = 1e7


class AssumptionError(ValueError):
    """A structural condition on (A, B, S) does not hold."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def as_complex_matrix(M, name: str = "matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class OUProblem:
    """Coefficients of ``A Δv + <Sx, ∇v> - Bv`` on R^d with values in C^N."""

    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        A = as_complex_matrix(self.A, "A")
        B = as_complex_matrix(self.B, "B")
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        if A.shape != B.shape:
            raise ValueError(f"A and B must have equal shape, got {A.shape} and {B.shape}")
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError(f"S must be square, got shape {S.shape}")
        if S.shape[0] < 2:
            raise ValueError("spatial dimension d must be at least 2")
        if not 1.0 < float(self.p) < np.inf:
            raise ValueError(f"exponent p must satisfy 1 < p < inf, got {self.p}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "p", float(self.p))

    @property
    def d(self) -> int:
        return self.S.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[0]

    def with_p(self, p: float) -> "OUProblem":
        return OUProblem(self.A, self.B, self.S, p)


@dataclass(frozen=True)
class EigenStructure:
    Y: np.ndarray
    Yinv: np.ndarray
    lamA: np.ndarray
    lamB: np.ndarray
    kappaY: float
    clustered: bool = False

    def reconstruct(self, which: str = "A") -> np.ndarray:
        lam = self.lamA if which == "A" else self.lamB
        return (self.Y * lam) @ self.Yinv


@dataclass(frozen=True)
class SpectralConstants:
    a_min: float
    a_max: float
    a_0: float
    a_1: float
    a_2: float
    b_0: float
    beta_A: float
    beta_B: float

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


@dataclass
class Verdict:
    ok: bool
    detail: str = ""
    witness: dict = field(default_factory=dict)


@dataclass
class AssumptionReport:
    A1: Verdict
    A2: Verdict
    A3: Verdict
    A5: Verdict
    # filled in by the dissipativity certificate when one is available
    A4: Verdict | None = None
    notes: list[str] = field(default_factory=list)

    def verdicts(self) -> dict[str, Verdict]:
        out = {"A1": self.A1, "A2": self.A2, "A3": self.A3, "A5": self.A5}
        if self.A4 is not None:
            out["A4"] = self.A4
        return out


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def skew_defect(S: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Largest entry of |S + S^T| and its (1-based) position."""
    D = np.abs(S + S.T)
    i, j = np.unravel_index(int(np.argmax(D)), D.shape)
    # report the lower-triangle entry for an asymmetric pair
    if i < j:
        i, j = j, i
    return float(D[i, j]), (int(i) + 1, int(j) + 1)


def _cluster(values: np.ndarray, gap: float) -> list[list[int]]:
    """Group eigenvalues closer than ``gap`` relative to the spectral scale."""
    scale = max(1.0, float(np.max(np.abs(values))))
    clusters: list[list[int]] = []
    for i, v in enumerate(values):
        for c in clusters:
            if np.min(np.abs(values[c] - v)) <= gap * scale:
                c.append(i)
                break
        else:
            clusters.append([i])
    return clusters


def _sort_key(z: complex) -> tuple[float, float]:
    return (round(z.real, 12), round(z.imag, 12))


def eigenstructure(A, B, tol: float = TOL_DIAG, gap: float = CLUSTER_GAP) -> EigenStructure:
    """Joint eigenbasis Y with ``A = Y diag(lamA) Y^-1`` and ``B = Y diag(lamB) Y^-1``.

    Eigenvalues of A within a relative distance ``gap`` form one cluster; the
    eigenspace of each cluster is taken as a null space (SVD) and B is
    diagonalized inside it. Raises :class:`AssumptionError` when the pair
    has no joint eigenbasis within ``tol``.
    """
    A = as_complex_matrix(A, "A")
    B = as_complex_matrix(B, "B")
    N = A.shape[0]
    normA = max(np.linalg.norm(A, 2), 1e-300)
    normB = np.linalg.norm(B, 2)
    lam = np.linalg.eigvals(A)
    clusters = _cluster(lam, gap)

    cols = []
    for idx in clusters:
        mu = np.mean(lam[idx])
        m = len(idx)
        _, sv, Vh = np.linalg.svd(A - mu * np.eye(N))
        V = Vh.conj().T[:, N - m:]
        if sv[N - m] > np.sqrt(gap) * normA:
            raise AssumptionError(
                f"A1 violated: A is defective at eigenvalue {mu:.6g}",
                residual=float(sv[N - m] / normA),
            )
        # B must leave the eigenspace invariant
        C = V.conj().T @ B @ V
        inv_res = np.linalg.norm(B @ V - V @ C, 2) / max(normB, 1.0)
        if inv_res > np.sqrt(tol):
            raise AssumptionError(
                f"A1 violated: B does not preserve the eigenspace of A at {mu:.6g}",
                residual=float(inv_res),
            )
        if m == 1:
            W = np.ones((1, 1), dtype=complex)
        elif np.linalg.norm(C - C.conj().T) <= tol * max(np.linalg.norm(C), 1.0):
            _, W = np.linalg.eigh(hermitian_part(C))
        else:
            mus, W = np.linalg.eig(C)
            order = sorted(range(m), key=lambda i: _sort_key(mus[i]))
            mus, W = mus[order], W[:, order]
        Vc = V @ W
        Vc = Vc / np.linalg.norm(Vc, axis=0)
        cols.extend(Vc.T)

    Y = np.column_stack(cols)
    kappa = float(np.linalg.cond(Y, 2))
    if not np.isfinite(kappa) or kappa > KAPPA_MAX:
        raise AssumptionError("A1 violated: eigenvector matrix is singular", residual=kappa)
    Yinv = np.linalg.inv(Y)
    # eigenvalues as Rayleigh quotients against the final basis
    lamA = np.diag(Yinv @ A @ Y).copy()
    lamB = np.diag(Yinv @ B @ Y).copy()
    resA = np.linalg.norm((Y * lamA) @ Yinv - A, 2) / normA
    resB = np.linalg.norm((Y * lamB) @ Yinv - B, 2) / max(normB, 1.0)
    res = max(resA, resB)
    if res > tol * max(1.0, kappa):
        raise AssumptionError("A1 violated: joint diagonalization residual too large", residual=float(res))
    return EigenStructure(Y, Yinv, lamA, lamB, max(kappa, 1.0), clustered=any(len(c) > 1 for c in clusters))


def check_assumptions(problem: OUProblem, tol_skew: float = TOL_SKEW, tol_diag: float = TOL_DIAG) -> AssumptionReport:
    """Verdicts for A1, A2, A3 and A5; A4 is left to the dissipativity certificate."""
    A, B, S = problem.A, problem.B, problem.S
    notes = []

    try:
        eig = eigenstructure(A, B, tol=tol_diag)
        a1 = Verdict(True, f"kappa(Y) = {eig.kappaY:.6g}", {"kappaY": eig.kappaY})
        if eig.clustered:
            notes.append(f"A has degenerate eigenvalues; clustered with relative gap {CLUSTER_GAP:g}")
    except AssumptionError as exc:
        a1 = Verdict(False, str(exc), {"residual": exc.residual})

    lam = np.linalg.eigvals(A)
    i = int(np.argmin(lam.real))
    a2 = Verdict(bool(lam[i].real > 0), f"min Re sigma(A) = {lam[i].real:.6g}",
                 {} if lam[i].real > 0 else {"eigenvalue": [lam[i].real, lam[i].imag]})

    h, U = np.linalg.eigh(hermitian_part(A))
    a3 = Verdict(bool(h[0] > 0), f"beta_A = {h[0]:.6g}",
                 {} if h[0] > 0 else {"vector": [[z.real, z.imag] for z in U[:, 0]], "value": float(h[0])})

    defect, pos = skew_defect(S)
    scale = max(1.0, float(np.max(np.abs(S))))
    ok5 = defect <= tol_skew * scale
    a5 = Verdict(bool(ok5), f"max |S + S^T| = {defect:.3g}", {} if ok5 else {"entry": list(pos), "defect": defect})
    return AssumptionReport(a1, a2, a3, a5, notes=notes)


def b_constants(B) -> tuple[float, float]:
    """``(b_0, beta_B)``; always defined."""
    B = as_complex_matrix(B, "B")
    b0 = float(np.min(np.linalg.eigvals(B).real))
    betaB = -float(np.linalg.eigvalsh(hermitian_part(B))[0])
    return b0, betaB


def spectral_constants(A, B) -> SpectralConstants:
    """Constants a_min, a_max, a_0, a_1, a_2, b_0, beta_A, beta_B.

    Raises :class:`AssumptionError` if A has an eigenvalue with
    nonpositive real part.
    """
    A = as_complex_matrix(A, "A")
    lam = np.linalg.eigvals(A)
    a0 = float(np.min(lam.real))
    if a0 <= 0:
        raise AssumptionError(f"A2 violated: min Re sigma(A) = {a0:.6g}")
    a_min = float(np.min(np.abs(lam)))
    a_max = float(np.max(np.abs(lam)))
    b0, betaB = b_constants(B)
    betaA = float(np.linalg.eigvalsh(hermitian_part(A))[0])
    return SpectralConstants(
        a_min=a_min,
        a_max=a_max,
        a_0=a0,
        a_1=a_max**2 / (a_min * a0),
        a_2=4 * a_max**2 / a0,
        b_0=b0,
        beta_A=betaA,
        beta_B=betaB,
    )


def rotation(S, t: float) -> np.ndarray:
    """Orthogonal matrix ``exp(tS)`` for skew-symmetric S."""
    S = np.asarray(S, dtype=float)
    R = scipy.linalg.expm(t * S)
    # polar projection removes the O(eps) drift from orthogonality
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def matrix_exp(M, t: float = 1.0) -> np.ndarray:
    return scipy.linalg.expm(t * np.asarray(M, dtype=complex))
