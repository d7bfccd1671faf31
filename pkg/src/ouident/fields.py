"""Grid fields, polynomial-times-Gaussian test functions and the formal operator.

Grids are periodic boxes [-L, L)^d with nodes ``-L + i h``, ``h = 2L/n``.
Field values are stored with shape ``(n,)*d + (N,)``. Derivatives use
fourth-order central differences (or FFT multipliers) with periodic wrap,
which is only sound
for fields that have decayed at the boundary, so every derivative path
checks the boundary layer first.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import itertools
import warnings

import numpy as np

from .spectral import OUProblem

DECAY_TOL = 1e-8


class BoundaryDecayWarning(UserWarning):
    pass


class BoundaryDecayError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {self.d}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two >= 16, got {self.n}")
        if not self.L > 0:
            raise ValueError("half-extent L must be positive")

    @property
    def h(self) -> float:
        return 2 * self.L / self.n

    @property
    def cell(self) -> float:
        return self.h**self.d

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def points(self) -> np.ndarray:
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)


@dataclass(frozen=True)
class GridField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == self.spec.d:
            vals = vals[..., None]
        if vals.shape[: self.spec.d] != (self.spec.n,) * self.spec.d or vals.ndim != self.spec.d + 1:
            raise ValueError(f"values of shape {vals.shape} do not fit grid {self.spec}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite entries")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=-1))

    def boundary_ratio(self) -> float:
        """max |v| on the outermost grid layer over max |v|."""
        a = self.pointwise_norm()
        top = a.max()
        if top == 0:
            return 0.0
        edge = 0.0
        for ax in range(self.spec.d):
            edge = max(edge, np.take(a, [0, -1], axis=ax).max())
        return float(edge / top)

    def decayed(self, tol: float = DECAY_TOL) -> bool:
        return self.boundary_ratio() <= tol

    def require_decay(self, tol: float = DECAY_TOL):
        r = self.boundary_ratio()
        if r > tol:
            raise BoundaryDecayError(
                f"field has not decayed at the boundary (ratio {r:.3g} > {tol:g}); enlarge L"
            )

    def with_values(self, values) -> "GridField":
        return GridField(self.spec, values)

    def apply_matrix(self, M) -> "GridField":
        return self.with_values(self.values @ np.asarray(M, dtype=complex).T)

    def __add__(self, other: "GridField") -> "GridField":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridField") -> "GridField":
        return self.with_values(self.values - other.values)

    def __mul__(self, c) -> "GridField":
        return self.with_values(complex(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return self.with_values(-self.values)


# ---------------------------------------------------------------------------
# polynomial x Gaussian test functions

def _monomials(Y: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
    out = np.ones(Y.shape[:-1])
    for j, a in enumerate(alpha):
        if a:
            out = out * Y[..., j] ** a
    return out


@dataclass(frozen=True)
class GaussianTerm:
    """``P(x - c) exp(-|x - c|^2 / (2 sigma^2))`` with P mapping into C^N."""

    center: np.ndarray
    sigma: float
    poly: dict

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        Y = X - self.center
        g = np.exp(-np.sum(Y * Y, axis=-1) / (2 * self.sigma**2))
        out = 0
        for alpha, vec in self.poly.items():
            out = out + (_monomials(Y, alpha) * g)[..., None] * vec
        return out

    def derivative(self, j: int) -> "GaussianTerm":
        new: dict = {}
        s2 = self.sigma**2
        for alpha, vec in self.poly.items():
            if alpha[j]:
                beta = alpha[:j] + (alpha[j] - 1,) + alpha[j + 1 :]
                new[beta] = new.get(beta, 0) + alpha[j] * vec
            beta = alpha[:j] + (alpha[j] + 1,) + alpha[j + 1 :]
            new[beta] = new.get(beta, 0) - vec / s2
        return GaussianTerm(self.center, self.sigma, new)

    def times_coordinate(self, i: int) -> "GaussianTerm":
        """Multiply by x_i = y_i + c_i."""
        new: dict = {}
        for alpha, vec in self.poly.items():
            beta = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1 :]
            new[beta] = new.get(beta, 0) + vec
            if self.center[i]:
                new[alpha] = new.get(alpha, 0) + self.center[i] * vec
        return GaussianTerm(self.center, self.sigma, new)

    def map(self, fn) -> "GaussianTerm":
        return GaussianTerm(self.center, self.sigma, {a: fn(v) for a, v in self.poly.items()})


@dataclass(frozen=True)
class SchwartzFunction:
    """Finite sum of polynomial-times-Gaussian terms with values in C^N.

    The class is closed under differentiation, multiplication by
    coordinates and constant matrices, so ``L_infty`` maps it to itself and
    every derivative is exact.
    """

    terms: tuple
    d: int
    N: int

    @classmethod
    def gaussian(cls, center, sigma: float, coeffs) -> "SchwartzFunction":
        """``coeffs`` maps multi-indices (in x - center) to C^N vectors."""
        center = np.asarray(center, dtype=float)
        d = center.size
        poly = {}
        N = None
        for alpha, vec in dict(coeffs).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != d:
                raise ValueError(f"multi-index {alpha} does not match dimension {d}")
            vec = np.atleast_1d(np.asarray(vec, dtype=complex))
            N = vec.size if N is None else N
            if vec.size != N:
                raise ValueError("coefficient vectors must share one length")
            poly[alpha] = vec
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls((GaussianTerm(center, float(sigma), poly),), d, N)

    @classmethod
    def random(cls, rng: np.random.Generator, d: int, N: int, degree: int = 2,
               spread: float = 0.5, sigma_range=(0.5, 0.8)) -> "SchwartzFunction":
        """Random coefficients up to total ``degree``; defaults decay below 1e-8 at |x| = 8."""
        center = rng.normal(scale=spread, size=d)
        sigma = rng.uniform(*sigma_range)
        coeffs = {}
        for alpha in itertools.product(range(degree + 1), repeat=d):
            if sum(alpha) <= degree:
                coeffs[alpha] = (rng.normal(size=N) + 1j * rng.normal(size=N)) / (1 + sum(alpha))
        return cls.gaussian(center, sigma, coeffs)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1] + (self.N,), dtype=complex)
        for term in self.terms:
            out += term.evaluate(X)
        return out

    def _new(self, terms) -> "SchwartzFunction":
        return SchwartzFunction(tuple(terms), self.d, self.N)

    def derivative(self, j: int) -> "SchwartzFunction":
        return self._new(t.derivative(j) for t in self.terms)

    def gradient(self) -> list["SchwartzFunction"]:
        return [self.derivative(j) for j in range(self.d)]

    def laplacian(self) -> "SchwartzFunction":
        out = None
        for j in range(self.d):
            dj = self.derivative(j).derivative(j)
            out = dj if out is None else out + dj
        return out

    def times_coordinate(self, i: int) -> "SchwartzFunction":
        return self._new(t.times_coordinate(i) for t in self.terms)

    def apply_matrix(self, M) -> "SchwartzFunction":
        M = np.asarray(M, dtype=complex)
        return self._new(t.map(lambda v: M @ v) for t in self.terms)

    def __add__(self, other: "SchwartzFunction") -> "SchwartzFunction":
        if (other.d, other.N) != (self.d, self.N):
            raise ValueError("dimension mismatch")
        return self._new(self.terms + other.terms)

    def __mul__(self, c) -> "SchwartzFunction":
        c = complex(c)
        return self._new(t.map(lambda v: c * v) for t in self.terms)

    __rmul__ = __mul__

    def __radd__(self, other) -> "SchwartzFunction":
        # lets sum() start from 0
        if isinstance(other, int) and other == 0:
            return self
        return NotImplemented

    def __neg__(self) -> "SchwartzFunction":
        return self * -1

    def __sub__(self, other: "SchwartzFunction") -> "SchwartzFunction":
        return self + (-other)


def sample(phi: SchwartzFunction, spec: GridSpec, decay_tol: float = DECAY_TOL) -> GridField:
    if phi.d != spec.d:
        raise ValueError("function and grid dimensions differ")
    v = GridField(spec, phi(spec.points()))
    r = v.boundary_ratio()
    if r > decay_tol:
        warnings.warn(f"sampled field has boundary ratio {r:.3g} > {decay_tol:g}",
                      BoundaryDecayWarning, stacklevel=2)
    return v


def lp_norm(v: GridField, p: float) -> float:
    if not 1 <= p < np.inf:
        raise ValueError("p must satisfy 1 <= p < inf")
    return float(np.sum(v.pointwise_norm() ** p) * v.spec.cell) ** (1 / p)


# ---------------------------------------------------------------------------
# finite differences

def _d1(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    r = lambda k: np.roll(a, -k, axis=axis)  # noqa: E731  a[i + k]
    return (-r(2) + 8 * r(1) - 8 * r(-1) + r(-2)) / (12 * h)


def _d2(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    r = lambda k: np.roll(a, -k, axis=axis)  # noqa: E731
    return (-r(2) + 16 * r(1) - 30 * a + 16 * r(-1) - r(-2)) / (12 * h * h)


def _spectral(a: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    n = a.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, h)
    if order % 2:
        k[n // 2] = 0.0  # odd derivatives drop the unpaired Nyquist mode
    shape = [1] * a.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(a, axis=axis) * ((1j * k) ** order).reshape(shape), axis=axis)


STENCILS = ("fd4", "spectral")


def _partial(a: np.ndarray, axis: int, h: float, order: int, method: str) -> np.ndarray:
    if method == "fd4":
        return _d1(a, axis, h) if order == 1 else _d2(a, axis, h)
    if method == "spectral":
        return _spectral(a, axis, h, order)
    raise ValueError(f"method must be one of {STENCILS}")


def grid_derivative(v: GridField, alpha: tuple[int, ...], check: bool = True,
                    decay_tol: float = DECAY_TOL, method: str = "fd4") -> GridField:
    """D^alpha v for |alpha| <= 2 per axis.

    ``fd4`` uses fourth-order central differences; ``spectral`` multiplies
    by (ik)^k on the periodic grid, exact for band-limited decayed data.
    """
    if check:
        v.require_decay(decay_tol)
    a, h = v.values, v.spec.h
    for j, k in enumerate(alpha):
        if k > 2:
            raise ValueError("only derivatives up to order 2 per axis")
        if k:
            a = _partial(a, j, h, k, method)
    return v.with_values(a)


def gradient(v: GridField, check: bool = True, decay_tol: float = DECAY_TOL,
             method: str = "fd4") -> list[GridField]:
    if check:
        v.require_decay(decay_tol)
    return [v.with_values(_partial(v.values, j, v.spec.h, 1, method)) for j in range(v.spec.d)]


def multi_indices(d: int, k: int) -> list[tuple[int, ...]]:
    """All multi-indices with |beta| <= k, ordered by total degree."""
    out = [b for b in itertools.product(range(k + 1), repeat=d) if sum(b) <= k]
    return sorted(out, key=lambda b: (sum(b), tuple(-x for x in b)))


@dataclass
class SobolevNorms:
    p: float
    k: int
    norm: float
    seminorm: float
    derivatives: dict = field(repr=False, default_factory=dict)

    @property
    def gradient(self) -> list[GridField]:
        d = len(next(iter(self.derivatives)))
        return [self.derivatives[tuple(int(i == j) for i in range(d))] for j in range(d)]


def sobolev_norms(v: GridField, p: float, k: int = 1, decay_tol: float = DECAY_TOL,
                  method: str = "fd4") -> SobolevNorms:
    """Discrete W^{k,p} norm and the top-order seminorm.

    The norm is ``(sum_{|beta|<=k} |D^beta v|_p^p)^(1/p)`` over distinct
    multi-indices; the seminorm keeps only ``|beta| = k``.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    v.require_decay(decay_tol)
    derivs, full, top = {}, 0.0, 0.0
    for beta in multi_indices(v.spec.d, k):
        D = v if sum(beta) == 0 else grid_derivative(v, beta, check=False, method=method)
        derivs[beta] = D
        s = lp_norm(D, p) ** p
        full += s
        if sum(beta) == k:
            top += s
    return SobolevNorms(p, k, full ** (1 / p), top ** (1 / p), derivs)


def drift_field(problem: OUProblem, v: GridField, check: bool = True,
                decay_tol: float = DECAY_TOL, method: str = "fd4") -> GridField:
    """<Sx, grad v> on the grid."""
    X = v.spec.points()
    SX = X @ problem.S.T
    grads = gradient(v, check, decay_tol, method)
    out = sum(SX[..., j][..., None] * g.values for j, g in enumerate(grads))
    return v.with_values(out)


def apply_L_infty(problem: OUProblem, v, decay_tol: float = DECAY_TOL, method: str = "fd4"):
    """``A lap v + <Sx, grad v> - B v``.

    A :class:`SchwartzFunction` input yields the exact image as another
    SchwartzFunction; a :class:`GridField` yields a GridField with
    derivatives from :func:`grid_derivative` with the given ``method``.
    """
    A, B, S = problem.A, problem.B, problem.S
    if isinstance(v, SchwartzFunction):
        if (v.d, v.N) != (problem.d, problem.N):
            raise ValueError("function dimensions do not match the problem")
        out = v.laplacian().apply_matrix(A) - v.apply_matrix(B)
        for i in range(v.d):
            Di = v.derivative(i)
            for j in range(v.d):
                if S[i, j]:
                    out = out + S[i, j] * Di.times_coordinate(j)
        return out
    if v.N != problem.N or v.spec.d != problem.d:
        raise ValueError("field dimensions do not match the problem")
    v.require_decay(decay_tol)
    h = v.spec.h
    lap = sum(_partial(v.values, j, h, 2, method) for j in range(v.spec.d))
    out = lap @ A.T - v.values @ B.T + drift_field(problem, v, check=False, method=method).values
    return v.with_values(out)


# ---------------------------------------------------------------------------
# interpolation and output

def _lagrange_weights(s: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights at offsets -1, 0, 1, 2 for s in [0, 1)."""
    return np.stack(
        [
            -s * (s - 1) * (s - 2) / 6,
            (s + 1) * (s - 1) * (s - 2) / 2,
            -(s + 1) * s * (s - 2) / 2,
            (s + 1) * s * (s - 1) / 6,
        ],
        axis=-1,
    )


def interpolate(v: GridField, points) -> np.ndarray:
    """Tensor-product cubic interpolation at ``points`` (shape ``(..., d)``)."""
    spec = v.spec
    P = np.asarray(points, dtype=float)
    shape = P.shape[:-1]
    P = P.reshape(-1, spec.d)
    if np.any(np.abs(P) > spec.L * (1 + 1e-12)):
        raise ValueError("interpolation point outside [-L, L]^d")
    s = (P + spec.L) / spec.h
    base = np.floor(s).astype(int)
    frac = s - base
    W = _lagrange_weights(frac)  # (M, d, 4)
    idx = (base[..., None] + np.arange(-1, 3)) % spec.n  # (M, d, 4)
    out = np.zeros((P.shape[0], v.N), dtype=complex)
    for combo in itertools.product(range(4), repeat=spec.d):
        w = np.ones(P.shape[0])
        ix = []
        for j, c in enumerate(combo):
            w = w * W[:, j, c]
            ix.append(idx[:, j, c])
        out += w[:, None] * v.values[tuple(ix)]
    return out.reshape(shape + (v.N,))


def write_csv(v: GridField, fh) -> None:
    """Rows ``i_1..i_d, x_1..x_d, Re v_1, Im v_1, ..., Re v_N, Im v_N``."""
    spec = v.spec
    w = csv.writer(fh, lineterminator="\n")
    head = [f"i{j + 1}" for j in range(spec.d)] + [f"x{j + 1}" for j in range(spec.d)]
    for c in range(v.N):
        head += [f"re_v{c + 1}", f"im_v{c + 1}"]
    w.writerow(head)
    ax = spec.axis()
    for ij in itertools.product(range(spec.n), repeat=spec.d):
        val = v.values[ij]
        row = list(ij) + [repr(float(ax[i])) for i in ij]
        for z in val:
            row += [repr(float(z.real)), repr(float(z.imag))]
        w.writerow(row)
