import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ouident.fields import GridField, GridSpec, SchwartzFunction, apply_L_infty, lp_norm, sample
from ouident.semigroup import (
    ResolutionError,
    SemigroupPlan,
    apply_T,
    apply_T_direct,
    fitted_order,
    generator_difference,
    givens_factors,
    semigroup_law_check,
    _planar_matrix,
)
from ouident.spectral import OUProblem, eigenstructure, rotation

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
I2 = np.eye(2)
SPEC = GridSpec(2, 8.0, 128)


def skew3(rng):
    M = rng.normal(size=(3, 3))
    return M - M.T


@pytest.mark.parametrize("seed", range(5))
def test_givens_factors_reproduce_rotation(seed):
    rng = np.random.default_rng(seed)
    for R in (rotation(J, rng.uniform(-4, 4)), rotation(skew3(rng), 1.0)):
        d = R.shape[0]
        P = np.eye(d)
        for i, j, th in givens_factors(R):
            P = P @ _planar_matrix(d, i, j, th)
        assert np.allclose(P, R, atol=1e-13)


@pytest.mark.parametrize("theta", [0.3, np.pi / 2, 2.0, np.pi, -2.5])
def test_shear_rotation_matches_exact_values(theta):
    """The shear resampler reproduces phi(e^{tS} x) for band-limited data."""
    phi = SchwartzFunction.gaussian([1.0, -0.5], 0.7, {(0, 0): [1.0], (1, 0): [0.5j]})
    plan = SemigroupPlan.build(OUProblem(I2, np.zeros((2, 2)), theta * J, 2.0), SPEC)
    out = plan.rotate(sample(phi, SPEC).values, 1.0)
    exact = phi(SPEC.points() @ rotation(theta * J, 1.0).T)
    assert np.max(np.abs(out - exact)) <= 1e-12


def test_semigroup_identity_at_zero():
    v = sample(SchwartzFunction.gaussian([0.0, 0.0], 0.7, {(0, 0): [1.0, 1j]}), SPEC)
    plan = SemigroupPlan.build(OUProblem(I2, I2, J, 2.0), SPEC)
    assert apply_T(plan, v, 0.0) is v
    with pytest.raises(ValueError):
        apply_T(plan, v, -0.1)


def test_plan_rejects_A2_violation():
    A = np.diag([1.0, -0.5])
    with pytest.raises(ValueError, match="A2"):
        SemigroupPlan(OUProblem(A, I2, J, 2.0), eigenstructure(A, I2), SPEC)


@pytest.mark.parametrize("S,tol", [(J, 1e-5), (np.zeros((2, 2)), 1e-10)])
def test_semigroup_law(S, tol, rng):
    A = np.array([[1.2, 0.3j], [0.1, 0.9]])
    B = 0.3 * A + 0.3 * I2
    plan = SemigroupPlan.build(OUProblem(A, B, S, 2.0), SPEC)
    for _ in range(3):
        v = sample(SchwartzFunction.random(rng, 2, 2), SPEC)
        assert semigroup_law_check(plan, v, 0.25, 0.25) <= tol


def test_shear_beats_cubic():
    prob = OUProblem(I2, I2, J, 2.0)
    v = sample(SchwartzFunction.gaussian([0.5, 0.0], 0.6, {(0, 0): [1.0, 0.0]}), SPEC)
    shear = semigroup_law_check(SemigroupPlan.build(prob, SPEC), v, 0.25, 0.25)
    cubic = semigroup_law_check(SemigroupPlan.build(prob, SPEC, resample="cubic"), v, 0.25, 0.25)
    assert shear < 1e-2 * cubic


@pytest.mark.parametrize("t", [0.1, 0.5])
def test_fft_path_matches_direct_quadrature(t):
    spec = GridSpec(2, 8.0, 64)
    A = np.array([[1.0, 0.2], [0.0, 1.5]])
    B = 0.3 * A
    prob = OUProblem(A, B, J, 2.0)
    eig = eigenstructure(A, B)
    v = sample(SchwartzFunction.gaussian([0.0, 0.5], 0.8, {(0, 0): [1.0, 0.5j]}), spec)
    fast = apply_T(SemigroupPlan(prob, eig, spec), v, t)
    slow = apply_T_direct(prob, eig, v, t)
    assert lp_norm(fast - slow, 2) / lp_norm(v, 2) <= 1e-5


def test_direct_refuses_large_grid():
    prob = OUProblem(I2, I2, J, 2.0)
    v = GridField(SPEC, np.zeros(SPEC.points().shape[:-1] + (2,)))
    with pytest.raises(ValueError, match="direct quadrature"):
        apply_T_direct(prob, eigenstructure(I2, I2), v, 0.1)


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.05, 1.0), c=st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False))
def test_semigroup_is_linear(t, c):
    spec = GridSpec(2, 8.0, 32)
    plan = SemigroupPlan.build(OUProblem(I2, 0.5 * I2, J, 2.0), spec)
    u = sample(SchwartzFunction.gaussian([0.0, 0.0], 0.9, {(0, 0): [1.0, 0.0]}), spec)
    w = sample(SchwartzFunction.gaussian([0.5, 0.0], 0.9, {(1, 0): [0.0, 1.0]}), spec)
    lhs = apply_T(plan, u * c + w, t)
    rhs = apply_T(plan, u, t) * c + apply_T(plan, w, t)
    assert lp_norm(lhs - rhs, 2) <= 1e-12 * (1 + abs(c))


def test_contraction_for_identity_pair():
    # A = I, B = 0, S skew: T(t) is an L2 contraction
    plan = SemigroupPlan.build(OUProblem(I2, np.zeros((2, 2)), J, 2.0), SPEC)
    v = sample(SchwartzFunction.gaussian([0.0, 0.0], 0.6, {(0, 0): [1.0, 1j]}), SPEC)
    norms = [lp_norm(apply_T(plan, v, t), 2) for t in (0.0, 0.1, 0.5, 1.0)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_strong_continuity():
    plan = SemigroupPlan.build(OUProblem(I2, I2, J, 2.0), SPEC)
    v = sample(SchwartzFunction.gaussian([0.0, 0.0], 0.7, {(0, 0): [1.0, 0.0]}), SPEC)
    errs = [lp_norm(apply_T(plan, v, t) - v, 2) for t in (0.2, 0.1, 0.05, 0.025)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_generator_resolvability_error():
    phi = SchwartzFunction.gaussian([0.0, 0.0], 1.0, {(0, 0): [1.0]})
    prob = OUProblem(np.eye(1), np.zeros((1, 1)), J, 2.0)
    with pytest.raises(ResolutionError) as err:
        generator_difference(prob, phi, GridSpec(2, 8.0, 64), 0.01)
    assert err.value.min_spacing == pytest.approx(np.sqrt(0.02) / 2)


def test_generator_order_with_drift():
    spec = GridSpec(2, 8.0, 256)
    A = np.array([[1.0, 0.2j], [0.0, 1.3]])
    prob = OUProblem(A, 0.5 * A, J, 2.0)
    phi = SchwartzFunction.gaussian([0.3, 0.0], 0.8, {(0, 0): [1.0, 0.5], (0, 1): [0.0, 0.3j]})
    plan = SemigroupPlan.build(prob, spec)
    hs = [0.2, 0.1, 0.05, 0.025]
    defects = [generator_difference(prob, phi, spec, h, plan=plan).norm for h in hs]
    assert all(b < a for a, b in zip(defects, defects[1:]))
    assert fitted_order(hs, defects) >= 0.5


def test_heat_generator_matches_taylor_remainder():
    """A = 1, B = 0, S = 0: the defect equals (e^{h lap} - 1 - h lap) phi / h."""
    spec = GridSpec(2, 20.0, 512)
    prob = OUProblem(np.eye(1), np.zeros((1, 1)), np.zeros((2, 2)), 2.0)
    phi = SchwartzFunction.gaussian([0.0, 0.0], 2.0, {(0, 0): [1.0]})
    h = 0.05
    d = generator_difference(prob, phi, spec, h)
    v = sample(phi, spec)
    k = 2 * np.pi * np.fft.fftfreq(spec.n, spec.h)
    k2 = np.add.outer(k**2, k**2)[..., None]
    V = np.fft.fft2(v.values, axes=(0, 1))
    rem = np.fft.ifft2((np.expm1(-h * k2) + h * k2) / h * V, axes=(0, 1))
    analytic = lp_norm(GridField(spec, rem), 2)
    assert d.norm == pytest.approx(analytic, rel=0.1)
    # leading Taylor term h/2 |lap^2 phi| is within 10% as well
    lap2 = sample(apply_L_infty(prob, apply_L_infty(prob, phi)), spec)
    assert d.norm == pytest.approx(0.5 * h * lp_norm(lap2, 2), rel=0.1)


def test_fitted_order_exact_power():
    hs = np.array([0.2, 0.1, 0.05])
    assert fitted_order(hs, 3 * hs**0.75) == pytest.approx(0.75)
