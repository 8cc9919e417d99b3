import math

import numpy as np
import pytest
from scipy import integrate, special

from ksblowup.kernels import (
    KernelParams,
    bessel_potential,
    convolve_grad,
    g_alpha,
    grad_kernel,
    kernel_constants,
)

# closed forms used as oracles: B_a(r) = K0(sqrt(a) r) / (2 pi), g_a(r) = sqrt(a) r K1(sqrt(a) r)
def k0_oracle(alpha, r):
    return special.k0(math.sqrt(alpha) * r) / (2 * math.pi)


def g_oracle(alpha, r):
    s = math.sqrt(alpha) * r
    return s * special.k1(s)


@pytest.fixture(scope="module")
def constants_1():
    return kernel_constants(KernelParams(1.0))


def test_params_reject_negative_alpha():
    with pytest.raises(ValueError):
        KernelParams(-0.1)
    with pytest.raises(ValueError):
        KernelParams(float("nan"))


def test_newton_branch():
    assert bessel_potential(KernelParams(0.0), 1.0) == 0.0
    assert bessel_potential(KernelParams(0.0), math.e) == pytest.approx(-1 / (2 * math.pi))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 4.0, 20.0])
@pytest.mark.parametrize("r", [1e-6, 1e-3, 0.1, 1.0, 3.0, 12.0])
def test_bessel_potential_matches_k0(alpha, r):
    assert bessel_potential(KernelParams(alpha), r) == pytest.approx(k0_oracle(alpha, r), rel=1e-8)


def test_bessel_potential_at_one():
    # K0(1) / (2 pi) = 0.0670081...
    assert bessel_potential(KernelParams(1.0), 1.0) == pytest.approx(0.06700815, abs=1e-7)


@pytest.mark.parametrize("r", [0.0, -1.0])
def test_domain_errors(r):
    with pytest.raises(ValueError):
        bessel_potential(KernelParams(1.0), r)
    with pytest.raises(ValueError):
        g_alpha(KernelParams(1.0), r)


def test_g_alpha_values():
    assert g_alpha(KernelParams(0.0), 3.7) == 1.0
    assert g_alpha(KernelParams(1.0), 1.0) == pytest.approx(0.601907, abs=1e-6)
    assert g_alpha(KernelParams(1.0), 1e-6) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.25, 1.0, 9.0])
@pytest.mark.parametrize("r", [1e-4, 0.2, 1.0, 5.0])
def test_g_alpha_matches_k1(alpha, r):
    assert g_alpha(KernelParams(alpha), r) == pytest.approx(g_oracle(alpha, r), rel=1e-8)


def test_g_alpha_defining_integral():
    # direct quadrature in s, independent of the log substitution
    val, _ = integrate.quad(lambda s: math.exp(-s - 0.7 * 2.0**2 / (4 * s)), 0, np.inf)
    assert g_alpha(KernelParams(0.7), 2.0) == pytest.approx(val, rel=1e-9)


def test_grad_kernel():
    np.testing.assert_allclose(grad_kernel(KernelParams(0.0), (1.0, 0.0)), [-1 / (2 * math.pi), 0.0])
    np.testing.assert_allclose(grad_kernel(KernelParams(1.0), (1.0, 0.0)), [-0.09579, 0.0], atol=1e-5)
    with pytest.raises(ValueError):
        grad_kernel(KernelParams(1.0), (0.0, 0.0))


def test_grad_kernel_is_gradient_of_potential():
    p, z, h = KernelParams(2.0), np.array([0.3, -0.4]), 1e-5
    fd = [
        (bessel_potential(p, np.linalg.norm(z + h * e)) - bessel_potential(p, np.linalg.norm(z - h * e))) / (2 * h)
        for e in np.eye(2)
    ]
    np.testing.assert_allclose(grad_kernel(p, z), fd, rtol=1e-6)


def test_kernel_constants_alpha_one(constants_1):
    c = constants_1
    assert c.l1_B == pytest.approx(1.0, abs=1e-6)
    assert c.l1_gradB == pytest.approx(math.pi / 2, abs=1e-4)
    assert c.K == pytest.approx(0.4662, abs=2e-3)
    assert c.sup_rB1 == pytest.approx(0.0742, abs=1.5e-3)
    assert c.K == pytest.approx(2 * math.pi * c.sup_rB1)


def test_kernel_constants_alpha_four():
    c = kernel_constants(KernelParams(4.0))
    assert c.l1_B == pytest.approx(0.25, abs=1e-6)
    assert c.l1_gradB == pytest.approx(math.pi / 4, abs=1e-4)


def test_sup_against_dense_sampling(constants_1):
    r = np.linspace(1e-4, 1, 20001)
    dense = np.max(r * special.k0(r) / (2 * math.pi))
    assert constants_1.sup_rB1 == pytest.approx(dense, rel=1e-7)


def test_kernel_constants_needs_positive_alpha():
    with pytest.raises(ValueError):
        kernel_constants(KernelParams(0.0))


def test_convolve_grad_point_mass():
    out = convolve_grad([((0.0, 0.0), 1.0, 3.0)], [(1.0, 0.0)], KernelParams(0.0))
    np.testing.assert_allclose(out, [[-3 / (2 * math.pi), 0.0]])


def test_convolve_grad_symmetric_pair():
    dens = [((-1.0, 0.5), 1.0, 2.0), ((1.0, 0.5), 1.0, 2.0)]
    np.testing.assert_allclose(convolve_grad(dens, [(0.0, 0.5)], KernelParams(1.0)), [[0.0, 0.0]], atol=1e-15)


def test_convolve_grad_skips_self_and_handles_empty():
    out = convolve_grad([((0.0, 0.0), 1.0, 1.0)], [(0.0, 0.0)], KernelParams(0.0))
    np.testing.assert_array_equal(out, [[0.0, 0.0]])
    assert convolve_grad([], [(1.0, 1.0)], KernelParams(0.0)).shape == (0, 2)
    with pytest.raises(ValueError):
        convolve_grad([((0.0, 0.0), -1.0, 1.0)], [(1.0, 0.0)], KernelParams(0.0))


def gaussian_samples(M, theta, h=0.01, extent=0.3):
    xs = np.arange(-extent, extent + h / 2, h)
    X, Y = np.meshgrid(xs, xs)
    vals = M / (2 * math.pi * theta) * np.exp(-(X**2 + Y**2) / (2 * theta))
    return [((x, y), h * h, v) for x, y, v in zip(X.ravel(), Y.ravel(), vals.ravel())]


def test_convolve_grad_gauss_theorem():
    # radial density: field is -m(r)/(2 pi) x/|x|^2 with m(r) the mass inside radius r
    M, theta = 2.0, 1 / 500
    r = 3 * math.sqrt(theta)
    target = np.array([r * math.cos(0.3), r * math.sin(0.3)])
    m_r = M * (1 - math.exp(-r * r / (2 * theta)))
    exact = -m_r / (2 * math.pi) * target / (r * r)
    got = convolve_grad(gaussian_samples(M, theta, h=0.005), [target], KernelParams(0.0))[0]
    assert np.linalg.norm(got - exact) <= 0.02 * np.linalg.norm(exact)
