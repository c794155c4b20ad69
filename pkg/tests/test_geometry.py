import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ricci_spectral_lab.geometry import (
    ConformalGrid,
    DomainMask,
    dirichlet_energy,
    full_mask,
    integrate,
    laplace_beltrami_apply,
    rectangle_mask,
    scalar_curvature,
    volume_weights,
)

from conftest import bump_torus


def _symbolic_curvature(phi_expr):
    """R = -2 exp(-2 phi) (phi_xx + phi_yy), differentiated symbolically."""
    x, y = sp.symbols("x y")
    phi = phi_expr(x, y)
    R = -2 * sp.exp(-2 * phi) * (sp.diff(phi, x, 2) + sp.diff(phi, y, 2))
    return sp.lambdify((x, y), R, "numpy")


def test_flat_and_constant_have_zero_curvature():
    assert np.all(scalar_curvature(ConformalGrid.torus(16)) == 0)
    g = ConformalGrid.rectangle(16, phi=np.full((17, 17), 0.7))
    assert np.max(np.abs(scalar_curvature(g))) < 1e-12


def test_sine_curvature_matches_symbolic_oracle():
    eps, L = 0.1, 1.0
    oracle = _symbolic_curvature(lambda x, y: eps * sp.sin(2 * sp.pi * x / L))
    errs = []
    for n in (32, 64):
        g = ConformalGrid.torus(n, L, phi=lambda x, y: eps * np.sin(2 * np.pi * x / L))
        x, y = g.coordinates()
        exact = oracle(x, y) * np.ones_like(x)
        # closed form from the operation contract
        stated = 2 * eps * (2 * np.pi / L) ** 2 * np.sin(2 * np.pi * x / L) * np.exp(-2 * g.phi)
        assert np.allclose(exact, stated, atol=1e-12)
        errs.append(np.max(np.abs(scalar_curvature(g) - exact)))
    assert errs[1] < 2e-2
    assert errs[0] / errs[1] >= 3.5


@pytest.mark.parametrize("topology", ["torus", "rectangle"])
def test_curvature_refinement_order(topology):
    f = lambda x, y: 0.2 * np.exp(-((x - 0.5) ** 2 + (y - 0.45) ** 2) / 0.1)  # noqa: E731
    oracle = _symbolic_curvature(lambda x, y: sp.Rational(1, 5) * sp.exp(-((x - 0.5) ** 2 + (y - sp.Rational(9, 20)) ** 2) / sp.Rational(1, 10)))
    errs = []
    for n in (32, 64, 128):
        make = ConformalGrid.torus if topology == "torus" else ConformalGrid.rectangle
        g = make(n, phi=f)
        x, y = g.coordinates()
        inner = (slice(n // 4, 3 * n // 4),) * 2  # away from the non-periodic seam of the Gaussian
        errs.append(np.max(np.abs(scalar_curvature(g) - oracle(x, y))[inner]))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_rectangle_edge_curvature_is_second_order():
    oracle = _symbolic_curvature(lambda x, y: sp.Rational(3, 10) * x**3 * y + sp.Rational(1, 10) * sp.cos(3 * x))
    errs = []
    for n in (16, 32, 64):
        g = ConformalGrid.rectangle(n, phi=lambda x, y: 0.3 * x**3 * y + 0.1 * np.cos(3 * x))
        x, y = g.coordinates()
        errs.append(np.max(np.abs(scalar_curvature(g) - oracle(x, y))))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


@given(c=st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_curvature_conformal_shift(c):
    g = bump_torus(16)
    R0 = scalar_curvature(g)
    R1 = scalar_curvature(g.shifted(c))
    assert np.allclose(R1, np.exp(-2 * c) * R0, rtol=1e-9, atol=1e-9 * np.abs(R0).max())


def test_gauss_bonnet_on_torus():
    for n in (32, 64):
        g = bump_torus(n, "bump(0.3, 0.6, 0.4, 0.2)")
        assert abs(integrate(g, scalar_curvature(g))) <= 1e-10


def test_volume_weights_examples():
    n = 16
    g = ConformalGrid.rectangle(n)
    w = volume_weights(g)
    assert np.allclose(w[1:-1, 1:-1], 1 / n**2, rtol=1e-14)
    g2 = g.with_phi(np.full(g.shape, 0.5 * math.log(2)))
    assert np.allclose(volume_weights(g2), 2 * w, rtol=1e-14)


@pytest.mark.parametrize("eps", [0.05, 0.3])
def test_torus_area_matches_quadrature(eps):
    L = 2.0
    mean, _ = quad(lambda s: math.exp(2 * eps * math.sin(2 * math.pi * s)), 0, 1, epsabs=1e-14)
    g = ConformalGrid.torus(64, L, phi=lambda x, y: eps * np.sin(2 * np.pi * x / L))
    assert abs(volume_weights(g).sum() - L**2 * mean) <= 1e-10


def test_laplace_beltrami_examples():
    L = 2.0
    g = ConformalGrid.torus(32, L)
    assert np.all(laplace_beltrami_apply(g, np.full(g.shape, 3.0)) == 0)

    errs, bent_errs = [], []
    for n in (32, 64):
        flat = ConformalGrid.torus(n, L)
        x, y = flat.coordinates()
        u = np.sin(2 * np.pi * x / L)
        errs.append(np.max(np.abs(laplace_beltrami_apply(flat, u) + (2 * np.pi / L) ** 2 * u)))

        eps = 0.2
        bent = flat.with_phi(eps * np.sin(2 * np.pi * y / L))
        oracle = np.exp(-2 * eps * np.sin(2 * np.pi * y / L)) * -((2 * np.pi / L) ** 2) * u
        bent_errs.append(np.max(np.abs(laplace_beltrami_apply(bent, u) - oracle)) / np.abs(oracle).max())
    # truncation of the 5-point stencil on a single Fourier mode is (kh)^2 / 12
    assert bent_errs[1] < 1e-3
    assert errs[0] / errs[1] > 3.9 and bent_errs[0] / bent_errs[1] > 3.9


def test_dirichlet_energy_first_square_mode():
    errs = []
    for n in (32, 64, 128):
        g = ConformalGrid.rectangle(n)
        x, y = g.coordinates()
        u = np.sin(np.pi * x) * np.sin(np.pi * y)
        u[0] = u[-1] = 0
        u[:, 0] = u[:, -1] = 0
        ratio = dirichlet_energy(g, u, u) / np.sum(u * u * volume_weights(g))
        errs.append(abs(ratio - 2 * np.pi**2))
    assert errs[2] < 2e-3 * 2 * np.pi**2
    assert errs[0] > errs[1] > errs[2]


def test_dirichlet_energy_constant_and_conformal_invariance(rng):
    g = bump_torus(16)
    assert dirichlet_energy(g, np.ones(g.shape), rng.standard_normal(g.shape)) == pytest.approx(0, abs=1e-12)
    u, v = rng.standard_normal((2,) + g.shape)
    assert dirichlet_energy(g, u, v) == dirichlet_energy(g.shifted(1.3), u, v)


@st.composite
def _fields(draw):
    topo = draw(st.sampled_from(["torus", "rectangle"]))
    n = draw(st.integers(8, 20))
    seed = draw(st.integers(0, 2**31))
    return topo, n, seed


@given(_fields())
@settings(max_examples=40, deadline=None)
def test_green_identity(case):
    topo, n, seed = case
    rng = np.random.default_rng(seed)
    g = ConformalGrid.torus(n) if topo == "torus" else ConformalGrid.rectangle(n)
    g = g.with_phi(0.5 * rng.standard_normal(g.shape))
    mask = full_mask(g)
    u, v = rng.standard_normal((2,) + g.shape)
    u = np.where(mask.interior, u, 0.0)
    v = np.where(mask.interior, v, 0.0)
    lhs = dirichlet_energy(g, u, v)
    rhs = np.sum(laplace_beltrami_apply(g, u, mask) * v * volume_weights(g))
    scale = np.linalg.norm(u) * np.linalg.norm(v) * 8
    assert abs(lhs + rhs) <= 1e-10 * scale


def test_grid_validation():
    with pytest.raises(ValueError):
        ConformalGrid.torus(7)
    with pytest.raises(ValueError):
        ConformalGrid(np.zeros((8, 8)), 0.0, 0.1)
    bad = np.zeros((8, 8))
    bad[2, 2] = np.nan
    with pytest.raises(ValueError):
        ConformalGrid(bad, 0.1, 0.1)
    with pytest.raises(ValueError):
        ConformalGrid(np.full((8, 8), 51.0), 0.1, 0.1)
    ConformalGrid(np.full((8, 8), 50.0), 0.1, 0.1)


def test_masks():
    g = ConformalGrid.rectangle(16)
    assert full_mask(g).count == 15 * 15
    sub = rectangle_mask(g, 0.5)
    assert 0 < sub.count < full_mask(g).count
    ring = np.ones(g.shape, bool)
    with pytest.raises(ValueError, match="boundary"):
        DomainMask(ring).validate(g)
    two = np.zeros(g.shape, bool)
    two[2:4, 2:4] = two[10:12, 10:12] = True
    with pytest.raises(ValueError, match="connected"):
        DomainMask(two).validate(g)
    t = ConformalGrid.torus(16)
    assert full_mask(t).interior.all()
    with pytest.raises(ValueError):
        DomainMask(np.zeros(t.shape, bool)).validate(t)
