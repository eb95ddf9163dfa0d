"""Weighted ray transform: forward/adjoint pairing, kernels, symbols, masks."""

import math

import numpy as np
import pytest

from tomostab import (
    GridFunction,
    InvalidInputError,
    InvalidParameterError,
    RaySet,
    SingularPointError,
    Sinogram,
    WeightSpec,
    adjoint,
    adjoint_cell_normalizer,
    calibrate_kernel_constant,
    ellipticity_margin,
    forward,
    forward_matrix,
    make_grid,
    normal_compose,
    normal_kernel,
    omega1_interior_mask,
    omega_node_mask,
    principal_symbol,
    weight_W,
)
from tomostab.stability import default_sweep_rays

W1 = WeightSpec.constant(1.0)


def gaussian(grid, sigma, center=(0.0, 0.0)):
    x, y = grid.node_mesh()
    vals = np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / (2 * sigma**2))
    return GridFunction(grid=grid, values=vals)


def tabulated_theta1(grid):
    """w(x, theta) = theta_1 as a table over 4 angle samples (0, pi/2, pi, 3pi/2)."""
    table = np.zeros((grid.N, grid.N, 4))
    for k, phi in enumerate([0.0, np.pi / 2, np.pi, 3 * np.pi / 2]):
        table[:, :, k] = np.cos(phi)
    return WeightSpec.tabulated(table, grid)


# ---------------------------------------------------------------------------
# WeightSpec


def test_weight_constant_evaluate():
    w = WeightSpec.constant(2.5)
    pts = np.array([[0.1, 0.2], [-0.3, 0.4]])
    np.testing.assert_array_equal(w.evaluate(pts, np.array([1.0, 0.0])), [2.5, 2.5])


def test_weight_constant_rejects_nonfinite():
    with pytest.raises(InvalidParameterError):
        WeightSpec.constant(np.nan)


def test_weight_limited_angle_mask_profile():
    w = WeightSpec.limited_angle(phi_c=np.pi / 2, delta=np.pi / 6, taper=0.1)
    pt = np.zeros((1, 2))
    # vertical directions are blocked, horizontal pass, taper midpoint = 1/2
    assert w.evaluate(pt, np.array([0.0, 1.0]))[0] == 0.0
    assert w.evaluate(pt, np.array([0.0, -1.0]))[0] == 0.0
    assert w.evaluate(pt, np.array([1.0, 0.0]))[0] == 1.0
    mid = np.pi / 2 + np.pi / 6 + 0.05  # delta + taper/2 away from the axis
    u = np.array([math.cos(mid), math.sin(mid)])
    assert w.evaluate(pt, u)[0] == pytest.approx(0.5, abs=1e-12)


def test_weight_limited_angle_parameter_ranges():
    with pytest.raises(InvalidParameterError):
        WeightSpec.limited_angle(delta=0.0)
    with pytest.raises(InvalidParameterError):
        WeightSpec.limited_angle(delta=np.pi / 2)
    with pytest.raises(InvalidParameterError):
        WeightSpec.limited_angle(taper=0.0)


def test_weight_tabulated_validation():
    g = make_grid(4.0, 16)
    with pytest.raises(InvalidParameterError):
        WeightSpec.tabulated(np.ones((8, 16, 4)), g)
    with pytest.raises(InvalidParameterError):
        WeightSpec.tabulated(np.ones((16, 16, 3)), g)
    bad = np.ones((16, 16, 4))
    bad[0, 0, 0] = np.inf
    with pytest.raises(InvalidInputError):
        WeightSpec.tabulated(bad, g)


def test_weight_tabulated_exact_at_nodes_and_sample_angles():
    g = make_grid(4.0, 16)
    w = tabulated_theta1(g)
    pts = np.array([[g.nodes1d[4], g.nodes1d[9]]])
    assert w.evaluate(pts, np.array([1.0, 0.0]))[0] == pytest.approx(1.0, abs=1e-12)
    assert w.evaluate(pts, np.array([-1.0, 0.0]))[0] == pytest.approx(-1.0, abs=1e-12)
    assert w.evaluate(pts, np.array([0.0, 1.0]))[0] == pytest.approx(0.0, abs=1e-12)


def test_weight_blend_is_affine_in_eps():
    g = make_grid(4.0, 16)
    base = WeightSpec.constant(1.0)
    bump = tabulated_theta1(g)
    w = WeightSpec.blend(base, bump, 0.25)
    pts = np.array([[0.5, -0.25]])
    u = np.array([1.0, 0.0])
    expected = 1.0 + 0.25 * bump.evaluate(pts, u)[0]
    assert w.evaluate(pts, u)[0] == pytest.approx(expected, rel=1e-14)
    with pytest.raises(InvalidParameterError):
        WeightSpec.blend(base, bump, np.inf)


def test_weight_fingerprints_distinguish():
    g = make_grid(4.0, 16)
    prints = {
        WeightSpec.constant(1.0).fingerprint(),
        WeightSpec.constant(2.0).fingerprint(),
        WeightSpec.limited_angle().fingerprint(),
        WeightSpec.limited_angle(delta=0.3).fingerprint(),
        tabulated_theta1(g).fingerprint(),
    }
    assert len(prints) == 5
    assert WeightSpec.constant(1.0).fingerprint() == W1.fingerprint()


# ---------------------------------------------------------------------------
# RaySet / Sinogram plumbing


def test_rayset_measure_weights():
    rays = RaySet(n_angles=6, n_offsets=10, t_step=0.1)
    dp = 3.0 / 10
    dphi = 2 * np.pi / 6
    # offsets at cell midpoints of (-1.5, 1.5), angle-major ray order
    assert rays.offsets[0] == pytest.approx(-1.5 + 0.5 * dp, rel=1e-15)
    r = 2 * rays.n_offsets + 7  # angle 2, offset 7
    expected = math.sqrt(1 - (rays.offsets[7] / 1.5) ** 2) * dp * dphi
    assert rays.mu[r] == pytest.approx(expected, rel=1e-14)
    assert rays.n_rays == 60
    np.testing.assert_allclose(
        np.linalg.norm(rays.directions(), axis=1), np.ones(6), rtol=1e-15
    )


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_angles=0, n_offsets=10, t_step=0.1),
        dict(n_angles=10, n_offsets=0, t_step=0.1),
        dict(n_angles=10, n_offsets=10, t_step=0.0),
        dict(n_angles=10, n_offsets=10, t_step=-1.0),
    ],
)
def test_rayset_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        RaySet(**kwargs)


def test_sinogram_validation():
    rays = RaySet(n_angles=4, n_offsets=5, t_step=0.1)
    with pytest.raises(InvalidInputError):
        Sinogram(rays=rays, values=np.zeros(7))
    bad = np.zeros(20)
    bad[3] = np.nan
    with pytest.raises(InvalidInputError):
        Sinogram(rays=rays, values=bad)
    ones = Sinogram(rays=rays, values=np.ones(20))
    assert ones.dsigma_norm() == pytest.approx(math.sqrt(np.sum(rays.mu)), rel=1e-14)


# ---------------------------------------------------------------------------
# forward


def test_forward_indicator_chord():
    g = make_grid(4.0, 128)
    x, y = g.node_mesh()
    f = GridFunction(grid=g, values=(x**2 + y**2 <= 0.25).astype(float))
    rays = RaySet(n_angles=4, n_offsets=100, t_step=g.h / 4)
    io = int(np.argmin(np.abs(rays.offsets - 0.3)))
    p = rays.offsets[io]
    val = forward(W1, f, rays).values[io]  # angle index 0
    assert val == pytest.approx(2.0 * math.sqrt(0.25 - p * p), abs=2e-2)


def test_forward_zero_function():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=8, n_offsets=8, t_step=0.1)
    f = GridFunction(grid=g, values=np.zeros((32, 32)))
    assert np.all(forward(W1, f, rays).values == 0.0)


def test_forward_gaussian_line_integral():
    # narrow enough that the part of the Gaussian outside the support disk
    # contributes only ~6e-5 relative to the full-line integral
    g = make_grid(4.0, 96)
    f = gaussian(g, 0.25)
    rays = RaySet(n_angles=4, n_offsets=101, t_step=g.h / 4)
    assert rays.offsets[50] == 0.0
    val = forward(W1, f, rays).values[50]
    sig = 0.25
    oracle = sig * math.sqrt(2 * math.pi) * math.erf(1.0 / (sig * math.sqrt(2)))
    assert val == pytest.approx(oracle, rel=1e-3)


def test_forward_linear():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=12, n_offsets=15, t_step=0.1)
    rng = np.random.default_rng(5)
    f1 = GridFunction(grid=g, values=rng.standard_normal((32, 32)))
    f2 = GridFunction(grid=g, values=rng.standard_normal((32, 32)))
    combo = GridFunction(grid=g, values=2.0 * f1.values - 0.5 * f2.values)
    lhs = forward(W1, combo, rays).values
    rhs = 2.0 * forward(W1, f1, rays).values - 0.5 * forward(W1, f2, rays).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.max(np.abs(rhs)))


# ---------------------------------------------------------------------------
# adjoint and the transpose pairing


def _pairing_gap(w, grid, rays, rng):
    fv = rng.standard_normal((grid.N, grid.N))
    gv = rng.standard_normal(rays.n_rays)
    f = GridFunction(grid=grid, values=fv)
    lhs = float(np.sum(rays.mu * forward(w, f, rays).values * gv))
    back = adjoint(w, Sinogram(rays=rays, values=gv), grid)
    mask = omega_node_mask(grid)
    rhs = grid.h**2 * float(np.sum(fv[mask] * back.values[mask]))
    return abs(lhs - rhs) / max(abs(lhs), 1e-300)


def test_adjoint_pairing_all_weight_kinds():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=30, n_offsets=30, t_step=g.h / 2)
    weights = [
        W1,
        WeightSpec.limited_angle(),
        tabulated_theta1(g),
        WeightSpec.blend(W1, WeightSpec.limited_angle(), 0.3),
    ]
    rng = np.random.default_rng(17)
    for w in weights:
        worst = max(_pairing_gap(w, g, rays, rng) for _ in range(25))
        assert worst <= 1e-12, f"pairing broke for weight kind {w.kind}"


def test_adjoint_zero_data():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=8, n_offsets=8, t_step=0.1)
    out = adjoint(W1, Sinogram(rays=rays, values=np.zeros(64)), g)
    assert np.all(out.values == 0.0)


def test_adjoint_of_ones_center_node_regression():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=90, n_offsets=90, t_step=0.0625)
    back = adjoint(W1, Sinogram(rays=rays, values=np.ones(rays.n_rays)), g)
    assert back.values[16, 16] == pytest.approx(6.265946056532999, rel=1e-12)


def test_adjoint_of_ones_direct_summation_oracle():
    # re-derive the center-node value by walking every ray and accumulating
    # the bilinear hat weight of that node, independently of the sparse path
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=90, n_offsets=90, t_step=0.0625)
    h = g.h
    cx = g.nodes1d[16]
    cy = g.nodes1d[16]
    acc = 0.0
    for ia, phi in enumerate(rays.angles):
        d = np.array([math.cos(phi), math.sin(phi)])
        perp = np.array([-d[1], d[0]])
        for io, p in enumerate(rays.offsets):
            half = math.sqrt(1.5**2 - p * p)
            nq = max(1, int(math.floor(2 * half / rays.t_step + 0.5)))
            dt = 2 * half / nq
            t = (np.arange(nq) + 0.5) * dt
            px = p * perp[0] - half * d[0] + t * d[0]
            py = p * perp[1] - half * d[1] + t * d[1]
            u = np.abs(px - cx) / h
            v = np.abs(py - cy) / h
            hats = np.where((u < 1) & (v < 1), (1 - u) * (1 - v), 0.0)
            acc += float(np.sum(hats)) * dt * rays.mu[ia * rays.n_offsets + io]
    oracle = acc / h**2
    back = adjoint(W1, Sinogram(rays=rays, values=np.ones(rays.n_rays)), g)
    assert back.values[16, 16] == pytest.approx(oracle, rel=1e-12)


def test_adjoint_normalizer_is_identity_on_support_disk():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=30, n_offsets=30, t_step=g.h / 2)
    gamma = adjoint_cell_normalizer(W1, g, rays).reshape(32, 32)
    assert np.all(gamma[omega_node_mask(g)] == 1.0)
    ring = omega1_interior_mask(g) & ~omega_node_mask(g)
    assert np.any(gamma[ring] != 1.0)  # the clipped band does get corrected
    assert np.all(gamma > 0.0)


def test_matrix_and_normalizer_caches_return_same_object():
    g = make_grid(4.0, 16)
    rays = RaySet(n_angles=10, n_offsets=10, t_step=0.2)
    assert forward_matrix(W1, g, rays) is forward_matrix(W1, g, rays)
    assert adjoint_cell_normalizer(W1, g, rays) is adjoint_cell_normalizer(W1, g, rays)


# ---------------------------------------------------------------------------
# normal operator, composition route


def test_normal_compose_zero():
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=8, n_offsets=8, t_step=0.1)
    f = GridFunction(grid=g, values=np.zeros((32, 32)))
    assert np.all(normal_compose(W1, f, rays).values == 0.0)


def test_normal_compose_quadratic_identity():
    # <N f, f>_L2 equals the squared data norm, the transpose identity that
    # makes kernel vectors of N also kernel vectors of the forward map
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=30, n_offsets=30, t_step=g.h / 2)
    rng = np.random.default_rng(23)
    mask = omega_node_mask(g)
    for _ in range(10):
        vals = np.where(mask, rng.standard_normal((32, 32)), 0.0)
        f = GridFunction(grid=g, values=vals)
        nf = normal_compose(W1, f, rays)
        lhs = g.h**2 * float(np.sum(vals * nf.values))
        rhs = forward(W1, f, rays).dsigma_norm() ** 2
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_normal_compose_radially_symmetric_output():
    # centered Gaussian, ray directions invariant under quarter turns
    # (n_angles divisible by 4); grid nodes with i,j >= 1 rotate by
    # (i, j) -> (j, N - i) on the asymmetric lattice
    g = make_grid(4.0, 32)
    rays = RaySet(n_angles=64, n_offsets=90, t_step=0.0625)
    out = normal_compose(W1, gaussian(g, 0.3), rays).values
    ii, jj = np.meshgrid(np.arange(1, 32), np.arange(1, 32), indexing="ij")
    dev = np.max(np.abs(out[1:, 1:] - out[jj, 32 - ii]))
    assert dev <= 1e-10 * np.max(np.abs(out))


# ---------------------------------------------------------------------------
# kernel route


def test_weight_W_constant():
    assert weight_W(W1, np.array([0.3, 0.1]), np.array([-0.2, 0.4])) == pytest.approx(
        2.0, rel=1e-14
    )


def test_weight_W_direction_dependent_hand_value():
    g = make_grid(4.0, 32)
    w = tabulated_theta1(g)
    # u = (1,0): W = w(x,-u)w(y,-u) + w(x,u)w(y,u) = (-1)(-1) + (1)(1)
    val = weight_W(w, np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    assert val == pytest.approx(2.0, abs=1e-12)


def test_weight_W_singular_at_coincident_points():
    with pytest.raises(SingularPointError):
        weight_W(W1, np.array([0.1, 0.2]), np.array([0.1, 0.2]))


def test_normal_kernel_zero_function():
    g = make_grid(4.0, 32)
    f = GridFunction(grid=g, values=np.zeros((32, 32)))
    assert np.all(normal_kernel(W1, f, 1.0).values == 0.0)


def test_normal_kernel_rejects_nonfinite_constant():
    g = make_grid(4.0, 16)
    f = GridFunction(grid=g, values=np.zeros((16, 16)))
    with pytest.raises(InvalidParameterError):
        normal_kernel(W1, f, np.inf)


def test_kernel_matches_composition_and_improves_under_refinement():
    # the two independent discretizations of the same operator drift together
    # under simultaneous grid/ray refinement; values frozen as regressions
    devs = {}
    cals = {}
    for n in (32, 48):
        g = make_grid(4.0, n)
        rays = default_sweep_rays(g)
        f = gaussian(g, 0.35)
        c_cal = calibrate_kernel_constant(W1, g, rays, seed=11)
        K = normal_kernel(W1, f, c_cal)
        C = normal_compose(W1, f, rays)
        mask = omega1_interior_mask(g)
        devs[n] = g.h * np.linalg.norm(K.values[mask] - C.values[mask]) / f.l2_norm()
        cals[n] = c_cal
    assert devs[32] == pytest.approx(0.03399382600728761, rel=1e-6)
    assert devs[48] == pytest.approx(0.01167720902798457, rel=1e-6)
    assert devs[48] < devs[32]
    assert cals[32] == pytest.approx(1.003294069017182, rel=1e-6)
    assert cals[48] == pytest.approx(1.0031721104464313, rel=1e-6)


# ---------------------------------------------------------------------------
# principal symbol and ellipticity


def test_symbol_homogeneity_exact():
    x = np.array([0.2, -0.1])
    xi = np.array([0.6, 0.8])
    assert principal_symbol(W1, x, 2 * xi) == principal_symbol(W1, x, xi) / 2.0


def test_symbol_constant_weight_value():
    # two perpendicular directions, each with weight 1, times the calibrated
    # Fourier-multiplier constant 2*pi
    val = principal_symbol(W1, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    assert val == pytest.approx(4.0 * math.pi, rel=1e-14)


def test_symbol_vanishes_on_blocked_directions():
    w = WeightSpec.limited_angle()  # vertical cone blocked
    val = principal_symbol(w, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    assert val == 0.0


def test_symbol_rejects_zero_covector():
    with pytest.raises(InvalidInputError):
        principal_symbol(W1, np.array([0.0, 0.0]), np.array([0.0, 0.0]))


def test_ellipticity_margin_constant_weights():
    margin, _ = ellipticity_margin(W1)
    assert margin == pytest.approx(2.0, rel=1e-14)
    margin3, _ = ellipticity_margin(WeightSpec.constant(3.0))
    assert margin3 == pytest.approx(2.0 * 9.0, rel=1e-14)


def test_ellipticity_margin_limited_angle_witness():
    margin, (x, zeta) = ellipticity_margin(WeightSpec.limited_angle())
    assert margin == 0.0
    # witness covector is horizontal: its perpendicular directions are the
    # blocked vertical ones
    assert abs(zeta[0]) == pytest.approx(1.0, abs=1e-12)
    assert zeta[1] == pytest.approx(0.0, abs=1e-12)
    assert np.hypot(x[0], x[1]) <= 1.5 + 1e-12


def test_ellipticity_margin_density_guard():
    with pytest.raises(InvalidParameterError):
        ellipticity_margin(W1, sample_density=4)


# ---------------------------------------------------------------------------
# masks


def test_disk_masks():
    g = make_grid(4.0, 32)
    inner = omega_node_mask(g)
    outer = omega1_interior_mask(g)
    assert inner[16, 16] and outer[16, 16]
    assert inner[16 + 8, 16]  # (1.0, 0) on the support boundary
    assert not inner[16 + 9, 16]
    assert np.all(outer[inner])
    r2 = g.node_radii_sq()
    assert np.all(r2[inner] <= 1.0 + 1e-9)
    assert np.all(r2[outer] < 2.25)
