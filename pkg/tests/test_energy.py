import numpy as np
import pytest

from lcdroplet import energy as en
from lcdroplet.assembly import element_gradients
from lcdroplet.energy import DoubleWell, ModelWeights, default_double_well


def unit_director(theta):
    return np.column_stack([np.cos(theta), np.sin(theta)])


# ---------------------------------------------------------------------------
# multilinear forms
# ---------------------------------------------------------------------------

def test_eform_constant_director_vanishes(ops4, rng):
    n = np.tile([0.6, 0.8], (ops4.mesh.n_nodes, 1))
    s = rng.uniform(-0.4, 0.9, ops4.mesh.n_nodes)
    w = rng.standard_normal((ops4.mesh.n_nodes, 2))
    assert en.eform(ops4, s, s, n, w) == 0.0


def test_eform_unit_weights_matches_gradient_energy(ops4, rng):
    # with both scalar slots at 1, half the form equals the gradient
    # energy of the (componentwise affine) vector field
    n = rng.standard_normal((ops4.mesh.n_nodes, 2))
    ones = np.ones(ops4.mesh.n_nodes)
    assert 0.5 * en.eform(ops4, ones, ones, n, n) == pytest.approx(
        ops4.grad_form(n, n), rel=1e-12
    )


def test_eform_multilinearity(ops4, rng):
    s = rng.uniform(0.1, 0.9, ops4.mesh.n_nodes)
    z = rng.standard_normal(ops4.mesh.n_nodes)
    n = rng.standard_normal((ops4.mesh.n_nodes, 2))
    w = rng.standard_normal((ops4.mesh.n_nodes, 2))
    base = en.eform(ops4, s, z, n, w)
    assert en.eform(ops4, 2.5 * s, z, n, w) == pytest.approx(2.5 * base, rel=1e-12)
    assert en.eform(ops4, s, z, n, 3.0 * w) == pytest.approx(3.0 * base, rel=1e-12)
    assert en.eform(ops4, s, z, w, n) == pytest.approx(base, rel=1e-12)


def test_forms_reject_mismatched_fields(ops4, ops2, rng):
    s4 = rng.uniform(0.1, 0.9, ops4.mesh.n_nodes)
    n4 = rng.standard_normal((ops4.mesh.n_nodes, 2))
    s2 = rng.uniform(0.1, 0.9, ops2.mesh.n_nodes)
    with pytest.raises(ValueError):
        en.eform(ops4, s2, s2, n4, n4)
    g2 = np.zeros((ops2.mesh.n_elements, 2))
    with pytest.raises(ValueError):
        en.cform(ops4, n4, g2, n4, g2, s4, s4)


def test_cform_alignment_and_constant_phi(ops4, rng):
    mesh = ops4.mesh
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    phi = mesh.nodes[:, 0].copy()
    gphi = element_gradients(mesh, phi)
    aligned = np.tile([1.0, 0.0], (mesh.n_nodes, 1))
    assert en.cform(ops4, aligned, gphi, aligned, gphi, s, s) == 0.0
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    assert en.cform(ops4, n, 0 * gphi, n, 0 * gphi, s, s) == 0.0


def test_cform_matches_interpolant_formulation(ops4, rng):
    """The vertex-sum definition equals elementwise integration of the
    nodal interpolant of the integrand."""
    mesh = ops4.mesh
    s = rng.uniform(-0.4, 0.9, mesh.n_nodes)
    z = rng.standard_normal(mesh.n_nodes)
    v = rng.standard_normal((mesh.n_nodes, 2))
    w = rng.standard_normal((mesh.n_nodes, 2))
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    psi = rng.uniform(-1, 1, mesh.n_nodes)
    gphi = element_gradients(mesh, phi)
    gpsi = element_gradients(mesh, psi)

    d = mesh.dim
    eye = np.eye(d)
    H = np.empty((mesh.n_elements, 3, d, d))
    for t in range(mesh.n_elements):
        Ht = (gphi[t] @ gpsi[t]) * eye - np.outer(gphi[t], gpsi[t])
        for a in range(3):
            i = mesh.elements[t, a]
            H[t, a] = s[i] * z[i] * Ht
    via_interpolant = en.vertex_form(ops4, v, H, w)
    assert en.cform(ops4, v, gphi, w, gpsi, s, z) == pytest.approx(
        via_interpolant, rel=1e-12, abs=1e-14
    )


def test_cform_phi_matrix_consistency(ops4, rng):
    mesh = ops4.mesh
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    phi = rng.standard_normal(mesh.n_nodes)
    psi = rng.standard_normal(mesh.n_nodes)
    C = en.anchoring_phi_matrix(ops4, s, n)
    direct = en.cform(
        ops4, n, element_gradients(mesh, phi), n, element_gradients(mesh, psi), s, s
    )
    assert psi @ (C @ phi) == pytest.approx(direct, rel=1e-12)
    assert np.abs((C - C.T).toarray()).max() <= 1e-14


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

def test_ericksen_energy_zeros_and_substitution(ops4, rng):
    mesh = ops4.mesh
    n_const = np.tile([0.0, 1.0], (mesh.n_nodes, 1))
    s_const = np.full(mesh.n_nodes, 0.750025)
    assert en.energy_ericksen(ops4, s_const, n_const, kappa=1.0) == pytest.approx(
        0.0, abs=1e-14
    )
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    ones = np.ones(mesh.n_nodes)
    expected = 0.5 * en.eform(ops4, ones, ones, n, n)
    assert en.energy_ericksen(ops4, ones, n, kappa=1.0) == pytest.approx(
        expected, rel=1e-12
    )


def test_ericksen_coercivity(ops4, rng):
    """Discrete elastic energy dominates min(kappa,1) times the gradient
    energy of both the orientation field and the combined field."""
    mesh = ops4.mesh
    for kappa in (0.3, 1.0, 2.0):
        for _ in range(50):
            s = rng.uniform(-0.4, 0.9, mesh.n_nodes)
            n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
            u = s[:, None] * n
            e = en.energy_ericksen(ops4, s, n, kappa)
            bound = min(kappa, 1.0) * max(
                ops4.grad_form(u, u), ops4.grad_form(s, s)
            )
            assert e >= bound - 1e-11


def test_double_well_polynomial_facts():
    dw = default_double_well()
    assert abs(dw.df(0.75)) <= 1e-12
    assert dw.f(0.0) == 0.0
    assert dw.f(0.75) == pytest.approx(-0.5625, rel=1e-12)
    assert dw.f(0.0) > dw.f(0.75)
    # critical points of f are exactly {0, 1/4, 3/4}
    for root in (0.0, 0.25, 0.75):
        assert abs(dw.df(root)) <= 1e-12


def test_double_well_energy_zero_field(ops4):
    s = np.zeros(ops4.mesh.n_nodes)
    assert en.energy_dw(ops4, s, default_double_well()) == pytest.approx(0.0, abs=1e-15)


def test_double_well_range_warning(ops4):
    s = np.full(ops4.mesh.n_nodes, 1.2)
    with pytest.warns(RuntimeWarning):
        en.energy_dw(ops4, s, default_double_well())


def test_nonconvex_split_rejected():
    with pytest.raises(ValueError, match="convex"):
        DoubleWell(fc_coeffs=(0, 0, -1.0), fe_coeffs=(0, 0, 1.0))


def test_ch_energy_examples(ops4):
    mesh = ops4.mesh
    eps = 0.05
    ones = np.ones(mesh.n_nodes)
    assert en.energy_ch_dw(ops4, ones, eps) == pytest.approx(0.0, abs=1e-14)
    assert en.energy_ch_grad(ops4, ones, eps) == pytest.approx(0.0, abs=1e-14)
    zeros = np.zeros(mesh.n_nodes)
    assert en.energy_ch_dw(ops4, zeros, eps) == pytest.approx(
        1.0 / (4 * eps), rel=1e-13
    )
    x = mesh.nodes[:, 0].copy()
    assert en.energy_ch_grad(ops4, x, eps) == pytest.approx(eps / 2, rel=1e-13)


def test_anchoring_energy_zeros(ops4, rng):
    mesh = ops4.mesh
    eps, s_star = 0.05, 0.750025
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    gz = np.zeros((mesh.n_elements, 2))
    assert en.energy_wan(ops4, s, n, gz, eps) == 0.0
    assert en.energy_was(ops4, s, gz, eps, s_star) == 0.0
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    gphi = element_gradients(mesh, phi)
    s_const = np.full(mesh.n_nodes, s_star)
    assert en.energy_was(ops4, s_const, gphi, eps, s_star) == pytest.approx(
        0.0, abs=1e-16
    )
    aligned = np.tile([1.0, 0.0], (mesh.n_nodes, 1))
    gx = element_gradients(mesh, mesh.nodes[:, 0].copy())
    assert en.energy_wan(ops4, s, aligned, gx, eps) == 0.0


def test_was_energy_two_expressions_agree(ops4, rng):
    mesh = ops4.mesh
    s = rng.uniform(-0.4, 0.9, mesh.n_nodes)
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    gphi = element_gradients(mesh, phi)
    eps, s_star = 0.07, 0.750025
    direct = en.energy_was(ops4, s, gphi, eps, s_star)
    via_matrix = 0.5 * eps * float(phi @ (en.was_phi_matrix(ops4, s, s_star) @ phi))
    assert direct == pytest.approx(via_matrix, rel=1e-12)


def test_total_energy_constant_state(ops4):
    mesh = ops4.mesh
    weights = ModelWeights(s_star=0.75)
    s = np.full(mesh.n_nodes, 0.75)
    n = np.tile([1.0, 0.0], (mesh.n_nodes, 1))
    phi = np.ones(mesh.n_nodes)
    rep = en.total_energy(ops4, weights, s, n, phi)
    for val in (rep.e_erk, rep.e_chdw, rep.e_chgd, rep.e_wan, rep.e_was):
        assert val == pytest.approx(0.0, abs=1e-14)
    # the double well offsets the total by its constant value
    assert rep.total == pytest.approx(weights.w_dw * rep.e_dw, rel=1e-12)


def test_total_energy_zero_weights(ops4, rng):
    mesh = ops4.mesh
    weights = ModelWeights(
        w_erk=0, w_dw=0, w_chdw=0, w_chgd=0, w_wan=0, w_was=0
    )
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    assert en.total_energy(ops4, weights, s, n, phi).total == 0.0


def test_move_preset_initial_energy_golden():
    """Frozen after the first verified computation at full resolution."""
    from lcdroplet import config as cfg

    prob = cfg.build_problem(cfg.preset("droplet_move"))
    st = prob.initial
    rep = en.total_energy(
        prob.ops, prob.weights, st.s.values, st.n.values, st.phi.values
    )
    assert rep.total == pytest.approx(250.66744566923757, rel=1e-12)
    assert rep.e_erk == pytest.approx(169.97011936668366, rel=1e-12)
    assert rep.e_was == 0.0
    assert rep.total > 0.0


def test_model_weights_validation():
    with pytest.raises(ValueError):
        ModelWeights(w_erk=-1.0)
    with pytest.raises(ValueError):
        ModelWeights(eps=0.0)
    with pytest.raises(ValueError):
        ModelWeights(s_star=1.5)


# ---------------------------------------------------------------------------
# scheme systems
# ---------------------------------------------------------------------------

def test_director_system_spd(ops2, rng):
    from lcdroplet.solver import tangent_space

    mesh = ops2.mesh
    weights = ModelWeights(w_wan=2.0, rho=1.3)
    tau = 0.01
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    gphi = element_gradients(mesh, phi)
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[mesh.boundary_nodes] = False
    t = tangent_space(n)
    A, b = en.residual_director(ops2, weights, tau, s, n, gphi, t, free)
    Ad = A.toarray()
    assert np.abs(Ad - Ad.T).max() <= 1e-13
    eigs = np.linalg.eigvalsh(Ad)
    M_ff = ops2.mass[free][:, free].toarray()
    lam_mass = np.linalg.eigvalsh(M_ff).min()
    assert eigs.min() >= weights.rho * lam_mass - 1e-14


def test_orientation_system_spd(ops2, rng):
    mesh = ops2.mesh
    weights = ModelWeights(w_dw=100.0, w_wan=20.0, w_was=20.0)
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    gphi = element_gradients(mesh, phi)
    A, b = en.residual_s(ops2, weights, 0.002, s, n, gphi)
    Ad = A.toarray()
    assert np.abs(Ad - Ad.T).max() <= 1e-11 * np.abs(Ad).max()
    assert np.linalg.eigvalsh(Ad).min() > 0


def test_ch_jacobian_phi_block_symmetric(ops2, rng):
    mesh = ops2.mesh
    weights = ModelWeights(w_wan=3.0, w_was=5.0)
    s = rng.uniform(0.1, 0.9, mesh.n_nodes)
    n = unit_director(rng.uniform(0, 2 * np.pi, mesh.n_nodes))
    phi = rng.uniform(-1, 1, mesh.n_nodes)
    A0 = en.ch_step_matrix(ops2, weights, s, n)
    J = en.jacobian_ch(ops2, weights, 0.002, phi, A0).toarray()
    nn = mesh.n_nodes
    phi_block = J[nn:, :nn]
    assert np.abs(phi_block - phi_block.T).max() <= 1e-12 * np.abs(phi_block).max()


# ---------------------------------------------------------------------------
# structure lemmas (randomized, small trial counts; the acceptance suite
# runs the full 1000-trial versions)
# ---------------------------------------------------------------------------

def test_projection_monotonicity(ops4, rng):
    from lcdroplet.verify import projection_monotonicity_check

    outcome = projection_monotonicity_check(ops4, rng, trials=200)
    assert outcome.passed


def test_lumped_mass_monotonicity(ops4, rng):
    from lcdroplet.verify import lumped_monotonicity_check

    outcome = lumped_monotonicity_check(ops4, rng, trials=200)
    assert outcome.passed


def test_convex_split_inequality(ops4, rng):
    from lcdroplet.verify import convex_split_check

    outcome = convex_split_check(ops4, rng, trials=200)
    assert outcome.passed


def test_anisotropic_tension_identity():
    from lcdroplet.verify import anisotropic_identity_check

    assert anisotropic_identity_check().passed
