import numpy as np
import pytest

from maxwellinv.completion import QRConfig, QROperator, complete_traces
from maxwellinv.fem import EdgeSpace
from maxwellinv.forward import (
    DirectSolver,
    IncidentWave,
    MediumConfig,
    extract_trace,
    kappa_field,
    plane_wave_field,
    plane_wave_neumann,
    wave_directions,
)
from maxwellinv.mesh import PatchSpec, mesh_annulus, mesh_disk, tag_patches

PATCHES = PatchSpec(count=32, angular_half_width=0.075)


def rel_trace_error(trace, exact_values):
    num = np.sqrt(np.sum(np.abs(trace.values - exact_values) ** 2 * trace.arc_lengths))
    den = np.sqrt(np.sum(np.abs(exact_values) ** 2 * trace.arc_lengths))
    return num / den


@pytest.fixture(scope="module")
def medium():
    return MediumConfig()


@pytest.fixture(scope="module")
def annulus():
    mesh = mesh_annulus(0.7, 1.0, 0.02, [0.8])
    return tag_patches(mesh, "Gamma_outer", PATCHES)


@pytest.fixture(scope="module")
def background_traces(medium):
    """Direct background solves on a disk mesh: patch data plus the interior
    reference trace used as the completion oracle."""
    mesh = tag_patches(mesh_disk(1.0, 0.03, [0.8]), "Gamma", PATCHES)
    space = EdgeSpace(mesh)
    solver = DirectSolver(space, kappa_field(mesh, medium), medium)
    waves = wave_directions(4)
    sols = [solver.solve_wave(w) for w in waves]
    return (extract_trace(space, sols, waves, "Gamma0"),
            extract_trace(space, sols, waves, "r=0.8"),
            waves)


def test_config_validation():
    with pytest.raises(ValueError):
        QRConfig(delta=0.0)
    with pytest.raises(ValueError):
        QRConfig(max_iters=0)
    with pytest.raises(ValueError):
        QRConfig(data_weight=-1.0)


def test_consistent_background_completion(annulus, medium, background_traces):
    # data: background solution restricted to the patches; the known curl
    # trace on the full boundary comes from the incident-wave load
    gamma0, ref_int, waves = background_traces
    op = QROperator(annulus, medium)
    mids = annulus.tag("Gamma_outer").midpoints
    neumann = np.stack([plane_wave_neumann(w, medium, mids) for w in waves])
    trace, result = complete_traces(op, gamma0, "r=0.8", neumann=neumann)
    exact = ref_int.interp_values(trace.angles)
    assert rel_trace_error(trace, exact) <= 0.10
    assert result.n_iters <= 50
    assert np.all(np.diff(result.residuals) <= 1e-10 * result.residuals[0])


def test_plane_wave_completion_exactness(annulus, medium):
    # analytic Cauchy data on the accessible patches reproduces the analytic
    # trace on the interior circle
    w = IncidentWave.from_angle(0.3)
    op = QROperator(annulus, medium)
    tag = annulus.tag("Gamma0")
    tau = tag.midpoints[:, ::-1] * [-1.0, 1.0]
    tau = tau / np.linalg.norm(tau, axis=1, keepdims=True)
    d = np.einsum("ec,ec->e", plane_wave_field(w, medium, tag.midpoints), tau)
    mids = annulus.tag("Gamma_outer").midpoints
    g = plane_wave_neumann(w, medium, mids)
    result = op.complete(d[None, :], g[None, :])
    trace = op.completed_trace(result, "r=0.8", np.array([w.direction]))
    mi = trace.midpoints
    taui = mi[:, ::-1] * [-1.0, 1.0]
    taui = taui / np.linalg.norm(taui, axis=1, keepdims=True)
    exact = np.einsum("ec,ec->e", plane_wave_field(w, medium, mi), taui)
    assert rel_trace_error(trace, exact[None, :]) < 0.05


def test_scaled_variant_agrees(annulus, medium, background_traces):
    gamma0, ref_int, waves = background_traces
    mids = annulus.tag("Gamma_outer").midpoints
    neumann = np.stack([plane_wave_neumann(w, medium, mids) for w in waves])
    exact = None
    errors = []
    for scaled in (False, True):
        op = QROperator(annulus, medium,
                        config=QRConfig(scaled_variant=scaled))
        trace, _ = complete_traces(op, gamma0, "r=0.8", neumann=neumann)
        if exact is None:
            exact = ref_int.interp_values(trace.angles)
        errors.append(rel_trace_error(trace, exact))
    assert errors[1] <= 0.10
    assert abs(errors[0] - errors[1]) < 0.05


def test_completion_linear_in_data(medium):
    mesh = tag_patches(mesh_annulus(0.7, 1.0, 0.06, [0.8]), "Gamma_outer", PATCHES)
    cfg = QRConfig(max_iters=5, rel_change_tol=0.0)
    op = QROperator(mesh, medium, config=cfg)
    rng = np.random.default_rng(3)
    n = len(mesh.tag("Gamma0").edges)
    d1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    d2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    r1 = op.complete(d1[None, :])
    r2 = op.complete(d2[None, :])
    r12 = op.complete((2.0 * d1 + d2)[None, :])
    combo = 2.0 * r1.x_edge + r2.x_edge
    assert abs(r12.x_edge - combo).max() < 1e-10 * abs(combo).max()


def test_completion_deterministic(medium):
    mesh = tag_patches(mesh_annulus(0.7, 1.0, 0.06, [0.8]), "Gamma_outer", PATCHES)
    op = QROperator(mesh, medium)
    rng = np.random.default_rng(4)
    n = len(mesh.tag("Gamma0").edges)
    d = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a = op.complete(d[None, :])
    b = op.complete(d[None, :])
    assert np.array_equal(a.x_edge, b.x_edge)
    assert np.array_equal(a.residuals, b.residuals)


def test_normal_matrix_positive_definite(medium):
    mesh = tag_patches(mesh_annulus(0.7, 1.0, 0.15, [0.8]), "Gamma_outer", PATCHES)
    op = QROperator(mesh, medium)
    import scipy.sparse as sp
    B1, B2, B3, B4 = op._blocks
    w1, w2, w3, w4 = op._weights
    N = sum(B.conj().T @ sp.diags(w) @ B
            for B, w in zip(op._blocks, op._weights))
    A = (N + op.config.delta * op._penalty).toarray()
    assert abs(A - A.conj().T).max() < 1e-12
    assert np.linalg.eigvalsh(A).min() > 0.0


def test_data_shape_validation(medium):
    mesh = tag_patches(mesh_annulus(0.7, 1.0, 0.15, [0.8]), "Gamma_outer", PATCHES)
    op = QROperator(mesh, medium)
    with pytest.raises(ValueError):
        op.complete(np.zeros((1, 3), dtype=complex))
    n = len(mesh.tag("Gamma0").edges)
    with pytest.raises(ValueError):
        op.complete(np.zeros((1, n)), neumann=np.zeros((1, 3)))


def test_zero_data_zero_completion(medium):
    mesh = tag_patches(mesh_annulus(0.7, 1.0, 0.15, [0.8]), "Gamma_outer", PATCHES)
    op = QROperator(mesh, medium)
    n = len(mesh.tag("Gamma0").edges)
    result = op.complete(np.zeros((2, n), dtype=complex))
    assert np.all(result.x_edge == 0.0)
    assert np.all(result.x_nodal == 0.0)
