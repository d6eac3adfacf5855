import numpy as np
import pytest

from maxwellinv.errors import InvalidCoefficientError, MaxwellInvError
from maxwellinv.fem import EdgeSpace
from maxwellinv.forward import (
    DirectSolver,
    IncidentWave,
    MediumConfig,
    add_noise,
    background_kappa,
    hcurl_error,
    kappa_field,
    plane_wave_field,
    plane_wave_neumann,
    read_dataset,
    solve_direct,
    synthesize_dataset,
    wave_directions,
    write_dataset,
)
from maxwellinv.mesh import PatchSpec, mesh_disk, tag_patches
from maxwellinv.supports import Ball


@pytest.fixture(scope="module")
def tagged_disk():
    mesh = mesh_disk(1.0, 0.08, [0.7, 0.8])
    return tag_patches(mesh, "Gamma", PatchSpec(count=32, angular_half_width=0.075))


@pytest.fixture(scope="module")
def medium():
    return MediumConfig()


def test_background_kappa_unit(medium):
    assert medium.kappa0 == 1.0 + 1.0j
    assert medium.k == 1.0


def test_background_kappa_microwave():
    m = MediumConfig(omega=1e8, eps0=8.854e-12, mu0=4e-7 * np.pi,
                     eps_background=1e-10, sigma_background=0.33)
    k0 = background_kappa(m)
    assert abs(k0.real - 11.294) < 0.01
    assert abs(k0.imag - 372.71) < 0.05


def test_medium_validation():
    with pytest.raises(ValueError):
        MediumConfig(omega=0.0)
    with pytest.raises(ValueError):
        MediumConfig(sigma_background=-1.0)


def test_wave_directions():
    waves = wave_directions(8)
    dirs = np.array([w.direction for w in waves])
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.allclose(dirs[0], [1.0, 0.0])
    assert np.allclose(dirs[2], [0.0, 1.0], atol=1e-15)
    with pytest.raises(ValueError):
        IncidentWave((1.0, 1.0))


def test_plane_wave_neumann_origin(medium):
    w = IncidentWave.from_angle(0.0)
    v = plane_wave_neumann(w, medium, np.zeros((1, 2)))[0]
    assert abs(v - (-0.45508986 + 1.09868411j)) < 1e-7


def test_plane_wave_decay(medium):
    # Im sqrt(kappa0) > 0 so the modulus decays along the propagation direction
    w = IncidentWave.from_angle(0.0)
    pts = np.array([[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    mod = np.abs(plane_wave_field(w, medium, pts)[:, 1])
    assert mod[0] > mod[1] > mod[2]


def test_plane_wave_satisfies_curlcurl(medium):
    # curl curl E = k^2 kappa0 E, checked via finite differences of the field
    w = IncidentWave.from_angle(0.7)
    h = 1e-5
    x0 = np.array([[0.3, -0.2]])

    def curl_fd(p):
        # scalar curl = d1 E2 - d2 E1
        e1p = plane_wave_field(w, medium, p + [h, 0.0])
        e1m = plane_wave_field(w, medium, p - [h, 0.0])
        e2p = plane_wave_field(w, medium, p + [0.0, h])
        e2m = plane_wave_field(w, medium, p - [0.0, h])
        return (e1p[:, 1] - e1m[:, 1] - e2p[:, 0] + e2m[:, 0]) / (2.0 * h)

    analytic = plane_wave_neumann(w, medium, x0)
    assert abs(curl_fd(x0) - analytic).max() < 1e-6
    # vector curl of the scalar curl: (d2 F, -d1 F)
    fp = plane_wave_neumann(w, medium, x0 + [0.0, h])
    fm = plane_wave_neumann(w, medium, x0 - [0.0, h])
    gp = plane_wave_neumann(w, medium, x0 + [h, 0.0])
    gm = plane_wave_neumann(w, medium, x0 - [h, 0.0])
    cc = np.stack([(fp - fm) / (2.0 * h), -(gp - gm) / (2.0 * h)], axis=1)
    expected = medium.k ** 2 * medium.kappa0 * plane_wave_field(w, medium, x0)
    assert abs(cc - expected).max() < 1e-5


def test_manufactured_convergence(medium):
    w = IncidentWave.from_angle(0.0)
    errs = []
    for h in (0.08, 0.04):
        mesh = mesh_disk(1.0, h, [])
        space = EdgeSpace(mesh)
        g = plane_wave_neumann(w, medium, mesh.tag("Gamma").midpoints)
        x = solve_direct(mesh, kappa_field(mesh, medium), g, medium, space=space)
        errs.append(hcurl_error(space, x,
                                lambda p: plane_wave_field(w, medium, p),
                                lambda p: plane_wave_neumann(w, medium, p)))
    rate = np.log(errs[0] / errs[1]) / np.log(2.0)
    assert 0.8 <= rate <= 1.2
    assert errs[1] < 0.02


def test_zero_load_zero_solution(tagged_disk, medium):
    x = solve_direct(tagged_disk, kappa_field(tagged_disk, medium),
                     lambda p: np.zeros(len(p), dtype=complex), medium)
    assert np.all(x == 0.0)


def test_solver_linearity(tagged_disk, medium):
    space = EdgeSpace(tagged_disk)
    solver = DirectSolver(space, kappa_field(tagged_disk, medium), medium)
    mids = tagged_disk.tag("Gamma").midpoints
    g1 = plane_wave_neumann(IncidentWave.from_angle(0.0), medium, mids)
    g2 = plane_wave_neumann(IncidentWave.from_angle(1.0), medium, mids)
    x = solver.solve(2.0 * g1 + g2)
    y = 2.0 * solver.solve(g1) + solver.solve(g2)
    assert abs(x - y).max() < 1e-10 * abs(y).max()


def test_kappa_field_support(tagged_disk, medium):
    ball = Ball(center=(-0.4, 0.0), r=0.2)
    kap = kappa_field(tagged_disk, medium, ball, 0.1)
    inside = ball.contains(tagged_disk.centroids())
    assert np.all(kap.values[inside] == 1.1 * (1.0 + 1.0j))
    assert np.all(kap.values[~inside] == 1.0 + 1.0j)
    kap.require_admissible()
    with pytest.raises(InvalidCoefficientError):
        kappa_field(tagged_disk, medium, ball, -1.5).require_admissible()


def test_add_noise_exact_level(tagged_disk, medium):
    ds = synthesize_dataset(tagged_disk, medium, Ball((-0.4, 0.0), 0.2), 0.1,
                            n_waves=2)
    t = ds.meas_gamma0
    noisy = add_noise(t, 0.02, seed=7)
    diff = noisy.values - t.values
    for w in range(t.n_waves):
        dn = np.sqrt(np.sum(np.abs(diff[w]) ** 2 * t.arc_lengths))
        vn = np.sqrt(np.sum(np.abs(t.values[w]) ** 2 * t.arc_lengths))
        assert abs(dn / vn - 0.02) < 1e-12
    again = add_noise(t, 0.02, seed=7)
    assert np.array_equal(noisy.values, again.values)
    other = add_noise(t, 0.02, seed=8)
    assert not np.array_equal(noisy.values, other.values)
    clean = add_noise(t, 0.0, seed=7)
    assert np.array_equal(clean.values, t.values)
    with pytest.raises(ValueError):
        add_noise(t, -0.1, seed=0)


def test_synthesize_dataset_contracts(tagged_disk, medium):
    ball = Ball((-0.4, 0.0), 0.2)
    ds = synthesize_dataset(tagged_disk, medium, ball, 0.1, n_waves=8)
    assert ds.meas_gamma0.n_waves == 8
    assert ds.meas_gamma0.curve_tag == "Gamma0"
    assert ds.diag_delta_int.curve_tag == "r=0.8"
    assert ds.meas_gamma0.norms().min() > 0.0
    # the perturbation is visible in the data
    assert ds.delta_gamma0().norms().max() > 1e-4
    assert ds.mesh_checksum == tagged_disk.checksum()
    with pytest.raises(MaxwellInvError):
        synthesize_dataset(tagged_disk, medium, None, 0.1)


def test_zero_amplitude_dataset(tagged_disk, medium):
    ds = synthesize_dataset(tagged_disk, medium, Ball((-0.4, 0.0), 0.2), 0.0,
                            n_waves=2)
    assert np.array_equal(ds.meas_gamma0.values, ds.bg_gamma0.values)
    assert np.all(ds.diag_delta_int.values == 0.0)


def test_trace_interp_identity(tagged_disk, medium):
    ds = synthesize_dataset(tagged_disk, medium, Ball((-0.4, 0.0), 0.2), 0.1,
                            n_waves=2)
    t = ds.diag_delta_int
    back = t.interp_values(t.angles)
    assert abs(back - t.values).max() < 1e-12 * abs(t.values).max()


def test_trace_interp_smooth_function(tagged_disk, medium):
    # interpolating exp(2 i theta) onto shifted angles matches the analytic value
    ds = synthesize_dataset(tagged_disk, medium, Ball((-0.4, 0.0), 0.2), 0.1,
                            n_waves=1)
    t = ds.diag_delta_int
    smooth = t.values.copy()
    smooth[0] = np.exp(2j * t.angles)
    from dataclasses import replace
    t2 = replace(t, values=smooth)
    dst = t.angles + 0.3
    got = t2.interp_values(dst)[0]
    assert abs(got - np.exp(2j * dst)).max() < 5e-3


def test_dataset_roundtrip(tmp_path, tagged_disk, medium):
    ds = synthesize_dataset(tagged_disk, medium, Ball((-0.4, 0.0), 0.2), 0.1,
                            n_waves=3, noise_eta=0.02, seed=5)
    path = tmp_path / "dataset.txt"
    write_dataset(ds, str(path))
    back = read_dataset(str(path))
    assert np.array_equal(back.meas_gamma0.values, ds.meas_gamma0.values)
    assert np.array_equal(back.bg_gamma0.values, ds.bg_gamma0.values)
    assert np.array_equal(back.diag_delta_int.values, ds.diag_delta_int.values)
    assert np.array_equal(back.meas_gamma0.midpoints, ds.meas_gamma0.midpoints)
    assert np.array_equal(back.directions, ds.directions)
    assert back.mesh_checksum == ds.mesh_checksum
    assert back.noise_eta == ds.noise_eta
    assert back.seed == ds.seed
