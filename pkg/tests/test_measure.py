import numpy as np
import pytest

from holrecon import measure
from holrecon.errors import ConfigurationError, SolverDivergenceError
from holrecon.fem import FESpace, ProblemConfig
from holrecon.harmonics import make_frequency_point
from holrecon.measure import (
    EpsilonGrid, MeasurementSweep, NoiseModel, add_noise, fourier_sample, read_sweep_archive, sg_second_derivative,
    snr_db, sweep_frequency, sweep_sign, write_sweep_archive,
)
from holrecon.mesh import build_disk_mesh
from holrecon.potentials import bump, fourier_oracle
from holrecon.sgdiff import SGConfig, sg_derivative_at

DESK_SG = SGConfig(25, 4, 2)
DESK_EPS = EpsilonGrid.uniform(33, -1, 1)


@pytest.fixture(scope="module")
def space():
    return FESpace(build_disk_mesh(32), 3)


@pytest.fixture(scope="module")
def bump_sweeps(space):
    cfg = ProblemConfig(2, bump())
    return {xi: sweep_frequency(make_frequency_point(xi), DESK_EPS, space, cfg) for xi in [(1.0, 0.0), (-1.0, 0.0)]}


def test_epsilon_grid():
    g = EpsilonGrid.uniform()
    assert len(g) == 64 and g.spacing == pytest.approx(4 / 63)
    for bad in ([0, 1, 2], [-1, 1], [-1, 0.5, 0.4, 1], [-1, -0.2, 1]):
        with pytest.raises(ConfigurationError):
            EpsilonGrid(np.array(bad, dtype=float))


def test_zero_potential_gives_zero(space16_p2):
    plus, minus = sweep_frequency(make_frequency_point((1.0, 2.0)), EpsilonGrid.uniform(9, -1, 1), space16_p2, ProblemConfig(2, None))
    assert np.all(plus.clean == 0) and np.all(minus.clean == 0)
    assert fourier_sample(plus, minus, SGConfig(9, 4, 2)) == 0


def test_eps_zero_sample(bump_sweeps):
    plus, minus = bump_sweeps[(1.0, 0.0)]
    i0 = np.flatnonzero(DESK_EPS.values == 0)
    assert len(i0) == 1 and plus.clean[i0[0]] == 0 and minus.clean[i0[0]] == 0
    assert plus.newton_iterations.max() <= 4


def test_example1_fourier_sample(bump_sweeps):
    qhat = fourier_sample(*bump_sweeps[(1.0, 0.0)], DESK_SG)
    oracle = fourier_oracle(bump(), np.array([1.0, 0.0]))
    assert abs(qhat - oracle) / abs(oracle) <= 0.03


def test_parity_structure(bump_sweeps):
    plus, _ = bump_sweeps[(1.0, 0.0)]
    d1 = sg_derivative_at(plus.eps, plus.clean, 0.0, SGConfig(25, 4, 1))
    d2 = sg_second_derivative(plus, DESK_SG)
    assert abs(d1) <= 1e-3 * abs(d2)


def test_hermitian_pair(bump_sweeps):
    a = fourier_sample(*bump_sweeps[(1.0, 0.0)], DESK_SG)
    b = fourier_sample(*bump_sweeps[(-1.0, 0.0)], DESK_SG)
    assert abs(a - np.conj(b)) <= 0.01 * abs(a)


def test_bias_control(bump_sweeps):
    plus, minus = bump_sweeps[(1.0, 0.0)]
    full = fourier_sample(plus, minus, DESK_SG)
    keep = np.abs(plus.eps) <= 0.5 + 1e-12
    half = [MeasurementSweep(s.frequency, s.sign, s.eps[keep], s.clean[keep]) for s in (plus, minus)]
    reduced = fourier_sample(*half, SGConfig(17, 4, 2))
    assert abs(reduced - full) <= 0.05 * abs(full)


def test_dc_component_on_fine_mesh():
    s = FESpace(build_disk_mesh(64), 3)
    plus = sweep_sign(make_frequency_point((0.0, 0.0)), +1, EpsilonGrid.uniform().values, s, ProblemConfig(2, bump()))
    # f- vanishes at ξ = 0, so q̂(0) = ½ SG''(I+)(0)
    d2 = sg_second_derivative(plus, SGConfig())
    oracle = fourier_oracle(bump(), np.zeros(2)).real
    assert abs(0.5 * d2 - oracle) <= 0.02 * oracle


def test_quadratic_sweeps():
    fp = make_frequency_point((1.0, 0.0))
    eps = DESK_EPS.values
    a, b = 0.7 - 0.2j, -0.1 + 0.4j
    plus = MeasurementSweep(fp, +1, eps, a * eps**2)
    minus = MeasurementSweep(fp, -1, eps, b * eps**2)
    assert fourier_sample(plus, minus, DESK_SG) == pytest.approx(a - b, rel=1e-10)


def test_fourier_sample_checks():
    eps = DESK_EPS.values
    p = MeasurementSweep(make_frequency_point((1.0, 0.0)), 1, eps, eps**2)
    m = MeasurementSweep(make_frequency_point((0.0, 1.0)), -1, eps, eps**2)
    with pytest.raises(ConfigurationError):
        fourier_sample(p, m, DESK_SG)
    with pytest.raises(ConfigurationError):
        fourier_sample(p, p, SGConfig(25, 4, 1))


def test_noise_model():
    fp = make_frequency_point((1.0, 0.0))
    eps = EpsilonGrid.uniform().values
    s = MeasurementSweep(fp, 1, eps, (1 + 0.5j) * eps**2)
    assert np.array_equal(add_noise(s, NoiseModel(0.0)).noisy, s.clean)
    a = add_noise(s, NoiseModel(0.01, 3), key=(4, 1)).noisy
    b = add_noise(s, NoiseModel(0.01, 3), key=(4, 1)).noisy
    c = add_noise(s, NoiseModel(0.01, 3), key=(4, 0)).noisy
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ConfigurationError):
        NoiseModel(-0.1)


def test_snr_calibration():
    fp = make_frequency_point((1.0, 0.0))
    eps = EpsilonGrid.uniform().values
    noise = NoiseModel(0.01, 11)
    r = np.random.default_rng(5)
    snrs = []
    for k in range(200):
        a = r.standard_normal(2) @ [1, 1j]
        s = MeasurementSweep(fp, 1, eps, a * eps**2 + 0.05 * a * eps**3)
        snrs.append(snr_db(add_noise(s, noise, key=(k,))))
    assert abs(np.mean(snrs) - 29) <= 2


def test_failed_samples_masked(space16_p2, monkeypatch):
    real = measure.newton_solve
    calls = {"n": 0}

    def flaky(space, init, cfg, source=None):
        calls["n"] += 1
        if calls["n"] == 3:
            raise SolverDivergenceError("boom", [1.0])
        return real(space, init, cfg, source)

    monkeypatch.setattr(measure, "newton_solve", flaky)
    s = sweep_sign(make_frequency_point((1.0, 0.0)), 1, EpsilonGrid.uniform(21, -1, 1).values, space16_p2, ProblemConfig(2, bump()))
    assert s.failed.sum() == 1 and np.isnan(s.clean[s.failed]).all()
    assert np.isfinite(sg_second_derivative(s, SGConfig(15, 4, 2)))

    monkeypatch.setattr(measure, "newton_solve", lambda *a, **k: (_ for _ in ()).throw(SolverDivergenceError("x")))
    with pytest.raises(SolverDivergenceError):
        sweep_sign(make_frequency_point((1.0, 0.0)), 1, EpsilonGrid.uniform(21, -1, 1).values, space16_p2, ProblemConfig(2, bump()))


def test_archive_roundtrip(tmp_path, bump_sweeps):
    sweeps = [add_noise(s, NoiseModel(0.01, 1), key=(i,)) for i, s in enumerate(bump_sweeps[(1.0, 0.0)])]
    path = tmp_path / "a.txt"
    write_sweep_archive(path, sweeps, {"config_hash": "abc"})
    back, header = read_sweep_archive(path)
    assert header == {"config_hash": "abc"}
    for s, t in zip(sweeps, back):
        assert s.frequency == t.frequency and s.sign == t.sign
        assert np.array_equal(s.eps, t.eps) and np.array_equal(s.clean, t.clean) and np.array_equal(s.noisy, t.noisy)
    (tmp_path / "bad.txt").write_text("nope\n")
    with pytest.raises(ConfigurationError):
        read_sweep_archive(tmp_path / "bad.txt")
