import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from holrecon import pipeline
from holrecon.cli import main
from holrecon.config import ExperimentConfig
from holrecon.errors import ConfigurationError
from holrecon.fourier_op import FourierData

TINY = {
    "mesh.radial_resolution": 8,
    "mesh.degree": 2,
    "epsilon.n": 9,
    "sg.window": 9,
    "frequency.n_r": 2,
    "frequency.n_theta": 2,
    "frequency.r_max": 1.0,
    "pixels.nx": 10,
    "pixels.ny": 10,
    "pipeline.workers": 1,
    "pipeline.plots": False,
}


def tiny(tmp_path, name="run", **extra):
    return ExperimentConfig().override({**TINY, "pipeline.output_dir": str(tmp_path / name), **extra})


def test_roundtrip_bit_identical(tmp_path):
    cfg = tiny(tmp_path, **{"inversion.ladder": [1e-8, 1e-6], "inversion.tv_beta": 0.01})
    cfg.save(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back == cfg and back.to_json() == (tmp_path / "c.json").read_text() and back.hash == cfg.hash


@given(st.floats(1e-12, 1.0), st.integers(0, 2**31), st.sampled_from(["tikhonov", "tv"]))
def test_roundtrip_property(lam, seed, method):
    cfg = ExperimentConfig().override({"inversion.lam": lam, "noise.seed": seed, "inversion.method": method})
    assert ExperimentConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()


def test_config_errors():
    d = ExperimentConfig().to_dict()
    d["mesh"]["colour"] = 1
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(d)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"extra": {}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"schema_version": 2})
    with pytest.raises(ConfigurationError):
        ExperimentConfig().override({"mesh.nope": 3})
    with pytest.raises(ConfigurationError):
        ExperimentConfig().override({"mesh.degree": "3"})
    for bad in ({"frequency.r_max": 11.0}, {"problem.p": 1}, {"inversion.lam": 0.0}, {"sg.window": 99},
                {"potential.params": [0, 0, 0.4, 1]}, {"potential.kind": "cube"}, {"pipeline.data_source": "web"}):
        with pytest.raises(ConfigurationError):
            ExperimentConfig().override(bad)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json("{not json")


def test_override_changes_hash():
    a = ExperimentConfig()
    b = a.override({"noise.seed": 5})
    assert b.noise.seed == 5 and a.hash != b.hash and a.override({}) == a


def test_full_run_outputs(tmp_path):
    out = pipeline.run_full(tiny(tmp_path))
    files = sorted(p.name for p in out.directory.iterdir())
    assert {"config.json", "fourier.txt", "sweeps.txt", "reconstruction.txt", "ground_truth.txt", "metadata.json", "summary.json"} <= set(files)
    cfg = tiny(tmp_path)
    for name in files:
        assert pipeline.file_config_hash(out.directory / name) == cfg.hash, name
    s = json.loads((out.directory / "summary.json").read_text())
    assert s["forward_solves"] == 3 * 2 * 8 and s["failed_solves"] == 0
    # F duplicates for ξ=0 collapse to one forward sweep pair
    assert s["unique_frequencies"] == 3
    _, cells, values = pipeline.read_pixel_values(out.directory / "reconstruction.txt")
    assert np.array_equal(values, out.result.q_pixels)


def test_zero_potential_zero_reconstruction(tmp_path):
    cfg = tiny(tmp_path, **{"potential.kind": "zero", "potential.params": [], "noise.rho": 0.0})
    out = pipeline.run_full(cfg)
    assert np.abs(out.fourier.values).max() == 0
    assert np.abs(out.result.q_pixels).max() <= 1e-12


def test_determinism(tmp_path):
    a = pipeline.run_full(tiny(tmp_path, "a"))
    b = pipeline.run_full(tiny(tmp_path, "b"))
    for name in ("fourier.txt", "reconstruction.txt", "sweeps.txt"):
        assert (a.directory / name).read_bytes() == (b.directory / name).read_bytes()


def test_mixed_provenance_rejected(tmp_path):
    pipeline.run_full(tiny(tmp_path))
    with pytest.raises(pipeline.StageError) as info:
        pipeline.run_full(tiny(tmp_path, **{"noise.seed": 1}))
    assert info.value.stage == "config"


def test_inversion_only_sources(tmp_path):
    full = pipeline.run_full(tiny(tmp_path, "full"))
    from_archive = pipeline.run_inversion_only(tiny(tmp_path, "arch", **{
        "pipeline.mode": "inversion_only", "pipeline.data_source": "archive", "pipeline.data_file": str(full.directory / "sweeps.txt")}))
    assert np.allclose(from_archive.fourier.values, full.fourier.values, rtol=1e-12)
    from_file = pipeline.run_inversion_only(tiny(tmp_path, "file", **{
        "pipeline.mode": "inversion_only", "pipeline.data_source": "fourier", "pipeline.data_file": str(full.directory / "fourier.txt")}))
    assert np.array_equal(from_file.result.q_pixels, full.result.q_pixels)
    oracle = pipeline.run_inversion_only(tiny(tmp_path, "oracle", **{"pipeline.mode": "inversion_only", "noise.fourier_rho": 0.01}))
    assert oracle.summary["data_source"] == "oracle"
    with pytest.raises(pipeline.StageError) as info:
        pipeline.run_inversion_only(tiny(tmp_path, "none", **{"pipeline.mode": "inversion_only", "pipeline.data_source": "fourier"}))
    assert info.value.stage == "data"


def test_sweep_lambda_monotone(tmp_path):
    cfg = tiny(tmp_path, **{"pipeline.mode": "inversion_only", "noise.fourier_rho": 0.01})
    rows = pipeline.sweep_lambda(cfg, [1e-10, 1e-6, 1e-2])
    assert np.all(np.diff([r[1] for r in rows]) >= 0)
    assert pipeline.file_config_hash(tmp_path / "run" / "lcurve.txt") == cfg.hash


def test_cli_verbs(tmp_path, capsys):
    flags = [f"--{k.replace('.', '-').replace('_', '-')}={json.dumps(v)}" for k, v in TINY.items()]
    out = tmp_path / "cli"
    assert main(["run", *flags, f"--pipeline-output-dir={out}"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["operator_shape"][0] == 4
    cfg_file = tmp_path / "c.json"
    ExperimentConfig.load(out / "config.json").override({"pipeline.output_dir": str(tmp_path / "inv"), "pipeline.mode": "inversion_only"}).save(cfg_file)
    assert main(["invert", "--config", str(cfg_file)]) == 0
    capsys.readouterr()
    assert main(["sweep-lambda", "--config", str(cfg_file), "--pipeline-output-dir", str(tmp_path / "sw"), "--lambdas", "1e-8,1e-4"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2
    assert main(["oracle", *flags, "--out", str(tmp_path / "o.txt")]) == 0
    assert len(FourierData.read(tmp_path / "o.txt").values) == 4
    assert main(["mesh-info", "--resolution", "8", "--degree", "2"]) == 0
    info = json.loads(capsys.readouterr().out.split("wrote")[-1].split("\n", 1)[1])
    assert info["vertices"] > 0 and info["dofs"] > info["vertices"]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--mesh-degree", "0"]) == 2
    assert main(["invert", "--pipeline-data-source", "fourier", f"--pipeline-output-dir={tmp_path / 'x'}"]) == 3
    err = capsys.readouterr().err
    assert "stage config" in err and "stage data" in err
    with pytest.raises(SystemExit):
        main(["run", "--inversion-bogus", "1"])
