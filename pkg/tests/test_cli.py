import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from cli import cli
from conftest import write_image, write_weights
from data_service import format_job
from mac_engine import EngineConfig, exact_oracle, random_job


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def noisy_config(tmp_path):
    def make(sigma):
        path = tmp_path / f"noise_{sigma}.cfg"
        path.write_text(f"[analog]\nnoise_sigma_v = {sigma}\n", encoding="utf-8")
        return str(path)
    return make


def test_verify_passes_on_ideal_chain(runner, tmp_path):
    result = runner.invoke(cli, ["verify", "--trials", "30", "--seed", "3", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "FAIL" not in result.output
    assert "PASS codec/exact_product: 240/240" in result.output
    assert "PASS single_tap/oracle_equivalence: 480/480" in result.output
    assert (tmp_path / "verify.csv").read_text(encoding="utf-8").startswith("# seed=3\n")
    assert (tmp_path / "campaign.csv").exists()


def test_verify_fails_with_heavy_noise(runner, tmp_path, noisy_config):
    result = runner.invoke(
        cli, ["verify", "--config", noisy_config(0.05), "--trials", "20", "--out", str(tmp_path)]
    )
    assert result.exit_code == 1
    assert "FAIL single_tap/oracle_equivalence" in result.output


def test_verify_is_deterministic(runner, tmp_path, noisy_config):
    config = noisy_config(0.001)
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        runner.invoke(cli, ["verify", "--config", config, "--trials", "25", "--seed", "11", "--out", str(out)])
        outputs.append([(out / name).read_bytes() for name in ("verify.csv", "campaign.csv")])
    assert outputs[0] == outputs[1]


def test_seed_from_environment(runner, tmp_path):
    result = runner.invoke(cli, ["report", "--out", str(tmp_path)], env={"SCMAC_SEED": "9"})
    assert result.exit_code == 0, result.output
    assert (tmp_path / "energy_breakdown.csv").read_text(encoding="utf-8").startswith("# seed=9\n")


def test_sweep_sac(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "sac", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "sweep_sac.csv").read_text(encoding="utf-8").splitlines()
    assert lines[1] == "ones_count,sac_volts,flags"
    assert len(lines) == 2 + 1145
    assert lines[2].startswith("0,0.41,")
    assert lines[-1].startswith("1144,1,")


def test_sweep_all(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "all", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    for name in ("sac", "vtc", "int", "engine"):
        assert (tmp_path / f"sweep_{name}.csv").exists()


def test_conv_on_zero_image(runner, tmp_path):
    image = tmp_path / "image.txt"
    weights = tmp_path / "weights.txt"
    write_image(image, np.zeros((6, 6, 6), dtype=int))
    write_weights(weights, np.zeros((6, 5, 5), dtype=int), np.zeros(6, dtype=int))
    out = tmp_path / "out"
    result = runner.invoke(cli, ["conv", str(image), str(weights), "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "output map 2x2, 24 MACs" in result.output
    assert "pre-ADC deviation: max 0, RMS 0" in result.output
    assert (out / "conv_decoded.txt").read_text(encoding="utf-8") == "# seed=1\n2 2\n0 0\n0 0\n"
    assert (out / "conv_oracle.txt").read_text(encoding="utf-8") == "# seed=1\n2 2\n0 0\n0 0\n"
    assert (out / "conv_energy.txt").exists()


def test_conv_reports_bad_pixels(runner, tmp_path):
    image = tmp_path / "image.txt"
    weights = tmp_path / "weights.txt"
    pixels = np.zeros((6, 6, 6), dtype=int)
    pixels[1, 2, 3] = 13
    write_image(image, pixels)
    write_weights(weights, np.zeros((6, 5, 5), dtype=int), np.zeros(6, dtype=int))
    result = runner.invoke(cli, ["conv", str(image), str(weights), "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "c=1, y=2, x=3" in result.output


def test_report(runner, tmp_path):
    result = runner.invoke(cli, ["report", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "MACs: 6" in result.output
    assert "4.000 MHz" in result.output
    assert (tmp_path / "energy_headline.csv").exists()
    assert (tmp_path / "energy_report.txt").exists()


def test_invalid_config_is_reported(runner, tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("adc.bits = 0\n", encoding="utf-8")
    result = runner.invoke(cli, ["report", "--config", str(path), "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "adc.bits" in result.output


def test_conv_random_image_matches_oracle(runner, tmp_path):
    rng = np.random.default_rng(16)
    image = tmp_path / "image.txt"
    weights = tmp_path / "weights.txt"
    write_image(image, rng.integers(-11, 12, size=(6, 16, 16)))
    write_weights(weights, rng.integers(-4, 5, size=(6, 5, 5)), rng.integers(-4, 5, size=6))
    out = tmp_path / "out"
    result = runner.invoke(cli, ["conv", str(image), str(weights), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "output map 12x12, 864 MACs" in result.output
    assert "pre-ADC deviation: max 0, RMS 0" in result.output
    decoded = (out / "conv_decoded.txt").read_text(encoding="utf-8")
    assert decoded == (out / "conv_oracle.txt").read_text(encoding="utf-8")
    energy = pd.read_csv(out / "conv_energy.csv", comment="#")
    assert energy["fj_per_mac"].sum() == pytest.approx(5030)


def test_verify_runs_a_job_file(runner, tmp_path):
    engine = EngineConfig()
    rng = np.random.default_rng(21)
    jobs = [random_job(rng, engine) for _ in range(3)]
    path = tmp_path / "jobs.txt"
    path.write_text("".join(format_job(job) for job in jobs), encoding="utf-8")
    out = tmp_path / "out"
    result = runner.invoke(cli, ["verify", "--jobs", str(path), "--seed", "5", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "PASS campaign/oracle_equivalence: 3/3" in result.output
    campaign = pd.read_csv(out / "campaign.csv", comment="#")
    assert campaign["oracle_sum"].tolist() == [exact_oracle(job) for job in jobs]
    assert campaign["decoded_sum"].tolist() == campaign["oracle_sum"].tolist()


def test_verify_rejects_empty_job_file(runner, tmp_path):
    path = tmp_path / "jobs.txt"
    path.write_text("# nothing here\n", encoding="utf-8")
    result = runner.invoke(cli, ["verify", "--jobs", str(path), "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "no jobs" in result.output


def test_conv_outputs_are_byte_identical_across_runs_and_workers(runner, tmp_path):
    rng = np.random.default_rng(4)
    image = tmp_path / "image.txt"
    weights = tmp_path / "weights.txt"
    write_image(image, rng.integers(-11, 12, size=(6, 10, 10)))
    write_weights(weights, rng.integers(-4, 5, size=(6, 5, 5)), rng.integers(-4, 5, size=6))
    runs = []
    for name, workers in (("first", 3), ("second", 3), ("serial", 1)):
        config = tmp_path / f"{name}.cfg"
        config.write_text(f"[analog]\nnoise_sigma_v = 0.002\n[engine]\nworkers = {workers}\n", encoding="utf-8")
        out = tmp_path / name
        result = runner.invoke(
            cli, ["conv", str(image), str(weights), "--config", str(config), "--seed", "13", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        runs.append({path.name: path.read_bytes() for path in sorted(out.iterdir())})
    assert "conv_results.csv" in runs[0]
    assert runs[0] == runs[1] == runs[2]
