import math
import subprocess
import sys
from pathlib import Path

import pytest

from spectral_lab.cli import main
from spectral_lab.config import ConfigError, parse_config, parse_real

SMALL = {
    "density": "[measure]\nnodes = 512\nn = 200\n",
    "holder": "[measure]\nnodes = 1024\nmethod = limit\n[holder]\ndepth_max = 10\nstable_from = 6\n"
              "domination_from = 4\ndomination_to = 8\n",
    "dynamics": "[operator]\nbeta = pi/4\n[measure]\nnodes = 256\n[dynamics]\nper_decade = 8\n",
    "asymptotics": "[perturbation]\nkind = exponential\n[asymptotics]\nenergies = 8\nsandwich_n = 100\n",
    "pk": "[operator]\npotential = almost_mathieu\n[perturbation]\nkind = exponential\n"
          "[pk]\nenergies = 4\nk_max = 60\ncauchy_from = 30\n",
    "diophantine": "[diophantine]\nn_max = 5000\n",
}


def _run(tmp_path, experiment, text, threads=1, name="run"):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    prefix = tmp_path / name / "out"
    code = main([experiment, "--config", str(cfg), "--out", str(prefix), "--threads", str(threads)])
    return code, prefix


def _outputs(prefix: Path):
    return {p.name: p.read_bytes() for p in sorted(prefix.parent.iterdir())}


def test_parse_real_forms():
    assert parse_real("pi/4") == pytest.approx(math.pi / 4)
    assert parse_real("-pi/4") == pytest.approx(-math.pi / 4)
    assert parse_real("0.5*pi") == pytest.approx(math.pi / 2)
    assert parse_real("1e-3") == 1e-3
    with pytest.raises(ValueError):
        parse_real("banana")


def test_config_defaults_and_render_roundtrip():
    cfg = parse_config("", "density")
    assert cfg["measure.n"] == 2000 and cfg["operator.beta"] == 0.0
    again = parse_config(cfg.render(), "density")
    assert again.render() == cfg.render()


@pytest.mark.parametrize("text,line,field", [
    ("[measure]\nbogus = 1\n", 2, "measure.bogus"),
    ("[nope]\n", 1, "nope"),
    ("[measure]\nn = 10\nn = 20\n", 3, "measure.n"),
    ("[measure]\nnodes = abc\n", 2, "measure.nodes"),
    ("[operator]\nbeta = 2\n", 2, "operator.beta"),
    ("[measure]\njust text\n", 2, None),
    ("experiment = holder\n", 1, "experiment"),
])
def test_config_errors_carry_line_and_field(text, line, field):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "density")
    assert err.value.line == line
    assert err.value.field == field


def test_cross_field_check():
    with pytest.raises(ConfigError):
        parse_config("[dynamics]\nt_min = 10\nt_max = 5\n", "dynamics")


def test_unknown_key_exit_2_names_key(tmp_path, capsys):
    code, _ = _run(tmp_path, "density", "[measure]\nbogus_key = 1\n")
    assert code == 2
    assert "bogus_key" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["density", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "x")]) == 2


def test_bad_threads_exit_2(tmp_path):
    code, _ = _run(tmp_path, "density", "", threads=0)
    assert code == 2


def test_numeric_failure_exit_1(tmp_path, capsys):
    text = "[operator]\npotential = almost_mathieu\nlambda = 3\n[measure]\nn = 100000\nnodes = 16\n"
    code, _ = _run(tmp_path, "density", text)
    assert code == 1
    assert "carmona_density" in capsys.readouterr().err


def test_kappa_admissibility_enforced(tmp_path, capsys):
    code, _ = _run(tmp_path, "asymptotics", "[perturbation]\nkind = exponential\nkappa = 2\n")
    assert code == 2
    assert "kappa" in capsys.readouterr().err


def test_asymptotics_requires_perturbation(tmp_path):
    code, _ = _run(tmp_path, "asymptotics", "")
    assert code == 2


@pytest.mark.parametrize("experiment", sorted(SMALL))
def test_experiment_outputs(tmp_path, experiment):
    code, prefix = _run(tmp_path, experiment, SMALL[experiment])
    assert code == 0
    files = _outputs(prefix)
    manifest = files["out.manifest.txt"].decode()
    digest = manifest.strip().splitlines()[-1].split("=")[1].strip()
    assert f"experiment = {experiment}" in manifest and "version = " in manifest
    verdicts = files["out.verdict.txt"].decode().splitlines()
    body = [v for v in verdicts if not v.startswith("#")]
    assert body and all(": PASS (" in v or ": FAIL (" in v for v in body)
    csvs = [n for n in files if n.endswith(".csv")]
    assert csvs
    for n in csvs:
        assert files[n].decode().startswith(f"# manifest_digest: {digest}\n")


def test_dynamics_quarter_pi_verdict(tmp_path):
    code, prefix = _run(tmp_path, "dynamics", SMALL["dynamics"])
    text = (prefix.parent / "out.verdict.txt").read_text()
    assert "log_over_t regime: PASS (r²=" in text


def test_density_matches_free_density(tmp_path):
    code, prefix = _run(tmp_path, "density", SMALL["density"])
    text = (prefix.parent / "out.verdict.txt").read_text()
    assert "FAIL" not in text


@pytest.mark.parametrize("experiment", sorted(SMALL))
def test_byte_identical_reruns_and_threads(tmp_path, experiment):
    _, p1 = _run(tmp_path, experiment, SMALL[experiment], 1, "a")
    _, p2 = _run(tmp_path, experiment, SMALL[experiment], 1, "b")
    _, p8 = _run(tmp_path, experiment, SMALL[experiment], 8, "c")
    assert _outputs(p1) == _outputs(p2) == _outputs(p8)


def test_console_script_entry(tmp_path):
    cfg = tmp_path / "d.cfg"
    cfg.write_text(SMALL["diophantine"])
    res = subprocess.run([sys.executable, "-m", "spectral_lab.cli", "diophantine", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0
    assert "1 PASS" in res.stdout
