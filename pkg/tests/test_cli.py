import csv
import json
import subprocess
import sys

import pytest

from kqpdcert import harness
from kqpdcert.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from kqpdcert.config import ConfigError, ExperimentConfig, fig2_config, load_config, parse_section
from kqpdcert.systems import exact_k_spin, exact_k_xp

FOCK_SWEEP = "0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0"


def write_ini(path, text):
    path.write_text(text.strip() + "\n")
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# config parsing


def test_parse_section_defaults():
    cfg = parse_section({"system": "spin", "chi": "1"})
    assert cfg.chi_prime == 3.0 and cfg.probes == [(0.0, -1.0)]
    assert cfg.cutoffs.c_o == 0.01 and cfg.cutoffs.lambda_c == 12.0
    cfg = parse_section({"system": "fock_xp", "chi": "1 2", "probes": "0 0; 0.5 -0.5", "grid": "-1 1 0.5; -1 1 0.5"})
    assert cfg.chi == [1.0, 2.0] and cfg.probes[1] == (0.5, -0.5)
    assert cfg.grid == ((-1.0, 1.0, 0.5), (-1.0, 1.0, 0.5))


@pytest.mark.parametrize(
    "items,match",
    [
        ({"system": "spin", "chi": "1", "colour": "red"}, "unknown"),
        ({"chi": "1"}, "system"),
        ({"system": "spin", "chi": ""}, "empty"),
        ({"system": "spin", "chi": "1", "n_single": "50"}, ">= 100"),
        ({"system": "spin", "chi": "1", "probes": "0 0.5"}, "sigma2"),
        ({"system": "spin", "chi": "-1"}, "positive"),
        ({"system": "spin", "chi": "1", "n_lambda": "400"}, "odd"),
        ({"system": "spin", "chi": "one"}, "convert"),
    ],
)
def test_parse_section_errors(items, match):
    with pytest.raises(ConfigError, match=match):
        parse_section(items)


def test_load_config_sections(tmp_path):
    ini = write_ini(
        tmp_path / "c.ini",
        """
[DEFAULT]
system = spin
chi = 1.0  # inline comment
[exact]
chi = 0.5, 2
        """,
    )
    assert load_config(ini, "exact").chi == [0.5, 2.0]
    assert load_config(ini, "sweep").chi == [1.0]
    bad = write_ini(tmp_path / "bad.ini", "[plot]\nsystem = spin\n")
    with pytest.raises(ConfigError, match="sections"):
        load_config(bad, "exact")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini", "exact")


def test_override_ignores_none():
    cfg = ExperimentConfig(system="spin", chi=[1.0], chi_prime=3.0)
    assert cfg.override(master_seed=None) is cfg
    assert cfg.override(master_seed=9).master_seed == 9


def test_fig2_configs_match_caption():
    a, b = fig2_config("a"), fig2_config("b")
    assert (a.chi_prime, a.cutoffs.c_o, a.cutoffs.lambda_c, a.n_single, a.n_joint, a.trials) == (5.0, 0.011, 10.0, 15000, 30000, 20)
    assert (b.chi_prime, b.cutoffs.c_o, b.cutoffs.lambda_c, b.probes) == (3.0, 0.01, 12.0, [(0.0, -1.0)])
    assert a.chi[0] == 0.25 and a.chi[-1] == 3.0 and b.chi[-1] == 2.5
    with pytest.raises(ConfigError):
        fig2_config("c")


# ---------------------------------------------------------------------------
# commands


def test_exact_command_golden_header(tmp_path):
    ini = write_ini(tmp_path / "c.ini", "[exact]\nsystem = fock_xp\nchi = 1, 2\ngrid = -1 1 0.5; 0 1 0.5\n")
    assert main(["exact", "--config", ini, "--out", str(tmp_path / "o")]) == EXIT_OK
    header, rows = read_csv(tmp_path / "o" / "exact_k.csv")
    assert header == ["chi", "x", "p", "k_exact"]
    assert len(rows) == 2 * 5 * 3
    for chi, x, p, k in rows:
        assert float(k) == exact_k_xp(float(x), float(p), float(chi), 5.0)
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert set(manifest) >= {"config", "code_version", "trial_seeds", "duration_s", "files"}
    assert "exact_k.csv" in manifest["files"]


def test_exact_command_spin(tmp_path):
    ini = write_ini(tmp_path / "c.ini", "[exact]\nsystem = spin\nchi = 1\ngrid = -1 1 1\n")
    assert main(["exact", "--config", ini, "--out", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "exact_k.csv")
    assert header == ["chi", "sigma1", "sigma2", "k_exact"]
    assert [r[2] for r in rows] == ["1.0"] * 3 + ["-1.0"] * 3


@pytest.mark.parametrize(
    "system,chi,chi_prime,probe,exact",
    [
        ("fock_xp", FOCK_SWEEP, 5.0, "0 0", exact_k_xp),
        ("spin", "0.25, 0.5, 1.0, 1.5, 2.0, 2.5", 3.0, "0 -1", exact_k_spin),
    ],
)
def test_sweep_exact_column(tmp_path, system, chi, chi_prime, probe, exact):
    ini = write_ini(
        tmp_path / "c.ini",
        f"[sweep]\nsystem = {system}\nchi = {chi}\nchi_prime = {chi_prime}\nprobes = {probe}\n"
        "n_single = 500\nn_joint = 500\ntrials = 2\n",
    )
    assert main(["sweep", "--config", ini, "--out", str(tmp_path / "o")]) == EXIT_OK
    header, rows = read_csv(tmp_path / "o" / "sweep.csv")
    cols = ["x", "p"] if system == "fock_xp" else ["sigma1", "sigma2"]
    assert header == ["chi", *cols, "k_exact", "k_est_mean", "std_error"]
    assert len(rows) == len(chi.split(","))
    for row in rows:
        c, a1, a2, k = (float(v) for v in row[:4])
        assert k == pytest.approx(exact(a1, a2, c, chi_prime), abs=1e-12)


def test_sweep_empty_chi_writes_nothing(tmp_path):
    ini = write_ini(tmp_path / "c.ini", "[sweep]\nsystem = spin\nchi =\n")
    out = tmp_path / "o"
    assert main(["sweep", "--config", ini, "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_unknown_key_exit_code(tmp_path, capsys):
    ini = write_ini(tmp_path / "c.ini", "[estimate]\nsystem = spin\nchi = 1\nlamda_c = 4\n")
    assert main(["estimate", "--config", ini, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "lamda_c" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert main(["exact", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_all_cut_off_exit_code(tmp_path):
    ini = write_ini(
        tmp_path / "c.ini", "[estimate]\nsystem = spin\nchi = 1\nc_o = 1.5\nn_single = 200\nn_joint = 200\ntrials = 2\n"
    )
    out = tmp_path / "o"
    with pytest.warns(RuntimeWarning):
        assert main(["estimate", "--config", ini, "--out", str(out)]) == EXIT_NUMERICAL
    assert not (out / "estimates.csv").exists()


def test_estimate_golden_and_seed_override(tmp_path):
    ini = write_ini(
        tmp_path / "c.ini",
        "[estimate]\nsystem = spin\nchi = 1\nprobes = 0 -1; 0.5 1\nn_single = 1000\nn_joint = 1000\ntrials = 3\n",
    )
    runs = []
    for name, seed in (("a", "5"), ("b", "5"), ("c", "6")):
        out = tmp_path / name
        assert main(["estimate", "--config", ini, "--out", str(out), "--seed", seed]) == EXIT_OK
        runs.append((out / "estimates.csv").read_bytes())
    assert runs[0] == runs[1] and runs[0] != runs[2]
    header, rows = read_csv(tmp_path / "a" / "estimates.csv")
    assert header == ["sigma1", "sigma2", "trial", "k_estimate"]
    assert len(rows) == 6
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert [r["probe"] for r in report] == [[0.0, -1.0], [0.5, 1.0]]
    assert report[0]["verdict"] in ("classical_rejected", "inconclusive")


def test_threads_do_not_change_output(tmp_path):
    ini = write_ini(
        tmp_path / "c.ini", "[sweep]\nsystem = spin\nchi = 0.8, 1.2\nn_single = 500\nn_joint = 500\ntrials = 3\n"
    )
    main(["sweep", "--config", ini, "--out", str(tmp_path / "one"), "--threads", "1"])
    main(["sweep", "--config", ini, "--out", str(tmp_path / "two"), "--threads", "2"])
    assert (tmp_path / "one" / "sweep.csv").read_bytes() == (tmp_path / "two" / "sweep.csv").read_bytes()


def test_simulate_then_estimate_from_records(tmp_path):
    ini = write_ini(
        tmp_path / "c.ini",
        f"""
[simulate]
system = fock_xp
chi = 1
n_single = 300
n_joint = 200
trials = 2
output_dir = {tmp_path / "sim"}
[estimate]
system = fock_xp
chi = 1
n_single = 300
n_joint = 200
trials = 2
records = {tmp_path / "sim" / "records" / "chi_00"}
output_dir = {tmp_path / "est"}
        """,
    )
    assert main(["simulate", "--config", ini, "--seed", "4"]) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "sim" / "records" / "chi_00").iterdir())
    assert "trial_000_joint.csv" in files and "trial_001_single_p_prime.json" in files
    assert len(files) == 2 * 5 * 2
    assert main(["estimate", "--config", ini]) == EXIT_OK
    from_disk = read_csv(tmp_path / "est" / "estimates.csv")[1]

    # estimating from saved records and resampling with the same seed agree exactly
    cfg = load_config(ini, "estimate").override(records=None, master_seed=4, output_dir=str(tmp_path / "fresh"))
    harness.cmd_estimate(cfg)
    fresh = read_csv(tmp_path / "fresh" / "estimates.csv")[1]
    assert from_disk == fresh


def test_reproduce_bundle_golden_headers(tmp_path, monkeypatch):
    small = {
        "a": ExperimentConfig("fock_xp", [1.0, 2.0], 5.0, n_single=300, n_joint=300, trials=2),
        "b": ExperimentConfig("spin", [1.0, 2.0], 3.0, n_single=300, n_joint=300, trials=2),
    }
    monkeypatch.setattr(harness, "fig2_config", lambda panel, out: small[panel].override(output_dir=out))
    expected = {
        "a": ("x", "p"),
        "b": ("sigma1", "sigma2"),
    }
    for panel, cols in expected.items():
        out = tmp_path / panel
        assert main([f"reproduce-fig2{panel}", "--out", str(out)]) == EXIT_OK
        assert read_csv(out / "sweep.csv")[0] == ["chi", *cols, "k_exact", "k_est_mean", "std_error"]
        assert read_csv(out / "exact_curve.csv")[0] == ["chi", *cols, "k_exact"]
        assert len(read_csv(out / "exact_curve.csv")[1]) == 111
        assert read_csv(out / "estimates.csv")[0] == ["chi", *cols, "trial", "k_estimate"]
        header, rows = read_csv(out / "surface_chi1.csv")
        assert header == [*cols, "k_estimate", "k_exact"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"sweep.csv", "exact_curve.csv", "estimates.csv", "surface_chi1.csv"}
        assert manifest["command"] == f"reproduce-fig2{panel}"


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "kqpdcert.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("exact", "simulate", "estimate", "sweep", "reproduce-fig2a", "reproduce-fig2b"):
        assert cmd in res.stdout


def test_bad_seed_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["exact", "--seed", "-1"])
    assert exc.value.code == 2
