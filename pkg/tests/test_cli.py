import csv

import numpy as np
import pytest

from koiterfsi.checkpoint import field_offset, read_checkpoint, write_checkpoint
from koiterfsi.cli import main
from koiterfsi.config import load_config
from koiterfsi.coupled import CoupledProblem, solve_decoupled
from koiterfsi.verification import make_checkpoint, resume_point

FREE_SHORT = """\
[data]
scenario = free

[time]
T = 0.05

[output]
plot = false
snapshot_every = 2
"""


def write_ini(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_summary(path):
    out, block = {}, None
    for line in path.read_text().splitlines():
        if line.startswith("["):
            block = line.strip("[]")
            out[block] = {}
        elif " = " in line:
            k, v = line.split(" = ", 1)
            out[block][k] = v
    return out


def ledger_rows(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.fixture(scope="module")
def decoupled_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("decoupled")
    ini = write_ini(root, FREE_SHORT)
    out = root / "out"
    code = main(["--config", str(ini), "--mode", "decoupled", "--out", str(out)])
    return ini, out, code


def test_identity_suite_mode(tmp_path, capsys):
    assert main(["--mode", "identity-suite", "--out", str(tmp_path)]) == 0
    report = (tmp_path / "identity_report.txt").read_text()
    assert "[FAIL]" not in report and report.count("[PASS]") >= 20
    assert read_summary(tmp_path / "summary.txt")["result"]["passed"] == "True"


def test_decoupled_run_writes_every_artifact(decoupled_run):
    _, out, code = decoupled_run
    assert code == 0
    for name in ("ledger.csv", "shell_trace.csv", "checkpoint.kfsi", "summary.txt"):
        assert (out / name).is_file()
    header, rows = ledger_rows(out / "ledger.csv")
    assert header == ["t", "E_kin_fluid", "Dissipation_cum", "E_kin_shell", "E_koiter", "E_total",
                      "groenwall_envelope", "defect"]
    assert rows.shape == (6, 8)
    snaps = sorted((out / "snapshots").glob("step_*.txt"))
    assert [p.name for p in snaps] == ["step_00000.txt", "step_00002.txt", "step_00004.txt"]
    assert snaps[0].read_text().startswith("# time 0.0\nNODES ")


def test_summary_records_provenance(decoupled_run):
    ini, out, _ = decoupled_run
    prov = read_summary(out / "summary.txt")["provenance"]
    for key in ("mode", "config_sha256", "code_version", "numpy", "scipy", "seed", "eps_schedule", "coupled_unknowns"):
        assert key in prov
    assert prov["config_sha256"] == load_config(ini).digest()


def test_runs_are_deterministic(decoupled_run, tmp_path):
    ini, out, _ = decoupled_run
    assert main(["--config", str(ini), "--mode", "decoupled", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ledger.csv").read_bytes() == (out / "ledger.csv").read_bytes()
    assert (tmp_path / "checkpoint.kfsi").read_bytes() == (out / "checkpoint.kfsi").read_bytes()


def test_resume_from_an_intermediate_checkpoint(decoupled_run, tmp_path):
    ini, out, _ = decoupled_run
    pb = CoupledProblem(load_config(ini))
    full = solve_decoupled(pb, pb.prescribed_delta(), sample=False)
    k = 2
    state = full.final_state()
    state.t, state.z, state.d, state.geometry = full.times[k], full.z[k], full.eta.coeffs[k], full.geometry[k]
    ck = make_checkpoint(pb, "decoupled", state, k, full.ledger, pb.epsilon(), status="failed")
    path = write_checkpoint(tmp_path / "mid.kfsi", ck)
    assert resume_point(read_checkpoint(path)).index == k
    again = tmp_path / "again"
    assert main(["--config", str(ini), "--mode", "decoupled", "--checkpoint", str(path), "--out", str(again)]) == 0
    _, a = ledger_rows(out / "ledger.csv")
    _, b = ledger_rows(again / "ledger.csv")
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_resume_refuses_a_foreign_checkpoint(decoupled_run, tmp_path, capsys):
    _, out, _ = decoupled_run
    other = write_ini(tmp_path, FREE_SHORT.replace("T = 0.05", "T = 0.04"), "other.ini")
    code = main(["--config", str(other), "--mode", "decoupled", "--checkpoint", str(out / "checkpoint.kfsi"),
                 "--out", str(tmp_path / "o")])
    assert code == 2 and "different configuration" in capsys.readouterr().err


def test_verify_accepts_a_fresh_checkpoint(decoupled_run, tmp_path):
    _, out, _ = decoupled_run
    assert main(["--mode", "verify", "--checkpoint", str(out / "checkpoint.kfsi"), "--out", str(tmp_path)]) == 0
    assert "[FAIL]" not in (tmp_path / "verify_report.txt").read_text()


def test_verify_flags_a_corrupted_velocity(decoupled_run, tmp_path):
    _, out, _ = decoupled_run
    data = bytearray((out / "checkpoint.kfsi").read_bytes())
    off = field_offset(bytes(data), "u")
    data[off + 8 * 300: off + 8 * 310] = np.full(10, 0.5).astype("<f8").tobytes()
    bad = tmp_path / "bad.kfsi"
    bad.write_bytes(bytes(data))
    assert main(["--mode", "verify", "--checkpoint", str(bad), "--out", str(tmp_path)]) == 4
    assert "[FAIL] verify: divergence residual" in (tmp_path / "verify_report.txt").read_text()


def test_verify_rejects_a_truncated_file(decoupled_run, tmp_path, capsys):
    _, out, _ = decoupled_run
    bad = tmp_path / "short.kfsi"
    bad.write_bytes((out / "checkpoint.kfsi").read_bytes()[:-100])
    assert main(["--mode", "verify", "--checkpoint", str(bad), "--out", str(tmp_path)]) == 2
    assert "byte offset" in capsys.readouterr().err


def test_configuration_errors_exit_2_with_the_line(tmp_path, capsys):
    ini = write_ini(tmp_path, "[time]\ndt = 0.01\n\n[mesh]\nnx = many\n")
    assert main(["--config", str(ini), "--mode", "decoupled", "--out", str(tmp_path / "o")]) == 2
    assert f"{ini}:5:" in capsys.readouterr().err


def test_zero_data_coupled_run(tmp_path):
    ini = write_ini(tmp_path, "[data]\nscenario = zero\n[time]\nT = 0.03\n[output]\nplot = true\n")
    assert main(["--config", str(ini), "--mode", "coupled", "--out", str(tmp_path)]) == 0
    result = read_summary(tmp_path / "summary.txt")["result"]
    assert result["converged"] == "True" and result["iterations"] == "1"
    assert (tmp_path / "energy.png").stat().st_size > 0 and (tmp_path / "picard.csv").is_file()


def test_unconverged_coupling_exits_3_with_a_report(tmp_path):
    ini = write_ini(tmp_path, FREE_SHORT.replace("[output]", "[picard]\nmax_iter = 1\n\n[output]"))
    assert main(["--config", str(ini), "--mode", "coupled", "--out", str(tmp_path)]) == 3
    report = (tmp_path / "failure_report.txt").read_text()
    assert "error = SolverFailure" in report and "exit_code = 3" in report
