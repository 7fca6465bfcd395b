import json

import pytest

from ugsos.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_gen_hypercube(tmp_path, capsys):
    out = tmp_path / "inst.json"
    code, _, err = run(capsys, "gen", "--family", "hypercube", "--d", "2",
                       "--alpha", "0.3", "--k", "2", "--eps", "0.0",
                       "--seed", "1", "--out", str(out))
    assert code == 0
    assert "planted value: 1.000000" in err
    d = json.loads(out.read_text())
    assert d["k"] == 2 and d["n"] == 4


def test_gen_then_solve_file_round_trip(tmp_path, capsys):
    inst_path = tmp_path / "inst.json"
    run(capsys, "gen", "--family", "hypercube", "--d", "2", "--alpha", "0.3",
        "--k", "2", "--eps", "0.0", "--seed", "1", "--out", str(inst_path))
    code, out, _ = run(capsys, "solve-round", "--family", "file", "--path",
                       str(inst_path), "--degree", "2", "--seed", "0")
    assert code == 0
    rep = json.loads(out)
    assert rep["sdp_value"] >= 1.0 - 1e-5
    assert rep["psi"] is None  # degree 2 has no degree-4 moments
    assert rep["derandomized_value"] == pytest.approx(1.0)


def test_solve_round_degree4_reports_potentials(capsys):
    code, out, _ = run(capsys, "solve-round", "--family", "hypercube",
                       "--d", "2", "--alpha", "0.3", "--k", "2",
                       "--eps", "0.0", "--degree", "4", "--seed", "3")
    assert code == 0
    rep = json.loads(out)
    assert rep["psi"] is not None and rep["psi"] >= 0.0
    assert rep["phi"] >= 0.0
    assert "wall_clock_s" in rep


def test_solve_round_deterministic_body(capsys):
    argv = ["solve-round", "--family", "hypercube", "--d", "2", "--alpha",
            "0.3", "--k", "2", "--eps", "0.0", "--degree", "2", "--seed", "5"]
    _, out1, _ = run(capsys, *argv)
    _, out2, _ = run(capsys, *argv)
    d1, d2 = json.loads(out1), json.loads(out2)
    d1.pop("wall_clock_s")
    d2.pop("wall_clock_s")
    assert d1 == d2


def test_verify_quick_subset(capsys):
    code, out, _ = run(capsys, "verify", "--only", "spectra")
    assert code == 0
    assert out.startswith("PASS spectra")


def test_verify_pe_file(tmp_path, capsys):
    from ugsos.sos import point_mass_pe, symmetrize
    pe_path = tmp_path / "pe.json"
    pe_path.write_text(symmetrize(point_mass_pe(3, 3, [0, 1, 2])).to_json())
    code, out, _ = run(capsys, "verify", "--only", "spectra", "--pe",
                       str(pe_path))
    assert code == 0
    assert "PASS pe-file" in out


def test_exit_code_parameter_error(capsys):
    # alpha*l not an integer for the johnson family
    code, _, err = run(capsys, "gen", "--family", "johnson", "--n", "6",
                       "--l", "2", "--alpha", "0.3")
    assert code == 3
    assert "parameter error" in err


def test_exit_code_size_cap(capsys):
    code, _, err = run(capsys, "solve-round", "--family", "johnson",
                       "--n", "12", "--l", "4", "--alpha", "0.5",
                       "--degree", "4")
    assert code == 4
    assert "size cap" in err


def test_verify_unknown_only_is_parameter_error(capsys):
    code, _, err = run(capsys, "verify", "--only", "nonexistent")
    assert code == 3
