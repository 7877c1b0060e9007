import json
import math

import pytest

from asymeuler.cli import main
from asymeuler.io import ExpansionDocument

SQPI = math.sqrt(math.pi)


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def doc(terms, d=2, **extra):
    return {"schema_version": 1, "d": d, "order": None, "terms": terms, **extra}


def term(k, j, basis):
    return {"k": k, "j": j, "basis": [{"l": l, "m": m, "coeff": c} for l, m, c in basis]}


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def summary(out):
    return json.loads(out.strip().splitlines()[-1])


def test_invert_resonant_source(tmp_path, capsys):
    src = write(tmp_path, "s.json", doc([term(3, 0, [(1, 1, SQPI)])]))
    out_path = tmp_path / "u.json"
    code, out = run(capsys, ["invert", src, "--out", str(out_path)])
    assert code == 0
    s = summary(out)
    assert s["membership"]["member"]
    assert s["log_terms"] == [[[3, 0], [1, 1]]]
    u = ExpansionDocument.loads(out_path.read_text())
    assert u.value[(1, 1)].coefficient(1, 1) == pytest.approx(-0.5 * SQPI)


def test_laplacian_of_log_is_empty(tmp_path, capsys):
    src = write(tmp_path, "log.json", doc([term(0, 1, [(0, 0, math.sqrt(2 * math.pi))])]))
    code, out = run(capsys, ["laplacian", src])
    assert code == 0
    lap = ExpansionDocument.loads(out.splitlines()[0])
    assert lap.value.is_zero


def test_exit_codes(tmp_path, capsys):
    bad_window = write(tmp_path, "w.json", doc([term(2, 0, [(1, 1, 1.0)])]))
    assert run(capsys, ["invert", bad_window])[0] == 3
    garbage = tmp_path / "g.json"
    garbage.write_text("{oops")
    assert run(capsys, ["invert", str(garbage)])[0] == 2
    assert run(capsys, ["invert", str(tmp_path / "missing.json")])[0] == 2
    assert run(capsys, ["no-such-command"])[0] == 2


def test_membership_strict(tmp_path, capsys):
    src = write(tmp_path, "c.json", doc([term(0, 0, [(0, 0, 1.0)])]))
    code, out = run(capsys, ["membership", src, "--variant", "hat", "--order", "4"])
    assert code == 0 and not summary(out)["member"]
    assert run(capsys, ["membership", src, "--variant", "hat", "--order", "4", "--strict"])[0] == 3


def test_euler_rhs_from_hamiltonian(tmp_path, capsys):
    H = write(tmp_path, "h.json", doc([term(0, 0, [(2, 2, 2 * SQPI)])]))
    code, out = run(capsys, ["euler-rhs", H, "--order", "4", "--strict"])
    assert code == 0
    s = summary(out)
    assert s["verdict"] == "PASS" and s["tilde_member"]


def test_example1_table(capsys):
    code, out = run(capsys, ["example1", "--alpha", "1", "--strict"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "quantity,k,j,l,m,coefficient"
    q = [float(ln.rsplit(",", 1)[1]) for ln in lines if ln.startswith("Q,4,0,2,2,")]
    assert q == [pytest.approx(64.0, rel=1e-10)]
    assert summary(out)["verdict"] == "PASS"


def test_example2_passes(capsys):
    code, out = run(capsys, ["example2", "--strict"])
    assert code == 0
    assert summary(out)["verdict"] == "PASS"


def test_conserve_corpus(capsys):
    code, out = run(capsys, ["conserve", "--seed", "7", "--count", "10", "--strict"])
    assert code == 0
    assert summary(out)["verdict"] == "PASS"
    assert len(out.splitlines()) == 12


def test_flow_rotation(capsys):
    code, out = run(capsys, ["flow", "--strict"])
    assert code == 0
    s = summary(out)
    assert s["verdict"] == "PASS" and s["max_det_error"] <= 1e-5


def test_output_is_byte_stable(capsys):
    a = run(capsys, ["conserve", "--seed", "3", "--count", "2"])[1]
    b = run(capsys, ["conserve", "--seed", "3", "--count", "2"])[1]
    assert a == b
