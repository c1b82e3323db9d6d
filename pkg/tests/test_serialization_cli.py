import json

import numpy as np
import pytest
from click.testing import CliRunner

from hadamard36 import certify
from hadamard36 import constructions as C
from hadamard36.cli import main
from hadamard36.serialization import (
    ExponentRangeError,
    MalformedHeaderError,
    PayloadLengthError,
    PayloadValueError,
    append_certificate,
    make_certificate,
    read_certificates,
    read_matrix,
    write_matrix,
)
from hadamard36.tensor_core import is_two_unitary


def invoke(*args, **kwargs):
    return CliRunner().invoke(main, [str(a) for a in args], **kwargs)


def test_butson_round_trip_is_exact(tmp_path, H0):
    path = tmp_path / "h.json"
    doc = write_matrix(path, H0)
    assert doc["representation"] == "butson" and doc["q"] == 6
    H, header = read_matrix(path)
    np.testing.assert_array_equal(header["exponents"], C.base_matrix_B() % 6)
    np.testing.assert_allclose(H, H0, atol=1e-14)
    assert len(header["sha256"]) == 64


def test_phase_round_trip_is_exact(tmp_path, rng):
    phases = C.hadamard36_phases(rng.uniform(0, 6, 19))
    path = tmp_path / "p.json"
    write_matrix(path, np.exp(1j * np.pi * phases / 3), "phase-sixths", phases=phases)
    _, header = read_matrix(path)
    np.testing.assert_array_equal(header["phases"], phases)


def test_complex_round_trip_keeps_residuals(tmp_path):
    U = C.build_U(2)
    path = tmp_path / "u.json"
    write_matrix(path, U, "complex")
    V, _ = read_matrix(path)
    assert np.abs(V - U).max() <= 1e-15
    before, after = is_two_unitary(U), is_two_unitary(V)
    assert after.passed
    assert abs(before.residual - after.residual) <= 1e-12


def _doc(H0):
    from hadamard36.serialization import encode_matrix
    return encode_matrix(H0)


@pytest.mark.parametrize("mutate, error", [
    (lambda d: d.update(payload=d["payload"][:-1]), PayloadLengthError),
    (lambda d: d.update(format="other"), MalformedHeaderError),
    (lambda d: d.update(n="36"), MalformedHeaderError),
    (lambda d: d.update(representation="hex"), MalformedHeaderError),
    (lambda d: d["payload"].__setitem__(0, 6), ExponentRangeError),
    (lambda d: d["payload"].__setitem__(0, 1.5), PayloadValueError),
    (lambda d: d.update(q=1), MalformedHeaderError),
])
def test_read_errors_are_distinct(tmp_path, H0, mutate, error):
    doc = _doc(H0)
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(error) as info:
        read_matrix(path)
    assert info.value.code == error.code
    assert len({PayloadLengthError.code, MalformedHeaderError.code,
                ExponentRangeError.code, PayloadValueError.code}) == 4


def test_length_error_for_1295_entries(tmp_path, H0):
    doc = _doc(H0)
    doc["payload"] = doc["payload"][:1295]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(PayloadLengthError, match="1295"):
        read_matrix(path)


def test_certificates_append_only(tmp_path):
    path = tmp_path / "c.jsonl"
    c1 = make_certificate({"sha256": "a"}, [{"name": "x", "passed": True, "residual": 0.0}], timestamp="t1")
    c2 = make_certificate({"sha256": "b"}, [], rng_seed=3, timestamp="t2")
    append_certificate(path, c1)
    first = path.read_bytes()
    append_certificate(path, c2)
    assert path.read_bytes().startswith(first)
    recs = read_certificates(path)
    assert [r["subject"]["sha256"] for r in recs] == ["a", "b"]
    assert recs[1]["environment"]["rng_seed"] == 3


def test_check_records_carry_residuals(H0):
    for name in certify.CHECKS:
        rec = certify.run_check(name, H0, scale=6)
        assert isinstance(rec["residual"], float)
        assert isinstance(rec["passed"], bool)
    with pytest.raises(ValueError):
        certify.run_check("bogus", H0)


def test_tolerance_from_environment(monkeypatch, H0):
    monkeypatch.setenv(certify.TOL_ENV, "1e-30")
    assert certify.run_check("chm", H0)["tolerance"] == 1e-30
    assert not certify.run_check("chm", H0)["passed"]


def test_cli_generate_verify_defect(tmp_path):
    h = tmp_path / "h.json"
    assert invoke("generate", "hadamard36", "--out", h).exit_code == 0
    res = invoke("verify", h, "--checks", "chm,two-unitary", "--scale", 6)
    assert res.exit_code == 0, res.stderr
    assert "PASS chm" in res.stdout
    res = invoke("defect", h)
    assert res.exit_code == 0
    assert res.stdout.strip() == "79"


def test_cli_verify_failure_and_corruption(tmp_path):
    h = tmp_path / "h.json"
    invoke("generate", "hadamard36", "--out", h)
    res = invoke("verify", h, "--checks", "symmetric")
    assert res.exit_code == 1
    assert "FAIL symmetric" in res.stderr and "residual" in res.stderr

    doc = json.loads(h.read_text())
    doc["payload"][5] = (doc["payload"][5] + 1) % 6
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    res = invoke("verify", bad, "--checks", "chm", "--scale", 6)
    assert res.exit_code == 1
    assert "FAIL chm" in res.stderr

    junk = tmp_path / "junk.json"
    junk.write_text("{")
    cert = tmp_path / "c.jsonl"
    res = invoke("verify", junk, "--cert", cert)
    assert res.exit_code == 1
    assert "E_HEADER" in res.stderr
    assert read_certificates(cert)[0]["checks"][0]["name"] == "read"


def test_cli_usage_errors(tmp_path):
    h = tmp_path / "h.json"
    invoke("generate", "fourier", "--d", 3, "--out", h)
    assert invoke("verify", h, "--bogus").exit_code == 2
    assert invoke("verify", h, "--checks", "nonsense").exit_code == 2
    assert invoke("generate", "biunimodular", "--out", h).exit_code == 2
    assert invoke("frobnicate").exit_code == 2


def test_cli_verify_does_not_mutate_and_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    invoke("generate", "hadamard36", "--alpha", "random", "--rng", 5, "--out", a)
    invoke("generate", "hadamard36", "--alpha", "random", "--rng", 5, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    before = a.read_bytes()
    c1, c2 = tmp_path / "c1.jsonl", tmp_path / "c2.jsonl"
    invoke("verify", a, "--scale", 6, "--cert", c1)
    invoke("verify", a, "--scale", 6, "--cert", c2)
    assert a.read_bytes() == before
    r1, r2 = read_certificates(c1)[0], read_certificates(c2)[0]
    r1.pop("timestamp"), r2.pop("timestamp")
    assert r1 == r2


def test_cli_sinkhorn_d3(tmp_path):
    out, trace = tmp_path / "x.json", tmp_path / "t.json"
    res = invoke("sinkhorn", "--d", 3, "--out", out, "--trace", trace)
    assert res.exit_code == 0, res.output
    assert res.stdout.startswith("converged")
    doc = json.loads(trace.read_text())
    assert doc["trace"]["status"] == "converged"
    assert doc["config"]["eta"] == 0.05
    X, _ = read_matrix(out)
    assert is_two_unitary(X, tol=1e-9).passed


def test_cli_sinkhorn_d2_fails(tmp_path):
    res = invoke("sinkhorn", "--d", 2, "--t-max", 200)
    assert res.exit_code == 1
    assert invoke("sinkhorn", "--d", 3, "--ramp", "oops").exit_code == 2


def test_cli_chmize(tmp_path, H0):
    from scipy.stats import unitary_group
    from hadamard36.tensor_core import kron

    V1, V2 = (unitary_group.rvs(6, random_state=s) for s in (11, 12))
    y, out = tmp_path / "y.json", tmp_path / "out.json"
    write_matrix(y, kron(V1, V2) @ H0, "complex")
    res = invoke("chmize", y, "--restarts", 1, "--budget", 1)
    assert res.exit_code == 1
    assert res.stdout.startswith("Z = ")
    res = invoke("chmize", y, "--out", out)
    assert res.exit_code == 0, res.stdout
    M, _ = read_matrix(out)
    np.testing.assert_allclose(np.abs(M), 1, atol=1e-6)


def test_report_empty_and_partial(tmp_path):
    res = invoke("report", tmp_path)
    assert res.exit_code == 0
    assert res.stdout.strip().splitlines()[0].split() == [
        "matrix", "|", "defect", "|", "Butson", "class", "|", "symmetric", "|", "2-unitary"]
    assert len(res.stdout.strip().splitlines()) == 2

    h = tmp_path / "h.json"
    invoke("generate", "hadamard36", "--out", h)
    invoke("verify", h, "--checks", "two-unitary", "--scale", 6, "--cert", tmp_path / "c.jsonl")
    res = invoke("report", tmp_path)
    assert res.exit_code == 0
    assert "not run" in res.stdout


def test_report_full_table(tmp_path):
    cert = tmp_path / "certs.jsonl"
    jobs = [
        ("h0", ["hadamard36"]),
        ("hs", ["hadamard36", "--alpha", "sigma"]),
        ("hd", ["hadamard36", "--gamma", 0]),
        ("ha", ["hadamard36", "--alpha", "random", "--rng", 1]),
        ("u1", ["biunimodular", "--index", 1]),
        ("u2", ["biunimodular", "--index", 2]),
        ("u3", ["biunimodular", "--index", 3]),
        ("u3a", ["biunimodular", "--index", 3, "--a", 0.37]),
    ]
    for name, args in jobs:
        path = tmp_path / f"{name}.json"
        assert invoke("generate", *args, "--out", path).exit_code == 0
        invoke("verify", path, "--checks", "butson,symmetric,two-unitary", "--scale", 6, "--cert", cert)
        invoke("defect", path, "--cert", cert)
    rows = {r[0]: r for r in certify.summary_rows(tmp_path)}
    assert rows["H(0)"] == ("H(0)", "79", "BH(36,6)", "-", "yes")
    assert rows["H(sigma)"][1:] == ("185", "BH(36,6)", "M = M^T", "yes")
    assert rows["H(delta)"][1] == "185"
    assert rows["H(alpha)"][1:] == ("61", "-", "-", "yes")
    assert rows["U1"][1:3] == ("47", "BH(36,6)")
    assert rows["U2"][1:3] == ("6", "BH(36,6)")
    assert rows["U3"][1:] == ("185", "BH(36,6)", "-", "yes")
    assert rows["U3(a)"][1] in {"119", "141", "185"}
    assert rows["U3(a)"][4] == "no"
    table = invoke("report", tmp_path).stdout
    assert table == invoke("report", tmp_path).stdout
