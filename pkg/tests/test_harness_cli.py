import pytest

from ecds.cli import cli_run
from ecds.container import KIND_MEMBERSHIP, read_container
from ecds.harness import (ExperimentConfig, calibrate_tau, clean_word, closed_form_length, emit_report,
                          load_structure, membership_check, run_bench)
from ecds.membership import MemParams, build_membership

MEM_ARGS = ["--n", "64", "--s", "4", "--scale", "10", "--seed", "1"]


@pytest.fixture(scope="module")
def mem_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("c") / "m.ecds"
    assert cli_run(["encode", "membership", *MEM_ARGS, "--item", "3,9,17", "-o", str(path)]) == 0
    return path


def _answer(capsys):
    out = capsys.readouterr().out.strip().splitlines()[-1]
    return dict(kv.split("=") for kv in out.split())


def test_membership_encode_query(mem_file, capsys):
    for q, expected in [(3, "1"), (9, "1"), (4, "0"), (63, "0")]:
        assert cli_run(["query", str(mem_file), "--q", str(q)]) == 0
        assert _answer(capsys)["answer"] == expected


def test_polyeval_encode_query(tmp_path, capsys):
    path = tmp_path / "p.ecds"
    assert cli_run(["encode", "polyeval", "--n", "31", "--s", "8", "--item", "1,2,3,4,5,6,7,8,9",
                    "-o", str(path)]) == 0
    assert cli_run(["query", str(path), "--q", "2"]) == 0
    assert _answer(capsys)["answer"] == str(sum((i + 1) * 2**i for i in range(9)) % 31)


def test_trivial_mode_query(tmp_path, capsys):
    path = tmp_path / "t.ecds"
    assert cli_run(["encode", "polyeval", "--n", "251", "--s", "4", "--item", "1,0,2", "-o", str(path)]) == 0
    assert cli_run(["query", str(path), "--q", "10"]) == 0
    assert _answer(capsys)["answer"] == str((1 + 2 * 100) % 251)


def test_gen_and_verify(tmp_path, capsys):
    path = tmp_path / "g.ecds"
    assert cli_run(["gen", "membership", *MEM_ARGS, "-o", str(path)]) == 0
    assert cli_run(["verify", str(path)]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_corrupt_and_diagnose(mem_file, tmp_path, capsys):
    out = tmp_path / "c.ecds"
    assert cli_run(["corrupt", str(mem_file), "-o", str(out), "--budget", "40", "--seed", "2",
                    "--strategy", "worst-of-k"]) == 0
    _, meta, word = read_container(out)
    assert meta["corruption.flipped"] == "40"
    assert cli_run(["diagnose", str(out)]) == 0
    assert "|B(A)|" in capsys.readouterr().out


def test_conformance_rejects_large_budget(mem_file, tmp_path, capsys):
    # no measured tau recorded: the guard falls back to the induced tau, far below 40 / N
    rc = cli_run(["corrupt", str(mem_file), "-o", str(tmp_path / "x.ecds"), "--budget", "40", "--conformance"])
    assert rc == 2
    assert "conformance" in capsys.readouterr().err


def test_bad_container(tmp_path, capsys):
    path = tmp_path / "bad.ecds"
    path.write_bytes(b"NOPE" + bytes(20))
    assert cli_run(["query", str(path), "--q", "0"]) == 2
    assert "magic" in capsys.readouterr().err


def test_query_out_of_range(mem_file):
    assert cli_run(["query", str(mem_file), "--q", "64"]) == 2


def test_unbuildable_instance_reports_error(tmp_path, capsys):
    rc = cli_run(["encode", "membership", "--n", "64", "--s", "4", "--scale", "100", "--item", "3,9,17",
                  "-o", str(tmp_path / "z.ecds")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_bench_zero_noise_row(mem_file, tmp_path, capsys):
    report = tmp_path / "r.txt"
    assert cli_run(["bench", str(mem_file), "--deltas", "0,0.001", "--trials", "20",
                    "--strategies", "uniform-random,targeted-query-neighborhood", "--report", str(report)]) == 0
    rows = [dict(kv.split("=") for kv in line.split()) for line in report.read_text().splitlines()]
    zero = [r for r in rows if float(r["delta"]) == 0]
    assert zero and all(float(r["good_fraction"]) == 1.0 for r in zero)
    for r in rows:
        assert float(r["eps_hat"]) <= float(r["epsilon"]) or float(r["delta"]) > 0
        assert int(r["max_probes"]) <= int(r["t"])
        assert r["N"] == r["N_formula"]


def test_report_replay_is_byte_identical(mem_file):
    kind, meta, word = read_container(mem_file)
    st = load_structure(kind, meta)
    clean = clean_word(st)
    assert clean == word and len(clean) == closed_form_length(st)
    cfg = ExperimentConfig([0.0, 0.002], ["uniform-random", "worst-of-k"], 10, seed=5)
    first = emit_report(run_bench(st, clean, cfg))
    second = emit_report(run_bench(st, clean, cfg))
    assert first == second


def test_reloaded_structure_matches_original(mem_file):
    kind, meta, word = read_container(mem_file)
    assert kind == KIND_MEMBERSHIP
    st = build_membership([3, 9, 17], MemParams(64, 4, scale=10), seed=1)
    assert st.encode_votes(st.votes) == word


def test_conformance_config_guard():
    with pytest.raises(ValueError):
        ExperimentConfig([0.1], ["uniform-random"], 1, conformance=True, tau=0.01)


def test_calibration_finds_passing_level():
    st = build_membership([3, 9, 17], MemParams(64, 4, scale=10), seed=1)
    clean = st.encode_votes(st.votes)
    cal = calibrate_tau(st, clean, membership_check(st), list(range(64)), 50, seed=3,
                        exponents=(2, 16), probe_trials=4)
    assert 0 < cal.tau <= 0.25
    assert any(passed for _, passed, _ in cal.history)
