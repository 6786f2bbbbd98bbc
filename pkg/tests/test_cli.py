import json
import shutil
from pathlib import Path

import pytest

from conftest import CORPUS as _CORPUS, burglary_data
from shuffle.cli import RunConfig, UsageError, main, make_solver
from shuffle.data import data_from_dict
from shuffle.oracle import conditional, enumerate_joint

CORPUS = Path(_CORPUS)

MODEL = str(CORPUS / "burglary.shm")
PRELUDE = str(CORPUS / "burglary_prelude.shi")
EXACT = str(CORPUS / "burglary_exact.shi")
GIBBS = str(CORPUS / "burglary_gibbs.shi")
LW = str(CORPUS / "burglary_lw.shi")


@pytest.fixture
def data_file(tmp_path):
    path = tmp_path / "data.json"
    path.write_text(json.dumps(burglary_data([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])))
    return str(path)


def test_check_succeeds(capsys, tmp_path):
    out = tmp_path / "report.json"
    assert main(["check", MODEL, PRELUDE, EXACT, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == 1
    assert "burglaryPost" in capsys.readouterr().out


def test_check_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["check", MODEL, PRELUDE, GIBBS, "--out", str(a)])
    main(["check", MODEL, PRELUDE, GIBBS, "--out", str(b)])
    assert a.read_text() == b.read_text()


def test_type_error_exits_1_and_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.shi"
    bad.write_text((CORPUS / "burglary_exact.shi").read_text().replace("(ind burglary) ", "", 1))
    out = tmp_path / "report.json"
    assert main(["check", MODEL, PRELUDE, str(bad), "--out", str(out)]) == 1
    assert "type error" in capsys.readouterr().err
    assert not out.exists()


def test_missing_file_exits_1(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.shm")]) == 1
    assert capsys.readouterr().err


def test_missing_prover_exits_2(tmp_path):
    out = tmp_path / "r.json"
    code = main(["check", MODEL, PRELUDE, EXACT, "--solver",
                 f"external:{tmp_path / 'no-such-prover'}", "--out", str(out)])
    assert code == 2 and not out.exists()


def test_runtime_fault_exits_3(tmp_path, capsys):
    model = tmp_path / "a.shm"
    model.write_text("model {\n  variable Bool a;\n  def aDens() : density(a) = flip(a, 1.0);\n}\n")
    prog = tmp_path / "div.shi"
    prog.write_text("def r() : density( | a) = aDens() / aDens();\n")
    data = tmp_path / "d.json"
    data.write_text(json.dumps({"observed": {"a": 0}}))
    out = tmp_path / "o.json"
    code = main(["run", str(model), str(prog), "--entry", "r", "--data", str(data),
                 "--out", str(out)])
    assert code == 3 and not out.exists()
    assert "DivZero" in capsys.readouterr().err


def test_density_table(tmp_path, data_file):
    out = tmp_path / "t.json"
    assert main(["run", MODEL, PRELUDE, EXACT, "--entry", "burglaryPost", "--data", data_file,
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == 1
    rows = {r["assignment"]["burglary"]: r["density"] for r in doc["table"]}
    assert rows[0] + rows[1] == pytest.approx(1.0, abs=1e-12)


def test_sampler_run_is_deterministic(tmp_path, data_file):
    files = []
    for k in range(2):
        out = tmp_path / f"s{k}.json"
        assert main(["run", MODEL, PRELUDE, GIBBS, "--entry", "abePost", "--data", data_file,
                     "--samples", "1", "--seed", "7", "--fix-iters", "5", "--out", str(out)]) == 0
        files.append(out.read_text())
    assert files[0] == files[1]
    assert len(json.loads(files[0])["samples"]) == 1


def test_estimator_has_weights(tmp_path, data_file, burglary):
    out = tmp_path / "lw.json"
    assert main(["run", MODEL, PRELUDE, LW, "--entry", "lwPost", "--data", data_file, "--samples", "4000",
                 "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert all("log_weight" in s for s in doc["samples"])
    data = data_from_dict(burglary_data([1, 1, 1, 0, 0, 0, 0, 0, 0, 0]), burglary)
    exact = conditional(enumerate_joint(burglary, data), [("burglary", 0)], ["calls"],
                        dict(data.observed, burglary=1))
    assert doc["summary"]["weighted_mean"]["burglary"] == pytest.approx(exact, abs=0.05)


def test_usage_errors(capsys):
    with pytest.raises(UsageError):
        RunConfig(MODEL, (), None, None, 0, 10, 0, 0, True, "enumerative:6", None)
    with pytest.raises(UsageError):
        make_solver("enumerative:0")
    assert main(["bench", "prefix", "--runs", "0"]) == 1


def test_bench_self_comparison(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bench", "prefix", "--size", "256", "--runs", "30", "--no-jit", "--no-opt",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == 1 and doc["baseline"]["ops"] == doc["opt"]["ops"]
    assert 0.8 <= doc["ratio"] <= 1.2


def test_bench_prefix_speedup(tmp_path):
    pytest.importorskip("numba")
    out = tmp_path / "b.json"
    assert main(["bench", "prefix", "--runs", "5", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["ratio"] > 10


def test_emit_smt_and_dump_ir(tmp_path, capsys):
    smt = tmp_path / "q.smt2"
    assert main(["emit-smt", MODEL, PRELUDE, EXACT, "--out", str(smt)]) == 0
    text = smt.read_text()
    assert "(check-sat)" in text
    if shutil.which("z3"):
        assert "(reset)" in text or text.count("(check-sat)") == 1
    assert main(["dump-ir", MODEL, PRELUDE, EXACT, "--entry", "burglaryPost"]) == 0
    assert "burglaryPost" in capsys.readouterr().out
