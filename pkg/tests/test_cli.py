"""End-to-end command line behavior through main()."""

import json

import numpy as np
import pytest

from glfm.cli import main, state_from_json, state_to_json
from glfm.data import AttributeKind
from glfm.engine import Hyperparams, run_chain
from glfm.synthetic import generate, to_csv

CSV_TEXT = (
    "r1,p1,c1,o1,n1\n"
    "0.5,1.2,red,2,3\n"
    "-1.0,0.4,blue,1,0\n"
    ",2.2,red,,7\n"
    "2.5,0.9,green,3,1\n"
    "0.1,1.8,blue,2,2\n"
    "1.4,,red,1,4\n"
    "-0.7,0.6,green,3,\n"
    "0.9,1.1,red,2,5\n"
)

SPEC_TEXT = (
    "r1,real\n"
    "p1,positivereal\n"
    "c1,categorical,3\n"
    "o1,ordinal,3\n"
    "n1,count\n"
)

FAST = ["--iters", "4", "--burn-in", "1", "--kmax", "6", "--kinit", "1",
        "--alpha", "1.5", "--bias", "--seed", "11"]


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "data.csv").write_text(CSV_TEXT)
    (tmp_path / "cols.spec").write_text(SPEC_TEXT)
    return tmp_path


def run_cli(args):
    return main([str(a) for a in args])


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_flag_exits_2(workdir):
    with pytest.raises(SystemExit) as exc:
        main(["infer", str(workdir / "data.csv"), "--frobnicate"])
    assert exc.value.code == 2


def test_missing_out_flag_exits_2(workdir):
    with pytest.raises(SystemExit) as exc:
        main(["infer", str(workdir / "data.csv"), "--spec", str(workdir / "cols.spec")])
    assert exc.value.code == 2


def test_nonexistent_data_exits_1(workdir, capsys):
    code = run_cli(["infer", workdir / "nope.csv", "--spec", workdir / "cols.spec",
                    "-o", workdir / "out"] + FAST)
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_missing_spec_exits_1(workdir, capsys):
    code = run_cli(["infer", workdir / "data.csv", "-o", workdir / "out"] + FAST)
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_infer_writes_state_and_trace(workdir, capsys):
    out = workdir / "out"
    code = run_cli(["infer", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out] + FAST)
    assert code == 0
    captured = capsys.readouterr().out
    assert "chain 0: K_plus=" in captured
    assert "wrote" in captured

    state = state_from_json((out / "state.json").read_text())
    assert state.N == 8
    assert state.specs[2].labels == ("red", "blue", "green")
    assert state.hp.alpha == 1.5

    lines = (out / "trace.ndjson").read_text().splitlines()
    assert len(lines) == 4
    for line in lines:
        entry = json.loads(line)
        assert set(entry) == {"iteration", "K_plus", "log_joint", "sigma2"}


def test_state_json_roundtrip(workdir):
    data, _ = generate(12, missing_rate=0.1, seed=70)
    hp = Hyperparams(alpha=2.0, K_max=6, K_init=2, bias=True,
                     iterations=6, burn_in=1, seed=71)
    res = run_chain(data, hp)
    text = state_to_json(res.state)
    back = state_from_json(text)
    np.testing.assert_array_equal(back.Z, res.state.Z)
    np.testing.assert_array_equal(back.B, res.state.B)
    np.testing.assert_array_equal(back.sigma2, res.state.sigma2)
    for d, th in res.state.theta.items():
        np.testing.assert_array_equal(back.theta[d], th)
    assert back.count_xmax == res.state.count_xmax
    assert back.hp == res.state.hp
    assert [s.kind for s in back.specs] == [s.kind for s in res.state.specs]
    # natural parameters are rebuilt and exact
    np.testing.assert_allclose(
        back.P, back.Z.T @ back.Z + np.eye(back.K) / hp.sigma_B2
    )
    # a second serialization is byte-identical
    assert state_to_json(back) == text


def test_complete_fills_missing_cells(workdir, capsys):
    out = workdir / "out"
    code = run_cli(["complete", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out] + FAST)
    assert code == 0
    assert "imputed 4 cells" in capsys.readouterr().out

    completed = (out / "completed.csv").read_text()
    lines = completed.splitlines()
    assert lines[0] == "r1,p1,c1,o1,n1"
    # observed text preserved verbatim
    assert lines[1] == "0.5,1.2,red,2,3"
    # row 3 had missing r1 and o1: both now present
    row3 = lines[3].split(",")
    assert row3[0] != "" and row3[3] != ""
    float(row3[0])
    assert row3[3] in {"1", "2", "3"}
    # row 7 count filled with a nonnegative integer
    row7 = lines[7].split(",")
    assert int(row7[4]) >= 0
    assert (out / "state.json").exists()
    assert (out / "trace.ndjson").exists()


def test_complete_heldout_writes_scores_only(workdir, capsys):
    out = workdir / "scored"
    code = run_cli(["complete", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out, "--heldout", "0.2", "--splits", "2"] + FAST)
    assert code == 0
    assert "mean log predictive" in capsys.readouterr().out
    scores = json.loads((out / "scores.json").read_text())
    assert scores["rate"] == 0.2
    assert len(scores["splits"]) == 2
    assert "mean_per_cell" in scores
    assert not (out / "completed.csv").exists()


def test_explore_writes_summaries(workdir):
    out = workdir / "explored"
    code = run_cli(["explore", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out, "--top", "3", "--grid-points", "21"] + FAST)
    assert code == 0
    patterns = (out / "patterns.csv").read_text().splitlines()
    assert patterns[0] == "pattern,count,empirical_prob"
    assert len(patterns) >= 2
    assert patterns[1].startswith("(")

    probs = (out / "feature_probs.csv").read_text().splitlines()
    assert probs[0] == "feature,prob"

    pdfs = (out / "pdfs.csv").read_text().splitlines()
    assert pdfs[0] == "attribute,pattern,x,value"
    names = {line.split(",")[0] for line in pdfs[1:]}
    assert names == {"r1", "p1", "c1", "o1", "n1"}
    # categorical support is shown with original labels
    cat_x = {line.split(",")[2] for line in pdfs[1:] if line.startswith("c1,")}
    assert cat_x == {"red", "blue", "green"}


def test_explore_from_saved_state(workdir):
    out1 = workdir / "fit"
    assert run_cli(["infer", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out1] + FAST) == 0
    out2 = workdir / "explored2"
    code = run_cli(["explore", "--state", out1 / "state.json", "-o", out2])
    assert code == 0
    assert (out2 / "patterns.csv").exists()
    assert (out2 / "pdfs.csv").exists()


def test_explore_without_data_or_state_exits_1(workdir, capsys):
    code = run_cli(["explore", "-o", workdir / "nothing"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_config_file_and_flag_precedence(workdir):
    cfg = workdir / "config.json"
    cfg.write_text(json.dumps({"alpha": 0.7, "K_max": 5, "iterations": 3,
                               "burn_in": 1, "K_init": 1, "bias": True}))
    out1 = workdir / "cfg_only"
    assert run_cli(["infer", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out1, "--config", cfg, "--seed", "5"]) == 0
    st1 = json.loads((out1 / "state.json").read_text())
    assert st1["hyperparams"]["alpha"] == 0.7
    assert st1["hyperparams"]["K_max"] == 5

    out2 = workdir / "cfg_overridden"
    assert run_cli(["infer", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out2, "--config", cfg, "--seed", "5", "--alpha", "2.0"]) == 0
    st2 = json.loads((out2 / "state.json").read_text())
    assert st2["hyperparams"]["alpha"] == 2.0


def test_bad_config_exits_1(workdir, capsys):
    cfg = workdir / "bad.json"
    cfg.write_text(json.dumps({"alphaa": 1.0}))
    code = run_cli(["infer", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", workdir / "out", "--config", cfg] + FAST)
    assert code == 1
    assert "unknown hyperparameter" in capsys.readouterr().err


def test_missing_token_flag(workdir):
    (workdir / "na.csv").write_text("a,b\n1.0,NA\n2.0,3.0\nNA,4.0\n0.5,1.5\n")
    (workdir / "na.spec").write_text("a,real\nb,real\n")
    out = workdir / "na_out"
    code = run_cli(["complete", workdir / "na.csv", "--spec", workdir / "na.spec",
                    "-o", out, "--missing", "NA"] + FAST)
    assert code == 0
    lines = (out / "completed.csv").read_text().splitlines()
    assert "NA" not in lines[1] and "NA" not in lines[3]


def test_identical_runs_are_byte_identical(workdir):
    args = ["complete", workdir / "data.csv", "--spec", workdir / "cols.spec"] + FAST
    out_a, out_b = workdir / "a", workdir / "b"
    assert run_cli(args + ["-o", out_a]) == 0
    assert run_cli(args + ["-o", out_b]) == 0
    for name in ("state.json", "trace.ndjson", "completed.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_multichain_keeps_best(workdir, capsys):
    out = workdir / "multi"
    code = run_cli(["infer", workdir / "data.csv", "--spec", workdir / "cols.spec",
                    "-o", out, "--chains", "2"] + FAST)
    assert code == 0
    captured = capsys.readouterr().out
    assert "chain 0:" in captured and "chain 1:" in captured
    assert "kept chain" in captured


def test_synthetic_csv_runs_through_cli(workdir):
    data, _ = generate(15, missing_rate=0.1, seed=72)
    (workdir / "syn.csv").write_text(to_csv(data))
    (workdir / "syn.spec").write_text(
        "r1,real\np1,positivereal\nc1,categorical,3\no1,ordinal,3\nn1,count\nr2,real\n"
    )
    out = workdir / "syn_out"
    code = run_cli(["complete", workdir / "syn.csv", "--spec", workdir / "syn.spec",
                    "-o", out] + FAST)
    assert code == 0
    assert (out / "completed.csv").exists()
