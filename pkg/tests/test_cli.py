import json
import struct

import pytest

from ina import modelfile
from ina.cli import main


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


@pytest.fixture
def identity4(tmp_path):
    rows = [{"features": [f"f{j}"], "label": f"c{j}"} for j in range(4)]
    return write_jsonl(tmp_path / "train.jsonl", rows)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def train(capsys, data, model, *extra):
    code, out, err = run(capsys, "train", "--input", data, "--model", model, *extra)
    assert code == 0, err
    return json.loads(out)


def test_train_identity(tmp_path, capsys, identity4):
    summary = train(capsys, identity4, tmp_path / "m.inam", "--em-iters", "0")
    assert summary["E_F_micro"] == 1.0
    assert summary["M"] == 4 and summary["W"] == 4 and summary["nonzero_weights"] == 4
    for key in ("examples", "skipped_lines", "accuracy", "wall_time_s", "m_iterations"):
        assert key in summary


def test_train_dense_csv(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("label,p0,p1,p2\n0,255,0,0\n1,0,200,0\n2,0,0,130\n0,250,3,0\n", encoding="utf-8")
    summary = train(capsys, p, tmp_path / "m.inam", "--format", "dense_csv", "--epsilon", "128")
    assert summary["E_F_micro"] == 1.0
    m = modelfile.load(tmp_path / "m.inam")
    assert m.provenance["epsilon"] == 128.0 and m.provenance["format"] == "csv"


def test_empty_dataset(tmp_path, capsys):
    p = tmp_path / "e.jsonl"
    p.write_text("", encoding="utf-8")
    code, _, err = run(capsys, "train", "--input", p, "--model", tmp_path / "m.inam")
    assert code == 2 and "empty dataset" in err
    assert not (tmp_path / "m.inam").exists()


def test_bad_line_reports_line_number(tmp_path, capsys):
    p = tmp_path / "d.jsonl"
    p.write_text('{"features": ["a"], "label": "x"}\nnope\n', encoding="utf-8")
    code, _, err = run(capsys, "train", "--input", p, "--model", tmp_path / "m.inam")
    assert code == 2 and "line 2" in err
    code, out, _ = run(capsys, "train", "--input", p, "--model", tmp_path / "m.inam",
                       "--max-errors", "1")
    assert code == 0 and json.loads(out)["skipped_lines"] == 1


def test_missing_input_is_io_error(tmp_path, capsys):
    code, _, _ = run(capsys, "train", "--input", tmp_path / "nope.jsonl", "--model", tmp_path / "m")
    assert code == 3


def test_predict_round_trip(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model)
    code, out, _ = run(capsys, "predict", "--input", identity4, "--model", model)
    assert code == 0
    assert [line.split("\t")[0] for line in out.splitlines()] == ["c0", "c1", "c2", "c3"]


def test_predict_unseen_features_uses_bias(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model)
    q = write_jsonl(tmp_path / "q.jsonl", [{"features": ["zzz"]}, {"features": []}])
    code, out, _ = run(capsys, "predict", "--input", q, "--model", model)
    assert code == 0
    assert [line.split("\t") for line in out.splitlines()] == [["c0", "0.000000"]] * 2


def test_predict_bias_file(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    bias = tmp_path / "bias.json"
    bias.write_text(json.dumps({"c2": 0.5}), encoding="utf-8")
    train(capsys, identity4, model, "--bias", bias)
    q = write_jsonl(tmp_path / "q.jsonl", [{"features": ["zzz"]}])
    _, out, _ = run(capsys, "predict", "--input", q, "--model", model)
    assert out.split("\t")[0] == "c2"


def test_predict_top_k(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model)
    q = write_jsonl(tmp_path / "q.jsonl", [{"features": ["f1", "f2"]}])
    code, out, _ = run(capsys, "predict", "--input", q, "--model", model, "--top-k", "3")
    fields = out.strip().split("\t")
    assert code == 0 and len(fields) == 6
    scores = [float(v) for v in fields[1::2]]
    assert scores == sorted(scores, reverse=True)
    assert fields[0::2] == ["c1", "c2", "c0"]


def test_predict_output_file(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model)
    out = tmp_path / "pred.tsv"
    code, stdout, _ = run(capsys, "predict", "--input", identity4, "--model", model, "--out", out)
    assert code == 0 and stdout == "" and len(out.read_text().splitlines()) == 4


def test_train_then_evaluate_matches(tmp_path, capsys):
    rows = [{"features": ["a", "b"], "label": "x"}, {"features": ["b"], "label": "y"},
            {"features": ["a"], "label": "x"}, {"features": ["b", "c"], "label": "y"},
            {"features": ["a", "c"], "label": "y"}]
    data = write_jsonl(tmp_path / "d.jsonl", rows)
    summary = train(capsys, data, tmp_path / "m.inam", "--beta", "0.5")
    code, out, _ = run(capsys, "evaluate", "--input", data, "--model", tmp_path / "m.inam",
                       "--beta", "0.5")
    report = json.loads(out)
    assert code == 0
    assert report["E_F_micro"] == summary["E_F_micro"]
    assert set(report["per_class"]["x"]) == {"precision", "recall", "f_beta", "support"}
    assert report["confusion"] and report["n"] == 5


def test_reproducible_model_bytes(tmp_path, capsys, identity4, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    train(capsys, identity4, tmp_path / "a.inam", "--em-iters", "3")
    train(capsys, identity4, tmp_path / "b.inam", "--em-iters", "3")
    assert (tmp_path / "a.inam").read_bytes() == (tmp_path / "b.inam").read_bytes()


def corrupt(path, how):
    blob = bytearray(path.read_bytes())
    if how == "version":
        struct.pack_into("<H", blob, 4, 999)
    elif how == "checksum":
        blob[len(blob) // 2] ^= 0x55
    else:
        blob = blob[: len(blob) - 5]
    path.write_bytes(bytes(blob))


@pytest.mark.parametrize("how, code", [("version", 4), ("checksum", 5), ("truncated", 6)])
def test_model_file_errors(tmp_path, capsys, identity4, how, code):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model)
    corrupt(model, how)
    got, _, err = run(capsys, "predict", "--input", identity4, "--model", model)
    assert got == code and err.startswith("ina: error:")
    got, _, _ = run(capsys, "inspect", "--model", model)
    assert got == code


def test_failed_train_leaves_old_model(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model)
    before = model.read_bytes()
    bad = tmp_path / "bad.jsonl"
    bad.write_text("oops\n", encoding="utf-8")
    code, _, _ = run(capsys, "train", "--input", bad, "--model", model)
    assert code == 2 and model.read_bytes() == before
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.jsonl", "m.inam", "train.jsonl"]


def test_inspect(tmp_path, capsys, identity4):
    model = tmp_path / "m.inam"
    train(capsys, identity4, model, "--emergence", "group")
    code, out, _ = run(capsys, "inspect", "--model", model, "--top-n", "2")
    assert code == 0
    assert "classes (W): 4" in out and "class c3" in out and "WARNING: 4 feature(s)" in out


@pytest.mark.parametrize("argv", [
    ["train", "--input", "x", "--model", "m", "--frobnicate"],
    ["train", "--input", "x"],
    ["train", "--input", "x", "--model", "m", "--em-iters", "-1"],
    ["train", "--input", "x", "--model", "m", "--emergence", "local"],
    ["predict", "--input", "x", "--model", "m", "--top-k", "0"],
    ["fly"],
])
def test_bad_flags_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_bad_config_value_exit_2(tmp_path, capsys, identity4):
    code, _, err = run(capsys, "train", "--input", identity4, "--model", tmp_path / "m",
                       "--beta", "3")
    assert code == 2 and "beta" in err


def test_em_log(tmp_path, capsys):
    rows = [{"features": ["a", "b"], "label": "x"}, {"features": ["a", "b"], "label": "y"},
            {"features": ["a"], "label": "y"}, {"features": ["b"], "label": "x"}]
    data = write_jsonl(tmp_path / "d.jsonl", rows)
    log = tmp_path / "em.log"
    train(capsys, data, tmp_path / "m.inam", "--em-iters", "2", "--log", log)
    recs = [json.loads(line) for line in log.read_text().splitlines()]
    assert recs and {"iter", "E_F_before", "E_F_after", "accepted"} <= set(recs[0])


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code, _, _ = run(capsys, "bench", "--sizes", "200", "400", "--features", "50",
                     "--classes", "3", "--active", "4", "--repeats", "1", "--out", out)
    lines = out.read_text().splitlines()
    assert code == 0 and lines[0].startswith("n,") and lines[-1].startswith("# log_log_slope,")
    assert len(lines) == 4
