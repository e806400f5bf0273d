import csv

import pytest

from mesbounds.cli import parse_p_grid, read_model_file, run
from mesbounds.empirical_pipeline import DataError
from mesbounds.factor_bounds import AdditiveModel, MinimumModel, MultiplicativeModel

MODEL = """\
# two standard normals
model = additive
factor = normal 0 1
idio = normal 0 1
d = 2
b = 0.3 0.3
sigma = 0.9539392014169456, 0.9539392014169456
target = 1
"""


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_table1(tmp_path):
    out = tmp_path / "t1.csv"
    assert run(["table1", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["panel", "b1", "p", "MES", "m", "M", "mf", "Mf", "delta"]
    assert r[2] == ["A", "0.3", "0.90", "1.296", "0.000", "1.755", "0.526", "1.755", "30.00%"]
    assert len(r) == 21


def test_table2(tmp_path):
    out = tmp_path / "t2.csv"
    assert run(["table2", "--out", str(out)]) == 0
    assert rows(out)[4] == ["0.85", "0.075", "0.925", "0.500", "0.925", "50%"]


def test_bounds_parametric(tmp_path, capsys):
    assert run(["bounds-parametric", "--law", "uniform:0,1", "--law", "uniform:0,1", "--law", "uniform:0,1", "--p", "0.75"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["p,m,M,ml,Ml", "0.75,0.125,0.875,0.5,0.875"]
    assert run(["bounds-parametric", "--law", "normal:0,1", "--p", "0.9"]) == 0
    assert capsys.readouterr().out.splitlines()[1].endswith(",,")


def test_bounds_factor(tmp_path):
    model = tmp_path / "m.txt"
    model.write_text(MODEL)
    out = tmp_path / "f.csv"
    argv = ["bounds-factor", "--model", str(model), "--p-grid", "0.5:0.9:2", "--n", "20000", "--seed", "3", "--out", str(out)]
    assert run(argv) == 0
    first = out.read_bytes()
    r = rows(out)
    assert [x[0] for x in r[1:]] == ["0.5", "0.7", "0.9"]
    assert run(argv) == 0 and out.read_bytes() == first


def test_seed_required(tmp_path, capsys):
    model = tmp_path / "m.txt"
    model.write_text(MODEL)
    assert run(["bounds-factor", "--model", str(model), "--p", "0.9"]) == 2
    assert "--seed" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert run(["table1", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run([]) == 2


def test_pipeline_end_to_end(tmp_path):
    lpath, fpath = tmp_path / "l.csv", tmp_path / "f.csv"
    assert run(["synth-gen", "--n", "600", "--seed", "7", "--assets", "AAA:normal,BBB:normal,LEH:comonotone",
                "--losses-out", str(lpath), "--factors-out", str(fpath), "--percent"]) == 0
    out = tmp_path / "e.csv"
    argv = ["empirical", "--losses", str(lpath), "--factors", str(fpath), "--percent", "--target", "AAA",
            "--p-grid", "0:0.99:100", "--seed", "7", "--out", str(out)]
    assert run(argv) == 0
    r = rows(out)
    assert len(r) == 102
    first = out.read_bytes()
    assert run(argv) == 0 and out.read_bytes() == first
    s = tmp_path / "s.csv"
    assert run(["srci", "--losses", str(lpath), "--factors", str(fpath), "--percent", "--seed", "1", "--out", str(s)]) == 0
    table = rows(s)
    assert table[0] == ["asset", "beta_0.99", "beta_0.993", "beta_0.995", "beta_f_0.99", "beta_f_0.993", "beta_f_0.995"]
    assert [t[0] for t in table[1:]] == ["AAA", "BBB", "LEH"]


def test_data_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "l.csv"
    bad.write_text("date,A\n2020-01-01,1\n2020-01-01,2\n")
    f = tmp_path / "f.csv"
    f.write_text("date,MKT_RF,SMB,HML,RMW,CMA,RF\n")
    assert run(["empirical", "--losses", str(bad), "--factors", str(f), "--target", "A", "--p", "0.5", "--seed", "1"]) == 1
    assert "2020-01-01" in capsys.readouterr().err
    assert run(["empirical", "--losses", str(tmp_path / "nope.csv"), "--factors", str(f), "--target", "A",
                "--p", "0.5", "--seed", "1"]) == 1


def test_p_grid_parsing():
    assert parse_p_grid("0:0.9:3") == pytest.approx([0, 0.3, 0.6, 0.9])
    assert parse_p_grid("0.9,0.95") == [0.9, 0.95]
    assert parse_p_grid("0.5:0.5:0") == [0.5]
    for bad in ("0:1:3", "a:b:c", "1:2", "1.2"):
        with pytest.raises(Exception):
            parse_p_grid(bad)


def test_model_files(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text(MODEL)
    model, j = read_model_file(path)
    assert isinstance(model, AdditiveModel) and j == 0
    path.write_text("model = multiplicative\nfactor = gamma 3 1\nidio1 = expo 1\nidio2 = expo 1\nsigma = 1 10\ntarget = 2\n")
    model, j = read_model_file(path)
    assert isinstance(model, MultiplicativeModel) and j == 1
    path.write_text("model = minimum\nfactor = expo 1\nidio = expo 1\nd = 3\n")
    assert isinstance(read_model_file(path)[0], MinimumModel)
    for text in ("model = additive\n", "model = cubic\nfactor = normal 0 1\nidio = normal 0 1\nd = 2\n",
                 "model = minimum\nfactor = expo 1\nidio1 = expo 1\nidio3 = expo 1\n",
                 "model = minimum\nfactor = expo 1\nidio = expo 1\nd = 2\ntarget = 5\n", "nonsense\n"):
        path.write_text(text)
        with pytest.raises(DataError):
            read_model_file(path)
