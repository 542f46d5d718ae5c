import csv
import io

import numpy as np
import pytest

from curstat.cli import main
from curstat.csvio import read_grid_csv
from curstat.simgen import MOD1_REGION


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def mod1_sample(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, _, _ = run(["simulate", "--design", "mod1", "--n", 1500, "--seed", 7, "--out", path], capsys)
    assert code == 0
    return path


def test_simulate_deterministic(capsys):
    a = run(["simulate", "--design", "mod1", "--n", 1000, "--seed", 7], capsys)
    b = run(["simulate", "--design", "mod1", "--n", 1000, "--seed", 7], capsys)
    c = run(["simulate", "--design", "mod1", "--n", 1000, "--seed", 8], capsys)
    assert a[0] == 0 and a[1] == b[1] and a[1] != c[1]
    recs = rows(a[1])
    assert 0 < len(recs) <= 1000
    ax, at = MOD1_REGION
    assert all(ax.lo <= float(r["x"]) <= ax.hi and at.lo <= float(r["t"]) <= at.hi for r in recs)
    assert list(recs[0]) == ["x", "t", "delta"]


def test_simulate_emit_y_and_full(tmp_path, capsys):
    full = tmp_path / "full.csv"
    code, out, _ = run(["simulate", "--design", "mod2", "--n", 300, "--emit-y", "--full-out", full], capsys)
    assert code == 0
    recs = rows(out)
    assert list(recs[0]) == ["x", "t", "delta", "y"]
    assert all(int(r["delta"]) == int(float(r["y"]) <= float(r["t"])) for r in recs)
    assert len(rows(full.read_text())) == 300


def test_simulate_offset_wired(capsys):
    means = []
    for a in (0, 5):
        code, out, _ = run(["simulate", "--design", "mod2b", "--offset", a, "--n", 20000, "--full-out", "-", "--out", "/dev/null"], capsys)
        assert code == 0
        means.append(np.mean([int(r["delta"]) for r in rows(out)]))
    assert means[1] < means[0] - 0.05


def test_simulate_missing_n(capsys):
    code, _, err = run(["simulate", "--design", "mod1"], capsys)
    assert code == 2
    assert "simulate.n" in err and "--n" in err


@pytest.mark.parametrize(
    "argv,field",
    [
        (["simulate", "--design", "mod9", "--n", 10], "design"),
        (["simulate", "--design", "mod1", "--n", "ten"], "n"),
        (["simulate", "--design", "mod1", "--n", 0], "n"),
        (["simulate", "--design", "mod1", "--n", 10, "--offset", 2], "offset"),
        (["study", "--design", "mod1", "--n", 100, "--reps", 1, "--theta", 1], "theta"),
        (["study", "--design", "mod1", "--n", 100, "--reps", 1, "--budget", "huge"], "budget"),
    ],
)
def test_config_errors_exit_2(argv, field, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert field in err


def test_fit_evaluate_round_trip(mod1_sample, tmp_path, capsys):
    model = tmp_path / "m.txt"
    diag = tmp_path / "d.csv"
    code, _, _ = run(["fit", "--sample", mod1_sample, "--design", "mod1", "--model-out", model, "--diagnostics-out", diag], capsys)
    assert code == 0
    table = rows(diag.read_text())
    assert sum(int(r["chosen"]) for r in table) == 1
    best = min(table, key=lambda r: float(r["criterion"]))
    assert best["chosen"] == "1"

    code, out1, _ = run(["evaluate", "--model", model, "--nx", 13, "--nu", 17, "--no-clamp"], capsys)
    assert code == 0
    grid = read_grid_csv(out1)
    assert grid.values.shape == (13, 17)

    # refit in-process and compare values bit for bit
    from curstat.csvio import read_sample_csv
    from curstat.selection import select

    fitted = select(read_sample_csv(mod1_sample.read_text(), MOD1_REGION)).fitted
    direct = fitted.evaluate(grid.x_nodes[:, None], grid.u_nodes[None, :])
    np.testing.assert_array_equal(grid.values, direct)

    code, out2, _ = run(["evaluate", "--model", model, "--nx", 13, "--nu", 17, "--no-clamp"], capsys)
    assert out1 == out2


def test_evaluate_clamp_and_rearrange(mod1_sample, tmp_path, capsys):
    model = tmp_path / "m.txt"
    run(["fit", "--sample", mod1_sample, "--design", "mod1", "--budget", "unbounded", "--model-out", model], capsys)
    raw = read_grid_csv(run(["evaluate", "--model", model, "--no-clamp"], capsys)[1])
    cl = read_grid_csv(run(["evaluate", "--model", model], capsys)[1])
    re = read_grid_csv(run(["evaluate", "--model", model, "--rearrange", "--nu", 200], capsys)[1])
    assert raw.values.shape == (100, 100)
    assert cl.values.min() >= 0 and cl.values.max() <= 1
    np.testing.assert_array_equal(cl.values, np.clip(raw.values, 0, 1))
    assert re.values.min() >= 0 and re.values.max() <= 1
    assert (np.diff(re.values, axis=1) >= 0).all()


def test_theta_scales_penalties(mod1_sample, tmp_path, capsys):
    tables = {}
    for theta in (2, 3):
        diag = tmp_path / f"d{theta}.csv"
        code, _, _ = run(
            ["fit", "--sample", mod1_sample, "--design", "mod1", "--theta", theta,
             "--model-out", tmp_path / "m.txt", "--diagnostics-out", diag],
            capsys,
        )
        assert code == 0
        tables[theta] = rows(diag.read_text())
    for r2, r3 in zip(tables[2], tables[3]):
        assert r2["contrast"] == r3["contrast"]
        assert float(r3["penalty"]) == pytest.approx(1.5 * float(r2["penalty"]), rel=1e-15)


def test_malformed_row_exit_3_with_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,t,delta\n1.0,5.0,1\n1.2,oops,0\n")
    code, _, err = run(["fit", "--sample", bad, "--design", "mod1", "--model-out", tmp_path / "m"], capsys)
    assert code == 3
    assert "line 3" in err
    bad.write_text("x,t,delta\n1.0,5.0,2\n")
    code, _, err = run(["fit", "--sample", bad, "--design", "mod1", "--model-out", tmp_path / "m"], capsys)
    assert code == 3 and "line 2" in err


def test_missing_files_exit_4(tmp_path, capsys):
    code, _, err = run(["fit", "--sample", tmp_path / "nope.csv", "--design", "mod1", "--model-out", tmp_path / "m"], capsys)
    assert code == 4 and "I/O" in err
    code, _, _ = run(["evaluate", "--model", tmp_path / "nope.txt"], capsys)
    assert code == 4
    code, _, _ = run(["simulate", "--config", tmp_path / "nope.toml", "--design", "mod1", "--n", 5], capsys)
    assert code == 4


def test_corrupt_model_exit_3(tmp_path, capsys):
    m = tmp_path / "m.txt"
    m.write_text("not a model\n")
    code, _, _ = run(["evaluate", "--model", m], capsys)
    assert code == 3


def test_study_shape_and_summary(tmp_path, capsys):
    summary = tmp_path / "sum.csv"
    code, out, _ = run(
        ["study", "--design", "mod1", "--n", "200,400,800", "--reps", 3, "--quad-resolution", 100, "--summary-out", summary],
        capsys,
    )
    assert code == 0
    recs = rows(out)
    assert [(int(r["n"]), int(r["rep"])) for r in recs] == [(n, k) for n in (200, 400, 800) for k in range(3)]
    text = summary.read_text()
    assert "rate_fit slope=" in text
    assert text.splitlines()[0] == "design,n,reps,failures,mean,median,std"


def test_study_offsets(capsys):
    code, out, _ = run(["study", "--design", "mod2b", "--offsets", "0,5", "--n", 300, "--reps", 2, "--quad-resolution", 80], capsys)
    assert code == 0
    assert sorted({r["design"] for r in rows(out)}) == ["mod2b(a=0)", "mod2b(a=5)"]
    code, _, err = run(["study", "--design", "mod1", "--offsets", "1", "--n", 300, "--reps", 1], capsys)
    assert code == 2 and "offsets" in err


def test_config_file_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'design = "mod2"\nseed = 11\n\n[study]\nn = [300, 600]\nreps = 2\nquad_resolution = 80\nrearrange = true\n'
    )
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.csv"
        assert run(["study", "--config", cfg, "--out", out], capsys)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    # flags override the file
    assert run(["study", "--config", cfg, "--reps", 1, "--out", tmp_path / "r.csv"], capsys)[0] == 0
    assert len(rows((tmp_path / "r.csv").read_text())) == 2


def test_config_parse_error(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("n = = 3\n")
    code, _, err = run(["simulate", "--config", cfg, "--design", "mod1"], capsys)
    assert code == 2 and "config" in err


def test_study_jobs_same_output(capsys):
    base = ["study", "--design", "mod1", "--n", "300", "--reps", 4, "--quad-resolution", 80]
    assert run(base, capsys)[1] == run(base + ["--jobs", 3], capsys)[1]


def test_dist_table(capsys):
    code, out, _ = run(["dist", "--offsets", "0,2,5,10"], capsys)
    assert code == 0
    got = {float(r["a"]): float(r["dist"]) for r in rows(out)}
    for a, want in {0.0: 0.0, 2.0: 0.63, 5.0: 1.12, 10.0: 1.54}.items():
        assert abs(got[a] - want) <= 0.03
