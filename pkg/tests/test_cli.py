import csv
import json
import math
import subprocess
import time

import pytest

from wpsgd.cli import CSV_HEADER, main
from wpsgd.config import KEYS, parse_config
from wpsgd.errors import ConfigError

TINY_GEN = """
gen.n_train = 1000
gen.n_test = 100
gen.dim = 100
gen.seed = 3
data.train = {d}/train.txt
data.test = {d}/test.txt
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_generate_fast_and_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, "gen.cfg", TINY_GEN.format(d=tmp_path))
    start = time.perf_counter()
    code, _, _ = run(["generate", "--config", cfg], capsys)
    assert code == 0 and time.perf_counter() - start < 1.0
    first = (tmp_path / "train.txt").read_bytes(), (tmp_path / "test.txt").read_bytes()
    run(["generate", "--config", cfg], capsys)
    assert first == ((tmp_path / "train.txt").read_bytes(), (tmp_path / "test.txt").read_bytes())
    run(["generate", "--config", cfg, "--seed", "4"], capsys)
    assert first[0] != (tmp_path / "train.txt").read_bytes()


def test_generate_invalid_spec(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", TINY_GEN.format(d=tmp_path) + "gen.nnz_max = 500\n")
    code, out, err = run(["generate", "--config", cfg], capsys)
    assert code != 0 and out == "" and "nnz_max" in err


def train_cfg(tmp_path, body, out="out"):
    text = TINY_GEN.format(d=tmp_path) + f"experiment.output = {tmp_path / out}\n" + body
    return write(tmp_path, f"{out}.cfg", text)


SEQ = """
experiment.algorithm = sequential
train.eta = 0.05
train.lam = 0.01
train.iterations = 2000
train.checkpoint_every = 250
train.init = 1.0
"""


def test_train_sequential(tmp_path, capsys):
    cfg = train_cfg(tmp_path, SEQ)
    code, _, _ = run(["train", "--config", cfg], capsys)
    assert code == 0
    text = (tmp_path / "out" / "metrics.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_rows(tmp_path / "out" / "metrics.csv")
    its = [int(r["fastest_iteration"]) for r in rows]
    assert its == sorted(its) and its[-1] == 2000 and len(its) == 8
    assert (tmp_path / "out" / "model.txt").read_text().startswith("# dim=100 iterations=2000")
    code, out, _ = run(["evaluate", "--config", cfg, "--model", tmp_path / "out" / "model.txt"], capsys)
    assert code == 0
    obj = float(out.split()[1])
    assert obj == pytest.approx(float(rows[-1]["objective_test"]), rel=1e-12)


PAR = """
cluster.k = 4
cluster.partition_seed = 2
train.eta = 0.05
train.lam = 0.01
train.iterations = 1200
train.checkpoint_every = 300
train.seed = 9
"""


def numeric(rows):
    return [(r["fastest_iteration"], r["objective_train"], r["objective_test"], r["error_rate_test"]) for r in rows]


def test_wpsgd_zero_delay_matches_simuparallel(tmp_path, capsys):
    a = train_cfg(tmp_path, PAR + "experiment.algorithm = wpsgd\n", "a")
    b = train_cfg(tmp_path, PAR + "experiment.algorithm = simuparallel\n", "b")
    c = train_cfg(tmp_path, PAR + "experiment.algorithm = wpsgd\n", "c")
    assert run(["train", "--config", a], capsys)[0] == 0
    assert run(["train", "--config", b], capsys)[0] == 0
    assert run(["train", "--config", c, "--threads", "4"], capsys)[0] == 0
    ra, rb, rc = (read_rows(tmp_path / n / "metrics.csv") for n in "abc")
    assert numeric(ra) == numeric(rb) == numeric(rc)
    assert {r["seed"] for r in ra} == {"9"}


def test_train_to_stdout_and_seed_override(tmp_path, capsys):
    text = TINY_GEN.format(d=tmp_path) + SEQ
    cfg = write(tmp_path, "s.cfg", text)
    code, out, _ = run(["train", "--config", cfg, "--seed", "11"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert rows[0]["seed"] == "11"


def test_desk_config_wpsgd_beats_direct(tmp_path, capsys):
    body = """
gen.n_train = 20000
gen.n_test = 2000
gen.dim = 2000
gen.seed = 7
cluster.k = 10
cluster.delays = 0 0 0 0 0 0 0 0 40000 40000
cluster.shares = 1 1 1 1 1 1 1 1 0.2 0.2
train.eta = 0.0001
train.lam = 0.01
train.rate = 0.99999
train.init = 4
train.iterations = 50000
"""
    objs = {}
    for algo in ("wpsgd", "direct-avg"):
        cfg = write(tmp_path, f"{algo}.cfg", body + f"experiment.algorithm = {algo}\n")
        code, out, _ = run(["train", "--config", cfg], capsys)
        assert code == 0
        objs[algo] = float(list(csv.DictReader(out.splitlines()))[-1]["objective_test"])
    assert objs["wpsgd"] < objs["direct-avg"]


def test_delay_wpsgd_writes_rejection_log(tmp_path, capsys):
    cfg = train_cfg(tmp_path, """
experiment.algorithm = delay-wpsgd
train.eta = 0.3
train.lam = 0.1
train.iterations = 50
train.init = 0.5
""", "d")
    code, _, err = run(["train", "--config", cfg], capsys)
    # the literal geometric gate exhausts generic data quickly
    assert code == 1 and "no admissible sample" in err


def test_config_errors_enumerate_everything(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", """
experiment.algorithm = periodic-avg
cluster.k = 3
cluster.delays = 0 5
train.eta = abc
train.iterations = 0
mystery.key = 1
data.train = x
data.test = y
""")
    code, out, err = run(["train", "--config", cfg], capsys)
    assert code == 2 and out == ""
    for needle in ("train.eta", "train.lam is required", "train.iterations must be >= 1",
                   "cluster.delays has 2 entries", "train.span is required", "mystery.key"):
        assert needle in err


def test_config_reference_covers_all_keys():
    from pathlib import Path
    doc = (Path(__file__).parents[1] / "docs" / "config_reference.md").read_text()
    for key in KEYS:
        assert f"`{key}`" in doc


def test_parse_config_types():
    cfg = parse_config("train.eta = 0.1\ntrain.lam = 0.2\ntrain.iterations = 5\ndata.train = a\ndata.test = b\n"
                       "cluster.k = 2\ncluster.delays = 0, 3\ngen.normalize = no\n")
    assert cfg["cluster.delays"] == (0, 3) and cfg["gen.normalize"] is False
    with pytest.raises(ConfigError) as exc:
        parse_config("train.eta = 2\ntrain.lam = 1\ntrain.iterations = 5\ndata.train = a\ndata.test = b\n")
    assert any("eta*lam" in p for p in exc.value.problems)


CHECK = """
cluster.k = 4
train.eta = 0.0001
train.lam = 0.01
train.iterations = 100
theory.beta_sq_max = 1
"""


def test_check_report(tmp_path, capsys):
    cfg = write(tmp_path, "c.cfg", CHECK)
    code, out, _ = run(["check", "--config", cfg], capsys)
    assert code == 0
    assert "corollary3: true (lhs 8, rhs 6)" in out
    assert "corollary2: not evaluated" in out
    code, out, _ = run(["check", "--config", cfg, "--format", "json"], capsys)
    rep = json.loads(out)
    assert rep["corollary3"] == {"holds": True, "lhs": 8.0, "rhs": 6.0}
    assert rep["delay_step_size"]["delay_wpsgd_eligible"] is True
    assert rep["corollary2"]["status"] == "not evaluated"


def test_check_flags_invalid_step_size(tmp_path, capsys):
    cfg = write(tmp_path, "c.cfg", "train.eta = 0.5\ntrain.lam = 1\ntrain.iterations = 10\ntheory.beta_sq_max = 1\n")
    _, out, _ = run(["check", "--config", cfg, "--format", "json"], capsys)
    rep = json.loads(out)
    assert rep["delay_step_size"]["lhs"] == 1.0 and rep["delay_step_size"]["rhs"] == 0.5
    assert rep["delay_step_size"]["delay_wpsgd_eligible"] is False


def test_check_reference_parameters(tmp_path, capsys):
    cfg = write(tmp_path, "c.cfg", """
cluster.k = 10
cluster.delays = 0 0 0 0 0 0 0 0 640000 640000
train.eta = 0.0001
train.lam = 0.01
train.rate = 0.99999
train.iterations = 800000
train.span = 80000
theory.wasserstein_1 = 1
theory.wasserstein_2 = 1
theory.sigma_star = 1
""")
    _, out, _ = run(["check", "--config", cfg, "--format", "json"], capsys)
    rep = json.loads(out)
    from wpsgd import DelayProfile
    from wpsgd.theory import corollary_report
    prof = DelayProfile((0,) * 8 + (640000,) * 2)
    assert rep["corollary4"]["lhs"] == corollary_report(prof, 0.99999).lhs
    assert rep["corollary3"]["holds"] and rep["corollary4"]["holds"]
    assert "holds" in rep["corollary2"]
    assert set(rep["deduction"]) >= {"valid", "validity_factor"}


def write_curve(path, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for n, v in values:
            w.writerow(["wpsgd", n, repr(v), repr(v), 0.5, 0.0, 0])


def test_fit_rate(tmp_path, capsys):
    path = tmp_path / "m.csv"
    write_curve(path, [(n, 5 * 0.9**n + 1.5) for n in range(10)])
    code, out, _ = run(["fit-rate", path, "--floor", "1.5"], capsys)
    assert code == 0
    r = float(out.splitlines()[0].split()[1])
    assert abs(r - 0.9) <= 1e-9 and out.splitlines()[1].startswith("residual")
    write_curve(path, [(0, 3.0), (1, 2.0)])
    code, _, err = run(["fit-rate", path], capsys)
    assert code == 1 and "at least 3" in err
    write_curve(path, [(n, 4.0) for n in range(5)])
    code, _, err = run(["fit-rate", path], capsys)
    assert code == 1 and "not decreasing" in err


def test_console_script_exit_code(tmp_path):
    proc = subprocess.run(["wpsgd", "check", "--config", str(tmp_path / "missing.cfg")],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "missing.cfg" in proc.stderr and proc.stdout == ""
