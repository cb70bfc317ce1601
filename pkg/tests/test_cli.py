import filecmp
import json
import subprocess
import sys

import pytest

from symgraph import __version__
from symgraph.cli import EXIT, main
from symgraph.config import ConfigError, ExperimentConfig, load_config

BUDGET = {
    "n": 7,
    "partition": {"source": "sizes", "sizes": [10, 10]},
    "constraint": {"type": "budget", "costs": [1, 2], "budget": 12},
    "epsilon": 0.8,
    "trials": 300,
    "seed": 17,
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _run(tmp_path, cfg, cmd, *extra, out="out"):
    path = _write(tmp_path, cfg)
    outdir = tmp_path / out
    code = main([cmd, "--config", path, "--out", str(outdir), *extra])
    return code, outdir


def test_solve_outputs(tmp_path):
    code, out = _run(tmp_path, BUDGET, "solve")
    assert code == 0
    d = json.loads((out / "solve.json").read_text())
    assert d["meta"]["seed"] == 17 and d["meta"]["version"] == __version__
    assert d["meta"]["config_hash"] == ExperimentConfig.from_dict(BUDGET).content_hash()
    assert d["solution"]["status"] == "converged"
    assert d["solution"]["m_star"] == pytest.approx([4.392945302323583, 3.803527348838209], abs=1e-8)


def test_gnm_solve(tmp_path):
    cfg = {"n": 4, "partition": {"source": "balanced", "k": 1}, "constraint": {"type": "box", "lo": [3], "hi": [3]}}
    code, out = _run(tmp_path, cfg, "solve")
    assert code == 0
    assert json.loads((out / "solve.json").read_text())["solution"]["q_star"] == pytest.approx([0.5])


def test_diagnose_bounds(tmp_path):
    code, out = _run(tmp_path, BUDGET, "diagnose")
    d = json.loads((out / "diagnose.json").read_text())
    assert code == 0
    assert d["bounds"]["epsilon"] == 0.8
    assert set(d["diagnostics"]["flags"]) >= {"eps_below_half", "sandwich_valid"}


@pytest.mark.parametrize("cmd,files", [
    ("solve", ["solve.json"]),
    ("diagnose", ["diagnose.json"]),
    ("sample", ["sample_profiles.csv", "sample_graphs.txt", "sample_summary.json"]),
    ("couple", ["couple_trials.csv", "couple_summary.json"]),
    ("verify", ["verify.json"]),
])
def test_byte_identical_across_jobs(tmp_path, cmd, files):
    cfg = dict(BUDGET, trials=9000) if cmd in ("sample", "couple") else dict(BUDGET)
    if cmd == "verify":
        cfg = {"n": 4, "partition": {"source": "balanced", "k": 2},
               "constraint": {"type": "budget", "costs": [1, 2], "budget": 5}, "seed": 3}
    a = _run(tmp_path, cfg, cmd, "--jobs", "1", out="a")
    b = _run(tmp_path, cfg, cmd, "--jobs", "8", out="b")
    c = _run(tmp_path, cfg, cmd, "--jobs", "1", out="c")
    assert a[0] == b[0] == c[0] == 0
    for f in files:
        assert filecmp.cmp(a[1] / f, b[1] / f, shallow=False), f
        assert filecmp.cmp(a[1] / f, c[1] / f, shallow=False), f


def test_seed_changes_output(tmp_path):
    _run(tmp_path, BUDGET, "sample", out="a")
    _run(tmp_path, BUDGET, "sample", "--seed", "18", out="b")
    assert (tmp_path / "a" / "sample_graphs.txt").read_text() != (tmp_path / "b" / "sample_graphs.txt").read_text()


def test_sample_files_are_stamped(tmp_path):
    code, out = _run(tmp_path, BUDGET, "sample", "--strategy", "dp")
    assert code == 0
    h = ExperimentConfig.from_dict(dict(BUDGET, strategy="budget-dp")).content_hash()
    for f in ("sample_profiles.csv", "sample_graphs.txt"):
        first = (out / f).read_text().splitlines()[0]
        assert first == f"# config_hash={h} seed=17 version={__version__}"
    rows = (out / "sample_profiles.csv").read_text().splitlines()
    assert rows[1] == "draw_index,v_1,v_2" and len(rows) == 2 + 300
    summary = json.loads((out / "sample_summary.json").read_text())
    assert summary["exact"] is True and summary["strategy"] == "budget-dp"


def test_sample_graph_lines_match_profiles(tmp_path):
    code, out = _run(tmp_path, BUDGET, "sample")
    profiles = [list(map(int, r.split(",")))[1:] for r in (out / "sample_profiles.csv").read_text().splitlines()[2:]]
    graphs = [list(map(int, r.split()))[1:] for r in (out / "sample_graphs.txt").read_text().splitlines()[2:]]
    for v, edges in zip(profiles, graphs):
        assert [sum(e < 10 for e in edges), sum(e >= 10 for e in edges)] == v


def test_couple_outputs(tmp_path):
    code, out = _run(tmp_path, BUDGET, "couple")
    assert code == 0
    rows = (out / "couple_trials.csv").read_text().splitlines()
    assert rows[1] == "trial_index,holds,per_part_holds,size_g_minus,size_g,size_g_plus"
    assert len(rows) == 302
    s = json.loads((out / "couple_summary.json").read_text())["summary"]
    assert s["trials"] == 300 and 0 <= s["rate"] <= 1 and s["epsilon"] == 0.8
    assert s["meets_bound"] is True


def test_zero_trials(tmp_path):
    code, out = _run(tmp_path, dict(BUDGET, trials=0), "couple")
    assert code == 0
    assert len((out / "couple_trials.csv").read_text().splitlines()) == 2
    code, out = _run(tmp_path, dict(BUDGET, trials=0), "sample", out="s")
    assert code == 0 and len((out / "sample_profiles.csv").read_text().splitlines()) == 2


def test_exit_codes(tmp_path):
    assert _run(tmp_path, dict(BUDGET, epsilon=1.5), "solve")[0] == EXIT["config"]
    infeasible = dict(BUDGET, constraint={"type": "budget", "costs": [1, 2], "budget": -1})
    assert _run(tmp_path, infeasible, "solve")[0] == EXIT["infeasible"]
    assert _run(tmp_path, infeasible, "sample")[0] == EXIT["infeasible"]
    assert _run(tmp_path, infeasible, "couple")[0] == EXIT["infeasible"]
    assert _run(tmp_path, BUDGET, "sample", "--strategy", "mcmc")[0] == EXIT["config"]
    big = dict(BUDGET, caps={"enumeration": 10})
    assert _run(tmp_path, big, "sample")[0] == EXIT["capacity"]
    no_eps = {k: v for k, v in BUDGET.items() if k != "epsilon"}
    assert _run(tmp_path, no_eps, "couple")[0] == EXIT["config"]
    box_dp = dict(BUDGET, constraint={"type": "box", "lo": [0, 0], "hi": [3, 3]})
    assert _run(tmp_path, box_dp, "sample", "--strategy", "dp")[0] == EXIT["config"]


def test_iteration_limit_exit_code(tmp_path, monkeypatch):
    import symgraph.cli as cli
    from symgraph.maxent import maximize_entropy

    monkeypatch.setattr(cli, "maximize_entropy", lambda part, spec: maximize_entropy(part, spec, max_iter=1))
    code, out = _run(tmp_path, BUDGET, "solve")
    assert code == EXIT["iteration-limit"]
    assert json.loads((out / "solve.json").read_text())["solution"]["status"] == "iteration-limit"


def test_mcmc_with_allow_approx(tmp_path):
    cfg = dict(BUDGET, mcmc={"burn_in": 200, "thinning": 3}, trials=50)
    code, out = _run(tmp_path, cfg, "sample", "--strategy", "mcmc", "--allow-approx")
    assert code == 0
    s = json.loads((out / "sample_summary.json").read_text())
    assert s["exact"] is False and s["log_size"] is None


def test_verify_default_and_infeasible(tmp_path, capsys):
    code = main(["verify", "--out", str(tmp_path / "v")])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert any(l.startswith("PASS") for l in lines) and not any(l.startswith("FAIL") for l in lines)
    infeasible = dict(BUDGET, n=4, partition={"source": "balanced", "k": 2},
                      constraint={"type": "budget", "costs": [1, 1], "budget": -1})
    assert _run(tmp_path, infeasible, "verify")[0] == 0
    assert "SKIP" in capsys.readouterr().out


def test_config_error_names_field(tmp_path, capsys):
    for bad, field in ((dict(BUDGET, trials=-1), "trials"), (dict(BUDGET, seed="x"), "seed"),
                       (dict(BUDGET, strategy="gibbs"), "strategy"), (dict(BUDGET, colour=1), "colour"),
                       (dict(BUDGET, partition={"source": "magic"}), "partition"),
                       (dict(BUDGET, constraint={"type": "budget", "costs": [1]}), "constraint")):
        assert _run(tmp_path, bad, "solve")[0] == EXIT["config"]
        assert repr(field) in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT["config"]
    assert "--config" in capsys.readouterr().err


def test_config_roundtrip_and_hash(tmp_path):
    cfg = load_config(_write(tmp_path, BUDGET))
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.content_hash() == cfg.content_hash()
    # runtime fields do not enter the hash
    assert ExperimentConfig.from_dict(dict(BUDGET, jobs=8, out="x")).content_hash() == cfg.content_hash()
    assert ExperimentConfig.from_dict(dict(BUDGET, seed=1)).content_hash() != cfg.content_hash()
    assert ExperimentConfig.from_dict(dict(BUDGET, strategy="enum")).strategy == "enumeration"


def test_config_partition_sources(tmp_path):
    (tmp_path / "part.txt").write_text("")
    from symgraph.graphspace import balanced_partition, write_partition

    with open(tmp_path / "part.txt", "w") as fh:
        write_partition(balanced_partition(5, 2), fh)
    cfg = load_config(_write(tmp_path, {"n": 5, "partition": {"source": "explicit", "path": "part.txt"}}))
    assert cfg.build_partition() == balanced_partition(5, 2)
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"n": 6, "partition": {"source": "explicit", "path": "part.txt"}},
                                   base_dir=str(tmp_path)).build_partition()
    assert err.value.field == "n"
    costs = ExperimentConfig.from_dict({"partition": {"source": "cost-binned", "costs": [1, 1, 2, 4, 4, 8],
                                                      "delta": 2.0}})
    assert costs.build_partition().n == 4
    groups = ExperimentConfig.from_dict({"partition": {"source": "groups", "groups": [0, 0, 1, 1]}})
    assert groups.build_partition().k == 3
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"partition": {"source": "balanced", "k": 2}}).build_partition()


def test_entry_point_subprocess(tmp_path):
    path = _write(tmp_path, BUDGET)
    res = subprocess.run([sys.executable, "-m", "symgraph.cli", "solve", "--config", path, "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "solve.json").exists()
