import configparser
import csv
import io
from dataclasses import replace
from pathlib import Path

import pytest

from clusterkit import MsgType, TopologySpec, preset
from clusterkit.cli import main
from clusterkit.experiment import (
    CSV_FIELDS,
    ConfigError,
    ExperimentConfig,
    parse_seeds,
    parse_values,
    run_experiment,
    run_one,
    sweep,
)
from clusterkit.report import emit_csv, emit_plot, read_csv, records_to_csv, summarize

DATA = Path(__file__).parent / "data"

HEADER = ("algorithm,seed,node_count,density,k,d,p,ch_count,avg_cluster_size,coverage_pct,overlap_degree,"
          "orphan_count,rounds,msgs_join_req,msgs_join_acc,msgs_join_deny,msgs_attr,msgs_resume,"
          "msgs_convergecast,msgs_hello")


def config_from(text, environ=None):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string(text)
    return ExperimentConfig.from_parser(parser, environ=environ or {})


def small(name="lca", n=60, seeds=(0, 1, 2), **params):
    return ExperimentConfig(preset(name, **params), TopologySpec("fixed-density", n, 8.0, comm_range=20), seeds)


# -- configuration -----------------------------------------------------------------------

def test_config_sections():
    cfg = config_from("""
[topology]
kind = fixed-diameter
node_count = 300
world_side = 200
comm_range = 20
seeds = 0-4, 9

[algorithm]
preset = maxmind
d = 3

[radio]
loss = 0.1

[output]
csv = out.csv
""")
    assert cfg.algorithm == "maxmind" and cfg.composition.params.d == 3
    assert cfg.topology.kind == "fixed-diameter" and cfg.topology.node_count == 300
    assert cfg.seeds == (0, 1, 2, 3, 4, 9) and cfg.loss == 0.1 and cfg.csv == "out.csv"


def test_custom_composition():
    cfg = config_from("[algorithm]\nchd = attr\njd = dfs\nit = norm\nk = 3\n")
    assert (cfg.composition.chd, cfg.composition.jd, cfg.composition.params.k) == ("attr", "dfs", 3)


def test_seed_env_override():
    cfg = config_from("[topology]\nseed = 4\n[algorithm]\npreset = lca\n", environ={"CLUSTERKIT_SEED": "17"})
    assert cfg.seeds == (17,)


def test_default_seeds():
    assert config_from("[algorithm]\npreset = lca\n").seeds == tuple(range(20))


@pytest.mark.parametrize("text", [
    "[algorithm]\npreset = kmeans\n",
    "[algorithm]\nchd = prob\n",
    "[algorithm]\npreset = lca\np = 2\n",
    "[algorithm]\npreset = lca\n[radio]\nloss = 1.5\n",
    "[algorithm]\npreset = lca\n[topology]\nnode_count = many\n",
])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        config_from(text)


def test_parse_helpers():
    assert parse_seeds("3-5") == (3, 4, 5)
    assert parse_seeds("1 2,7") == (1, 2, 7)
    assert parse_values("100,200", "node_count") == [100, 200]
    assert parse_values("0.1, 0.5", "p") == [0.1, 0.5]
    with pytest.raises(ConfigError):
        parse_seeds("  ")


# -- metrics -----------------------------------------------------------------------------

def test_all_heads():
    for r in run_experiment(small(p=1.0)):
        assert r.ch_count == r.node_count and r.avg_cluster_size == 1.0 and r.coverage_pct == 100.0


def test_maxmind_star_record(tmp_path):
    (tmp_path / "star.topo").write_text("# range 12\n5 0 0\n1 10 0\n2 -10 0\n3 0 10\n")
    cfg = ExperimentConfig(preset("maxmind", d=1), TopologySpec("file", path=str(tmp_path / "star.topo")), (0,))
    r = run_one(cfg, 0)
    assert (r.ch_count, r.avg_cluster_size, r.node_count) == (1, 4.0, 4)


@pytest.mark.parametrize("name", ["lca", "leach", "tcca", "maxmind"])
def test_size_identity(name):
    for r in run_experiment(small(name, n=120)):
        assert r.ch_count * r.avg_cluster_size == pytest.approx(r.node_count)
        assert r.overlap_degree == 1.0


def test_moca_overlap_and_coverage():
    for r in run_experiment(small("moca", n=200)):
        assert r.overlap_degree >= 1.0
        assert r.coverage_pct == pytest.approx(100.0 * (r.node_count - r.orphan_count) / r.node_count)


def test_moca_coverage_monotone_in_p_and_k():
    base = replace(small("moca", n=200), seeds=(0, 1, 2, 3))
    by_p = sweep(base, "p", [0.05, 0.1, 0.2, 0.3])
    by_k = sweep(base, "k", [1, 2, 3])
    for records, n_values in ((by_p, 4), (by_k, 3)):
        for seed in base.seeds:
            cov = [r.coverage_pct for r in records if r.seed == seed]
            assert len(cov) == n_values and cov == sorted(cov)


def test_bfs_requests_linear_in_k():
    cfg = replace(small("lca", n=200), seeds=(5, 6))
    for r in sweep(cfg, "k", [1, 2, 3, 4]):
        assert r.msgs_join_req <= r.k * r.node_count


def test_maxmind_message_counts():
    cfg = ExperimentConfig(preset("maxmind"), TopologySpec("fixed-diameter", 200, world_side=200, comm_range=20), (0,))
    r = run_one(cfg, 0)
    assert r.msgs_attr == 2 * 2 * 200
    assert r.msgs_join_req == r.msgs_join_acc == r.msgs_join_deny == 0


def test_leach_reports_desired_fraction():
    r = run_one(small("leach", P_desired=0.25), 0)
    assert r.p == 0.25 and r.k == 1


# -- sweep and output ------------------------------------------------------------------------

def test_sweep_rows_ordered_and_parallel_safe():
    cfg = small(n=80, seeds=(0, 1))
    serial = sweep(cfg, "node_count", [40, 80])
    parallel = sweep(cfg, "node_count", [40, 80], jobs=2)
    assert [(r.node_count, r.seed) for r in serial] == [(40, 0), (40, 1), (80, 0), (80, 1)]
    assert records_to_csv(serial) == records_to_csv(parallel)
    rows = summarize(serial, "node_count")
    assert [row["node_count"] for row in rows] == [40, 80] and rows[0]["runs"] == 2


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ConfigError):
        sweep(small(), "colour", [1])


def test_csv_single_record(tmp_path):
    records = run_experiment(small(seeds=(3,)))
    emit_csv(records, tmp_path / "one.csv")
    lines = (tmp_path / "one.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0] == HEADER
    assert CSV_FIELDS == HEADER.split(",")


def test_csv_round_trip(tmp_path):
    records = run_experiment(small("moca"))
    emit_csv(records, tmp_path / "r.csv")
    assert read_csv(tmp_path / "r.csv") == records


def test_csv_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "x.csv")
    with pytest.raises(OSError, match="cannot write"):
        emit_csv(run_experiment(small(seeds=(0,))), tmp_path / "missing" / "x.csv")
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(tmp_path / "bad.csv")


def test_golden_csv_is_stable():
    cfg = ExperimentConfig.from_file(DATA / "lca50.ini", environ={})
    assert records_to_csv(run_experiment(cfg)) == (DATA / "golden_lca50_seed42.csv").read_text()


def test_plot_is_svg(tmp_path):
    records = sweep(small(seeds=(0, 1)), "p", [0.1, 0.3])
    emit_plot(records, tmp_path / "p.svg", axis="p")
    text = (tmp_path / "p.svg").read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    emit_plot(records, tmp_path / "q.svg", axis="p")
    assert (tmp_path / "q.svg").read_bytes() == (tmp_path / "p.svg").read_bytes()


# -- command line ---------------------------------------------------------------------------

def write_config(tmp_path, extra=""):
    path = tmp_path / "run.ini"
    path.write_text(f"""
[topology]
kind = fixed-density
node_count = 40
density = 8
comm_range = 20
seeds = 0-1

[algorithm]
preset = lca
{extra}
""")
    return path


def test_cli_generate(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["generate", "--spec", str(cfg), "--seed", "3", "--out", str(tmp_path / "t.topo")]) == 0
    lines = (tmp_path / "t.topo").read_text().splitlines()
    assert lines[0] == "# range 20.0" and len(lines) == 41


def test_cli_run_to_stdout(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("CLUSTERKIT_SEED", raising=False)
    assert main(["run", "--config", str(write_config(tmp_path))]) == 0
    out, err = capsys.readouterr()
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert err.count("trace_hash=") == 2


def test_cli_run_files(tmp_path, monkeypatch):
    monkeypatch.setenv("CLUSTERKIT_SEED", "5")
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--csv", str(tmp_path / "o.csv"),
                 "--plot", str(tmp_path / "o.svg"), "--trace", str(tmp_path / "o.trace")]) == 0
    assert read_csv(tmp_path / "o.csv")[0].seed == 5
    trace = (tmp_path / "o.trace").read_text().splitlines()
    assert trace[0] == "# seed=5" and any(x.startswith("round=") for x in trace)
    assert (tmp_path / "o.svg").exists()


def test_cli_sweep(tmp_path, monkeypatch):
    monkeypatch.delenv("CLUSTERKIT_SEED", raising=False)
    cfg = write_config(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--axis", "k", "--values", "1,2", "--jobs", "2",
                 "--csv", str(tmp_path / "s.csv"), "--plot", str(tmp_path / "s.svg")]) == 0
    assert [(r.k, r.seed) for r in read_csv(tmp_path / "s.csv")] == [(1, 0), (1, 1), (2, 0), (2, 1)]
    summary = (tmp_path / "s.summary.csv").read_text().splitlines()
    assert summary[0].startswith("k,runs,") and len(summary) == 3


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.ini")]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["sweep", "--config", "x", "--axis", "colour", "--values", "1"])


def test_message_columns_cover_every_type():
    r = run_one(small("maxmind"), 0)
    assert r.total_messages == r.msgs_attr + r.msgs_hello + r.msgs_convergecast
    assert {MsgType.ROUTE} == set(MsgType) - {
        MsgType.NEIGHBOR_HELLO, MsgType.JOIN_REQUEST, MsgType.JOIN_ACCEPT, MsgType.JOIN_DENY,
        MsgType.ATTRIBUTE, MsgType.RESUME, MsgType.CONVERGECAST}
