import csv
import io
import json

import pytest

from topobench.cli import main, parse_loads, split_seed
from topobench.errors import BadParams


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text):
    return list(csv.DictReader(io.StringIO("".join(l + "\n" for l in text.splitlines() if not l.startswith("#")))))


def strip_stamp(text):
    return [l for l in text.splitlines() if not l.startswith("# generated")]


def test_generate_sf5(capsys, tmp_path):
    code, out, _ = run(capsys, "generate", "--kind", "sf", "--q", "5", "--output", str(tmp_path / "sf5"))
    assert code == 0
    rows = data_rows(out)
    assert len(rows) == 175
    assert len({r["u"] for r in rows} | {r["v"] for r in rows}) == 50
    desc = json.loads((tmp_path / "sf5.json").read_text())
    assert desc["N_r"] == 50
    assert len((tmp_path / "sf5.edges").read_text().split("\n")) >= 175


def test_generate_bad_q(capsys):
    code, out, err = run(capsys, "generate", "--kind", "sf", "--q", "6")
    assert code != 0 and out == ""
    assert json.loads(err)["error"] == "InvalidQ"


def test_generate_dragonfly(capsys):
    code, out, _ = run(capsys, "generate", "--kind", "df", "--p", "7", "--h", "7", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["descriptor"]["N_r"] == 1386


def test_analyze_sf5(capsys):
    code, out, _ = run(capsys, "analyze", "--kind", "sf", "--q", "5")
    (row,) = data_rows(out)
    assert code == 0 and row["diameter"] == "2" and row["N"] == "200"


def test_cost_sf19(capsys):
    code, out, _ = run(capsys, "cost", "--kind", "sf", "--q", "19", "--preset", "fdr10", "--radix", "43")
    (row,) = data_rows(out)
    assert code == 0
    assert float(row["cost_per_node"]) == pytest.approx(1033, rel=0.10)
    assert row["N_r"] == "722"


def test_cost_unknown_preset(capsys):
    code, _, err = run(capsys, "cost", "--kind", "sf", "--q", "5", "--preset", "qdr56")
    assert code != 0 and json.loads(err)["error"] == "BadParams"


def test_moore(capsys):
    code, out, _ = run(capsys, "moore", "--max-q", "7", "--k-prime", "96")
    rows = data_rows(out)
    assert rows[0]["moore_bound"] == "9217"
    q5 = next(r for r in rows if r["q"] == "5")
    assert q5["ratio"] == "1.000000"


SMALL_SIM = ("simulate", "--kind", "sf", "--q", "5", "--loads", "0.1,0.3", "--warmup-cycles", "300",
             "--warmup-window", "150", "--warmup-cap", "1500", "--measure-cycles", "400")

COMMANDS = [
    ("generate", "--kind", "dln", "--n-routers", "40", "--y", "2"),
    ("analyze", "--kind", "sf", "--q", "5", "--restarts", "3"),
    ("bisection", "--kind", "df", "--p", "2", "--h", "2", "--a", "4", "--restarts", "3"),
    ("resiliency", "--kind", "sf", "--q", "4", "--ci-width", "0.1"),
    SMALL_SIM,
    ("cost", "--kind", "df", "--p", "2", "--h", "2", "--a", "4"),
    ("moore", "--max-q", "9"),
]


@pytest.mark.parametrize("argv", COMMANDS, ids=[c[0] for c in COMMANDS])
def test_same_seed_same_rows(capsys, argv):
    a = run(capsys, *argv, "--seed", "17")
    b = run(capsys, *argv, "--seed", "17")
    assert a[0] == b[0] == 0
    assert strip_stamp(a[1]) == strip_stamp(b[1])


def test_replay_from_output(capsys, tmp_path):
    _, out, _ = run(capsys, *SMALL_SIM, "--routing", "ugal_l", "--seed", "3")
    path = tmp_path / "run.csv"
    path.write_text(out)
    code, again, _ = run(capsys, "simulate", "--config", str(path))
    assert code == 0 and strip_stamp(again) == strip_stamp(out)
    assert len(data_rows(again)) == 2


def test_config_overrides_flags(capsys, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"q": 7}))
    _, out, _ = run(capsys, "analyze", "--kind", "sf", "--q", "5", "--no-bisection", "--config", str(path))
    assert data_rows(out)[0]["N_r"] == "98"
    path.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "analyze", "--config", str(path))
    assert code != 0 and json.loads(err)["error"] == "BadParams"


def test_json_output(capsys):
    code, out, _ = run(capsys, "analyze", "--kind", "sf", "--q", "5", "--format", "json", "--no-bisection")
    doc = json.loads(out)
    assert doc["config"]["q"] == 5 and doc["rows"][0]["diameter"] == 2


def test_output_file(capsys, tmp_path):
    path = tmp_path / "m.csv"
    code, out, _ = run(capsys, "moore", "--max-q", "5", "--output", str(path))
    assert code == 0 and out == "" and "MMS,5" in path.read_text()


def test_parse_loads():
    assert parse_loads("0.05:0.5:0.05") == pytest.approx([0.05 * i for i in range(1, 11)])
    assert parse_loads("0.1,0.2") == [0.1, 0.2]
    with pytest.raises(BadParams):
        parse_loads("0.5:0.1:0.1")
    with pytest.raises(BadParams):
        parse_loads("a:b:c")


def test_split_seed():
    assert split_seed(1, "simulate") == split_seed(1, "simulate")
    assert split_seed(1, "simulate") != split_seed(1, "resiliency")
    assert split_seed(1, "simulate") != split_seed(2, "simulate")
    assert 0 <= split_seed(2**64 - 1, "x") < 2**63
