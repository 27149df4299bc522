import csv
import json

import numpy as np
import pytest

from exchange_lab import cli
from exchange_lab.files import manifest_path, read_histogram


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_equilibrium_json(tmp_path, capsys):
    out = tmp_path / "eq.json"
    assert cli.main(["equilibrium", "--mu", "1", "--nu", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["beta_plus"] == pytest.approx(0.5852, abs=5e-4)
    assert doc["p0_star"] == pytest.approx(0.15386, abs=5e-4)
    assert doc["beta_minus"] == pytest.approx(0.6772, abs=5e-4)
    assert doc["quartic_residual"] <= 1e-12
    assert json.loads(capsys.readouterr().out)["beta_plus"] == doc["beta_plus"]
    p = read_histogram(tmp_path / "eq.csv")
    assert p.window == (-150, 200)
    assert p.probs.sum() == pytest.approx(1, abs=1e-9)


def test_missing_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["equilibrium", "--mu", "1"])
    assert info.value.code == 2
    assert "--nu" in capsys.readouterr().err


def test_bad_window_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["equilibrium", "--mu", "1", "--nu", "1", "--window", "3:9"])
    assert info.value.code == 2


def simulate(tmp_path, name, *extra, events=2000, seed=3):
    out = tmp_path / name
    argv = ["simulate", "--agents", "50", "--mu", "2", "--nu", "1", "--events", str(events),
            "--seed", str(seed), "--out", str(out), *extra]
    assert cli.main(argv) == 0
    return out


def test_simulate_zero_events_is_delta(tmp_path):
    out = simulate(tmp_path, "h.csv", events=0)
    assert rows(out) == [{"n": "2", "probability": "1.0"}]
    manifest = json.loads(manifest_path(out).read_text())
    assert manifest["derived"]["events_blocked"] == [0]
    assert manifest["derived"]["first_empty_event"] == [None]
    assert manifest["params"]["seed"] == 3


def test_simulate_deterministic(tmp_path):
    a = simulate(tmp_path, "a.csv")
    b = simulate(tmp_path, "b.csv")
    assert a.read_bytes() == b.read_bytes()
    c = simulate(tmp_path, "c.csv", seed=4)
    assert a.read_bytes() != c.read_bytes()
    total = sum(float(r["probability"]) for r in rows(a))
    assert total == pytest.approx(1, abs=1e-9)
    ns = [int(r["n"]) for r in rows(a)]
    assert ns == sorted(ns)


def test_simulate_snapshots_and_svg(tmp_path):
    out = simulate(tmp_path, "s.csv", "--snapshot-every", "500", "--svg", str(tmp_path / "s.svg"))
    snaps = rows(tmp_path / "s_snapshots.csv")
    assert sorted({int(r["event"]) for r in snaps}) == [500, 1000, 1500, 2000]
    assert (tmp_path / "s.svg").read_text().startswith("<svg")
    assert "tv_to_equilibrium" in json.loads(manifest_path(out).read_text())["derived"]


def test_simulate_unsupported_rate_exits_1(tmp_path, capsys):
    argv = ["simulate", "--agents", "5", "--mu", "1", "--nu", "1", "--events", "10", "--seed", "0",
            "--f", "exp:0.5", "--out", str(tmp_path / "x.csv")]
    assert cli.main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_replicas_merge_in_seed_order(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    merged = simulate(tmp_path, "m.csv", "--replicas", "3")
    singles = [read_histogram(simulate(tmp_path, f"r{k}.csv", seed=3 + k)) for k in range(3)]
    expected = {}
    for p in singles:
        for n, v in p.as_dict().items():
            expected[n] = expected.get(n, 0.0) + v / 3
    got = read_histogram(merged).as_dict()
    assert set(got) == set(expected)
    for n in got:
        assert got[n] == pytest.approx(expected[n], abs=1e-12)
    assert json.loads(manifest_path(merged).read_text())["derived"]["replica_seeds"] == [3, 4, 5]
    assert merged.read_bytes() == simulate(tmp_path, "m2.csv", "--replicas", "3").read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nagents = 50\nmu=2\nnu=1\nevents=2000\nseed=9\n")
    a = tmp_path / "a.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    b = simulate(tmp_path, "b.csv", seed=9)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(c)]) == 0
    assert c.read_bytes() == simulate(tmp_path, "d.csv", seed=3).read_bytes()


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    with pytest.raises(SystemExit) as info:
        cli.main(["equilibrium", "--config", str(cfg), "--mu", "1", "--nu", "1"])
    assert info.value.code == 2


def test_replay_reproduces_bitwise(tmp_path):
    out = simulate(tmp_path, "orig.csv")
    again = tmp_path / "again.csv"
    assert cli.main(["replay", str(manifest_path(out)), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def exact(tmp_path, n, m, b, method):
    out = tmp_path / f"{method}_{n}_{m}_{b}.csv"
    assert cli.main(["exact", "--agents", str(n), "--money", str(m), "--bank", str(b),
                     "--method", method, "--out", str(out)]) == 0
    return out


def test_exact_worked_case(tmp_path):
    got = {int(r["n"]): (int(r["p_num"]), int(r["p_den"])) for r in rows(exact(tmp_path, 2, 2, 1, "closed-form"))}
    assert got == {-1: (3, 11), 0: (2, 11), 1: (1, 11), 2: (2, 11), 3: (3, 11)}
    first = rows(tmp_path / "closed-form_2_2_1.csv")[0]
    assert first["p_decimal"].startswith("0.27272727")


def test_exact_methods_byte_identical(tmp_path):
    for n in range(1, 5):
        for m in range(1, 7):
            for b in range(5):
                assert exact(tmp_path, n, m, b, "enumerate").read_bytes() == \
                    exact(tmp_path, n, m, b, "closed-form").read_bytes()


def test_exact_single_agent(tmp_path):
    assert len(rows(exact(tmp_path, 1, 4, 2, "enumerate"))) == 1


def test_exact_guard_names_bound(tmp_path, capsys, monkeypatch):
    from exchange_lab import exact as exact_mod
    monkeypatch.setattr(exact_mod, "MAX_CONFIGS", 100)
    code = cli.main(["exact", "--agents", "4", "--money", "6", "--bank", "4", "--method", "enumerate",
                     "--out", str(tmp_path / "big.csv")])
    assert code == 1
    assert "100" in capsys.readouterr().err


def write_hist(path, mapping):
    path.write_text("n,probability\n" + "".join(f"{n},{v}\n" for n, v in mapping.items()))
    return str(path)


def test_compare(tmp_path, capsys):
    d0 = write_hist(tmp_path / "d0.csv", {0: 1.0})
    d1 = write_hist(tmp_path / "d1.csv", {1: 1.0})
    assert cli.main(["compare", "--a", d0, "--b", d0, "--metric", "tv"]) == 0
    assert float(capsys.readouterr().out) == 0
    js = tmp_path / "c.json"
    assert cli.main(["compare", "--a", d0, "--b", d1, "--metric", "tv", "--json", str(js)]) == 0
    assert float(capsys.readouterr().out) == 1
    assert json.loads(js.read_text())["distance"] == 1
    assert cli.main(["compare", "--a", d0, "--b", d1, "--metric", "l2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2 ** 0.5)


def test_compare_malformed_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("n,probability\n0,0.5\n1,abc\n")
    good = write_hist(tmp_path / "g.csv", {0: 1.0})
    assert cli.main(["compare", "--a", str(bad), "--b", good]) == 1
    assert "line 3" in capsys.readouterr().err


def test_compare_reads_exact_csv(tmp_path, capsys):
    a = exact(tmp_path, 2, 2, 1, "enumerate")
    assert cli.main(["compare", "--a", str(a), "--b", str(a)]) == 0
    assert float(capsys.readouterr().out) == 0


@pytest.fixture(scope="module")
def ode_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ode") / "traj.csv"
    assert cli.main(["ode", "--mu", "1", "--nu", "1", "--dt", "0.01", "--t-end", "200",
                     "--snapshots", "1,5,50", "--out", str(out), "--svg", str(out.with_suffix(".svg"))]) == 0
    summary = rows(out.with_name("traj_summary.csv"))
    manifest = json.loads(manifest_path(out).read_text())
    return out, summary, manifest


def test_ode_summary_properties(ode_run):
    out, summary, manifest = ode_run
    t_star = manifest["derived"]["t_star"]
    t = np.array([float(r["t"]) for r in summary])
    debt = np.array([float(r["debt"]) for r in summary])
    l2 = np.array([float(r["l2_to_equilibrium"]) for r in summary])
    assert 0 < t_star < 200
    assert np.all(np.diff(debt[t <= t_star]) >= -1e-12)
    assert np.all(np.abs(debt[t >= t_star] - 1) <= 1e-6)
    assert l2[-1] < 1e-3 and t[-1] == 200
    assert max(float(r["mass_defect"]) for r in summary) < 1e-8
    # decay rate of log l2 differs on either side of t_star
    before = (t > 1) & (t < t_star)
    after = (t > t_star + 1) & (t < t_star + 10)
    slope_before = np.polyfit(t[before], np.log(l2[before]), 1)[0]
    slope_after = np.polyfit(t[after], np.log(l2[after]), 1)[0]
    assert abs(slope_after - slope_before) > 0.1 * abs(slope_before)


def test_ode_trajectory_csv(ode_run):
    out, _, manifest = ode_run
    times = sorted({float(r["t"]) for r in rows(out)})
    assert {0.0, 1.0, 5.0, 50.0, 200.0} <= set(times)
    assert manifest["derived"]["t_star"] in times
    assert out.with_suffix(".svg").read_text().startswith("<svg")


def test_ode_bad_dt(tmp_path):
    assert cli.main(["ode", "--mu", "1", "--nu", "1", "--t-end", "2", "--dt", "-1",
                     "--out", str(tmp_path / "t.csv")]) == 1
