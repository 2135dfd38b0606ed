import json
import math

import numpy as np
import pytest

from isltopo import harness
from isltopo.errors import ConfigurationError, EigenSolverError
from isltopo.graph_core import TopologyMetrics
from isltopo.harness import (
    TrialResult,
    config_from_dict,
    config_to_dict,
    load_config,
    read_results,
    read_topology,
    run_experiment,
    run_trial,
    summarize,
    write_results,
    write_topology,
)


def raw_config(**top):
    raw = dict(
        constellation=dict(
            n_planes=6, sats_per_plane=6, altitude_km=550.0,
            inclination_rad=math.radians(53), max_phase_offset_rad=math.pi / 4,
        ),
        feasibility=dict(d_max_km=5000.0),
        pga=dict(t_max=200),
        heuristic=dict(iterations=20, perturbation_size=5),
        trials=2,
        base_seed=3,
    )
    raw.update(top)
    return raw


def fake(trial, diameter, method="spectral", model="snapshot", d_max=3500.0, error=None, **kw):
    metrics = None if error else TopologyMetrics(
        diameter_hops=diameter, avg_max_hops=diameter - 0.5, n_edges=10, degree_histogram={3: 1, 4: 4},
        stability_fraction=kw.pop("sigma", 0.5),
    )
    return TrialResult(trial, 100 + trial, method, model, d_max, metrics, lambda2_final=kw.pop("lam", 0.1),
                       wall_time_s=1.0, error=error)


def test_config_round_trip(tmp_path):
    cfg = config_from_dict(raw_config(d_max_sweep=[2000, 2500]))
    assert cfg.d_max_sweep == (2000.0, 2500.0)
    assert cfg.methods == ("spectral", "heuristic")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    assert load_config(path) == cfg


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda r: r.update(trails=3), "trails"),
        (lambda r: r["pga"].update(eta=1.0), "pga.eta"),
        (lambda r: r.pop("feasibility"), "feasibility"),
        (lambda r: r.update(trials=0), "trials"),
        (lambda r: r.update(method="annealing"), "method"),
        (lambda r: r.update(d_max_sweep=[3000, 2000]), "d_max_sweep"),
        (lambda r: r["heuristic"].update(degree_budget=3), "degree_budget"),
        (lambda r: r["constellation"].update(n_planes=0), "n_planes"),
    ],
)
def test_config_errors_name_field(mutate, field):
    raw = raw_config()
    mutate(raw)
    with pytest.raises(ConfigurationError) as err:
        config_from_dict(raw)
    assert err.value.field == field


def test_yaml_exponent_literals(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(
        "constellation: {n_planes: 2, sats_per_plane: 3, altitude_km: 550, inclination_rad: 0.9,"
        " max_phase_offset_rad: 0}\nfeasibility: {d_max_km: 4e3}\npga: {eig_tol: 1e-08, t_max: 1e4}\nheuristic: {perturbation_size: 2}\n"
    )
    cfg = load_config(path)
    assert cfg.pga.eig_tol == 1e-8 and cfg.pga.t_max == 10000 and cfg.feasibility.d_max_km == 4000.0
    assert isinstance(cfg.constellation.altitude_km, float)
    path.write_text(path.read_text().replace("t_max: 1e4", "t_max: 1.5"))
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("constellation: [unclosed")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_summarize_examples():
    s = summarize([fake(i, 9.0) for i in range(3)]).group("spectral")
    d = s.metrics["diameter"]
    assert (d.min, d.max, d.mean) == (9.0, 9.0, 9.0)
    s = summarize([fake(0, 11.0), fake(1, 12.0)]).group("spectral")
    d = s.metrics["diameter"]
    assert (d.min, d.max, d.mean) == (11.0, 12.0, 11.5)
    s = summarize([fake(0, 11.0), fake(1, math.inf), fake(2, 12.0)]).group("spectral")
    assert s.disconnected_count == 1 and s.metrics["diameter"].mean == 11.5 and s.n_ok == 3
    s = summarize([fake(0, 11.0), fake(1, 0, error="eigensolver: boom")]).group("spectral")
    assert s.failed_count == 1 and s.metrics["diameter"].count == 1
    with pytest.raises(ValueError):
        summarize([fake(0, 0, error="x")])


def test_summary_groups_and_ordering():
    rows = [fake(i, 10.0 + i, d_max=d, method=m) for d in (2000.0, 3000.0) for m in ("spectral", "heuristic")
            for i in range(3)]
    stats = summarize(rows)
    assert len(stats.groups) == 4
    for g in stats.groups:
        for s in g.metrics.values():
            assert s.min <= s.mean <= s.max
    assert stats.group("heuristic", d_max_km=3000.0).metrics["diameter"].mean == 11.0


def test_write_and_read_round_trip(tmp_path):
    results = [fake(0, 9.0), fake(1, math.inf, lam=None), fake(2, 10.0, method="heuristic", sigma=None)]
    stats = summarize(results)
    written = write_results(results, stats, tmp_path / "out")
    lines = written["csv"].read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].split(",")[:12] == list(harness.CSV_COLUMNS)
    rows = read_results(written["csv"])
    for r, row in zip(results, rows):
        expected = r.row()
        for key, value in expected.items():
            assert row[key] == value, key
    assert rows[0]["latency_ms_upper"] == pytest.approx(9.0 * 3500.0 / 300.0)
    assert rows[1]["latency_ms_upper"] == math.inf
    doc = json.loads(written["json"].read_text())
    assert doc["groups"][0]["disconnected_count"] == 1
    fig = (tmp_path / "out" / "figure_diameter.csv").read_text().splitlines()
    assert fig[0] == "d_max_km,method,model,min,mean,max,count,disconnected"
    assert len(fig) == 3


def test_write_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_results([fake(0, 9.0)], summarize([fake(0, 9.0)]), blocker / "sub")


def test_heuristic_zero_iterations_is_initial_topology():
    cfg = config_from_dict(raw_config(method="heuristic", heuristic=dict(iterations=0, perturbation_size=5)))
    (res,) = run_trial(cfg, 0)
    sc = harness.build_scenario(cfg, 3)
    from isltopo.heuristic import initial_topology

    init = initial_topology(sc.edge_set, 4, np.random.default_rng(3))
    assert res.topology.selected == init.selected
    assert res.seed == 3 and res.method == "heuristic"


def test_trial_determinism_and_seed():
    cfg = config_from_dict(raw_config())
    a = run_trial(cfg, 1)
    b = run_trial(cfg, 1)
    assert [r.method for r in a] == ["spectral", "heuristic"]
    for x, y in zip(a, b):
        assert x.seed == 4
        assert x.topology.selected == y.topology.selected
        assert x.metrics == y.metrics and x.lambda2_final == y.lambda2_final


def test_spectral_trial_concentrates_at_budget():
    cfg = config_from_dict(raw_config(
        constellation=dict(n_planes=8, sats_per_plane=8, altitude_km=550.0,
                           inclination_rad=math.radians(53), max_phase_offset_rad=math.pi / 4),
        pga={}, heuristic=dict(iterations=50, perturbation_size=5), method="spectral", base_seed=0,
    ))
    (res,) = run_trial(cfg, 0)
    hist = res.metrics.degree_histogram
    assert max(hist) == 4
    assert hist[4] >= 0.9 * 64
    assert res.lambda2_final > 0


def test_failed_trial_is_recorded(monkeypatch):
    def boom(*args, **kwargs):
        raise EigenSolverError("no convergence")

    monkeypatch.setattr(harness, "run_pga", boom)
    cfg = config_from_dict(raw_config())
    spectral, heur = run_trial(cfg, 0)
    assert spectral.failed and "no convergence" in spectral.error and spectral.metrics is None
    assert not heur.failed
    results, stats = run_experiment(cfg, jobs=1)
    assert stats.group("spectral").failed_count == 2
    assert stats.group("heuristic").n_ok == 2


def test_fixed_intraplane_infeasible_is_configuration_error():
    cfg = config_from_dict(raw_config(fixed_intraplane=True, feasibility=dict(d_max_km=3500.0)))
    with pytest.raises(ConfigurationError):
        run_trial(cfg, 0)


def test_fixed_intraplane_trial():
    raw = raw_config(fixed_intraplane=True, method="both")
    raw["constellation"].update(n_planes=4, sats_per_plane=12)
    cfg = config_from_dict(raw)
    spectral, heur = run_trial(cfg, 0)
    sc = harness.build_scenario(cfg, cfg.base_seed)
    ring = frozenset(np.flatnonzero(sc.fixed_mask).tolist())
    assert len(ring) == 48
    assert ring <= spectral.topology.selected and ring <= heur.topology.selected


def test_concurrent_matches_sequential():
    cfg = config_from_dict(raw_config(trials=3, d_max_sweep=[4000.0, 5000.0]))
    seq, s1 = run_experiment(cfg, jobs=1)
    par, s2 = run_experiment(cfg, jobs=2)
    assert [r.row() | {"wall_time_s": 0} for r in seq] == [r.row() | {"wall_time_s": 0} for r in par]
    assert len(seq) == 12
    assert {g.d_max_km for g in s1.groups} == {4000.0, 5000.0}


def test_viability_trial_sigma():
    raw = raw_config(feasibility=dict(d_max_km=6000.0, model="viability"), method="heuristic")
    raw["constellation"]["sats_per_plane"] = 8
    cfg = config_from_dict(raw)
    (res,) = run_trial(cfg, 0)
    assert res.model == "viability" and res.metrics.stability_fraction == 1.0


def test_topology_file_round_trip(tmp_path):
    cfg = config_from_dict(raw_config(method="heuristic"))
    (res,) = run_trial(cfg, 0)
    path = write_topology(res.topology, tmp_path / "t.txt")
    line = path.read_text().splitlines()[0]
    assert len(line.split(",")) == 4
    back = read_topology(path, res.topology.edge_set)
    assert back.selected == res.topology.selected
    path.write_text("0,0,0,0\n")
    with pytest.raises(ValueError, match="not a feasible candidate"):
        read_topology(path, res.topology.edge_set)
    path.write_text("0,0,9,9\n")
    with pytest.raises(ValueError, match="out of range"):
        read_topology(path, res.topology.edge_set)


def test_trial_sigma_matches_per_topology_recomputation():
    from isltopo.feasibility import stability_fraction

    raw = raw_config(method="heuristic", feasibility=dict(d_max_km=6000.0))
    raw["constellation"]["sats_per_plane"] = 8
    cfg = config_from_dict(raw)
    sc = harness.build_scenario(cfg, cfg.base_seed)
    (res,) = run_trial(cfg, 0)
    direct = stability_fraction(res.topology, sc.constellation, cfg.t0_s, cfg.feasibility)
    assert res.metrics.stability_fraction == direct
    assert 0.0 < direct <= 1.0
