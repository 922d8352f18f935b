import json
import math

import numpy as np
import pytest

from frachardy.domain_potential import PotentialSpec, RadialDomain
from frachardy.errors import ParameterError, RegimeError
from frachardy.harness.config import KEYS, ExperimentConfig, load_config_file, parse_float_list
from frachardy.harness.experiments import (
    apriori_for,
    build_problem,
    fode_comparison_campaign,
    identity_check,
    near_extremal_profile,
    random_admissible_profile,
    run_threshold_sweep,
    run_truncation_study,
    verify_apriori,
    verify_hardy,
)
from frachardy.harness.io import SCHEMA_VERSION, OutputBundle, render_csv, render_json, sha256, to_jsonable
from frachardy.pde_radial import RadialGrid, rayleigh_quotient, solve

LAM = 1 / 27
SMALL = ExperimentConfig(m=60, steps=100)


def test_config_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert cfg.mu == pytest.approx(0.5 * LAM)
    snap = cfg.snapshot()
    assert list(snap) == sorted(snap)
    assert set(snap) == {key for key, _ in KEYS.values()}
    assert "output_dir" not in json.dumps(snap)


@pytest.mark.parametrize(
    "change",
    [
        {"alpha": 1.0},
        {"q": 1.0},
        {"p": 2.0},
        {"n": 3.0},
        {"mu_ratio": -0.1},
        {"N": 0.5},
        {"kind": "nope"},
        {"m": 1},
        {"trials": 0},
        {"horizon": math.inf},
        {"schedule": (0.5,)},
        {"step_list": (2.5,)},
        {"workers": 0},
        {"hardy_slack": 1.0},
    ],
)
def test_config_rejects_bad_values(change):
    with pytest.raises(ParameterError):
        ExperimentConfig(**change).validate()


def test_float_list_parsing():
    assert parse_float_list("1, 2;3") == (1.0, 2.0, 3.0)
    assert parse_float_list(" ") == ()
    with pytest.raises(ParameterError):
        parse_float_list("1,x")


def test_ini_loading(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[problem]\nalpha = 0.3\nN = untruncated\nboundary_exponent = printed\n[sweep]\nmu_ratios = 0.5, 2\n[grid]\nm = 40\n")
    values = load_config_file(str(path))
    assert values == {"alpha": 0.3, "N": None, "boundary_exponent": "printed", "mu_ratios": (0.5, 2.0), "m": 40}
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nbogus = 1\n")
    with pytest.raises(ParameterError, match="unknown config key"):
        load_config_file(str(bad))
    bad.write_text("[grid]\nm = ten\n")
    with pytest.raises(ParameterError, match="grid.m"):
        load_config_file(str(bad))
    with pytest.raises(ParameterError):
        load_config_file(str(tmp_path / "missing.ini"))


def test_json_and_csv_rendering_is_canonical():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), math.inf, -math.inf, math.nan], "c": np.array([0.1, 0.2]), "d": np.bool_(True)}
    text = render_json(obj).decode()
    assert json.loads(text) == {"a": [2, "inf", "-inf", "nan"], "b": 1.5, "c": [0.1, 0.2], "d": True}
    assert text.index('"a"') < text.index('"b"')
    assert render_json(obj) == render_json(dict(reversed(list(obj.items()))))
    csv = render_csv(("x", "y"), [(1, 0.1), (2, None)]).decode()
    assert csv == "x,y\n1,0.1\n2,\n"
    assert to_jsonable((1, 2)) == [1, 2]


def test_bundle_manifest_lists_every_file(tmp_path):
    bundle = OutputBundle("demo", {"problem.alpha": 0.5})
    bundle.add_json("summary.json", {"x": 1})
    bundle.add_csv("t.csv", ("a",), [(1,)])
    written = bundle.write(str(tmp_path / "out"), {"passed": True})
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["schema_version"] == SCHEMA_VERSION
    assert manifest["command"] == "demo" and manifest["verdicts"] == {"passed": True}
    assert set(manifest["outputs"]) == {"summary.json", "t.csv"}
    for name, meta in manifest["outputs"].items():
        data = (tmp_path / "out" / name).read_bytes()
        assert meta == {"sha256": sha256(data), "bytes": len(data)}
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["schema_version"] == SCHEMA_VERSION
    assert len(written) == 3
    assert not list((tmp_path / "out").glob("*.tmp"))


def test_sweep_classification_small_grids():
    low = run_threshold_sweep(SMALL.replace(mu_ratios=(0.75, 0.25, 0.5)))
    assert [c.mu_ratio for c in low.cells] == [0.25, 0.5, 0.75]
    assert all(c.status == "bounded" for c in low.cells)
    high = run_threshold_sweep(SMALL.replace(mu_ratios=(1.5, 2.0, 4.0), amplitude=50.0, N=1e5))
    for cell in high.cells:
        assert cell.status == "blow-up"
        assert cell.lambda_n < cell.mu
        assert cell.certificate["certified"]
        assert cell.blowup_time < 1.0
    table = high.table()
    assert [row["mu_ratio"] for row in table] == [1.5, 2.0, 4.0]


def test_sweep_empty_grid():
    rep = run_threshold_sweep(SMALL.replace(mu_ratios=()))
    assert rep.cells == () and rep.table() == []


def test_sweep_parallel_matches_serial():
    cfg = SMALL.replace(mu_ratios=(0.5, 2.0), amplitude=50.0)
    serial = run_threshold_sweep(cfg)
    parallel = run_threshold_sweep(cfg.replace(workers=2))
    assert render_json(serial.table()) == render_json(parallel.table())


def test_sweep_records_cell_errors(monkeypatch):
    import frachardy.harness.experiments as ex
    from frachardy.errors import SolverError

    def boom(*args, **kwargs):
        raise SolverError("synthetic failure")

    monkeypatch.setattr(ex, "solve", boom)
    rep = run_threshold_sweep(SMALL.replace(mu_ratios=(0.5, 2.0)))
    assert [c.status for c in rep.cells] == ["error", "error"]
    assert "synthetic failure" in rep.cells[0].error


def test_truncation_single_level_and_pairs():
    one = run_truncation_study(SMALL.replace(schedule=(1e3,)))
    assert one.pairs == () and one.distances_decreasing and one.max_monotonicity_violation == 0.0
    rep = run_truncation_study(SMALL.replace(schedule=(1e4, 1e2, 1e3), amplitude=2.0))
    assert rep.schedule == (1e2, 1e3, 1e4)
    assert len(rep.pairs) == 2 and not rep.errors
    assert rep.distances_decreasing
    assert rep.max_monotonicity_violation <= 1e-10


def test_verify_apriori_small_run():
    prob = build_problem(SMALL)
    constants = apriori_for(prob)
    v = verify_apriori(solve(prob), constants)
    assert v.passed and 0 < v.grad_ratio < 1 and 0 < v.lp_ratio < 1


def test_verify_apriori_zero_data():
    prob = build_problem(SMALL.replace(amplitude=0.0))
    constants = apriori_for(prob)
    v = verify_apriori(solve(prob), constants)
    assert constants.a1 == constants.a2 == 0.0
    assert v.passed and v.grad_integral == 0.0 and v.lp_integral == 0.0 and v.grad_ratio == 0.0


def test_verify_apriori_regime_checks():
    prob = build_problem(SMALL)
    constants = apriori_for(prob)
    other = build_problem(SMALL.replace(mu_ratio=0.25))
    with pytest.raises(RegimeError):
        verify_apriori(solve(other), constants)
    with pytest.raises(RegimeError):
        verify_apriori(solve(build_problem(SMALL.replace(N=100.0))), apriori_for(build_problem(SMALL.replace(N=100.0))))
    with pytest.raises(RegimeError):
        verify_apriori(solve(build_problem(SMALL.replace(horizon=0.5))), constants)
    with pytest.raises(RegimeError):
        apriori_for(build_problem(SMALL.replace(mu_ratio=2.0)))


def test_verify_apriori_ratios_stable_under_halving():
    cfg = ExperimentConfig(m=80, steps=200, grading=3.0)
    ratios = []
    for K in (200, 400):
        prob = build_problem(cfg, steps=K)
        v = verify_apriori(solve(prob), apriori_for(prob))
        ratios.append((v.grad_ratio, v.lp_ratio))
    for a, b in zip(*ratios):
        assert abs(a - b) / b < 0.05


def test_hardy_profiles():
    spec = PotentialSpec(3.0, 0.0, RadialDomain(4.0, 1.0))
    grid = RadialGrid(spec.domain, 400)
    rng = np.random.default_rng(0)
    W = grid.potential(spec)
    for _ in range(20):
        v = random_admissible_profile(grid, rng)
        assert np.all(v >= 0) and v.max() > 0
        assert np.all(v[grid.nodes >= 0.98] == 0)
        assert rayleigh_quotient(v, grid, W, 3.0) >= LAM
    near = rayleigh_quotient(near_extremal_profile(grid, spec), grid, W, 3.0)
    assert LAM <= near <= 1.2 * LAM


def test_verify_hardy_verdict_and_trials():
    spec = PotentialSpec(3.0, 0.0, RadialDomain(4.0, 1.0))
    grid = RadialGrid(spec.domain, 300)
    v = verify_hardy(spec, grid, 25, seed=4)
    assert v.passed and v.ratios.shape == (25,) and v.min_ratio == v.ratios.min()
    assert LAM <= v.near_extremal_ratio <= v.closed_form_ratio
    again = verify_hardy(spec, grid, 25, seed=4)
    assert np.array_equal(v.ratios, again.ratios)
    with pytest.raises(ParameterError):
        verify_hardy(spec, grid, 0, seed=4)


def test_fode_campaign_has_no_violations():
    results = fode_comparison_campaign(8, seed=2, steps=150, horizon=1.0)
    assert len(results) == 8
    for params, rep in results:
        assert 0.3 <= params["alpha"] <= 0.9
        assert rep.precondition_ok and rep.ordered
        # bounded slope: the implicit step is uniquely solvable
        assert rep.leading_coefficient_min > rep.lipschitz


def test_identity_check_orders():
    rep = identity_check(0.5)
    assert rep.steps == (128, 256, 512)
    assert len(rep.orders) == 2 and rep.min_order >= 0.8
    assert math.isnan(identity_check(0.5, steps=(64,)).min_order)
