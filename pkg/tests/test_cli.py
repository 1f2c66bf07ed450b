import json
import math
from pathlib import Path

import pytest

from carbon_rotation import cli, output
from carbon_rotation.config import ConfigError, bundled_preset, config_from_dict, load_config, parse_text
from carbon_rotation.economics import land_value
from carbon_rotation.growth import PriceSchedule
from carbon_rotation.presets import build_problem

from conftest import brute_force_argmax

SMALL_RUN = """
species:
  pine: {}
economics: {p_c: 50}
damage: {type: fire, rate: 0.01}
run:
  simulation: {n_paths: 3000, stock_horizon: 4000}
  sweep: {p_c_values: [0, 100], lambda_values: [0, 0.01], monte_carlo: true}
  curves: {max_age: 20, decay_years: 10}
"""


def write(tmp_path: Path, text: str, name="scenario.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    return code, json.loads(capsys.readouterr().out)


# --- configuration --------------------------------------------------------------------

def test_bundled_pine_fire_preset():
    cfg = load_config(bundled_preset("pine-fire"))
    p = cfg.problem()
    assert (p.carbon.alpha, p.carbon.gamma, p.carbon.beta) == (1.29, 0.403, 0.319)
    assert p.econ.r == 0.03 and p.econ.regen_cost == 0.0
    assert cfg.damage_type == "fire" and cfg.price.kind == "age-dependent"


@pytest.mark.parametrize("name", ["pine-fire", "pine-storm", "spruce-fire", "spruce-storm", "faustmann-pine"])
def test_all_bundled_presets_validate(name):
    cfg = load_config(bundled_preset(name))
    assert cfg.mode == "solve"


def test_unknown_preset_name():
    with pytest.raises(ConfigError, match="available"):
        bundled_preset("larch-flood")


def test_empty_file_names_required_blocks(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, ""))
    for block in ("species", "economics", "damage", "run"):
        assert block in str(info.value)


def test_negative_damage_rate_is_rejected(tmp_path):
    text = SMALL_RUN.replace("rate: 0.01", "rate: -0.01")
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.field == "damage.rate"
    assert ">= 0" in str(info.value)


@pytest.mark.parametrize("bad, field", [
    ("economics: {p_c: 50, discount: 0.03}", "economics"),
    ("economics: {p_c: 50, r: 0}", "economics.r"),
    ("economics: {p_c: 50, salvage_fraction: 2}", "economics.salvage_fraction"),
    ("economics: {p_c: fifty}", "economics.p_c"),
])
def test_field_paths_in_validation_errors(tmp_path, bad, field):
    text = SMALL_RUN.replace("economics: {p_c: 50}", bad)
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.field == field


def test_unknown_nested_key(tmp_path):
    text = SMALL_RUN.replace("n_paths: 3000", "n_path: 3000")
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert info.value.field == "run.simulation"
    assert "n_path" in str(info.value)


def test_parse_error_reports_position():
    with pytest.raises(ConfigError) as info:
        parse_text("species:\n  pine: {\nrun: [")
    assert info.value.line is not None and info.value.column is not None


def test_custom_species_requires_growth_parameters():
    raw = {"species": {"larch": {"growth": {"v1": 0.1}, "carbon": {"alpha": 1.2}}},
           "economics": {}, "damage": {}, "run": {}}
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.field == "species.larch.growth.v2"


def test_custom_species_with_preset_overrides():
    raw = {"species": {"mine": {"preset": "spruce", "carbon": {"alpha": 1.5}}},
           "economics": {"p_c": 10}, "damage": {"type": "storm"}, "run": {}}
    cfg = config_from_dict(raw)
    p = cfg.problem()
    assert p.carbon.alpha == 1.5 and p.carbon.gamma == 0.508
    assert cfg.run_species == "mine"


def test_config_hash_ignores_output_dir_and_number_spelling():
    base = {"species": {"pine": None}, "economics": {"p_c": 60}, "damage": {}, "run": {}}
    a = config_from_dict(base)
    b = config_from_dict({**base, "economics": {"p_c": 60.0}, "run": {"output_dir": "/elsewhere"}})
    assert a.config_hash == b.config_hash
    c = config_from_dict({**base, "economics": {"p_c": 61}})
    assert c.config_hash != a.config_hash


# --- serialization --------------------------------------------------------------------

def test_float_formatting_is_exact_and_locale_free():
    assert output.fmt_float(0.1) == "0.10000000000000001"
    assert float(output.fmt_float(1 / 3)) == 1 / 3
    assert output.fmt_float(math.inf) == "inf"
    text = output.dumps({"b": [1, 2.5, math.inf], "a": None, "c": True})
    assert text.index('"a"') < text.index('"b"')
    assert '"inf"' in text and "2.5" in text


def test_csv_quoting(tmp_path):
    path = output.write_csv(tmp_path / "x.csv", ["a", "b"], [{"a": "x,y", "b": 0.5}, {"a": None, "b": 2}])
    assert path.read_text() == 'a,b\n"x,y",0.5\n,2\n'


# --- command line ---------------------------------------------------------------------

def test_solve_faustmann_preset(tmp_path, capsys):
    code, msg = run_cli(capsys, "solve", "--config", "faustmann-pine", "--output-dir", tmp_path)
    assert code == 0 and msg["status"] == "ok"
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert sol["regime"] == "finite"
    p = build_problem("pine", p_c=0.0, damage_rate=0.0, price=PriceSchedule.constant(60.0))
    T_bf, _ = brute_force_argmax(lambda T: land_value(p, T), 1.0, 200.0)
    assert abs(sol["T_star"] - T_bf) <= 0.05
    assert sol["config_hash"] == msg["config_hash"]
    assert sol["rng_seed"] == 0 and sol["config"]["run"]["mode"] == "solve"


def test_solution_round_trip(tmp_path, capsys):
    first, second = tmp_path / "a", tmp_path / "b"
    run_cli(capsys, "solve", "-c", "spruce-storm", "-o", first)
    code, _ = run_cli(capsys, "solve", "-c", "spruce-storm", "-o", second, "--override", first / "solution.json")
    assert code == 0
    assert (first / "solution.json").read_bytes() == (second / "solution.json").read_bytes()


def test_curves_output(tmp_path, capsys):
    code, _ = run_cli(capsys, "curves", "-c", write(tmp_path, SMALL_RUN), "-o", tmp_path)
    assert code == 0
    lines = (tmp_path / "growth_curves.csv").read_text().splitlines()
    assert lines[0] == "species,age_years,volume_m3_ha,increment_m3_ha_yr,price_eur_m3"
    assert lines[1] == "pine,0,0,0,0"
    assert len(lines) == 1 + 21
    decay = (tmp_path / "carbon_decay.csv").read_text().splitlines()
    assert decay[0] == "species,event,years_since_event,fraction_remaining"
    assert {row.split(",")[1] for row in decay[1:]} == {"storm", "fire", "harvest"}


def test_simulate_output_and_seed_override(tmp_path, capsys):
    scen = write(tmp_path, SMALL_RUN)
    code, _ = run_cli(capsys, "simulate", "-c", scen, "-o", tmp_path / "s0")
    assert code == 0
    data = json.loads((tmp_path / "s0" / "simulation.json").read_text())
    assert data["rng_seed"] == 0 and data["n_paths"] == 3000 and data["regime"] == "finite"
    run_cli(capsys, "simulate", "-c", scen, "-o", tmp_path / "s9", "--seed", 9)
    other = json.loads((tmp_path / "s9" / "simulation.json").read_text())
    assert other["rng_seed"] == 9 and other["mean_npv"] != data["mean_npv"]
    assert other["config_hash"] != data["config_hash"]
    header = (tmp_path / "s0" / "simulation.csv").read_text().splitlines()[0]
    assert header.startswith("config_hash,species,damage_type,p_c,damage_rate,regime,mean_npv")


def test_fixed_rotation_simulation(tmp_path, capsys):
    text = SMALL_RUN.replace("run:\n", "run:\n  rotation: inf\n")
    code, _ = run_cli(capsys, "simulate", "-c", write(tmp_path, text), "-o", tmp_path)
    assert code == 0
    data = json.loads((tmp_path / "simulation.json").read_text())
    assert data["regime"] == "fixed" and data["rotation_length"] == "inf" and data["avg_harvest"] == 0


def test_sweep_outputs(tmp_path, capsys):
    code, msg = run_cli(capsys, "sweep", "-c", write(tmp_path, SMALL_RUN), "-o", tmp_path)
    assert code == 0
    names = {Path(f).name for f in msg["files"]}
    assert names == {"sweep_cells.csv", "sweep_cells.json", "rotation_matrix_pine.csv", "frontier.csv",
                     "frontier.json"}
    rows = (tmp_path / "sweep_cells.csv").read_text().splitlines()
    assert len(rows) == 1 + 4
    matrix = (tmp_path / "rotation_matrix_pine.csv").read_text().splitlines()
    assert matrix[0] == "damage_rate,0,100"


def test_default_sweep_grid_is_byte_stable(tmp_path, capsys):
    text = "species: {pine: }\neconomics: {}\ndamage: {}\nrun: {sweep: {monte_carlo: false}}\n"
    scen = write(tmp_path, text)
    run_cli(capsys, "sweep", "-c", scen, "-o", tmp_path / "a")
    run_cli(capsys, "sweep", "-c", scen, "-o", tmp_path / "b")
    cells = json.loads((tmp_path / "a" / "sweep_cells.json").read_text())["cells"]
    assert len(cells) == 231
    for name in ("sweep_cells.csv", "sweep_cells.json", "frontier.csv", "rotation_matrix_pine.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "env"))
    code, _ = run_cli(capsys, "solve", "-c", "pine-fire")
    assert code == 0 and (tmp_path / "env" / "solution.json").exists()


def test_validation_failure_exit_code(tmp_path, capsys):
    code, msg = run_cli(capsys, "solve", "-c", write(tmp_path, SMALL_RUN.replace("0.01}", "-0.01}")), "-o", tmp_path)
    assert code == cli.EXIT_VALIDATION == 1
    assert msg["status"] == "error" and msg["kind"] == "validation" and msg["field"] == "damage.rate"
    code, msg = run_cli(capsys, "solve", "-c", tmp_path / "missing.yaml", "-o", tmp_path)
    assert code == 1
    code, msg = run_cli(capsys, "solve", "-c", "faustmann-pine", "--workers", 0)
    assert code == 1


def test_numerical_failure_exit_code(tmp_path, capsys):
    text = SMALL_RUN.replace("economics: {p_c: 50}", "economics: {price: {p_f_max: 1.0e+308}}")
    code, msg = run_cli(capsys, "solve", "-c", write(tmp_path, text), "-o", tmp_path)
    assert code == cli.EXIT_NUMERICAL == 2
    assert msg["kind"] == "numerical" and "not finite" in msg["message"]
