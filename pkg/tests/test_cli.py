import json

import pytest

from epimc.cli import main


@pytest.fixture()
def attack_files(tmp_path):
    out = tmp_path / "out"
    code = main(
        [
            "scenario", "coordinated_attack",
            "--param", "k_legs=2", "--param", "horizon=3",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out / "coordinated_attack.system.json", out / "coordinated_attack.manifest.json"


def test_eval_all_points_exits_zero(attack_files, capsys):
    system, _ = attack_files
    code = main(
        ["eval", "--system", str(system), "--formula", "C{0,1} both_attack",
         "--all", "--no-timing"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("F  ") == out.count("\n")  # false everywhere


def test_eval_single_point_json(attack_files, capsys):
    system, _ = attack_files
    code = main(
        ["eval", "--system", str(system), "--formula", "prefav",
         "--point", "c1@0", "--format", "json", "--no-timing"]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["results"] == [{"point": "c1@0", "holds": False}]


def test_eval_agent_out_of_range_exits_one(attack_files, capsys):
    system, _ = attack_files
    code = main(
        ["eval", "--system", str(system), "--formula", "K9 prefav",
         "--all", "--no-timing"]
    )
    assert code == 1
    assert "agent 9" in capsys.readouterr().err


def test_eval_bad_formula_exits_one(attack_files, capsys):
    system, _ = attack_files
    code = main(
        ["eval", "--system", str(system), "--formula", "K1 &", "--all"]
    )
    assert code == 1
    assert "position" in capsys.readouterr().err


def test_missing_file_exits_two(capsys):
    code = main(["eval", "--system", "/nonexistent.json", "--formula", "p", "--all"])
    assert code == 2


def test_verify_passes_and_fails(attack_files, tmp_path, capsys):
    _, manifest = attack_files
    assert main(["verify", "--manifest", str(manifest), "--no-timing"]) == 0
    capsys.readouterr()
    doc = json.loads(manifest.read_text())
    doc["expectations"].append(
        {"formula": "prefav", "point": None, "expected": True, "note": "broken"}
    )
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code = main(["verify", "--manifest", str(bad), "--no-timing"])
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL prefav" in out


def test_verify_lists_every_failing_expectation(attack_files, tmp_path, capsys):
    _, manifest = attack_files
    doc = json.loads(manifest.read_text())
    doc["expectations"] = [
        {"formula": "prefav", "point": None, "expected": True, "note": ""},
        {"formula": "both_attack", "point": "c1@0", "expected": True, "note": ""},
    ]
    bad = tmp_path / "bad2.json"
    bad.write_text(json.dumps(doc))
    code = main(["verify", "--manifest", str(bad), "--no-timing"])
    out = capsys.readouterr().out
    assert code == 1
    assert out.count("FAIL") == 2


def test_check_and_graph(attack_files, tmp_path, capsys):
    system, _ = attack_files
    assert main(["check", "--system", str(system), "--which", "ng1", "--no-timing"]) == 0
    assert main(["check", "--system", str(system), "--which", "ng2", "--no-timing"]) == 0
    dot = tmp_path / "g.dot"
    assert main(["graph", "--system", str(system), "--group", "0,1", "--out", str(dot)]) == 0
    assert dot.read_text().startswith("graph indistinguishability")


def test_axioms_subcommand(attack_files, capsys):
    system, _ = attack_files
    code = main(
        ["axioms", "--system", str(system), "--props", "prefav,sent_1",
         "--max-k", "2", "--no-timing"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "INFO" in out


def test_output_is_deterministic(attack_files, capsys):
    system, _ = attack_files
    argv = ["eval", "--system", str(system), "--formula", "E{0,1} prefav",
            "--all", "--no-timing"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second


def test_scenario_unknown_name_exits_two(tmp_path, capsys):
    assert main(["scenario", "nope", "--out", str(tmp_path)]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_scenario_bad_params_exit_two(tmp_path, capsys):
    assert main(
        ["scenario", "muddy_children", "--param", "bogus=1", "--out", str(tmp_path)]
    ) == 2
