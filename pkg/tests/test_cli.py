import csv

import pytest

from rssinav.cli import main

ONE_CELL = (
    "Cell 01 - Address: AA:BB:CC:DD:EE:0{i}\n"
    '          ESSID:"CSU Net"\n'
    "          Signal level={level} dBm\n"
)


def write_scan_dir(tmp_path):
    scans = tmp_path / "scans"
    scans.mkdir()
    for (x, y), base in (((0, 0), -52), ((4, 0), -63)):
        for rep in range(3):
            text = "".join(
                ONE_CELL.format(i=i, level=base - 3 * i + rep) for i in (1, 2)
            )
            (scans / f"{x}_{y}_{rep}.txt").write_text(text)
    return scans


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """world + dataset + trained model, built once through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    world = root / "world.txt"
    dataset = root / "dataset.csv"
    model = root / "model.bin"
    assert main(["make-world", "-o", str(world)]) == 0
    assert main(["make-dataset", str(world), "-o", str(dataset)]) == 0
    assert main(["train", str(dataset), "-o", str(model), "--epochs", "150", "--seed", "3"]) == 0
    return root, world, dataset, model


class TestIngest:
    def test_fixture_directory(self, tmp_path, capsys):
        scans = write_scan_dir(tmp_path)
        out = tmp_path / "ds.csv"
        assert main(["ingest", str(scans), "-o", str(out)]) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["AA:BB:CC:DD:EE:01", "AA:BB:CC:DD:EE:02", "x", "y"]
        assert len(rows) == 3  # header + 2 locations
        assert "2 rows" in capsys.readouterr().out

    def test_no_aggregate_keeps_resamples(self, tmp_path):
        scans = write_scan_dir(tmp_path)
        out = tmp_path / "ds.csv"
        assert main(["ingest", str(scans), "-o", str(out), "--no-aggregate"]) == 0
        assert len(list(csv.reader(out.open()))) == 7  # header + 2 locations x 3 reps

    def test_ssid_allowlist_flag(self, tmp_path):
        scans = write_scan_dir(tmp_path)
        (scans / "9_9_0.txt").write_text('Cell 01 - Address: 99:00:00:00:00:01\nESSID:"Hotspot"\nSignal level=-30 dBm\n')
        out = tmp_path / "ds.csv"
        assert main(["ingest", str(scans), "-o", str(out), "--ssid", "CSU Net"]) == 0
        header = next(csv.reader(out.open()))
        assert "99:00:00:00:00:01" not in header

    def test_empty_directory_fails(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["ingest", str(empty), "-o", str(tmp_path / "ds.csv")]) == 1
        assert "no scan files found" in capsys.readouterr().err
        assert not (tmp_path / "ds.csv").exists()

    def test_malformed_file_named_in_diagnostics(self, tmp_path, capsys):
        scans = write_scan_dir(tmp_path)
        bad = scans / "1_1_0.txt"
        bad.write_text(ONE_CELL.format(i=1, level=-50) * 2)  # duplicate MAC
        assert main(["ingest", str(scans), "-o", str(tmp_path / "ds.csv")]) == 1
        assert "1_1_0.txt" in capsys.readouterr().err
        assert not (tmp_path / "ds.csv").exists()


class TestTrainEvaluate:
    def test_train_writes_model_and_report(self, workspace, capsys):
        root, _, _, model = workspace
        assert model.exists()
        assert (root / "model.bin.report.csv").exists()

    def test_train_is_byte_deterministic(self, workspace, tmp_path):
        _, _, dataset, _ = workspace
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        for out in (a, b):
            assert main(["train", str(dataset), "-o", str(out), "--epochs", "40", "--seed", "7"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.bin.report.csv").read_bytes() == (tmp_path / "b.bin.report.csv").read_bytes()

    def test_missing_dataset_fails_without_outputs(self, tmp_path, capsys):
        out = tmp_path / "model.bin"
        assert main(["train", str(tmp_path / "nope.csv"), "-o", str(out)]) == 1
        assert not out.exists()

    def test_evaluate_scatter_rows_match_dataset(self, workspace, tmp_path, capsys):
        _, _, dataset, model = workspace
        scatter = tmp_path / "scatter.csv"
        assert main(["evaluate", str(model), str(dataset), "-o", str(scatter)]) == 0
        rows = list(csv.reader(scatter.open()))
        assert rows[0] == ["x_true", "y_true", "x_pred", "y_pred"]
        assert len(rows) - 1 == 95
        printed = capsys.readouterr().out
        assert "normalized MAE" in printed and "mean error" in printed

    def test_evaluate_on_training_rows_beats_recorded_heldout_error(self, trained):
        from rssinav.cli import evaluate_bundle

        bundle, report, split = trained
        mae_on_train, _, _ = evaluate_bundle(bundle, split.train)
        assert mae_on_train <= report.test_mae_norm

    def test_evaluate_incompatible_dataset_fails(self, workspace, tmp_path, capsys):
        _, _, _, model = workspace
        other = tmp_path / "other.csv"
        other.write_text("FF:00:00:00:00:01,x,y\n-50,1,2\n")
        assert main(["evaluate", str(model), str(other)]) == 1
        assert "missing feature columns" in capsys.readouterr().err


class TestPlan:
    def test_plan_csv(self, workspace, tmp_path, capsys):
        root, world, _, _ = workspace
        map_file = tmp_path / "map.txt"
        map_file.write_text("".join(world.read_text().splitlines(keepends=True)[:13]))
        out = tmp_path / "plan.csv"
        assert main(["plan", str(map_file), "--start", "0,0", "--goal", "11,3", "-o", str(out)]) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["ix", "iy", "action"]
        assert rows[-1][2] == "stop"
        assert "cost 14" in capsys.readouterr().out

    def test_no_route_fails(self, workspace, tmp_path, capsys):
        _, world, _, _ = workspace
        map_file = tmp_path / "map.txt"
        map_file.write_text("".join(world.read_text().splitlines(keepends=True)[:13]))
        assert main(["plan", str(map_file), "--start", "0,0", "--goal", "11,11"]) == 1


class TestSimulateNavigate:
    def test_oracle_simulate_rate_printed(self, workspace, tmp_path, capsys):
        _, world, _, _ = workspace
        out = tmp_path / "trials.csv"
        assert main(["simulate", str(world), "--oracle", "--trials", "3", "-o", str(out)]) == 0
        assert "success rate: 3/3 = 1.00" in capsys.readouterr().out
        assert len(list(csv.reader(out.open()))) == 4

    def test_simulate_is_deterministic(self, workspace, tmp_path):
        _, world, _, model = workspace
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main(["simulate", str(world), str(model), "--trials", "1", "--seed", "7", "-o", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_model_required_without_oracle(self, workspace, capsys):
        _, world, _, _ = workspace
        assert main(["simulate", str(world), "--trials", "1"]) == 2
        assert "model file is required" in capsys.readouterr().err

    def test_navigate_writes_logs(self, workspace, tmp_path, capsys):
        _, world, _, _ = workspace
        prefix = str(tmp_path / "run")
        code = main(["navigate", str(world), "--oracle", "--out-prefix", prefix])
        assert code == 0
        for suffix in ("_trajectory.csv", "_fixes.csv", "_commands.csv"):
            assert (tmp_path / f"run{suffix}").exists()
        commands = list(csv.reader(open(prefix + "_commands.csv")))
        assert commands[0] == ["timestamp", "left_speed", "right_speed", "duration", "reason"]
        assert commands[-1][4] == "stop"

    def test_unreachable_goal_fails(self, workspace, capsys):
        _, world, _, _ = workspace
        assert main(["simulate", str(world), "--oracle", "--trials", "1", "--goal", "11,11"]) == 1


class TestHelp:
    @pytest.mark.parametrize(
        "command",
        ["ingest", "select-features", "train", "evaluate", "plan", "make-world", "make-dataset", "simulate", "navigate"],
    )
    def test_every_subcommand_documents_its_flags(self, command, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main([command, "--help"])
        assert exc_info.value.code == 0
        assert "--config" in capsys.readouterr().out


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, workspace, tmp_path, capsys):
        _, world, dataset, _ = workspace
        config = tmp_path / "run.conf"
        config.write_text("# training setup\nepochs = 10\nseed = 5\nthreshold = 0.24\n")
        out = tmp_path / "m.bin"
        assert main(["train", str(dataset), "-o", str(out), "--config", str(config), "--epochs", "12"]) == 0
        report = list(csv.reader((tmp_path / "m.bin.report.csv").open()))
        assert len(report) - 1 == 12  # the flag beat the config file

    def test_unknown_config_key_rejected(self, workspace, tmp_path, capsys):
        _, _, dataset, _ = workspace
        config = tmp_path / "bad.conf"
        config.write_text("epohcs = 10\n")
        assert main(["train", str(dataset), "-o", str(tmp_path / "m.bin"), "--config", str(config)]) == 1
        assert "unknown config key" in capsys.readouterr().err
