"""End-to-end CLI behavior on the shipped fixture files."""

import json

import pytest

from cobar import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEvaluate:
    def test_report_structure(self, data_dir, tmp_path, capsys):
        out = tmp_path / "report.json"
        code, stdout, _ = run_cli(
            capsys,
            "evaluate",
            "--data", str(data_dir / "two_clusters.tsv"),
            "--algos", "cobar,mp",
            "--folds", "5",
            "--seed", "42",
            "--out", str(out),
        )
        assert code == 0
        assert "cobar" in stdout and "mp" in stdout
        payload = json.loads(out.read_text())
        assert payload["folds"] == 5
        assert len(payload["results"]["cobar"]["fold_rmse"]) == 5
        assert len(payload["wilcoxon"]) == 1

    def test_missing_file_names_path(self, capsys):
        code, _, stderr = run_cli(capsys, "evaluate", "--data", "/nope/missing.tsv", "--algos", "mp")
        assert code != 0
        assert "/nope/missing.tsv" in stderr

    def test_deterministic_reports(self, data_dir, tmp_path, capsys):
        args = [
            "evaluate",
            "--data", str(data_dir / "two_clusters.tsv"),
            "--algos", "cobar,mp,mf",
            "--folds", "4",
            "--seed", "7",
        ]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run_cli(capsys, *args, "--out", str(a))[0] == 0
        assert run_cli(capsys, *args, "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_algorithm_fails(self, data_dir, capsys):
        code, _, stderr = run_cli(
            capsys, "evaluate", "--data", str(data_dir / "two_clusters.tsv"), "--algos", "zz"
        )
        assert code != 0
        assert "unknown algorithm" in stderr

    def test_clustering_budget_guard(self, data_dir, capsys, monkeypatch):
        monkeypatch.setattr(cli, "MAX_CLUSTERING_USERS", 3)
        with pytest.raises(SystemExit) as exc:
            cli.main(["evaluate", "--data", str(data_dir / "two_clusters.tsv"), "--algos", "cobar"])
        assert "--max-users" in str(exc.value)

    def test_max_users_subsampling_unlocks_run(self, data_dir, capsys, monkeypatch):
        monkeypatch.setattr(cli, "MAX_CLUSTERING_USERS", 6)
        code, stdout, _ = run_cli(
            capsys,
            "evaluate",
            "--data", str(data_dir / "two_clusters.tsv"),
            "--algos", "cobar,mp",
            "--folds", "3",
            "--max-users", "6",
        )
        assert code == 0

    def test_budget_ignored_without_cobar(self, data_dir, capsys, monkeypatch):
        monkeypatch.setattr(cli, "MAX_CLUSTERING_USERS", 3)
        code, _, _ = run_cli(
            capsys,
            "evaluate",
            "--data", str(data_dir / "two_clusters.tsv"),
            "--algos", "mp",
            "--folds", "3",
        )
        assert code == 0


class TestPredict:
    def test_worked_example_output(self, data_dir, capsys):
        code, stdout, _ = run_cli(
            capsys,
            "predict",
            "--data", str(data_dir / "demo.tsv"),
            "--user", "1",
            "--item", "100",
        )
        assert code == 0
        assert "predicted rating : 3.1000" in stdout
        assert "user mean        : 3.4000" in stdout
        assert "cluster mean     : 2.8000" in stdout
        assert "3 users" in stdout
        assert "0.5000" in stdout

    def test_gamma_zero_is_cluster_mean(self, data_dir, capsys):
        code, stdout, _ = run_cli(
            capsys,
            "predict",
            "--data", str(data_dir / "demo.tsv"),
            "--user", "1",
            "--item", "100",
            "--gamma", "0",
        )
        assert code == 0
        assert "predicted rating : 2.8000" in stdout

    def test_single_rating_fallback_reported(self, tmp_path, capsys):
        path = tmp_path / "single.tsv"
        path.write_text("a\tx\t4.0\na\tw\t2.0\nb\ty\t1.0\nb\tw\t3.0\n")
        code, stdout, _ = run_cli(
            capsys,
            "predict",
            "--data", str(path),
            "--user", "b",
            "--item", "x",   # rated once, by a only
        )
        assert code == 0
        assert "fallback         : single_rating" in stdout
        assert "predicted rating : 2.0000" in stdout   # b's mean of {1, 3}

    def test_unknown_user_errors(self, data_dir, capsys):
        code, _, stderr = run_cli(
            capsys,
            "predict",
            "--data", str(data_dir / "demo.tsv"),
            "--user", "nobody",
            "--item", "100",
        )
        assert code != 0
        assert "nobody" in stderr

    def test_dendrogram_export(self, data_dir, tmp_path, capsys):
        out = tmp_path / "tree.txt"
        code, _, _ = run_cli(
            capsys,
            "predict",
            "--data", str(data_dir / "demo.tsv"),
            "--user", "1",
            "--item", "100",
            "--dendrogram-out", str(out),
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 4   # 5 users -> 4 merges
        for line in lines:
            parts = line.split()
            assert len(parts) == 4
            float(parts[2])


class TestParsing:
    def test_comma_delimiter_flag(self, tmp_path, capsys):
        path = tmp_path / "c.csv"
        path.write_text("u1,i1,3.0\nu1,i2,4.0\nu2,i1,2.0\nu2,i2,1.0\n")
        code, stdout, _ = run_cli(
            capsys,
            "predict",
            "--data", str(path),
            "--delimiter", "comma",
            "--user", "u1",
            "--item", "i1",
        )
        assert code == 0

    def test_parse_error_reported(self, tmp_path, capsys):
        path = tmp_path / "bad.tsv"
        path.write_text("u1\ti1\tgood\n")
        code, _, stderr = run_cli(capsys, "evaluate", "--data", str(path), "--algos", "mp")
        assert code != 0
        assert "line 1" in stderr
