from pathlib import Path

import pandas as pd
import pytest

from commpd.cli import main
from commpd.io import ConfigError, parse_config, read_dataset, read_manifest
from planted import write_planted

CANONICAL = Path(__file__).parents[1] / "src" / "commpd" / "data" / "canonical.ini"

GOOD_SECTION = """[Comm70]
T = 100
R = 90
P = 80
S = 70
delta = 0.75
communication = true
graphs = 5
belief_mean_sg1 = 81.51
belief_sd_sg1 = 23.83
belief_mean_sg5 = 81.80
belief_sd_sg5 = 23.25
"""


def files_in(d: Path):
    return sorted(p.name for p in d.iterdir()) if d.exists() else []


class TestPredict:
    def test_high_loss_game(self, capsys):
        assert main(["predict", "100", "90", "80", "70", "0.75"]) == 0
        out = capsys.readouterr().out
        assert "delta_pd       0.5000" in out
        assert "delta_rd       0.6667" in out
        assert "threshold_p    0.3333" in out

    def test_low_payoff_game(self, capsys):
        assert main(["predict", "100", "90", "80", "0", "0.75", "--p", "0.75"]) == 0
        out = capsys.readouterr().out
        assert "delta_rd       0.9000" in out and "threshold_p    0.8000" in out
        assert "delta_plus     0.7857" in out

    def test_never(self, capsys):
        assert main(["predict", "100", "90", "80", "70", "0.4"]) == 0
        assert "threshold_p    never" in capsys.readouterr().out

    def test_invalid_pd(self, capsys):
        assert main(["predict", "100", "90", "80", "95", "0.75"]) == 2
        assert "P>S" in capsys.readouterr().err

    def test_bad_arguments(self):
        assert main(["predict", "x", "90", "80", "70", "0.75"]) == 2


class TestConfig:
    def test_unknown_key_has_line(self):
        with pytest.raises(ConfigError, match=r"cfg:3: unknown key"):
            parse_config("[Comm70]\nT = 100\nbogus = 1\n", "cfg", master_seed=1)

    def test_bad_number_has_line(self):
        text = GOOD_SECTION.replace("graphs = 5", "graphs = five")
        with pytest.raises(ConfigError, match=r"cfg:8:"):
            parse_config(text, "cfg", master_seed=1)

    def test_missing_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config(GOOD_SECTION, "cfg")

    def test_section_seed_mixes_with_master(self):
        a = parse_config(GOOD_SECTION + "seed = 4\n", "cfg", master_seed=1)[0]
        assert a.rng_seed == (1, 4)

    def test_payoff_mismatch(self):
        with pytest.raises(ConfigError, match="communication"):
            parse_config(GOOD_SECTION.replace("S = 70", "S = 0"), "cfg", master_seed=1)


class TestSimulate:
    def test_outputs_and_determinism(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", str(CANONICAL), str(a), "--seed", "5"]) == 0
        assert main(["simulate", str(CANONICAL), str(b), "--seed", "5"]) == 0
        assert a.read_bytes() == b.read_bytes()
        man = read_manifest(tmp_path / "a.csv.manifest")
        assert man["master_seed"] == "5" and man["output.a.csv"].startswith("sha256:")
        df = read_dataset(a)
        assert set(df["treatment"]) == {"NoComm70", "NoComm0", "Comm70", "Comm0"}

    def test_round_one_count(self, tmp_path):
        cfg = CANONICAL.read_text().replace("graphs = 7", "graphs = 5")
        (tmp_path / "c.ini").write_text(cfg)
        assert main(["simulate", str(tmp_path / "c.ini"), str(tmp_path / "o.csv"), "--seed", "1"]) == 0
        df = read_dataset(tmp_path / "o.csv")
        assert len(df[(df["supergame"] == 1) & (df["round"] == 1)]) == 120

    def test_seed_required(self, tmp_path):
        assert main(["simulate", str(CANONICAL), str(tmp_path / "o.csv")]) == 2
        assert files_in(tmp_path) == []

    def test_missing_config(self, tmp_path):
        assert main(["simulate", str(tmp_path / "no.ini"), str(tmp_path / "o.csv"), "--seed", "1"]) == 3
        assert files_in(tmp_path) == []

    def test_bad_config_leaves_nothing(self, tmp_path, capsys):
        (tmp_path / "c.ini").write_text(GOOD_SECTION.replace("delta = 0.75", "delta = 1.5"))
        out = tmp_path / "out"
        assert main(["simulate", str(tmp_path / "c.ini"), str(out / "o.csv"), "--seed", "1"]) == 2
        assert "delta" in capsys.readouterr().err
        assert files_in(out) == []


class TestAnalyze:
    def test_report(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        main(["simulate", str(CANONICAL), str(data), "--seed", "2"])
        assert main(["analyze", str(data), "--out-dir", str(tmp_path / "an")]) == 0
        assert files_in(tmp_path / "an") == [
            "analyze.manifest", "beliefs.csv", "cooperation_all_rounds.csv",
            "cooperation_first_round.csv", "tests.csv"]
        tests = pd.read_csv(tmp_path / "an" / "tests.csv")
        assert len(tests) == 28

    def test_no_beliefs_notice(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        main(["simulate", str(CANONICAL), str(data), "--seed", "2"])
        df = pd.read_csv(data, dtype=str, keep_default_na=False)
        df["belief"] = ""
        df.to_csv(data, index=False)
        assert main(["analyze", str(data)]) == 0
        assert "belief summary skipped" in capsys.readouterr().out

    def test_schema_error_names_row(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        main(["simulate", str(CANONICAL), str(data), "--seed", "2"])
        lines = data.read_text().splitlines()
        lines[3] = lines[3].replace(",A,", ",Q,", 1)
        data.write_text("\n".join(lines) + "\n")
        assert main(["analyze", str(data)]) == 2
        assert "row 4" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["analyze", str(tmp_path / "none.csv")]) == 3


class TestClusterChats:
    def run(self, tmp_path, *extra, seed="3"):
        corpus, emb, _ = write_planted(tmp_path / "in")
        out = tmp_path / "out"
        code = main(["cluster-chats", str(corpus), str(emb), "--seed", seed,
                     "--out-dir", str(out), *extra])
        return code, out

    def test_auto(self, tmp_path):
        code, out = self.run(tmp_path)
        assert code == 0
        assert files_in(out) == ["assignments.csv", "cluster.manifest",
                                 "rrd_report.csv", "wcss_curve.csv"]
        assert read_manifest(out / "cluster.manifest")["k"] == "2"
        rrd = pd.read_csv(out / "rrd_report.csv")
        assert list(rrd.columns) == ["token", "r1", "r2", "rrd1", "rrd2", "distinguishing"]

    def test_k1_has_no_rrd(self, tmp_path):
        code, out = self.run(tmp_path, "--k", "1")
        assert code == 0
        assert "rrd_report.csv" not in files_in(out)
        assert set(pd.read_csv(out / "assignments.csv")["cluster"]) == {0}

    def test_missing_embeddings(self, tmp_path):
        corpus, _, _ = write_planted(tmp_path / "in")
        out = tmp_path / "out"
        code = main(["cluster-chats", str(corpus), str(tmp_path / "none.vec"), "--seed", "1",
                     "--out-dir", str(out)])
        assert code == 3 and files_in(out) == []

    def test_no_overlap(self, tmp_path, capsys):
        corpus, _, _ = write_planted(tmp_path / "in")
        (tmp_path / "other.vec").write_text("1 2\nzzz 1 2\n")
        out = tmp_path / "out"
        code = main(["cluster-chats", str(corpus), str(tmp_path / "other.vec"), "--seed", "1",
                     "--out-dir", str(out)])
        assert code == 2 and files_in(out) == []
        assert "embedding vocabulary" in capsys.readouterr().err

    def test_seed_required(self, tmp_path):
        corpus, emb, _ = write_planted(tmp_path / "in")
        assert main(["cluster-chats", str(corpus), str(emb), "--out-dir", str(tmp_path)]) == 2

    def test_designated_pair(self, tmp_path):
        code, out = self.run(tmp_path, "--k", "3", "--rrd-clusters", "0,2")
        assert code == 0 and "rrd_report.csv" in files_in(out)
