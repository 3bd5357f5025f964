import csv
import math

import numpy as np
import pytest

from rankabstain.cli import (EXIT_BOUND_VIOLATION, EXIT_OK, EXIT_VALIDATION,
                             FAULT_ENV, main, parse_config)
from rankabstain.distribution import GeneralDistribution, dumps_general


def read_csv(path):
    with open(path) as f:
        rows = [r for r in csv.reader(f) if not r or not r[0].startswith("#")]
    return rows[0], rows[1:]


@pytest.fixture()
def workspace(tmp_path):
    # single-pair deterministic distribution: empirical sample == distribution
    d = GeneralDistribution(np.array([[-0.4, 0.0]]), np.array([[0.4, 0.0]]),
                            np.array([1.0]), np.array([1.0]))
    dist = tmp_path / "dist.txt"
    dist.write_text(dumps_general(d))
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(
        f"setting = general\n"
        f"distribution = {dist}\n"
        f"phi.kind = hinge\n"
        f"abstention.gamma = 0.1\n"
        f"abstention.cost = 0.2\n"
        f"train.epochs = 25\n"
        f"train.n_samples = 64\n"
    )
    return tmp_path, cfg, d


class TestParseConfig:
    def test_parses_dotted_keys_and_comments(self):
        cfg = parse_config("a.b = 1 # comment\n\n# full comment\nc = x y\n")
        assert cfg == {"a.b": "1", "c": "x y"}

    def test_rejects_missing_equals(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_config("a = 1\nnot a pair\n")


class TestTrainEval:
    def test_round_trip_risk_matches_best_trace_entry(self, workspace):
        tmp, cfg, d = workspace
        assert main(["train", "--config", str(cfg), "--out", str(tmp / "t"),
                     "--seed", "1", "--reproducible"]) == EXIT_OK
        header, rows = read_csv(tmp / "t" / "loss_trace.csv")
        assert header == ["epoch", "mean_surrogate_loss", "mean_target_abstention_loss"]
        best_trace = min(float(r[1]) for r in rows)
        cfg_eval = tmp / "cfg_eval.txt"
        cfg_eval.write_text(cfg.read_text() + f"model.path = {tmp / 't' / 'model.txt'}\n")
        assert main(["eval", "--config", str(cfg_eval), "--out", str(tmp / "e"),
                     "--reproducible"]) == EXIT_OK
        header, rows = read_csv(tmp / "e" / "risk_report.csv")
        surr = [r for r in rows if r[0] == "surrogate"][0]
        assert float(surr[header.index("expected_risk")]) == \
            pytest.approx(best_trace, abs=1e-10)

    def test_eval_gamma_zero_matches_gamma_below_min_distance(self, workspace):
        tmp, cfg, d = workspace
        main(["train", "--config", str(cfg), "--out", str(tmp / "t"),
              "--reproducible"])
        base = cfg.read_text().replace("abstention.gamma = 0.1", "")
        for name, gamma in (("z", 0.0), ("s", 0.3)):  # pair distance is 0.8
            c = tmp / f"cfg_{name}.txt"
            c.write_text(base + f"abstention.gamma = {gamma}\n"
                         f"model.path = {tmp / 't' / 'model.txt'}\n")
            main(["eval", "--config", str(c), "--out", str(tmp / name),
                  "--reproducible"])
        ha, ra = read_csv(tmp / "z" / "risk_report.csv")
        hb, rb = read_csv(tmp / "s" / "risk_report.csv")
        gi = ha.index("gamma")
        strip = lambda rows: [[v for i, v in enumerate(r) if i != gi] for r in rows]
        assert ha == hb
        assert strip(ra) == strip(rb)  # identical apart from the gamma column

    def test_missing_distribution_is_validation_error(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("setting = general\ndistribution = /nonexistent\n")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == \
            EXIT_VALIDATION

    def test_bad_config_value_is_validation_error(self, workspace):
        tmp, cfg, _ = workspace
        bad = tmp / "bad.txt"
        bad.write_text(cfg.read_text().replace("phi.kind = hinge", "phi.kind = cubic"))
        assert main(["train", "--config", str(bad), "--out", str(tmp)]) == \
            EXIT_VALIDATION


class TestSweep:
    @pytest.fixture()
    def sweep_out(self, workspace):
        tmp, cfg, d = workspace
        sweep_cfg = tmp / "sweep.txt"
        sweep_cfg.write_text(
            cfg.read_text()
            + "abstention.gamma_list = 0.0 0.3 0.9\n"  # pair distance is 0.8
            + "abstention.cost_list = 0.1 0.3 0.5\n"
            + "sweep.seeds = 1 2\n")
        assert main(["sweep", "--config", str(sweep_cfg), "--out", str(tmp / "s"),
                     "--reproducible"]) == EXIT_OK
        header, rows = read_csv(tmp / "s" / "sweep.csv")
        return header, rows

    def test_gamma_zero_column_independent_of_cost(self, sweep_out):
        _, rows = sweep_out
        zero = [r for r in rows if float(r[0]) == 0.0]
        assert len({r[2] for r in zero}) == 1

    def test_gamma_below_min_distance_equals_gamma_zero(self, sweep_out):
        _, rows = sweep_out
        by_gamma = {}
        for r in rows:
            by_gamma.setdefault(float(r[0]), []).append((r[1], r[2], r[3]))
        assert by_gamma[0.3] == by_gamma[0.0]

    def test_full_abstention_cells_equal_cost(self, sweep_out):
        _, rows = sweep_out
        for r in rows:
            if float(r[0]) == 0.9:  # larger than the only pair distance
                assert float(r[2]) == pytest.approx(float(r[1]))

    def test_strictly_increasing_in_cost_with_abstain_mass(self, sweep_out):
        _, rows = sweep_out
        cells = sorted((float(r[1]), float(r[2])) for r in rows if float(r[0]) == 0.9)
        assert all(a[1] < b[1] for a, b in zip(cells, cells[1:]))

    def test_unsorted_gamma_list_rejected(self, workspace):
        tmp, cfg, _ = workspace
        bad = tmp / "bad.txt"
        bad.write_text(cfg.read_text() + "abstention.gamma_list = 0.5 0.1\n")
        assert main(["sweep", "--config", str(bad), "--out", str(tmp)]) == \
            EXIT_VALIDATION


class TestVerifyBounds:
    def make_cfg(self, tmp, extra=""):
        cfg = tmp / "verify.txt"
        cfg.write_text(
            "setting = general\nphi.kind = exponential\n"
            "verify.n_distributions = 2\nverify.n_hypotheses = 4\n"
            "abstention.gamma_list = 0.2 0.5\nabstention.cost_list = 0.1 0.5\n"
            + extra)
        return cfg

    def test_campaign_holds(self, tmp_path):
        cfg = self.make_cfg(tmp_path)
        assert main(["verify-bounds", "--config", str(cfg), "--seed", "3",
                     "--out", str(tmp_path / "v"), "--reproducible"]) == EXIT_OK
        header, rows = read_csv(tmp_path / "v" / "bound_report.csv")
        assert all(r[header.index("holds")] == "true" for r in rows)
        assert all(float(r[header.index("slack")]) >= -1e-6 for r in rows)
        assert len(rows) == 2 * 4 * 2 * 2

    def test_injected_fault_detected(self, tmp_path, monkeypatch):
        cfg = self.make_cfg(tmp_path)
        monkeypatch.setenv(FAULT_ENV, "0.01")
        assert main(["verify-bounds", "--config", str(cfg), "--seed", "3",
                     "--out", str(tmp_path / "vf"), "--reproducible"]) == \
            EXIT_BOUND_VIOLATION
        import rankabstain.bounds as bounds_mod
        assert bounds_mod._FAULT_RHS_SCALE == 1.0  # hook reset after the run

    def test_bad_variant_rejected(self, tmp_path):
        cfg = self.make_cfg(tmp_path, "verify.variant = folklore\n")
        assert main(["verify-bounds", "--config", str(cfg),
                     "--out", str(tmp_path)]) == EXIT_VALIDATION


class TestNegativeDemo:
    def test_general_table(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("setting = general\nphi.kind = exponential\n")
        assert main(["negative-demo", "--config", str(cfg),
                     "--out", str(tmp_path), "--reproducible"]) == EXIT_OK
        header, rows = read_csv(tmp_path / "negative_report.csv")
        i_t = header.index("target_excess")
        i_r = header.index("abstention_remedy_excess")
        assert all(float(r[i_t]) == 1.0 for r in rows)
        assert all(float(r[i_r]) == 0.0 for r in rows)

    def test_bipartite_half(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("setting = bipartite\nphi.kind = hinge\n")
        main(["negative-demo", "--config", str(cfg), "--out", str(tmp_path),
              "--reproducible"])
        header, rows = read_csv(tmp_path / "negative_report.csv")
        assert all(float(r[header.index("target_excess")]) == 0.5 for r in rows)


class TestReproducibility:
    def test_reproducible_reruns_byte_identical(self, workspace):
        tmp, cfg, _ = workspace
        for out in ("r1", "r2"):
            main(["train", "--config", str(cfg), "--out", str(tmp / out),
                  "--seed", "5", "--reproducible"])
        assert (tmp / "r1" / "loss_trace.csv").read_bytes() == \
            (tmp / "r2" / "loss_trace.csv").read_bytes()
        assert (tmp / "r1" / "model.txt").read_bytes() == \
            (tmp / "r2" / "model.txt").read_bytes()

    def test_timestamp_header_only_without_flag(self, workspace):
        tmp, cfg, _ = workspace
        main(["train", "--config", str(cfg), "--out", str(tmp / "ts"), "--seed", "5"])
        main(["train", "--config", str(cfg), "--out", str(tmp / "rp"),
              "--seed", "5", "--reproducible"])
        ts = (tmp / "ts" / "loss_trace.csv").read_text().splitlines()
        rp = (tmp / "rp" / "loss_trace.csv").read_text().splitlines()
        assert ts[0].startswith("# generated ")
        assert ts[1:] == rp
