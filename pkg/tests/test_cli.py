from cranpool.cli import EXIT_OK, EXIT_USAGE, main
from cranpool.experiments import CSV_HEADER, read_csv

FAST_CONFIG = """
# tiny but real run
trials = 1
snr_list_db = 10
privacy_list_bps = 10e6, 30e6
schemes = optimized, noPooling
modes = pointToPoint
restarts = 1
max_iter = 25
"""


class TestUsage:
    def test_missing_subcommand(self):
        assert main([]) == EXIT_USAGE

    def test_missing_config_flag(self):
        assert main(["sweep", "--out", "x"]) == EXIT_USAGE

    def test_nonexistent_config(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path)]) == EXIT_USAGE

    def test_bad_config_key(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("not_a_key = 3\n")
        assert main(["sweep", "--config", str(path), "--out", str(tmp_path)]) \
            == EXIT_USAGE


class TestSweep:
    def test_end_to_end(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(FAST_CONFIG)
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(cfg), "--out", str(out)])
        assert code == EXIT_OK
        records = read_csv(out / "records.csv")
        assert len(records) == 4  # 2 gammas x 2 schemes x 1 trial
        assert (out / "aggregates.csv").exists()
        series = list((out / "series").glob("*.csv"))
        assert len(series) == 4  # rate + bandwidth per (scheme, mode)
        head = (out / "records.csv").read_text().splitlines()[0]
        assert head == CSV_HEADER

    def test_seed_override_changes_records(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(FAST_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
        assert main(["sweep", "--config", str(cfg), "--out", str(out2),
                     "--seed", "99"]) == EXIT_OK
        a = read_csv(out1 / "records.csv")
        b = read_csv(out2 / "records.csv")
        assert a != b
        assert {r.seed for r in b} == {99}


class TestRun:
    def test_single_cell(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(FAST_CONFIG + "privacy_threshold_bps = 12e6\nsnr_db = 15\n")
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        records = read_csv(out / "records.csv")
        assert len(records) == 2  # one cell, two schemes
        assert all(r.gamma_privacy_bps == 12e6 for r in records)
        assert all(abs(r.snr_db - 15.0) < 1e-9 for r in records)
        assert not (out / "series").exists()


class TestExitThresholds:
    def test_partial_and_total_failure_codes(self, tmp_path):
        from cranpool.cli import EXIT_FAILURE, EXIT_PARTIAL, _finish
        from cranpool.experiments import TrialRecord, aggregate_records
        from cranpool.model import NetworkConfig

        def rec(j, status):
            return TrialRecord(scenario_id=f"s{j}", seed=j, snr_db=10.0,
                               gamma_privacy_bps=20e6, scheme="optimized",
                               mode="pointToPoint", rate_per_ue_bps=1e6,
                               secrecy_rate_per_ue_bps=0.0, w_p1_hz=5e6,
                               w_p2_hz=5e6, w_s_hz=0.0, iterations=1,
                               status=status)

        cfg = NetworkConfig.symmetric()
        ok = [rec(j, "converged") for j in range(8)]
        bad = [rec(j, "solverFailure") for j in range(8, 10)]
        records = ok + bad  # 20% failed -> partial
        aggs = aggregate_records(records, cfg)
        assert _finish(records, aggs, tmp_path / "p", emit_series=False) == EXIT_PARTIAL
        records = [rec(j, "solverFailure") for j in range(4)]
        aggs = aggregate_records(records, cfg)
        assert _finish(records, aggs, tmp_path / "t", emit_series=False) == EXIT_FAILURE
