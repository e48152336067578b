import numpy as np
import pytest

from cranpool.dcp import SCHEME_EQUAL, SCHEME_NO_POOLING, SCHEME_OPTIMIZED
from cranpool.errors import ConfigError
from cranpool.experiments import (
    CSV_HEADER,
    SweepSpec,
    TrialRecord,
    UNIT_SCALE,
    aggregate_records,
    config_from_settings,
    emit_plot_data,
    load_config,
    parse_config,
    read_csv,
    run_sweep,
    run_trial,
    secrecy_rate,
    snr_db_of,
    write_csv,
)
from cranpool.metrics import MODE_P2P
from cranpool.model import NetworkConfig
from cranpool.solver import CccpOptions

SI = NetworkConfig.symmetric(snr_db=10.0)  # reference-experiment defaults, SI units
FAST = CccpOptions(max_iter=30, restarts=1, seed=0)


class TestSecrecyRate:
    def test_positive_margin(self):
        assert secrecy_rate(5e6, 2e6) == 3e6

    def test_clamped_at_zero(self):
        assert secrecy_rate(1e6, 2e6) == 0.0

    def test_zero_threshold(self):
        assert secrecy_rate(7.5e6, 0.0) == 7.5e6


def make_records(n=3):
    return [TrialRecord(scenario_id=f"s{j}", seed=j, snr_db=10.0,
                        gamma_privacy_bps=20e6, scheme="optimized",
                        mode=MODE_P2P, rate_per_ue_bps=5e6 + j / 3.0,
                        secrecy_rate_per_ue_bps=3e6 + j / 7.0,
                        w_p1_hz=3e6, w_p2_hz=3e6, w_s_hz=4e6,
                        iterations=12, status="converged") for j in range(n)]


class TestCsv:
    def test_header_golden(self):
        assert CSV_HEADER == ("scenario_id,seed,snr_db,gamma_privacy_bps,scheme,mode,"
                              "rate_per_ue_bps,secrecy_rate_per_ue_bps,"
                              "w_p1_hz,w_p2_hz,w_s_hz,iterations,status")

    def test_roundtrip_identical(self, tmp_path):
        records = make_records()
        write_csv(records, tmp_path / "r.csv")
        back = read_csv(tmp_path / "r.csv")
        assert back == records

    def test_header_enforced_on_read(self, tmp_path):
        (tmp_path / "bad.csv").write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ConfigError):
            read_csv(tmp_path / "bad.csv")


class TestConfigFile:
    def test_defaults_match_paper_parameters(self):
        cfg, spec, options, workers = config_from_settings(parse_config(""))
        assert cfg.n_rus == 1 and cfg.n_ues == 1
        assert cfg.n_ant_ru == ((1,), (1,)) and cfg.n_ant_ue == ((1,), (1,))
        assert cfg.backhaul_capacity == (100e6, 100e6)
        assert cfg.fronthaul_capacity == ((50e6,), (50e6,))
        assert cfg.total_bandwidth == 10e6
        assert cfg.path_loss_exponent == 3.0
        assert cfg.reference_distance == 50.0
        assert cfg.area_radius == 100.0
        assert spec.snr_list_db == (10.0, 15.0, 20.0)
        assert spec.privacy_list_bps[0] == 5e6 and spec.privacy_list_bps[-1] == 60e6
        assert options.max_iter == 100 and options.restarts == 5
        assert workers == 1

    def test_overrides_and_comments(self):
        text = """
        # reference scenario, smaller sweep
        trials = 2
        snr_list_db = 10, 20
        schemes = optimized, noPooling
        privacy_threshold_bps = 8e6
        n_ant_ru = 2
        """
        cfg, spec, options, workers = config_from_settings(parse_config(text))
        assert spec.trials == 2
        assert spec.snr_list_db == (10.0, 20.0)
        assert spec.schemes == ("optimized", "noPooling")
        assert cfg.privacy_threshold == 8e6
        assert cfg.n_ant_ru == ((2,), (2,))

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="bogus_key"):
            parse_config("bogus_key = 3")

    def test_missing_required_key_named(self):
        with pytest.raises(ConfigError, match="total_bandwidth_hz"):
            parse_config("trials = 2", required=("total_bandwidth_hz",))

    def test_malformed_value_named(self):
        with pytest.raises(ConfigError, match="trials"):
            parse_config("trials = many")
        with pytest.raises(ConfigError, match="missing value"):
            parse_config("trials =")

    def test_load_config_file(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("trials = 1\n")
        cfg, spec, options, workers = load_config(path)
        assert spec.trials == 1

    def test_bad_scheme_rejected(self):
        with pytest.raises(ConfigError, match="scheme"):
            config_from_settings(parse_config("schemes = optimized, magic"))


class TestRunTrial:
    def test_no_pooling_record(self):
        record, sol = run_trial(SI, seed=3, scheme=SCHEME_NO_POOLING, mode=MODE_P2P,
                                options=FAST)
        assert record.w_s_hz == 0.0
        assert record.w_p1_hz == pytest.approx(5e6)
        assert all(r == 0.0 for row in sol.point.rs for r in row)
        assert record.status == "converged"
        assert record.snr_db == pytest.approx(10.0)

    def test_equal_record_exact_thirds(self):
        record, _ = run_trial(SI, seed=3, scheme=SCHEME_EQUAL, mode=MODE_P2P,
                              options=FAST)
        assert record.w_p1_hz == record.w_p2_hz == record.w_s_hz
        assert record.w_p1_hz == pytest.approx(10e6 / 3.0, rel=1e-15)

    def test_secrecy_identity_and_bandwidth_sum(self):
        record, _ = run_trial(SI, seed=4, scheme=SCHEME_OPTIMIZED, mode=MODE_P2P,
                              options=FAST)
        assert record.secrecy_rate_per_ue_bps == pytest.approx(
            max(record.rate_per_ue_bps - record.gamma_privacy_bps, 0.0))
        assert record.w_p1_hz + record.w_p2_hz + record.w_s_hz == pytest.approx(
            10e6, rel=1e-12)

    def test_optimized_dominates_equal_on_matched_seed(self):
        eq_rec, _ = run_trial(SI, seed=5, scheme=SCHEME_EQUAL, mode=MODE_P2P,
                              options=FAST)
        opt_rec, _ = run_trial(SI, seed=5, scheme=SCHEME_OPTIMIZED, mode=MODE_P2P,
                               options=FAST)
        assert opt_rec.rate_per_ue_bps >= eq_rec.rate_per_ue_bps * (1 - 1e-4)


@pytest.fixture(scope="module")
def tiny_sweep():
    spec = SweepSpec(snr_list_db=(10.0,), privacy_list_bps=(8e6, 30e6),
                     schemes=(SCHEME_OPTIMIZED, SCHEME_EQUAL, SCHEME_NO_POOLING),
                     modes=(MODE_P2P,), trials=2, base_seed=0)
    records, aggregates = run_sweep(spec, SI, options=FAST)
    return spec, records, aggregates


class TestRunSweep:
    def test_cardinality(self, tiny_sweep):
        spec, records, aggregates = tiny_sweep
        want = (len(spec.snr_list_db) * len(spec.privacy_list_bps)
                * len(spec.schemes) * len(spec.modes) * spec.trials)
        assert len(records) == want
        assert len(aggregates) == want // spec.trials

    def test_seed_derivation(self, tiny_sweep):
        spec, records, _ = tiny_sweep
        assert {r.seed for r in records} == {spec.base_seed, spec.base_seed + 1}

    def test_record_invariants(self, tiny_sweep):
        _, records, _ = tiny_sweep
        for r in records:
            assert r.secrecy_rate_per_ue_bps == pytest.approx(
                max(r.rate_per_ue_bps - r.gamma_privacy_bps, 0.0))
            assert r.w_p1_hz + r.w_p2_hz + r.w_s_hz == pytest.approx(10e6, rel=1e-9)

    def test_scheme_ordering_on_matched_cells(self, tiny_sweep):
        _, records, _ = tiny_sweep
        cells = {}
        for r in records:
            cells[(r.gamma_privacy_bps, r.scheme, r.seed)] = r.rate_per_ue_bps
        for gamma in (8e6, 30e6):
            for seed in (0, 1):
                assert cells[(gamma, "optimized", seed)] >= \
                    cells[(gamma, "equal", seed)] * (1 - 1e-4)

    def test_warm_start_monotone_in_gamma(self, tiny_sweep):
        _, records, _ = tiny_sweep
        for scheme in ("optimized", "equal"):
            for seed in (0, 1):
                rates = [r.rate_per_ue_bps for r in records
                         if r.scheme == scheme and r.seed == seed]
                assert rates[1] >= rates[0] * (1 - 1e-4)  # gamma ascending

    def test_aggregate_of_identical_records_is_the_record(self):
        recs = make_records(1) * 4
        aggs = aggregate_records(recs, SI)
        assert len(aggs) == 1
        assert aggs[0].n == 4
        assert aggs[0].mean_rate_per_ue_bps == recs[0].rate_per_ue_bps
        assert aggs[0].mean_w_s_frac == pytest.approx(0.4)

    def test_emit_plot_data(self, tiny_sweep, tmp_path):
        _, _, aggregates = tiny_sweep
        paths = emit_plot_data(aggregates, tmp_path)
        names = sorted(p.name for p in paths)
        assert "rate_vs_secrecy__snr10__optimized__pointToPoint.csv" in names
        assert "bandwidth_vs_secrecy__snr10__noPooling__pointToPoint.csv" in names
        for p in paths:
            body = p.read_text().splitlines()
            assert len(body) == 3  # header + two gamma rows
            if p.name.startswith("bandwidth"):
                for line in body[1:]:
                    fracs = [float(x) for x in line.split(",")[2:]]
                    assert all(0.0 <= f <= 1.0 for f in fracs)
                    assert sum(fracs) == pytest.approx(1.0, rel=1e-9)

    def test_csv_roundtrip_of_sweep(self, tiny_sweep, tmp_path):
        _, records, _ = tiny_sweep
        write_csv(records, tmp_path / "records.csv")
        assert read_csv(tmp_path / "records.csv") == records

    def test_workers_reproduce_serial(self, tiny_sweep):
        spec, records, _ = tiny_sweep
        records2, _ = run_sweep(spec, SI, options=FAST, workers=2)
        assert records2 == records
