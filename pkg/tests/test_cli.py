import csv
import io
import json

import pytest

from finitekey.cli import SCAN_COLUMNS, main
from finitekey.config import ConfigError, RunConfig, load_config, parse_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({
        "sweep": {"L_start": 0.0, "L_end": 300.0, "L_step": 150.0},
        "optimizer": {"starts": 1, "max_evals": 100, "grid_points": 2},
        "methods": ["ours_analytic"],
    }))
    return str(path)


class TestConfig:
    def test_bundled_defaults(self):
        cfg = load_config()
        assert cfg.channel.eta_d == 0.045 and cfg.protocol.N == 1e10
        assert cfg.budget.eps_sec == 1e-10 and cfg.budget.eps_cor == 1e-15
        assert cfg.protocol.zeta == 1.22

    def test_roundtrip(self):
        cfg = load_config()
        assert parse_config(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("raw,field", [
        ({"protocol": {"mu": 0.01}}, "protocol.mu"),
        ({"channel": {"bogus": 1}}, "channel.bogus"),
        ({"extra": {}}, "extra"),
        ({"methods": []}, "methods"),
        ({"methods": ["serfling"]}, "methods[0]"),
        ({"sweep": {"L_step": 0}}, "sweep.L_step"),
        ({"budget": {"eps_sec": "small"}}, "budget.eps_sec"),
    ])
    def test_field_level_errors(self, raw, field):
        with pytest.raises(ConfigError) as info:
            parse_config(raw)
        assert info.value.field == field

    def test_default_object(self):
        assert RunConfig().sweep.lengths() == [0.0, 25.0, 50.0, 75.0, 100.0]


class TestBound:
    def test_sampling_analytic(self, capsys):
        code, out, _ = run(capsys, "bound", "--family", "sampling", "--mode", "analytic",
                           "--n", "1e5", "--k", "1e5", "--lambda", "0.01", "--eps", "1e-10")
        assert code == 0
        assert float(rows(out)[0]["width"]) == pytest.approx(2.94e-3, rel=5e-3)

    def test_chernoff_trivial(self, capsys):
        code, out, _ = run(capsys, "bound", "--family", "chernoff", "--xstar", "100", "--eps", "1")
        assert code == 0 and float(rows(out)[0]["width"]) == 0.0

    def test_variant_zero_verbose(self, capsys):
        code, out, _ = run(capsys, "bound", "--family", "variant", "--mode", "numeric",
                           "--x", "0", "--eps", "1e-10", "--verbose")
        row = rows(out)[0]
        assert float(row["width"]) == pytest.approx(23.02585093, rel=1e-9)
        assert abs(float(row["residual"])) <= 1e-9

    def test_missing_flag(self, capsys):
        code, _, err = run(capsys, "bound", "--family", "sampling", "--n", "10", "--eps", "0.1")
        assert code == 2 and "--k" in err

    def test_bad_choice(self, capsys):
        code, _, _ = run(capsys, "bound", "--family", "poisson", "--eps", "0.1")
        assert code == 2

    def test_domain_error_is_usage(self, capsys):
        code, _, _ = run(capsys, "bound", "--family", "chernoff", "--xstar", "-3", "--eps", "0.1")
        assert code == 2


class TestCompare:
    def test_sampling_defaults(self, capsys):
        code, out, _ = run(capsys, "compare-sampling", "--k", "1e3,1e4,1e5,1e6")
        assert code == 0
        table = rows(out)
        assert set(table[0]) == {"k", "lambda", "method", "gamma"}
        by = {(r["k"], r["method"]): float(r["gamma"]) for r in table}
        for k in {r["k"] for r in table}:
            assert by[(k, "ours_numeric")] <= by[(k, "ours_analytic")] <= by[(k, "serfling")]

    def test_sampling_single_method(self, capsys):
        _, out, _ = run(capsys, "compare-sampling", "--methods", "ours-analytic", "--points", "5")
        assert {r["method"] for r in rows(out)} == {"ours_analytic"}
        assert len(rows(out)) == 5

    def test_sampling_unit_eps(self, capsys):
        _, out, _ = run(capsys, "compare-sampling", "--eps", "1", "--points", "4")
        assert all(float(r["gamma"]) == 0.0 for r in rows(out))

    def test_expected(self, capsys):
        _, out, _ = run(capsys, "compare-expected", "--x", "0,100")
        by = {(float(r["x"]), r["method"]): float(r["lower_bound"]) for r in rows(out)}
        assert by[(0.0, "ours_analytic")] == 0.0
        assert by[(100.0, "ours_analytic")] == pytest.approx(19.65, abs=0.01)
        assert 35.3 <= by[(100.0, "gaussian")] <= 36.5

    def test_expected_crossover(self, capsys):
        _, out, _ = run(capsys, "compare-expected", "--x-min", "1", "--x-max", "1e4")
        by = {}
        for r in rows(out):
            by.setdefault(r["x"], {})[r["method"]] = float(r["lower_bound"])
        above = [x for x, v in by.items() if v["zhang_analytic"] > v["gaussian"]]
        below = [x for x, v in by.items() if v["zhang_analytic"] < v["gaussian"]]
        assert above and below

    def test_unknown_method(self, capsys):
        code, _, err = run(capsys, "compare-expected", "--method", "magic")
        assert code == 2 and "magic" in err

    def test_csv_number_format(self, capsys):
        _, out, _ = run(capsys, "compare-expected", "--x", "100", "--method", "gaussian")
        assert out.splitlines()[1] == "1.000000000e+02,gaussian,3.638659098e+01"


class TestKeyRate:
    def test_report(self, capsys):
        code, out, _ = run(capsys, "keyrate", "--method", "ours_analytic", "--L", "20")
        assert code == 0
        doc = json.loads(out)
        report = doc["results"][0]["report"]
        assert len(report["audit"]) == 14
        assert report["ell"] > 0

    def test_config_error(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"protocol": {"p_mu": 0.9, "p_nu": 0.2}}))
        code, _, err = run(capsys, "keyrate", "--config", str(path))
        assert code == 3 and "protocol.p_mu" in err

    def test_bad_json(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert run(capsys, "keyrate", "--config", str(path))[0] == 3

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "keyrate", "--config", str(tmp_path / "none.json"))[0] == 3

    def test_csv_output(self, capsys, tmp_path):
        target = tmp_path / "k.csv"
        run(capsys, "keyrate", "--method", "lim", "--output", str(target))
        table = rows(target.read_text())
        assert len(table) == 1 and tuple(table[0]) == SCAN_COLUMNS


class TestScan:
    def test_single_point(self, capsys, tmp_path):
        path = tmp_path / "one.json"
        path.write_text(json.dumps({"sweep": {"L_start": 10, "L_end": 10, "L_step": 1},
                                    "methods": ["ours_analytic"]}))
        _, out, _ = run(capsys, "scan", "--config", str(path))
        assert out.splitlines()[0] == ",".join(SCAN_COLUMNS)
        assert len(rows(out)) == 1

    def test_trailing_zero_rows(self, capsys, small_config):
        _, out, _ = run(capsys, "scan", "--config", small_config, "--optimize")
        table = rows(out)
        assert [float(r["L_km"]) for r in table] == [0.0, 150.0, 300.0]
        assert float(table[0]["key_rate"]) > 0
        assert float(table[-1]["key_rate"]) == 0.0

    def test_parallel_matches_serial(self, capsys, small_config, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(capsys, "scan", "--config", small_config, "--optimize", "--seed", "7", "--output", str(a))
        run(capsys, "scan", "--config", small_config, "--optimize", "--seed", "7", "--jobs", "2",
            "--output", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_method_override(self, capsys, small_config):
        _, out, _ = run(capsys, "scan", "--config", small_config, "--method", "lim,curty")
        assert [r["method"] for r in rows(out)][:2] == ["lim", "curty"]
