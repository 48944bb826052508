import csv
import json
import math

import numpy as np
import pytest

from wfg import __version__
from wfg.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, main
from wfg.config import RunConfig, SchemaError, load_schema, parse_json, validate
from wfg.errors import ConfigError, InvalidSignal
from wfg.grid import AxisSpec, SampledSignal
from wfg.io import (
    REPORT_COLUMNS,
    ResultBundle,
    atomic_write,
    read_bundle,
    read_signal,
    report_csv,
    safe_name,
    signal_from_dict,
    signal_to_dict,
    write_signal,
)
from wfg.wavefront import gabor_wf

SMALL = {"axis": {"L": 40.0, "n": 2048}, "estimator": {"n_dirs": 8}}


def write_config(tmp_path, doc, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig.from_dict({})
        assert cfg.axis == AxisSpec(76.0, 4096)
        assert cfg.signals == [] and cfg.prescribed is None and len(cfg.word) == 0

    def test_schema_errors_name_the_field(self):
        with pytest.raises(SchemaError, match="estimator/theta_deg"):
            RunConfig.from_dict({"estimator": {"theta_deg": 120}})
        with pytest.raises(SchemaError, match="bogus"):
            RunConfig.from_dict({"bogus": 1})
        with pytest.raises(SchemaError, match="signals/0/kind"):
            RunConfig.from_dict({"signals": [{"kind": "SQUARE"}]})

    def test_axis_errors_are_config_errors(self):
        with pytest.raises(ConfigError, match="axis"):
            RunConfig.from_dict({"axis": {"L": 10.0, "n": 1000}})

    def test_json_syntax_error_has_position(self):
        with pytest.raises(SchemaError, match="line 2, column"):
            parse_json('{\n  "axis": ,\n}', "cfg")

    def test_prescribed_forms(self):
        base = {"axis": {"L": 40.0, "n": 2048}}
        a = RunConfig.from_dict({**base, "prescribed": {"angles": [30.0]}}).prescribed_spec()
        b = RunConfig.from_dict({**base, "prescribed": {"directions": [[math.sqrt(3), 1.0]]}}).prescribed_spec()
        assert np.allclose(a.directions[0].w, b.directions[0].w)
        r1 = RunConfig.from_dict({**base, "prescribed": {"random": 3}, "seed": 7}).prescribed_spec()
        r2 = RunConfig.from_dict({**base, "prescribed": {"random": 3}, "seed": 7}).prescribed_spec()
        assert r1 == r2 and len(r1.directions) == 3
        assert RunConfig.from_dict({**base, "prescribed": {"angles": [0.0], "K_max": 3}}).prescribed_spec().K_max == 3

    def test_build_signals_applies_word(self):
        cfg = RunConfig.from_dict(
            {"axis": {"L": 40.0, "n": 2048}, "signals": [{"kind": "GAUSSIAN"}], "word": [{"chirp": 0.5}]}
        )
        (u,) = cfg.build_signals()
        assert u.meta["word"] == [{"chirp": 0.5}]
        x = cfg.axis.grid
        assert np.allclose(u.values, math.pi**-0.25 * np.exp(-0.5 * x * x + 0.25j * x * x))

    def test_corpus_flag(self):
        cfg = RunConfig.from_dict({"axis": {"L": 40.0, "n": 2048}, "corpus": True})
        assert len(cfg.build_signals()) == 6

    def test_snapshot_is_schema_shaped(self):
        cfg = RunConfig.from_dict({**SMALL, "word": ["fourier"]})
        snap = cfg.snapshot()
        assert snap["word"] == ["fourier"] and snap["axis"]["n"] == 2048
        json.dumps(snap, allow_nan=False)


class TestSignalFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        u = SampledSignal(AxisSpec(8.0, 64), rng.normal(size=64) + 1j * rng.normal(size=64), "r", {"k": 1})
        p = write_signal(tmp_path / "u.json", u)
        v = read_signal(p)
        assert np.array_equal(u.values, v.values) and v.label == "r" and v.meta == {"k": 1}
        validate(json.loads(p.read_text()), "signal")

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.update(payload="!!!"),
            lambda d: d.update(payload=d["payload"][:-8]),
            lambda d: d.update(n=63),
            lambda d: d.pop("encoding"),
        ],
    )
    def test_corrupt_documents(self, mutate):
        doc = signal_to_dict(SampledSignal(AxisSpec(8.0, 64), np.ones(64)))
        mutate(doc)
        with pytest.raises((InvalidSignal, ConfigError)):
            signal_from_dict(doc)

    def test_non_finite_payload(self):
        u = SampledSignal(AxisSpec(8.0, 16), np.ones(16))
        doc = signal_to_dict(u)
        import base64

        raw = np.frombuffer(base64.b64decode(doc["payload"]), "<f8").copy()
        raw[3] = np.nan
        doc["payload"] = base64.b64encode(raw.tobytes()).decode()
        with pytest.raises(InvalidSignal, match="non-finite"):
            signal_from_dict(doc)

    def test_not_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_bytes(b"\xff\xfe garbage")
        with pytest.raises(InvalidSignal):
            read_signal(p)


def test_atomic_write_and_names(tmp_path):
    p = atomic_write(tmp_path / "a" / "b.txt", "hello")
    assert p.read_text() == "hello"
    atomic_write(p, b"bytes")
    assert p.read_bytes() == b"bytes"
    assert [q.name for q in p.parent.iterdir()] == ["b.txt"]
    assert safe_name("prescribed[0,90]") == "prescribed_0_90"
    assert safe_name("///") == "signal"


def test_bundle_round_trip_and_csv():
    u = SampledSignal(AxisSpec(40.0, 2048), np.exp(-0.5 * AxisSpec(40.0, 2048).grid ** 2), "g")
    rep = gabor_wf(u)
    b = ResultBundle({"axis": {}}, [rep], timing={"g/gabor": 0.1})
    doc = b.to_dict()
    validate(doc, "bundle")
    back = ResultBundle.from_dict(json.loads(json.dumps(doc)))
    assert back.canonical() == b.canonical()
    assert "timing" not in json.loads(b.canonical())
    assert back.version == __version__
    rows = list(csv.reader(report_csv(rep).splitlines()))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert {r[4] for r in rows[1:]} <= {"RAPID", "SLOW", "INDETERMINATE"}


def test_schemas_load():
    for name in ("run_config", "signal", "bundle"):
        assert load_schema(name)["type"] == "object"


class TestCLI:
    def run_synth(self, tmp_path, doc, capsys):
        cfg = write_config(tmp_path, {**doc, "out": str(tmp_path / "sig")})
        code = main(["synth", "--config", cfg])
        return code, capsys.readouterr()

    def test_synth_analyze_compare(self, tmp_path, capsys):
        doc = {**SMALL, "signals": [{"kind": "PLANE_WAVE"}, {"kind": "GAUSSIAN"}]}
        code, out = self.run_synth(tmp_path, doc, capsys)
        assert code == EXIT_OK
        paths = out.out.split()
        assert len(paths) == 2
        cfg = write_config(tmp_path, doc)
        res = tmp_path / "res"
        assert main(["analyze", *paths, "--config", cfg, "--out", str(res), "--method", "gabor"]) == EXIT_OK
        text = capsys.readouterr().out
        assert "plane0 GABOR_CONE: flagged [0.00, 180.00]" in text
        validate(json.loads((res / "bundle.json").read_text()), "bundle")
        rows = list(csv.reader((res / "plane0__gabor.csv").read_text().splitlines()))
        assert tuple(rows[0]) == REPORT_COLUMNS
        # deterministic: a second run gives byte-identical canonical output
        first = (res / "report.json").read_bytes()
        assert main(["analyze", *paths, "--config", cfg, "--out", str(res), "--method", "gabor"]) == EXIT_OK
        assert (res / "report.json").read_bytes() == first
        capsys.readouterr()
        # self comparison
        bundle = str(res / "bundle.json")
        assert main(["compare", bundle, bundle, "--out", str(tmp_path / "cmp")]) == EXIT_OK
        assert "agreement 1.0000" in capsys.readouterr().out
        assert (tmp_path / "cmp" / "agreement.csv").read_text().splitlines()[-1].startswith("# summary agreement=1.000000")

    def test_analyze_all_methods(self, tmp_path, capsys):
        doc = {**SMALL, "signals": [{"kind": "GAUSSIAN"}]}
        code, out = self.run_synth(tmp_path, doc, capsys)
        res = tmp_path / "res"
        assert main(["analyze", out.out.split()[0], "--config", write_config(tmp_path, doc), "--out", str(res), "--method", "all"]) == EXIT_OK
        b = read_bundle(res / "bundle.json")
        assert [r.method.value for r in b.reports] == ["GABOR_CONE", "GABOR_LATTICE", "HSTFT_LOCAL", "HOMOGENEOUS"]
        assert len(b.agreements) == 3
        assert sorted(p.name for p in res.glob("*.csv")) == sorted(f"gaussian__{m}.csv" for m in ("gabor", "gabor-lattice", "hstft-local", "hwf"))

    def test_compare_mismatch_exits_2(self, tmp_path, capsys):
        res = {}
        for n_dirs in (8, 12):
            doc = {**SMALL, "estimator": {"n_dirs": n_dirs}, "signals": [{"kind": "GAUSSIAN"}]}
            _, out = self.run_synth(tmp_path, doc, capsys)
            res[n_dirs] = tmp_path / f"res{n_dirs}"
            code = main(["analyze", out.out.split()[0], "--config", write_config(tmp_path, doc), "--out", str(res[n_dirs])])
            assert code == EXIT_OK, capsys.readouterr().err
            capsys.readouterr()
        capsys.readouterr()
        assert main(["compare", str(res[8] / "bundle.json"), str(res[12] / "bundle.json")]) == EXIT_CONFIG
        assert "different direction sets" in capsys.readouterr().err

    def test_empty_prescribed_warns(self, tmp_path, capsys, caplog):
        code, _ = self.run_synth(tmp_path, {**SMALL, "prescribed": {"angles": []}}, capsys)
        assert code == EXIT_OK
        assert "no prescribed directions" in caplog.text

    def test_out_of_box_exits_2(self, tmp_path, capsys):
        code, out = self.run_synth(tmp_path, {**SMALL, "prescribed": {"angles": [0.0], "K_max": 9}}, capsys)
        assert code == EXIT_CONFIG and "escapes box" in out.err

    def test_bad_config_exits_2(self, tmp_path, capsys):
        code, out = self.run_synth(tmp_path, {"axis": {"L": -1, "n": 64}}, capsys)
        assert code == EXIT_CONFIG and "axis/L" in out.err
        assert main(["synth", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG

    def test_nothing_selected_exits_2(self, tmp_path, capsys):
        code, out = self.run_synth(tmp_path, SMALL, capsys)
        assert code == EXIT_CONFIG and "no signals" in out.err

    def test_corrupt_signal_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"format": "wfg-signal"}')
        assert main(["analyze", str(p)]) == EXIT_CONFIG
        assert "bad.json" in capsys.readouterr().err

    def test_computation_error_exits_1(self, tmp_path, capsys):
        # analysis radius below two shells: estimator error, not a config error
        doc = {"axis": {"L": 6.0, "n": 256}, "signals": [{"kind": "GAUSSIAN"}], "estimator": {"n_dirs": 8}}
        _, out = self.run_synth(tmp_path, doc, capsys)
        code = main(["analyze", out.out.split()[0], "--config", write_config(tmp_path, doc), "--out", str(tmp_path / "r")])
        assert code == EXIT_COMPUTE
        assert "computation failed" in capsys.readouterr().err

    def test_selftest_subset(self, capsys):
        assert main(["selftest", "--only", "7"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "[PASS] criterion 7" in out and "1/1 criteria passed" in out
