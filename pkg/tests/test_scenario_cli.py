import json
import math
from pathlib import Path

import pytest

from gepkit.cli import entropy_gate, main
from gepkit.errors import IntegrityError, ParseError, SchemaError
from gepkit.scenario import emit, load_scenario, parse_scenario

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
LN2 = math.log(2.0)


def minimal_doc(**over):
    doc = {
        "channel": {"type": "bsc_compound", "crossovers": [0.05, 0.3],
                    "rate": 0.2, "rate_unit": "nats",
                    "input_pmf": [0.5, 0.5]},
        "N": 8,
        "region": [[0, 0]],
        "trials": 10,
        "seed": 1,
    }
    doc.update(over)
    return doc


class TestLoadScenario:
    def test_shipped_sec4_rate_converted_to_nats(self):
        s = load_scenario(SCENARIOS / "bsc_compound_sec4.json")
        assert s.model.rate(0, 0) == pytest.approx(0.31 * LN2)
        assert s.model.code_counts == (1, 4)
        assert s.margin == frozenset({(0, 1), (0, 2)})
        assert s.decoder == "margin"

    def test_all_shipped_scenarios_load(self):
        for p in sorted(SCENARIOS.glob("*.json")):
            load_scenario(p)

    def test_invalid_json_is_parse_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            load_scenario(p)

    def test_missing_file_is_parse_error(self, tmp_path):
        with pytest.raises(ParseError):
            load_scenario(tmp_path / "nope.json")

    def test_region_out_of_range_names_path(self):
        with pytest.raises(IntegrityError) as err:
            parse_scenario(minimal_doc(region=[[0, 5]]))
        assert "$.region[0]" in str(err.value)

    def test_overlapping_margin_rejected(self):
        with pytest.raises(IntegrityError):
            parse_scenario(minimal_doc(margin=[[0, 0]]))

    def test_zero_trials_is_schema_error(self):
        with pytest.raises(SchemaError) as err:
            parse_scenario(minimal_doc(trials=0))
        assert "$.trials" in str(err.value)

    def test_missing_key_names_path(self):
        doc = minimal_doc()
        del doc["N"]
        with pytest.raises(SchemaError) as err:
            parse_scenario(doc)
        assert "$.N" in str(err.value)

    def test_bad_rate_unit_rejected(self):
        doc = minimal_doc()
        doc["channel"]["rate_unit"] = "furlongs"
        with pytest.raises(SchemaError):
            parse_scenario(doc)

    def test_detection_must_partition(self):
        with pytest.raises(IntegrityError):
            parse_scenario(minimal_doc(detection=[[[0, 0]]]))

    def test_detect_decoder_needs_detection(self):
        with pytest.raises(IntegrityError):
            parse_scenario(minimal_doc(decoder="detect-then-decode"))

    def test_table_channel_with_users(self):
        doc = {
            "channel": {"type": "table",
                        "pmf": [[0.9, 0.1], [0.1, 0.9]]},
            "users": [{"kind": "regular",
                       "codes": [{"rate": 0.3, "rate_unit": "bits",
                                  "input_pmf": [0.5, 0.5]}]}],
            "N": 6, "region": [[0]], "trials": 5, "seed": 0,
        }
        s = parse_scenario(doc)
        assert s.model.K == 1 and s.model.M == 0
        assert s.model.rate(0, 0) == pytest.approx(0.3 * LN2)

    def test_alpha_entries_applied(self):
        doc = minimal_doc(alpha={"default": 0.1,
                                 "entries": [{"g": [0, 1], "value": 0.4}]})
        s = parse_scenario(doc)
        assert s.alpha((0, 0)) == pytest.approx(0.1)
        assert s.alpha((0, 1)) == pytest.approx(0.4)

    def test_round_trip_fixpoint(self):
        for p in sorted(SCENARIOS.glob("*.json")):
            s1 = load_scenario(p)
            doc1 = emit(s1)
            s2 = parse_scenario(doc1)
            assert emit(s2) == doc1


class TestEntropyGate:
    def test_sec4_gate_values_and_outcome(self):
        s = load_scenario(SCENARIOS / "bsc_compound_sec4.json")
        capacities, rate_bits, worst, next_worst, passed = entropy_gate(s)
        assert rate_bits == pytest.approx(0.31)
        assert worst == 0.19 and next_worst == 0.185
        assert capacities[0.19] == pytest.approx(0.298529, abs=2e-6)
        assert capacities[0.185] == pytest.approx(0.309106, abs=2e-6)
        # r = 0.31 sits above the 0.185-state capacity (0.309106), so the
        # literal gate inequality does not hold at these numbers
        assert capacities[0.19] < rate_bits
        assert not rate_bits < capacities[0.185]
        assert passed is False

    def test_gate_passes_on_separated_states(self, tmp_path):
        doc = minimal_doc()
        doc["channel"]["crossovers"] = [0.05, 0.3]
        doc["channel"]["rate"] = 0.5
        doc["channel"]["rate_unit"] = "bits"
        p = tmp_path / "s.json"
        p.write_text(json.dumps(doc))
        # capacities: 1-H(0.3) = 0.1187, 1-H(0.05) = 0.7136
        assert main(["gate-sec4", "--scenario", str(p)]) == 0

    def test_gate_needs_compound_channel(self, tmp_path):
        doc = {
            "channel": {"type": "table", "pmf": [[0.9, 0.1], [0.1, 0.9]]},
            "users": [{"kind": "regular",
                       "codes": [{"rate": 0.3, "rate_unit": "bits",
                                  "input_pmf": [0.5, 0.5]}]}],
            "N": 6, "region": [[0]], "trials": 5, "seed": 0,
        }
        p = tmp_path / "s.json"
        p.write_text(json.dumps(doc))
        assert main(["gate-sec4", "--scenario", str(p)]) == 2


class TestCliDispatch:
    def _write(self, tmp_path, doc):
        p = tmp_path / "scenario.json"
        p.write_text(json.dumps(doc))
        return str(p)

    def test_zero_trials_override_exits_2(self, tmp_path):
        p = self._write(tmp_path, minimal_doc())
        code = main(["simulate", "--scenario", p, "--trials", "0",
                     "--out", str(tmp_path / "out")])
        assert code == 2

    def test_bad_scenario_exits_2(self, tmp_path):
        p = self._write(tmp_path, minimal_doc(region=[[0, 9]]))
        assert main(["bound", "--scenario", p,
                     "--out", str(tmp_path / "out")]) == 2

    def test_bound_then_simulate_pass(self, tmp_path):
        doc = minimal_doc(trials=400)
        p = self._write(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["bound", "--scenario", p, "--out", str(out)]) == 0
        bounds = json.loads((out / "bounds.json").read_text())
        assert 0 < bounds["decode"]["value"] <= 1
        assert main(["simulate", "--scenario", p, "--out", str(out),
                     "--seed", "77"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdict"] == "PASS"
        assert summary["estimate"] <= bounds["decode"]["value"] + \
            3 * summary["sigma"] + 1e-12

    def test_exponents_csv_byte_stable(self, tmp_path):
        p = self._write(tmp_path, minimal_doc())
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["exponents", "--scenario", p, "--out", str(out1)]) == 0
        assert main(["exponents", "--scenario", p, "--out", str(out2)]) == 0
        b1 = (out1 / "exponents.csv").read_bytes()
        assert b1 == (out2 / "exponents.csv").read_bytes()
        header = b1.splitlines()[0].decode()
        assert header == "theorem,D,S,g,g_alt,exponent,rho_star,s_star"

    def test_detect_subcommand(self, tmp_path):
        doc = minimal_doc(trials=300,
                          detection=[[[0, 0]], [[0, 1]]])
        doc["channel"]["crossovers"] = [0.1, 0.4]
        doc["channel"]["input_pmf"] = [0.9, 0.1]
        doc["N"] = 20
        p = self._write(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["detect", "--scenario", p, "--out", str(out)]) == 0
        rows = (out / "detect.csv").read_text().splitlines()
        assert rows[0] == "g,trials,errors,p_hat,bound,vacuous"
        assert len(rows) == 3

    def test_simulate_detect_then_decode(self, tmp_path):
        doc = minimal_doc(trials=200, decoder="detect-then-decode",
                          detection=[[[0, 0]], [[0, 1]]])
        p = self._write(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["simulate", "--scenario", p, "--out", str(out)]) == 0
