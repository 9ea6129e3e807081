import csv
import json

import pytest

from trilemma_eval.charts import emit_bar_svg, emit_radar_svg
from trilemma_eval.pipeline import MetricsRecord
from trilemma_eval.report import RadarRow, emit_tables, normalize_for_radar

# records below carry only the metrics each test is about; the constant-column
# warning for the absent ones is by design (asserted in its own test)
pytestmark = pytest.mark.filterwarnings("ignore:metric .* has fewer than 2 distinct")


def record(
    generator_id,
    dataset_id="d1",
    family="data-anonymization",
    multiplier=1,
    privacy=None,
    fidelity=None,
    diversity=None,
    sampling_speed=None,
    utility=0.5,
    robustness=0.4,
    fid_value=None,
):
    return MetricsRecord(
        dataset_id=dataset_id,
        family=family,
        multiplier=multiplier if generator_id else None,
        generator_id=generator_id,
        fidelity=fidelity,
        diversity=diversity,
        fid=fid_value,
        sampling_speed=sampling_speed,
        privacy=privacy,
        utility={"accuracy": utility, "top_k_accuracy": 1.0, "k": 3, "per_class_accuracy": []},
        robustness={
            "accuracy": robustness,
            "top_k_accuracy": 1.0,
            "k": 3,
            "per_class_accuracy": [],
        },
        attack_stats=None,
        seeds={},
        config_fingerprint="f",
        training=None,
    )


class TestRadarNormalization:
    def test_privacy_inversion_hand_case(self):
        records = [
            record("vae", privacy=0.702),
            record("gan", privacy=0.409),
            record("dm", privacy=0.442),
        ]
        rows = {r.generator_id: r.values for r in normalize_for_radar(records)}
        assert abs(rows["vae"]["privacy"] - 0.0) < 1e-3
        assert abs(rows["gan"]["privacy"] - 1.0) < 1e-3
        assert abs(rows["dm"]["privacy"] - 0.8874) < 1e-3

    def test_best_raw_gets_one_except_privacy(self):
        records = [
            record("a", fidelity=0.9, privacy=0.1),
            record("b", fidelity=0.2, privacy=0.9),
        ]
        rows = {r.generator_id: r.values for r in normalize_for_radar(records)}
        assert rows["a"]["fidelity"] == 1.0
        assert rows["b"]["fidelity"] == 0.0
        assert rows["a"]["privacy"] == 1.0  # lowest raw privacy is best
        assert rows["b"]["privacy"] == 0.0

    def test_constant_column_maps_to_half(self):
        records = [record("a", fidelity=0.5), record("b", fidelity=0.5)]
        with pytest.warns(UserWarning, match="fewer than 2 distinct"):
            rows = normalize_for_radar(records)
        assert all(r.values["fidelity"] == 0.5 for r in rows)

    def test_affine_invariance(self, rng):
        raw = rng.uniform(0.1, 0.9, size=3)
        records = [record(g, fidelity=v) for g, v in zip("abc", raw)]
        scaled = [record(g, fidelity=3.7 * v + 11.0) for g, v in zip("abc", raw)]
        base = normalize_for_radar(records)
        mapped = normalize_for_radar(scaled)
        for r1, r2 in zip(base, mapped):
            assert abs(r1.values["fidelity"] - r2.values["fidelity"]) < 1e-9

    def test_mean_positioned_among_cells(self):
        # generator "a" has cells 0.0 and 1.0 over two datasets -> mean 0.5
        records = [
            record("a", dataset_id="d1", fidelity=0.0),
            record("a", dataset_id="d2", fidelity=1.0),
            record("b", dataset_id="d1", fidelity=0.25),
            record("b", dataset_id="d2", fidelity=0.25),
        ]
        rows = {r.generator_id: r.values for r in normalize_for_radar(records)}
        assert rows["a"]["fidelity"] == 0.5  # mean of cells, positioned on cell min-max
        assert rows["b"]["fidelity"] == 0.25
        means_mode = {
            r.generator_id: r.values
            for r in normalize_for_radar(records, normalize_over="means")
        }
        assert means_mode["a"]["fidelity"] == 1.0
        assert means_mode["b"]["fidelity"] == 0.0

    def test_requires_two_records(self):
        with pytest.raises(ValueError, match="at least 2"):
            normalize_for_radar([record("a")])

    def test_values_in_unit_interval(self, rng):
        records = [
            record(g, fidelity=rng.uniform(), privacy=rng.uniform(), utility=rng.uniform())
            for g in "abcd"
        ]
        for row in normalize_for_radar(records):
            for value in row.values.values():
                assert 0.0 <= value <= 1.0


class TestTables:
    def make_records(self):
        return [
            record(None, family="baseline-real", utility=0.8, robustness=0.2),
            record("g1", fidelity=0.5, diversity=0.1, fid_value=30.0, privacy=0.4,
                   sampling_speed=12.8, utility=0.55, robustness=0.26),
            record("g2", fidelity=0.3, diversity=0.2, fid_value=60.0, privacy=0.5,
                   sampling_speed=8.0, utility=0.31, robustness=0.19),
        ]

    def test_row_counts(self, tmp_path):
        written = emit_tables(self.make_records(), tmp_path)
        trilemma = [p for p in written if p.name == "trilemma_privacy.csv"][0]
        with trilemma.open() as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3  # header + 2 generators

    def test_na_sentinel(self, tmp_path):
        written = emit_tables(self.make_records(), tmp_path)
        table = [p for p in written if p.name == "utility_robustness_d1.csv"][0]
        with table.open() as fh:
            rows = list(csv.DictReader(fh))
        baseline = [r for r in rows if r["experiment"] == "baseline-real"][0]
        assert baseline["model"] == "NA"
        assert baseline["multiplier"] == "NA"

    def test_csv_matches_json_mirror(self, tmp_path):
        written = emit_tables(self.make_records(), tmp_path)
        csv_path = [p for p in written if p.name == "trilemma_privacy.csv"][0]
        json_rows = json.loads(csv_path.with_suffix(".json").read_text())
        with csv_path.open() as fh:
            csv_rows = list(csv.DictReader(fh))
        assert len(csv_rows) == len(json_rows)
        for got, want in zip(csv_rows, json_rows):
            for key, value in want.items():
                if value is None:
                    assert got[key] == "NA"
                elif isinstance(value, float):
                    assert float(got[key]) == value
                else:
                    assert got[key] == str(value)


class TestCharts:
    def rows(self):
        values = {
            m: v
            for m, v in zip(
                ("fidelity", "diversity", "sampling_speed", "utility", "robustness", "privacy"),
                (0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
            )
        }
        return [
            RadarRow("a", dict(values)),
            RadarRow("b", {k: 1 - v for k, v in values.items()}),
            RadarRow("c", dict(values)),
        ]

    def test_radar_polygon_count(self):
        svg = emit_radar_svg(self.rows())
        # 4 grid rings + 3 generator polygons
        assert svg.count("<polygon") == 7
        for metric in ("fidelity", "privacy", "sampling_speed"):
            assert metric in svg

    def test_radar_deterministic_bytes(self):
        assert emit_radar_svg(self.rows()) == emit_radar_svg(self.rows())

    def test_identical_rows_identical_polygons(self):
        svg = emit_radar_svg(self.rows())
        polygons = [
            line for line in svg.splitlines() if "<polygon" in line and "fill-opacity" in line
        ]
        a_points = polygons[0].split('points="')[1].split('"')[0]
        c_points = polygons[2].split('points="')[1].split('"')[0]
        assert a_points == c_points

    def test_radar_empty_rejected(self):
        with pytest.raises(ValueError):
            emit_radar_svg([])

    def make_records(self):
        records = [
            record(None, family="baseline-real", utility=0.8),
            record(None, family="geometric-da", utility=0.82),
        ]
        for g, base in (("g1", 0.5), ("g2", 0.6)):
            for fam in ("data-anonymization", "synthetic-da"):
                for mult in (1, 2):
                    records.append(
                        record(g, family=fam, multiplier=mult, utility=base + 0.01 * mult)
                    )
        return records

    def test_bar_chart_groups_and_baselines(self):
        svg = emit_bar_svg(self.make_records(), "utility")
        assert svg.count("<rect") >= 8  # 4 groups x 2 generators + background
        assert svg.count("stroke-dasharray") == 2  # two baseline reference lines
        assert svg.index("data-anonymization x1") < svg.index("synthetic-da x1")

    def test_bar_deterministic(self):
        records = self.make_records()
        assert emit_bar_svg(records, "utility") == emit_bar_svg(records, "utility")

    def test_bar_empty_rejected(self):
        with pytest.raises(ValueError):
            emit_bar_svg([], "utility")
