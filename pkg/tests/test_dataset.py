import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airbrake_surrogate import dataset as ds
from airbrake_surrogate.flight import (
    FlightState,
    RocketModel,
    Trajectory,
    always_closed_controller,
    generate_flight_batch,
    simulate_flight,
)


def make_sampleset(features, labels):
    return ds.SampleSet(np.asarray(features, dtype=float), np.asarray(labels))


def random_sampleset(rng, n, open_fraction=0.3):
    feats = rng.normal(size=(n, 5))
    labels = (rng.uniform(size=n) < open_fraction).astype(np.int64)
    return ds.SampleSet(feats, labels)


class TestExtractSamples:
    def test_two_step_trajectory_two_samples(self):
        m = RocketModel()
        states = [
            FlightState(0.0, 1000.0, 200.0, (0, 0, -20.0)),
            FlightState(0.01, 1002.0, 199.8, (0, 0, -20.0)),
            FlightState(0.02, 1004.0, -0.1, (0, 0, -9.81)),
        ]
        traj = Trajectory(states, 1004.0, 0.02)
        out = ds.extract_samples([traj], m, 0.01)
        assert len(out) == 2

    def test_overshooting_dragfree_flight_all_open(self):
        m = RocketModel(cd_clean=1e-300, cd_airbrake_delta=0.0,
                        lateral_accel_sigma=0.0, target_apogee=400.0)
        traj = simulate_flight(m, FlightState(0.0, 0.0, 100.0), 0.01,
                               always_closed_controller(), seed=0)
        out = ds.extract_samples([traj], m, 0.001)
        assert np.all(out.labels == 1)

    def test_default_config_open_fraction_in_band(self):
        m = RocketModel()
        flights = generate_flight_batch(m, 50, (500, 1500), (150, 300), 0.01, seed=42)
        out = ds.extract_samples(flights, m, 0.01, stride=20)
        assert 0.02 <= out.open_fraction() <= 0.20

    def test_empty_rejected(self):
        with pytest.raises(ds.EmptyDatasetError):
            ds.extract_samples([], RocketModel(), 0.01)


class TestScaler:
    def test_fit_then_apply_normalizes(self):
        rng = np.random.default_rng(0)
        ss = random_sampleset(rng, 200)
        scaler = ds.fit_scaler(ss)
        scaled = ds.apply_scaler(scaler, ss)
        assert np.all(np.abs(scaled.features.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(scaled.features.std(axis=0) - 1.0) < 1e-9)

    def test_population_std_convention(self):
        feats = np.zeros((2, 5))
        feats[1, :] = 2.0
        feats[:, 1:] += np.array([[0.0], [1.0]])  # keep other columns non-degenerate
        ss = make_sampleset(feats, [0, 1])
        scaler = ds.fit_scaler(ss)
        assert scaler.mean[0] == 1.0
        assert scaler.std[0] == 1.0  # divide-by-N, not N-1
        scaled = ds.apply_scaler(scaler, ss)
        assert set(scaled.features[:, 0]) == {-1.0, 1.0}

    def test_identity_scaler_is_noop(self):
        rng = np.random.default_rng(1)
        ss = random_sampleset(rng, 20)
        ident = ds.Scaler(mean=np.zeros(5), std=np.ones(5))
        out = ds.apply_scaler(ident, ss)
        assert np.array_equal(out.features, ss.features)

    def test_degenerate_feature_named(self):
        feats = np.random.default_rng(2).normal(size=(10, 5))
        feats[:, 3] = 7.7
        with pytest.raises(ds.DegenerateFeatureError) as err:
            ds.fit_scaler(make_sampleset(feats, np.zeros(10, dtype=int)))
        assert err.value.column == 3

    def test_all_identical_samples_rejected(self):
        feats = np.ones((5, 5))
        with pytest.raises(ds.DegenerateFeatureError):
            ds.fit_scaler(make_sampleset(feats, np.zeros(5, dtype=int)))

    def test_refit_on_scaled_data_is_idempotent(self):
        rng = np.random.default_rng(3)
        ss = random_sampleset(rng, 500)
        scaled = ds.apply_scaler(ds.fit_scaler(ss), ss)
        scaler2 = ds.fit_scaler(scaled)
        assert np.all(np.abs(scaler2.mean) < 1e-9)
        assert np.all(np.abs(scaler2.std - 1.0) < 1e-9)


class TestSmote:
    def test_balanced_input_unchanged(self):
        ss = make_sampleset(np.random.default_rng(0).normal(size=(10, 5)),
                            [0] * 5 + [1] * 5)
        out = ds.smote_oversample(ss, k=2, seed=0)
        assert np.array_equal(out.features, ss.features)
        assert np.array_equal(out.labels, ss.labels)

    def test_two_point_minority_synthetics_on_segment(self):
        minority = np.array([[0.0] * 5, [1.0] * 5])
        majority = np.random.default_rng(1).normal(10.0, 1.0, size=(40, 5))
        feats = np.vstack([majority, minority])
        labels = np.array([0] * 40 + [1] * 2)
        out = ds.smote_oversample(make_sampleset(feats, labels), k=1, seed=7)
        n_closed, n_open = out.class_counts()
        assert n_closed == n_open == 40
        synth = out.features[42:]
        # every synthetic point is a convex combination of the two minority points
        for row in synth:
            assert np.all(row >= 0.0) and np.all(row <= 1.0)
            assert np.all(np.abs(row - row[0]) < 1e-12)

    def test_balance_contract_900_100(self):
        rng = np.random.default_rng(5)
        feats = np.vstack([rng.normal(0, 1, (900, 5)), rng.normal(5, 1, (100, 5))])
        labels = np.array([0] * 900 + [1] * 100)
        out = ds.smote_oversample(make_sampleset(feats, labels), k=5, seed=3)
        assert out.class_counts() == (900, 900)

    def test_originals_preserved_verbatim(self):
        rng = np.random.default_rng(6)
        ss = random_sampleset(rng, 60, open_fraction=0.2)
        out = ds.smote_oversample(ss, k=3, seed=1)
        assert np.array_equal(out.features[: len(ss)], ss.features)
        assert np.array_equal(out.labels[: len(ss)], ss.labels)

    def test_determinism(self):
        rng = np.random.default_rng(7)
        ss = random_sampleset(rng, 80, open_fraction=0.25)
        a = ds.smote_oversample(ss, k=3, seed=9)
        b = ds.smote_oversample(ss, k=3, seed=9)
        assert np.array_equal(a.features, b.features)

    def test_insufficient_minority(self):
        feats = np.random.default_rng(8).normal(size=(10, 5))
        labels = np.array([0] * 9 + [1])
        with pytest.raises(ds.InsufficientMinorityError):
            ds.smote_oversample(make_sampleset(feats, labels), k=1, seed=0)

    def test_synthetics_in_minority_convex_hull_coordinatewise(self):
        # coordinate-wise bounding box is a necessary containment check
        rng = np.random.default_rng(9)
        minority = rng.normal(0, 1, (20, 5))
        majority = rng.normal(8, 1, (200, 5))
        feats = np.vstack([majority, minority])
        labels = np.array([0] * 200 + [1] * 20)
        out = ds.smote_oversample(make_sampleset(feats, labels), k=4, seed=2)
        synth = out.features[220:]
        lo, hi = minority.min(axis=0), minority.max(axis=0)
        assert np.all(synth >= lo - 1e-12) and np.all(synth <= hi + 1e-12)


class TestSplit:
    def test_split_sizes_at_3699_samples(self):
        rng = np.random.default_rng(0)
        ss = random_sampleset(rng, 3699, open_fraction=0.1)
        split = ds.split_dataset(ss, seed=4)
        assert len(split.train) == 2589
        assert len(split.validation) == 740
        assert len(split.test) == 370

    def test_ten_balanced(self):
        ss = make_sampleset(np.random.default_rng(1).normal(size=(10, 5)),
                            [0, 1] * 5)
        split = ds.split_dataset(ss, seed=0)
        assert (len(split.train), len(split.validation), len(split.test)) == (7, 2, 1)

    def test_determinism(self):
        rng = np.random.default_rng(2)
        ss = random_sampleset(rng, 500)
        a = ds.split_dataset(ss, seed=13)
        b = ds.split_dataset(ss, seed=13)
        assert np.array_equal(a.train.features, b.train.features)
        assert np.array_equal(a.test.labels, b.test.labels)

    def test_partition_disjoint_and_exhaustive(self):
        rng = np.random.default_rng(3)
        ss = random_sampleset(rng, 997)
        split = ds.split_dataset(ss, seed=1)
        total = len(split.train) + len(split.validation) + len(split.test)
        assert total == 997
        rows = np.vstack([split.train.features, split.validation.features, split.test.features])
        assert np.array_equal(
            np.sort(rows, axis=0), np.sort(ss.features, axis=0)
        )

    @given(n=st.integers(30, 2000), frac=st.floats(0.05, 0.5), seed=st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_stratification_proportions_property(self, n, frac, seed):
        rng = np.random.default_rng(seed)
        labels = (rng.uniform(size=n) < frac).astype(np.int64)
        if labels.sum() < 3 or (n - labels.sum()) < 3:
            return
        ss = ds.SampleSet(rng.normal(size=(n, 5)), labels)
        split = ds.split_dataset(ss, seed=seed)
        n_open = labels.sum()
        for part in (split.train, split.validation, split.test):
            if len(part) == 0:
                continue
            expected = n_open * len(part) / n
            assert abs(int(part.labels.sum()) - expected) <= 1.0 + 1e-9


class TestCsvRoundTrip:
    def test_bit_identical_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        ss = random_sampleset(rng, 100)
        path = tmp_path / "d.csv"
        ds.write_csv(ss, path)
        back = ds.read_csv(path)
        assert np.array_equal(back.features, ss.features)
        assert np.array_equal(back.labels, ss.labels)

    def test_bad_label_value(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            ",".join(ds.DATASET_CSV_HEADER) + "\n" + "1,2,3,4,5,2\n"
        )
        with pytest.raises(ds.CsvParseError) as err:
            ds.read_csv(path)
        assert err.value.line_no == 2

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(",".join(ds.DATASET_CSV_HEADER) + "\n" + "1,2,3\n")
        with pytest.raises(ds.CsvSchemaError):
            ds.read_csv(path)

    def test_header_only_is_empty(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(",".join(ds.DATASET_CSV_HEADER) + "\n")
        assert len(ds.read_csv(path)) == 0

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c,d,e,f\n")
        with pytest.raises(ds.CsvSchemaError):
            ds.read_csv(path)

    def test_unparsable_feature(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(",".join(ds.DATASET_CSV_HEADER) + "\n" + "1,x,3,4,5,1\n")
        with pytest.raises(ds.CsvParseError):
            ds.read_csv(path)
