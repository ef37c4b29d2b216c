import numpy as np
import pandas as pd
import pytest

import fleethi as fh
from fleethi.datagen import GeneratorConfig
from fleethi.fleet import CycleRecord, FleetDataset, Unit
from fleethi.ingest import (DataError, apply_scaler, compute_capacity, downsample,
                            fit_scaler, inverse_scaler, load_fleet, load_scaler,
                            save_fleet, save_scaler, window_per_cycle, window_sliding)


def small_fleet(seed=0, **kw):
    base = dict(n_units=3, cycles_per_unit_range=(8, 12), samples_per_cycle=6, seed=seed)
    base.update(kw)
    return fh.generate_fleet(GeneratorConfig(**base))


def hand_fleet(cycle_lengths, p=2, k=1, unit_id="a"):
    rng = np.random.default_rng(0)
    cycles = [CycleRecord(t=i, x=rng.normal(size=(m, p)), w=rng.normal(size=(m, k)))
              for i, m in enumerate(cycle_lengths)]
    return FleetDataset(units=[Unit(id=unit_id, class_tag="default", cycles=cycles)])


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    fleet = small_fleet()
    save_fleet(fleet, tmp_path)
    back = load_fleet(tmp_path)
    assert back.equals(fleet)
    assert [u.class_tag for u in back.units] == [u.class_tag for u in fleet.units]


def test_load_empty_directory(tmp_path):
    with pytest.raises(DataError, match="no units found"):
        load_fleet(tmp_path)


def test_load_missing_column(tmp_path):
    fleet = small_fleet()
    save_fleet(fleet, tmp_path)
    f = tmp_path / "u001.csv"
    df = pd.read_csv(f)
    df.drop(columns=["x_1"]).to_csv(f, index=False)
    with pytest.raises(DataError, match="u001.*x_1"):
        load_fleet(tmp_path)


def test_load_shuffled_rows_groups_by_cycle(tmp_path):
    fleet = small_fleet()
    save_fleet(fleet, tmp_path)
    f = tmp_path / "u001.csv"
    df = pd.read_csv(f, float_precision="round_trip")
    # reorder whole cycles; within-cycle row order is preserved
    cycles = list(df["cycle"].unique())[::-1]
    pd.concat([df[df["cycle"] == c] for c in cycles]).to_csv(f, index=False,
                                                             float_format="%.17g")
    back = load_fleet(tmp_path)
    assert back.equals(fleet)


def test_require_sorted_flags_row(tmp_path):
    fleet = small_fleet()
    save_fleet(fleet, tmp_path)
    f = tmp_path / "u001.csv"
    df = pd.read_csv(f)
    pd.concat([df.iloc[10:], df.iloc[:10]]).to_csv(f, index=False)
    with pytest.raises(DataError, match="u001.*non-monotone"):
        load_fleet(tmp_path, require_sorted=True)


# ---------------------------------------------------------------------------
# Scaler
# ---------------------------------------------------------------------------

def test_scaler_maps_training_to_unit_interval():
    fleet = small_fleet()
    scaler = fit_scaler(fleet)
    scaled = apply_scaler(fleet, scaler)
    xs = np.concatenate([c.x for u in scaled.units for c in u.cycles])
    ws = np.concatenate([c.w for u in scaled.units for c in u.cycles])
    for arr in (xs, ws):
        assert arr.min() >= -1e-12 and arr.max() <= 1 + 1e-12


def test_scaler_two_point_channel():
    fleet = hand_fleet([2], p=1, k=1)
    fleet.units[0].cycles[0].x[:, 0] = [2.0, 4.0]
    scaler = fit_scaler(fleet)
    out = scaler.transform_x(np.array([[2.0], [4.0], [5.0]]))
    np.testing.assert_allclose(out[:, 0], [0.0, 1.0, 1.5])  # test value not clipped


def test_scaler_constant_channel_maps_to_zero():
    fleet = hand_fleet([3], p=1, k=1)
    fleet.units[0].cycles[0].x[:, 0] = 7.0
    scaler = fit_scaler(fleet)
    assert "x_0" in scaler.constant_channels
    np.testing.assert_allclose(scaler.transform_x(np.full((3, 1), 7.0)), 0.0)


def test_scaler_inverse_round_trip():
    fleet = small_fleet(seed=4)
    scaler = fit_scaler(fleet)
    back = inverse_scaler(apply_scaler(fleet, scaler), scaler)
    assert back.equals(fleet, atol=1e-9)


def test_scaler_persistence(tmp_path):
    scaler = fit_scaler(small_fleet())
    save_scaler(scaler, tmp_path / "scaler.json")
    back = load_scaler(tmp_path / "scaler.json")
    np.testing.assert_allclose(back.x_min, scaler.x_min)
    np.testing.assert_allclose(back.w_max, scaler.w_max)


# ---------------------------------------------------------------------------
# Downsampling
# ---------------------------------------------------------------------------

def test_downsample_stride():
    fleet = hand_fleet([7])
    out = downsample(fleet, 2)
    cyc = out.units[0].cycles[0]
    np.testing.assert_array_equal(cyc.x, fleet.units[0].cycles[0].x[[0, 2, 4, 6]])


def test_downsample_identity_and_short_cycle():
    fleet = hand_fleet([10, 3])
    assert downsample(fleet, 1) is fleet
    out = downsample(fleet, 10)
    assert out.units[0].cycles[0].n_rows == 1
    assert out.units[0].cycles[1].n_rows == 1  # keeps exactly the first row


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

def test_sliding_window_count():
    fleet = hand_fleet([50, 50])  # 100 rows
    ws = window_sliding(fleet, S=50, stride=1)
    assert ws.n_windows == 51
    assert ws.windows.shape == (51, 50, 3)


def test_sliding_window_closed_form_counts():
    rng = np.random.default_rng(1)
    for _ in range(5):
        rows = int(rng.integers(30, 90))
        S = int(rng.integers(5, 25))
        stride = int(rng.integers(1, 7))
        ws = window_sliding(hand_fleet([rows]), S=S, stride=stride)
        assert ws.n_windows == (rows - S) // stride + 1


def test_sliding_nonoverlapping_when_stride_equals_S():
    ws = window_sliding(hand_fleet([40]), S=10, stride=10)
    assert ws.n_windows == 4
    flat = ws.windows.reshape(-1, 3)
    stacked = np.concatenate([np.concatenate([c.x, c.w], axis=1)
                              for c in hand_fleet([40]).units[0].cycles])
    np.testing.assert_allclose(flat, stacked)


def test_sliding_never_crosses_units():
    rng = np.random.default_rng(0)
    units = []
    for uid in ("a", "b"):
        cycles = [CycleRecord(t=i, x=rng.normal(size=(30, 2)), w=rng.normal(size=(30, 1)))
                  for i in range(2)]
        units.append(Unit(id=uid, class_tag="default", cycles=cycles))
    fleet = FleetDataset(units=units)
    ws = window_sliding(fleet, S=50, stride=1)
    assert ws.n_windows == 2 * 11
    assert set(m.unit_id for m in ws.meta) == {"a", "b"}


def test_sliding_short_unit_in_skip_report():
    fleet = hand_fleet([4])
    ws = window_sliding(fleet, S=10, stride=1)
    assert ws.n_windows == 0
    assert ws.skipped == [("a", 4)]


def test_sliding_meta_records_last_row_cycle():
    fleet = hand_fleet([5, 5])
    ws = window_sliding(fleet, S=6, stride=1)
    assert ws.meta[0].cycle == 1  # first window's last row is already in cycle 1


def test_per_cycle_padding_and_mask():
    fleet = hand_fleet([3, 5])
    ws = window_per_cycle(fleet)
    assert ws.S == 5
    np.testing.assert_array_equal(ws.mask[0], [1, 1, 1, 0, 0])
    np.testing.assert_array_equal(ws.mask[1], np.ones(5))
    assert np.all(ws.windows[0, 3:] == 0)


def test_per_cycle_unpad_reconstructs():
    fleet = hand_fleet([4, 7, 2])
    ws = window_per_cycle(fleet)
    for i, cyc in enumerate(fleet.units[0].cycles):
        real = ws.windows[i][ws.mask[i]]
        np.testing.assert_allclose(real, np.concatenate([cyc.x, cyc.w], axis=1))


def test_per_cycle_equal_lengths_all_ones():
    fleet = hand_fleet([6, 6])
    ws = window_per_cycle(fleet)
    assert ws.S == 6
    assert ws.mask.all()


def test_channel_selection():
    fleet = hand_fleet([5], p=3, k=2)
    both = window_per_cycle(fleet, channels="both")
    only_x = window_per_cycle(fleet, channels="X")
    only_w = window_per_cycle(fleet, channels="W")
    assert both.windows.shape[2] == 5
    assert only_x.windows.shape[2] == 3 and len(only_x.w_cols) == 0
    assert only_w.windows.shape[2] == 2 and len(only_w.x_cols) == 0
    np.testing.assert_allclose(both.x(), only_x.windows)


# ---------------------------------------------------------------------------
# Battery capacity
# ---------------------------------------------------------------------------

def test_capacity_constant_current():
    assert compute_capacity(np.full(3600, 2.0), dt=1.0) == pytest.approx(2.0)


def test_capacity_zero_and_empty():
    assert compute_capacity(np.zeros(100), dt=1.0) == 0.0
    assert compute_capacity(np.array([]), dt=1.0) == 0.0


def test_capacity_two_step_profile():
    current = np.concatenate([np.full(1800, 1.0), np.full(1800, 3.0)])
    assert compute_capacity(current, dt=1.0) == pytest.approx(2.0)
