"""Smartphone aggregation features."""
import math

import numpy as np
import pytest

from stressseq.features.phone import (
    PHONE_FEATURE_NAMES,
    PhoneEventLog,
    haversine_m,
    phone_features,
)


def hand_haversine(lat1, lon1, lat2, lon2, radius=6371000.0):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    a = (
        math.sin((p2 - p1) / 2) ** 2
        + math.cos(p1) * math.cos(p2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2
    )
    return 2 * radius * math.asin(math.sqrt(a))


class TestPhoneFeatures:
    def test_empty_log_yields_all_zeros(self):
        out = phone_features(PhoneEventLog(events=()), (0, 600))
        assert set(out) == set(PHONE_FEATURE_NAMES)
        assert all(v == 0.0 for v in out.values())

    def test_incoming_call_counts_and_durations(self):
        log = PhoneEventLog(
            events=(
                (100, "call", ("2", "30")),
                (200, "call", ("2", "90")),
                (300, "call", ("1", "45")),
            )
        )
        out = phone_features(log, (0, 600))
        assert out["call_log_count_type2"] == 2.0
        assert out["call_log_sum_type2"] == 120.0
        assert out["call_log_count_type1"] == 1.0
        assert out["call_log_sum_type1"] == 45.0

    def test_gps_distance_at_equator(self):
        log = PhoneEventLog(
            events=((10, "gps", ("0.0", "0.0")), (20, "gps", ("0.01", "0.0")))
        )
        out = phone_features(log, (0, 600))
        np.testing.assert_allclose(out["distances_sum"], 1111.95, rtol=0.01)
        np.testing.assert_allclose(
            out["distances_sum"], hand_haversine(0.0, 0.0, 0.01, 0.0), rtol=1e-12
        )

    def test_haversine_matches_hand_formula_on_random_points(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            lat1, lat2 = rng.uniform(-80, 80, size=2)
            lon1, lon2 = rng.uniform(-179, 179, size=2)
            np.testing.assert_allclose(
                haversine_m(lat1, lon1, lat2, lon2),
                hand_haversine(lat1, lon1, lat2, lon2),
                rtol=1e-12,
            )

    def test_app_categories_count_distinct_names(self):
        categories = {"chat": "com", "game": "entertain", "tracker": "fit"}
        log = PhoneEventLog(
            events=(
                (10, "app_use", ("chat",)),
                (20, "app_use", ("chat",)),
                (30, "app_use", ("game",)),
                (40, "app_use", ("mystery",)),
            )
        )
        out = phone_features(log, (0, 600), app_categories=categories)
        assert out["appall"] == 3.0  # chat, game, mystery
        assert out["appcom"] == 1.0
        assert out["appentertain"] == 1.0
        assert out["appfit"] == 0.0  # tracker never used

    def test_accel_mean_is_mean_of_magnitudes(self):
        log = PhoneEventLog(
            events=((10, "accel", ("3", "4", "0")), (20, "accel", ("0", "0", "2")))
        )
        out = phone_features(log, (0, 600))
        np.testing.assert_allclose(out["accel_mean"], (5.0 + 2.0) / 2)

    def test_window_bounds_are_half_open_on_the_left(self):
        log = PhoneEventLog(
            events=((0, "screen", ("10",)), (300, "screen", ("20",)), (600, "screen", ("40",)))
        )
        out = phone_features(log, (0, 600))
        assert out["screen_sum"] == 60.0  # event at t_start excluded, at t_end included

    def test_conversation_and_sms(self):
        log = PhoneEventLog(
            events=(
                (10, "conversation", ("120",)),
                (20, "sms", ("1",)),
                (30, "sms", ("2",)),
                (40, "sms", ("2",)),
            )
        )
        out = phone_features(log, (0, 600))
        assert out["conversation_sum"] == 120.0
        assert out["sms_log_count_type1"] == 1.0
        assert out["sms_log_count_type2"] == 2.0

    def test_decreasing_timestamps_rejected(self):
        with pytest.raises(ValueError):
            PhoneEventLog(events=((20, "sms", ("1",)), (10, "sms", ("1",))))

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError):
            phone_features(PhoneEventLog(events=()), (600, 600))
