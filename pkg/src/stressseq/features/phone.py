"""Smartphone behavioral features: app usage, calls, SMS, GPS distance, screen.

Event payload conventions (documented for the phone-log CSV):
  accel         field1..3 = x, y, z acceleration
  app_use       field1 = app name
  call          field1 = type (1 outgoing, 2 incoming), field2 = duration s
  sms           field1 = type (1 outgoing, 2 incoming)
  conversation  field1 = duration s
  gps           field1 = latitude deg, field2 = longitude deg
  screen        field1 = duration s
"""
from __future__ import annotations

import math
from dataclasses import dataclass

EVENT_KINDS = ("accel", "app_use", "call", "sms", "conversation", "gps", "screen")
APP_CATEGORIES = ("com", "entertain", "product", "social", "fit")

PHONE_FEATURE_NAMES = [
    "accel_mean",
    "appall",
    "appcom",
    "appentertain",
    "appproduct",
    "appsocial",
    "appfit",
    "call_log_count_type1",
    "call_log_count_type2",
    "call_log_sum_type1",
    "call_log_sum_type2",
    "conversation_sum",
    "distances_sum",
    "screen_sum",
    "sms_log_count_type1",
    "sms_log_count_type2",
]

EARTH_RADIUS_M = 6371000.0


@dataclass(frozen=True)
class PhoneEventLog:
    """Time-ordered smartphone events: (timestamp_seconds, kind, payload tuple)."""

    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        last = None
        for t, kind, _ in events:
            if kind not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {kind!r}")
            if last is not None and t < last:
                raise ValueError("event timestamps must be non-decreasing")
            last = t

    def in_window(self, t_start, t_end):
        return [e for e in self.events if t_start < e[0] <= t_end]


def haversine_m(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def phone_features(log: PhoneEventLog, window, app_categories: dict | None = None) -> dict:
    """Aggregate phone features over (t_start, t_end].

    ``app_categories`` maps app name -> category in APP_CATEGORIES; apps with
    no mapping count toward appall only. App counts are distinct app names.
    Absent event kinds yield zeros.
    """
    t_start, t_end = window
    if not t_start < t_end:
        raise ValueError("window must be non-empty")
    app_categories = app_categories or {}

    accel_mags = []
    apps_seen = set()
    apps_by_category = {c: set() for c in APP_CATEGORIES}
    call_count = {1: 0, 2: 0}
    call_sum = {1: 0.0, 2: 0.0}
    sms_count = {1: 0, 2: 0}
    conversation_sum = 0.0
    screen_sum = 0.0
    gps_fixes = []

    for t, kind, payload in log.in_window(t_start, t_end):
        if kind == "accel":
            x, y, z = (float(v) for v in payload[:3])
            accel_mags.append(math.sqrt(x * x + y * y + z * z))
        elif kind == "app_use":
            name = str(payload[0])
            apps_seen.add(name)
            category = app_categories.get(name)
            if category in apps_by_category:
                apps_by_category[category].add(name)
        elif kind == "call":
            call_type = int(payload[0])
            if call_type in call_count:
                call_count[call_type] += 1
                call_sum[call_type] += float(payload[1])
        elif kind == "sms":
            sms_type = int(payload[0])
            if sms_type in sms_count:
                sms_count[sms_type] += 1
        elif kind == "conversation":
            conversation_sum += float(payload[0])
        elif kind == "gps":
            gps_fixes.append((float(payload[0]), float(payload[1])))
        elif kind == "screen":
            screen_sum += float(payload[0])

    distance = 0.0
    for (lat1, lon1), (lat2, lon2) in zip(gps_fixes, gps_fixes[1:]):
        distance += haversine_m(lat1, lon1, lat2, lon2)

    return {
        "accel_mean": float(sum(accel_mags) / len(accel_mags)) if accel_mags else 0.0,
        "appall": float(len(apps_seen)),
        "appcom": float(len(apps_by_category["com"])),
        "appentertain": float(len(apps_by_category["entertain"])),
        "appproduct": float(len(apps_by_category["product"])),
        "appsocial": float(len(apps_by_category["social"])),
        "appfit": float(len(apps_by_category["fit"])),
        "call_log_count_type1": float(call_count[1]),
        "call_log_count_type2": float(call_count[2]),
        "call_log_sum_type1": call_sum[1],
        "call_log_sum_type2": call_sum[2],
        "conversation_sum": conversation_sum,
        "distances_sum": distance,
        "screen_sum": screen_sum,
        "sms_log_count_type1": float(sms_count[1]),
        "sms_log_count_type2": float(sms_count[2]),
    }


def read_app_map(path) -> dict:
    """Plain-text app_name,category mapping file."""
    mapping = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, _, category = line.partition(",")
            mapping[name.strip()] = category.strip()
    return mapping
