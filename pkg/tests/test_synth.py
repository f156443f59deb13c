from collections import Counter

import numpy as np
import pytest

from motionpin.features import extract_all
from motionpin.ingest import segment_pins
from motionpin.records import validate_trace
from motionpin.synth import (
    KEYPAD_OFFSETS,
    SynthConfig,
    gen_activity_trace,
    gen_session,
    gen_sessions,
    make_pin_list,
    separation_statistic,
)


class TestMakePinList:
    def test_digit_slots_balanced(self):
        pins = make_pin_list(0)
        counts = Counter("".join(pins))
        assert len(pins) == 50
        assert all(counts[str(d)] == 20 for d in range(10))

    def test_distinct(self):
        for seed in (0, 1, 2):
            assert len(set(make_pin_list(seed))) == 50

    def test_seeds_give_different_lists(self):
        assert make_pin_list(1) != make_pin_list(2)

    def test_deterministic(self):
        assert make_pin_list(5) == make_pin_list(5)


def traces_equal(a, b):
    return len(a.samples) == len(b.samples) and all(x == y for x, y in zip(a.samples, b.samples))


class TestGenSession:
    def test_deterministic_per_arguments(self):
        cfg = SynthConfig(seed=9, pins=("1234",) * 0 or make_pin_list(9))
        t1, e1 = gen_session(cfg, "user03", ["1234", "5678"])
        t2, e2 = gen_session(cfg, "user03", ["1234", "5678"])
        assert traces_equal(t1, t2)
        assert e1 == e2

    def test_zero_noise_same_pin_identical(self):
        cfg = SynthConfig(seed=1, noise_sigma=0.0, user_jitter=0.0)
        t1, _ = gen_session(cfg, "userA", ["4321"])
        t2, _ = gen_session(cfg, "userB", ["4321"])
        assert traces_equal(t1, t2)

    def test_keypad_sign_structure(self):
        cfg = SynthConfig(seed=1, noise_sigma=0.0, user_jitter=0.0)
        peaks = {}
        for pin in ("1111", "3333"):
            trace, events = gen_session(cfg, "u", [pin])
            t0 = events[0].t
            window = [s.acc[0] for s in trace.samples if t0 <= s.t <= t0 + cfg.tap_width_ms]
            peaks[pin] = max(window, key=abs)
        assert peaks["1111"] < 0 < peaks["3333"]      # dx: -1 for '1', +1 for '3'
        assert KEYPAD_OFFSETS[0] == (0.0, -1.5)       # '0' bottom-centre

    def test_traces_are_valid_and_events_aligned(self):
        cfg = SynthConfig(seed=4, n_users=1, reps=1)
        trace, events = gen_session(cfg, "user00", list(cfg.pins[:5]))
        assert validate_trace(trace) == []
        assert len(events) == 20
        assert all(e.expected_pin == e.entered_pin for e in events)

    def test_error_injection_marks_entries(self):
        cfg = SynthConfig(seed=4, entry_error_rate=1.0)
        _, events = gen_session(cfg, "user00", ["1234"])
        assert events[0].entered_pin != "1234"

    def test_segment_count_formula(self):
        cfg = SynthConfig(seed=2, n_users=2, reps=2)
        total = 0
        for session in gen_sessions(cfg):
            segs = segment_pins(session.trace, list(session.events),
                                user_id=session.user)
            total += len(segs)
        assert total == 2 * 2 * 50                    # users x reps x pins

    def test_identical_features_across_users_without_noise(self):
        cfg = SynthConfig(seed=3, noise_sigma=0.0, user_jitter=0.0)
        pins = list(cfg.pins[:4])
        rows = []
        for user in ("user00", "user01"):
            trace, events = gen_session(cfg, user, pins)
            fs = extract_all(segment_pins(trace, events, user_id=user))
            rows.append(fs.x)
        assert np.array_equal(rows[0], rows[1])

    def test_noise_monotonically_blurs_classes(self):
        stats = []
        for noise in (0.01, 0.05, 0.2):
            cfg = SynthConfig(seed=6, n_users=2, reps=1, noise_sigma=noise)
            segs = []
            for session in gen_sessions(cfg):
                segs.extend(segment_pins(session.trace, list(session.events),
                                         user_id=session.user))
            fs = extract_all(segs)
            stats.append(separation_statistic(fs.x, fs.labels))
        assert stats[0] > stats[1] > stats[2]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(sample_rate_hz=0)
        with pytest.raises(ValueError):
            SynthConfig(noise_sigma=-0.1)
        with pytest.raises(ValueError):
            SynthConfig(pins=("12345",))
        with pytest.raises(ValueError):
            SynthConfig(entry_error_rate=1.5)


class TestGenActivityTrace:
    def test_sample_count_for_standard_script(self):
        cfg = SynthConfig(seed=0)
        trace, truth = gen_activity_trace(cfg, [("sitting", 22), ("walking", 34),
                                                ("running", 25)])
        assert len(trace.samples) == (22 + 34 + 25) * 60
        assert [t[0] for t in truth] == ["sitting", "walking", "running"]
        assert truth[-1][2] == 81.0

    def test_four_call_events_four_truth_intervals(self):
        cfg = SynthConfig(seed=0)
        script = []
        for _ in range(4):
            script += [("sitting", 6), ("call_event", 8)]
        script.append(("sitting", 6))
        _, truth = gen_activity_trace(cfg, script)
        calls = [t for t in truth if t[0] == "call_event"]
        assert len(calls) == 4
        assert all(b - a == 8 for _, a, b in calls)

    def test_empty_script_rejected(self):
        with pytest.raises(ValueError):
            gen_activity_trace(SynthConfig(seed=0), [])

    def test_unknown_activity_rejected(self):
        with pytest.raises(ValueError):
            gen_activity_trace(SynthConfig(seed=0), [("flying", 10)])

    def test_non_positive_duration_rejected(self):
        with pytest.raises(ValueError):
            gen_activity_trace(SynthConfig(seed=0), [("sitting", 0)])

    def test_trace_is_valid(self):
        cfg = SynthConfig(seed=8)
        trace, _ = gen_activity_trace(cfg, [("sitting", 5), ("walking", 5)])
        assert validate_trace(trace) == []
