import pytest

from matchkit.errors import NothingToRedo, NothingToUndo, UnknownSeq
from matchkit.provenance import EventKind, Timeline


def record_n(timeline, n, start=0):
    for i in range(start, start + n):
        timeline.record(EventKind.ACCEPT, {"i": i}, {"i": i})


class TestTimeline:
    def test_first_event_seq_and_cursor(self):
        t = Timeline()
        e = t.record(EventKind.ACCEPT, {}, {})
        assert e.seq == 1
        assert t.cursor == 1

    def test_seq_strictly_increasing(self):
        t = Timeline()
        record_n(t, 100)
        assert [e.seq for e in t.events] == list(range(1, 101))

    def test_record_after_undo_truncates_redo_branch(self):
        t = Timeline()
        record_n(t, 5)
        t.step_back()
        t.step_back()
        assert t.cursor == 3
        t.record(EventKind.REJECT, {}, {})
        assert len(t.events) == 4
        assert t.cursor == 4
        assert [e.seq for e in t.events] == [1, 2, 3, 4]
        assert not t.can_redo

    def test_undo_errors_on_empty(self):
        with pytest.raises(NothingToUndo):
            Timeline().step_back()

    def test_redo_errors_at_tip(self):
        t = Timeline()
        record_n(t, 2)
        with pytest.raises(NothingToRedo):
            t.step_forward()

    def test_undo_redo_round_trip(self):
        t = Timeline()
        record_n(t, 3)
        events_back = [t.step_back() for _ in range(3)]
        assert t.cursor == 0
        events_fwd = [t.step_forward() for _ in range(3)]
        assert t.cursor == 3
        assert events_back[::-1] == events_fwd

    def test_check_seq(self):
        t = Timeline()
        record_n(t, 3)
        t.check_seq(0)
        t.check_seq(3)
        with pytest.raises(UnknownSeq):
            t.check_seq(4)
        with pytest.raises(UnknownSeq):
            t.check_seq(-1)

    def test_serialization_round_trip(self):
        t = Timeline()
        record_n(t, 4)
        t.step_back()
        d = t.to_dict(include_inverse=True)
        restored = Timeline.from_dict(d)
        assert restored.cursor == t.cursor
        assert [e.seq for e in restored.events] == [e.seq for e in t.events]
        assert [e.payload for e in restored.events] == [e.payload for e in t.events]

    def test_export_omits_inverse_payloads(self):
        t = Timeline()
        t.record(EventKind.ACCEPT, {"a": 1}, {"secret": 2})
        d = t.to_dict()
        assert "inverse_payload" not in d["events"][0]
