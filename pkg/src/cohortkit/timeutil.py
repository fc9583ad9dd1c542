"""Time helpers: float epoch seconds UTC everywhere, local time via fixed offsets.

Participants carry a fixed ``timezoneOffsetMinutes``; there is no DST
modeling, so local-day arithmetic is exact (every local day is 86400 s).
"""

from __future__ import annotations

import datetime as _dt

DAY_SECONDS = 86400.0

_EPOCH = _dt.date(1970, 1, 1)


def date_to_epoch_utc(d: _dt.date) -> float:
    """Epoch seconds of UTC midnight for a calendar date."""
    return (d - _EPOCH).days * DAY_SECONDS


def local_date(epoch: float, tz_offset_min: int) -> _dt.date:
    """Calendar date of an instant in the participant's fixed-offset local time."""
    shifted = epoch + tz_offset_min * 60.0
    return _EPOCH + _dt.timedelta(days=int(shifted // DAY_SECONDS))


def local_midnight_epoch(d: _dt.date, tz_offset_min: int) -> float:
    """Epoch seconds of local midnight for a local calendar date."""
    return date_to_epoch_utc(d) - tz_offset_min * 60.0


def local_seconds_of_day(epoch: float, tz_offset_min: int) -> float:
    shifted = epoch + tz_offset_min * 60.0
    return shifted % DAY_SECONDS


def local_hour(epoch: float, tz_offset_min: int) -> int:
    return int(local_seconds_of_day(epoch, tz_offset_min) // 3600)


def local_weekday(epoch: float, tz_offset_min: int) -> int:
    """Monday=0 .. Sunday=6, in participant-local time."""
    return local_date(epoch, tz_offset_min).weekday()


def parse_date(text: str) -> _dt.date:
    return _dt.date.fromisoformat(text)


def date_range(start: _dt.date, end: _dt.date) -> list[_dt.date]:
    """Inclusive list of dates from start to end."""
    if end < start:
        from .errors import InvalidRange

        raise InvalidRange(f"date range {start}..{end} is inverted")
    return [start + _dt.timedelta(days=i) for i in range((end - start).days + 1)]
