import re

from .errors import ConfigurationError

_UNITS = {"ms": 0.001, "s": 1.0, "m": 60.0, "h": 3600.0}
_DURATION = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ms|s|m|h)?\s*$")


def parse_duration(value):
    """
    Convert a duration to seconds.

    Parameters
    ----------
    value : str, int or float
        Number of seconds, or a string with an optional ``ms``, ``s``, ``m`` or
        ``h`` suffix, e.g. ``"30s"``, ``"10m"``, ``"1h"``.

    Returns
    -------
    out : float
        Duration in seconds, or ``None`` if ``value`` is ``None``.
    """
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise ConfigurationError(f"Negative duration: {value}")
        return float(value)
    match = _DURATION.match(str(value))
    if match is None:
        raise ConfigurationError(
            f"Invalid duration '{value}' (expected e.g. 500ms, 30s, 10m, 1h)."
        )
    number, unit = match.groups()
    return float(number) * _UNITS[unit or "s"]


def format_duration(seconds):
    """
    Render seconds compactly, e.g. ``90.0`` as ``"1m30s"``.
    """
    if seconds < 1:
        return f"{int(round(seconds * 1000))}ms"
    whole = int(seconds)
    h, rest = divmod(whole, 3600)
    m, s = divmod(rest, 60)
    out = (f"{h}h" if h else "") + (f"{m}m" if m else "") + (f"{s}s" if s else "")
    return out or "0s"
