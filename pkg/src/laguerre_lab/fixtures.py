"""Checked-in calibration constants.

The file is plain ``key = value`` text with a format version on top and a
SHA-256 of all preceding lines at the bottom, so an accidental edit is
caught at load time instead of silently shifting a pass/fail threshold.
"""

from __future__ import annotations

import functools
import hashlib
import math
from pathlib import Path

from .errors import ConfigError

FIXTURE_FORMAT_VERSION = 1
DEFAULT_PATH = Path(__file__).with_name("data") / "fixtures.txt"
_HEADER = "# laguerre_lab calibration fixtures"
#: digest of the fixture file this code was calibrated against
EXPECTED_SHA256 = "03285f96a6e13f10a6a7af2fe5e57c36ffa8191906e2715620a93b9e0d782d2e"


class FixtureError(ConfigError):
    pass


def _digest(lines: list[str]) -> str:
    return hashlib.sha256(("\n".join(lines) + "\n").encode("utf-8")).hexdigest()


def _parse_value(raw: str):
    try:
        value = int(raw)
    except ValueError:
        try:
            value = float(raw)
        except ValueError:
            return raw
    return value


def parse_fixtures(text: str) -> dict:
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines or lines[0] != _HEADER:
        raise FixtureError("missing fixture header")
    key, _, stored = lines[-1].partition("=")
    if key.strip() != "sha256":
        raise FixtureError("fixture file has no trailing sha256 line")
    if _digest(lines[:-1]) != stored.strip():
        raise FixtureError("fixture hash mismatch; the file was modified after calibration")
    values = {}
    for ln in lines[1:-1]:
        if not ln.strip() or ln.startswith("#"):
            continue
        k, sep, v = ln.partition("=")
        if not sep:
            raise FixtureError(f"malformed fixture line: {ln!r}")
        values[k.strip()] = _parse_value(v.strip())
    if values.get("format_version") != FIXTURE_FORMAT_VERSION:
        raise FixtureError(f"unsupported fixture format {values.get('format_version')!r}")
    return values


def format_fixtures(values: dict, comments: dict | None = None) -> str:
    comments = comments or {}
    lines = [_HEADER, f"format_version = {FIXTURE_FORMAT_VERSION}"]
    for k in sorted(values):
        if k == "format_version":
            continue
        v = values[k]
        if k in comments:
            lines.append(f"# {comments[k]}")
        lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    lines.append(f"sha256 = {_digest(lines)}")
    return "\n".join(lines) + "\n"


@functools.lru_cache(maxsize=4)
def _load(path: str) -> dict:
    return parse_fixtures(Path(path).read_text(encoding="utf-8"))


def load_fixtures(path=None) -> dict:
    """Parsed fixture values (a fresh copy; the cached original stays untouched)."""
    return dict(_load(str(path or DEFAULT_PATH)))


def fixture(key: str, path=None):
    values = load_fixtures(path)
    try:
        return values[key]
    except KeyError:
        raise FixtureError(f"fixture key {key!r} missing") from None


def values_match(stored, fresh, rtol: float = 1e-9) -> bool:
    if isinstance(stored, str) or isinstance(fresh, str):
        return stored == fresh
    return math.isclose(float(stored), float(fresh), rel_tol=rtol, abs_tol=0.0)


def stored_digest(path=None) -> str:
    """The sha256 recorded in the fixture file's last line (after checking it)."""
    text = Path(path or DEFAULT_PATH).read_text(encoding="utf-8")
    parse_fixtures(text)
    return text.rstrip("\n").splitlines()[-1].partition("=")[2].strip()


def verify_fixtures(path=None) -> tuple[bool, str]:
    """(ok, message): the file is intact and matches :data:`EXPECTED_SHA256`."""
    try:
        digest = stored_digest(path)
    except (OSError, FixtureError) as exc:
        return False, str(exc)
    if digest != EXPECTED_SHA256:
        return False, f"fixture digest {digest} differs from the expected {EXPECTED_SHA256}"
    return True, f"fixtures ok ({digest})"


def require_fixtures(path=None) -> dict:
    """Load the fixtures, refusing any file other than the calibrated one."""
    ok, message = verify_fixtures(path)
    if not ok:
        raise FixtureError(message)
    return load_fixtures(path)
