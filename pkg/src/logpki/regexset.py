"""Restricted domain-group patterns: ``[class]? ".*" literal-suffix``.

Patterns like ``.*\\.org`` or ``[a-h].*\\.com`` carve the domain space into
groups assignable to certificate logs.  The grammar is deliberately tiny so
that matching and pairwise overlap are decidable in constant time: a domain
matches iff it ends with the literal suffix (and, when a first-character class
is present, starts with a character from it); two patterns overlap iff one
suffix is a suffix of the other and the first-character classes intersect.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

_CLASS_CHARS = string.ascii_lowercase + string.digits
_LABEL_CHARS = set(_CLASS_CHARS + "-")


class RgxSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Rgx:
    """Normalized pattern: optional first-char ranges, wildcard body, suffix."""

    ranges: tuple | None  # ((lo, hi), ...) inclusive char ranges, or None = any
    suffix: str  # literal tail, starts with "."

    def text(self) -> str:
        """Canonical pattern text; parse(text()) round-trips."""
        cls = ""
        if self.ranges is not None:
            parts = []
            for lo, hi in self.ranges:
                parts.append(lo if lo == hi else "%s-%s" % (lo, hi))
            cls = "[%s]" % "".join(parts)
        return cls + ".*" + self.suffix.replace(".", "\\.")

    def key(self) -> bytes:
        """Ordered-map key for this pattern."""
        return self.text().encode("ascii")

    def first_char_allowed(self, ch: str) -> bool:
        if self.ranges is None:
            return True
        return any(lo <= ch <= hi for lo, hi in self.ranges)

    def matches(self, domain: str) -> bool:
        """True iff ``domain`` belongs to this group."""
        if not domain:
            raise ValueError("domain must be non-empty")
        domain = domain.lower()
        if not domain.endswith(self.suffix):
            return False
        if self.ranges is None:
            return True
        return len(domain) > len(self.suffix) and self.first_char_allowed(domain[0])


def _normalize_ranges(ranges):
    ranges = sorted(ranges)
    merged = [ranges[0]]
    for lo, hi in ranges[1:]:
        plo, phi = merged[-1]
        if ord(lo) <= ord(phi) + 1:
            merged[-1] = (plo, max(phi, hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


def parse(text: str) -> Rgx:
    """Parse pattern text; anything outside the grammar is a syntax error."""
    if not isinstance(text, str) or not text:
        raise RgxSyntaxError("empty pattern")
    pos = 0
    ranges = None
    if text.startswith("["):
        end = text.find("]")
        if end <= 1:
            raise RgxSyntaxError("unterminated or empty character class")
        body = text[1:end]
        items = []
        i = 0
        while i < len(body):
            c = body[i]
            if c not in _CLASS_CHARS:
                raise RgxSyntaxError("bad class character %r" % c)
            if i + 2 < len(body) and body[i + 1] == "-":
                d = body[i + 2]
                if d not in _CLASS_CHARS or d < c:
                    raise RgxSyntaxError("bad range %s-%s" % (c, d))
                items.append((c, d))
                i += 3
            else:
                items.append((c, c))
                i += 1
        ranges = _normalize_ranges(items)
        pos = end + 1
    if text[pos : pos + 2] != ".*":
        raise RgxSyntaxError("pattern body must be '.*'")
    pos += 2
    rest = text[pos:]
    if not rest.startswith("\\."):
        raise RgxSyntaxError("suffix must begin with an escaped dot")
    suffix = []
    i = 0
    while i < len(rest):
        if rest.startswith("\\.", i):
            suffix.append(".")
            i += 2
            continue
        c = rest[i]
        if c not in _LABEL_CHARS:
            raise RgxSyntaxError("bad suffix character %r" % c)
        suffix.append(c)
        i += 1
    out = "".join(suffix)
    if out.endswith(".") or ".." in out:
        raise RgxSyntaxError("suffix labels must be non-empty")
    return Rgx(ranges, out)


def matches(pattern, domain: str) -> bool:
    r = parse(pattern) if isinstance(pattern, str) else pattern
    return r.matches(domain)


def _class_intersects(a: Rgx, b: Rgx) -> bool:
    if a.ranges is None and b.ranges is None:
        return True
    if a.ranges is None:
        return True  # any non-empty class intersects "anything"
    if b.ranges is None:
        return True
    for lo1, hi1 in a.ranges:
        for lo2, hi2 in b.ranges:
            if max(lo1, lo2) <= min(hi1, hi2):
                return True
    return False


def overlap(r1: Rgx, r2: Rgx) -> bool:
    """True iff some domain matches both patterns."""
    s1, s2 = r1.suffix, r2.suffix
    if not (s1.endswith(s2) or s2.endswith(s1)):
        return False
    return _class_intersects(r1, r2)
