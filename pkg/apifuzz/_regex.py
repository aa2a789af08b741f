"""
Generate strings matching a regular expression by walking its parse tree.
"""

import re
import string
import warnings

try:
    from re import _constants as C
    from re import _parser as sre_parse
except ImportError:
    # parser modules before their move under re
    import sre_constants as C
    import sre_parse

from .errors import GenerationWarning

PRINTABLE = string.ascii_letters + string.digits + string.punctuation + " "
_CATEGORIES = {
    C.CATEGORY_DIGIT: string.digits,
    C.CATEGORY_NOT_DIGIT: "".join(c for c in PRINTABLE if not c.isdigit()),
    C.CATEGORY_WORD: string.ascii_letters + string.digits + "_",
    C.CATEGORY_NOT_WORD: "".join(
        c for c in PRINTABLE if not (c.isalnum() or c == "_")
    ),
    C.CATEGORY_SPACE: " \t",
    C.CATEGORY_NOT_SPACE: "".join(c for c in PRINTABLE if c != " "),
}


class _Unsupported(Exception):
    pass


class RegexSampler(object):
    """
    Random generator of strings from a regular expression.

    Unbounded repeats (``*``, ``+``, ``{n,}``) repeat at most ``max_repeat`` times
    beyond their minimum. Lookarounds are not supported.

    Parameters
    ----------
    pattern : str
        Regular expression (Python/ECMA common subset).

    max_repeat : int, optional
        Extra repetitions allowed for unbounded quantifiers. (Default: ``4``)
    """

    def __init__(self, pattern, max_repeat=4):
        self.pattern = pattern
        self.max_repeat = max_repeat
        self.compiled = re.compile(pattern)
        try:
            self.tree = sre_parse.parse(pattern)
            self.supported = True
        except re.error:
            self.tree = None
            self.supported = False
        return

    def matches(self, text):
        """
        Unanchored match, as for OpenAPI ``pattern``.
        """
        return self.compiled.search(text) is not None

    def sample(self, rng):
        """
        Produce one string from the pattern's language.

        Parameters
        ----------
        rng : ~numpy.random.Generator
            Random stream.

        Returns
        -------
        out : str
            Generated string.

        Raises
        ------
        ValueError
            If the pattern uses an unsupported construct.
        """
        if not self.supported:
            raise ValueError(f"Cannot walk pattern {self.pattern!r}.")
        try:
            return self._walk(self.tree, rng, dict())
        except _Unsupported as e:
            raise ValueError(f"Unsupported construct in {self.pattern!r}: {e}")

    def _pick(self, alphabet, rng):
        return alphabet[int(rng.integers(len(alphabet)))]

    def _walk(self, tree, rng, groups):
        out = []
        for op, arg in tree:
            out.append(self._token(op, arg, rng, groups))
        return "".join(out)

    def _token(self, op, arg, rng, groups):
        if op == C.LITERAL:
            return chr(arg)
        if op == C.NOT_LITERAL:
            return self._pick([c for c in PRINTABLE if ord(c) != arg], rng)
        if op == C.ANY:
            return self._pick(PRINTABLE, rng)
        if op == C.IN:
            return self._pick(self._charset(arg), rng)
        if op in (C.MAX_REPEAT, C.MIN_REPEAT, getattr(C, "POSSESSIVE_REPEAT", None)):
            low, high, sub = arg
            if high == C.MAXREPEAT:
                high = low + self.max_repeat
            count = int(rng.integers(low, high + 1))
            return "".join(self._walk(sub, rng, groups) for _ in range(count))
        if op == C.SUBPATTERN:
            group, _, _, sub = arg
            text = self._walk(sub, rng, groups)
            if group is not None:
                groups[group] = text
            return text
        if op == getattr(C, "ATOMIC_GROUP", None):
            return self._walk(arg, rng, groups)
        if op == C.BRANCH:
            _, alternatives = arg
            choice = alternatives[int(rng.integers(len(alternatives)))]
            return self._walk(choice, rng, groups)
        if op == C.AT:
            return ""
        if op == C.GROUPREF:
            return groups.get(arg, "")
        raise _Unsupported(str(op))

    def _charset(self, items):
        chars = set()
        negate = False
        for op, arg in items:
            if op == C.NEGATE:
                negate = True
            elif op == C.LITERAL:
                chars.add(chr(arg))
            elif op == C.RANGE:
                low, high = arg
                chars.update(chr(c) for c in range(low, min(high, low + 512) + 1))
            elif op == C.CATEGORY:
                chars.update(_CATEGORIES.get(arg, ""))
            else:
                raise _Unsupported(str(op))
        if negate:
            alphabet = [c for c in PRINTABLE if c not in chars]
        else:
            alphabet = sorted(chars)
        if not alphabet:
            raise _Unsupported("empty character class")
        return alphabet


def sample_matching(pattern, rng, min_length=None, max_length=None, max_tries=100):
    """
    Generate a string matching ``pattern`` within length bounds.

    The parse-tree walker is tried first; if the pattern is unsupported or the
    length bounds cannot be met, random printable strings are tried. After
    ``max_tries`` attempts a :class:`~apifuzz.errors.GenerationWarning` is issued
    and the last candidate returned.

    Parameters
    ----------
    pattern : str
        Regular expression.

    rng : ~numpy.random.Generator
        Random stream.

    min_length : int, optional
        Minimum length. (Default: ``None``)

    max_length : int, optional
        Maximum length. (Default: ``None``)

    max_tries : int, optional
        Attempts before giving up. (Default: ``100``)

    Returns
    -------
    out : str
        Generated string.
    """
    try:
        sampler = RegexSampler(pattern)
    except re.error as e:
        warnings.warn(
            GenerationWarning(f"Invalid pattern {pattern!r} ({e}); generating freely.")
        )
        return "".join(PRINTABLE[int(i)] for i in rng.integers(0, 62, 8))

    def in_bounds(text):
        return (min_length is None or len(text) >= min_length) and (
            max_length is None or len(text) <= max_length
        )

    candidate = ""
    for _ in range(max_tries):
        try:
            candidate = sampler.sample(rng)
        except ValueError:
            break
        if in_bounds(candidate) and sampler.matches(candidate):
            return candidate
    lo = 0 if min_length is None else min_length
    hi = lo + 16 if max_length is None else max_length
    for _ in range(max_tries):
        n = int(rng.integers(lo, max(lo, hi) + 1))
        candidate = "".join(PRINTABLE[int(i)] for i in rng.integers(0, 62, n))
        if sampler.matches(candidate):
            return candidate
    warnings.warn(
        GenerationWarning(
            f"No string matching {pattern!r} found in {max_tries} tries; "
            "sending a non-matching value."
        )
    )
    return candidate
