"""Exact scalars of the form  sum of  c * pi^{k/2} * sqrt(r)  with c, r
rational, r > 0; the value class of Gaussian-Berezin integrals."""

from __future__ import annotations

from fractions import Fraction

from .errors import DomainError


def _squarefree_split(n: int) -> tuple[int, int]:
    """n = s^2 * f with f squarefree; returns (s, f)."""
    if n <= 0:
        raise DomainError("square root of a nonpositive number")
    s, f = 1, 1
    d = 2
    m = n
    while d * d <= m:
        if m % d == 0:
            e = 0
            while m % d == 0:
                m //= d
                e += 1
            s *= d ** (e // 2)
            if e % 2:
                f *= d
        d += 1
    f *= m
    return s, f


class ScalarValue:
    """Formal rational combination of pi^{k/2} sqrt(f) basis elements.

    Stored as {(k, f): c} with k an integer (power of sqrt(pi)), f a
    squarefree positive integer, c a nonzero rational.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def rational(cls, c) -> "ScalarValue":
        c = Fraction(c)
        return cls({(0, 1): c} if c else {})

    @classmethod
    def zero(cls) -> "ScalarValue":
        return cls({})

    @classmethod
    def sqrt(cls, r, pi_half_power: int = 0) -> "ScalarValue":
        """sqrt(r) * pi^{pi_half_power/2} for a positive rational r."""
        r = Fraction(r)
        if r <= 0:
            raise DomainError("sqrt of a nonpositive rational")
        # sqrt(p/q) = sqrt(pq)/q
        n = r.numerator * r.denominator
        s, f = _squarefree_split(n)
        return cls({(pi_half_power, f): Fraction(s, r.denominator)})

    @classmethod
    def pi_power(cls, half_power: int, coeff=1) -> "ScalarValue":
        c = Fraction(coeff)
        return cls({(half_power, 1): c} if c else {})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ScalarValue.rational(other)
        return isinstance(other, ScalarValue) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ScalarValue.rational(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            s = terms.get(k, Fraction(0)) + v
            if s:
                terms[k] = s
            else:
                terms.pop(k, None)
        return ScalarValue(terms)

    __radd__ = __add__

    def __neg__(self):
        return ScalarValue({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ScalarValue.rational(other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ScalarValue.rational(other)
        out: dict = {}
        for (k1, f1), c1 in self.terms.items():
            for (k2, f2), c2 in other.terms.items():
                s, f = _squarefree_split(f1 * f2)
                key = (k1 + k2, f)
                c = c1 * c2 * s
                tot = out.get(key, Fraction(0)) + c
                if tot:
                    out[key] = tot
                else:
                    out.pop(key, None)
        return ScalarValue(out)

    __rmul__ = __mul__

    def __str__(self):
        if not self.terms:
            return "0"
        bits = []
        for (k, f) in sorted(self.terms):
            c = self.terms[(k, f)]
            parts = []
            if c != 1 or (k == 0 and f == 1):
                parts.append(str(c))
            if k:
                parts.append("pi" if k == 2 else f"pi^({k}/2)")
            if f != 1:
                parts.append(f"sqrt({f})")
            bits.append("*".join(parts) if parts else "1")
        return " + ".join(bits).replace("+ -", "- ")

    def __repr__(self):
        return f"<ScalarValue {self}>"
