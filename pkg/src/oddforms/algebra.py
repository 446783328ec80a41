"""Free graded-commutative polynomial algebra over the exact rationals.

Values are immutable; every operation returns a fresh object.  A monomial
is stored as a tuple of exponents indexed by table position, with odd
variables restricted to exponents 0 or 1.  The canonical form of a word of
odd factors is the ascending table order; sorting an unsorted word
multiplies the coefficient by the sign of the permutation, and repeated
odd factors give zero.

Sign conventions used throughout the package:

* product:            a*b = (-1)^{|a||b|} b*a  for parity-homogeneous a, b
* left derivative:    d_v(a*b) = (d_v a)*b + (-1)^{|v||a|} a*(d_v b)
* Berezin integral:   integral dv . v = 1, integral dv . 1 = 0; iterated
  integrals apply innermost-first in the written order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import DomainError, ParityError, StructureError

EVEN = 0
ODD = 1

Rat = Fraction
Key = tuple  # exponent tuple, one slot per table variable


def _rat(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise StructureError(f"not an exact rational: {value!r}")


@dataclass(frozen=True)
class Variable:
    """A declared generator: name, parity, optional integer degree, role tag."""

    name: str
    parity: int
    degree: int = None  # type: ignore[assignment]
    role: str = "coordinate"

    def __post_init__(self):
        if self.parity not in (EVEN, ODD):
            raise StructureError(f"parity of {self.name} must be 0 or 1")
        if self.degree is None:
            object.__setattr__(self, "degree", 0 if self.parity == EVEN else 1)
        if self.degree % 2 != self.parity:
            raise ParityError(
                f"variable {self.name}: degree {self.degree} incompatible with parity"
            )


class VariableTable:
    """Ordered, immutable list of variables; the context of every polynomial."""

    def __init__(self, variables: Iterable[Variable]):
        self.variables = tuple(variables)
        self.names = tuple(v.name for v in self.variables)
        if len(set(self.names)) != len(self.names):
            raise StructureError("variable names must be unique")
        self.parities = tuple(v.parity for v in self.variables)
        self.degrees = tuple(v.degree for v in self.variables)
        self.roles = tuple(v.role for v in self.variables)
        self._index = {name: i for i, name in enumerate(self.names)}
        self._zero_key = (0,) * len(self.variables)

    @classmethod
    def build(cls, *specs) -> "VariableTable":
        """Convenience constructor from (name, parity[, degree[, role]]) tuples
        or plain 'name:even'/'name:odd' strings."""
        out = []
        for spec in specs:
            if isinstance(spec, Variable):
                out.append(spec)
            elif isinstance(spec, str):
                name, _, par = spec.partition(":")
                out.append(Variable(name.strip(), ODD if par.strip() == "odd" else EVEN))
            else:
                out.append(Variable(*spec))
        return cls(out)

    def __len__(self):
        return len(self.variables)

    def __eq__(self, other):
        return (
            isinstance(other, VariableTable)
            and self.names == other.names
            and self.parities == other.parities
            and self.degrees == other.degrees
        )

    def __hash__(self):
        return hash((self.names, self.parities, self.degrees))

    def __repr__(self):
        items = ", ".join(
            f"{n}:{'odd' if p else 'even'}" for n, p in zip(self.names, self.parities)
        )
        return f"VariableTable({items})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise StructureError(f"unknown variable {name!r}") from None

    def parity_of(self, name: str) -> int:
        return self.parities[self.index(name)]

    def zero(self) -> "SuperPolynomial":
        return SuperPolynomial(self, {})

    def one(self) -> "SuperPolynomial":
        return SuperPolynomial(self, {self._zero_key: Fraction(1)})

    def constant(self, c) -> "SuperPolynomial":
        c = _rat(c)
        if c == 0:
            return self.zero()
        return SuperPolynomial(self, {self._zero_key: c})

    def var(self, name: str) -> "SuperPolynomial":
        i = self.index(name)
        key = list(self._zero_key)
        key[i] = 1
        return SuperPolynomial(self, {tuple(key): Fraction(1)})

    def monomial_parity(self, key: Key) -> int:
        p = 0
        for i, e in enumerate(key):
            if self.parities[i] and e:
                p ^= 1
        return p

    def monomial_degree(self, key: Key) -> int:
        return sum(e * d for e, d in zip(key, self.degrees))

    def extended(self, extra: Iterable[Variable]) -> "VariableTable":
        return VariableTable(self.variables + tuple(extra))


def _merge_sign(table: VariableTable, k1: Key, k2: Key):
    """Product of two monomial keys; returns (key, sign) or None on an odd square.

    The sign counts transpositions needed to merge the two ascending odd
    words into one ascending word.
    """
    out = []
    sign = 1
    # odd positions of k1 seen so far, counted from the right of the scan:
    # for each odd factor of k2 at position j, every odd factor of k1 at
    # position i > j contributes one transposition.
    odd1 = [i for i, e in enumerate(k1) if e and table.parities[i]]
    for j, e in enumerate(k2):
        if e and table.parities[j]:
            if k1[j]:
                return None
            crossings = 0
            for i in odd1:
                if i > j:
                    crossings += 1
            if crossings & 1:
                sign = -sign
    for i, (a, b) in enumerate(zip(k1, k2)):
        out.append(a + b)
    return tuple(out), sign


class SuperPolynomial:
    """Finite map {monomial key: nonzero Fraction} over a fixed table."""

    __slots__ = ("table", "terms")

    def __init__(self, table: VariableTable, terms: Mapping[Key, Fraction]):
        self.table = table
        self.terms = {k: c for k, c in terms.items() if c != 0}

    # -- basic structure ------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.table.constant(other)
        return (
            isinstance(other, SuperPolynomial)
            and self.table == other.table
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.table, tuple(sorted(self.terms.items()))))

    def _check_same_table(self, other: "SuperPolynomial"):
        if self.table != other.table:
            raise StructureError("operands live over different variable tables")

    def parity(self):
        """Parity if homogeneous, else None."""
        seen = {self.table.monomial_parity(k) for k in self.terms}
        if not seen:
            return EVEN
        if len(seen) == 1:
            return seen.pop()
        return None

    def parity_parts(self):
        """(even part, odd part)."""
        ev, od = {}, {}
        for k, c in self.terms.items():
            (od if self.table.monomial_parity(k) else ev)[k] = c
        return SuperPolynomial(self.table, ev), SuperPolynomial(self.table, od)

    def homogeneous_parts(self):
        """Parity-homogeneous components as a list (zero parts omitted)."""
        ev, od = self.parity_parts()
        return [p for p in (ev, od) if not p.is_zero()]

    def z_degree(self):
        """Integer degree if Z-homogeneous, else None."""
        seen = {self.table.monomial_degree(k) for k in self.terms}
        if not seen:
            return 0
        if len(seen) == 1:
            return seen.pop()
        return None

    def total_degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(k) for k in self.terms)

    def max_exponent(self, name: str) -> int:
        i = self.table.index(name)
        return max((k[i] for k in self.terms), default=0)

    def depends_on(self, name: str) -> bool:
        i = self.table.index(name)
        return any(k[i] for k in self.terms)

    # -- ring operations -------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.table.constant(other)
        self._check_same_table(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            s = terms.get(k, Fraction(0)) + c
            if s:
                terms[k] = s
            else:
                terms.pop(k, None)
        return SuperPolynomial(self.table, terms)

    __radd__ = __add__

    def __neg__(self):
        return SuperPolynomial(self.table, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.table.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _rat(other)
            if c == 0:
                return self.table.zero()
            return SuperPolynomial(self.table, {k: v * c for k, v in self.terms.items()})
        self._check_same_table(other)
        out: dict[Key, Fraction] = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                merged = _merge_sign(self.table, k1, k2)
                if merged is None:
                    continue
                key, sign = merged
                s = out.get(key, Fraction(0)) + sign * c1 * c2
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return SuperPolynomial(self.table, out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            raise DomainError("negative powers are not polynomial")
        out = self.table.one()
        for _ in range(n):
            out = out * self
        return out

    # -- calculus ---------------------------------------------------------

    def deriv(self, name: str) -> "SuperPolynomial":
        """Left derivative with respect to the named variable."""
        i = self.table.index(name)
        odd = self.table.parities[i]
        out: dict[Key, Fraction] = {}
        for k, c in self.terms.items():
            e = k[i]
            if not e:
                continue
            nk = list(k)
            nk[i] = e - 1
            nk = tuple(nk)
            if odd:
                # sign: commute the factor to the leftmost position past the
                # odd factors that precede it in table order
                before = sum(
                    1 for j in range(i) if k[j] and self.table.parities[j]
                )
                coef = -c if before & 1 else c
            else:
                coef = c * e
            s = out.get(nk, Fraction(0)) + coef
            if s:
                out[nk] = s
            else:
                out.pop(nk, None)
        return SuperPolynomial(self.table, out)

    def berezin(self, name: str) -> "SuperPolynomial":
        """Berezin integral over one odd variable (normalization: integral dv . v = 1)."""
        i = self.table.index(name)
        if not self.table.parities[i]:
            raise StructureError(f"Berezin integration requires an odd variable, got {name}")
        return self.deriv(name)

    def berezin_all(self, names) -> "SuperPolynomial":
        """Iterated Berezin integral; the first name is the innermost integral."""
        out = self
        for name in names:
            out = out.berezin(name)
        return out

    def substitute(self, images: Mapping[str, "SuperPolynomial"], target: VariableTable = None):
        """Algebra homomorphism sending each named variable to its image.

        Unmapped variables must exist in the target table with the same
        parity.  Images must be parity-homogeneous of the source parity.
        """
        if target is None:
            target = next(iter(images.values())).table if images else self.table
        imgs: dict[int, SuperPolynomial] = {}
        for name, img in images.items():
            i = self.table.index(name)
            if img.table != target:
                raise StructureError(f"image of {name} lives over the wrong table")
            p = img.parity()
            if not img.is_zero() and p != self.table.parities[i]:
                raise ParityError(f"image of {name} has wrong parity")
            imgs[i] = img
        occurring = set()
        for k in self.terms:
            occurring.update(i for i, e in enumerate(k) if e)
        for i in occurring:
            if i not in imgs:
                name = self.table.names[i]
                j = target._index.get(name)
                if j is None:
                    raise StructureError(
                        f"variable {name} is not mapped and does not exist in the target table"
                    )
                if target.parities[j] != self.table.parities[i]:
                    raise ParityError(f"variable {name} changes parity between tables")
                imgs[i] = target.var(name)
        power_cache: dict[tuple[int, int], SuperPolynomial] = {}

        def img_power(i, e):
            got = power_cache.get((i, e))
            if got is None:
                got = imgs[i] ** e
                power_cache[(i, e)] = got
            return got

        out = target.zero()
        for k, c in self.terms.items():
            term = target.constant(c)
            for i, e in enumerate(k):
                if e:
                    term = term * img_power(i, e)
            out = out + term
        return out

    def rename(self, mapping: Mapping[str, str], target: VariableTable):
        """Inject into another table by renaming variables (parity-preserving)."""
        images = {old: target.var(new) for old, new in mapping.items()}
        return self.substitute(images, target)

    def coefficients_of(self, name: str):
        """Decompose as sum_k (coefficient) * name^k; returns {k: polynomial
        not involving name}."""
        i = self.table.index(name)
        out: dict[int, dict[Key, Fraction]] = {}
        for k, c in self.terms.items():
            e = k[i]
            nk = list(k)
            nk[i] = 0
            out.setdefault(e, {})[tuple(nk)] = c
        return {e: SuperPolynomial(self.table, terms) for e, terms in out.items()}

    def constant_term(self) -> Fraction:
        return self.terms.get(self.table._zero_key, Fraction(0))

    def body(self) -> "SuperPolynomial":
        """The part free of odd variables."""
        out = {}
        for k, c in self.terms.items():
            if all(not (e and self.table.parities[i]) for i, e in enumerate(k)):
                out[k] = c
        return SuperPolynomial(self.table, out)

    def is_nilpotent(self) -> bool:
        return self.body().is_zero()

    def invert_unit(self) -> "SuperPolynomial":
        """Inverse of (nonzero constant) + nilpotent, via a finite geometric series."""
        c = self.constant_term()
        if c == 0 or not (self - c).is_nilpotent():
            raise DomainError("element is not a unit in the polynomial algebra")
        n = (self - c) * (Fraction(1) / c)
        out = self.table.one()
        power = self.table.one()
        k = 1
        while True:
            power = power * n
            if power.is_zero():
                break
            out = out + power * Fraction(-1) ** k
            k += 1
        return out * (Fraction(1) / c)

    def sqrt_unit(self) -> "SuperPolynomial":
        """Square root of c^2 * (1 + nilpotent) with c a positive rational;
        the root with positive body is returned."""
        c2 = self.constant_term()
        if c2 <= 0 or not (self - c2).is_nilpotent():
            raise DomainError("element is not (positive constant) + nilpotent")
        c = _rational_sqrt(c2)
        if c is None:
            raise DomainError(f"constant part {c2} is not a rational square")
        n = (self - c2) * (Fraction(1) / c2)
        # binomial series for (1+n)^{1/2}; terminates by nilpotency
        out = self.table.one()
        power = self.table.one()
        coef = Fraction(1)
        k = 0
        while True:
            power = power * n
            if power.is_zero():
                break
            k += 1
            coef = coef * (Fraction(1, 2) - (k - 1)) / k
            out = out + power * coef
        return out * c

    # -- rendering --------------------------------------------------------

    def _monomial_str(self, key: Key) -> str:
        parts = []
        for name, e in zip(self.table.names, key):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "*".join(parts)

    def __str__(self):
        if not self.terms:
            return "0"
        pieces = []
        for key in sorted(self.terms):
            c = self.terms[key]
            mon = self._monomial_str(key)
            if mon:
                mag = "" if abs(c) == 1 else f"{abs(c)}*"
                body = f"{mag}{mon}"
            else:
                body = f"{abs(c)}"
            if not pieces:
                pieces.append(body if c > 0 else f"-{body}")
            else:
                pieces.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(pieces)

    def __repr__(self):
        return f"<SuperPolynomial {self}>"


def _rational_sqrt(q: Fraction):
    """Exact square root of a nonnegative rational, or None."""
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    rn = _isqrt_exact(num)
    rd = _isqrt_exact(den)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)


def _isqrt_exact(n: int):
    import math

    r = math.isqrt(n)
    return r if r * r == n else None


# -- module-level operation aliases (the spec-facing names) ----------------


def poly_mul(a: SuperPolynomial, b: SuperPolynomial) -> SuperPolynomial:
    """Graded-commutative product with Koszul signs."""
    return a * b


def poly_deriv(name: str, a: SuperPolynomial) -> SuperPolynomial:
    """Left derivative."""
    return a.deriv(name)


def berezin_integrate(name: str, a: SuperPolynomial) -> SuperPolynomial:
    """Berezin integral over one odd variable."""
    return a.berezin(name)


def substitute(images: Mapping[str, SuperPolynomial], a: SuperPolynomial,
               target: VariableTable = None) -> SuperPolynomial:
    """Parity-preserving algebra homomorphism."""
    return a.substitute(images, target)
