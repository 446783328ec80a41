"""BV operator calculus on polynomial semidensities over odd symplectic
vector spaces.

A chart consists of n conjugate pairs (x^i even, xi_i odd) with a sign
per pair; the pairing is {x^i, xi_j} = sign_i delta_ij, and the BV
operator is

    Delta = sum_i sign_i d/dx^i d/dxi_i .

Signs -1 arise on the first factor of Hom charts (the opposite symplectic
structure).  A semidensity is a single coefficient polynomial relative to
the chart's reference semidensity; transforming to another chart
multiplies by the square root of the Berezinian of the coordinate map.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .algebra import EVEN, ODD, SuperPolynomial, Variable, VariableTable
from .errors import (
    ContractError,
    DomainError,
    ParityError,
    SingularityError,
    StructureError,
    UnsupportedMapError,
)
from .poisson import CotangentChart, OddPoissonStructure, darboux_poisson, hamiltonian_field, odd_bracket


class DarbouxChart:
    """n conjugate pairs (x even, xi odd) with per-pair signs."""

    def __init__(self, pairs: Sequence[tuple[str, str]], signs: Sequence[int] = None):
        self.pairs = tuple((x, xi) for x, xi in pairs)
        self.n = len(self.pairs)
        self.signs = tuple(int(s) for s in (signs if signs is not None else [1] * self.n))
        if any(s not in (1, -1) for s in self.signs):
            raise StructureError("pair signs must be +1 or -1")
        self.x_names = tuple(x for x, _ in self.pairs)
        self.xi_names = tuple(xi for _, xi in self.pairs)
        variables = [Variable(x, EVEN, 0, "coordinate") for x in self.x_names]
        variables += [Variable(xi, ODD, 1, "coordinate") for xi in self.xi_names]
        self.table = VariableTable(variables)
        self._cotangent = None
        self._poisson = None

    @classmethod
    def standard(cls, n: int, x: str = "x", xi: str = "xi", signs=None) -> "DarbouxChart":
        if n == 1:
            return cls([(x, xi)], signs)
        return cls([(f"{x}{i}", f"{xi}{i}") for i in range(1, n + 1)], signs)

    def __eq__(self, other):
        return (
            isinstance(other, DarbouxChart)
            and self.pairs == other.pairs
            and self.signs == other.signs
        )

    def __hash__(self):
        return hash((self.pairs, self.signs))

    def __repr__(self):
        return f"<DarbouxChart {self.pairs} signs={self.signs}>"

    def cotangent(self) -> CotangentChart:
        if self._cotangent is None:
            self._cotangent = CotangentChart(self.table)
        return self._cotangent

    def poisson(self) -> OddPoissonStructure:
        if self._poisson is None:
            self._poisson = darboux_poisson(self.cotangent(), list(self.pairs), self.signs)
        return self._poisson

    def bracket(self, f: SuperPolynomial, g: SuperPolynomial) -> SuperPolynomial:
        return odd_bracket(self.poisson(), f, g)

    def bar(self) -> "DarbouxChart":
        """The same pairs with the opposite symplectic pairing."""
        return DarbouxChart(self.pairs, [-s for s in self.signs])

    def renamed(self, prefix: str) -> "DarbouxChart":
        return DarbouxChart(
            [(prefix + x, prefix + xi) for x, xi in self.pairs], self.signs
        )

    def zero(self):
        return self.table.zero()

    def one(self):
        return self.table.one()

    def var(self, name: str):
        return self.table.var(name)


def hom_chart(source: DarbouxChart, target: DarbouxChart,
              left_prefix: str = "l_", right_prefix: str = "r_") -> DarbouxChart:
    """Chart of bar(source) x target; morphism densities live here."""
    pairs = [(left_prefix + x, left_prefix + xi) for x, xi in source.pairs]
    pairs += [(right_prefix + x, right_prefix + xi) for x, xi in target.pairs]
    signs = [-s for s in source.signs] + list(target.signs)
    chart = DarbouxChart(pairs, signs)
    chart.factors = (source, target, left_prefix, right_prefix)  # type: ignore[attr-defined]
    return chart


class Semidensity:
    """Coefficient polynomial relative to a chart's reference semidensity."""

    __slots__ = ("chart", "coeff")

    def __init__(self, chart: DarbouxChart, coeff: SuperPolynomial):
        if coeff.table != chart.table:
            raise StructureError("coefficient does not live on the chart")
        self.chart = chart
        self.coeff = coeff

    def __eq__(self, other):
        return (
            isinstance(other, Semidensity)
            and self.chart == other.chart
            and self.coeff == other.coeff
        )

    def __add__(self, other):
        if self.chart != other.chart:
            raise StructureError("semidensities on different charts")
        return Semidensity(self.chart, self.coeff + other.coeff)

    def __sub__(self, other):
        return self + Semidensity(other.chart, -other.coeff)

    def __mul__(self, scalar):
        return Semidensity(self.chart, self.coeff * Fraction(scalar))

    __rmul__ = __mul__

    def is_zero(self):
        return self.coeff.is_zero()

    def __repr__(self):
        return f"<Semidensity {self.coeff}>"


def bv_delta(s):
    """Khudaverdian's operator Delta = sum_i sign_i d/dx^i d/dxi_i.

    Accepts a Semidensity (or a raw coefficient polynomial together with
    its chart via Semidensity); distributional semidensities are handled
    by their own module.
    """
    chart, coeff = s.chart, s.coeff
    out = chart.zero()
    for (x, xi), sign in zip(chart.pairs, chart.signs):
        t = coeff.deriv(xi).deriv(x)
        out = out + (t if sign > 0 else -t)
    return Semidensity(chart, out)


# -- differential operators -------------------------------------------------


def _word_to_key(table: VariableTable, word) -> tuple:
    """Canonicalize a composition word of derivatives into an exponent key
    with the Koszul sign of the sorting permutation; None on an odd square."""
    n = len(table)
    key = [0] * n
    sign = 1
    seen: list[int] = []
    for v in word:
        if table.parities[v]:
            crossings = sum(1 for u in seen if table.parities[u] and u > v)
            if key[v]:
                return None, 0
            if crossings & 1:
                sign = -sign
        key[v] += 1
        seen.append(v)
    return tuple(key), sign


def _key_to_word(key) -> list:
    word = []
    for i, e in enumerate(key):
        word.extend([i] * e)
    return word


class DifferentialOperator:
    """Normally ordered polynomial-coefficient operator: sum coeff * d^K."""

    __slots__ = ("chart", "terms")

    def __init__(self, chart: DarbouxChart, terms: Mapping[tuple, SuperPolynomial]):
        self.chart = chart
        self.terms = {k: c for k, c in terms.items() if not c.is_zero()}

    @classmethod
    def zero(cls, chart) -> "DifferentialOperator":
        return cls(chart, {})

    @classmethod
    def multiplication(cls, chart, f: SuperPolynomial) -> "DifferentialOperator":
        return cls(chart, {(0,) * len(chart.table): f})

    @classmethod
    def derivative(cls, chart, name: str) -> "DifferentialOperator":
        key = [0] * len(chart.table)
        key[chart.table.index(name)] = 1
        return cls(chart, {tuple(key): chart.one()})

    @classmethod
    def bv(cls, chart) -> "DifferentialOperator":
        """Delta as an operator."""
        out = {}
        for (x, xi), sign in zip(chart.pairs, chart.signs):
            key = [0] * len(chart.table)
            key[chart.table.index(x)] = 1
            key[chart.table.index(xi)] = 1
            out[tuple(key)] = chart.table.constant(sign)
        return cls(chart, out)

    def key_parity(self, key) -> int:
        return sum(e * p for e, p in zip(key, self.chart.table.parities)) % 2

    def parity(self):
        seen = set()
        for k, c in self.terms.items():
            for part in c.homogeneous_parts():
                seen.add((part.parity() + self.key_parity(k)) % 2)
        if not seen:
            return EVEN
        return seen.pop() if len(seen) == 1 else None

    def __eq__(self, other):
        return (
            isinstance(other, DifferentialOperator)
            and self.chart == other.chart
            and self.terms == other.terms
        )

    def __add__(self, other):
        terms = dict(self.terms)
        for k, c in other.terms.items():
            s = terms.get(k, self.chart.zero()) + c
            if s.is_zero():
                terms.pop(k, None)
            else:
                terms[k] = s
        return DifferentialOperator(self.chart, terms)

    def __neg__(self):
        return DifferentialOperator(self.chart, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return DifferentialOperator(
            self.chart, {k: c * Fraction(scalar) for k, c in self.terms.items()}
        )

    __rmul__ = __mul__

    def apply(self, s: SuperPolynomial) -> SuperPolynomial:
        names = self.chart.table.names
        out = self.chart.zero()
        for key, c in self.terms.items():
            cur = s
            for v in reversed(_key_to_word(key)):
                cur = cur.deriv(names[v])
                if cur.is_zero():
                    break
            if not cur.is_zero():
                out = out + c * cur
        return out

    def _push(self, word: tuple, c: SuperPolynomial):
        """Normal ordering of d^word o mult(c): list of (coefficient, tail word)."""
        if not word:
            return [(c, ())]
        v = word[-1]
        rest = word[:-1]
        names = self.chart.table.names
        out = []
        for ch in c.homogeneous_parts():
            dv = ch.deriv(names[v])
            if not dv.is_zero():
                out.extend(self._push(rest, dv))
            sign = -1 if (self.chart.table.parities[v] * ch.parity()) & 1 else 1
            for c2, tail in self._push(rest, ch if sign > 0 else -ch):
                out.append((c2, tail + (v,)))
        return out

    def compose(self, other: "DifferentialOperator") -> "DifferentialOperator":
        """self o other, normally ordered."""
        if self.chart != other.chart:
            raise StructureError("operators on different charts")
        table = self.chart.table
        out: dict[tuple, SuperPolynomial] = {}
        for k1, c1 in self.terms.items():
            w1 = tuple(_key_to_word(k1))
            for k2, c2 in other.terms.items():
                for cmid, tail in self._push(w1, c2):
                    word = tail + tuple(_key_to_word(k2))
                    key, sign = _word_to_key(table, word)
                    if key is None:
                        continue
                    add = c1 * cmid * sign
                    if add.is_zero():
                        continue
                    s = out.get(key, self.chart.zero()) + add
                    if s.is_zero():
                        out.pop(key, None)
                    else:
                        out[key] = s
        return DifferentialOperator(self.chart, out)

    def commutator(self, other: "DifferentialOperator") -> "DifferentialOperator":
        """Supercommutator [A, B] = AB - (-1)^{|A||B|} BA."""
        pa, pb = self.parity(), other.parity()
        if pa is None or pb is None:
            raise ParityError("commutator needs parity-homogeneous operators")
        ba = other.compose(self)
        if (pa * pb) & 1:
            return self.compose(other) + ba
        return self.compose(other) - ba

    def adjoint(self) -> "DifferentialOperator":
        """Formal adjoint for the pairing integral(alpha beta): multiplication
        operators are self-adjoint, every derivative picks up a minus sign,
        and composition reverses with Koszul signs."""
        table = self.chart.table
        out = DifferentialOperator.zero(self.chart)
        for key, c in self.terms.items():
            word = _key_to_word(key)
            m = len(word)
            for ch in c.homogeneous_parts():
                # factor list: [mult(ch), d_{v1}, ..., d_{vm}]; reverse it with
                # Koszul signs, adjoint each factor (mult self-adjoint, d -> -d)
                pars = [ch.parity()] + [table.parities[v] for v in word]
                sign = 1
                for i in range(len(pars)):
                    for j in range(i + 1, len(pars)):
                        if pars[i] & pars[j] & 1:
                            sign = -sign
                if m & 1:
                    sign = -sign  # (-1)^m from each derivative adjoint
                # reversed word composed left of mult(ch)
                rev = tuple(reversed(word))
                acc: dict[tuple, SuperPolynomial] = {}
                for c2, tail in self._push(rev, ch):
                    k2, s2 = _word_to_key(table, tail)
                    if k2 is None:
                        continue
                    add = c2 * (sign * s2)
                    s = acc.get(k2, self.chart.zero()) + add
                    if s.is_zero():
                        acc.pop(k2, None)
                    else:
                        acc[k2] = s
                out = out + DifferentialOperator(self.chart, acc)
        return out

    def __repr__(self):
        if not self.terms:
            return "<Operator 0>"
        names = self.chart.table.names
        bits = []
        for key in sorted(self.terms):
            word = " ".join(f"D[{names[v]}]" for v in _key_to_word(key))
            bits.append(f"({self.terms[key]}){' ' + word if word else ''}")
        return "<Operator " + " + ".join(bits) + ">"


def formal_adjoint(op: DifferentialOperator) -> DifferentialOperator:
    return op.adjoint()


def bv_commutator_with(chart: DarbouxChart, f: SuperPolynomial) -> DifferentialOperator:
    """[Delta, f] as a normally ordered operator (f parity-homogeneous)."""
    delta = DifferentialOperator.bv(chart)
    return delta.commutator(DifferentialOperator.multiplication(chart, f))


# -- Lie derivative of semidensities ----------------------------------------


def graded_divergence(chart: DarbouxChart, X) -> SuperPolynomial:
    """sum_a (-1)^{|z_a| (|X|+1)} d X^a / d z_a."""
    out = chart.zero()
    for name in chart.table.names:
        comp = X.components[name]
        if comp.is_zero():
            continue
        t = comp.deriv(name)
        # factor (-1)^{|z_a| (|X|+1)}
        if chart.table.parity_of(name) and (X.parity + 1) % 2:
            t = -t
        out = out + t
    return out


def lie_derivative_semidensity(f: SuperPolynomial, s: Semidensity) -> Semidensity:
    """L_{X_f} s by the divergence formula; the overall sign is fixed so
    that [Delta, f] = L_{X_f} holds as an operator identity."""
    chart = s.chart
    if f.parity() is None:
        ev, od = f.parity_parts()
        return lie_derivative_semidensity(ev, s) + lie_derivative_semidensity(od, s)
    X = hamiltonian_field(chart.poisson(), f)
    body = X.apply(s.coeff) + Fraction(1, 2) * (graded_divergence(chart, X) * s.coeff)
    if (X.parity + 1) % 2:
        body = -body
    return Semidensity(chart, body)


# -- Darboux coordinate maps -------------------------------------------------


class DarbouxMap:
    """Polynomial coordinate map between charts, given by images of the
    source coordinates in the target variables; verified symplectic."""

    def __init__(self, source: DarbouxChart, target: DarbouxChart,
                 images: Mapping[str, SuperPolynomial], check: bool = True):
        self.source = source
        self.target = target
        self.images = dict(images)
        for name in source.table.names:
            if name not in self.images:
                raise StructureError(f"missing image for coordinate {name}")
            img = self.images[name]
            if img.table != target.table:
                raise StructureError(f"image of {name} lives on the wrong chart")
            if not img.is_zero() and img.parity() != source.table.parity_of(name):
                raise ParityError(f"image of {name} changes parity")
        if check:
            self._check_symplectic()
        self._sqrt_ber = None

    @classmethod
    def linear(cls, source: DarbouxChart, target: DarbouxChart, A) -> "DarbouxMap":
        """Block map x -> A x, xi -> E (A^-1)^T E xi with E = diag(signs)."""
        from . import linalg

        n = source.n
        if len(A) != n:
            raise StructureError("matrix size does not match the chart")
        Ainv = linalg.inverse(A)
        E_src = source.signs
        E_tgt = target.signs
        images = {}
        for i, x in enumerate(source.x_names):
            img = target.zero()
            for j, xt in enumerate(target.x_names):
                if A[i][j]:
                    img = img + Fraction(A[i][j]) * target.var(xt)
            images[x] = img
        # D = E_src A^{-T} E_tgt  keeps {x_i, xi_j} = sign^src_i delta_ij
        for i, xi in enumerate(source.xi_names):
            img = target.zero()
            for j, xit in enumerate(target.xi_names):
                coef = Fraction(E_src[i]) * Ainv[j][i] * Fraction(E_tgt[j])
                if coef:
                    img = img + coef * target.var(xit)
            images[xi] = img
        return cls(source, target, images)

    @classmethod
    def coordinate_shear(cls, chart: DarbouxChart, k: int, f: SuperPolynomial) -> "DarbouxMap":
        """Time-1 flow of the Hamiltonian psi = f(x) xi_k, with f free of x_k:

            x_k  -> x_k - sign_k f,   xi_i -> xi_i + sign_i (df/dx_i) xi_k.
        """
        xk, xik = chart.pairs[k]
        if f.depends_on(xk) or any(f.depends_on(xi) for xi in chart.xi_names):
            raise DomainError("shear potential must depend only on the other x's")
        images = {x: chart.var(x) for x in chart.x_names}
        images.update({xi: chart.var(xi) for xi in chart.xi_names})
        images[xk] = chart.var(xk) - Fraction(chart.signs[k]) * f
        for i, ((x, xi), sign) in enumerate(zip(chart.pairs, chart.signs)):
            df = f.deriv(x)
            if not df.is_zero():
                images[xi] = images[xi] + Fraction(sign) * (df * chart.var(xik))
        return cls(chart, chart, images)

    @classmethod
    def momentum_shear(cls, chart: DarbouxChart, psi: SuperPolynomial) -> "DarbouxMap":
        """Time-1 flow of an odd Hamiltonian psi(xi):

            x_i -> x_i - sign_i dpsi/dxi_i,   xi fixed.
        """
        if any(psi.depends_on(x) for x in chart.x_names):
            raise DomainError("momentum shear potential must depend only on the xi's")
        if not psi.is_zero() and psi.parity() != ODD:
            raise ParityError("shear Hamiltonian must be odd")
        images = {xi: chart.var(xi) for xi in chart.xi_names}
        for (x, xi), sign in zip(chart.pairs, chart.signs):
            images[x] = chart.var(x) - Fraction(sign) * psi.deriv(xi)
        return cls(chart, chart, images)

    def _check_symplectic(self):
        src, tgt = self.source, self.target
        names = src.table.names
        consts = {}
        for (x, xi), s in zip(src.pairs, src.signs):
            consts[(x, xi)] = Fraction(s)
        for i, u in enumerate(names):
            for v in names[i:]:
                want = tgt.table.constant(consts.get((u, v), Fraction(0)))
                got = tgt.bracket(self.images[u], self.images[v])
                if got != want:
                    raise ContractError(
                        f"not a symplectomorphism: {{{u},{v}}} maps to {got}, want {want}"
                    )

    def apply_function(self, f: SuperPolynomial) -> SuperPolynomial:
        return f.substitute(self.images, self.target.table)

    def jacobian_blocks(self):
        A = [[self.images[x].deriv(xt) for xt in self.target.x_names] for x in self.source.x_names]
        B = [[self.images[x].deriv(xit) for xit in self.target.xi_names] for x in self.source.x_names]
        C = [[self.images[xi].deriv(xt) for xt in self.target.x_names] for xi in self.source.xi_names]
        D = [[self.images[xi].deriv(xit) for xit in self.target.xi_names] for xi in self.source.xi_names]
        return A, B, C, D

    def berezinian(self) -> SuperPolynomial:
        A, B, C, D = self.jacobian_blocks()
        detD = _poly_det(D, self.target.table)
        try:
            detD_inv = detD.invert_unit()
        except DomainError as exc:
            raise SingularityError(f"odd-odd Jacobian block is not invertible: {exc}") from exc
        Dinv = _poly_matrix_inverse(D, detD_inv, self.target.table)
        n = self.source.n
        top = [
            [
                A[i][j]
                - sum(
                    (B[i][k] * Dinv[k][l] * C[l][j] for k in range(n) for l in range(n)),
                    self.target.zero(),
                )
                for j in range(n)
            ]
            for i in range(n)
        ]
        return _poly_det(top, self.target.table) * detD_inv

    def sqrt_berezinian(self) -> SuperPolynomial:
        if self._sqrt_ber is None:
            ber = self.berezinian()
            try:
                self._sqrt_ber = ber.sqrt_unit()
            except DomainError as exc:
                raise UnsupportedMapError(f"Berezinian is not a perfect square: {exc}") from exc
        return self._sqrt_ber

    def __repr__(self):
        ims = ", ".join(f"{n} -> {self.images[n]}" for n in self.source.table.names)
        return f"<DarbouxMap {ims}>"


def _poly_det(m, table: VariableTable) -> SuperPolynomial:
    n = len(m)
    if n == 0:
        return table.one()
    if n == 1:
        return m[0][0]
    out = table.zero()
    for j in range(n):
        if m[0][j].is_zero():
            continue
        minor = [[m[i][k] for k in range(n) if k != j] for i in range(1, n)]
        term = m[0][j] * _poly_det(minor, table)
        out = out + (term if j % 2 == 0 else -term)
    return out


def _poly_matrix_inverse(m, det_inv: SuperPolynomial, table: VariableTable):
    n = len(m)
    if n == 0:
        return []
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[m[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cof = _poly_det(minor, table)
            adj[j][i] = (cof if (i + j) % 2 == 0 else -cof) * det_inv
    return adj


def darboux_transform(phi: DarbouxMap, s: Semidensity) -> Semidensity:
    """Transform a semidensity: substituted coefficient times sqrt(Ber)."""
    if s.chart != phi.source:
        raise StructureError("semidensity does not live on the map's source chart")
    coeff = phi.apply_function(s.coeff) * phi.sqrt_berezinian()
    return Semidensity(phi.target, coeff)
