"""Distributional semidensities: polynomial prefactors times delta factors
on even linear forms times Gaussian weights, with exact pairing and
composition by integration.

Every stored term is kept in a canonical form:

* the delta-form arguments are row-reduced (pivot coefficient 1, pivot
  variables eliminated from the other forms); re-expanding derivatives
  uses the exact identity

      delta^(k)(u + c v) delta^(m)(v)
        = sum_j  C(m, j) (-c)^j  delta^(k+j)(u) delta^(m-j)(v)

* the prefactor and the Gaussian exponent are reduced modulo the pinned
  pivot variables; powers of a pinned form against its own delta factor
  follow  u^r delta^(k)(u) = (-1)^r k!/(k-r)! delta^(k-r)(u);

* a Gaussian weight exp(-q) keeps only the unpinned part of q.

Scaling normalization: delta^(k)(c u) = c^{-k} |c|^{-1} delta^(k)(u).

The Berezin measure convention: integrating over a chart's odd variables
applies the xi_1 integral first, so that integral(xi_1 ... xi_n) = 1.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

from .algebra import SuperPolynomial
from .bv import DarbouxChart, Semidensity, hom_chart
from .errors import (
    CompositionUndefinedError,
    DivergenceError,
    DomainError,
    StructureError,
    UnsupportedMapError,
    WavefrontError,
)
from . import linalg
from .scalars import ScalarValue

Form = tuple  # tuple[Fraction], coefficients over the chart's x variables


def _poly_key(q: SuperPolynomial) -> tuple:
    return tuple(sorted(q.terms.items()))


def _poly_from_key(chart: DarbouxChart, key: tuple) -> SuperPolynomial:
    return SuperPolynomial(chart.table, dict(key))


def form_from_poly(chart: DarbouxChart, f: SuperPolynomial) -> Form:
    """Linear even polynomial in the x's -> coefficient vector."""
    vec = [Fraction(0)] * len(chart.x_names)
    for key, c in f.terms.items():
        if sum(key) != 1:
            raise DomainError(f"delta argument must be linear, got {f}")
        i = next(i for i, e in enumerate(key) if e)
        name = chart.table.names[i]
        if name not in chart.x_names:
            raise DomainError("delta argument must involve only even variables")
        vec[chart.x_names.index(name)] = c
    return tuple(vec)


def form_to_poly(chart: DarbouxChart, vec: Form) -> SuperPolynomial:
    out = chart.zero()
    for c, name in zip(vec, chart.x_names):
        if c:
            out = out + Fraction(c) * chart.var(name)
    return out


def _delta_str(chart: DarbouxChart, vec: Form, order: int) -> str:
    arg = str(form_to_poly(chart, vec))
    tick = "'" * order if order <= 3 else f"^({order})"
    return f"delta{tick}({arg})"


class DistributionalSemidensity:
    """Finite sum of canonical terms (prefactor, delta factors, Gaussian)."""

    __slots__ = ("chart", "terms")

    def __init__(self, chart: DarbouxChart, raw_terms: Iterable[tuple] = (),
                 _canonical: dict = None):
        self.chart = chart
        if _canonical is not None:
            self.terms = {k: p for k, p in _canonical.items() if not p.is_zero()}
            return
        terms: dict = {}
        for P, deltas, q in raw_terms:
            for P2, deltas2, q2, _ in _canonical_terms(chart, P, deltas, q):
                key = (deltas2, _poly_key(q2))
                s = terms.get(key, chart.zero()) + P2
                if s.is_zero():
                    terms.pop(key, None)
                else:
                    terms[key] = s
        self.terms = terms

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_polynomial(cls, chart: DarbouxChart, P: SuperPolynomial,
                        gauss: SuperPolynomial = None) -> "DistributionalSemidensity":
        q = gauss if gauss is not None else chart.zero()
        _check_quadratic(chart, q)
        return cls(chart, [(P, (), q)])

    @classmethod
    def from_semidensity(cls, s: Semidensity) -> "DistributionalSemidensity":
        return cls.from_polynomial(s.chart, s.coeff)

    @classmethod
    def delta(cls, chart: DarbouxChart, P: SuperPolynomial,
              factors: Sequence[tuple], gauss: SuperPolynomial = None
              ) -> "DistributionalSemidensity":
        """Term P * prod delta^(k_a)(l_a) * exp(-q); factors are
        (linear polynomial or coefficient vector, order) pairs."""
        q = gauss if gauss is not None else chart.zero()
        _check_quadratic(chart, q)
        deltas = []
        for arg, k in factors:
            vec = arg if isinstance(arg, tuple) else form_from_poly(chart, arg)
            deltas.append((tuple(Fraction(c) for c in vec), int(k)))
        return cls(chart, [(P, tuple(deltas), q)])

    @classmethod
    def zero(cls, chart: DarbouxChart) -> "DistributionalSemidensity":
        return cls(chart, [])

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return (
            isinstance(other, DistributionalSemidensity)
            and self.chart == other.chart
            and self.terms == other.terms
        )

    def __add__(self, other):
        if isinstance(other, Semidensity):
            other = DistributionalSemidensity.from_semidensity(other)
        if self.chart != other.chart:
            raise StructureError("distributions on different charts")
        terms = dict(self.terms)
        for k, p in other.terms.items():
            s = terms.get(k, self.chart.zero()) + p
            if s.is_zero():
                terms.pop(k, None)
            else:
                terms[k] = s
        return DistributionalSemidensity(self.chart, _canonical=terms)

    def __neg__(self):
        return DistributionalSemidensity(
            self.chart, _canonical={k: -p for k, p in self.terms.items()}
        )

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, Fraction)):
            return DistributionalSemidensity(
                self.chart, _canonical={k: p * Fraction(scalar) for k, p in self.terms.items()}
            )
        return NotImplemented

    __rmul__ = __mul__

    def scaled_by_polynomial(self, f: SuperPolynomial) -> "DistributionalSemidensity":
        """Multiply every term's prefactor by a polynomial (recanonicalized)."""
        raw = []
        for (deltas, qk), P in self.terms.items():
            raw.append((f * P, deltas, _poly_from_key(self.chart, qk)))
        return DistributionalSemidensity(self.chart, raw)

    def bv_delta(self) -> "DistributionalSemidensity":
        """Delta = sum_i sign_i d/dx_i d/dxi_i extended by Leibniz over
        prefactor, delta factors and Gaussian weight."""
        chart = self.chart
        raw = []
        for (deltas, qk), P in self.terms.items():
            q = _poly_from_key(chart, qk)
            for i, ((x, xi), sign) in enumerate(zip(chart.pairs, chart.signs)):
                inner = P.deriv(xi)
                if inner.is_zero():
                    continue
                s = Fraction(sign)
                # d/dx on the prefactor
                t1 = inner.deriv(x)
                if not t1.is_zero():
                    raw.append((s * t1, deltas, q))
                # d/dx on each delta factor
                for a, (vec, k) in enumerate(deltas):
                    c = vec[chart.x_names.index(x)]
                    if c:
                        bumped = tuple(
                            (v, (kk + 1) if b == a else kk)
                            for b, (v, kk) in enumerate(deltas)
                        )
                        raw.append((s * c * inner, bumped, q))
                # d/dx on the Gaussian weight
                dq = q.deriv(x)
                if not dq.is_zero():
                    raw.append((-s * (inner * dq), deltas, q))
        return DistributionalSemidensity(chart, raw)

    def transform(self, phi) -> "DistributionalSemidensity":
        """Transform under a Darboux map whose x-images are homogeneous
        linear in the x's (delta arguments stay linear)."""
        chart = self.chart
        if phi.source != chart:
            raise StructureError("distribution does not live on the map's source chart")
        target = phi.target
        nx = len(chart.x_names)
        A = [[phi.images[x].deriv(xt) for xt in target.x_names] for x in chart.x_names]
        Aconst = [[None] * nx for _ in range(nx)]
        for i, x in enumerate(chart.x_names):
            img = phi.images[x]
            lin = sum((Fraction(A[i][j].constant_term()) * target.var(xt)
                       for j, xt in enumerate(target.x_names)), target.zero())
            if img != lin:
                raise UnsupportedMapError(
                    "distributional transform requires x-images linear in the x's"
                )
            for j in range(nx):
                Aconst[i][j] = A[i][j].constant_term()
        sqrt_ber = phi.sqrt_berezinian()
        raw = []
        for (deltas, qk), P in self.terms.items():
            q = _poly_from_key(chart, qk)
            newP = phi.apply_function(P) * sqrt_ber
            newq = phi.apply_function(q)
            _check_quadratic(target, newq)
            new_deltas = []
            for vec, k in deltas:
                # l(Phi x): coefficient vector pulled through A
                new_vec = tuple(
                    sum((vec[i] * Aconst[i][j] for i in range(nx)), Fraction(0))
                    for j in range(nx)
                )
                new_deltas.append((new_vec, k))
            raw.append((newP, tuple(new_deltas), newq))
        return DistributionalSemidensity(target, raw)

    def rename(self, mapping: dict, target_chart: DarbouxChart) -> "DistributionalSemidensity":
        """Inject into another chart by variable renaming."""
        raw = []
        for (deltas, qk), P in self.terms.items():
            q = _poly_from_key(self.chart, qk)
            newP = P.rename(mapping, target_chart.table)
            newq = q.rename(mapping, target_chart.table)
            new_deltas = []
            for vec, k in deltas:
                nv = [Fraction(0)] * len(target_chart.x_names)
                for c, name in zip(vec, self.chart.x_names):
                    if c:
                        nv[target_chart.x_names.index(mapping.get(name, name))] = c
                new_deltas.append((tuple(nv), k))
            raw.append((newP, tuple(new_deltas), newq))
        return DistributionalSemidensity(target_chart, raw)

    def __str__(self):
        if not self.terms:
            return "0"
        chart = self.chart
        bits = []
        for (deltas, qk) in sorted(self.terms, key=lambda t: (len(t[0]), t)):
            P = self.terms[(deltas, qk)]
            piece = f"({P})" if len(P.terms) > 1 else str(P)
            ds = " ".join(_delta_str(chart, vec, k) for vec, k in deltas)
            if ds:
                piece += " * " + ds
            q = _poly_from_key(chart, qk)
            if not q.is_zero():
                piece += f" * exp(-({q}))"
            bits.append(piece)
        return " + ".join(bits)

    def __repr__(self):
        return f"<Distribution {self}>"


def _check_quadratic(chart: DarbouxChart, q: SuperPolynomial):
    if q.is_zero():
        return
    for key, _ in q.terms.items():
        deg = 0
        for i, e in enumerate(key):
            if chart.table.names[i] not in chart.x_names and e:
                raise DomainError("Gaussian exponent must involve only even variables")
            deg += e
        if deg != 2:
            raise DomainError("Gaussian exponent must be homogeneous quadratic")


# -- canonicalization ---------------------------------------------------------


def _canonical_terms(chart: DarbouxChart, P: SuperPolynomial, deltas, q: SuperPolynomial,
                     priority: Sequence[int] = None):
    """Canonical form of one raw term; returns a list of (P, deltas, q)."""
    if P.is_zero():
        return []
    deltas = tuple(deltas)
    if not deltas:
        return [(P, (), q, ())]
    nx = len(chart.x_names)
    vectors = [list(vec) for vec, _ in deltas]
    if linalg.rank(vectors) < len(vectors):
        raise WavefrontError("delta factors with dependent arguments")
    order_cols = list(priority) if priority is not None else list(range(nx))
    order_cols += [c for c in range(nx) if c not in order_cols]

    # vector-level row reduction, recording elementary operations
    ops = []  # ("scale", row, c) or ("elim", row_b, row_p, c)
    pivots = {}  # row -> pivot column
    used_rows = set()
    for col in order_cols:
        prow = None
        for r in range(len(vectors)):
            if r not in used_rows and vectors[r][col] != 0:
                prow = r
                break
        if prow is None:
            continue
        used_rows.add(prow)
        pivots[prow] = col
        c = vectors[prow][col]
        if c != 1:
            ops.append(("scale", prow, c))
            vectors[prow] = [v / c for v in vectors[prow]]
        for r in range(len(vectors)):
            if r != prow and vectors[r][col] != 0:
                f = vectors[r][col]
                ops.append(("elim", r, prow, f))
                vectors[r] = [a - f * b for a, b in zip(vectors[r], vectors[prow])]
        if len(used_rows) == len(vectors):
            break

    # replay on (coefficient, derivative orders) branches
    branches = {tuple(k for _, k in deltas): Fraction(1)}
    for op in ops:
        new: dict = {}
        if op[0] == "scale":
            _, row, c = op
            for orders, coef in branches.items():
                k = orders[row]
                factor = Fraction(1, abs(c)) * Fraction(1, c) ** k
                new[orders] = new.get(orders, Fraction(0)) + coef * factor
        else:
            _, rb, rp, c = op
            for orders, coef in branches.items():
                kb, kp = orders[rb], orders[rp]
                for j in range(kp + 1):
                    o = list(orders)
                    o[rb] = kb + j
                    o[rp] = kp - j
                    o = tuple(o)
                    f = coef * math.comb(kp, j) * (-c) ** j
                    new[o] = new.get(o, Fraction(0)) + f
        branches = {o: c for o, c in new.items() if c}
    if not branches:
        return []

    # pivot data
    rows = sorted(pivots, key=lambda r: pivots[r])
    pivot_cols = [pivots[r] for r in rows]
    pivot_names = [chart.x_names[c] for c in pivot_cols]
    free_parts = []  # polynomial r_a with u_a = x_{p_a} + r_a
    for r in rows:
        rp = chart.zero()
        for j in range(nx):
            if j != pivots[r] and vectors[r][j]:
                rp = rp + vectors[r][j] * chart.var(chart.x_names[j])
        free_parts.append(rp)

    # expand P and q in powers of the pinned forms u_a
    P_exp = _pivot_expand(chart, P, pivot_names, free_parts)
    q_exp = _pivot_expand(chart, q, pivot_names, free_parts)
    zero_beta = (0,) * len(rows)
    q0 = q_exp.pop(zero_beta, chart.zero())
    max_total = max(sum(o) for o in branches)
    if q_exp:
        # exp(-W) expansion truncated beyond the maximal delta order
        expW: dict = {zero_beta: chart.one()}
        Wpow: dict = {zero_beta: chart.one()}
        r = 0
        while True:
            r += 1
            Wpow = _beta_mul(Wpow, q_exp, max_total)
            if not Wpow:
                break
            fac = Fraction(-1) ** r / math.factorial(r)
            for b, poly in Wpow.items():
                cur = expW.get(b, chart.zero()) + poly * fac
                if cur.is_zero():
                    expW.pop(b, None)
                else:
                    expW[b] = cur
            if r > max_total:
                break
        P_exp = _beta_mul(P_exp, expW, max_total)

    out = []
    pivot_cols_tuple = tuple(pivot_cols)
    for orders_tuple, coef in branches.items():
        orders = [orders_tuple[r] for r in rows]
        for beta, poly in P_exp.items():
            if any(b > k for b, k in zip(beta, orders)):
                continue
            factor = coef
            new_orders = []
            for b, k in zip(beta, orders):
                factor *= Fraction(-1) ** b * Fraction(
                    math.factorial(k), math.factorial(k - b)
                )
                new_orders.append(k - b)
            pref = poly * factor
            if pref.is_zero():
                continue
            key_deltas = tuple(
                (tuple(vectors[r]), new_orders[i]) for i, r in enumerate(rows)
            )
            out.append((pref, key_deltas, q0, pivot_cols_tuple))
    return out


def _pivot_expand(chart: DarbouxChart, P: SuperPolynomial, pivot_names, free_parts):
    """P as sum_beta (coef poly free of pivots) * u^beta where
    u_a = x_{p_a} + r_a."""
    rep = {(0,) * len(pivot_names): P}
    for a, (name, r_a) in enumerate(zip(pivot_names, free_parts)):
        new: dict = {}
        for beta, poly in rep.items():
            for e, c_e in poly.coefficients_of(name).items():
                # x^e = (u - r)^e
                for t in range(e + 1):
                    nb = list(beta)
                    nb[a] += t
                    coeff = math.comb(e, t) * c_e * ((-r_a) ** (e - t))
                    if coeff.is_zero():
                        continue
                    nb = tuple(nb)
                    cur = new.get(nb, chart.zero()) + coeff
                    if cur.is_zero():
                        new.pop(nb, None)
                    else:
                        new[nb] = cur
        rep = new
    return {b: p for b, p in rep.items() if not p.is_zero()}


def _beta_mul(a: dict, b: dict, max_total: int) -> dict:
    out: dict = {}
    for b1, p1 in a.items():
        for b2, p2 in b.items():
            nb = tuple(x + y for x, y in zip(b1, b2))
            if sum(nb) > max_total:
                continue
            prod = p1 * p2
            if prod.is_zero():
                continue
            cur = out.get(nb)
            cur = prod if cur is None else cur + prod
            if cur.is_zero():
                out.pop(nb, None)
            else:
                out[nb] = cur
    return out


# -- integration --------------------------------------------------------------


def _gaussian_moment(C, idxs) -> Fraction:
    """Isserlis recursion: E[prod x_i] for covariance C."""
    if not idxs:
        return Fraction(1)
    if len(idxs) % 2:
        return Fraction(0)
    i, rest = idxs[0], idxs[1:]
    total = Fraction(0)
    for pos, j in enumerate(rest):
        c = C[i][j]
        if c:
            total += c * _gaussian_moment(C, rest[:pos] + rest[pos + 1 :])
    return total


def _integrate_even(chart: DarbouxChart, P: SuperPolynomial, deltas, pivot_cols,
                    q: SuperPolynomial, variables: Sequence[str]) -> ScalarValue:
    """Integrate P * prod delta * exp(-q) over the named even variables.

    The term must already be canonical: prefactor and Gaussian free of the
    pivot variables.  Pinned derivative factors integrate to zero; the
    free directions must be strictly damped.
    """
    pivot_set = set()
    for (vec, k), col in zip(deltas, pivot_cols):
        pivot_set.add(chart.x_names[col])
        if k > 0:
            return ScalarValue.zero()
    free = [v for v in variables if v not in pivot_set]
    # the integrand must not depend on anything outside `variables`'s evens
    if not free:
        # every direction pinned; prefactor must be constant in these vars
        return ScalarValue.rational(Fraction(1)) * _as_scalar(P)
    # Gaussian matrix on the free subspace
    m = len(free)
    Q = [[Fraction(0)] * m for _ in range(m)]
    for key, c in q.terms.items():
        idxs = [i for i, e in enumerate(key) for _ in range(e)]
        names = [chart.table.names[i] for i in idxs]
        if any(n not in free for n in names):
            raise DivergenceError("Gaussian couples integrated and spectator directions")
        i, j = free.index(names[0]), free.index(names[1])
        if i == j:
            Q[i][i] += c
        else:
            Q[i][j] += c / 2
            Q[j][i] += c / 2
    if not linalg.is_positive_definite(Q):
        raise DivergenceError(
            "an even integration direction is neither pinned nor positively damped"
        )
    C = linalg.inverse(Q)
    C = [[x / 2 for x in row] for row in C]
    detQ = linalg.det(Q)
    total = Fraction(0)
    for key, c in P.terms.items():
        idxs = []
        ok = True
        for i, e in enumerate(key):
            if not e:
                continue
            name = chart.table.names[i]
            if name not in free:
                ok = False
                break
            idxs.extend([free.index(name)] * e)
        if not ok:
            raise DivergenceError("polynomial growth in an unintegrated direction")
        total += c * _gaussian_moment(C, tuple(idxs))
    if total == 0:
        return ScalarValue.zero()
    return ScalarValue.sqrt(Fraction(1) / detQ, pi_half_power=m) * total


def _as_scalar(P: SuperPolynomial) -> ScalarValue:
    if P.is_zero():
        return ScalarValue.zero()
    if P.total_degree() > 0:
        raise DivergenceError("residual dependence after integration")
    return ScalarValue.rational(P.constant_term())


def pairing(alpha: DistributionalSemidensity, beta: DistributionalSemidensity) -> ScalarValue:
    """(alpha, beta) = integral over the chart of alpha * beta."""
    if isinstance(alpha, Semidensity):
        alpha = DistributionalSemidensity.from_semidensity(alpha)
    if isinstance(beta, Semidensity):
        beta = DistributionalSemidensity.from_semidensity(beta)
    if alpha.chart != beta.chart:
        raise StructureError("pairing requires a common chart")
    chart = alpha.chart
    value = ScalarValue.zero()
    for (d1, qk1), P1 in alpha.terms.items():
        q1 = _poly_from_key(chart, qk1)
        for (d2, qk2), P2 in beta.terms.items():
            q2 = _poly_from_key(chart, qk2)
            P = P1 * P2
            if P.is_zero():
                continue
            for Pc, deltas, q, pivots in _canonical_terms(chart, P, d1 + d2, q1 + q2):
                odd_part = Pc.berezin_all(chart.xi_names)
                if odd_part.is_zero():
                    continue
                value = value + _integrate_even(
                    chart, odd_part, deltas, pivots, q, chart.x_names
                )
    return value


def transpose(m: DistributionalSemidensity) -> DistributionalSemidensity:
    """Swap the two factors of a Hom chart (the transposed relation kernel)."""
    chart = m.chart
    if not hasattr(chart, "factors"):
        raise StructureError("transpose needs a Hom chart")
    source, target, lp, rp = chart.factors
    out_chart = hom_chart(target, source, lp, rp)
    mapping = {}
    for x, xi in source.pairs:
        mapping[lp + x] = rp + x
        mapping[lp + xi] = rp + xi
    for x, xi in target.pairs:
        mapping[rp + x] = lp + x
        mapping[rp + xi] = lp + xi
    return m.rename(mapping, out_chart)


def compose(m1: DistributionalSemidensity, m2: DistributionalSemidensity
            ) -> DistributionalSemidensity:
    """Composition Hom(Y1,Y2) x Hom(Y2,Y3) -> Hom(Y1,Y3) by integration
    over the middle factor."""
    c1, c2 = m1.chart, m2.chart
    if not hasattr(c1, "factors") or not hasattr(c2, "factors"):
        raise StructureError("compose needs morphism densities on Hom charts")
    y1, y2, lp1, rp1 = c1.factors
    y2b, y3, lp2, rp2 = c2.factors
    if y2 != y2b:
        raise StructureError("middle spaces do not match")
    # big auxiliary chart: a_(Y1, sign -), b_(Y2), c_(Y3)
    pairs = [("a_" + x, "a_" + xi) for x, xi in y1.pairs]
    pairs += [("b_" + x, "b_" + xi) for x, xi in y2.pairs]
    pairs += [("c_" + x, "c_" + xi) for x, xi in y3.pairs]
    signs = [-s for s in y1.signs] + list(y2.signs) + list(y3.signs)
    big = DarbouxChart(pairs, signs)
    map1 = {}
    for x, xi in y1.pairs:
        map1[lp1 + x] = "a_" + x
        map1[lp1 + xi] = "a_" + xi
    for x, xi in y2.pairs:
        map1[rp1 + x] = "b_" + x
        map1[rp1 + xi] = "b_" + xi
    map2 = {}
    for x, xi in y2.pairs:
        map2[lp2 + x] = "b_" + x
        map2[lp2 + xi] = "b_" + xi
    for x, xi in y3.pairs:
        map2[rp2 + x] = "c_" + x
        map2[rp2 + xi] = "c_" + xi
    k1 = m1.rename(map1, big)
    k2 = m2.rename(map2, big)

    mid_x = ["b_" + x for x, _ in y2.pairs]
    mid_xi = ["b_" + xi for _, xi in y2.pairs]
    mid_cols = [big.x_names.index(n) for n in mid_x]
    # the middle Berezin measure sits between the two kernels: bringing it
    # to the left past a term of the first kernel costs (-1)^{dim Y2 * |term|},
    # which is what makes the diagonal density a strict two-sided unit
    n_mid = y2.n
    out_chart = hom_chart(y1, y3)
    out_map = {}
    for x, xi in y1.pairs:
        out_map["a_" + x] = "l_" + x
        out_map["a_" + xi] = "l_" + xi
    for x, xi in y3.pairs:
        out_map["c_" + x] = "r_" + x
        out_map["c_" + xi] = "r_" + xi

    raw_out = []
    for (d1, qk1), P1 in k1.terms.items():
        q1 = _poly_from_key(big, qk1)
        for (d2, qk2), P2 in k2.terms.items():
            q2 = _poly_from_key(big, qk2)
            P = big.zero()
            for part in P1.homogeneous_parts():
                signed = part * (Fraction(-1) ** (n_mid * part.parity()))
                P = P + signed * P2
            if P.is_zero():
                continue
            for Pc, deltas, q, pivots in _canonical_terms(big, P, d1 + d2, q1 + q2,
                                                          priority=mid_cols):
                odd_part = Pc.berezin_all(mid_xi)
                if odd_part.is_zero():
                    continue
                # split delta factors into consumed (pivot on middle) and kept
                kept = []
                pinned_mid = set()
                drop = False
                for (vec, k), col in zip(deltas, pivots):
                    if big.x_names[col] in mid_x:
                        pinned_mid.add(big.x_names[col])
                        if k > 0:
                            drop = True  # integral of a bare derivative is zero
                            break
                    else:
                        kept.append((vec, k))
                if drop:
                    continue
                unpinned = [n for n in mid_x if n not in pinned_mid]
                if unpinned:
                    raise CompositionUndefinedError(
                        f"middle directions {unpinned} are not pinned by delta factors"
                    )
                # canonical data is free of pivot variables, so the middle
                # integral of the kept part is direct
                for name in mid_x:
                    if odd_part.depends_on(name) or q.depends_on(name) or any(
                        vec[big.x_names.index(name)] for vec, _ in kept
                    ):
                        raise CompositionUndefinedError(
                            f"residual dependence on middle direction {name}"
                        )
                new_deltas = []
                for vec, k in kept:
                    nv = [Fraction(0)] * len(out_chart.x_names)
                    for cc, name in zip(vec, big.x_names):
                        if cc:
                            nv[out_chart.x_names.index(out_map[name])] = cc
                    new_deltas.append((tuple(nv), k))
                raw_out.append(
                    (
                        odd_part.rename(out_map, out_chart.table),
                        tuple(new_deltas),
                        q.rename(out_map, out_chart.table),
                    )
                )
    return DistributionalSemidensity(out_chart, raw_out)
