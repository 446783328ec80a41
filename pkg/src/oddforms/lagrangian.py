"""Linear Lagrangian subspaces of odd symplectic vector spaces, their
delta-type semidensities, and set-theoretic composition of relations.

A chart with pairs (x^i, xi_i) and signs eps_i is viewed as the odd
symplectic vector space with pairing <x^i, xi_j> = eps_i delta_ij.  A
(graded) subspace is parity-split: an even part V inside the x-span and
an odd part W inside the xi-span; L = V + W is Lagrangian iff
W = (E V)^perp with E = diag(eps).

delta_L is built by the adapted-frame construction: a linear
symplectomorphism T with T(L) = span{x_I, xi_J} is assembled from the
reduced row echelon basis of V plus a completion, and the model
density  prod_{j notin I} delta(x_j) * prod_{i in I} xi_i  is pulled
back through T.  The RREF basis pins the orientation, so any completion
gives the same answer.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from . import linalg
from .bv import DarbouxChart, DarbouxMap, hom_chart
from .distributions import DistributionalSemidensity
from .errors import ContractError, StructureError, TransversalityError


class LagrangianSubspace:
    """Parity-split Lagrangian subspace of a chart's odd symplectic space."""

    def __init__(self, space: DarbouxChart, even_rows, odd_rows, check: bool = True):
        self.space = space
        n = space.n
        self.even = [r for r in linalg.row_space_basis([list(map(Fraction, r)) for r in even_rows])] \
            if even_rows else []
        self.odd = [r for r in linalg.row_space_basis([list(map(Fraction, r)) for r in odd_rows])] \
            if odd_rows else []
        for r in self.even + self.odd:
            if len(r) != n:
                raise StructureError("basis rows must have one entry per pair")
        if check and not self.is_lagrangian():
            raise ContractError("subspace is not Lagrangian")

    @classmethod
    def from_even_part(cls, space: DarbouxChart, even_rows) -> "LagrangianSubspace":
        """The unique Lagrangian with the given even part."""
        V = linalg.row_space_basis([list(map(Fraction, r)) for r in even_rows]) if even_rows else []
        W = cls._odd_complement(space, V)
        return cls(space, V, W, check=False)

    @staticmethod
    def _odd_complement(space: DarbouxChart, V):
        n = space.n
        if not V:
            return [linalg.basis_vector(n, i) for i in range(n)]
        VE = [[row[j] * space.signs[j] for j in range(n)] for row in V]
        return linalg.nullspace(VE, cols=n)

    def is_lagrangian(self) -> bool:
        want = linalg.row_space_basis(self._odd_complement(self.space, self.even))
        got = linalg.row_space_basis(self.odd) if self.odd else []
        return want == got

    def __eq__(self, other):
        return (
            isinstance(other, LagrangianSubspace)
            and self.space == other.space
            and self.even == other.even
            and self.odd == other.odd
        )

    def __repr__(self):
        return f"<Lagrangian even={self.even} odd={self.odd}>"

    def transform(self, A) -> "LagrangianSubspace":
        """Image under the linear symplectomorphism with even block A."""
        V = [linalg.mat_vec(A, r) for r in self.even] if self.even else []
        return LagrangianSubspace.from_even_part(self.space, V)


def delta_L(L: LagrangianSubspace, completion: str = "standard") -> DistributionalSemidensity:
    """The delta-type semidensity supported on a linear Lagrangian.

    `completion` selects the frame completion used by the adapted
    symplectomorphism; every choice yields the same canonical result.
    """
    space = L.space
    n = space.n
    V = L.even
    k = len(V)
    if k == 0:
        pivots = []
    else:
        _, pivots = linalg.rref(V)
    I = list(pivots)
    J = [j for j in range(n) if j not in I]
    # completion vectors assigned to the non-pivot targets e_j; any choice
    # keeping the RREF basis as the V-frame gives the same delta_L
    if completion == "standard":
        comp = [linalg.basis_vector(n, j) for j in J]
    elif completion == "sheared":
        shift = [sum((v[t] for v in V), Fraction(0)) for t in range(n)]
        comp = [
            [Fraction(c) + shift[t] for t, c in enumerate(linalg.basis_vector(n, j))]
            for j in J
        ]
    else:
        raise StructureError(f"unknown completion strategy {completion!r}")
    # columns of M: the RREF basis of V, then the completion vectors
    M = [[Fraction(0)] * n for _ in range(n)]
    for c, v in enumerate(V):
        for r in range(n):
            M[r][c] = v[r]
    for c, vec in enumerate(comp):
        for r in range(n):
            M[r][k + c] = Fraction(vec[r])
    if linalg.det(M) == 0:
        raise ContractError("degenerate frame completion")
    targets = I + J
    Pi = [[Fraction(0)] * n for _ in range(n)]
    for c, t in enumerate(targets):
        Pi[t][c] = Fraction(1)
    A = linalg.mat_mul(Pi, linalg.inverse(M))
    phi = DarbouxMap.linear(space, space, A)
    model = _model_density(space, I, J)
    return model.transform(phi)


def _model_density(space: DarbouxChart, I, J) -> DistributionalSemidensity:
    """prod_{j in J} delta(x_j) * prod_{i in I} xi_i on the chart."""
    P = space.one()
    for i in I:
        P = P * space.var(space.xi_names[i])
    factors = []
    for j in J:
        vec = [Fraction(0)] * space.n
        vec[j] = Fraction(1)
        factors.append((tuple(vec), 0))
    return DistributionalSemidensity.delta(space, P, factors)


def delta_L_direct(L: LagrangianSubspace) -> DistributionalSemidensity:
    """Independent construction from canonical defining data:
    products of deltas on the even defining forms and of the odd linear
    forms E v_r over the RREF basis of the even part."""
    space = L.space
    n = space.n
    V = L.even
    k = len(V)
    I = linalg.rref(V)[1] if k else []
    J = [j for j in range(n) if j not in I]
    P = space.one()
    for r in range(k):
        mu = space.zero()
        for i in range(n):
            c = V[r][i] * space.signs[i]
            if c:
                mu = mu + c * space.var(space.xi_names[i])
        P = P * mu
    factors = []
    for j in J:
        vec = [Fraction(0)] * n
        vec[j] = Fraction(1)
        for r, i in enumerate(I):
            vec[i] = -V[r][j]
        factors.append((tuple(vec), 0))
    return DistributionalSemidensity.delta(space, P, factors)


# -- relations ----------------------------------------------------------------


def lagrangian_relation(source: DarbouxChart, target: DarbouxChart,
                        even_rows, odd_rows=None) -> LagrangianSubspace:
    """A Lagrangian relation: a Lagrangian subspace of bar(source) x target."""
    chart = hom_chart(source, target)
    if odd_rows is None:
        return LagrangianSubspace.from_even_part(chart, even_rows)
    return LagrangianSubspace(chart, even_rows, odd_rows)


def graph_relation(space: DarbouxChart, A) -> LagrangianSubspace:
    """The graph of the linear symplectomorphism x -> A x."""
    n = space.n
    rows = []
    for i in range(n):
        e = linalg.basis_vector(n, i)
        rows.append(list(e) + list(linalg.mat_vec(A, e)))
    return LagrangianSubspace.from_even_part(hom_chart(space, space), rows)


def identity_relation(space: DarbouxChart) -> LagrangianSubspace:
    return graph_relation(space, linalg.identity(space.n))


def compose_relations(L1: LagrangianSubspace, L2: LagrangianSubspace) -> LagrangianSubspace:
    """Set-theoretic composition of Lagrangian relations under the exact
    transversality rank condition."""
    c1, c2 = L1.space, L2.space
    if not hasattr(c1, "factors") or not hasattr(c2, "factors"):
        raise StructureError("compose_relations needs relations on Hom charts")
    y1, y2, _, _ = c1.factors
    y2b, y3, _, _ = c2.factors
    if y2 != y2b:
        raise StructureError("middle spaces do not match")
    n1, n2, n3 = y1.n, y2.n, y3.n

    def compose_part(B1, B2, m1, m2, m3, label):
        # transversality: B1 x B2 + {(a, b, b, c)} spans Q^{m1+2m2+m3}
        total = m1 + 2 * m2 + m3
        span = []
        for r in B1:
            span.append(list(r) + [Fraction(0)] * (m2 + m3))
        for r in B2:
            span.append([Fraction(0)] * (m1 + m2) + list(r))
        for a in range(m1):
            span.append(linalg.basis_vector(total, a))
        for b in range(m2):
            v = [Fraction(0)] * total
            v[m1 + b] = Fraction(1)
            v[m1 + m2 + b] = Fraction(1)
            span.append(v)
        for c in range(m3):
            span.append(linalg.basis_vector(total, m1 + 2 * m2 + c))
        got = linalg.rank(span)
        if got != total:
            raise TransversalityError(
                f"{label} transversality fails: rank {got} < {total}"
            )
        # solutions (a, b, c) with (a,b) in B1-span and (b,c) in B2-span
        out = []
        # constraints: annihilators of B1 applied to (a,b); of B2 to (b,c)
        ann1 = linalg.nullspace(B1, cols=m1 + m2) if B1 else \
            [linalg.basis_vector(m1 + m2, i) for i in range(m1 + m2)]
        ann2 = linalg.nullspace(B2, cols=m2 + m3) if B2 else \
            [linalg.basis_vector(m2 + m3, i) for i in range(m2 + m3)]
        cons = []
        for f in ann1:
            cons.append(list(f) + [Fraction(0)] * m3)
        for f in ann2:
            cons.append([Fraction(0)] * m1 + list(f))
        sols = linalg.nullspace(cons, cols=m1 + m2 + m3) if cons else \
            [linalg.basis_vector(m1 + m2 + m3, i) for i in range(m1 + m2 + m3)]
        proj = [list(v[:m1]) + list(v[m1 + m2 :]) for v in sols]
        return linalg.row_space_basis(proj) if proj else []

    V = compose_part(L1.even, L2.even, n1, n2, n3, "even")
    W = compose_part(L1.odd, L2.odd, n1, n2, n3, "odd")
    out = LagrangianSubspace(hom_chart(y1, y3), V, W)  # Lagrangian re-verified
    return out
