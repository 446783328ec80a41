"""Odd Poisson structures as odd fiberwise-quadratic functions on T*X.

The even canonical bracket on T*X is pinned by four axioms: bilinearity,
{z^i, p_j} = delta^i_j with {z,z} = {p,p} = 0, graded antisymmetry
{F,G} = -(-1)^{|F||G|} {G,F}, and graded Leibniz in the second slot.
These force the component formula implemented here.

The odd bracket on functions of X is the Koszul-twisted derived bracket

    {f,g}_pi = (-1)^{|f|} {{pi, f}, g} |_{p=0}

The parity twist is what makes the odd (Gerstenhaber) symmetry, Leibniz
and Jacobi identities hold on the nose; without it the symmetry fails
already for one even/odd pair.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .algebra import EVEN, ODD, SuperPolynomial, Variable, VariableTable
from .errors import DomainError, ParityError, StructureError

MOMENTUM_PREFIX = "p_"


class CotangentChart:
    """Base coordinates z^i plus conjugate momenta p_i of the same parity."""

    def __init__(self, base: VariableTable):
        for role in base.roles:
            if role == "momentum":
                raise StructureError("base table already contains momenta")
        self.base = base
        momenta = [
            Variable(MOMENTUM_PREFIX + v.name, v.parity, -v.degree if v.degree else 0, "momentum")
            for v in base.variables
        ]
        self.full = base.extended(momenta)
        self.coord_names = base.names
        self.momentum_names = tuple(MOMENTUM_PREFIX + n for n in base.names)

    @classmethod
    def build(cls, *specs) -> "CotangentChart":
        return cls(VariableTable.build(*specs))

    def __eq__(self, other):
        return isinstance(other, CotangentChart) and self.full == other.full

    def __hash__(self):
        return hash(self.full)

    def momentum_of(self, name: str) -> str:
        if name not in self.coord_names:
            raise StructureError(f"{name} is not a coordinate of this chart")
        return MOMENTUM_PREFIX + name

    def lift(self, f: SuperPolynomial) -> SuperPolynomial:
        """Inject a polynomial on the base into the full phase-space table."""
        if f.table == self.full:
            return f
        if f.table != self.base:
            raise StructureError("polynomial does not live on this chart's base")
        return f.rename({n: n for n in self.base.names}, self.full)

    def project(self, F: SuperPolynomial) -> SuperPolynomial:
        """Restrict a momentum-free phase-space polynomial back to the base."""
        for name in self.momentum_names:
            if F.depends_on(name):
                raise DomainError("polynomial depends on momenta; cannot project")
        out = self.base.zero()
        keep = [self.full.index(n) for n in self.coord_names]
        terms = {}
        for k, c in F.terms.items():
            terms[tuple(k[i] for i in keep)] = c
        return SuperPolynomial(self.base, terms)

    def is_momentum_free(self, F: SuperPolynomial) -> bool:
        return not any(F.depends_on(n) for n in self.momentum_names)


def canonical_bracket(chart: CotangentChart, F: SuperPolynomial, G: SuperPolynomial):
    """The even graded Poisson bracket on T*X forced by its four axioms."""
    if F.table != chart.full or G.table != chart.full:
        raise StructureError("canonical_bracket operands must live on the chart's phase space")
    out = chart.full.zero()
    for Fh in F.homogeneous_parts():
        pF = Fh.parity()
        for z, p in zip(chart.coord_names, chart.momentum_names):
            eps = chart.full.parity_of(z)
            dzF = Fh.deriv(z)
            dpF = Fh.deriv(p)
            term = chart.full.zero()
            if not dzF.is_zero():
                dpG = G.deriv(p)
                if not dpG.is_zero():
                    t = dzF * dpG
                    if eps:
                        t = -t
                    term = term + t
            if not dpF.is_zero():
                dzG = G.deriv(z)
                if not dzG.is_zero():
                    term = term - dpF * dzG
            if (eps * pF) & 1:
                term = -term
            out = out + term
    return out


class OddPoissonStructure:
    """An odd polynomial on T*X, homogeneous of degree 2 in the momenta."""

    def __init__(self, chart: CotangentChart, pi: SuperPolynomial, z_degree: int = None):
        if pi.table != chart.full:
            raise StructureError("pi must live on the chart's phase space")
        if not pi.is_zero() and pi.parity() != ODD:
            raise ParityError("an odd Poisson structure must be parity-odd")
        for key in pi.terms:
            pdeg = sum(
                key[chart.full.index(n)] for n in chart.momentum_names
            )
            if pdeg != 2:
                raise DomainError("pi must be homogeneous of degree 2 in the momenta")
        if z_degree is not None:
            got = pi.z_degree()
            if not pi.is_zero() and got != z_degree:
                raise DomainError(f"pi has Z-degree {got}, declared {z_degree}")
        self.chart = chart
        self.pi = pi
        self.declared_degree = z_degree
        # component table: {z^i, z^j}_pi, cached for the rewriting engine
        self._coord_brackets: dict[tuple[str, str], SuperPolynomial] = {}

    def coordinate_bracket(self, zi: str, zj: str) -> SuperPolynomial:
        got = self._coord_brackets.get((zi, zj))
        if got is None:
            got = odd_bracket(self, self.chart.base.var(zi), self.chart.base.var(zj))
            self._coord_brackets[(zi, zj)] = got
        return got

    def __repr__(self):
        return f"<OddPoissonStructure {self.pi}>"


def odd_bracket(pi: OddPoissonStructure, f: SuperPolynomial, g: SuperPolynomial):
    """Koszul-twisted derived bracket of two functions on X."""
    chart = pi.chart
    F = chart.lift(f)
    G = chart.lift(g)
    if not chart.is_momentum_free(F) or not chart.is_momentum_free(G):
        raise DomainError("odd_bracket arguments must not depend on momenta")
    out = chart.full.zero()
    for Fh in F.homogeneous_parts():
        inner = canonical_bracket(chart, pi.pi, Fh)
        res = canonical_bracket(chart, inner, G)
        if Fh.parity() == ODD:
            res = -res
        out = out + res
    # the derived bracket of momentum-free functions is momentum-free;
    # project enforces it
    return chart.project(out)


def jacobi_check(pi: OddPoissonStructure):
    """True iff {pi,pi} = 0; on failure also returns the nonzero witness."""
    w = canonical_bracket(pi.chart, pi.pi, pi.pi)
    return w.is_zero(), (None if w.is_zero() else w)


class HomogeneousVectorField:
    """Vector field on X given by components X^i(z), with an overall parity."""

    def __init__(self, base: VariableTable, components: Mapping[str, SuperPolynomial], parity: int):
        self.base = base
        self.parity = parity
        comps = {}
        for name in base.names:
            c = components.get(name, base.zero())
            if c.table != base:
                raise StructureError(f"component {name} lives on the wrong table")
            want = (parity + base.parity_of(name)) % 2
            if not c.is_zero() and c.parity() != want:
                raise ParityError(f"component {name} has parity {c.parity()}, want {want}")
            comps[name] = c
        self.components = comps

    def apply(self, f: SuperPolynomial) -> SuperPolynomial:
        """Derivation sum_i X^i d/dz^i (components to the left)."""
        out = self.base.zero()
        for name, comp in self.components.items():
            if not comp.is_zero():
                out = out + comp * f.deriv(name)
        return out

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components.values())

    def __repr__(self):
        comps = ", ".join(f"{n}: {c}" for n, c in self.components.items() if not c.is_zero())
        return f"<VectorField {comps or '0'}>"


def hamiltonian_field(pi: OddPoissonStructure, f: SuperPolynomial) -> HomogeneousVectorField:
    """X_f with components {f, z^i}_pi; parity |f| + 1."""
    base = pi.chart.base
    fb = f if f.table == base else pi.chart.project(f)
    p = fb.parity()
    if p is None:
        raise ParityError("hamiltonian_field needs a parity-homogeneous Hamiltonian")
    comps = {name: odd_bracket(pi, fb, base.var(name)) for name in base.names}
    return HomogeneousVectorField(base, comps, (p + 1) % 2)


def master_equation_expand(pi: OddPoissonStructure, Q: HomogeneousVectorField,
                           phi: SuperPolynomial) -> list[SuperPolynomial]:
    """Coefficients of {pi~, pi~} by powers of the formal-time momentum.

    pi~ = pi + Q^i p_i p_t + phi p_t^2 on T*(X x R[2]); the returned list
    [c_0, ..., c_4] consists of polynomials on the original phase space,
    all zero iff pi~ is an odd Poisson structure.
    """
    chart = pi.chart
    base = chart.base
    if Q.base != base:
        raise StructureError("Q must live on the same base as pi")
    if Q.parity != ODD and not Q.is_zero():
        raise DomainError("Q must be an odd vector field")
    phi_b = phi if phi.table == base else chart.project(phi)
    if not phi_b.is_zero() and phi_b.parity() != ODD:
        raise DomainError("phi must be an odd function")
    tvar = Variable("t", EVEN, 2 if pi.declared_degree is not None else 0, "formal-time")
    ext = CotangentChart(base.extended([tvar]))
    lift = {n: ext.full.var(n) for n in chart.full.names}
    pi_ext = pi.pi.substitute(lift, ext.full)
    p_t = ext.full.var(MOMENTUM_PREFIX + "t")
    tilde = pi_ext
    for name, comp in Q.components.items():
        if not comp.is_zero():
            comp_ext = comp.rename({n: n for n in base.names}, ext.full)
            tilde = tilde + comp_ext * ext.full.var(MOMENTUM_PREFIX + name) * p_t
    if not phi_b.is_zero():
        tilde = tilde + phi_b.rename({n: n for n in base.names}, ext.full) * p_t * p_t
    bracket = canonical_bracket(ext, tilde, tilde)
    by_power = bracket.coefficients_of(MOMENTUM_PREFIX + "t")
    out = []
    back = {n: chart.full.var(n) for n in chart.full.names}
    for k in range(5):
        c = by_power.get(k, ext.full.zero())
        if c.depends_on("t"):
            raise DomainError("unexpected dependence on the formal time")
        out.append(c.substitute(back, chart.full))
    return out


# -- standard structures ----------------------------------------------------


def darboux_poisson(chart: CotangentChart, pairs: Sequence[tuple[str, str]],
                    signs: Sequence[int] = None) -> OddPoissonStructure:
    """The odd symplectic structure with {x^i, xi_i} = sign_i on declared
    (even, odd) coordinate pairs."""
    pi = chart.full.zero()
    signs = list(signs) if signs is not None else [1] * len(pairs)
    for (x, xi), s in zip(pairs, signs):
        if chart.base.parity_of(x) != EVEN or chart.base.parity_of(xi) != ODD:
            raise ParityError("darboux pairs must be (even, odd)")
        px = chart.full.var(chart.momentum_of(x))
        pxi = chart.full.var(chart.momentum_of(xi))
        pi = pi - Fraction(s) * px * pxi
    return OddPoissonStructure(chart, pi)


def kirillov_kostant(names: Sequence[str], constants: Mapping[tuple[int, int, int], Fraction],
                     check_degree: bool = True) -> OddPoissonStructure:
    """The linear odd Poisson structure with {theta_i, theta_j} = c^k_{ij} theta_k.

    `constants` maps 1-based (i, j, k) with i < j to c^k_{ij}; antisymmetry
    in (i, j) is implied.  The Jacobi identity is *not* assumed.
    """
    base = VariableTable([Variable(n, ODD, 1, "coordinate") for n in names])
    chart = CotangentChart(base)
    pi = chart.full.zero()
    n = len(names)
    for (i, j, k), c in constants.items():
        if not (1 <= i < j <= n and 1 <= k <= n):
            raise StructureError(f"bad structure-constant index ({i},{j},{k})")
        term = (
            chart.full.var(names[k - 1])
            * chart.full.var(MOMENTUM_PREFIX + names[i - 1])
            * chart.full.var(MOMENTUM_PREFIX + names[j - 1])
        )
        pi = pi + Fraction(c) * term
    return OddPoissonStructure(chart, pi, z_degree=-1 if check_degree else None)
