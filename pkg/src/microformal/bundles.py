"""Nonlinear fiberwise maps of vector bundles over a fixed base, their
adjoint (even) and antiadjoint (odd) thick morphisms, and the induced
nonlinear pushforwards.
"""
from __future__ import annotations

from dataclasses import dataclass

from .charts import (BundleChart, ChartError, mx_even_assignment, mx_odd_assignment)
from .kernel import ParityError, Series, VariableTable
from .thick import (ThickMorphism, collapse, compose, pullback, target_momenta,
                    thick_morphism)


@dataclass(frozen=True)
class FiberwiseMap:
    """``w^alpha = Phi^alpha(x, u)`` over the identity of the common base."""

    source: BundleChart
    target: BundleChart
    components: tuple

    def __post_init__(self):
        if not self.source.same_base(self.target):
            raise ChartError(f"{self.source.name} and {self.target.name} have different bases")
        if len(self.components) != self.target.rank:
            raise ChartError(f"need {self.target.rank} components, got {len(self.components)}")
        allowed = {v.id for v in self.source.base + self.source.fibers}
        for w, c in zip(self.target.fibers, self.components):
            p = c.require_parity(f"component for {w.name}")
            if not c.is_zero() and p != w.parity:
                raise ParityError(f"component for {w.name} must have parity {w.parity}")
            stray = sorted(c.table[v].name for v in c.variables()
                           if v not in allowed and c.table[v].cls != "parameter")
            if stray:
                raise ChartError(f"component for {w.name} involves {stray}")

    @property
    def table(self) -> VariableTable:
        return self.components[0].table

    def then(self, outer: "FiberwiseMap") -> "FiberwiseMap":
        """``outer o self``."""
        a = dict(zip(outer.source.fibers, self.components))
        return FiberwiseMap(self.source, outer.target,
                            tuple(c.substitute(a) for c in outer.components))

    def is_linear(self) -> bool:
        fib = {u.id for u in self.source.fibers}
        return all(sum(e for v, e in m if v in fib) == 1
                   for c in self.components for m in c.terms)

    def relation_generating_function(self, table, odd=False) -> Series:
        """``x^a q_a + Phi^alpha(x, u) q_alpha`` for the graph of the map in
        ``T*E2 x T*E1`` (``Pi T*`` with antimomenta when ``odd``)."""
        qs = target_momenta(table, self.target.total(), odd)
        nb = len(self.source.base)
        S = Series.zero(table)
        for x, q in zip(self.source.base, qs[:nb]):
            S = S + table.var(x) * table.var(q)
        for c, q in zip(self.components, qs[nb:]):
            S = S + c * table.var(q)
        return S


def fiberwise_map(source: BundleChart, target: BundleChart, components) -> FiberwiseMap:
    return FiberwiseMap(source, target, tuple(components))


def adjoint_generating_function(phi: FiberwiseMap) -> Series:
    """``S* = x^a p_a + Phi^alpha(x, (-1)^i p^i) w_alpha`` on ``(x, w_alpha; p_a, p^i)``."""
    table = phi.table
    E1, E2 = phi.source, phi.target
    ps = target_momenta(table, E1.dual(), False)
    nb = len(E1.base)
    sub = {u: table.var(p).scale(-1 if u.parity else 1) for u, p in zip(E1.fibers, ps[nb:])}
    S = Series.zero(table)
    for x, p in zip(E1.base, ps[:nb]):
        S = S + table.var(x) * table.var(p)
    for c, w in zip(phi.components, E2.dual_fibers):
        S = S + c.substitute(sub) * table.var(w)
    return S


def adjoint(phi: FiberwiseMap, lift: bool = True) -> ThickMorphism:
    """Even thick morphism ``E2* => E1*``.

    ``lift=False`` keeps the zero-momentum term ``Phi(x, 0) w`` without the
    factor ``eps``; compositions of such adjoints still terminate because
    the fixed-point system is triangular.
    """
    return thick_morphism(phi.target.dual(), phi.source.dual(),
                          adjoint_generating_function(phi), odd=False, lift=lift)


def antiadjoint_generating_function(phi: FiberwiseMap) -> Series:
    """``S = x^a x*_a + Phi^alpha(x, eta*^i) zeta_alpha`` on
    ``(x, zeta_alpha; x*_a, eta*^i)``; no parity signs occur."""
    table = phi.table
    E1, E2 = phi.source, phi.target
    ss = target_momenta(table, E1.antidual(), True)
    nb = len(E1.base)
    sub = {u: table.var(s) for u, s in zip(E1.fibers, ss[nb:])}
    S = Series.zero(table)
    for x, s in zip(E1.base, ss[:nb]):
        S = S + table.var(x) * table.var(s)
    for c, z in zip(phi.components, E2.antidual_fibers):
        S = S + c.substitute(sub) * table.var(z)
    return S


def antiadjoint(phi: FiberwiseMap, lift: bool = True) -> ThickMorphism:
    """Odd thick morphism ``Pi E2* => Pi E1*``."""
    return thick_morphism(phi.target.antidual(), phi.source.antidual(),
                          antiadjoint_generating_function(phi), odd=True, lift=lift)


def pushforward(phi: FiberwiseMap, f: Series, K: int, D: int | None = None) -> Series:
    """``Phi_*[eps*f]``: pullback of ``f`` on ``E1*`` along the adjoint."""
    return pullback(adjoint(phi), f, K, D)


def pushforward_odd(phi: FiberwiseMap, f: Series, K: int, D: int | None = None) -> Series:
    """Odd pushforward of ``f`` on ``Pi E1*`` along the antiadjoint."""
    return pullback(antiadjoint(phi), f, K, D)


def section_function(table, E: BundleChart, v, odd=False) -> Series:
    """Fiberwise-linear function ``v^i(x) u_i`` (or ``v^i(x) eta_i``)."""
    coords = E.antidual_fibers if odd else E.dual_fibers
    out = Series.zero(table)
    for vi, u in zip(v, coords):
        out = out + vi * table.var(u)
    return out


def push_section(phi: FiberwiseMap, v, odd=False) -> Series:
    """``Phi^alpha(x, v(x)) w_alpha``: the section ``Phi o v`` as a function."""
    table = phi.table
    a = dict(zip(phi.source.fibers, v))
    return section_function(table, phi.target, [c.substitute(a) for c in phi.components], odd)


def matrix_adjoint_pullback(phi: FiberwiseMap, f: Series) -> Series:
    """Classical dual map for a fiberwise-linear ``Phi``: ``u_i -> Phi_i^alpha w_alpha``."""
    if not phi.is_linear():
        raise ValueError("matrix adjoint needs a fiberwise-linear map")
    table = phi.table
    a = {}
    for u, ud in zip(phi.source.fibers, phi.source.dual_fibers):
        img = Series.zero(table)
        for c, w in zip(phi.components, phi.target.dual_fibers):
            # Phi^alpha = u^i Phi_i^alpha
            img = img + c.left_derivative(u) * table.var(w)
        a[ud] = img
    return f.substitute(a)


def adjoint_contravariance_check(phi32: FiberwiseMap, phi21: FiberwiseMap, K: int, D: int,
                                 odd: bool = False, lift: bool = False) -> Series:
    """``(Phi32 o Phi21)^* - Phi21^* o Phi32^*`` as generating functions.

    By default the generating functions are used as they are. With ``lift``
    both sides are in eps-form; the two eps-forms agree only when the maps
    preserve the zero section, since composing regrades ``Phi(x, 0)``.
    """
    adj = antiadjoint if odd else adjoint
    direct = adj(phi21.then(phi32), lift).body
    composite = compose(adj(phi21, lift), adj(phi32, lift), K, D).body
    return direct.with_truncation(composite.truncation) - composite


def geometric_adjoint_residual(phi: FiberwiseMap, odd: bool = False) -> list:
    """Compare the adjoint's relation with the Mackenzie-Xu image of the graph.

    The graph of ``Phi`` is parametrized by ``(x, u, q_a, q_alpha)``. Its
    image under ``kappa x kappa`` is evaluated against the relation cut out
    by the adjoint generating function: target coordinates equal
    ``sign * dS*/d(target momenta)`` and source momenta equal
    ``dS*/d(source coordinates)``. Returns one residual per equation.
    """
    table = phi.table
    E1, E2 = phi.source, phi.target
    mx = mx_odd_assignment if odd else mx_even_assignment
    lift = (lambda c: c.anticotangent(table)) if odd else (lambda c: c.cotangent(table))
    S = phi.relation_generating_function(table, odd)
    T1 = lift(E1.total())
    T2 = lift(E2.total())
    # point of the graph: E1 side (x, u, dS/dx, dS/du), E2 side (x, Phi, q)
    e1_point = {v: table.var(v) for v in E1.total().coords}
    for v, p in T1.pairs:
        e1_point[p] = S.left_derivative(v)
    e2_point = {v: table.var(v) for v in E2.base}
    for w, c in zip(E2.fibers, phi.components):
        e2_point[w] = c
    for _, q in T2.pairs:
        e2_point[q] = table.var(q)
    # kappa* expresses dual-side coordinates through E-side ones
    a1, _ = mx(table, E1)
    a2, _ = mx(table, E2)
    dual1 = lift(E1.antidual() if odd else E1.dual())
    dual2 = lift(E2.antidual() if odd else E2.dual())

    def image(a, point, chart):
        out = {}
        for v in list(chart.base.coords) + list(chart.momenta):
            expr = a.get(v, table.var(v))
            out[v] = expr.substitute(point)
        return out

    im1 = image(a1, e1_point, dual1)
    im2 = image(a2, e2_point, dual2)
    adj = antiadjoint(phi) if odd else adjoint(phi)
    Sstar = collapse(adj.body)
    # evaluate at source coordinates (dual2) and target momenta (dual1)
    src_vals = {v: im2[v] for v in dual2.base.coords}
    tgt_mom = dual1.momenta
    # shared base momenta: the target-side value wins, source momenta are
    # compared explicitly below
    at = dict(src_vals)
    for m in tgt_mom:
        at[m] = im1[m]
    residuals = []
    for s, y, q in zip(adj.momentum_signs(), dual1.base.coords, tgt_mom):
        residuals.append(Sstar.left_derivative(q).scale(s).substitute(at) - im1[y])
    for x, p in zip(dual2.base.coords, dual2.momenta):
        residuals.append(Sstar.left_derivative(x).substitute(at) - im2[p])
    return residuals
