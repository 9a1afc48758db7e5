"""Coordinate charts, their (anti)cotangent lifts, canonical brackets and
the Mackenzie-Xu transformations.

Sign conventions (used everywhere in the package):

* derivatives are left derivatives;
* on ``T*M`` the Poisson bracket satisfies ``{x^a, p_b} = delta^a_b``;
* on ``Pi T*M`` the odd bracket satisfies ``(x^a, x*_b) = delta^a_b``.

Charts may share variables. Vector bundles over a common base reuse the
base coordinates and the base momenta, which makes "fixed base" literal.
"""
from __future__ import annotations

from dataclasses import dataclass

from .kernel import EVEN, ODD, KernelError, ParityError, Series, Variable, VariableTable


class ChartError(KernelError):
    pass


def momentum_name(name: str) -> str:
    return f"p_{name}"


def antimomentum_name(name: str) -> str:
    return f"{name}_star"


@dataclass(frozen=True)
class Chart:
    name: str
    coords: tuple

    def __post_init__(self):
        names = [v.name for v in self.coords]
        if len(set(names)) != len(names):
            raise ChartError(f"duplicate coordinate names in chart {self.name}")

    @property
    def dim(self):
        return len(self.coords)

    def cotangent(self, table: VariableTable, names=None) -> "CotangentChart":
        names = names or [momentum_name(v.name) for v in self.coords]
        momenta = tuple(table.add(n, v.parity, "momentum") for n, v in zip(names, self.coords))
        return CotangentChart(self, momenta)

    def anticotangent(self, table: VariableTable, names=None) -> "AnticotangentChart":
        names = names or [antimomentum_name(v.name) for v in self.coords]
        anti = tuple(table.add(n, v.parity + 1, "antimomentum") for n, v in zip(names, self.coords))
        return AnticotangentChart(self, anti)

    def contains(self, v: Variable) -> bool:
        return v in self.coords


def make_chart(table: VariableTable, name: str, coords) -> Chart:
    """``coords`` is a list of ``(name, parity)`` pairs."""
    return Chart(name, tuple(table.add(n, p, "base") for n, p in coords))


@dataclass(frozen=True)
class CotangentChart:
    base: Chart
    momenta: tuple

    def __post_init__(self):
        if len(self.momenta) != len(self.base.coords):
            raise ChartError("one momentum per coordinate required")
        for x, p in zip(self.base.coords, self.momenta):
            if x.parity != p.parity:
                raise ParityError(f"momentum {p.name} must have the parity of {x.name}")

    @property
    def pairs(self):
        return list(zip(self.base.coords, self.momenta))

    def bracket(self, f, g):
        return canonical_poisson(f, g, self)


@dataclass(frozen=True)
class AnticotangentChart:
    base: Chart
    antimomenta: tuple

    def __post_init__(self):
        if len(self.antimomenta) != len(self.base.coords):
            raise ChartError("one antimomentum per coordinate required")
        for x, s in zip(self.base.coords, self.antimomenta):
            if x.parity == s.parity:
                raise ParityError(f"antimomentum {s.name} must have flipped parity of {x.name}")

    @property
    def pairs(self):
        return list(zip(self.base.coords, self.antimomenta))

    @property
    def momenta(self):
        return self.antimomenta

    def bracket(self, f, g):
        return canonical_schouten(f, g, self)


def _parity(f: Series, what: str) -> int:
    return f.require_parity(what)


def canonical_poisson(f: Series, g: Series, chart: CotangentChart) -> Series:
    """Even Poisson bracket on ``T*M`` with ``{x^a, p_b} = delta^a_b``."""
    pf = _parity(f, "first bracket argument")
    _parity(g, "second bracket argument")
    out = Series.zero(f.table, f.truncation).with_truncation(g.truncation)
    for x, p in chart.pairs:
        a = x.parity
        s1 = -1 if (a * (pf + 1)) % 2 else 1
        s2 = -1 if (a * pf) % 2 else 1
        dxf = f.left_derivative(x)
        dpf = f.left_derivative(p)
        if dxf:
            t = dxf * g.left_derivative(p)
            out = out + (t if s1 == 1 else -t)
        if dpf:
            t = dpf * g.left_derivative(x)
            out = out - (t if s2 == 1 else -t)
    return out


def canonical_schouten(f: Series, g: Series, chart: AnticotangentChart) -> Series:
    """Odd bracket on ``Pi T*M`` with ``(x^a, x*_b) = delta^a_b``."""
    pf = _parity(f, "first bracket argument")
    _parity(g, "second bracket argument")
    out = Series.zero(f.table, f.truncation).with_truncation(g.truncation)
    for x, s in chart.pairs:
        a = x.parity
        s1 = -1 if ((pf + 1) * a) % 2 else 1
        s2 = -1 if ((pf + 1) * (a + 1)) % 2 else 1
        dxf = f.left_derivative(x)
        dsf = f.left_derivative(s)
        if dxf:
            t = dxf * g.left_derivative(s)
            out = out + (t if s1 == 1 else -t)
        if dsf:
            t = dsf * g.left_derivative(x)
            out = out - (t if s2 == 1 else -t)
    return out


@dataclass(frozen=True)
class BundleChart:
    """Vector bundle ``E -> M`` with base coordinates and linear fiber
    coordinates, together with the fiber coordinates of ``E*`` (same
    parities, pairing ``u^i u_i``) and of ``Pi E*`` (flipped parities,
    pairing ``u^i eta_i``)."""

    name: str
    base: tuple
    fibers: tuple
    dual_fibers: tuple
    antidual_fibers: tuple

    def __post_init__(self):
        n = len(self.fibers)
        if len(self.dual_fibers) != n or len(self.antidual_fibers) != n:
            raise ChartError(f"bundle {self.name}: dual/antidual fiber counts must match")
        for u, d, a in zip(self.fibers, self.dual_fibers, self.antidual_fibers):
            if d.parity != u.parity:
                raise ParityError(f"dual coordinate {d.name} must have the parity of {u.name}")
            if a.parity == u.parity:
                raise ParityError(f"antidual coordinate {a.name} must have flipped parity")

    @property
    def rank(self):
        return len(self.fibers)

    def total(self) -> Chart:
        return Chart(self.name, self.base + self.fibers)

    def dual(self) -> Chart:
        return Chart(f"{self.name}*", self.base + self.dual_fibers)

    def antidual(self) -> Chart:
        return Chart(f"Pi{self.name}*", self.base + self.antidual_fibers)

    def same_base(self, other: "BundleChart") -> bool:
        return self.base == other.base

    def reversed(self, table: VariableTable, names=None) -> "BundleChart":
        """``Pi E`` as a bundle: fibers of flipped parity; its dual is ``Pi E*``
        and its antidual is ``E*``."""
        names = names or [f"{u.name}_pi" for u in self.fibers]
        xi = tuple(table.add(n, u.parity + 1, "fiber") for n, u in zip(names, self.fibers))
        return BundleChart(f"Pi{self.name}", self.base, xi, self.antidual_fibers, self.dual_fibers)


def make_bundle(table: VariableTable, name: str, base, fibers, dual_names=None,
                antidual_names=None) -> BundleChart:
    """``base`` is a Chart or a list of ``(name, parity)``; ``fibers`` a list of
    ``(name, parity)``."""
    if isinstance(base, Chart):
        base_vars = base.coords
    else:
        base_vars = tuple(table.add(n, p, "base") for n, p in base)
    us = tuple(table.add(n, p, "fiber") for n, p in fibers)
    dual_names = dual_names or [f"{u.name}_dual" for u in us]
    antidual_names = antidual_names or [f"{u.name}_anti" for u in us]
    duals = tuple(table.add(n, u.parity, "fiber") for n, u in zip(dual_names, us))
    antis = tuple(table.add(n, u.parity + 1, "fiber") for n, u in zip(antidual_names, us))
    return BundleChart(name, tuple(base_vars), us, duals, antis)


def _sign(parity):
    return -1 if parity % 2 else 1


def _check_vars(f: Series, allowed, what):
    allowed_ids = {v.id for v in allowed}
    stray = [f.table[v].name for v in f.variables()
             if v not in allowed_ids and f.table[v].cls != "parameter"]
    if stray:
        raise ChartError(f"{what}: variables {sorted(stray)} are not in the chart")


def mx_even_assignment(table: VariableTable, E: BundleChart, inverse=False):
    """Substitution realizing the Mackenzie-Xu map ``kappa: T*E -> T*E*``.

    Forward (``kappa*``, functions on ``T*E*`` to functions on ``T*E``)::

        x -> x,  u_i -> p_i,  p_a -> -p_a,  p^i -> (-1)^i u^i

    The inverse maps functions on ``T*E`` to functions on ``T*E*``.
    """
    TE = E.total().cotangent(table)
    TEd = E.dual().cotangent(table)
    nb = len(E.base)
    base_p = TE.momenta[:nb]
    p_fib = TE.momenta[nb:]       # momenta of u^i
    p_dual = TEd.momenta[nb:]     # momenta of u_i
    a = {}
    for p in base_p:
        a[p] = -table.var(p)
    if not inverse:
        for ud, pi in zip(E.dual_fibers, p_fib):
            a[ud] = table.var(pi)
        for u, pd in zip(E.fibers, p_dual):
            a[pd] = table.var(u).scale(_sign(u.parity))
        domain = E.dual().coords + TEd.momenta
    else:
        for u, pd in zip(E.fibers, p_dual):
            a[u] = table.var(pd).scale(_sign(u.parity))
        for ud, pi in zip(E.dual_fibers, p_fib):
            a[pi] = table.var(ud)
        domain = E.total().coords + TE.momenta
    return a, domain


def mx_even(f: Series, E: BundleChart, inverse: bool = False) -> Series:
    """``kappa* f`` for ``f`` on ``T*E*``; with ``inverse`` transport ``f`` on
    ``T*E`` to ``T*E*``."""
    a, domain = mx_even_assignment(f.table, E, inverse)
    _check_vars(f, domain, "mx_even")
    return f.substitute(a)


def mx_odd_assignment(table: VariableTable, E: BundleChart, inverse=False):
    """Odd Mackenzie-Xu map ``kappa: Pi T*E -> Pi T*(Pi E*)``::

        x -> x,  eta_i -> u*_i,  x*_a -> -x*_a,  eta*^i -> u^i
    """
    PE = E.total().anticotangent(table)
    PEd = E.antidual().anticotangent(table)
    nb = len(E.base)
    xs = PE.antimomenta[:nb]
    u_star = PE.antimomenta[nb:]
    eta_star = PEd.antimomenta[nb:]
    a = {s: -table.var(s) for s in xs}
    if not inverse:
        for eta, us in zip(E.antidual_fibers, u_star):
            a[eta] = table.var(us)
        for es, u in zip(eta_star, E.fibers):
            a[es] = table.var(u)
        domain = E.antidual().coords + PEd.antimomenta
    else:
        for eta, us in zip(E.antidual_fibers, u_star):
            a[us] = table.var(eta)
        for es, u in zip(eta_star, E.fibers):
            a[u] = table.var(es)
        domain = E.total().coords + PE.antimomenta
    return a, domain


def mx_odd(f: Series, E: BundleChart, inverse: bool = False) -> Series:
    """``kappa* f`` for ``f`` on ``Pi T*(Pi E*)``; with ``inverse`` transport
    ``f`` on ``Pi T*E`` to ``Pi T*(Pi E*)``."""
    a, domain = mx_odd_assignment(f.table, E, inverse)
    _check_vars(f, domain, "mx_odd")
    return f.substitute(a)


def differential_name(v: Variable) -> str:
    return f"d_{v.name}"


def _d(table, v):
    # differentials dz are modelled by parameters of the parity of z
    return table.add(differential_name(v), v.parity, "parameter")


def one_form_pullback(table: VariableTable, form: dict, assignment: dict, coords) -> Series:
    """Pull back ``sum dz^A c_A`` along a substitution and encode the result
    as the series ``sum dz'^B c'_B`` in differential parameters.

    ``form`` maps variables to coefficients; ``coords`` are the coordinates
    of the target of the substitution.
    """
    out = Series.zero(table)
    for z, c in form.items():
        image = assignment.get(z, table.var(z))
        pc = c.substitute(assignment) if assignment else c
        for w in coords:
            dw = image.left_derivative(w)
            if dw:
                out = out + table.var(_d(table, w)) * dw * pc
    return out


def exterior_d(table: VariableTable, h: Series, coords) -> Series:
    out = Series.zero(table)
    for w in coords:
        dh = h.left_derivative(w)
        if dh:
            out = out + table.var(_d(table, w)) * dh
    return out


def encode_one_form(table: VariableTable, form: dict) -> Series:
    out = Series.zero(table)
    for z, c in form.items():
        out = out + table.var(_d(table, z)) * c
    return out


def canonical_one_form_check(table: VariableTable, E: BundleChart, kind: str = "even") -> Series:
    """Residual of the identities for the canonical 1-forms under ``kappa``::

        kappa*(dx p + du_i p^i) = -(dx p + du^i p_i) + d(u^i p_i)
        kappa*(dx x* + deta_i eta*^i) = -(dx x* + du^i u*_i) + d(u^i u*_i)

    One-forms are encoded with differential parameters ``d_z`` of the parity
    of ``z``; a correct implementation returns the zero series.
    """
    if not isinstance(E, BundleChart):
        raise ChartError("canonical_one_form_check needs a bundle chart")
    if kind == "even":
        T_src = E.dual().cotangent(table)
        T_tgt = E.total().cotangent(table)
        a, _ = mx_even_assignment(table, E)
    elif kind == "odd":
        T_src = E.antidual().anticotangent(table)
        T_tgt = E.total().anticotangent(table)
        a, _ = mx_odd_assignment(table, E)
    else:
        raise ValueError(f"kind must be 'even' or 'odd', not {kind!r}")
    src_form = {z: table.var(p) for z, p in T_src.pairs}
    tgt_form = {z: table.var(p) for z, p in T_tgt.pairs}
    coords = list(T_tgt.base.coords) + list(T_tgt.momenta)
    lhs = one_form_pullback(table, src_form, a, coords)
    nb = len(E.base)
    pairing = Series.zero(table)
    for u, p in zip(E.fibers, T_tgt.momenta[nb:]):
        pairing = pairing + table.var(u) * table.var(p)
    rhs = -encode_one_form(table, tgt_form) + exterior_d(table, pairing, coords)
    return lhs - rhs
