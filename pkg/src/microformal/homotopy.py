"""Homological vector fields, master Hamiltonians and derived brackets.

An L-infinity algebroid ``E -> M`` is given by an odd vector field ``Q`` on
``Pi E``. Here the bundle chart handed to :class:`HomologicalField` *is*
``Pi E`` (fiber coordinates ``xi``); its dual chart is ``Pi E*`` and its
antidual chart is ``E*``.

Two carriers are supported:

``"schouten"``
    ``H = Q.p`` on ``T*(Pi E)``, with a sign on even coordinates, moved to
    ``T*(Pi E*)`` by the even Mackenzie-Xu map. ``H`` is odd and the
    canonical Poisson bracket gives symmetric odd derived brackets on
    functions on ``Pi E*``.
``"poisson"``
    ``H = Q.x*`` on ``Pi T*(Pi E)``, moved to ``Pi T*(E*)`` by the odd
    Mackenzie-Xu map. ``H`` is even and the canonical odd bracket gives
    antisymmetric brackets of alternating parity on functions on ``E*``.

Sign tables for the generalized Jacobi identities live in :func:`_jacobi_sign`
and nowhere else.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .charts import (AnticotangentChart, BundleChart, Chart, ChartError, CotangentChart,
                     make_bundle, mx_even, mx_odd)
from .kernel import ODD, KernelError, ParityError, Series, VariableTable
from .thick import ThickMorphism, collapse, pullback


@dataclass(frozen=True)
class HomologicalField:
    """``Q = Q^A d/dz^A`` on the total space of the bundle chart ``Pi E``.

    ``components`` follow ``chart.total().coords``: base first, then fibers.
    """

    chart: BundleChart
    components: tuple

    def __post_init__(self):
        coords = self.coords
        if len(self.components) != len(coords):
            raise ChartError(f"need {len(coords)} components, got {len(self.components)}")
        for z, c in zip(coords, self.components):
            p = c.require_parity(f"component Q^{z.name}")
            if not c.is_zero() and p != (z.parity + 1) % 2:
                raise ParityError(f"component Q^{z.name} must have parity {(z.parity + 1) % 2}")

    @property
    def coords(self):
        return self.chart.total().coords

    @property
    def table(self) -> VariableTable:
        return self.components[0].table

    def apply(self, f: Series) -> Series:
        """``Q(f) = Q^A d_A f``."""
        out = Series.zero(f.table)
        for z, c in zip(self.coords, self.components):
            d = f.left_derivative(z)
            if d:
                out = out + c * d
        return out

    def square(self) -> list:
        """Components of ``Q^2``, i.e. ``Q(Q^A)``."""
        return [self.apply(c) for c in self.components]


def homological_field(chart: BundleChart, components) -> HomologicalField:
    return HomologicalField(chart, tuple(components))


def lie_algebra_field(table: VariableTable, name: str, structure: dict,
                      rank: int, fiber_names=None, dual_names=None,
                      antidual_names=None) -> HomologicalField:
    """``Q = 1/2 xi^j xi^i c_ij^k d/dxi^k`` on ``Pi g`` for a Lie algebra
    over a point with ``[e_i, e_j] = c_ij^k e_k`` (0-based indices).

    ``structure`` maps ``(i, j, k)`` to ``c_ij^k``; antisymmetry is filled in.
    """
    names = fiber_names or [f"xi{i + 1}" for i in range(rank)]
    chart = make_bundle(table, name, [], [(n, 1) for n in names],
                        dual_names=dual_names or [f"eta{i + 1}" for i in range(rank)],
                        antidual_names=antidual_names or [f"e{i + 1}" for i in range(rank)])
    c = {}
    for (i, j, k), v in structure.items():
        v = Fraction(v)
        c[(i, j, k)] = c.get((i, j, k), 0) + v
        c[(j, i, k)] = c.get((j, i, k), 0) - v
    xi = [table.var(v) for v in chart.fibers]
    comps = []
    for k in range(rank):
        Qk = Series.zero(table)
        for i in range(rank):
            for j in range(rank):
                v = c.get((i, j, k), 0)
                if v:
                    Qk = Qk + (xi[j] * xi[i]).scale(v / 2)
        comps.append(Qk)
    return HomologicalField(chart, tuple(comps))


def de_rham_field(table: VariableTable, base_chart: Chart) -> HomologicalField:
    """``d = dx^a d/dx^a`` on ``Pi TM``; the dual chart of ``Pi TM`` is
    ``Pi T*M`` with the antimomenta ``x*_a`` as fiber coordinates."""
    anti = base_chart.anticotangent(table)
    base = list(base_chart.coords)
    dxs = tuple(table.add(f"d{x.name}", x.parity + 1, "fiber") for x in base)
    duals = tuple(anti.antimomenta)
    antis = tuple(table.add(f"{x.name}_cov", x.parity, "fiber") for x in base)
    chart = BundleChart(f"PiT{base_chart.name}", tuple(base), dxs, duals, antis)
    comps = [table.var(d) for d in dxs] + [Series.zero(table) for _ in dxs]
    return HomologicalField(chart, tuple(comps))


# -- master Hamiltonians -------------------------------------------------------

@dataclass(frozen=True)
class MasterHamiltonian:
    """Function on ``T*N`` (``kind="schouten"``) or ``Pi T*N``
    (``kind="poisson"``) generating derived brackets on functions on ``N``."""

    carrier: object  # CotangentChart or AnticotangentChart
    body: Series

    def __post_init__(self):
        want = ODD if self.kind == "schouten" else 0
        p = self.body.require_parity("master Hamiltonian")
        if not self.body.is_zero() and p != want:
            raise ParityError(f"a {self.kind} master Hamiltonian must be "
                              f"{'odd' if want else 'even'}")

    @property
    def kind(self):
        return "schouten" if isinstance(self.carrier, CotangentChart) else "poisson"

    @property
    def base(self) -> Chart:
        return self.carrier.base

    @property
    def momenta(self):
        return self.carrier.momenta

    def bracket(self, f, g):
        return self.carrier.bracket(f, g)

    def act(self, g: Series) -> Series:
        """``H(x, dg/dx)``: the vector field on the space of functions."""
        return self.body.substitute(
            {p: g.left_derivative(x) for x, p in self.carrier.pairs})


def linear_hamiltonian(Q: HomologicalField, kind: str = "schouten") -> MasterHamiltonian:
    """``H = -(-1)^|z^A| Q^A p_A`` on ``T*(Pi E)``, or ``Q^A z*_A`` on
    ``Pi T*(Pi E)``. The unary derived bracket is ``Q(f)`` for the first
    and ``-Q(f)`` for the second."""
    table = Q.table
    total = Q.chart.total()
    carrier = total.cotangent(table) if kind == "schouten" else total.anticotangent(table)
    H = Series.zero(table)
    for z, c, p in zip(total.coords, Q.components, carrier.momenta):
        term = c * table.var(p)
        # {p_z, z} = -(-1)^|z| on T*, so even coordinates need a sign for
        # (H, f) = Q(f) to hold on every coordinate
        if kind == "schouten" and z.parity == 0:
            term = -term
        H = H + term
    return MasterHamiltonian(carrier, H)


def master_on_dual(Q: HomologicalField, kind: str = "schouten") -> MasterHamiltonian:
    """Master Hamiltonian on ``T*(Pi E*)`` (or ``Pi T*(E*)``) obtained from the
    linear Hamiltonian by the Mackenzie-Xu map."""
    table = Q.table
    H = linear_hamiltonian(Q, kind)
    if kind == "schouten":
        body = mx_even(H.body, Q.chart, inverse=True)
        carrier = Q.chart.dual().cotangent(table)
    else:
        body = mx_odd(H.body, Q.chart, inverse=True)
        carrier = Q.chart.antidual().anticotangent(table)
    return MasterHamiltonian(carrier, body)


def self_bracket(H: MasterHamiltonian) -> Series:
    return H.bracket(H.body, H.body).scale(Fraction(1, 2))


def check_homological(obj) -> Series:
    """``1/2 (H, H)``; zero iff the structure is homological (to truncation).

    Accepts a :class:`HomologicalField` (its linear Hamiltonian is used) or
    a :class:`MasterHamiltonian`.
    """
    if isinstance(obj, HomologicalField):
        obj = linear_hamiltonian(obj)
    return self_bracket(obj)


def _momentum_free(H: MasterHamiltonian, f: Series):
    ids = {p.id for p in H.momenta}
    if any(v in ids for v in f.variables()):
        raise KernelError("derived brackets take momentum-free functions")


def derived_bracket(H: MasterHamiltonian, *fs: Series) -> Series:
    """``(...((H, f1), f2)..., fk)`` restricted to zero momenta."""
    acc = H.body
    for f in fs:
        _momentum_free(H, f)
        acc = H.bracket(acc, f)
    return acc.drop(H.momenta)


def derived_bracket_parity(H: MasterHamiltonian, fs) -> int:
    p = H.body.require_parity("master Hamiltonian")
    shift = 0 if H.kind == "schouten" else 1
    return (p + sum(f.require_parity() for f in fs) + shift * len(fs)) % 2


def lie_schouten_bracket(table, structure: dict, duals, i: int, j: int) -> Series:
    """``(eta_i, eta_j) = c_ij^k eta_k`` computed from structure constants."""
    out = Series.zero(table)
    for (a, b, k), v in structure.items():
        if (a, b) == (i, j):
            out = out + table.var(duals[k]).scale(v)
        elif (a, b) == (j, i):
            out = out - table.var(duals[k]).scale(v)
    return out


def q_related(Q1: HomologicalField, Q2: HomologicalField, phi: dict) -> list:
    """``Q2^A(phi) - Q1(phi^A)`` for a map ``phi`` given as a substitution of
    the coordinates of ``Q2``'s chart by functions on ``Q1``'s chart."""
    out = []
    for z, c in zip(Q2.coords, Q2.components):
        image = phi.get(z, Q1.table.var(z))
        out.append(c.substitute(phi) - Q1.apply(image))
    return out


def anchor(Q: HomologicalField, table: VariableTable | None = None):
    """The anchor ``a: Pi E -> Pi TM``: ``x -> x``, ``dx^a -> Q^a(x, xi)``.

    Returns ``(d, assignment, residuals)`` where ``d`` is the de Rham field
    on ``Pi TM`` and ``residuals`` is :func:`q_related` for ``(Q, d, a)``.
    """
    table = table or Q.table
    base = Chart("M", Q.chart.base)
    d = de_rham_field(table, base)
    nb = len(Q.chart.base)
    a = {x: table.var(x) for x in Q.chart.base}
    for dx, c in zip(d.chart.fibers, Q.components[:nb]):
        a[dx] = c
    return d, a, q_related(Q, d, a)


def hamiltonians_related(H1: MasterHamiltonian, H2: MasterHamiltonian,
                         phi: ThickMorphism) -> Series:
    """``H2(y(x,q), q) - H1(x, p(x,q))`` on the relation of ``phi``.

    ``H1`` lives over the source of ``phi`` and ``H2`` over its target.
    """
    S = collapse(phi.body)
    ys = {}
    for s, y, q in zip(phi.momentum_signs(), phi.target.coords, phi.target_momenta):
        ys[y] = S.left_derivative(q).scale(s)
    ps = {}
    for x, p in H1.carrier.pairs:
        ps[p] = S.left_derivative(x)
    return H2.body.substitute(ys) - H1.body.substitute(ps)


def intertwine_check(phi: ThickMorphism, H1: MasterHamiltonian, H2: MasterHamiltonian,
                     g: Series, K: int, D: int | None = None) -> Series:
    """Residual of ``Phi*[G + tau H2(dG)] - Phi*[G] - tau H1(d Phi*[G])`` with
    ``G = eps*g`` and an odd parameter ``tau``."""
    if g.require_parity("g") == ODD and not g.is_zero():
        raise ParityError("the intertwining check takes an even function")
    table = g.table
    tau = table.add("tau", ODD, "parameter")
    t = table.var(tau)
    G = g * table.var(table.eps())
    moved = pullback(phi, G + t * H2.act(G), K, D, scale=False)
    base = pullback(phi, G, K, D, scale=False)
    return moved - base - t * H1.act(base)


# -- generalized Jacobi identities ----------------------------------------------

def _koszul_sign(parities, perm) -> int:
    """Sign of permuting graded elements of the given parities by ``perm``."""
    sign = 1
    n = len(perm)
    for i in range(n):
        for j in range(i + 1, n):
            if perm[i] > perm[j] and parities[perm[i]] and parities[perm[j]]:
                sign = -sign
    return sign


def _perm_sign(perm) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def _unshuffles(n, k):
    for first in combinations(range(n), k):
        rest = tuple(i for i in range(n) if i not in first)
        yield first + rest


def _jacobi_sign(kind, parities, perm, k, n):
    if kind == "schouten":
        # symmetric odd brackets: Koszul signs only
        return _koszul_sign(parities, perm)
    # antisymmetric brackets (Lada-Stasheff) after the parity shift that
    # makes the derived brackets of an odd bracket symmetric
    shifted = [(p + 1) % 2 for p in parities]
    return _koszul_sign(shifted, perm)


def linf_identity(H: MasterHamiltonian, fs, include_curvature: bool = True) -> Series:
    """The ``n``-th generalized Jacobi expression for the derived brackets.

    ``J_n = sum_{k} sum_{(k, n-k) unshuffles} sign * [[f_s(1..k)], f_s(k+1..n)]``
    including the 0-ary bracket ``H|_{p=0}`` when ``include_curvature``.
    Zero when ``(H, H) = 0``.
    """
    n = len(fs)
    parities = [f.require_parity() for f in fs]
    total = Series.zero(H.body.table)
    for k in range(0 if include_curvature else 1, n + 1):
        for perm in _unshuffles(n, k):
            inner = derived_bracket(H, *[fs[i] for i in perm[:k]])
            outer = derived_bracket(H, inner, *[fs[i] for i in perm[k:]])
            sign = _jacobi_sign(H.kind, parities, perm, k, n)
            total = total + (outer if sign == 1 else -outer)
    return total


def linf_identity_check(H: MasterHamiltonian, n: int, fs) -> Series:
    if len(fs) != n:
        raise ValueError(f"need {n} test functions, got {len(fs)}")
    return linf_identity(H, list(fs))


def bracket_symmetry_residual(H: MasterHamiltonian, f: Series, g: Series) -> Series:
    """Binary bracket symmetry: symmetric in the Koszul sense for the
    Schouten carrier; antisymmetric (with shifted parities) for Poisson."""
    a = derived_bracket(H, f, g)
    b = derived_bracket(H, g, f)
    pf, pg = f.require_parity(), g.require_parity()
    if H.kind == "schouten":
        s = -1 if (pf * pg) % 2 else 1
    else:
        s = -1 if ((pf + 1) * (pg + 1)) % 2 else 1
    return a - b.scale(s)
