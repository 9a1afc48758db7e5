"""Even and odd thick morphisms: composition, pullback and diagnostics.

A thick morphism ``M1 => M2`` is stored through its generating function
``S(x, q)`` (even case: ``q`` the momenta of ``M2``) or ``S(x, y*)`` (odd
case: antimomenta of ``M2``).

Smallness is made explicit with the even parameter ``eps``: constructors
multiply the zero-momentum term of ``S`` by ``eps`` and :func:`pullback`
applies ``Phi`` to ``eps*g``. Every fixed-point system is then solved in
the ring truncated at ``eps**K`` and momentum degree ``D``, where the
unknowns converge after finitely many exact iterations. ``collapse``
substitutes ``eps = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .charts import Chart, ChartError
from .kernel import ODD, KernelError, ParityError, Series, VariableTable

MAX_ITERATIONS = 200


class MorphismError(KernelError):
    pass


class ConvergenceError(MorphismError):
    pass


@dataclass(frozen=True)
class IterationTrace:
    approximants: tuple  # tuple of tuples of Series, one tuple per step
    agreement: tuple     # eps-order up to which step k and k+1 agree

    def __len__(self):
        return len(self.approximants)


@dataclass(frozen=True)
class ThickMorphism:
    """Thick morphism with its generating function in ``eps``-form."""

    source: Chart
    target: Chart
    odd: bool
    body: Series
    target_momenta: tuple = field(compare=False, default=())

    @property
    def table(self) -> VariableTable:
        return self.body.table

    @property
    def parity(self) -> str:
        return "odd" if self.odd else "even"

    def momentum_signs(self):
        # y^i = sign_i * dS/dq_i
        if self.odd:
            return [1] * len(self.target_momenta)
        return [-1 if y.parity else 1 for y in self.target.coords]

    def raw_body(self) -> Series:
        return collapse(self.body)

    @property
    def zero_momentum_part(self) -> Series:
        return self.body.drop(self.target_momenta)

    @property
    def linear_part(self) -> list:
        """``S^i`` with ``y^i = S^i(x)`` at zero momentum and ``eps = 0``."""
        eps = self.table.eps()
        out = []
        for s, q in zip(self.momentum_signs(), self.target_momenta):
            d = self.body.left_derivative(q).drop(self.target_momenta).drop([eps])
            out.append(d.scale(s))
        return out

    def __str__(self):
        return f"{self.source.name} => {self.target.name} [{self.parity}]: {self.body}"


def target_momenta(table: VariableTable, target: Chart, odd: bool) -> tuple:
    lift = target.anticotangent(table) if odd else target.cotangent(table)
    return tuple(lift.momenta)


def _lift_eps(body: Series, momenta) -> Series:
    eps = body.table.eps()
    zero = body.drop(momenta)
    if eps.id in zero.variables():
        # already in eps-form
        return body
    return body - zero + zero * body.table.var(eps)


def thick_morphism(source: Chart, target: Chart, S: Series, odd: bool = False,
                   lift: bool = True) -> ThickMorphism:
    """Build a thick morphism from a generating function.

    ``S`` may only involve source coordinates, target (anti)momenta and
    parameters. With ``lift`` the zero-momentum term is multiplied by
    ``eps``.
    """
    table = S.table
    qs = target_momenta(table, target, odd)
    p = S.require_parity("generating function")
    if not S.is_zero() and p != (ODD if odd else 0):
        raise ParityError(f"generating function must be {'odd' if odd else 'even'}")
    allowed = {v.id for v in source.coords} | {q.id for q in qs}
    stray = sorted(table[v].name for v in S.variables()
                   if v not in allowed and table[v].cls != "parameter")
    if stray:
        raise ChartError(f"generating function involves {stray}, which are neither "
                         f"source coordinates nor target momenta")
    body = _lift_eps(S, qs) if lift else S
    return ThickMorphism(source, target, odd, body, qs)


def identity_morphism(table: VariableTable, chart: Chart, odd: bool = False) -> ThickMorphism:
    qs = target_momenta(table, chart, odd)
    S = Series.zero(table)
    for x, q in zip(chart.coords, qs):
        S = S + table.var(x) * table.var(q)
    return thick_morphism(chart, chart, S, odd)


def point_chart() -> Chart:
    return Chart("pt", ())


def collapse(f: Series) -> Series:
    """Substitute ``eps = 1`` (dropping the eps truncation)."""
    eps = f.table.eps()
    trunc = {g: n for g, n in f.truncation.items() if g != "eps"}
    return f.untruncated().substitute({eps: 1}, truncation=trunc)


def _truncation(K, D):
    t = {}
    if K is not None:
        t["eps"] = K
    if D is not None:
        # D bounds eps order plus momentum degree: truncating the momentum
        # degree alone is not stable under q -> eps*(...)
        t["order"] = D
    return t


def _eps_order(diff: Series) -> int:
    if diff.is_zero():
        return -1
    vs = diff.table
    return min(sum(vs[v].weight("eps") * e for v, e in m) for m in diff.terms)


def _solve(outer: Series, inner: Series, mid: Chart, mid_momenta, signs, trunc,
           want_trace=False):
    """Solve ``q = dS_out/dy (y, r)``, ``y = sign * dS_in/dq (x, q)`` by
    iteration from ``y_0 = sign * dS_in/dq (x, 0)``; return
    ``S_out(y, r) + S_in(x, q) - y q``.
    """
    table = outer.table
    ys = mid.coords
    dout = [outer.left_derivative(y) for y in ys]
    din = [inner.left_derivative(q).scale(s) for q, s in zip(mid_momenta, signs)]
    zero_q = {q: 0 for q in mid_momenta}
    Y = [d.substitute(zero_q, truncation=trunc) for d in din]
    steps = [tuple(Y)]
    agreement = []

    def momenta_at(Y):
        a = dict(zip(ys, Y))
        return [d.substitute(a, truncation=trunc) for d in dout]

    for _ in range(MAX_ITERATIONS):
        Q = momenta_at(Y)
        qa = dict(zip(mid_momenta, Q))
        Y_next = [d.substitute(qa, truncation=trunc) for d in din]
        if want_trace:
            steps.append(tuple(Y_next))
            agreement.append(min((_eps_order(a - b) for a, b in zip(Y_next, Y)
                                  if not (a - b).is_zero()), default=None))
        if Y_next == Y:
            break
        Y = Y_next
    else:
        raise ConvergenceError("fixed-point iteration did not stabilise; "
                               "is the outer zero-momentum term eps-small?")
    Q = momenta_at(Y)
    result = outer.substitute(dict(zip(ys, Y)), truncation=trunc)
    result = result + inner.substitute(dict(zip(mid_momenta, Q)), truncation=trunc)
    for y, q in zip(Y, Q):
        result = result - y * q
    trace = IterationTrace(tuple(steps), tuple(agreement)) if want_trace else None
    return result, trace


def _same_chart(a: Chart, b: Chart) -> bool:
    return a.coords == b.coords


def compose(outer: ThickMorphism, inner: ThickMorphism, K: int, D: int,
            trace: bool = False):
    """``outer o inner`` for ``inner: M1 => M2`` and ``outer: M2 => M3``.

    The generating function is returned truncated at ``eps**K`` and
    momentum degree ``D``; ``D >= K`` is required. With ``trace`` a pair
    ``(morphism, IterationTrace)`` is returned.
    """
    if outer.odd != inner.odd:
        raise ParityError("cannot compose even and odd thick morphisms")
    if not _same_chart(inner.target, outer.source):
        raise ChartError(f"target {inner.target.name} of the inner morphism is not "
                         f"the source {outer.source.name} of the outer one")
    if K < 0 or D < K:
        raise MorphismError(f"need 0 <= K <= D, got K={K}, D={D}")
    body, tr = _solve(outer.body, inner.body, inner.target, inner.target_momenta,
                      inner.momentum_signs(), _truncation(K, D), trace)
    m = ThickMorphism(inner.source, outer.target, inner.odd, body, outer.target_momenta)
    return (m, tr) if trace else m


def _check_function(phi: ThickMorphism, g: Series):
    table = g.table
    p = g.require_parity("pulled-back function")
    if not g.is_zero() and p != (ODD if phi.odd else 0):
        raise ParityError(f"{phi.parity} thick morphisms pull back "
                          f"{phi.parity} functions only")
    allowed = {v.id for v in phi.target.coords}
    stray = sorted(table[v].name for v in g.variables()
                   if v not in allowed and table[v].cls != "parameter")
    if stray:
        raise ChartError(f"function involves {stray}, which are not coordinates "
                         f"of {phi.target.name}")


def pullback(phi: ThickMorphism, g: Series, K: int, D: int | None = None,
             scale: bool = True, trace: bool = False):
    """Nonlinear pullback ``Phi*[eps*g]`` truncated at ``eps**K``.

    With ``scale=False`` the function is used as given; it must then make
    the iteration converge (e.g. lie in the eps ideal, or be linear in the
    target coordinates with nilpotent coefficients).
    """
    _check_function(phi, g)
    table = g.table
    G = g * table.var(table.eps()) if scale else g
    body, tr = _solve(G, phi.body, phi.target, phi.target_momenta,
                      phi.momentum_signs(), _truncation(K, D), trace)
    return (body, tr) if trace else body


def underlying_map(phi: ThickMorphism) -> dict:
    """The ordinary map ``phi`` with ``phi*(y^i) = S^i(x)``, as a substitution."""
    return dict(zip(phi.target.coords, phi.linear_part))


def recover_generating_function(phi: ThickMorphism, K: int | None = None,
                                D: int | None = None) -> Series:
    """``Phi*[y^i c_i]`` with auxiliary parameters ``c_i``, renamed back to
    the target momenta."""
    table = phi.table
    cs = [table.add(f"c_{q.name}", q.parity, "parameter", {"momentum": 1, "order": 1})
          for q in phi.target_momenta]
    g = Series.zero(table)
    for y, c in zip(phi.target.coords, cs):
        g = g + table.var(y) * table.var(c)
    result = pullback(phi, g, K, D, scale=False)
    return result.substitute({c: table.var(q) for c, q in zip(cs, phi.target_momenta)})


def legendre_F(phi: ThickMorphism) -> Series:
    """``F = y^i q_i - S`` on the relation, in the coordinates ``(x, q)``."""
    table = phi.table
    F = -phi.body
    for s, y, q in zip(phi.momentum_signs(), phi.target.coords, phi.target_momenta):
        yv = phi.body.left_derivative(q).scale(s)
        F = F + yv * table.var(q)
    return F


def taylor_components(phi: ThickMorphism, gs, g0: Series | None, K: int,
                      D: int | None = None) -> Series:
    """Coefficient of ``t_1 ... t_n`` in ``Phi*[eps*(g0 + sum t_k g_k)]``."""
    table = phi.table
    ts = [table.add(f"t_{k + 1}", 0, "parameter") for k in range(len(gs))]
    G = g0 if g0 is not None else Series.zero(table)
    for t, g in zip(ts, gs):
        G = G + table.var(t) * g
    full = pullback(phi, G, K, D)
    if not ts:
        return full
    return full.coefficient([(t, 1) for t in ts])


def affine_pullback(phi: ThickMorphism, g: Series) -> Series:
    """``S_0 + phi*(g)``: the pullback of an ordinary map with a shift."""
    zero = collapse(phi.zero_momentum_part)
    return zero + g.substitute(underlying_map(phi))


def expansion_terms(phi: ThickMorphism, g: Series) -> tuple:
    """Lowest terms of the pullback expansion, computed directly:
    ``(S_0 + g(phi), 1/2 S^{ij}(phi) d_i g d_j g)`` (eps-collapsed data).

    ``S^{ij}`` is read off as the second momentum derivative of ``S``; the
    pairing with ``dg`` uses left derivatives throughout.
    """
    table = phi.table
    qs = phi.target_momenta
    S = phi.raw_body()
    phimap = underlying_map(phi)
    first = collapse(phi.zero_momentum_part) + g.substitute(phimap)
    dg = {q: g.left_derivative(y).substitute(phimap) for y, q in zip(phi.target.coords, qs)}
    quad = Series.zero(table)
    # the q-quadratic part of S evaluated at q = dg(phi(x))
    for m, c in S.terms.items():
        qdeg = sum(e for v, e in m if table[v] in qs)
        if qdeg == 2:
            quad = quad + Series(table, {m: c})
    second = quad.substitute(dg)
    return first, second
