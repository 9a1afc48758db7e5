"""Acceptance criteria 1-11.

Each test records one ``criterion N: PASS|FAIL`` line (shown in the pytest
terminal summary, or printed directly when run as a script). All
comparisons are exact; randomized inputs come from fixed seeds.
"""
from __future__ import annotations

import contextlib
import io
import json
import random
import time
from importlib import resources

import pytest

from helpers import (ACCEPTANCE_LINES, rand_bundle, rand_chart, rand_coeff, rand_function,
                     rand_morphism, rand_series)
from microformal import cli
from microformal.bundles import (adjoint, adjoint_contravariance_check, fiberwise_map,
                                 matrix_adjoint_pullback, push_section, pushforward,
                                 section_function)
from microformal.charts import (canonical_poisson, canonical_schouten, make_bundle, make_chart,
                                mx_even, mx_odd)
from microformal.expr import parse, render
from microformal.homotopy import (MasterHamiltonian, anchor, check_homological,
                                  derived_bracket, hamiltonians_related, homological_field,
                                  intertwine_check, lie_algebra_field, lie_schouten_bracket,
                                  linf_identity_check, master_on_dual, q_related)
from microformal.kernel import Series, VariableTable
from microformal.thick import (collapse, compose, expansion_terms, pullback,
                               recover_generating_function, thick_morphism, underlying_map)


@contextlib.contextmanager
def criterion(n: int, title: str, budget: float | None = None):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        took = time.perf_counter() - start
        late = budget is not None and took > budget
        status = "PASS" if ok and not late else "FAIL"
        extra = f" (over the {budget:g} s budget)" if late else ""
        ACCEPTANCE_LINES.append(f"criterion {n}: {status} {title} [{took:.2f} s]{extra}")
    if late:
        pytest.fail(f"criterion {n} took {took:.2f} s, budget {budget} s")


# -- 1 -------------------------------------------------------------------------

def _kernel_vars(rng, table):
    n = rng.randint(1, 4)
    n_odd = rng.randint(0, min(2, n))
    names = [(f"k{i}", 1 if i < n_odd else 0) for i in range(n)]
    return [table.add(f"{nm}_{p}", p) for nm, p in names]


def _homogeneous(rng, table, vs, max_deg=4):
    p = rng.randint(0, 1) if any(v.parity for v in vs) else 0
    return rand_series(rng, table, vs, max_deg=max_deg, nterms=rng.randint(1, 4), parity=p), p


def test_criterion_1_kernel_laws():
    rng = random.Random(101)
    with criterion(1, "kernel laws, 5 x 200 randomized cases", 10):
        table = VariableTable()
        for _ in range(200):
            vs = _kernel_vars(rng, table)
            (a, pa), (b, pb) = _homogeneous(rng, table, vs), _homogeneous(rng, table, vs)
            # supercommutativity
            assert a * b == (b * a).scale(-1 if pa and pb else 1)
            # odd squares vanish
            odd, _ = _homogeneous(rng, table, vs)
            if odd.parity() == 1:
                assert (odd * odd).is_zero()
            # graded Leibniz rule for the left derivative
            v = rng.choice(vs)
            lhs = (a * b).left_derivative(v)
            rhs = a.left_derivative(v) * b + (a * b.left_derivative(v)).scale(
                -1 if v.parity and pa else 1)
            assert lhs == rhs
            # second derivatives commute up to sign
            w = rng.choice(vs)
            s = -1 if v.parity and w.parity else 1
            assert a.left_derivative(w).left_derivative(v) == \
                a.left_derivative(v).left_derivative(w).scale(s)
            # substitution is an algebra homomorphism
            sigma = {}
            for u in vs:
                sigma[u] = rand_series(rng, table, vs, max_deg=2, nterms=2, parity=u.parity)
            assert (a * b).substitute(sigma) == a.substitute(sigma) * b.substitute(sigma)


# -- 2 -------------------------------------------------------------------------

def _scalar_oracle(S_coeffs, g_coeffs, K):
    """Fixed-point oracle for one even coordinate, written with plain
    dictionaries: series in (eps, x) as {(i, j): c} truncated at eps^K.

    ``S_coeffs`` maps (power of x, power of q) to coefficients of S (no
    zero-momentum part); ``g_coeffs`` maps powers of y to coefficients.
    """
    from fractions import Fraction

    def mul(a, b):
        out = {}
        for (i1, j1), c1 in a.items():
            for (i2, j2), c2 in b.items():
                if i1 + i2 <= K:
                    out[(i1 + i2, j1 + j2)] = out.get((i1 + i2, j1 + j2), 0) + c1 * c2
        return {k: c for k, c in out.items() if c}

    def add(*terms):
        out = {}
        for t in terms:
            for k, c in t.items():
                out[k] = out.get(k, 0) + c
        return {k: c for k, c in out.items() if c}

    def scale(a, c):
        return {k: v * c for k, v in a.items() if v * c}

    def power(a, n):
        out = {(0, 0): Fraction(1)}
        for _ in range(n):
            out = mul(out, a)
        return out

    x = {(0, 1): Fraction(1)}
    eps = {(1, 0): Fraction(1)}

    def poly(coeffs, arg):
        return add(*[scale(power(arg, n), c) for n, c in coeffs.items()])

    def dg(y):
        return add(*[scale(power(y, n - 1), c * n) for n, c in g_coeffs.items() if n])

    def S_at(q):
        return add(*[scale(mul(power(x, i), power(q, j)), c) for (i, j), c in S_coeffs.items()])

    def dS_dq(q):
        return add(*[scale(mul(power(x, i), power(q, j - 1)), c * j)
                     for (i, j), c in S_coeffs.items() if j])

    y = dS_dq({})
    for _ in range(K + 2):
        q = mul(eps, dg(y))
        y = dS_dq(q)
    q = mul(eps, dg(y))
    return add(mul(eps, poly(g_coeffs, y)), S_at(q), scale(mul(y, q), -1))


def test_criterion_2_worked_pullbacks():
    from fractions import Fraction
    with criterion(2, "worked pullbacks match the fixed-point oracle and the expansion"):
        T = VariableTable()
        M1 = make_chart(T, "M1", [("x", 0)])
        M2 = make_chart(T, "M2", [("y", 0)])
        M2.cotangent(T)
        phi = thick_morphism(M1, M2, parse("x*p_y + 1/2*p_y^2", T))
        assert render(collapse(pullback(phi, parse("y", T), 2))) == "x + 1/2"
        got = pullback(phi, parse("1/2*y^2", T), 2)
        assert got == parse("1/2*eps*x^2 + 1/2*eps^2*x^2", T)

        half = Fraction(1, 2)
        oracle = _scalar_oracle({(1, 1): 1, (0, 2): half}, {2: half}, 2)
        eps, x = T.var(T.eps()), T.var("x")
        as_series = Series.zero(T)
        for (i, j), c in oracle.items():
            as_series = as_series + (eps ** i * x ** j).scale(c)
        assert got == as_series

        first, second = expansion_terms(phi, parse("1/2*y^2", T))
        assert got.coefficient([(T.eps(), 1)]) == first
        assert got.coefficient([(T.eps(), 2)]) == second

        # a richer generating function against the oracle, K = 4
        phi2 = thick_morphism(M1, M2, parse("x*p_y + x^2*p_y^2 - 1/3*p_y^3", T))
        g2 = parse("y^2 + 2*y^3", T)
        got2 = pullback(phi2, g2, 4, 4)
        oracle2 = _scalar_oracle({(1, 1): 1, (2, 2): 1, (0, 3): Fraction(-1, 3)},
                                 {2: 1, 3: 2}, 4)
        as2 = Series.zero(T)
        for (i, j), c in oracle2.items():
            as2 = as2 + (eps ** i * x ** j).scale(c)
        assert got2 == as2


# -- 3, 4, 5, 6 ------------------------------------------------------------------

def _random_pair(rng, odd):
    T = VariableTable()
    M1, M2, M3 = (rand_chart(rng, T, min_odd=int(odd)) for _ in range(3))
    return T, M1, M2, M3, rand_morphism(rng, T, M1, M2, odd), rand_morphism(rng, T, M2, M3, odd)


def test_criterion_3_functoriality():
    rng = random.Random(303)
    with criterion(3, "functoriality, 50 even and 50 odd pairs", 30):
        for i in range(100):
            odd = i % 2 == 1
            T, M1, M2, M3, p21, p32 = _random_pair(rng, odd)
            g = rand_function(rng, T, M3, parity=int(odd))
            K = rng.randint(1, 3)
            lhs = pullback(compose(p32, p21, K, 3), g, K, 3)
            rhs = pullback(p21, pullback(p32, g, K, 3), K, 3, scale=False)
            assert lhs == rhs


def test_criterion_4_associativity():
    rng = random.Random(404)
    with criterion(4, "associativity of compose, 30 triples"):
        for i in range(30):
            odd = i % 2 == 1
            T = VariableTable()
            Ms = [rand_chart(rng, T, min_odd=int(odd)) for _ in range(4)]
            p21, p32, p43 = (rand_morphism(rng, T, a, b, odd) for a, b in zip(Ms, Ms[1:]))
            K = rng.randint(1, 3)
            left = compose(compose(p43, p32, K, 3), p21, K, 3)
            right = compose(p43, compose(p32, p21, K, 3), K, 3)
            assert left.body == right.body


def test_criterion_5_recovery():
    rng = random.Random(505)
    with criterion(5, "recovery law, 50 morphisms"):
        for i in range(50):
            odd = i % 2 == 1
            T = VariableTable()
            M1, M2 = (rand_chart(rng, T, min_odd=int(odd)) for _ in range(2))
            phi = rand_morphism(rng, T, M1, M2, odd)
            assert recover_generating_function(phi, 3, 3) == phi.body


def test_criterion_6_lowest_order():
    rng = random.Random(606)
    with criterion(6, "eps^1 parts of compose: semidirect product"):
        for i in range(40):
            odd = i % 2 == 1
            T, M1, M2, M3, p21, p32 = _random_pair(rng, odd)
            eps = T.eps()
            p31 = compose(p32, p21, 2, 3)
            f = lambda m: m.zero_momentum_part.coefficient([(eps, 1)])
            map21 = underlying_map(p21)
            assert f(p31) == f(p32).substitute(map21) + f(p21)
            assert p31.linear_part == [c.substitute(map21) for c in p32.linear_part]


# -- 7 -------------------------------------------------------------------------

def _rand_mx_bundle(rng, T):
    base = [(f"b{i}", rng.randint(0, 1)) for i in range(rng.randint(1, 2))]
    fibers = [(f"f{i}", rng.randint(0, 1)) for i in range(rng.randint(1, 2))]
    tag = rng.randrange(10 ** 6)
    base = [(f"{n}_{tag}", p) for n, p in base]
    fibers = [(f"{n}_{tag}", p) for n, p in fibers]
    return make_bundle(T, f"E{tag}", base, fibers)


def test_criterion_7_mx_antisymplectic():
    rng = random.Random(707)
    with criterion(7, "Mackenzie-Xu maps reverse brackets, 100 pairs each"):
        T = VariableTable()
        for _ in range(100):
            E = _rand_mx_bundle(rng, T)
            # even: functions on T*E*
            Td, Te = E.dual().cotangent(T), E.total().cotangent(T)
            vs = list(Td.base.coords) + list(Td.momenta)
            f = rand_series(rng, T, vs, 3, 3, parity=rng.randint(0, 1))
            g = rand_series(rng, T, vs, 3, 3, parity=rng.randint(0, 1))
            lhs = canonical_poisson(mx_even(f, E), mx_even(g, E), Te)
            assert lhs == -mx_even(canonical_poisson(f, g, Td), E)
            # odd: functions on Pi T*(Pi E*)
            Ad, Ae = E.antidual().anticotangent(T), E.total().anticotangent(T)
            vs = list(Ad.base.coords) + list(Ad.momenta)
            f = rand_series(rng, T, vs, 3, 3, parity=rng.randint(0, 1))
            g = rand_series(rng, T, vs, 3, 3, parity=rng.randint(0, 1))
            lhs = canonical_schouten(mx_odd(f, E), mx_odd(g, E), Ae)
            assert lhs == -mx_odd(canonical_schouten(f, g, Ad), E)


# -- 8, 9 ----------------------------------------------------------------------

def _fiber_components(rng, T, E1, E2, max_fdeg=3, linear=False):
    vs = list(E1.base) + list(E1.fibers)
    comps = []
    for w in E2.fibers:
        if linear:
            c = Series.zero(T)
            for u in E1.fibers:
                a = rand_series(rng, T, list(E1.base), 2, 2, parity=(w.parity + u.parity) % 2)
                c = c + a * T.var(u)
        else:
            c = rand_series(rng, T, vs, max_fdeg, 4, parity=w.parity, min_deg=1)
            # keep the fiber degree bounded and the map nontrivial
            for u in E1.fibers:
                if u.parity == w.parity:
                    c = c + T.var(u).scale(rand_coeff(rng))
                    break
        comps.append(c)
    return comps


def _base_chart(rng, T):
    return make_chart(T, f"B{rng.randrange(10 ** 6)}",
                      [(f"x{rng.randrange(10 ** 6)}", 0) for _ in range(rng.randint(1, 2))])


def test_criterion_8_adjoint_linear_and_sections():
    rng = random.Random(808)
    with criterion(8, "linear adjoint = matrix adjoint; pushforward of sections"):
        for _ in range(30):
            T = VariableTable()
            B = _base_chart(rng, T)
            E1, E2 = rand_bundle(rng, T, B), rand_bundle(rng, T, B)
            F = fiberwise_map(E1, E2, _fiber_components(rng, T, E1, E2, linear=True))
            f = rand_function(rng, T, E1.dual(), parity=0)
            assert collapse(pushforward(F, f, 3, 3)) == matrix_adjoint_pullback(F, f)
            # the adjoint of a linear map is an ordinary map: S* is linear in momenta
            assert adjoint(F).body.degree("momentum") <= 1

            G = fiberwise_map(E1, E2, _fiber_components(rng, T, E1, E2))
            v = [rand_series(rng, T, list(B.coords), 2, 2, parity=u.parity) for u in E1.fibers]
            sec = section_function(T, E1, v)
            assert collapse(pushforward(G, sec, 3, 3)) == push_section(G, v)


def test_criterion_9_adjoint_contravariance():
    rng = random.Random(909)
    with criterion(9, "adjoint contravariance, 30 even and 30 odd pairs"):
        for i in range(60):
            odd = i % 2 == 1
            T = VariableTable()
            B = _base_chart(rng, T)
            E1, E2, E3 = (rand_bundle(rng, T, B) for _ in range(3))
            F21 = fiberwise_map(E1, E2, _fiber_components(rng, T, E1, E2))
            F32 = fiberwise_map(E2, E3, _fiber_components(rng, T, E2, E3))
            assert adjoint_contravariance_check(F32, F21, 3, 3, odd).is_zero()


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_homotopy_pipeline():
    rng = random.Random(1010)
    with criterion(10, "Lie algebra and Lie algebroid pipeline with negative controls", 30):
        T = VariableTable()
        # 2-dim Lie algebra [e1, e2] = e1
        Q = lie_algebra_field(T, "g", {(0, 1, 0): 1}, 2)
        assert check_homological(Q).is_zero()
        H = master_on_dual(Q)
        assert check_homological(H).is_zero()
        eta = [T.var(v) for v in Q.chart.dual_fibers]
        for i in range(2):
            for j in range(2):
                assert derived_bracket(H, eta[i], eta[j]) == \
                    lie_schouten_bracket(T, {(0, 1, 0): 1}, Q.chart.dual_fibers, i, j)
        assert derived_bracket(H, eta[0], eta[1]) == eta[0]
        d, _, res = anchor(Q)
        assert all(r.is_zero() for r in res)
        # a Q-morphism: the shear xi1 -> 2 xi1 + xi2, xi2 -> xi2
        shear = fiberwise_map(Q.chart, Q.chart, [parse("2*xi1 + xi2", T), T.var("xi2")])
        assert all(r.is_zero() for r in
                   q_related(Q, Q, dict(zip(Q.chart.fibers, shear.components))))
        A = adjoint(shear)
        assert hamiltonians_related(H, H, A).is_zero()
        for _ in range(10):
            g = rand_series(rng, T, Q.chart.dual_fibers, 2, 3, parity=0)
            assert intertwine_check(A, H, H, g, 3).is_zero()
        # negative control: perturbed H2
        p = H.momenta
        Hp = MasterHamiltonian(H.carrier, H.body + eta[0] * eta[1] * T.var(p[0]))
        assert not hamiltonians_related(H, Hp, A).is_zero()
        # negative control: broken Jacobi
        bad = lie_algebra_field(T, "b", {(0, 1, 1): 1, (0, 2, 0): 1}, 3,
                                ["b1", "b2", "b3"], ["c1", "c2", "c3"], ["f1", "f2", "f3"])
        assert not check_homological(bad).is_zero()
        Hb = master_on_dual(bad)
        cs = [T.var(v) for v in bad.chart.dual_fibers]
        assert not linf_identity_check(Hb, 3, cs).is_zero()

        # rank-1 Lie algebroid over a line, anchor rho = 1 + x^2; the rank-2
        # extension gives even test functions room to see the Hamiltonian
        L1 = make_bundle(T, "L1", [("x", 0)], [("xi", 1)])
        rho = parse("1 + x^2", T)
        A1 = homological_field(L1, [rho * T.var("xi"), Series.zero(T)])
        assert check_homological(A1).is_zero()
        _, a, res = anchor(A1)
        assert all(r.is_zero() for r in res)
        assert a[T["dx"]] == rho * T.var("xi")
        H1 = master_on_dual(A1)
        assert check_homological(H1).is_zero()
        # binary bracket of the section coordinate with a base function is
        # the anchor action rho(e) h
        h = parse("x^3 + x", T)
        assert derived_bracket(H1, T.var("xi_dual"), h) == rho * h.left_derivative(T["x"])

        L = make_bundle(T, "L", [("x", 0)], [("xi1", 1), ("xi2", 1)])
        z = Series.zero(T)
        QL = homological_field(L, [parse("(1 + x^2)*xi1", T), z, parse("(x^3 - 2)*xi1*xi2", T)])
        QS = homological_field(L, [parse("(1 + x^2)*xi2", T), parse("(x^3 - 2)*xi2*xi1", T), z])
        swap = fiberwise_map(L, L, [T.var("xi2"), T.var("xi1")])
        assert all(r.is_zero() for r in
                   q_related(QL, QS, dict(zip(L.fibers, swap.components))))
        HL, HS = master_on_dual(QL), master_on_dual(QS)
        As = adjoint(swap)
        assert hamiltonians_related(HS, HL, As).is_zero()
        duals = list(L.base) + list(L.dual_fibers)
        nonzero = 0
        for _ in range(10):
            g = rand_series(rng, T, duals, 3, 3, parity=0)
            assert intertwine_check(As, HS, HL, g, 3).is_zero()
            nonzero += not intertwine_check(As, HS, HS, g, 3).is_zero()
        # perturbed H2 (here: the unswapped Hamiltonian) is detected
        assert not hamiltonians_related(HS, HS, As).is_zero()
        assert nonzero > 0


# -- 11 ------------------------------------------------------------------------

CORPUS_EXIT = {"negative_controls.json": 1}


def _corpus():
    root = resources.files("microformal") / "corpus"
    return sorted((p.name, p.read_text(encoding="utf-8")) for p in root.iterdir()
                  if p.name.endswith(".json"))


def _run(doc_text, argv_tail=()):
    buf = io.StringIO()
    err = io.StringIO()
    import sys
    old_stdin = sys.stdin
    sys.stdin = io.StringIO(doc_text)
    try:
        with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
            code = cli.main(["run", "-", *argv_tail])
    finally:
        sys.stdin = old_stdin
    return code, buf.getvalue(), err.getvalue()


def test_criterion_11_cli():
    with criterion(11, "CLI determinism, round trip and exit codes"):
        corpus = _corpus()
        assert len(corpus) >= 5
        for name, text in corpus:
            code, out, _ = _run(text)
            assert code == CORPUS_EXIT.get(name, 0), name
            again = _run(text)
            assert again == (code, out, ""), name
            code_j, out_j, _ = _run(text, ["--format", "json"])
            assert code_j == code and json.loads(out_j)["exit"] == code
            # print -> parse -> print on every emitted value
            ws = cli.parse_workspace(json.loads(text))
            cli.run_workspace(ws)
            for line in out.splitlines():
                if line.startswith("#"):
                    continue
                _, expr = line.split(" = ", 1)
                assert render(parse(expr, ws.table)) == expr, (name, line)
        bad = json.dumps({"charts": {"M": [["x", "even"]]}, "series": {"f": "x + nope"}})
        code, out, err = _run(bad)
        assert code == 2 and out == "" and "series.f" in err


if __name__ == "__main__":
    import sys
    rc = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(rc)
