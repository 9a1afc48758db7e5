"""Random generators shared by the test modules."""
from __future__ import annotations

import random
from fractions import Fraction

from microformal.charts import make_bundle, make_chart
from microformal.kernel import Series
from microformal.thick import target_momenta, thick_morphism

# one "criterion N: PASS|FAIL ..." line per acceptance criterion
ACCEPTANCE_LINES = []


def rand_coeff(rng: random.Random, den=3) -> Fraction:
    c = Fraction(rng.randint(-4, 4), rng.randint(1, den))
    return c or Fraction(1)


def rand_monomial(rng, variables, max_deg):
    """A random monomial in ``variables`` of total degree at most ``max_deg``."""
    deg = rng.randint(0, max_deg)
    factors = {}
    for _ in range(deg):
        v = rng.choice(variables)
        if v.parity and factors.get(v):
            continue
        factors[v] = factors.get(v, 0) + 1
    return list(factors.items())


def rand_series(rng, table, variables, max_deg=3, nterms=3, parity=None, min_deg=0):
    """Random series; with ``parity`` only monomials of that parity are kept."""
    out = Series.zero(table)
    for _ in range(nterms * 4):
        if len(out) >= nterms:
            break
        m = rand_monomial(rng, variables, max_deg)
        if sum(e for _, e in m) < min_deg:
            continue
        if parity is not None and sum(v.parity for v, _ in m) % 2 != parity:
            continue
        out = out + Series.monomial(table, m, rand_coeff(rng))
    return out


_counter = [0]


def fresh(prefix):
    _counter[0] += 1
    return f"{prefix}{_counter[0]}"


def rand_chart(rng, table, max_dim=2, max_odd=1, prefix="c", min_odd=0):
    """A chart with 1..max_dim coordinates, at most ``max_odd`` of them odd."""
    dim = rng.randint(max(1, min_odd), max_dim)
    odd_left = max_odd
    coords = []
    for i in range(dim):
        p = 1 if odd_left and (i < min_odd or rng.random() < 0.4) else 0
        odd_left -= p
        coords.append((fresh(prefix), p))
    return make_chart(table, fresh("M"), coords)


def rand_generating_function(rng, table, source, target, odd=False, max_qdeg=3, nterms=4):
    """Random generating function with a nondegenerate linear part.

    The zero-momentum part and higher momentum terms are random; every
    target momentum also appears linearly with a random function of the
    source coordinates as coefficient.
    """
    qs = target_momenta(table, target, odd)
    want = 1 if odd else 0
    xs = list(source.coords)
    S = rand_series(rng, table, xs + list(qs), max_deg=max_qdeg, nterms=nterms, parity=want)
    # keep the momentum degree bounded
    S = S.truncate("momentum", max_qdeg)
    for q in qs:
        # coefficient of q must have parity want + q.parity
        c = rand_series(rng, table, xs, max_deg=2, nterms=2, parity=(want + q.parity) % 2)
        S = S + c * table.var(q)
    return S.untruncated()


def rand_morphism(rng, table, source, target, odd=False, max_qdeg=3):
    S = rand_generating_function(rng, table, source, target, odd, max_qdeg)
    return thick_morphism(source, target, S, odd)


def rand_function(rng, table, chart, parity=0, max_deg=3, nterms=3):
    return rand_series(rng, table, list(chart.coords), max_deg, nterms, parity)


def rand_bundle(rng, table, base, max_rank=2, name=None, allow_odd=True):
    rank = rng.randint(1, max_rank)
    fibers = [(fresh("u"), 1 if allow_odd and rng.random() < 0.3 else 0) for _ in range(rank)]
    return make_bundle(table, name or fresh("E"), base, fibers)
