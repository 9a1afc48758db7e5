"""Exact supercommutative polynomial arithmetic with truncation.

A :class:`Series` is a finite sum of monomials in even and odd variables
with :class:`fractions.Fraction` coefficients. Monomials are stored in
canonical form (ascending variable id), with the Koszul sign folded into
the coefficient, so two series are equal iff their term dictionaries are.

Truncation is by named gradings: every variable carries a weight per
grading, and a series may declare a maximal total weight per grading.
Terms above a declared bound are dropped on construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

EVEN, ODD = 0, 1
CLASSES = ("base", "fiber", "momentum", "antimomentum", "parameter")

# weights used when a variable is registered without explicit ones
# "order" counts eps and momenta together; it is the filtration that the
# substitution q -> eps*(...) respects
DEFAULT_WEIGHTS = {
    "momentum": {"momentum": 1, "order": 1},
    "antimomentum": {"momentum": 1, "order": 1},
}


class KernelError(Exception):
    """Base class for errors raised by the algebra kernel."""


class TableMismatch(KernelError):
    pass


class ParityError(KernelError):
    pass


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    parity: int
    cls: str = "base"
    weights: tuple = ()

    def weight(self, grading: str) -> int:
        for g, w in self.weights:
            if g == grading:
                return w
        return 0

    def __repr__(self):
        return f"Variable({self.name!r}, parity={self.parity})"


class VariableTable:
    """Registry of variables shared by every series built on it.

    Registration is append-only; a variable, once created, never changes.
    Asking for an existing name returns the existing variable provided the
    parity agrees.
    """

    def __init__(self):
        self._vars: list[Variable] = []
        self._by_name: dict[str, Variable] = {}

    def __len__(self):
        return len(self._vars)

    def __iter__(self):
        return iter(self._vars)

    def __contains__(self, name):
        return name in self._by_name

    def __getitem__(self, key) -> Variable:
        if isinstance(key, int):
            return self._vars[key]
        try:
            return self._by_name[key]
        except KeyError:
            raise TableMismatch(f"unknown variable {key!r}") from None

    def get(self, name):
        return self._by_name.get(name)

    def add(self, name: str, parity: int, cls: str = "base",
            weights: Mapping[str, int] | None = None) -> Variable:
        if cls not in CLASSES:
            raise ValueError(f"unknown variable class {cls!r}")
        parity = int(parity) % 2
        if weights is None:
            weights = DEFAULT_WEIGHTS.get(cls, {})
        old = self._by_name.get(name)
        if old is not None:
            if old.parity != parity:
                raise ParityError(
                    f"variable {name!r} already registered with parity {old.parity}")
            return old
        if not name.isidentifier():
            raise ValueError(f"invalid variable name {name!r}")
        v = Variable(len(self._vars), name, parity, cls,
                     tuple(sorted((g, int(w)) for g, w in weights.items() if w)))
        self._vars.append(v)
        self._by_name[name] = v
        return v

    def eps(self) -> Variable:
        """The formal even smallness parameter, weight 1 in the gradings
        ``eps`` and ``order``."""
        return self.add("eps", EVEN, "parameter", {"eps": 1, "order": 1})

    def var(self, name) -> "Series":
        return Series.variable(self, self[name] if isinstance(name, str) else name)

    def const(self, c) -> "Series":
        return Series.constant(self, c)


Monomial = tuple  # tuple of (variable id, exponent), strictly ascending ids
ONE: Monomial = ()


def normalize(table: VariableTable, product: Iterable[tuple]):
    """Bring a product of variable powers into canonical form.

    ``product`` is a sequence of ``(variable or id, exponent)`` in the order
    the factors are written. Returns ``(sign, monomial)``; ``sign`` is 0 when
    an odd variable occurs twice.
    """
    n = len(table)
    odd_seq = []
    powers: dict[int, int] = {}
    for v, e in product:
        vid = v.id if isinstance(v, Variable) else v
        if not isinstance(vid, int) or not 0 <= vid < n:
            raise TableMismatch(f"variable {v!r} is not in the table")
        if e <= 0:
            if e == 0:
                continue
            raise ValueError("exponents must be positive")
        if table[vid].parity:
            if e > 1 or vid in powers:
                return 0, None
            odd_seq.append(vid)
        powers[vid] = powers.get(vid, 0) + e
    inversions = sum(1 for i in range(len(odd_seq)) for j in range(i + 1, len(odd_seq))
                     if odd_seq[i] > odd_seq[j])
    return (-1) ** inversions, tuple(sorted(powers.items()))


def _merge_trunc(a: Mapping, b: Mapping) -> dict:
    out = dict(a)
    for g, n in b.items():
        out[g] = min(n, out[g]) if g in out else n
    return out


class Series:
    """A truncated supercommutative polynomial with rational coefficients.

    Treat instances as immutable. ``terms`` maps canonical monomials to
    nonzero :class:`Fraction` coefficients; ``truncation`` maps a grading
    name to the maximal total weight kept.
    """

    __slots__ = ("table", "terms", "truncation", "_hash")

    def __init__(self, table: VariableTable, terms=None, truncation=None):
        self.table = table
        self.truncation = dict(truncation or {})
        clean = {}
        if terms:
            for m, c in terms.items():
                if c and self._fits(m):
                    clean[m] = Fraction(c)
        self.terms = clean
        self._hash = None

    # construction helpers
    @classmethod
    def constant(cls, table, c, truncation=None):
        return cls(table, {ONE: Fraction(c)} if c else {}, truncation)

    @classmethod
    def zero(cls, table, truncation=None):
        return cls(table, {}, truncation)

    @classmethod
    def variable(cls, table, v: Variable | str, coeff=1):
        if isinstance(v, str):
            v = table[v]
        return cls(table, {((v.id, 1),): Fraction(coeff)})

    @classmethod
    def monomial(cls, table, factors, coeff=1, truncation=None):
        sign, m = normalize(table, factors)
        if not sign:
            return cls.zero(table, truncation)
        return cls(table, {m: sign * Fraction(coeff)}, truncation)

    def _fits(self, m) -> bool:
        if not self.truncation:
            return True
        vs = self.table._vars
        for g, bound in self.truncation.items():
            w = 0
            for vid, e in m:
                w += vs[vid].weight(g) * e
            if w > bound:
                return False
        return True

    # basic queries
    def __bool__(self):
        return bool(self.terms)

    def is_zero(self):
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.terms == ({ONE: Fraction(other)} if other else {})
        if not isinstance(other, Series):
            return NotImplemented
        return self.table is other.table and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def variables(self) -> set[int]:
        return {vid for m in self.terms for vid, _ in m}

    def monomial_parity(self, m) -> int:
        vs = self.table._vars
        return sum(vs[vid].parity for vid, _ in m) % 2

    def parity(self):
        """0, 1, ``None`` for the zero series, or ``"mixed"``."""
        ps = {self.monomial_parity(m) for m in self.terms}
        if not ps:
            return None
        if len(ps) > 1:
            return "mixed"
        return ps.pop()

    def require_parity(self, what="series") -> int:
        p = self.parity()
        if p == "mixed":
            raise ParityError(f"{what} has mixed parity")
        return 0 if p is None else p

    def degree(self, grading: str | None = None) -> int:
        """Maximal total weight (or plain total degree) over the terms."""
        if not self.terms:
            return -1
        vs = self.table._vars
        if grading is None:
            return max(sum(e for _, e in m) for m in self.terms)
        return max(sum(vs[v].weight(grading) * e for v, e in m) for m in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get(ONE, Fraction(0))

    # arithmetic
    def _check(self, other):
        if not isinstance(other, Series):
            return Series.constant(self.table, other)
        if other.table is not self.table:
            raise TableMismatch("series belong to different variable tables")
        return other

    def __add__(self, other):
        other = self._check(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0) + c
        return Series(self.table, terms, _merge_trunc(self.truncation, other.truncation))

    __radd__ = __add__

    def __neg__(self):
        return Series(self.table, {m: -c for m, c in self.terms.items()}, self.truncation)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def scale(self, c):
        c = Fraction(c)
        return Series(self.table, {m: c * v for m, v in self.terms.items()}, self.truncation)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._check(other)
        trunc = _merge_trunc(self.truncation, other.truncation)
        vs = self.table._vars
        out: dict = {}
        bterms = [(m, c, [vid for vid, _ in m if vs[vid].parity]) for m, c in other.terms.items()]
        for ma, ca in self.terms.items():
            odd_a = [vid for vid, _ in ma if vs[vid].parity]
            da = dict(ma)
            for mb, cb, odd_b in bterms:
                sign = 1
                dead = False
                for vb in odd_b:
                    if vb in da:
                        dead = True
                        break
                    # odd factors of a that sit to the right of vb in canonical order
                    for va in odd_a:
                        if va > vb:
                            sign = -sign
                if dead:
                    continue
                d = dict(da)
                for vid, e in mb:
                    d[vid] = d.get(vid, 0) + e
                m = tuple(sorted(d.items()))
                out[m] = out.get(m, 0) + sign * ca * cb
        return Series(self.table, out, trunc)

    def __rmul__(self, other):
        # scalars commute with everything
        return self * other

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not supported")
        result = Series.constant(self.table, 1, self.truncation)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # truncation
    def truncate(self, grading: str, order: int) -> "Series":
        trunc = dict(self.truncation)
        trunc[grading] = min(order, trunc.get(grading, order))
        return Series(self.table, self.terms, trunc)

    def with_truncation(self, truncation: Mapping) -> "Series":
        return Series(self.table, self.terms, _merge_trunc(self.truncation, truncation))

    def untruncated(self) -> "Series":
        return Series(self.table, self.terms)

    # calculus
    def left_derivative(self, v: Variable | str) -> "Series":
        if isinstance(v, str):
            v = self.table[v]
        vs = self.table._vars
        out: dict = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(v.id)
            if not e:
                continue
            if v.parity:
                # move v to the front past the odd factors preceding it
                before = sum(1 for vid, _ in m if vid < v.id and vs[vid].parity)
                coeff = c if before % 2 == 0 else -c
                del d[v.id]
            else:
                coeff = c * e
                if e == 1:
                    del d[v.id]
                else:
                    d[v.id] = e - 1
            key = tuple(sorted(d.items()))
            out[key] = out.get(key, 0) + coeff
        return Series(self.table, out, self.truncation)

    def coefficient(self, factors) -> "Series":
        """Coefficient ``c`` in ``self = m*c + (terms not divisible by m)``.

        ``factors`` is a monomial given as ``(variable, exponent)`` pairs;
        the monomial is pulled to the left, so odd factors pick up signs.
        Only terms whose exponents of those variables match exactly count.
        """
        sign0, target = normalize(self.table, factors)
        if not sign0:
            raise ValueError("coefficient of a vanishing monomial")
        tvars = dict(target)
        vs = self.table._vars
        out = {}
        for m, c in self.terms.items():
            d = dict(m)
            if any(d.get(vid) != e for vid, e in tvars.items()):
                continue
            rest = tuple((vid, e) for vid, e in m if vid not in tvars)
            # m = sign * target * rest
            sign, mm = normalize(self.table, list(target) + list(rest))
            assert mm == m and sign
            out[rest] = sign * sign0 * c
        return Series(self.table, out, self.truncation)

    def drop(self, variables) -> "Series":
        """Set every listed variable to zero."""
        ids = {v.id if isinstance(v, Variable) else self.table[v].id for v in variables}
        return Series(self.table,
                      {m: c for m, c in self.terms.items() if not any(vid in ids for vid, _ in m)},
                      self.truncation)

    def part(self, grading: str, weight: int) -> "Series":
        """Terms of exactly the given weight in a grading."""
        vs = self.table._vars
        return Series(self.table,
                      {m: c for m, c in self.terms.items()
                       if sum(vs[v].weight(grading) * e for v, e in m) == weight},
                      self.truncation)

    def substitute(self, assignment: Mapping, truncation: Mapping | None = None,
                   strict: bool = False) -> "Series":
        """Simultaneously replace variables by series.

        Replacements must have the parity of the variable they replace.
        With ``strict`` the replacement must also not lower any truncation
        weight. The result carries ``truncation`` if given, otherwise the
        merge of the input truncations.
        """
        table = self.table
        subs: dict[int, Series] = {}
        for v, r in assignment.items():
            if isinstance(v, str):
                v = table[v]
            if not isinstance(r, Series):
                r = Series.constant(table, r)
            elif r.table is not table:
                raise TableMismatch("replacement from a different table")
            p = r.parity()
            if p == "mixed" or (p is not None and p != v.parity):
                raise ParityError(
                    f"replacement for {v.name} has parity {p}, expected {v.parity}")
            if strict:
                for g, _ in v.weights:
                    if r.terms and min(sum(table[x].weight(g) * e for x, e in m)
                                       for m in r.terms) < v.weight(g):
                        raise KernelError(f"replacement for {v.name} lowers grading {g}")
            subs[v.id] = r
        if truncation is None:
            truncation = self.truncation
            for r in subs.values():
                truncation = _merge_trunc(truncation, r.truncation)
        truncation = dict(truncation)
        powers: dict = {}

        def power(vid, e):
            key = (vid, e)
            if key not in powers:
                if e == 1:
                    powers[key] = subs[vid].with_truncation(truncation)
                else:
                    powers[key] = power(vid, e - 1) * power(vid, 1)
            return powers[key]

        result: dict = {}
        for m, c in self.terms.items():
            acc = None
            # keep left-to-right order so Koszul signs come out of mul
            for vid, e in m:
                if vid in subs:
                    factor = power(vid, e)
                else:
                    factor = Series(table, {((vid, e),): 1}, truncation)
                acc = factor if acc is None else acc * factor
                if acc.is_zero():
                    break
            if acc is None:
                acc = Series.constant(table, 1, truncation)
            for mm, cc in acc.terms.items():
                result[mm] = result.get(mm, 0) + c * cc
        return Series(table, result, truncation)

    # display
    def sort_key(self, m):
        deg = sum(e for _, e in m)
        return (-deg, tuple((vid, -e) for vid, e in m))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: self.sort_key(kv[0]))

    def __str__(self):
        from .expr import render
        return render(self)

    def __repr__(self):
        return f"Series({str(self)!r})"


def parity_of(f: Series):
    """``"even"``, ``"odd"``, ``"mixed"``; the zero series counts as even."""
    p = f.parity()
    if p == "mixed":
        return "mixed"
    return "odd" if p == 1 else "even"


def mul(a: Series, b: Series) -> Series:
    return a * b


def left_derivative(f: Series, v) -> Series:
    return f.left_derivative(v)


def substitute(f: Series, assignment, **kw) -> Series:
    return f.substitute(assignment, **kw)


def truncate(f: Series, grading: str, order: int) -> Series:
    return f.truncate(grading, order)
