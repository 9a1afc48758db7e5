"""Batch front end.

A workspace is a JSON document with the blocks ``settings``, ``charts``,
``bundles``, ``series``, ``morphisms``, ``fiber_maps``, ``qfields``,
``hamiltonians`` and ``commands``. Every command prints its values as
``label = expression`` lines in canonical term order; other lines start
with ``#``. Exit status: 0 on success, 1 when a check finds a nonzero
residual, 2 on input errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .bundles import (FiberwiseMap, adjoint, antiadjoint, fiberwise_map, pushforward,
                      pushforward_odd)
from .charts import (BundleChart, Chart, canonical_poisson, canonical_schouten, make_bundle,
                     make_chart, mx_even, mx_odd)
from .expr import ExpressionError, parse, render, to_json
from .homotopy import (HomologicalField, MasterHamiltonian, anchor, check_homological,
                       de_rham_field, derived_bracket, hamiltonians_related, homological_field,
                       intertwine_check, lie_algebra_field, linf_identity_check, master_on_dual,
                       linear_hamiltonian, q_related)
from .kernel import KernelError, Series, VariableTable
from .thick import (ThickMorphism, collapse, compose, identity_morphism, legendre_F, pullback,
                    recover_generating_function, taylor_components, thick_morphism)

OK, RESIDUAL, INPUT_ERROR = 0, 1, 2

CHECKS = ("q2", "related", "hj", "intertwine", "linf", "recover", "assoc", "functorial")

# command name -> (scalar keys, list keys)
COMMAND_KEYS = {
    "pullback": (("morphism", "function"), ()),
    "compose": (("outer", "inner"), ()),
    "adjoint": (("fiber_map",), ()),
    "antiadjoint": (("fiber_map",), ()),
    "pushforward": (("fiber_map", "function", "kind"), ()),
    "mx": (("bundle", "function", "kind", "direction"), ()),
    "bracket": (("kind", "chart", "f", "g"), ()),
    "derived-bracket": (("hamiltonian",), ("functions",)),
    "anchor": (("qfield",), ()),
    "check": (("what", "qfield", "hamiltonian", "q1", "q2", "h1", "h2", "fiber_map",
               "morphism", "outer", "inner", "function"), ("functions", "morphisms")),
    "taylor": (("morphism", "base"), ("functions",)),
    "legendre": (("morphism",), ()),
}


class WorkspaceError(ValueError):
    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


@dataclass(frozen=True)
class Settings:
    order_momentum: int = 4
    order_eps: int = 2
    collapse_eps: bool = False
    trace: bool = False


@dataclass
class Workspace:
    table: VariableTable
    settings: Settings = field(default_factory=Settings)
    charts: dict = field(default_factory=dict)
    bundles: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    morphisms: dict = field(default_factory=dict)
    fiber_maps: dict = field(default_factory=dict)
    qfields: dict = field(default_factory=dict)
    hamiltonians: dict = field(default_factory=dict)
    commands: list = field(default_factory=list)

    def chart(self, ref, where) -> Chart:
        """A chart name, or ``E``, ``E*``, ``PiE*`` for a bundle ``E``."""
        if not isinstance(ref, str):
            raise WorkspaceError(where, f"chart reference must be a string, got {ref!r}")
        if ref in self.charts:
            return self.charts[ref]
        if ref in self.bundles:
            return self.bundles[ref].total()
        if ref.endswith("*"):
            if ref.startswith("Pi") and ref[2:-1] in self.bundles:
                return self.bundles[ref[2:-1]].antidual()
            if ref[:-1] in self.bundles:
                return self.bundles[ref[:-1]].dual()
        raise WorkspaceError(where, f"unknown chart {ref!r}")

    def lookup(self, block: str, ref, where):
        items = getattr(self, block)
        if ref not in items:
            raise WorkspaceError(where, f"unknown {block[:-1].replace('_', ' ')} {ref!r}")
        return items[ref]

    def expr(self, value, where) -> Series:
        """A named series or an inline expression."""
        if isinstance(value, str) and value in self.series:
            return self.series[value]
        if isinstance(value, int) and not isinstance(value, bool):
            value = str(value)
        if not isinstance(value, str):
            raise WorkspaceError(where, f"expected an expression, got {value!r}")
        try:
            return parse(value, self.table)
        except ExpressionError as exc:
            raise WorkspaceError(where, str(exc)) from None


# -- parsing ------------------------------------------------------------------

_PARITY = {"even": 0, "odd": 1, 0: 0, 1: 1}


def _coords(spec, where):
    if not isinstance(spec, list):
        raise WorkspaceError(where, "coordinates must be a list of [name, parity] pairs")
    out = []
    for i, item in enumerate(spec):
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)
                and item[1] in _PARITY):
            raise WorkspaceError(f"{where}[{i}]", f"bad coordinate {item!r}; "
                                 "use [name, \"even\"|\"odd\"]")
        out.append((item[0], _PARITY[item[1]]))
    return out


def _block(doc, name):
    value = doc.get(name, [] if name == "commands" else {})
    kind = list if name == "commands" else dict
    if not isinstance(value, kind):
        raise WorkspaceError(name, f"must be a JSON {'array' if kind is list else 'object'}")
    return value


def _register_lifts(ws: Workspace, *charts):
    # momenta and antimomenta become parseable names
    for c in charts:
        c.cotangent(ws.table)
        c.anticotangent(ws.table)


def _add_bundle(ws: Workspace, name: str, E: BundleChart):
    ws.bundles[name] = E
    _register_lifts(ws, Chart(f"{name}.base", E.base), E.total(), E.dual(), E.antidual())


def _settings(spec, where) -> Settings:
    known = {"order_momentum", "order_eps", "collapse_eps", "trace"}
    extra = sorted(set(spec) - known)
    if extra:
        raise WorkspaceError(where, f"unknown settings {extra}")
    s = Settings(**spec)
    for k in ("order_momentum", "order_eps"):
        v = getattr(s, k)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise WorkspaceError(f"{where}.{k}", "must be a non-negative integer")
    return s


def _parse_chart(ws, name, spec, where):
    coords = spec.get("coords") if isinstance(spec, dict) else spec
    ws.charts[name] = make_chart(ws.table, name, _coords(coords, where))
    _register_lifts(ws, ws.charts[name])


def _parse_bundle(ws, name, spec, where):
    if not isinstance(spec, dict):
        raise WorkspaceError(where, "bundle must be an object")
    base = spec.get("base", [])
    if isinstance(base, str):
        if base not in ws.charts:
            raise WorkspaceError(f"{where}.base", f"unknown chart {base!r}")
        base = ws.charts[base]
    else:
        base = _coords(base, f"{where}.base")
    E = make_bundle(ws.table, name, base, _coords(spec.get("fibers", []), f"{where}.fibers"),
                    spec.get("dual"), spec.get("antidual"))
    _add_bundle(ws, name, E)


def _parse_morphism(ws, name, spec, where) -> ThickMorphism:
    if not isinstance(spec, dict):
        raise WorkspaceError(where, "morphism must be an object")
    parity = spec.get("parity", "even")
    if parity not in ("even", "odd"):
        raise WorkspaceError(f"{where}.parity", "must be \"even\" or \"odd\"")
    odd = parity == "odd"
    if "adjoint" in spec:
        return adjoint(ws.lookup("fiber_maps", spec["adjoint"], f"{where}.adjoint"))
    if "antiadjoint" in spec:
        return antiadjoint(ws.lookup("fiber_maps", spec["antiadjoint"], f"{where}.antiadjoint"))
    if "identity" in spec:
        return identity_morphism(ws.table, ws.chart(spec["identity"], f"{where}.identity"), odd)
    for key in ("source", "target", "S"):
        if key not in spec:
            raise WorkspaceError(where, f"missing {key!r}")
    src = ws.chart(spec["source"], f"{where}.source")
    tgt = ws.chart(spec["target"], f"{where}.target")
    S = ws.expr(spec["S"], f"{where}.S")
    return thick_morphism(src, tgt, S, odd)


def _parse_fiber_map(ws, name, spec, where) -> FiberwiseMap:
    src = ws.lookup("bundles", spec.get("source"), f"{where}.source")
    tgt = ws.lookup("bundles", spec.get("target"), f"{where}.target")
    comps = [ws.expr(c, f"{where}.components[{i}]")
             for i, c in enumerate(spec.get("components", []))]
    return fiberwise_map(src, tgt, comps)


def _parse_qfield(ws, name, spec, where) -> HomologicalField:
    if "lie" in spec:
        lie = spec["lie"]
        rank = lie.get("rank")
        if not isinstance(rank, int) or rank < 1:
            raise WorkspaceError(f"{where}.lie.rank", "must be a positive integer")
        structure = {}
        for i, entry in enumerate(lie.get("structure", [])):
            # [i, j, k, c] means [e_i, e_j] = c e_k, indices from 1
            if not (isinstance(entry, list) and len(entry) == 4):
                raise WorkspaceError(f"{where}.lie.structure[{i}]", "use [i, j, k, coefficient]")
            a, b, k = (int(x) - 1 for x in entry[:3])
            if not all(0 <= t < rank for t in (a, b, k)):
                raise WorkspaceError(f"{where}.lie.structure[{i}]", "index out of range")
            structure[(a, b, k)] = structure.get((a, b, k), 0) + Fraction(str(entry[3]))
        Q = lie_algebra_field(ws.table, name, structure, rank, lie.get("fibers"),
                              lie.get("dual"), lie.get("antidual"))
        _add_bundle(ws, name, Q.chart)
        return Q
    if "de_rham" in spec:
        base = ws.lookup("charts", spec["de_rham"], f"{where}.de_rham")
        Q = de_rham_field(ws.table, base)
        _add_bundle(ws, name, Q.chart)
        return Q
    E = ws.lookup("bundles", spec.get("bundle"), f"{where}.bundle")
    comps = [ws.expr(c, f"{where}.components[{i}]")
             for i, c in enumerate(spec.get("components", []))]
    return homological_field(E, comps)


def _parse_hamiltonian(ws, name, spec, where) -> MasterHamiltonian:
    kind = spec.get("kind", "schouten")
    if kind not in ("schouten", "poisson"):
        raise WorkspaceError(f"{where}.kind", "must be \"schouten\" or \"poisson\"")
    if "qfield" in spec:
        Q = ws.lookup("qfields", spec["qfield"], f"{where}.qfield")
        on = spec.get("on", "dual")
        if on not in ("dual", "total"):
            raise WorkspaceError(f"{where}.on", "must be \"dual\" or \"total\"")
        return master_on_dual(Q, kind) if on == "dual" else linear_hamiltonian(Q, kind)
    base = ws.chart(spec.get("chart"), f"{where}.chart")
    carrier = base.cotangent(ws.table) if kind == "schouten" else base.anticotangent(ws.table)
    return MasterHamiltonian(carrier, ws.expr(spec.get("body"), f"{where}.body"))


_BLOCKS = (("charts", _parse_chart), ("bundles", _parse_bundle), ("series", None),
           ("fiber_maps", _parse_fiber_map), ("morphisms", _parse_morphism),
           ("qfields", _parse_qfield), ("hamiltonians", _parse_hamiltonian))


def parse_workspace(doc) -> Workspace:
    """Resolve every declaration of a workspace document."""
    if not isinstance(doc, dict):
        raise WorkspaceError("document", "must be a JSON object")
    known = {"settings", "commands"} | {b for b, _ in _BLOCKS}
    extra = sorted(set(doc) - known)
    if extra:
        raise WorkspaceError("document", f"unknown blocks {extra}")
    ws = Workspace(VariableTable())
    ws.table.eps()
    ws.settings = _settings(_block(doc, "settings"), "settings")
    qspecs = _block(doc, "qfields")
    # Lie algebra and de Rham fields declare their own bundles
    generated = {n: s for n, s in qspecs.items()
                 if isinstance(s, dict) and ("lie" in s or "de_rham" in s)}
    for block, handler in _BLOCKS:
        entries = _block(doc, block)
        if block == "qfields":
            entries = {n: s for n, s in entries.items() if n not in generated}
        for name, spec in entries.items():
            where = f"{block}.{name}"
            if name in getattr(ws, block):
                raise WorkspaceError(where, "declared twice")
            try:
                if block == "series":
                    ws.series[name] = ws.expr(spec, where)
                elif block in ("charts", "bundles"):
                    handler(ws, name, spec, where)
                else:
                    getattr(ws, block)[name] = handler(ws, name, spec, where)
            except WorkspaceError:
                raise
            except (KernelError, ExpressionError, TypeError, ValueError) as exc:
                raise WorkspaceError(where, str(exc)) from None
        if block == "bundles":
            for name, spec in generated.items():
                where = f"qfields.{name}"
                if name in ws.bundles:
                    raise WorkspaceError(where, "name already used by a bundle")
                try:
                    ws.qfields[name] = _parse_qfield(ws, name, spec, where)
                except WorkspaceError:
                    raise
                except (KernelError, ExpressionError, TypeError, ValueError) as exc:
                    raise WorkspaceError(where, str(exc)) from None
    ws.commands = _block(doc, "commands")
    return ws


# -- commands -----------------------------------------------------------------

@dataclass
class Result:
    values: list = field(default_factory=list)   # (label, Series)
    notes: list = field(default_factory=list)
    residual: bool = False

    def add(self, label, value):
        self.values.append((label, value))


def _orders(ws, cmd, where):
    K = cmd.get("order_eps", ws.settings.order_eps)
    D = cmd.get("order_momentum", ws.settings.order_momentum)
    if D < K:
        raise WorkspaceError(where, f"momentum order {D} is below eps order {K}")
    return K, D


def _out(ws, cmd, f: Series) -> Series:
    return collapse(f) if cmd.get("collapse_eps", ws.settings.collapse_eps) else f


def _trace_notes(res: Result, tr, mid: Chart):
    for k, step in enumerate(tr.approximants):
        for y, val in zip(mid.coords, step):
            res.add(f"trace[{k}].{y.name}", val)
    for k, a in enumerate(tr.agreement):
        if a is None:
            res.notes.append(f"steps {k} and {k + 1} agree exactly")
        else:
            res.notes.append(f"steps {k} and {k + 1} agree through eps^{a}")


def _residuals(res: Result, label, values):
    if isinstance(values, Series):
        values = [values]
    for i, v in enumerate(values):
        res.add(label if len(values) == 1 else f"{label}[{i}]", v)
        if not v.is_zero():
            res.residual = True
    res.notes.append(f"{label}: {'nonzero residual' if res.residual else 'ok'}")


def _functions(ws, cmd, where):
    fs = cmd.get("functions", [])
    if not isinstance(fs, list):
        raise WorkspaceError(where, "functions must be a list")
    return [ws.expr(f, f"{where}.functions[{i}]") for i, f in enumerate(fs)]


def _need(cmd, key, where):
    if key not in cmd:
        raise WorkspaceError(where, f"missing {key!r}")
    return cmd[key]


def _cmd_pullback(ws, cmd, where, res):
    phi = ws.lookup("morphisms", _need(cmd, "morphism", where), f"{where}.morphism")
    g = ws.expr(_need(cmd, "function", where), f"{where}.function")
    K, D = _orders(ws, cmd, where)
    out = pullback(phi, g, K, D, trace=ws.settings.trace)
    if ws.settings.trace:
        out, tr = out
        _trace_notes(res, tr, phi.target)
    res.add(f"pullback({cmd['morphism']}, {cmd['function']})", _out(ws, cmd, out))


def _cmd_compose(ws, cmd, where, res):
    outer = ws.lookup("morphisms", _need(cmd, "outer", where), f"{where}.outer")
    inner = ws.lookup("morphisms", _need(cmd, "inner", where), f"{where}.inner")
    K, D = _orders(ws, cmd, where)
    m = compose(outer, inner, K, D, trace=ws.settings.trace)
    if ws.settings.trace:
        m, tr = m
        _trace_notes(res, tr, inner.target)
    res.add(f"compose({cmd['outer']}, {cmd['inner']})", _out(ws, cmd, m.body))


def _cmd_adjoint(ws, cmd, where, res, odd=False):
    F = ws.lookup("fiber_maps", _need(cmd, "fiber_map", where), f"{where}.fiber_map")
    m = antiadjoint(F) if odd else adjoint(F)
    res.notes.append(f"{m.source.name} => {m.target.name} ({m.parity})")
    res.add(f"{'antiadjoint' if odd else 'adjoint'}({cmd['fiber_map']})", _out(ws, cmd, m.body))


def _cmd_pushforward(ws, cmd, where, res):
    F = ws.lookup("fiber_maps", _need(cmd, "fiber_map", where), f"{where}.fiber_map")
    f = ws.expr(_need(cmd, "function", where), f"{where}.function")
    kind = cmd.get("kind", "even")
    if kind not in ("even", "odd"):
        raise WorkspaceError(f"{where}.kind", "must be \"even\" or \"odd\"")
    K, D = _orders(ws, cmd, where)
    out = (pushforward_odd if kind == "odd" else pushforward)(F, f, K, D)
    res.add(f"pushforward({cmd['fiber_map']}, {cmd['function']})", _out(ws, cmd, out))


def _cmd_mx(ws, cmd, where, res):
    E = ws.lookup("bundles", _need(cmd, "bundle", where), f"{where}.bundle")
    f = ws.expr(_need(cmd, "function", where), f"{where}.function")
    kind = cmd.get("kind", "even")
    direction = cmd.get("direction", "forward")
    if kind not in ("even", "odd") or direction not in ("forward", "inverse"):
        raise WorkspaceError(where, "kind must be even|odd and direction forward|inverse")
    fn = mx_odd if kind == "odd" else mx_even
    res.add(f"mx_{kind}({cmd['function']})", fn(f, E, inverse=direction == "inverse"))


def _cmd_bracket(ws, cmd, where, res):
    kind = _need(cmd, "kind", where)
    if kind not in ("poisson", "schouten"):
        raise WorkspaceError(f"{where}.kind", "must be \"poisson\" or \"schouten\"")
    base = ws.chart(_need(cmd, "chart", where), f"{where}.chart")
    f = ws.expr(_need(cmd, "f", where), f"{where}.f")
    g = ws.expr(_need(cmd, "g", where), f"{where}.g")
    if kind == "poisson":
        out = canonical_poisson(f, g, base.cotangent(ws.table))
    else:
        out = canonical_schouten(f, g, base.anticotangent(ws.table))
    res.add(f"{kind}({cmd['f']}, {cmd['g']})", out)


def _cmd_derived(ws, cmd, where, res):
    H = ws.lookup("hamiltonians", _need(cmd, "hamiltonian", where), f"{where}.hamiltonian")
    fs = _functions(ws, cmd, where)
    label = ", ".join(str(f) for f in cmd.get("functions", []))
    res.add(f"derived({label})", derived_bracket(H, *fs))


def _cmd_anchor(ws, cmd, where, res):
    Q = ws.lookup("qfields", _need(cmd, "qfield", where), f"{where}.qfield")
    d, a, residuals = anchor(Q)
    for dx in d.chart.fibers:
        res.add(f"anchor({cmd['qfield']}).{dx.name}", a[dx])
    _residuals(res, f"anchor_residual({cmd['qfield']})", residuals)


def _check(ws, cmd, where, res):
    what = _need(cmd, "what", where)
    if what not in CHECKS:
        raise WorkspaceError(f"{where}.what", f"unknown check {what!r}; one of {list(CHECKS)}")
    get = lambda block, key: ws.lookup(block, _need(cmd, key, where), f"{where}.{key}")
    if what == "q2":
        if "hamiltonian" in cmd:
            obj = get("hamiltonians", "hamiltonian")
        else:
            obj = get("qfields", "qfield")
        return _residuals(res, "q2", check_homological(obj))
    if what == "related":
        Q1, Q2 = get("qfields", "q1"), get("qfields", "q2")
        F = get("fiber_maps", "fiber_map")
        if F.source != Q1.chart or F.target != Q2.chart:
            raise WorkspaceError(where, "fiber map must go from the bundle of q1 to that of q2")
        return _residuals(res, "related", q_related(Q1, Q2, dict(zip(F.target.fibers,
                                                                        F.components))))
    if what == "hj":
        phi = get("morphisms", "morphism")
        H1, H2 = get("hamiltonians", "h1"), get("hamiltonians", "h2")
        return _residuals(res, "hj", hamiltonians_related(H1, H2, phi))
    K, D = _orders(ws, cmd, where)
    if what == "intertwine":
        phi = get("morphisms", "morphism")
        H1, H2 = get("hamiltonians", "h1"), get("hamiltonians", "h2")
        g = ws.expr(_need(cmd, "function", where), f"{where}.function")
        return _residuals(res, "intertwine", intertwine_check(phi, H1, H2, g, K, D))
    if what == "linf":
        H = get("hamiltonians", "hamiltonian")
        fs = _functions(ws, cmd, where)
        return _residuals(res, f"linf[{len(fs)}]", linf_identity_check(H, len(fs), fs))
    if what == "recover":
        phi = get("morphisms", "morphism")
        return _residuals(res, "recover", recover_generating_function(phi, K, D) - phi.body)
    if what == "assoc":
        names = cmd.get("morphisms", [])
        if len(names) != 3:
            raise WorkspaceError(f"{where}.morphisms", "need [outer, middle, inner]")
        m3, m2, m1 = (ws.lookup("morphisms", n, f"{where}.morphisms") for n in names)
        left = compose(compose(m3, m2, K, D), m1, K, D).body
        right = compose(m3, compose(m2, m1, K, D), K, D).body
        return _residuals(res, "assoc", left - right)
    # functorial
    outer, inner = get("morphisms", "outer"), get("morphisms", "inner")
    g = ws.expr(_need(cmd, "function", where), f"{where}.function")
    direct = pullback(compose(outer, inner, K, D), g, K, D)
    stepwise = pullback(inner, pullback(outer, g, K, D), K, D, scale=False)
    return _residuals(res, "functorial", direct - stepwise)


def _cmd_taylor(ws, cmd, where, res):
    phi = ws.lookup("morphisms", _need(cmd, "morphism", where), f"{where}.morphism")
    fs = _functions(ws, cmd, where)
    g0 = ws.expr(cmd["base"], f"{where}.base") if "base" in cmd else None
    K, D = _orders(ws, cmd, where)
    res.add(f"taylor[{len(fs)}]({cmd['morphism']})",
            _out(ws, cmd, taylor_components(phi, fs, g0, K, D)))


def _cmd_legendre(ws, cmd, where, res):
    phi = ws.lookup("morphisms", _need(cmd, "morphism", where), f"{where}.morphism")
    res.add(f"legendre({cmd['morphism']})", _out(ws, cmd, legendre_F(phi)))


_HANDLERS = {
    "pullback": _cmd_pullback,
    "compose": _cmd_compose,
    "adjoint": _cmd_adjoint,
    "antiadjoint": lambda ws, cmd, where, res: _cmd_adjoint(ws, cmd, where, res, odd=True),
    "pushforward": _cmd_pushforward,
    "mx": _cmd_mx,
    "bracket": _cmd_bracket,
    "derived-bracket": _cmd_derived,
    "anchor": _cmd_anchor,
    "check": _check,
    "taylor": _cmd_taylor,
    "legendre": _cmd_legendre,
}


def run_command(ws: Workspace, cmd: dict, index: int = 0) -> Result:
    """Run one command; raises :class:`WorkspaceError` on bad input."""
    where = f"commands[{index}]"
    if not isinstance(cmd, dict) or cmd.get("op") not in _HANDLERS:
        op = cmd.get("op") if isinstance(cmd, dict) else cmd
        raise WorkspaceError(where, f"unknown command {op!r}")
    res = Result()
    try:
        _HANDLERS[cmd["op"]](ws, cmd, where, res)
    except WorkspaceError:
        raise
    except (KernelError, ExpressionError, TypeError, ValueError) as exc:
        raise WorkspaceError(where, str(exc)) from None
    return res


def render_text(cmd: dict, res: Result) -> list:
    head = " ".join([cmd["op"]] + ([cmd["what"]] if cmd["op"] == "check" else []))
    lines = [f"# {head}"]
    lines += [f"# {n}" for n in res.notes]
    lines += [f"{label} = {render(v)}" for label, v in res.values]
    return lines


def render_json(cmd: dict, res: Result) -> dict:
    return {"command": cmd,
            "values": [{"label": label, "series": to_json(v), "text": render(v)}
                       for label, v in res.values],
            "notes": res.notes,
            "status": "nonzero" if res.residual else "ok"}


def run_workspace(ws: Workspace, commands=None, fmt="text"):
    """Run commands in order; returns ``(output text, exit code)``."""
    commands = ws.commands if commands is None else commands
    code = OK
    text, docs = [], []
    for i, cmd in enumerate(commands):
        res = run_command(ws, cmd, i)
        if res.residual:
            code = RESIDUAL
        if fmt == "json":
            docs.append(render_json(cmd, res))
        else:
            text.extend(render_text(cmd, res))
    if fmt == "json":
        return json.dumps({"results": docs, "exit": code}, indent=2) + "\n", code
    return "\n".join(text) + ("\n" if text else ""), code


# -- argument handling ----------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--order-momentum", type=int, metavar="D")
    common.add_argument("--order-eps", type=int, metavar="K")
    common.add_argument("--collapse-eps", action="store_true")
    common.add_argument("--trace", action="store_true", help="print iteration approximants")
    common.add_argument("--format", choices=("text", "json"), default="text")

    ap = argparse.ArgumentParser(prog="microformal",
                                 description="Thick morphisms, pullbacks and derived brackets.")
    sub = ap.add_subparsers(dest="op", required=True)
    doc_help = "workspace JSON file ('-' for stdin)"
    run = sub.add_parser("run", parents=[common], help="run the document's commands block")
    run.add_argument("document", help=doc_help)
    for op, (scalars, lists) in COMMAND_KEYS.items():
        p = sub.add_parser(op, parents=[common])
        if op == "check":
            p.add_argument("what", choices=CHECKS)
        elif op == "bracket":
            p.add_argument("kind", choices=("poisson", "schouten"))
        p.add_argument("document", help=doc_help)
        for key in scalars:
            if (op, key) in (("check", "what"), ("bracket", "kind")):
                continue
            else:
                p.add_argument(f"--{key.replace('_', '-')}", dest=key)
        for key in lists:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, nargs="+")
    return ap


def _load(path):
    if path == "-":
        return json.load(sys.stdin)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        ws = parse_workspace(_load(args.document))
        over = {}
        if args.order_momentum is not None:
            over["order_momentum"] = args.order_momentum
        if args.order_eps is not None:
            over["order_eps"] = args.order_eps
        if args.collapse_eps:
            over["collapse_eps"] = True
        if args.trace:
            over["trace"] = True
        ws.settings = replace(ws.settings, **over)
        if args.op == "run":
            commands = None
        else:
            scalars, lists = COMMAND_KEYS[args.op]
            cmd = {"op": args.op}
            for key in scalars + lists:
                v = getattr(args, key, None)
                if v is not None:
                    cmd[key] = v
            commands = [cmd]
        out, code = run_workspace(ws, commands, args.format)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except WorkspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
