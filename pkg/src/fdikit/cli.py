"""Command-line front end: parse models and alarm specifications, then
synthesize, verify, analyse, validate, or simulate.

Two small text formats drive everything.

``.fml`` transition-system models::

    model toy

    var x : { a, b, c }

    event u
    event o obs

    init x = a

    trans u : x = a => x' = b
    trans o : x = b => skip

Domains are value sets or integer ranges ``lo..hi``.  Updates assign primed
variables; unmentioned variables keep their value, ``skip`` keeps the whole
state.  Multiple ``trans`` lines for one event union their rules; multiple
``init`` lines are conjoined.  A bare identifier on the right of a
comparison is resolved as a domain value of the variable on the left first,
then as a second variable.  ``Y``, ``O``, ``true``, ``false``, ``min``,
``max`` and ``skip`` are reserved words.

``.aslk`` alarm specifications::

    alarm a_f : finitedel(x = c) diag=trace maximal
    alarm e2  : exactdel(x = c, 2) diag=system

Conditions use the past grammar: state comparisons, ``!``, ``&``, ``|``,
``Y``, ``O``, ``Y^n``, ``O<=n``, ``Y event:<name>`` and parentheses.

Exit codes: 0 when every requested check passes, 1 on input or engine
errors, 2 when a verification, validation, or diagnosability check fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import random
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .aslk import (
    AlarmSpec,
    BOUNDDEL,
    EXACTDEL,
    FINITEDEL,
    SpecError,
    validate_specs,
)
from .kernel import (
    And,
    Arith,
    Call,
    Cmp,
    DEFAULT_STATE_CAP,
    Domain,
    Expr,
    KernelError,
    Lit,
    Lts,
    Not,
    Or,
    Rule,
    TracePrefix,
    VarRef,
    reachable_graph,
)
from .pastltl import (
    EventAtom,
    Once,
    OnceWithin,
    PAnd,
    PNot,
    POr,
    PastFormula,
    StatePred,
    Yesterday,
    YesterdayN,
)
from .synth import (
    DEFAULT_BELIEF_CAP,
    SynthError,
    annotate,
    build_belief_automaton,
    build_monitored_plant,
    emit_diagnoser,
    to_dot,
)
from .verify import (
    CheckResult,
    VerifyError,
    check_determinism,
    check_diagnosability,
    check_mutual_exclusion,
    check_possibility,
    check_subsumption,
    make_context,
    verify_diagnoser,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESERVED_WORDS = frozenset({"Y", "O", "true", "false", "min", "max", "skip"})


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, source: str = "<input>"):
        super().__init__(f"{source}:{line}:{col}: {message}")
        self.line = line
        self.col = col


class InvalidTrace(Exception):
    pass


# ---------------------------------------------------------------------------
# tokenizer


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | op | newline | eof
    text: str
    line: int
    col: int


_TWO_CHAR_OPS = ("=>", "!=", "<=", ">=", "..")
_ONE_CHAR_OPS = "{}(),:^'=<>&|!+-"


def tokenize(text: str, source: str = "<input>") -> list:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            if tokens and tokens[-1].kind != "newline":
                tokens.append(Token("newline", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text[i : i + 2] in _TWO_CHAR_OPS:
            tokens.append(Token("op", text[i : i + 2], line, col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token("op", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col, source)
    if tokens and tokens[-1].kind == "newline":
        tokens.pop()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _TokenStream:
    def __init__(self, tokens: list, source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col, self.source)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            got = tok.text if tok.kind != "eof" else "end of input"
            self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.next()
        return None

    def skip_newlines(self):
        while self.peek().kind == "newline":
            self.next()

    def end_statement(self):
        tok = self.peek()
        if tok.kind not in ("newline", "eof"):
            self.error(f"unexpected {tok.text!r} at end of statement")
        while self.peek().kind == "newline":
            self.next()


def _check_name(ts: _TokenStream, tok: Token, what: str) -> str:
    if tok.text in RESERVED_WORDS:
        ts.error(f"{tok.text!r} is a reserved word and cannot name a {what}", tok)
    return tok.text


# ---------------------------------------------------------------------------
# expression parsing (state predicates, shared by both formats)

_CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


class _ExprParser:
    """Parses state expressions against a variable environment."""

    def __init__(self, ts: _TokenStream, domains: dict):
        self.ts = ts
        self.domains = domains  # var name -> Domain

    def parse(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        items = [self._and()]
        while self.ts.accept("op", "|"):
            items.append(self._and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def _and(self) -> Expr:
        items = [self._unary()]
        while self.ts.accept("op", "&"):
            items.append(self._unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def _unary(self) -> Expr:
        if self.ts.accept("op", "!"):
            return Not(self._unary())
        return self._rel()

    def _rel(self) -> Expr:
        left = self._sum(hint=None)
        tok = self.ts.peek()
        if tok.kind == "op" and tok.text in _CMP_OPS:
            self.ts.next()
            hint = left.name if isinstance(left, VarRef) else None
            right = self._sum(hint=hint)
            return Cmp(tok.text, left, right)
        return left

    def _sum(self, hint: Optional[str]) -> Expr:
        left = self._atom(hint)
        while True:
            tok = self.ts.peek()
            if tok.kind == "op" and tok.text in ("+", "-"):
                self.ts.next()
                left = Arith(tok.text, left, self._atom(None))
            else:
                return left

    def _atom(self, hint: Optional[str]) -> Expr:
        tok = self.ts.peek()
        if tok.kind == "int":
            self.ts.next()
            return Lit(int(tok.text))
        if self.ts.accept("op", "("):
            inner = self._or()
            self.ts.expect("op", ")")
            return inner
        if tok.kind != "ident":
            self.ts.error(f"expected an expression, found {tok.text!r}")
        if tok.text == "true":
            self.ts.next()
            return Lit(True)
        if tok.text == "false":
            self.ts.next()
            return Lit(False)
        if tok.text in ("min", "max"):
            self.ts.next()
            self.ts.expect("op", "(")
            a = self._or()
            self.ts.expect("op", ",")
            b = self._or()
            self.ts.expect("op", ")")
            return Call(tok.text, (a, b))
        self.ts.next()
        name = tok.text
        # a value of the hinted variable's domain wins over a variable
        if hint is not None and name in self.domains[hint].values:
            return Lit(name)
        if name in self.domains:
            return VarRef(name)
        if hint is not None:
            self.ts.error(
                f"{name!r} is neither a value of {hint!r} nor a variable", tok
            )
        self.ts.error(f"undeclared variable {name!r}", tok)


# ---------------------------------------------------------------------------
# model parsing


def parse_model(text: str, source: str = "<input>") -> Lts:
    ts = _TokenStream(tokenize(text, source), source)
    ts.skip_newlines()
    ts.expect("ident", "model")
    name = _check_name(ts, ts.expect("ident"), "model")
    ts.end_statement()

    domains: dict = {}
    var_order: list = []
    events: list = []
    event_names: set = set()
    inits: list = []
    rules_by_event: dict = {}
    expr_parser = _ExprParser(ts, domains)

    def parse_value() -> object:
        tok = ts.peek()
        if tok.kind == "int":
            ts.next()
            return int(tok.text)
        if tok.kind == "ident":
            if tok.text == "true":
                ts.next()
                return True
            if tok.text == "false":
                ts.next()
                return False
            ts.next()
            return _check_name(ts, tok, "domain value")
        ts.error(f"expected a domain value, found {tok.text!r}")

    while ts.peek().kind != "eof":
        tok = ts.expect("ident")
        if tok.text == "var":
            vname = _check_name(ts, ts.expect("ident"), "variable")
            if vname in domains:
                ts.error(f"variable {vname!r} declared twice", tok)
            ts.expect("op", ":")
            if ts.accept("op", "{"):
                values = [parse_value()]
                while ts.accept("op", ","):
                    values.append(parse_value())
                ts.expect("op", "}")
            else:
                lo = int(ts.expect("int").text)
                ts.expect("op", "..")
                hi = int(ts.expect("int").text)
                if hi < lo:
                    ts.error(f"empty range {lo}..{hi}")
                values = list(range(lo, hi + 1))
            if len(set(values)) != len(values):
                ts.error(f"domain of {vname!r} repeats a value", tok)
            domains[vname] = Domain(vname, tuple(values))
            var_order.append(vname)
        elif tok.text == "event":
            ename = _check_name(ts, ts.expect("ident"), "event")
            if ename in event_names:
                ts.error(f"event {ename!r} declared twice", tok)
            observable = ts.accept("ident", "obs") is not None
            events.append((ename, observable))
            event_names.add(ename)
            rules_by_event[ename] = []
        elif tok.text == "init":
            inits.append(expr_parser.parse())
        elif tok.text == "trans":
            etok = ts.expect("ident")
            if etok.text not in event_names:
                ts.error(f"undeclared event {etok.text!r}", etok)
            ts.expect("op", ":")
            guard = expr_parser.parse()
            ts.expect("op", "=>")
            updates: list = []
            if ts.accept("ident", "skip") is None:
                while True:
                    utok = ts.expect("ident")
                    if utok.text not in domains:
                        ts.error(f"undeclared variable {utok.text!r}", utok)
                    ts.expect("op", "'")
                    ts.expect("op", "=")
                    prev = _ExprParser(ts, domains)
                    # resolve bare values against the assigned variable
                    expr = prev._sum(hint=utok.text)
                    updates.append((utok.text, expr))
                    if ts.accept("op", ",") is None:
                        break
            rules_by_event[etok.text].append(Rule(guard, tuple(updates)))
        else:
            ts.error(f"unknown statement {tok.text!r}", tok)
        ts.end_statement()

    if not var_order:
        raise ParseError("model declares no variables", 1, 1, source)
    if not events:
        raise ParseError("model declares no events", 1, 1, source)
    if len(inits) == 0:
        init: Expr = Lit(True)
    elif len(inits) == 1:
        init = inits[0]
    else:
        init = And(tuple(inits))
    return Lts(
        name=name,
        vars=tuple((v, domains[v]) for v in var_order),
        events=tuple(events),
        init=init,
        rules=tuple((e, tuple(rules_by_event[e])) for e, _obs in events),
    )


# ---------------------------------------------------------------------------
# specification parsing


class _FormulaParser:
    def __init__(self, ts: _TokenStream, model: Lts):
        self.ts = ts
        self.expr = _ExprParser(ts, dict(model.vars))
        self.model = model

    def parse(self) -> PastFormula:
        return self._or()

    def _or(self) -> PastFormula:
        items = [self._and()]
        while self.ts.accept("op", "|"):
            items.append(self._and())
        return items[0] if len(items) == 1 else POr(tuple(items))

    def _and(self) -> PastFormula:
        items = [self._unary()]
        while self.ts.accept("op", "&"):
            items.append(self._unary())
        return items[0] if len(items) == 1 else PAnd(tuple(items))

    def _unary(self) -> PastFormula:
        tok = self.ts.peek()
        if tok.kind == "op" and tok.text == "!":
            self.ts.next()
            return PNot(self._unary())
        if tok.kind == "ident" and tok.text == "Y":
            self.ts.next()
            if self.ts.accept("op", "^"):
                power = int(self.ts.expect("int").text)
                return YesterdayN(self._unary(), power)
            return Yesterday(self._unary())
        if tok.kind == "ident" and tok.text == "O":
            self.ts.next()
            if self.ts.accept("op", "<="):
                bound = int(self.ts.expect("int").text)
                return OnceWithin(self._unary(), bound)
            return Once(self._unary())
        return self._atom()

    def _atom(self) -> PastFormula:
        tok = self.ts.peek()
        if tok.kind == "ident" and tok.text == "event" and self.ts.peek(1).text == ":":
            self.ts.next()
            self.ts.next()
            etok = self.ts.expect("ident")
            if etok.text not in set(self.model.event_names):
                self.ts.error(f"undeclared event {etok.text!r}", etok)
            return EventAtom(etok.text)
        if tok.kind == "op" and tok.text == "(":
            self.ts.next()
            inner = self._or()
            self.ts.expect("op", ")")
            return inner
        return StatePred(self.expr._rel())


_PATTERNS = {"exactdel": EXACTDEL, "bounddel": BOUNDDEL, "finitedel": FINITEDEL}


def parse_specs(text: str, model: Lts, source: str = "<input>") -> list:
    """Alarm specifications bound against a model; validated by the caller."""
    ts = _TokenStream(tokenize(text, source), source)
    ts.skip_newlines()
    specs = []
    while ts.peek().kind != "eof":
        start = ts.expect("ident", "alarm")
        name = _check_name(ts, ts.expect("ident"), "alarm")
        ts.expect("op", ":")
        ktok = ts.expect("ident")
        if ktok.text not in _PATTERNS:
            ts.error(
                f"unknown pattern {ktok.text!r}"
                " (expected exactdel, bounddel or finitedel)",
                ktok,
            )
        kind = _PATTERNS[ktok.text]
        ts.expect("op", "(")
        condition = _FormulaParser(ts, model).parse()
        delay = None
        if ts.accept("op", ","):
            delay = int(ts.expect("int").text)
        ts.expect("op", ")")
        ts.expect("ident", "diag")
        ts.expect("op", "=")
        dtok = ts.expect("ident")
        if dtok.text not in ("system", "trace"):
            ts.error("diag must be 'system' or 'trace'", dtok)
        maximal = ts.accept("ident", "maximal") is not None
        try:
            specs.append(
                AlarmSpec(
                    alarm=name,
                    kind=kind,
                    condition=condition,
                    delay=delay,
                    diag=dtok.text,
                    maximal=maximal,
                )
            )
        except ValueError as exc:
            ts.error(str(exc), start)
        ts.end_statement()
    return specs


# ---------------------------------------------------------------------------
# writers


def format_value(v) -> str:
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


_PREC = {"|": 1, "&": 2, "!": 3, "cmp": 4, "sum": 5, "atom": 6}


def format_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Lit):
        return format_value(e.value)
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Not):
        # negation applies to a whole comparison, so print those bracketed
        inner = format_expr(e.operand, _PREC["cmp"] + 1)
        text, prec = f"!{inner}", _PREC["!"]
    elif isinstance(e, And):
        # same-precedence children keep their brackets: nesting is structure
        text = " & ".join(format_expr(x, _PREC["&"] + 1) for x in e.operands)
        prec = _PREC["&"]
    elif isinstance(e, Or):
        text = " | ".join(format_expr(x, _PREC["|"] + 1) for x in e.operands)
        prec = _PREC["|"]
    elif isinstance(e, Cmp):
        lhs = format_expr(e.lhs, _PREC["cmp"])
        rhs = format_expr(e.rhs, _PREC["cmp"])
        text, prec = f"{lhs} {e.op} {rhs}", _PREC["cmp"]
    elif isinstance(e, Arith):
        lhs = format_expr(e.lhs, _PREC["sum"])
        rhs = format_expr(e.rhs, _PREC["sum"] + 1)
        text, prec = f"{lhs} {e.op} {rhs}", _PREC["sum"]
    elif isinstance(e, Call):
        args = ", ".join(format_expr(a, 0) for a in e.args)
        return f"{e.fn}({args})"
    else:  # pragma: no cover - exhaustive over the expression nodes
        raise TypeError(f"cannot format {e!r}")
    return f"({text})" if prec < parent else text


def _format_domain(dom: Domain) -> str:
    values = dom.values
    if (
        len(values) > 2
        and all(isinstance(v, int) and not isinstance(v, bool) for v in values)
        and tuple(values) == tuple(range(values[0], values[-1] + 1))
    ):
        return f"{values[0]}..{values[-1]}"
    return "{ " + ", ".join(format_value(v) for v in values) + " }"


def format_model(lts: Lts) -> str:
    lines = [f"model {lts.name}", ""]
    for vname, dom in lts.vars:
        lines.append(f"var {vname} : {_format_domain(dom)}")
    lines.append("")
    for ename, observable in lts.events:
        lines.append(f"event {ename} obs" if observable else f"event {ename}")
    lines.append("")
    lines.append(f"init {format_expr(lts.init)}")
    lines.append("")
    for ename, event_rules in lts.rules:
        for rule in event_rules:
            guard = format_expr(rule.guard)
            if rule.updates:
                ups = ", ".join(
                    f"{v}' = {format_expr(x)}" for v, x in rule.updates
                )
            else:
                ups = "skip"
            lines.append(f"trans {ename} : {guard} => {ups}")
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# reports


def _trace_json(prefix: TracePrefix) -> dict:
    names = prefix.lts.var_names
    return {
        "events": list(prefix.events),
        "states": [dict(zip(names, s)) for s in prefix.states],
    }


def _check_json(result: CheckResult) -> dict:
    out = {
        "alarm": result.alarm,
        "obligation": result.obligation,
        "kind": result.kind,
        "verdict": result.verdict,
        "detail": result.detail,
    }
    if result.counterexample is not None:
        out["counterexample"] = _trace_json(result.counterexample)
    if result.cycle_events is not None:
        out["cycle_events"] = list(result.cycle_events)
    return out


def _spec_json(spec: AlarmSpec) -> dict:
    return {
        "alarm": spec.alarm,
        "pattern": spec.kind,
        "delay": spec.delay,
        "diag": spec.diag,
        "maximal": spec.maximal,
    }


def _base_report(model_path: Path, model_text: str, model: Lts) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "fdikit", "version": __version__},
        "model": {
            "file": model_path.name,
            "name": model.name,
            "sha256": hashlib.sha256(model_text.encode()).hexdigest(),
        },
    }


def _write_report(report: dict, path: Optional[Path]):
    if path is None:
        return
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    path.write_text(text)
    log.info("report written to %s", path)


def _determinism_json(report) -> dict:
    return {
        "passed": report.passed,
        "conditions": [
            {
                "number": c.number,
                "description": c.description,
                "ok": c.ok,
                "witness": c.witness,
            }
            for c in report.conditions
        ],
        "notes": list(report.notes),
    }


# ---------------------------------------------------------------------------
# shared command plumbing


def _load_model(path: Path) -> tuple:
    text = path.read_text()
    return text, parse_model(text, source=str(path))


def _load_specs(path: Path, model: Lts) -> list:
    specs = parse_specs(path.read_text(), model, source=str(path))
    diagnostics = validate_specs(specs, model)
    for diag in diagnostics:
        print(f"{diag.severity}: {diag.alarm or '-'}: {diag.message}", file=sys.stderr)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise SpecError(errors)
    return specs


def _synthesize(model, specs, args):
    t0 = time.perf_counter()
    mp = build_monitored_plant(model, specs, cap=args.cap_states)
    ba = build_belief_automaton(mp, cap=args.cap_beliefs)
    diag = annotate(ba)
    log.info(
        "synthesis: %d beliefs, %d edges in %.3fs",
        len(ba.beliefs),
        len(ba.edges),
        time.perf_counter() - t0,
    )
    return diag


def _print_results(results, stream=None):
    stream = stream or sys.stdout
    for r in results:
        marker = {"pass": "PASS", "fail": "FAIL", "skip": "SKIP"}[r.verdict]
        line = f"  [{marker}] {r.alarm}: {r.obligation} ({r.kind})"
        if r.detail:
            line += f" - {r.detail}"
        print(line, file=stream)
        if r.counterexample is not None:
            print(f"         trace: {' '.join(r.counterexample.events)}", file=stream)


# ---------------------------------------------------------------------------
# subcommands


def run_synth(args) -> int:
    model_text, model = _load_model(args.model)
    specs = _load_specs(args.specs, model)
    diag = _synthesize(model, specs, args)
    d_lts = emit_diagnoser(diag)
    text = format_model(d_lts)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        print(f"diagnoser written to {args.out}")
    if args.dot is not None:
        args.dot.write_text(to_dot(diag))
        print(f"dot rendering written to {args.dot}")

    report = _base_report(args.model, model_text, model)
    report["synthesis"] = {
        "beliefs": len(diag.automaton.beliefs),
        "edges": len(diag.automaton.edges),
        "diagnoser_states": len(reachable_graph(d_lts).states),
        "alarms": [_spec_json(s) for s in specs],
    }
    exit_code = 0
    if args.verify:
        det = check_determinism(d_lts, cap=args.cap_states)
        results = verify_diagnoser(
            d_lts,
            model,
            specs,
            state_cap=args.cap_states,
            belief_cap=args.cap_beliefs,
            mp=diag.mp,
            ba=diag.automaton,
        )
        report["determinism"] = _determinism_json(det)
        report["checks"] = [_check_json(r) for r in results]
        print("verification:")
        _print_results(results)
        if not det.passed or any(r.verdict == "fail" for r in results):
            exit_code = 2
    _write_report(report, args.report)
    return exit_code


def run_verify(args) -> int:
    model_text, model = _load_model(args.model)
    specs = _load_specs(args.specs, model)
    if args.diagnoser is not None:
        d_lts = parse_model(args.diagnoser.read_text(), source=str(args.diagnoser))
    else:
        d_lts = emit_diagnoser(_synthesize(model, specs, args))

    report = _base_report(args.model, model_text, model)
    det = check_determinism(d_lts, cap=args.cap_states)
    report["determinism"] = _determinism_json(det)
    print(f"determinism: {'pass' if det.passed else 'FAIL'}")
    for cond in det.conditions:
        mark = "ok" if cond.ok else "VIOLATED"
        extra = f" ({cond.witness})" if cond.witness else ""
        print(f"  [{cond.number}] {cond.description}: {mark}{extra}")
    if not det.passed:
        # obligations are only meaningful for deterministic diagnosers
        _write_report(report, args.report)
        return 2

    results = verify_diagnoser(
        d_lts, model, specs, state_cap=args.cap_states, belief_cap=args.cap_beliefs
    )
    report["checks"] = [_check_json(r) for r in results]
    print("obligations:")
    _print_results(results)
    _write_report(report, args.report)
    return 2 if any(r.verdict == "fail" for r in results) else 0


def run_diagnosability(args) -> int:
    model_text, model = _load_model(args.model)
    specs = _load_specs(args.specs, model)
    report = _base_report(args.model, model_text, model)
    entries = []
    all_ok = True
    for spec in specs:
        result = check_diagnosability(
            model, spec, state_cap=args.cap_states, belief_cap=args.cap_beliefs
        )
        entry = {
            "spec": _spec_json(spec),
            "system_diagnosable": result.system_diagnosable,
            "condition_points": len(result.points),
            "diagnosable_points": sum(1 for p in result.points if p.diagnosable),
            "points": [
                {"witness_events": list(p.witness.events), "diagnosable": p.diagnosable}
                for p in result.points
            ],
        }
        verdict = "diagnosable" if result.system_diagnosable else "NOT diagnosable"
        print(f"{spec.alarm} ({spec.kind}): {verdict}")
        if not result.system_diagnosable:
            all_ok = False
            entry["reason"] = result.reason
            print(f"  {result.reason}")
            if result.critical_pair is not None:
                pair = result.critical_pair
                entry["critical_pair"] = {
                    "left": _trace_json(pair.left),
                    "right": _trace_json(pair.right),
                    "note": pair.note,
                }
                print(f"  left : {' '.join(pair.left.events)}")
                print(f"  right: {' '.join(pair.right.events)}")
        if result.points:
            good = entry["diagnosable_points"]
            print(f"  condition points: {good}/{len(result.points)} diagnosable")
        entries.append(entry)
    report["diagnosability"] = entries
    _write_report(report, args.report)
    return 0 if all_ok else 2


def _parse_pair(value: str) -> tuple:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError("expected two alarm names: A,B")
    return tuple(parts)


def run_validate(args) -> int:
    model_text, model = _load_model(args.model)
    specs = _load_specs(args.specs, model)
    if args.diagnoser is not None:
        d_lts = parse_model(args.diagnoser.read_text(), source=str(args.diagnoser))
    else:
        d_lts = emit_diagnoser(_synthesize(model, specs, args))
    assume = None
    if args.assume:
        ts = _TokenStream(tokenize(args.assume, "--assume"), "--assume")
        assume = _ExprParser(ts, dict(model.vars)).parse()
        if ts.peek().kind != "eof":
            ts.error("trailing input after the assumption")

    ctx = make_context(
        d_lts, model, specs, state_cap=args.cap_states, belief_cap=args.cap_beliefs
    )
    outcomes = []
    for spec in specs:
        outcomes.append(
            check_possibility(d_lts, model, specs, spec.alarm, assume=assume, ctx=ctx)
        )
    for a, b in args.subsumes or ():
        outcomes.append(
            check_subsumption(d_lts, model, specs, a, b, assume=assume, ctx=ctx)
        )
    for a, b in args.mutex or ():
        outcomes.append(
            check_mutual_exclusion(d_lts, model, specs, a, b, assume=assume, ctx=ctx)
        )

    entries = []
    for out in outcomes:
        entry = {"check": out.check, "passed": out.passed, "detail": out.detail}
        if out.witness_on is not None:
            entry["witness_on"] = _trace_json(out.witness_on)
        if out.witness_off is not None:
            entry["witness_off"] = _trace_json(out.witness_off)
        entries.append(entry)
        mark = "PASS" if out.passed else "FAIL"
        line = f"  [{mark}] {out.check}"
        if out.detail:
            line += f" - {out.detail}"
        print(line)
    report = _base_report(args.model, model_text, model)
    report["assume"] = args.assume
    report["validation"] = entries
    _write_report(report, args.report)
    return 0 if all(o.passed for o in outcomes) else 2


def _load_trace_events(path: Path) -> list:
    events = []
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            events.extend(line.split())
    return events


def run_simulate(args) -> int:
    _model_text, model = _load_model(args.model)
    specs = _load_specs(args.specs, model)
    diag = _synthesize(model, specs, args)
    if args.diagnoser is not None:
        d_lts = parse_model(args.diagnoser.read_text(), source=str(args.diagnoser))
    else:
        d_lts = emit_diagnoser(diag)
    det = check_determinism(d_lts, cap=args.cap_states)
    if not det.passed:
        print("error: the diagnoser is not deterministic", file=sys.stderr)
        return 2

    mp = diag.mp
    graph = mp.graph
    d_graph = reachable_graph(d_lts, cap=args.cap_states)
    rng = random.Random(args.seed)
    betas = {spec.alarm: graph.predicate(mp.betabar[spec.alarm]) for spec in specs}
    alarm_cols: list = []
    for spec in specs:
        alarm_cols.append((f"A:{spec.alarm}", d_lts.var_index[spec.alarm]))
        alarm_cols.append(
            (f"Aneg:{spec.alarm}", d_lts.var_index[spec.negative_alarm])
        )

    header = (
        ["step", "event", "obs"]
        + [f"beta:{spec.alarm}" for spec in specs]
        + [name for name, _ in alarm_cols]
    )
    rows = []

    node = graph.initial[0]
    d_node = d_graph.initial[0]

    def emit_row(step: int, event: Optional[str]):
        observable = event is not None and event in model.observable_events
        d_state = d_graph.states[d_node]
        rows.append(
            [str(step), event or "-", "yes" if observable else ("-" if event is None else "no")]
            + [format_value(bool(betas[s.alarm](node))) for s in specs]
            + [format_value(bool(d_state[idx])) for _name, idx in alarm_cols]
        )

    script = _load_trace_events(args.trace) if args.trace is not None else None
    total = len(script) if script is not None else args.steps
    if args.steps or script:
        emit_row(0, None)
    for step in range(1, total + 1):
        moves = [
            (ev, tgt)
            for ev in mp.lts.event_names
            for tgt in graph.successors_of(node, ev)
        ]
        if script is not None:
            wanted = script[step - 1]
            if wanted not in set(mp.lts.event_names):
                raise InvalidTrace(f"step {step}: unknown event {wanted!r}")
            moves = [(ev, tgt) for ev, tgt in moves if ev == wanted]
            if not moves:
                raise InvalidTrace(
                    f"step {step}: event {wanted!r} is not enabled by the model"
                )
        if not moves:
            log.info("deadlock reached after %d steps", step - 1)
            break
        event, node = rng.choice(moves)
        if event in model.observable_events:
            succ = d_graph.successors_of(d_node, event)
            if not succ:
                raise InvalidTrace(
                    f"step {step}: the diagnoser has no move for {event!r}"
                )
            d_node = succ[0]
        emit_row(step, event)

    widths = [
        max(len(header[i]), max((len(r[i]) for r in rows), default=0))
        for i in range(len(header))
    ]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    print(line.rstrip())
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    if args.report is not None:
        with args.report.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        log.info("timeline written to %s", args.report)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdikit",
        description="Synthesize and verify fault diagnosers for finite"
        " partially observable transition systems.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("model", type=Path, help="plant model (.fml)")
        p.add_argument("specs", type=Path, help="alarm specifications (.aslk)")
        p.add_argument("--cap-states", type=int, default=DEFAULT_STATE_CAP)
        p.add_argument("--cap-beliefs", type=int, default=DEFAULT_BELIEF_CAP)
        p.add_argument("--report", type=Path, help="write a JSON report here")

    p = sub.add_parser("synth", help="synthesize a diagnoser")
    common(p)
    p.add_argument("-o", "--out", type=Path, help="diagnoser output (default stdout)")
    p.add_argument("--dot", type=Path, help="write a DOT rendering here")
    p.add_argument("--verify", action="store_true", help="verify the result")
    p.set_defaults(handler=run_synth)

    p = sub.add_parser("verify", help="verify a diagnoser against its obligations")
    common(p)
    p.add_argument("--diagnoser", type=Path, help="diagnoser to check"
                   " (default: synthesize one)")
    p.set_defaults(handler=run_verify)

    p = sub.add_parser("diagnosability", help="analyse diagnosability per alarm")
    common(p)
    p.set_defaults(handler=run_diagnosability)

    p = sub.add_parser("validate", help="check alarm possibility and relationships")
    common(p)
    p.add_argument("--diagnoser", type=Path)
    p.add_argument("--assume", help="state predicate assumed invariant")
    p.add_argument("--subsumes", type=_parse_pair, action="append", metavar="A,B",
                   help="check that wherever A fires, B fires")
    p.add_argument("--mutex", type=_parse_pair, action="append", metavar="A,B",
                   help="check that A and B never fire together")
    p.set_defaults(handler=run_validate)

    p = sub.add_parser("simulate", help="run the plant and diagnoser in lockstep")
    common(p)
    p.add_argument("--diagnoser", type=Path)
    p.add_argument("--steps", type=int, default=10, help="number of random steps")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument(
        "--trace", type=Path,
        help="replay the events listed in this file instead of random steps",
    )
    p.set_defaults(handler=run_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (
        ParseError,
        SpecError,
        KernelError,
        SynthError,
        VerifyError,
        InvalidTrace,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
