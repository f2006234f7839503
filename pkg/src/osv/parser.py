"""Parser for `.osv` specification files.

Hand-written lexer and recursive-descent parser.  C-like tokens: `&&`,
`||`, `!` for logic, `==`/`!=` for comparison, `->` for implication
(lowest precedence).  Bitwise `|`/`&` bind tighter than comparisons so
that `x == a | b` reads as `x == (a | b)`.  Sequence length is written
`len(a)`; deep updates accept both `t{|path := v|}` and `t{path := v}`.
Comments are `//` and `/* */`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import Loc, ParseError
from .terms import (
    App,
    Default,
    FieldAccess,
    Assumption,
    BoolConst,
    FieldStep,
    FunctionDecl,
    Goal,
    IfThenElse,
    IndexStep,
    IntConst,
    KeysBound,
    Let,
    PatConst,
    PatCtor,
    PatStruct,
    PatVar,
    Pattern,
    Quant,
    RangeBound,
    SeqIndex,
    StructLiteral,
    StructUpdate,
    Switch,
    SwitchCase,
    Term,
    Unop,
    Var,
    Binop,
)
from .types import (
    EnumBranch,
    EnumDecl,
    FieldDecl,
    MapType,
    NamedType,
    PRIMITIVE_NAMES,
    SeqType,
    StructDecl,
    TypeExpr,
    TypedefDecl,
)

KEYWORDS = {
    "typedef", "struct", "enum", "function", "predicate", "query",
    "assumes", "shows", "type", "switch", "case", "default", "let", "in",
    "end", "forall", "exists", "if", "else", "true", "false", "keys",
}

_PUNCT = [
    "{|", "|}", "&&", "||", "->", "==", "!=", "<=", ">=", "<<", ">>", ":=",
    "..", "(", ")", "{", "}", "[", "]", "<", ">", "=", ",", ";", ":", ".",
    "+", "-", "*", "|", "&", "!", "~",
]


@dataclass
class Token:
    kind: str  # "ident", "int", "punct", "kw", "eof"
    value: str
    line: int
    col: int
    ival: int = 0


def tokenize(text: str, path: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg: str) -> ParseError:
        return ParseError(msg, Loc(path, line, col))

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i)
            if j < 0:
                raise err("unterminated block comment")
            for k in range(i, j + 2):
                if text[k] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            i = j + 2
            continue
        if c.isdigit():
            j = i
            base = 10
            if text.startswith("0x", i) or text.startswith("0X", i):
                j = i + 2
                base = 16
                while j < n and (text[j].isdigit() or text[j].lower() in "abcdef"):
                    j += 1
            else:
                while j < n and text[j].isdigit():
                    j += 1
            lit = text[i:j]
            toks.append(Token("int", lit, line, col, ival=int(lit, base)))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise err(f"unexpected character {c!r}")
    toks.append(Token("eof", "", line, col))
    return toks


@dataclass
class SourceFile:
    """A parsed specification file with per-declaration source spans."""

    path: str
    text: str
    decls: list = field(default_factory=list)
    spans: list[tuple[Loc, Loc]] = field(default_factory=list)


# Binding powers, lowest first.  `->` is right-associative.
_BINOPS = {
    "->": 10, "||": 20, "&&": 30,
    "==": 40, "!=": 40,
    "<": 50, "<=": 50, ">": 50, ">=": 50,
    "|": 60, "&": 70,
    "<<": 80, ">>": 80,
    "+": 90, "-": 90, "*": 100,
}
_RIGHT_ASSOC = {"->"}


class Parser:
    def __init__(self, text: str, path: str = "<input>"):
        self.path = path
        self.toks = tokenize(text, path)
        self.pos = 0

    # -- token helpers

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def loc(self) -> Loc:
        t = self.peek()
        return Loc(self.path, t.line, t.col)

    def err(self, msg: str) -> ParseError:
        return ParseError(msg, self.loc())

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, value: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind in ("punct", "kw") and t.value == value

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.next()
            return True
        return False

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.err(f"expected `{value}`, found `{self.peek().value or 'end of input'}`")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "ident":
            raise self.err(f"expected {what}, found `{t.value or 'end of input'}`")
        self.next()
        return t.value

    def close_angle(self) -> None:
        """Consume `>` in a type context, splitting a `>>` token if needed."""
        t = self.peek()
        if t.kind == "punct" and t.value == ">>":
            t.value = ">"
            t.col += 1
            return
        self.expect(">")

    # -- types

    def parse_type(self) -> TypeExpr:
        t = self.peek()
        if t.kind == "ident":
            name = self.expect_ident()
            if name in PRIMITIVE_NAMES:
                return PRIMITIVE_NAMES[name]
            if name == "Seq":
                self.expect("<")
                elem = self.parse_type()
                self.close_angle()
                return SeqType(elem)
            if name == "Map":
                self.expect("<")
                key = self.parse_type()
                self.expect(",")
                value = self.parse_type()
                self.close_angle()
                return MapType(key, value)
            return NamedType(name)
        raise self.err("expected a type")

    def at_type_start(self) -> bool:
        return self.peek().kind == "ident"

    # -- declarations

    def parse_file(self) -> SourceFile:
        src = SourceFile(self.path, "")
        names: set[str] = set()
        while self.peek().kind != "eof":
            start = self.loc()
            d = self.parse_decl()
            end = self.loc()
            key = f"{type(d).__name__}:{d.name}"
            if key in names:
                raise ParseError(f"duplicate declaration `{d.name}`", start)
            names.add(key)
            src.decls.append(d)
            src.spans.append((start, end))
        return src

    def parse_decl(self):
        loc = self.loc()
        if self.accept("typedef"):
            name = self.expect_ident("type name")
            self.expect("=")
            ty = self.parse_type()
            self.accept(";")
            return TypedefDecl(name, ty, loc)
        if self.accept("struct"):
            name = self.expect_ident("struct name")
            self.expect("{")
            fields: list[FieldDecl] = []
            while not self.accept("}"):
                fty = self.parse_type()
                fname = self.expect_ident("field name")
                self.expect(";")
                fields.append(FieldDecl(fname, fty))
            return StructDecl(name, tuple(fields), loc)
        if self.accept("enum"):
            name = self.expect_ident("enum name")
            self.expect("=")
            branches = [self.parse_enum_branch()]
            while self.accept("|"):
                branches.append(self.parse_enum_branch())
            self.accept(";")
            return EnumDecl(name, tuple(branches), loc)
        if self.at("function") or self.at("predicate"):
            is_pred = self.next().value == "predicate"
            name = self.expect_ident("function name")
            params = self.parse_params()
            if is_pred:
                ret: TypeExpr = PRIMITIVE_NAMES["bool"]
            else:
                self.expect("->")
                ret = self.parse_type()
            self.expect("{")
            body = self.parse_expr()
            self.accept(";")
            self.expect("}")
            return FunctionDecl(name, params, ret, body, loc)
        if self.at("query"):
            return self.parse_query_decl()
        raise self.err(f"expected a declaration, found `{self.peek().value}`")

    def parse_enum_branch(self) -> EnumBranch:
        name = self.expect_ident("constructor name")
        params: list[FieldDecl] = []
        if self.accept("("):
            while not self.accept(")"):
                pty = self.parse_type()
                pname = self.expect_ident("parameter name")
                params.append(FieldDecl(pname, pty))
                if not self.at(")"):
                    self.expect(",")
        return EnumBranch(name, tuple(params))

    def parse_params(self) -> tuple[tuple[str, TypeExpr], ...]:
        self.expect("(")
        params: list[tuple[str, TypeExpr]] = []
        while not self.accept(")"):
            pty = self.parse_type()
            pname = self.expect_ident("parameter name")
            params.append((pname, pty))
            if not self.at(")"):
                self.expect(",")
        return tuple(params)

    def parse_query_decl(self) -> Goal:
        loc = self.loc()
        self.expect("query")
        name = self.expect_ident("query name")
        self.expect("{")
        type_vars: list[str] = []
        variables: list[tuple[str, TypeExpr]] = []
        assumptions: list[Assumption] = []
        labels: set[str] = set()
        conclusion: Term | None = None
        while not self.accept("}"):
            if self.accept("type"):
                type_vars.append(self.expect_ident("type variable"))
                while self.accept(","):
                    type_vars.append(self.expect_ident("type variable"))
                self.expect(";")
            elif self.accept("assumes"):
                label = None
                if self.peek().kind == "ident" and self.at(":", 1):
                    label = self.expect_ident()
                    self.expect(":")
                    if label in labels:
                        raise ParseError(f"duplicate assumption label `{label}`", loc)
                    labels.add(label)
                assumptions.append(Assumption(label, self.parse_expr()))
                self.expect(";")
            elif self.accept("shows"):
                conclusion = self.parse_expr()
                self.accept(";")
            elif self.at_type_start():
                vty = self.parse_type()
                vname = self.expect_ident("variable name")
                variables.append((vname, vty))
                self.expect(";")
            else:
                raise self.err("expected a declaration, `assumes`, or `shows`")
        if conclusion is None:
            raise ParseError(f"query `{name}` has no `shows` clause", loc)
        return Goal(name, tuple(type_vars), tuple(variables), tuple(assumptions), conclusion, loc)

    # -- expressions

    def parse_expr(self, min_bp: int = 0) -> Term:
        lhs = self.parse_unary()
        while True:
            t = self.peek()
            if t.kind != "punct" or t.value not in _BINOPS:
                break
            bp = _BINOPS[t.value]
            if bp < min_bp:
                break
            op = self.next().value
            rhs = self.parse_expr(bp if op in _RIGHT_ASSOC else bp + 1)
            lhs = Binop(op, lhs, rhs)
        return lhs

    def parse_unary(self) -> Term:
        if self.accept("!"):
            return Unop("!", self.parse_unary())
        if self.accept("-"):
            arg = self.parse_unary()
            if isinstance(arg, IntConst) and arg.ty is None:
                return IntConst(-arg.value)
            return Unop("-", arg)
        return self.parse_postfix()

    def parse_postfix(self) -> Term:
        term = self.parse_primary()
        while True:
            if self.accept("["):
                idx = self.parse_expr()
                self.expect("]")
                # Indexing parses as SeqIndex; the type checker rewrites
                # map reads to MapGet.
                term = SeqIndex(term, idx)
            elif self.at(".") and self.peek(1).kind == "ident":
                self.next()
                fld = self.next().value
                term = FieldAccess(term, fld)
            elif self.at("{|"):
                term = self.parse_deep_update(term, "{|", "|}")
            elif self.at("{") and self.looks_like_update():
                term = self.parse_deep_update(term, "{", "}")
            elif self.at("{") and isinstance(term, Var) and self.looks_like_literal():
                term = self.parse_struct_literal(term.name)
            else:
                return term

    def looks_like_update(self) -> bool:
        # `{ ident (:=|.|[) ...` distinguishes updates from struct literals.
        if not (self.peek(1).kind == "ident"):
            return False
        return self.peek(2).kind == "punct" and self.peek(2).value in (":=", ".", "[")

    def looks_like_literal(self) -> bool:
        if self.at("}", 1):  # empty literal
            return True
        return self.peek(1).kind == "ident" and self.at(":", 2)

    def parse_struct_literal(self, name: str) -> Term:
        self.expect("{")
        assigns: list[tuple[str, Term]] = []
        while not self.accept("}"):
            fname = self.expect_ident("field name")
            self.expect(":")
            assigns.append((fname, self.parse_expr()))
            if not self.at("}"):
                self.expect(",")
        return StructLiteral(name, tuple(assigns))

    def parse_deep_update(self, base: Term, open_tok: str, close_tok: str) -> Term:
        self.expect(open_tok)
        term = base
        while True:
            path: list = [FieldStep(self.expect_ident("field name"))]
            while True:
                if self.at(".") and self.peek(1).kind == "ident":
                    self.next()
                    path.append(FieldStep(self.next().value))
                elif self.accept("["):
                    path.append(IndexStep(self.parse_expr()))
                    self.expect("]")
                else:
                    break
            self.expect(":=")
            value = self.parse_expr()
            term = StructUpdate(term, tuple(path), value)
            if not self.accept(","):
                break
        self.expect(close_tok)
        return term

    def parse_primary(self) -> Term:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return IntConst(t.ival)
        if self.accept("true"):
            return BoolConst(True)
        if self.accept("false"):
            return BoolConst(False)
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        if self.at("if"):
            return self.parse_if()
        if self.at("switch"):
            return self.parse_switch()
        if self.accept("let"):
            var = self.expect_ident("let variable")
            self.expect("=")
            rhs = self.parse_expr()
            self.expect("in")
            body = self.parse_expr()
            self.expect("end")
            return Let(var, rhs, body)
        if self.at("forall") or self.at("exists"):
            return self.parse_quant()
        if self.at("default") and self.at("(", 1):
            self.next()
            self.expect("(")
            ty = self.parse_type()
            self.expect(")")
            return Default(ty)
        if t.kind == "ident":
            name = self.expect_ident()
            if self.accept("("):
                args: list[Term] = []
                while not self.accept(")"):
                    args.append(self.parse_expr())
                    if not self.at(")"):
                        self.expect(",")
                return App(name, tuple(args))
            return Var(name)
        raise self.err(f"expected an expression, found `{t.value or 'end of input'}`")

    def parse_if(self) -> Term:
        self.expect("if")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        self.expect("{")
        then = self.parse_expr()
        self.accept(";")
        self.expect("}")
        self.expect("else")
        if self.at("if"):
            els = self.parse_if()
        else:
            self.expect("{")
            els = self.parse_expr()
            self.accept(";")
            self.expect("}")
        return IfThenElse(cond, then, els)

    def parse_switch(self) -> Term:
        self.expect("switch")
        self.expect("(")
        scrut = self.parse_expr()
        self.expect(")")
        self.expect("{")
        cases: list[SwitchCase] = []
        default: Term | None = None
        while not self.accept("}"):
            if self.accept("default"):
                self.expect(":")
                default = self.parse_expr()
                self.expect(";")
            else:
                self.expect("case")
                pat = self.parse_pattern()
                self.expect(":")
                body = self.parse_expr()
                self.expect(";")
                if default is not None:
                    raise self.err("`default` must be the last switch arm")
                cases.append(SwitchCase(pat, body))
        return Switch(scrut, tuple(cases), default)

    def parse_pattern(self) -> Pattern:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return PatConst(IntConst(t.ival))
        if self.accept("-"):
            tt = self.peek()
            if tt.kind != "int":
                raise self.err("expected an integer literal in pattern")
            self.next()
            return PatConst(IntConst(-tt.ival))
        if self.accept("true"):
            return PatConst(BoolConst(True))
        if self.accept("false"):
            return PatConst(BoolConst(False))
        if t.kind == "ident":
            name = self.expect_ident()
            if self.accept("("):
                args: list[Pattern] = []
                while not self.accept(")"):
                    args.append(self.parse_pattern())
                    if not self.at(")"):
                        self.expect(",")
                return PatCtor(name, tuple(args))
            if self.accept("{"):
                assigns: list[tuple[str, Pattern]] = []
                while not self.accept("}"):
                    fname = self.expect_ident("field name")
                    self.expect(":")
                    assigns.append((fname, self.parse_pattern()))
                    if not self.at("}"):
                        self.expect(",")
                return PatStruct(name, tuple(assigns))
            return PatVar(name)
        raise self.err("expected a pattern")

    def parse_quant(self) -> Term:
        kind = self.next().value
        self.expect("(")
        binders: list[tuple[str, TypeExpr, object]] = []
        while True:
            vty = self.parse_type()
            vname = self.expect_ident("bound variable")
            bound = None
            if self.accept("in"):
                if self.at("keys") and self.at("(", 1):
                    self.next()
                    self.expect("(")
                    m = self.parse_expr()
                    self.expect(")")
                    bound = KeysBound(m)
                else:
                    lo = self.parse_expr()
                    self.expect("..")
                    hi = self.parse_expr()
                    bound = RangeBound(lo, hi)
            binders.append((vname, vty, bound))
            if not self.accept(","):
                break
        self.expect(")")
        self.expect("{")
        body = self.parse_expr()
        self.accept(";")
        self.expect("}")
        for vname, vty, bound in reversed(binders):
            body = Quant(kind, vname, vty, bound, body)
        return body


def parse(text: str, path: str = "<input>") -> list:
    """Parse a specification file into a list of declarations."""
    return Parser(text, path).parse_file().decls


def parse_source(text: str, path: str = "<input>") -> SourceFile:
    src = Parser(text, path).parse_file()
    src.text = text
    return src


def parse_query(text: str, path: str = "<input>") -> Goal:
    """Parse the text of a single `query` block."""
    decls = parse(text, path)
    goals = [d for d in decls if isinstance(d, Goal)]
    if len(goals) != 1 or len(decls) != 1:
        raise ParseError("expected exactly one query declaration", Loc(path, 1, 1))
    return goals[0]


def parse_expr(text: str, path: str = "<expr>") -> Term:
    """Parse a single expression (test and tooling helper)."""
    p = Parser(text, path)
    e = p.parse_expr()
    if p.peek().kind != "eof":
        raise p.err("trailing input after expression")
    return e
