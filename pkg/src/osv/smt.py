"""SMT encoding and solver process driving.

Quantifier-free normal-form facts are encoded over uninterpreted
functions, integers, and bit-vectors: each generalized atomic term's path
name becomes a constant (no indices) or an uninterpreted function from
the index types to the result type.  Default values become uninterpreted
constants, one per primitive type, with no axioms attached.

The solver is an external process speaking SMT-LIB 2 on stdin/stdout
(`z3 -in` or the bundled WebAssembly build).  Commands are written one
per line; replies are framed by echoing a nonce.
"""

from __future__ import annotations

import os
import queue
import shlex
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .atoms import decompose_atomic
from .errors import SolverError
from .printer import print_term
from .terms import (
    Binop,
    BoolConst,
    Convert,
    Default,
    IfThenElse,
    IntConst,
    Quant,
    Term,
    Unop,
)
from .types import (
    BOOL,
    INT,
    BitVecType,
    BoolType,
    IntType,
    TypeExpr,
    TypeVar,
)
from .normalize import NormalGoal


def sort_of(ty: TypeExpr, table: "EncodingTable") -> str:
    if isinstance(ty, BoolType):
        return "Bool"
    if isinstance(ty, IntType):
        return "Int"
    if isinstance(ty, BitVecType):
        return f"(_ BitVec {ty.width})"
    if isinstance(ty, TypeVar):
        table.need_sort(ty.name)
        return f"tv!{ty.name}"
    raise SolverError(f"no SMT sort for type {ty}")


def _sanitize(name: str) -> str:
    assert "!" not in name
    return name.replace(".", "!")


def default_symbol_name(ty: TypeExpr) -> str:
    if isinstance(ty, BoolType):
        return "default.bool"
    if isinstance(ty, IntType):
        return "default.int"
    if isinstance(ty, BitVecType):
        return f"default.bv{ty.width}{'s' if ty.signed else 'u'}"
    if isinstance(ty, TypeVar):
        return f"default.{ty.name}"
    raise SolverError(f"no default constant for type {ty}")


class EncodingTable:
    """Maps atom path names to declared SMT symbols; declarations are kept
    in first-use order so identical goals produce identical scripts."""

    def __init__(self) -> None:
        self.symbols: dict[str, tuple[str, tuple[str, ...], str]] = {}
        self.decls: list[str] = []
        self._declared_sorts: dict[str, int] = {}

    def snapshot(self) -> tuple[int, int]:
        return (len(self.decls), len(self.symbols))

    def rollback(self, snap: tuple[int, int]) -> list[str]:
        ndecls, nsyms = snap
        dropped = self.decls[ndecls:]
        del self.decls[ndecls:]
        while len(self.symbols) > nsyms:
            self.symbols.popitem()
        self._declared_sorts = {
            k: v for k, v in self._declared_sorts.items() if v < ndecls
        }
        return dropped

    def need_sort(self, name: str) -> None:
        if name not in self._declared_sorts:
            self._declared_sorts[name] = len(self.decls)
            self.decls.append(f"(declare-sort tv!{name} 0)")

    def symbol(self, name: str, arg_sorts: tuple[str, ...], res_sort: str) -> str:
        entry = self.symbols.get(name)
        sym = _sanitize(name)
        if entry is None:
            self.symbols[name] = (sym, arg_sorts, res_sort)
            if arg_sorts:
                self.decls.append(f"(declare-fun {sym} ({' '.join(arg_sorts)}) {res_sort})")
            else:
                self.decls.append(f"(declare-const {sym} {res_sort})")
            return sym
        if entry[1] != arg_sorts or entry[2] != res_sort:
            raise SolverError(f"conflicting sorts for atom `{name}`")
        return entry[0]

    def default_const(self, ty: TypeExpr) -> str:
        name = default_symbol_name(ty)
        return self.symbol(name, (), sort_of(ty, self))


_CMP_SIGNED = {"<": "bvslt", "<=": "bvsle", ">": "bvsgt", ">=": "bvsge"}
_CMP_UNSIGNED = {"<": "bvult", "<=": "bvule", ">": "bvugt", ">=": "bvuge"}
_CMP_INT = {"<": "<", "<=": "<=", ">": ">", ">=": ">="}
_ARITH_BV = {"+": "bvadd", "-": "bvsub", "*": "bvmul", "|": "bvor", "&": "bvand", "<<": "bvshl"}


def encode_term(t: Term, table: EncodingTable) -> str:
    """Encode a quantifier-free normal-form term as an SMT-LIB expression."""
    d = decompose_atomic(t)
    if d is not None:
        arg_sorts = tuple(sort_of(i.ty, table) for i in d.idx)
        sym = table.symbol(d.name, arg_sorts, sort_of(t.ty, table))
        if not d.idx:
            return sym
        args = " ".join(encode_term(i, table) for i in d.idx)
        return f"({sym} {args})"
    if isinstance(t, BoolConst):
        return "true" if t.value else "false"
    if isinstance(t, IntConst):
        if isinstance(t.ty, BitVecType):
            return f"(_ bv{t.value % (1 << t.ty.width)} {t.ty.width})"
        if t.value < 0:
            return f"(- {-t.value})"
        return str(t.value)
    if isinstance(t, Default):
        return table.default_const(t.of)
    if isinstance(t, Unop):
        arg = encode_term(t.arg, table)
        if t.op == "!":
            return f"(not {arg})"
        if isinstance(t.ty, BitVecType):
            return f"(bvneg {arg})"
        return f"(- {arg})"
    if isinstance(t, Binop):
        l = encode_term(t.left, table)
        r = encode_term(t.right, table)
        op = t.op
        if op == "&&":
            return f"(and {l} {r})"
        if op == "||":
            return f"(or {l} {r})"
        if op == "->":
            return f"(=> {l} {r})"
        if op == "==":
            return f"(= {l} {r})"
        if op == "!=":
            return f"(not (= {l} {r}))"
        lty = t.left.ty
        if op in _CMP_INT:
            if isinstance(lty, BitVecType):
                table_ = _CMP_SIGNED if lty.signed else _CMP_UNSIGNED
                return f"({table_[op]} {l} {r})"
            return f"({_CMP_INT[op]} {l} {r})"
        if isinstance(lty, BitVecType):
            if op == ">>":
                return f"({'bvashr' if lty.signed else 'bvlshr'} {l} {r})"
            if op in _ARITH_BV:
                return f"({_ARITH_BV[op]} {l} {r})"
        else:
            if op in ("+", "-", "*"):
                return f"({op} {l} {r})"
        raise SolverError(f"cannot encode operator `{op}` at {lty}")
    if isinstance(t, Convert):
        src = t.arg.ty
        arg = encode_term(t.arg, table)
        if isinstance(src, BitVecType):
            as_int = f"(bv2nat {arg})"
            if src.signed:
                zero = f"(_ bv0 {src.width})"
                as_int = (
                    f"(ite (bvslt {arg} {zero}) (- {as_int} {1 << src.width}) {as_int})"
                )
        else:
            as_int = arg
        if isinstance(t.ty, IntType):
            return as_int
        assert isinstance(t.ty, BitVecType)
        return f"((_ int2bv {t.ty.width}) {as_int})"
    if isinstance(t, IfThenElse):
        c = encode_term(t.cond, table)
        a = encode_term(t.then, table)
        b = encode_term(t.els, table)
        return f"(ite {c} {a} {b})"
    if isinstance(t, Quant):
        raise SolverError(
            f"quantifier reached the SMT encoder: `{print_term(t)[:120]}`"
        )
    raise SolverError(
        f"unsupported construct reached the SMT encoder: `{print_term(t)[:120]}`"
    )


def length_nonneg_facts(terms: list[Term]) -> list[Term]:
    """`atom >= 0` for every sequence-length atom occurring in `terms`.

    Sequence lengths are non-negative in the language semantics; the
    uninterpreted encoding needs this stated explicitly, once per ground
    length application.
    """
    from .terms import walk

    out: list[Term] = []
    seen: set[Term] = set()
    for t in terms:
        for s in walk(t):
            d = decompose_atomic(s)
            if d is None or not d.name.endswith(".length"):
                continue
            if s in seen:
                continue
            seen.add(s)
            out.append(Binop(">=", s, IntConst(0, ty=INT), ty=BOOL))
    return out


def encode_goal(ng: NormalGoal) -> str:
    """Script asserting the refutation set (assumptions and negated
    conclusion are already folded together in a NormalGoal)."""
    table = EncodingTable()
    asserts = []
    facts = [f.term for f in ng.qf_facts]
    for t in facts + length_nonneg_facts(facts):
        asserts.append(f"(assert {encode_term(t, table)})")
    lines = table.decls + asserts + ["(check-sat)"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver processes


@dataclass
class SolverVerdict:
    status: str  # "unsat" | "sat" | "unknown" | "timeout"
    model: str = ""
    time_s: float = 0.0

    @property
    def proved(self) -> bool:
        return self.status == "unsat"


def bundled_solver() -> list[str] | None:
    root = Path(__file__).resolve().parent.parent.parent
    script = root / "solver" / "osv-z3"
    if script.exists() and (root / "solver" / "node_modules").exists():
        return [str(script)]
    return None


def default_solver() -> list[str]:
    """Solver argv: $OSV_SOLVER, else `z3 -in`, else the bundled build."""
    env = os.environ.get("OSV_SOLVER")
    if env:
        return shlex.split(env)
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    bundled = bundled_solver()
    if bundled:
        return bundled
    raise SolverError(
        "no SMT solver found: set OSV_SOLVER, install z3, or run "
        "`npm install` under solver/"
    )


class SolverProcess:
    """A long-lived SMT-LIB process with nonce-framed request/reply."""

    def __init__(self, argv: list[str] | None = None):
        self.argv = argv or default_solver()
        self._proc: subprocess.Popen | None = None
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._nonce = 0
        self.start()

    def start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {self.argv}: {e}")
        self._queue = queue.Queue()

        def reader(proc: subprocess.Popen, q: queue.Queue) -> None:
            assert proc.stdout is not None
            for line in proc.stdout:
                q.put(line.rstrip("\n"))
            q.put(None)

        threading.Thread(
            target=reader, args=(self._proc, self._queue), daemon=True
        ).start()

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    def kill(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except Exception:
                pass
        self._proc = None

    def eval(self, text: str, timeout_s: float = 60.0) -> str:
        """Send commands (one per line) and collect output until the nonce."""
        if not self.alive:
            raise SolverError("solver process is not running")
        self._nonce += 1
        marker = f"@osv{self._nonce}"
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(text)
            if not text.endswith("\n"):
                self._proc.stdin.write("\n")
            self._proc.stdin.write(f'(echo "{marker}")\n')
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            self.kill()
            raise SolverError(f"solver process died: {e}")
        out: list[str] = []
        deadline = time.monotonic() + timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.kill()
                raise TimeoutError(f"solver did not answer within {timeout_s}s")
            try:
                line = self._queue.get(timeout=remaining)
            except queue.Empty:
                continue
            if line is None:
                self.kill()
                raise SolverError("solver process closed its output")
            if line == marker:
                return "\n".join(out)
            out.append(line)


def run_solver(
    script: str,
    timeout_s: float = 60.0,
    solver: list[str] | None = None,
    get_model: bool = True,
) -> SolverVerdict:
    """Run a one-shot script in a fresh solver process."""
    start = time.monotonic()
    proc = SolverProcess(solver)
    try:
        opts = f"(set-option :timeout {int(timeout_s * 1000)})\n"
        try:
            out = proc.eval(opts + script, timeout_s=timeout_s + 10.0)
        except TimeoutError:
            return SolverVerdict("timeout", time_s=time.monotonic() - start)
        status = None
        for line in out.splitlines():
            line = line.strip()
            if line in ("sat", "unsat", "unknown"):
                status = line
            elif line.startswith("(error"):
                raise SolverError(f"solver error: {line}")
        if status is None:
            raise SolverError(f"malformed solver reply: {out[:400]!r}")
        model = ""
        if status == "sat" and get_model:
            try:
                model = proc.eval("(get-model)", timeout_s=30.0)
            except (TimeoutError, SolverError):
                model = ""
        return SolverVerdict(status, model=model, time_s=time.monotonic() - start)
    finally:
        proc.kill()


def run_script_in_session(proc: SolverProcess, script: str, timeout_s: float = 30.0) -> str:
    """Run a self-contained script inside push/pop on a shared process.

    Amortizes process startup over many small goals (batch testing); the
    script's declarations and assertions are discarded by the pop.
    """
    out = proc.eval("(push 1)\n" + script + "\n(pop 1)", timeout_s=timeout_s)
    status = "unknown"
    for line in out.splitlines():
        line = line.strip()
        if line in ("sat", "unsat", "unknown"):
            status = line
        elif line.startswith("(error"):
            raise SolverError(f"solver error: {line}")
    return status


class ConsistencyOracle:
    """Persistent solver session answering many small consistency checks.

    A base scope holds the current quantifier-free facts; each check
    pushes a scope, asserts the candidate conditions, and pops.  Symbols
    are declared in the scope that first needs them and the encoding
    table is rolled back on pop.
    """

    def __init__(self, solver: list[str] | None = None, timeout_ms: int = 2000):
        self.argv = solver
        self.timeout_ms = timeout_ms
        self.proc: SolverProcess | None = None
        self.table = EncodingTable()
        self._base_facts: list[Term] = []
        self.checks = 0

    def _ensure(self) -> None:
        if self.proc is None or not self.proc.alive:
            self.proc = SolverProcess(self.argv)
            self.proc.eval(f"(set-option :timeout {self.timeout_ms})", timeout_s=30.0)
            self.table = EncodingTable()
            self._assert_base()

    def set_base(self, facts: list[Term]) -> None:
        self._base_facts = list(facts)
        if self.proc is not None and self.proc.alive:
            self.proc.eval("(reset)", timeout_s=30.0)
            self.proc.eval(f"(set-option :timeout {self.timeout_ms})", timeout_s=30.0)
            self.table = EncodingTable()
            self._assert_base()
        else:
            self._ensure()

    def _assert_base(self) -> None:
        assert self.proc is not None
        lines = []
        snap = self.table.snapshot()
        facts = self._base_facts + length_nonneg_facts(self._base_facts)
        body = [f"(assert {encode_term(f, self.table)})" for f in facts]
        lines.extend(self.table.decls[snap[0]:])
        lines.extend(body)
        if lines:
            self.proc.eval("\n".join(lines), timeout_s=60.0)

    def check(self, conditions: list[Term]) -> str:
        """'unsat' if conditions contradict the base facts, else 'sat'/'unknown'."""
        if not conditions:
            return "sat"
        self._ensure()
        assert self.proc is not None
        self.checks += 1
        snap = self.table.snapshot()
        try:
            payload = conditions + length_nonneg_facts(conditions)
            body = [f"(assert {encode_term(c, self.table)})" for c in payload]
            new_decls = self.table.decls[snap[0]:]
            script = "\n".join(["(push 1)"] + new_decls + body + ["(check-sat)", "(pop 1)"])
            out = self.proc.eval(script, timeout_s=self.timeout_ms / 1000.0 + 10.0)
        except (TimeoutError, SolverError):
            self.table.rollback(snap)
            if self.proc is not None:
                self.proc.kill()
            self.proc = None
            return "unknown"
        self.table.rollback(snap)
        for line in out.splitlines():
            line = line.strip()
            if line in ("sat", "unsat", "unknown"):
                return line
        return "unknown"

    def close(self) -> None:
        if self.proc is not None:
            self.proc.kill()
            self.proc = None


def check_consistency(
    conditions: list[Term],
    qf_facts: list[Term],
    timeout_ms: int = 2000,
    solver: list[str] | None = None,
) -> str:
    """One-shot consistency check: 'unsat' (inconsistent), 'sat', or 'unknown'.

    Unknown answers are treated as consistent by callers.
    """
    oracle = ConsistencyOracle(solver, timeout_ms)
    try:
        oracle.set_base(qf_facts)
        return oracle.check(conditions)
    finally:
        oracle.close()
