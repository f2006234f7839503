#!/usr/bin/env python3
"""Parsing a specification file and inspecting what came out.

The surface language has typedefs, structures, enumerations, functions,
predicates, and queries.  This demo parses the miniature task-management
model from the corpus, resolves its types, and pokes at a few terms.
"""

from pathlib import Path

from osv.atoms import atom_type, decompose_atomic
from osv.parser import parse, parse_expr
from osv.printer import print_goal, print_term
from osv.terms import Goal
from osv.typecheck import TypeChecker, check_functions
from osv.types import BitVecType, NamedType, resolve_types

corpus = Path(__file__).resolve().parent.parent / "corpus"
text = (corpus / "tcb.osv").read_text()

# Parse: one list of declarations, in file order.
decls = parse(text, "tcb.osv")
print(f"{len(decls)} declarations")
for d in decls[:6]:
    print(" ", type(d).__name__, getattr(d, "name", "?"))

# Resolve types: aliases disappear, constructors get branch numbers,
# recursive definitions would be rejected here.
symbols = resolve_types(decls)
check_functions(symbols, decls)
print("\ntypedef address ->", symbols.typedefs["address"])
print("constructor Vptr -> enum", symbols.constructors["Vptr"])

# Queries are goals: declared variables, labeled assumptions, a conclusion.
queries = [d for d in decls if isinstance(d, Goal)]
print(f"\n{len(queries)} queries; the first one:")
print(print_goal(queries[0]))

# Checked terms carry their types, and any term built from a variable by
# field accesses and index/length/get/indom decomposes into a path name
# plus index list -- the unit every later pipeline stage works on.
tc = TypeChecker(symbols)
env = {"g": NamedType("Global"), "p": BitVecType(8, False)}
term = tc.check(parse_expr("g.tcbMap[p].OSTCBPrio"), env)
atom = decompose_atomic(term)
print("\nterm        :", print_term(term), ":", term.ty)
print("decomposes  :", atom.name, "/", [print_term(i) for i in atom.idx])
result, idx_types = atom_type(atom.name, symbols, env)
print("path typing :", result, "with index slots", [str(t) for t in idx_types])
