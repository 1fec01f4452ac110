"""Recursive descent parser for the scenario language.

Grammar (canonical form; ``#`` comments, statements end with ``;`` except
brace-delimited blocks):

    scenario  := { stmt }
    stmt      := typedecl | policydecl | spacedecl | vardecl | assign
               | alloc | devalloc | cmd
    typedecl  := "type" ID "{" { ID ":" mtype ";" } "}"
    mtype     := ("int"|"real") [ "[" expr "]" ]          # scalar / inline array
               | ID                                        # nested record
               | "ptr" ("int"|"real") "[" expr "]"         # shaped pointer
               | "ptr" ("int"|"real") "@" ID               # alias pointer
               | "ptr" ID                                  # pointer to record
    policydecl:= "policy" ID "::" pname "{" { pclause ";" } "}"
    pclause   := ("include"|"exclude"|"in"|"out"|"inout"|"create"|"nocreate")
                 "(" ID { "," ID } ")"
    pname     := ID | "default" | "*"
    spacedecl := "space" ID ":" trait "capacity" INT ";"
    trait     := "default" | "large_capacity" | "low_latency"
               | "high_bandwidth" | "unified_shared" | "team_local" "(" INT ")"
    vardecl   := "var" ID ":" ID [ "in" ID ] ";"
    assign    := path "=" (literal | path [("+"|"-") INT]) ";"
    alloc     := "alloc" path ";"
    devalloc  := "devalloc" ID "=" "alloc" "(" ID "," INT ")" ";"
    cmd       := "enter_data" emotion "(" path ")" [ "policy" "(" pname ")" ] ";"
               | "exit_data" xmotion "(" path ")" ";"
               | "update" ("host"|"device") "(" path ")" ";"
               | "attach" "(" path ")" ";" | "detach" "(" path ")" ";"
               | "map_external" "(" path "," (INT | ID) ")" ";"
               | "kernel" [ "team" INT ] "{" { access ";" } "}"
               | "reduce" "(" rop "," INT "," INT "," redspec ")" ";"
               | "nest" nesttree ";"
               | "loop" "{" { looplevel } "body" "{" { loopaccess } "}" "}" ";"
               | "assert_present" "(" path ")" ";"
               | "assert_absent" "(" path ")" ";"
               | "assert_value" "(" path "," literal ")" ";"
    emotion   := "copyin" | "copy" | "create" | "nocreate"
    xmotion   := "copyout" | "delete" | "release"
    access    := ("reads"|"writes") "(" path [ "," literal ] ")"
    rop       := "sum" | "product" | "max" | "min"
    redspec   := [ "det" ] ( veclit | "dim" INT matlit )
    veclit    := "[" [ literal { "," literal } ] "]"
    matlit    := "[" veclit { "," veclit } "]"
    nesttree  := NESTKIND [ "{" { nesttree } "}" ]
    looplevel := ("gang"|"vector"|"seq") "(" ID "," INT ")"
                 [ "private" "(" ID {"," ID} ")" ] [ "reduction" "(" ID {"," ID} ")" ] ";"
    loopaccess:= ("reads"|"writes") "(" ID [ "[" ID {"," ID} "]" ] ")" ";"
    path      := ID { "." ID | "[" INT "]" }
    expr      := standard integer arithmetic over INT, sibling member names,
                 "+", "-", "*", "/", parentheses
"""

from __future__ import annotations

from . import ast_nodes as A
from .errors import DuplicateName, ScenarioParseError
from .lexer import EOF, ID, INT, REAL, Token, tokenize

ENTER_MOTIONS = ("copyin", "copy", "create", "nocreate")
EXIT_MOTIONS = ("copyout", "delete", "release")
CLAUSE_KINDS = ("include", "exclude", "in", "out", "inout", "create", "nocreate")
TRAITS = ("default", "large_capacity", "low_latency", "high_bandwidth",
          "team_local", "unified_shared")
REDUCE_OPS = ("sum", "product", "max", "min")
NEST_KINDS = ("omp_parallel_do", "omp_simd", "acc_parallel_loop",
              "acc_loop_vector", "acc_loop_plain", "plain_do")


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # --- token plumbing ---------------------------------------------

    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.cur()
        if tok.type != EOF:
            self.pos += 1
        return tok

    def error(self, expected: str, tok: Token | None = None) -> ScenarioParseError:
        tok = tok or self.cur()
        found = tok.value or "<eof>"
        return ScenarioParseError(
            f"expected {expected}, found {found!r}",
            tok.line, tok.column, expected=expected, found=found)

    def expect(self, toktype: str, what: str | None = None) -> Token:
        if self.cur().type != toktype:
            raise self.error(what or toktype)
        return self.advance()

    def expect_kw(self, *words: str) -> Token:
        tok = self.cur()
        if tok.type != ID or tok.value not in words:
            raise self.error(" or ".join(repr(w) for w in words))
        return self.advance()

    def at_kw(self, *words: str) -> bool:
        tok = self.cur()
        return tok.type == ID and tok.value in words

    def span(self, tok: Token) -> A.Span:
        return A.Span(tok.line, tok.column, tok.length)

    # --- entry points ------------------------------------------------

    def parse_scenario(self) -> A.Scenario:
        stmts: list[A.Statement] = []
        seen_types: set[str] = set()
        seen_policies: set[tuple[str, str]] = set()
        while self.cur().type != EOF:
            stmt = self.parse_statement()
            if isinstance(stmt, A.TypeDecl):
                if stmt.name in seen_types:
                    raise DuplicateName(f"type {stmt.name!r} declared twice",
                                        stmt.span.line, stmt.span.column)
                seen_types.add(stmt.name)
            elif isinstance(stmt, A.PolicyDecl):
                key = (stmt.type_name, stmt.name)
                if key in seen_policies:
                    raise DuplicateName(
                        f"policy {stmt.type_name}::{stmt.name} declared twice",
                        stmt.span.line, stmt.span.column)
                seen_policies.add(key)
            stmts.append(stmt)
        return A.Scenario(stmts)

    def parse_statement(self) -> A.Statement:
        tok = self.cur()
        if tok.type != ID:
            raise self.error("statement")
        word = tok.value
        if word == "type":
            return self.parse_typedecl()
        if word == "policy":
            return self.parse_policydecl()
        if word == "space":
            return self.parse_spacedecl()
        if word == "var":
            return self.parse_vardecl()
        if word == "alloc":
            return self.parse_alloc()
        if word == "devalloc":
            return self.parse_devalloc()
        if word == "enter_data":
            return self.parse_enter()
        if word == "exit_data":
            return self.parse_exit()
        if word == "update":
            return self.parse_update()
        if word in ("attach", "detach"):
            return self.parse_attach_detach()
        if word == "map_external":
            return self.parse_map_external()
        if word == "kernel":
            return self.parse_kernel()
        if word == "reduce":
            return self.parse_reduce()
        if word == "nest":
            return self.parse_nest()
        if word == "loop":
            return self.parse_loop()
        if word in ("assert_present", "assert_absent", "assert_value"):
            return self.parse_assert()
        return self.parse_assign()

    # --- declarations -------------------------------------------------

    def parse_typedecl(self) -> A.TypeDecl:
        start = self.expect_kw("type")
        name = self.expect(ID, "type name")
        self.expect("{")
        members: list[A.MemberDecl] = []
        names: set[str] = set()
        while self.cur().type != "}":
            mname = self.expect(ID, "member name")
            if mname.value in names:
                raise DuplicateName(
                    f"member {mname.value!r} declared twice in type {name.value!r}",
                    mname.line, mname.column)
            names.add(mname.value)
            self.expect(":")
            kind = self.parse_mtype()
            self.expect(";")
            members.append(A.MemberDecl(mname.value, kind, self.span(mname)))
        self.expect("}")
        return A.TypeDecl(name.value, members, self.span(start))

    def parse_mtype(self) -> A.MemberKindAst:
        tok = self.cur()
        if tok.type != ID:
            raise self.error("member type")
        if tok.value == "ptr":
            self.advance()
            elem = self.expect(ID, "pointee type")
            if elem.value in ("int", "real"):
                if self.cur().type == "[":
                    self.advance()
                    shape = self.parse_shape_expr()
                    self.expect("]")
                    return A.ShapedPtrK(elem.value, shape)
                if self.cur().type == "@":
                    self.advance()
                    sib = self.expect(ID, "sibling member name")
                    return A.AliasPtrK(elem.value, sib.value)
                raise self.error("'[' shape or '@' sibling after scalar pointee")
            return A.RecordPtrK(elem.value)
        self.advance()
        if tok.value in ("int", "real"):
            if self.cur().type == "[":
                self.advance()
                shape = self.parse_shape_expr()
                self.expect("]")
                return A.InlineArrayK(tok.value, shape)
            return A.ScalarK(tok.value)
        if self.cur().type == "[":
            raise self.error("scalar element type for inline array", tok)
        return A.RecordK(tok.value)

    def parse_policydecl(self) -> A.PolicyDecl:
        start = self.expect_kw("policy")
        tname = self.expect(ID, "type name")
        self.expect("::")
        if self.cur().type == "*":
            pname = self.advance().value
        else:
            pname = self.expect(ID, "policy name").value
        self.expect("{")
        clauses: list[A.ClauseAst] = []
        while self.cur().type != "}":
            ck = self.expect_kw(*CLAUSE_KINDS)
            self.expect("(")
            members = [self.expect(ID, "member name").value]
            while self.cur().type == ",":
                self.advance()
                members.append(self.expect(ID, "member name").value)
            self.expect(")")
            self.expect(";")
            clauses.append(A.ClauseAst(ck.value, members, self.span(ck)))
        self.expect("}")
        return A.PolicyDecl(tname.value, pname, clauses, self.span(start))

    def parse_spacedecl(self) -> A.SpaceDecl:
        start = self.expect_kw("space")
        name = self.expect(ID, "space name")
        self.expect(":")
        trait = self.expect_kw(*TRAITS)
        team = None
        if trait.value == "team_local":
            self.expect("(")
            team = int(self.expect(INT, "team id").value)
            self.expect(")")
        self.expect_kw("capacity")
        cap = int(self.expect(INT, "capacity in bytes").value)
        self.expect(";")
        return A.SpaceDecl(name.value, trait.value, cap, team, self.span(start))

    def parse_vardecl(self) -> A.VarDecl:
        start = self.expect_kw("var")
        name = self.expect(ID, "variable name")
        self.expect(":")
        tname = self.expect(ID, "type name")
        space = None
        if self.at_kw("in"):
            self.advance()
            space = self.expect(ID, "space name").value
        self.expect(";")
        return A.VarDecl(name.value, tname.value, space, self.span(start))

    # --- simple statements --------------------------------------------

    def parse_alloc(self) -> A.AllocStmt:
        start = self.expect_kw("alloc")
        path = self.parse_path()
        self.expect(";")
        return A.AllocStmt(path, self.span(start))

    def parse_devalloc(self) -> A.DevAlloc:
        start = self.expect_kw("devalloc")
        name = self.expect(ID, "handle name")
        self.expect("=")
        self.expect_kw("alloc")
        self.expect("(")
        space = self.expect(ID, "space name")
        self.expect(",")
        size = int(self.expect(INT, "size in bytes").value)
        self.expect(")")
        self.expect(";")
        return A.DevAlloc(name.value, space.value, size, self.span(start))

    def parse_assign(self) -> A.Assign:
        target = self.parse_path()
        start = self.cur()
        self.expect("=")
        if self.cur().type == ID:
            base = self.parse_path()
            offset = 0
            if self.cur().type in ("+", "-"):
                sign = -1 if self.advance().type == "-" else 1
                offset = sign * int(self.expect(INT, "byte offset").value)
            value: A.Literal | A.AddrExpr = A.AddrExpr(base, offset, self.span(start))
        else:
            value = self.parse_literal()
        self.expect(";")
        return A.Assign(target, value, target.span)

    # --- mapping commands ----------------------------------------------

    def parse_enter(self) -> A.EnterData:
        start = self.expect_kw("enter_data")
        motion = self.expect_kw(*ENTER_MOTIONS)
        self.expect("(")
        path = self.parse_path()
        self.expect(")")
        policy = None
        if self.at_kw("policy"):
            self.advance()
            self.expect("(")
            if self.cur().type == "*":
                policy = self.advance().value
            else:
                policy = self.expect(ID, "policy name").value
            self.expect(")")
        self.expect(";")
        return A.EnterData(motion.value, path, policy, self.span(start))

    def parse_exit(self) -> A.ExitData:
        start = self.expect_kw("exit_data")
        motion = self.expect_kw(*EXIT_MOTIONS)
        self.expect("(")
        path = self.parse_path()
        self.expect(")")
        self.expect(";")
        return A.ExitData(motion.value, path, self.span(start))

    def parse_update(self) -> A.UpdateCmd:
        start = self.expect_kw("update")
        direction = self.expect_kw("host", "device")
        self.expect("(")
        path = self.parse_path()
        self.expect(")")
        self.expect(";")
        return A.UpdateCmd(direction.value, path, self.span(start))

    def parse_attach_detach(self) -> A.Statement:
        start = self.expect_kw("attach", "detach")
        self.expect("(")
        path = self.parse_path()
        self.expect(")")
        self.expect(";")
        cls = A.AttachCmd if start.value == "attach" else A.DetachCmd
        return cls(path, self.span(start))

    def parse_map_external(self) -> A.MapExternal:
        start = self.expect_kw("map_external")
        self.expect("(")
        path = self.parse_path()
        self.expect(",")
        if self.cur().type == INT:
            target: int | str = int(self.advance().value)
        else:
            target = self.expect(ID, "devalloc handle or address").value
        self.expect(")")
        self.expect(";")
        return A.MapExternal(path, target, self.span(start))

    def parse_kernel(self) -> A.KernelBlock:
        start = self.expect_kw("kernel")
        team = 0
        if self.at_kw("team"):
            self.advance()
            team = int(self.expect(INT, "team id").value)
        self.expect("{")
        accesses: list[A.KernelAccess] = []
        while self.cur().type != "}":
            mode = self.expect_kw("reads", "writes")
            self.expect("(")
            path = self.parse_path()
            value = None
            if self.cur().type == ",":
                self.advance()
                value = self.parse_literal()
            self.expect(")")
            self.expect(";")
            accesses.append(A.KernelAccess(mode.value, path, value, self.span(mode)))
        self.expect("}")
        return A.KernelBlock(accesses, team, self.span(start))

    def parse_reduce(self) -> A.ReduceCommand:
        start = self.expect_kw("reduce")
        self.expect("(")
        op = self.expect_kw(*REDUCE_OPS)
        self.expect(",")
        gangs = int(self.expect(INT, "gang count").value)
        self.expect(",")
        vlen = int(self.expect(INT, "vector length").value)
        self.expect(",")
        deterministic = False
        if self.at_kw("det"):
            self.advance()
            deterministic = True
        dim = None
        if self.at_kw("dim"):
            self.advance()
            dim = int(self.expect(INT, "dimension index").value)
            values: list = self.parse_matrix_literal()
        else:
            values = self.parse_vector_literal()
        self.expect(")")
        self.expect(";")
        return A.ReduceCommand(op.value, gangs, vlen, deterministic, dim,
                               values, self.span(start))

    def parse_vector_literal(self) -> list[A.Literal]:
        self.expect("[")
        out: list[A.Literal] = []
        if self.cur().type != "]":
            out.append(self.parse_literal())
            while self.cur().type == ",":
                self.advance()
                out.append(self.parse_literal())
        self.expect("]")
        return out

    def parse_matrix_literal(self) -> list[list[A.Literal]]:
        self.expect("[")
        rows = [self.parse_vector_literal()]
        while self.cur().type == ",":
            self.advance()
            rows.append(self.parse_vector_literal())
        self.expect("]")
        return rows

    def parse_nest(self) -> A.NestCheckCmd:
        start = self.expect_kw("nest")
        root = self.parse_nest_node()
        self.expect(";")
        return A.NestCheckCmd(root, self.span(start))

    def parse_nest_node(self) -> A.NestNodeAst:
        kind = self.expect_kw(*NEST_KINDS)
        children: list[A.NestNodeAst] = []
        if self.cur().type == "{":
            self.advance()
            while self.cur().type != "}":
                children.append(self.parse_nest_node())
            self.expect("}")
        return A.NestNodeAst(kind.value, children, self.span(kind))

    def parse_loop(self) -> A.LoopCommand:
        start = self.expect_kw("loop")
        self.expect("{")
        levels: list[A.LoopLevelAst] = []
        while not self.at_kw("body"):
            kind = self.expect_kw("gang", "vector", "seq")
            self.expect("(")
            var = self.expect(ID, "loop variable")
            self.expect(",")
            extent = int(self.expect(INT, "loop extent").value)
            self.expect(")")
            private: list[str] = []
            reduction: list[str] = []
            while self.at_kw("private", "reduction"):
                which = self.advance().value
                self.expect("(")
                names = [self.expect(ID, "variable name").value]
                while self.cur().type == ",":
                    self.advance()
                    names.append(self.expect(ID, "variable name").value)
                self.expect(")")
                (private if which == "private" else reduction).extend(names)
            self.expect(";")
            levels.append(A.LoopLevelAst(kind.value, var.value, extent,
                                         private, reduction, self.span(kind)))
        self.expect_kw("body")
        self.expect("{")
        accesses: list[A.LoopAccessAst] = []
        while self.cur().type != "}":
            mode = self.expect_kw("reads", "writes")
            self.expect("(")
            var = self.expect(ID, "variable name")
            indices: list[str] = []
            if self.cur().type == "[":
                self.advance()
                indices.append(self.expect(ID, "index variable").value)
                while self.cur().type == ",":
                    self.advance()
                    indices.append(self.expect(ID, "index variable").value)
                self.expect("]")
            self.expect(")")
            self.expect(";")
            accesses.append(A.LoopAccessAst(mode.value, var.value, indices,
                                            self.span(mode)))
        self.expect("}")
        self.expect("}")
        self.expect(";")
        return A.LoopCommand(levels, accesses, self.span(start))

    def parse_assert(self) -> A.Statement:
        start = self.expect_kw("assert_present", "assert_absent", "assert_value")
        self.expect("(")
        path = self.parse_path()
        if start.value == "assert_value":
            self.expect(",")
            value = self.parse_literal()
            self.expect(")")
            self.expect(";")
            return A.AssertValue(path, value, self.span(start))
        self.expect(")")
        self.expect(";")
        cls = A.AssertPresent if start.value == "assert_present" else A.AssertAbsent
        return cls(path, self.span(start))

    # --- shared pieces ---------------------------------------------------

    def parse_path(self) -> A.Path:
        root = self.expect(ID, "variable name")
        steps: list[A.PathStep] = []
        while True:
            if self.cur().type == ".":
                self.advance()
                steps.append(A.MemberStep(self.expect(ID, "member name").value))
            elif self.cur().type == "[":
                self.advance()
                idx = int(self.expect(INT, "array index").value)
                self.expect("]")
                steps.append(A.IndexStep(idx))
            else:
                break
        return A.Path(root.value, steps, self.span(root))

    def parse_literal(self) -> A.Literal:
        tok = self.cur()
        sign = 1
        if tok.type == "-":
            self.advance()
            sign = -1
            tok = self.cur()
        if tok.type == INT:
            self.advance()
            return A.Literal(sign * int(tok.value), False, self.span(tok))
        if tok.type == REAL:
            self.advance()
            return A.Literal(sign * float(tok.value), True, self.span(tok))
        raise self.error("numeric literal")

    # --- shape expressions: precedence climbing --------------------------

    def parse_shape_expr(self) -> A.ShapeExpr:
        expr = self.parse_shape_term()
        while self.cur().type in ("+", "-"):
            op = self.advance()
            rhs = self.parse_shape_term()
            expr = A.BinOp(op.type, expr, rhs, self.span(op))
        return expr

    def parse_shape_term(self) -> A.ShapeExpr:
        expr = self.parse_shape_factor()
        while self.cur().type in ("*", "/"):
            op = self.advance()
            rhs = self.parse_shape_factor()
            expr = A.BinOp(op.type, expr, rhs, self.span(op))
        return expr

    def parse_shape_factor(self) -> A.ShapeExpr:
        tok = self.cur()
        if tok.type == INT:
            self.advance()
            return A.IntLit(int(tok.value), self.span(tok))
        if tok.type == ID:
            self.advance()
            return A.MemberRef(tok.value, self.span(tok))
        if tok.type == "(":
            self.advance()
            inner = self.parse_shape_expr()
            self.expect(")")
            return A.Paren(inner, self.span(tok))
        raise self.error("factor")


def parse_scenario(text: str) -> A.Scenario:
    """Parse complete scenario source into an AST.

    Raises ScenarioParseError (with position) on the first syntax
    violation; DuplicateName on redeclared types/policies/members.
    """
    parser = Parser(tokenize(text))
    return parser.parse_scenario()


def parse_shape_expr(text: str) -> A.ShapeExpr:
    """Parse a standalone shape expression such as ``nb_edges*2``."""
    parser = Parser(tokenize(text))
    expr = parser.parse_shape_expr()
    if parser.cur().type != EOF:
        raise parser.error("end of expression")
    return expr
