"""
Parser de descenso recursivo para el lenguaje TSIA.

Gramática (resumen):

    program   := { record | routine }
    record    := 'record' NAME '{' [ msig { ',' msig } ] '}' [';']
    routine   := NAME '(' groups ')' ( block | ';' )
    groups    := plist ';' plist ';' plist          (exactamente dos ';')
    param     := ['del'] type [NAME] ['[' expr ']']
    stmt      := decl | assign | call | if | return | block | method-impl

Ambas sintaxis de índice ``a(i)`` y ``a[i]`` producen ``Index``.
"""

from typing import List, Optional, Sequence, Tuple

from app.errors import MissingGroupSeparator, TSIASyntaxError
from app.lexer import Token, tokenize
from app.syntax import (
    BUILTINS, COMPARISONS, IN, INOUT, OUT,
    Apply, Assign, Binary, Block, Call, Declarator, Expr, If, IncDec, Index,
    IntLit, LocalDecl, MethodImpl, MethodSig, Name, Param, Program, Range,
    RealLit, RecordDef, Return, RoutineDef, Signature, Stmt, Unary,
)


_COMPARE_TOKENS = {"lt": "<", "le": "<=", "gt": ">", "ge": ">=", "eqeq": "==", "ne": "!="}
_ADD_TOKENS = {"plus": "+", "minus": "-"}
_MUL_TOKENS = {"star": "*", "slash": "/"}


class Parser:
    """Parser sobre una lista de tokens ya generada"""

    def __init__(self, tokens: Sequence[Token]):
        self.tokens = list(tokens)
        self.pos = 0

    # ------------------------------------------------------------------
    # Primitivas
    # ------------------------------------------------------------------

    def peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, kind: str, text: Optional[str] = None, offset: int = 0) -> bool:
        tok = self.peek(offset)
        if tok is None or tok.kind != kind:
            return False
        return text is None or tok.text == text

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self.at(kind, text):
            tok = self.tokens[self.pos]
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.accept(kind, text)
        if tok is None:
            self.fail([text or kind])
        return tok

    def fail(self, expected: List[str], message: Optional[str] = None):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            line, col = (last.line, last.col + len(last.text)) if last else (1, 1)
            raise TSIASyntaxError(message or "fin de archivo inesperado", line, col, expected)
        raise TSIASyntaxError(message or f"token inesperado {tok.text!r}", tok.line, tok.col, expected)

    # ------------------------------------------------------------------
    # Nivel superior
    # ------------------------------------------------------------------

    def parse_program(self) -> Program:
        program = Program()
        while self.peek() is not None:
            if self.at("kw", "record"):
                record = self.parse_record()
                if record.name in program.records:
                    program.duplicates.append(record)
                else:
                    program.records[record.name] = record
            elif self.at("ident"):
                routine = self.parse_routine()
                if routine.is_prototype:
                    program.prototypes.append(routine)
                elif routine.name in program.routines:
                    program.duplicates.append(routine)
                else:
                    program.routines[routine.name] = routine
            else:
                self.fail(["record", "ident"])
        return program

    def parse_record(self) -> RecordDef:
        start = self.expect("kw", "record")
        name = self.expect("ident").text
        self.expect("lbrace")
        methods: List[MethodSig] = []
        if not self.at("rbrace"):
            while True:
                tok = self.expect("ident")
                sig = self.parse_signature(named_optional=True)
                methods.append(MethodSig(tok.text, sig, tok.line, tok.col))
                if not self.accept("comma"):
                    break
        self.expect("rbrace")
        self.accept("semi")
        return RecordDef(name, methods, start.line, start.col)

    def parse_routine(self) -> RoutineDef:
        tok = self.expect("ident")
        sig = self.parse_signature(named_optional=False)
        if self.accept("semi"):
            return RoutineDef(tok.text, sig, None, tok.line, tok.col)
        if not self.at("lbrace"):
            self.fail(["{", ";"])
        body = self.parse_block()
        return RoutineDef(tok.text, sig, body, tok.line, tok.col)

    def parse_signature(self, named_optional: bool) -> Signature:
        open_tok = self.expect("lparen")
        groups: List[List[Param]] = [[]]
        if not self.at("rparen"):
            while True:
                if self.at("semi") or self.at("rparen"):
                    pass
                else:
                    groups[-1].append(self.parse_param(len(groups) - 1, named_optional))
                    if self.accept("comma"):
                        continue
                if self.accept("semi"):
                    groups.append([])
                    continue
                break
        self.expect("rparen")
        if len(groups) != 3:
            raise MissingGroupSeparator(
                f"la firma necesita exactamente dos separadores ';' (hay {len(groups) - 1})",
                open_tok.line, open_tok.col,
            )
        for group_index, group in enumerate(groups):
            for p in group:
                p.group = group_index
        return Signature((groups[IN], groups[INOUT], groups[OUT]))

    def parse_param(self, group: int, named_optional: bool) -> Param:
        start = self.peek()
        delegated = self.accept("kw", "del") is not None
        ptype = self.parse_type()
        name = ""
        if self.at("ident"):
            name = self.expect("ident").text
        elif not named_optional:
            self.fail(["ident"])
        length = None
        if self.accept("lbracket"):
            length = self.parse_expr()
            self.expect("rbracket")
        return Param(name, ptype, length, delegated, group, start.line, start.col)

    def parse_type(self) -> str:
        if self.at("kw", "int") or self.at("kw", "real"):
            return self.tokens_advance().text
        if self.at("ident"):
            return self.tokens_advance().text
        self.fail(["int", "real", "ident"])

    def tokens_advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    # ------------------------------------------------------------------
    # Sentencias
    # ------------------------------------------------------------------

    def parse_block(self) -> Block:
        start = self.expect("lbrace")
        stmts: List[Stmt] = []
        while not self.at("rbrace"):
            if self.peek() is None:
                self.fail(["}"])
            stmts.append(self.parse_stmt())
        self.expect("rbrace")
        return Block(stmts, start.line, start.col)

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok is None:
            self.fail(["statement"])
        if tok.kind == "lbrace":
            return self.parse_block()
        if tok.kind == "kw":
            if tok.text in ("int", "real"):
                return self.parse_decl()
            if tok.text == "if":
                return self.parse_if()
            if tok.text == "return":
                self.pos += 1
                self.expect("semi")
                return Return(tok.line, tok.col)
            self.fail(["statement"], f"palabra reservada inesperada {tok.text!r}")
        if tok.kind == "ident":
            nxt = self.peek(1)
            if nxt is not None and nxt.kind == "ident":
                return self.parse_decl()
            if nxt is not None and nxt.kind == "dot":
                return self.parse_method_stmt()
            if nxt is not None and nxt.kind == "lparen":
                return self.parse_call_or_indexed_assign()
            return self.parse_assign()
        self.fail(["statement"])

    def parse_decl(self) -> LocalDecl:
        start = self.peek()
        dtype = self.parse_type()
        declarators = [self.parse_declarator()]
        while self.accept("comma"):
            declarators.append(self.parse_declarator())
        self.expect("semi")
        return LocalDecl(dtype, declarators, start.line, start.col)

    def parse_declarator(self) -> Declarator:
        tok = self.expect("ident")
        lo = hi = init = None
        if self.accept("lbracket"):
            hi = self.parse_expr()
            if self.accept("colon"):
                lo, hi = hi, self.parse_expr()
            self.expect("rbracket")
        if self.accept("eq"):
            init = self.parse_expr()
        return Declarator(tok.text, lo, hi, init, tok.line, tok.col)

    def parse_if(self) -> If:
        tok = self.expect("kw", "if")
        self.expect("lparen")
        cond = self.parse_expr()
        self.expect("rparen")
        then = self.parse_stmt()
        orelse = self.parse_stmt() if self.accept("kw", "else") else None
        return If(cond, then, orelse, tok.line, tok.col)

    def parse_assign(self) -> Assign:
        tok = self.expect("ident")
        target = Name(tok.text, tok.line, tok.col)
        if self.accept("lbracket"):
            target = Index(tok.text, self.parse_expr(), tok.line, tok.col)
            self.expect("rbracket")
        self.expect("eq")
        value = self.parse_expr()
        self.expect("semi")
        return Assign(target, value, tok.line, tok.col)

    def parse_arg_groups(self) -> Tuple[List[List[Expr]], Token]:
        """Lee ``( e, e ; e ; e )`` sin exigir la cantidad de grupos"""
        open_tok = self.expect("lparen")
        groups: List[List[Expr]] = [[]]
        if not self.at("rparen"):
            while True:
                if not (self.at("semi") or self.at("rparen")):
                    groups[-1].append(self.parse_expr())
                    if self.accept("comma"):
                        continue
                if self.accept("semi"):
                    groups.append([])
                    continue
                break
        self.expect("rparen")
        return groups, open_tok

    def _three_groups(self, groups, open_tok: Token):
        if len(groups) != 3:
            raise MissingGroupSeparator(
                f"la llamada necesita exactamente dos separadores ';' (hay {len(groups) - 1})",
                open_tok.line, open_tok.col,
            )
        return (groups[IN], groups[INOUT], groups[OUT])

    def parse_call_or_indexed_assign(self) -> Stmt:
        tok = self.expect("ident")
        groups, open_tok = self.parse_arg_groups()
        if self.at("eq"):
            # a(i) = e
            if len(groups) != 1 or len(groups[0]) != 1:
                self.fail([";"])
            self.expect("eq")
            value = self.parse_expr()
            self.expect("semi")
            return Assign(Index(tok.text, groups[0][0], tok.line, tok.col), value, tok.line, tok.col)
        call = Call(tok.text, self._three_groups(groups, open_tok), None, tok.line, tok.col)
        self.expect("semi")
        return call

    def parse_method_stmt(self) -> Stmt:
        recv = self.expect("ident")
        self.expect("dot")
        method = self.expect("ident")
        groups, open_tok = self.parse_arg_groups()
        groups = self._three_groups(groups, open_tok)
        if self.at("lbrace"):
            names: List[List[str]] = []
            for group in groups:
                current = []
                for arg in group:
                    if not isinstance(arg, Name):
                        raise TSIASyntaxError(
                            "los parámetros de un método deben ser nombres",
                            arg.line, arg.col, ["ident"],
                        )
                    current.append(arg.name)
                names.append(current)
            body = self.parse_block()
            return MethodImpl(recv.text, method.text, (names[0], names[1], names[2]),
                              body, recv.line, recv.col)
        self.expect("semi")
        return Call(method.text, groups, recv.text, recv.line, recv.col)

    # ------------------------------------------------------------------
    # Expresiones
    # ------------------------------------------------------------------

    def parse_expr(self) -> Expr:
        left = self.parse_additive()
        tok = self.peek()
        if tok is not None and tok.kind in _COMPARE_TOKENS:
            self.pos += 1
            right = self.parse_additive()
            left = Binary(_COMPARE_TOKENS[tok.kind], left, right, tok.line, tok.col)
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.peek() is not None and self.peek().kind in _ADD_TOKENS:
            tok = self.tokens_advance()
            left = Binary(_ADD_TOKENS[tok.kind], left, self.parse_multiplicative(), tok.line, tok.col)
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while self.peek() is not None and self.peek().kind in _MUL_TOKENS:
            tok = self.tokens_advance()
            left = Binary(_MUL_TOKENS[tok.kind], left, self.parse_unary(), tok.line, tok.col)
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind in ("minus", "plus"):
            self.pos += 1
            return Unary(tok.text, self.parse_unary(), tok.line, tok.col)
        if tok is not None and tok.kind in ("incr", "decr"):
            self.pos += 1
            target = self.expect("ident")
            return IncDec(tok.text, True, target.text, tok.line, tok.col)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "ident":
            nxt = self.peek(1)
            if nxt is not None and nxt.kind in ("incr", "decr"):
                self.pos += 2
                return IncDec(nxt.text, False, tok.text, tok.line, tok.col)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            self.fail(["expression"])
        if tok.kind == "int":
            self.pos += 1
            return IntLit(int(tok.text), tok.line, tok.col)
        if tok.kind == "real":
            self.pos += 1
            return RealLit(float(tok.text), tok.line, tok.col)
        if tok.kind == "lparen":
            self.pos += 1
            inner = self.parse_expr()
            self.expect("rparen")
            return inner
        if tok.kind == "ident":
            self.pos += 1
            if self.accept("lbracket"):
                first = self.parse_expr()
                if self.accept("colon"):
                    hi = self.parse_expr()
                    self.expect("rbracket")
                    return Range(tok.text, first, hi, tok.line, tok.col)
                self.expect("rbracket")
                return Index(tok.text, first, tok.line, tok.col)
            if self.accept("lparen"):
                args = [self.parse_expr()]
                while self.accept("comma"):
                    args.append(self.parse_expr())
                self.expect("rparen")
                if tok.text in BUILTINS:
                    return Apply(tok.text, args, tok.line, tok.col)
                if len(args) != 1:
                    raise TSIASyntaxError(
                        f"{tok.text}(...) admite un único índice", tok.line, tok.col, [")"])
                return Index(tok.text, args[0], tok.line, tok.col)
            return Name(tok.text, tok.line, tok.col)
        self.fail(["expression"])


def parse(tokens: Sequence[Token]) -> Program:
    """Parsea una secuencia de tokens a un programa (sin chequear)"""
    return Parser(tokens).parse_program()


def parse_source(source: str) -> Program:
    return parse(tokenize(source))


def parse_call(text: str) -> Call:
    """
    Parsea una llamada de entrada como ``fib(10;;a)``.

    Se acepta con o sin ``;`` final; debe tener exactamente dos separadores.
    """
    parser = Parser(tokenize(text))
    tok = parser.expect("ident")
    receiver = None
    if parser.accept("dot"):
        receiver, tok = tok.text, parser.expect("ident")
    groups, open_tok = parser.parse_arg_groups()
    call = Call(tok.text, parser._three_groups(groups, open_tok), receiver, tok.line, tok.col)
    parser.accept("semi")
    if parser.peek() is not None:
        parser.fail(["end of input"])
    return call
