//! Recursive-descent parser for `.net` sources.
//!
//! Process operators, loosest first: `\`, `|~|`, `[]`, `/\`, then the prefix
//! forms `e -> P` and `g & P`, then `;`, then renaming `P[[a <- b]]`. Indexed
//! choices `[] x : S @ P` extend as far to the right as possible.

use super::lexer::{lex, Tok};
use super::{
    AtomDecl, ChannelDecl, ComponentDecl, ConstDecl, Diagnostic, FunDecl, InstanceDecl, NetworkDecl, Placement, Pos, ProcDecl, INPUT_DOMAIN,
};
use crate::term::{BinOp, Expr, Gen, ProcessTerm, UnOp, Value};

type PResult<T> = Result<T, Diagnostic>;

pub struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

pub fn parse_network(src: &str) -> Result<NetworkDecl, Vec<Diagnostic>> {
    let mut p = Parser { toks: lex(src)?, i: 0 };
    let mut decl = NetworkDecl::default();
    let mut errs = Vec::new();
    while p.peek() != &Tok::Eof {
        let start = p.i;
        if let Err(e) = p.declaration(&mut decl) {
            errs.push(e);
            p.recover(start);
        }
    }
    if errs.is_empty() {
        Ok(decl)
    } else {
        errs.sort_by_key(|d| d.pos);
        Err(errs)
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, Vec<Diagnostic>> {
    let mut p = Parser { toks: lex(src)?, i: 0 };
    let e = p.expr().map_err(|d| vec![d])?;
    p.expect(Tok::Eof).map_err(|d| vec![d])?;
    Ok(e)
}

pub fn parse_term(src: &str) -> Result<ProcessTerm, Vec<Diagnostic>> {
    let mut p = Parser { toks: lex(src)?, i: 0 };
    let t = p.term().map_err(|d| vec![d])?;
    p.expect(Tok::Eof).map_err(|d| vec![d])?;
    Ok(t)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("{t}")))
        }
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        Diagnostic::error(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn starts_declaration(&self) -> bool {
        match self.peek() {
            Tok::Const | Tok::Channel | Tok::Fun | Tok::Atom | Tok::Instance | Tok::Component | Tok::Version => true,
            Tok::Ident(_) => matches!(self.peek_at(1), Tok::Eq) || self.params_then_eq(),
            _ => false,
        }
    }

    /// `Name(a, b) =` ahead.
    fn params_then_eq(&self) -> bool {
        if self.peek_at(1) != &Tok::LParen {
            return false;
        }
        let mut k = 2;
        loop {
            match self.peek_at(k) {
                Tok::Ident(_) | Tok::Comma => k += 1,
                Tok::RParen => return self.peek_at(k + 1) == &Tok::Eq,
                _ => return false,
            }
        }
    }

    fn recover(&mut self, start: usize) {
        if self.i == start {
            self.bump();
        }
        while self.peek() != &Tok::Eof && !self.starts_declaration() {
            self.bump();
        }
    }

    fn declaration(&mut self, d: &mut NetworkDecl) -> PResult<()> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Version => {
                self.bump();
                match self.bump() {
                    Tok::Int(v) => d.version = Some((v, pos)),
                    _ => return Err(Diagnostic::error(pos, "expected a version number after `version`")),
                }
            }
            Tok::Const => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let value = self.expr()?;
                d.consts.push(ConstDecl { name, value, pos });
            }
            Tok::Channel => {
                self.bump();
                let mut names = vec![self.ident()?];
                while self.eat(&Tok::Comma) {
                    names.push(self.ident()?);
                }
                let mut fields = Vec::new();
                if self.eat(&Tok::Colon) {
                    fields.push(self.unary(false)?);
                    while self.eat(&Tok::Dot) {
                        fields.push(self.unary(false)?);
                    }
                }
                for name in names {
                    d.channels.push(ChannelDecl { name, fields: fields.clone(), pos });
                }
            }
            Tok::Fun => {
                self.bump();
                let name = self.ident()?;
                let params = self.params()?;
                self.expect(Tok::Eq)?;
                let body = self.expr()?;
                d.funs.push(FunDecl { name, params, body, pos });
            }
            Tok::Atom => {
                self.bump();
                let name = self.ident()?;
                let params = self.params()?;
                if params.is_empty() {
                    return Err(Diagnostic::error(pos, format!("atom `{name}` needs at least one parameter")));
                }
                self.expect(Tok::Colon)?;
                let alphabet = self.expr()?;
                self.expect(Tok::Eq)?;
                let behaviour = self.term()?;
                d.atoms.push(AtomDecl { name, params, alphabet, behaviour, pos });
            }
            Tok::Instance => {
                self.bump();
                let atom = self.ident()?;
                self.expect(Tok::Colon)?;
                let ids = self.expr()?;
                d.placements.push(Placement::Instance(InstanceDecl { atom, ids, pos }));
            }
            Tok::Component => {
                self.bump();
                let mut name = self.ident()?;
                while self.eat(&Tok::Dot) {
                    match self.bump() {
                        Tok::Int(v) => name.push_str(&format!(".{v}")),
                        Tok::Ident(s) => name.push_str(&format!(".{s}")),
                        _ => return Err(Diagnostic::error(self.pos(), "expected a name segment after `.`")),
                    }
                }
                self.expect(Tok::Colon)?;
                let alphabet = self.expr()?;
                self.expect(Tok::Eq)?;
                let behaviour = self.term()?;
                d.placements.push(Placement::Component(ComponentDecl { name, alphabet, behaviour, pos }));
            }
            Tok::Ident(name) => {
                self.bump();
                let params = self.params()?;
                self.expect(Tok::Eq)?;
                let body = self.term()?;
                d.defs.push(ProcDecl { name, params, body, pos });
            }
            _ => return Err(self.unexpected("a declaration")),
        }
        Ok(())
    }

    fn params(&mut self) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        if self.eat(&Tok::LParen) {
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            out.push(self.ident()?);
            while self.eat(&Tok::Comma) {
                out.push(self.ident()?);
            }
            self.expect(Tok::RParen)?;
        }
        Ok(out)
    }

    // ---- process terms ----

    pub fn term(&mut self) -> PResult<ProcessTerm> {
        let mut p = self.int_choice()?;
        while self.eat(&Tok::Backslash) {
            let x = self.expr()?;
            p = ProcessTerm::hide(p, x);
        }
        Ok(p)
    }

    fn int_choice(&mut self) -> PResult<ProcessTerm> {
        let first = self.ext_choice()?;
        let mut ps = vec![first];
        while self.eat(&Tok::IntChoice) {
            ps.push(self.ext_choice()?);
        }
        Ok(if ps.len() == 1 { ps.pop().unwrap() } else { ProcessTerm::IntChoice(ps) })
    }

    fn ext_choice(&mut self) -> PResult<ProcessTerm> {
        let first = self.interrupt()?;
        let mut ps = vec![first];
        while self.eat(&Tok::ExtChoice) {
            ps.push(self.interrupt()?);
        }
        Ok(if ps.len() == 1 { ps.pop().unwrap() } else { ProcessTerm::ExtChoice(ps) })
    }

    fn interrupt(&mut self) -> PResult<ProcessTerm> {
        let mut p = self.prefix()?;
        while self.eat(&Tok::Interrupt) {
            let q = self.prefix()?;
            p = ProcessTerm::interrupt(p, q);
        }
        Ok(p)
    }

    /// `comm -> P`, `expr -> P`, `guard & P`, or a sequential composition.
    fn prefix(&mut self) -> PResult<ProcessTerm> {
        let start = self.i;
        if let Tok::Ident(_) = self.peek() {
            if let Ok((ev, inputs)) = self.comm() {
                if self.eat(&Tok::Arrow) {
                    let body = self.prefix()?;
                    let mut t = ProcessTerm::prefix(ev, body);
                    for (x, dom) in inputs.into_iter().rev() {
                        t = ProcessTerm::ReplExt(x, dom, Box::new(t));
                    }
                    return Ok(t);
                }
            }
            self.i = start;
        }
        if let Ok(e) = self.expr() {
            if self.eat(&Tok::Arrow) {
                return Ok(ProcessTerm::prefix(e, self.prefix()?));
            }
            if self.eat(&Tok::Amp) {
                return Ok(ProcessTerm::guard(e, self.prefix()?));
            }
        }
        self.i = start;
        let p = self.renamed()?;
        if self.eat(&Tok::Semi) {
            let q = self.prefix()?;
            return Ok(ProcessTerm::seq(p, q));
        }
        Ok(p)
    }

    /// `ch.e!e?x:S...`; input binders come back with their domains.
    fn comm(&mut self) -> PResult<(Expr, Vec<(String, Expr)>)> {
        let head = self.ident()?;
        let mut fields = Vec::new();
        let mut inputs = Vec::new();
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    fields.push(self.field()?);
                }
                Tok::Bang => {
                    self.bump();
                    fields.push(self.field()?);
                }
                Tok::Query => {
                    self.bump();
                    let x = self.ident()?;
                    let dom = if self.eat(&Tok::Colon) {
                        self.unary(false)?
                    } else {
                        Expr::Call(INPUT_DOMAIN.to_string(), vec![Expr::var(&head), Expr::int(fields.len() as i64)])
                    };
                    fields.push(Expr::Var(x.clone()));
                    inputs.push((x, dom));
                }
                _ => break,
            }
        }
        let ev = if fields.is_empty() { Expr::Var(head) } else { Expr::Dotted(head, fields) };
        Ok((ev, inputs))
    }

    fn field(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::int(v))
            }
            Tok::Ident(s) => {
                self.bump();
                if self.peek() == &Tok::LParen {
                    let args = self.args()?;
                    Ok(Expr::Call(s, args))
                } else {
                    Ok(Expr::Var(s))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected("a channel field")),
        }
    }

    fn renamed(&mut self) -> PResult<ProcessTerm> {
        let mut p = self.unit()?;
        while self.eat(&Tok::LRename) {
            let mut pairs = Vec::new();
            loop {
                let a = self.expr()?;
                self.expect(Tok::LArrow)?;
                let b = self.expr()?;
                pairs.push((a, b));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RRename)?;
            p = ProcessTerm::Rename(Box::new(p), pairs);
        }
        Ok(p)
    }

    fn unit(&mut self) -> PResult<ProcessTerm> {
        match self.peek().clone() {
            Tok::Stop => {
                self.bump();
                Ok(ProcessTerm::Stop)
            }
            Tok::Skip => {
                self.bump();
                Ok(ProcessTerm::Skip)
            }
            Tok::Div => {
                self.bump();
                Ok(ProcessTerm::Div)
            }
            Tok::LParen => {
                self.bump();
                let p = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::ExtChoice | Tok::IntChoice => {
                let ext = self.bump() == Tok::ExtChoice;
                let x = self.ident()?;
                self.expect(Tok::Colon)?;
                let set = self.expr()?;
                self.expect(Tok::At)?;
                let body = self.term()?;
                Ok(if ext { ProcessTerm::ReplExt(x, set, Box::new(body)) } else { ProcessTerm::ReplInt(x, set, Box::new(body)) })
            }
            Tok::Ident(name) => {
                self.bump();
                let args = if self.peek() == &Tok::LParen { self.args()? } else { Vec::new() };
                Ok(ProcessTerm::Call(name, args))
            }
            _ => Err(self.unexpected("a process")),
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        out.push(self.expr()?);
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::If) {
            let c = self.expr()?;
            self.expect(Tok::Then)?;
            let t = self.expr()?;
            self.expect(Tok::Else)?;
            let e = self.expr()?;
            return Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)));
        }
        self.or()
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut a = self.and()?;
        while self.eat(&Tok::Or) {
            a = Expr::bin(BinOp::Or, a, self.and()?);
        }
        Ok(a)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut a = self.not()?;
        while self.eat(&Tok::And) {
            a = Expr::bin(BinOp::And, a, self.not()?);
        }
        Ok(a)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.not()?)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> PResult<Expr> {
        let a = self.add()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(a),
        };
        self.bump();
        Ok(Expr::bin(op, a, self.add()?))
    }

    fn add(&mut self) -> PResult<Expr> {
        let mut a = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                Tok::Caret => BinOp::Cat,
                _ => return Ok(a),
            };
            self.bump();
            a = Expr::bin(op, a, self.mul()?);
        }
    }

    fn mul(&mut self) -> PResult<Expr> {
        let mut a = self.unary(true)?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(a),
            };
            self.bump();
            a = Expr::bin(op, a, self.unary(true)?);
        }
    }

    /// With `dots` off, `a.b` is not read as a dotted name (channel fields).
    fn unary(&mut self, dots: bool) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary(dots)? {
                Expr::Lit(Value::Int(v)) => Expr::int(-v),
                e => Expr::Unary(UnOp::Neg, Box::new(e)),
            });
        }
        if self.eat(&Tok::Hash) {
            return Ok(Expr::Unary(UnOp::Card, Box::new(self.unary(dots)?)));
        }
        self.primary(dots)
    }

    fn primary(&mut self, dots: bool) -> PResult<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Int(v) => Ok(Expr::int(v)),
            Tok::True => Ok(Expr::Lit(Value::Bool(true))),
            Tok::False => Ok(Expr::Lit(Value::Bool(false))),
            Tok::Ident(s) => {
                if self.peek() == &Tok::LParen {
                    let args = self.args()?;
                    return Ok(Expr::Call(s, args));
                }
                if dots && self.peek() == &Tok::Dot {
                    let mut fields = Vec::new();
                    while self.eat(&Tok::Dot) {
                        fields.push(self.field()?);
                    }
                    return Ok(Expr::Dotted(s, fields));
                }
                Ok(Expr::Var(s))
            }
            Tok::LParen => {
                let first = self.expr()?;
                if self.eat(&Tok::RParen) {
                    return Ok(first);
                }
                let mut xs = vec![first];
                while self.eat(&Tok::Comma) {
                    xs.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                Ok(Expr::Tuple(xs))
            }
            Tok::LExt => {
                let xs = self.list(Tok::RExt, Self::expr)?;
                Ok(Expr::Ext(xs))
            }
            Tok::LBrace => self.set_body(),
            Tok::Lt => self.seq_body(),
            t => Err(Diagnostic::error(pos, format!("expected an expression, found {t}"))),
        }
    }

    fn list(&mut self, close: Tok, item: fn(&mut Self) -> PResult<Expr>) -> PResult<Vec<Expr>> {
        let mut xs = Vec::new();
        if self.eat(&close) {
            return Ok(xs);
        }
        xs.push(item(self)?);
        while self.eat(&Tok::Comma) {
            xs.push(item(self)?);
        }
        self.expect(close)?;
        Ok(xs)
    }

    fn set_body(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::RBrace) {
            return Ok(Expr::SetLit(Vec::new()));
        }
        let first = self.expr()?;
        if self.eat(&Tok::DotDot) {
            let hi = self.expr()?;
            self.expect(Tok::RBrace)?;
            return Ok(Expr::Range(Box::new(first), Box::new(hi)));
        }
        if self.eat(&Tok::Bar) {
            let gens = self.gens(Self::expr)?;
            self.expect(Tok::RBrace)?;
            return Ok(Expr::SetComp(Box::new(first), gens));
        }
        let mut xs = vec![first];
        while self.eat(&Tok::Comma) {
            xs.push(self.expr()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(Expr::SetLit(xs))
    }

    /// Sequence elements stop short of comparisons, so `>` closes the literal.
    fn seq_body(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Gt) {
            return Ok(Expr::SeqLit(Vec::new()));
        }
        let first = self.add()?;
        if self.eat(&Tok::Bar) {
            let gens = self.gens(Self::add)?;
            self.expect(Tok::Gt)?;
            return Ok(Expr::SeqComp(Box::new(first), gens));
        }
        let mut xs = vec![first];
        while self.eat(&Tok::Comma) {
            xs.push(self.add()?);
        }
        self.expect(Tok::Gt)?;
        Ok(Expr::SeqLit(xs))
    }

    fn gens(&mut self, cond: fn(&mut Self) -> PResult<Expr>) -> PResult<Vec<Gen>> {
        let mut out = Vec::new();
        loop {
            if let (Tok::Ident(x), Tok::LArrow) = (self.peek().clone(), self.peek_at(1)) {
                self.bump();
                self.bump();
                out.push(Gen::Bind(x, self.add()?));
            } else {
                out.push(Gen::Cond(cond(self)?));
            }
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(s: &str) -> ProcessTerm {
        parse_term(s).unwrap_or_else(|e| panic!("{s}: {e:?}"))
    }

    #[test]
    fn recursive_definition() {
        let d = parse_network("P = a -> P").unwrap();
        assert_eq!(d.defs.len(), 1);
        assert_eq!(d.defs[0].body, ProcessTerm::prefix(Expr::var("a"), ProcessTerm::call("P", vec![])));
    }

    #[test]
    fn prefix_binds_tighter_than_choice() {
        let t = term("a -> P [] b -> Q |~| STOP");
        let ProcessTerm::IntChoice(ps) = t else { panic!() };
        assert!(matches!(&ps[0], ProcessTerm::ExtChoice(qs) if qs.len() == 2));
    }

    #[test]
    fn guards_and_comparisons() {
        let t = term("size < N & Input(cache) [] size > 0 & STOP");
        let ProcessTerm::ExtChoice(ps) = t else { panic!() };
        assert!(matches!(&ps[0], ProcessTerm::Guard(Expr::Binary(BinOp::Lt, ..), _)));
        assert!(matches!(&ps[1], ProcessTerm::Guard(Expr::Binary(BinOp::Gt, ..), _)));
    }

    #[test]
    fn input_becomes_indexed_choice() {
        let t = term("write.id?x -> Cell(id, x)");
        let ProcessTerm::ReplExt(x, dom, body) = t else { panic!() };
        assert_eq!(x, "x");
        assert_eq!(dom, Expr::Call(INPUT_DOMAIN.into(), vec![Expr::var("write"), Expr::int(1)]));
        let ProcessTerm::Prefix(Expr::Dotted(h, fs), _) = *body else { panic!() };
        assert_eq!(h, "write");
        assert_eq!(fs, vec![Expr::var("id"), Expr::var("x")]);
    }

    #[test]
    fn output_is_a_field() {
        let t = term("pickup.id!next(id) -> STOP");
        let ProcessTerm::Prefix(Expr::Dotted(_, fs), _) = t else { panic!() };
        assert_eq!(fs[1], Expr::Call("next".into(), vec![Expr::var("id")]));
    }

    #[test]
    fn sequence_and_interrupt() {
        let t = term("a -> SKIP ; P /\\ b -> STOP");
        assert!(matches!(t, ProcessTerm::Interrupt(..)));
    }

    #[test]
    fn hiding_and_renaming() {
        let t = term("P[[a <- b]] \\ {b}");
        let ProcessTerm::Hide(p, _) = t else { panic!() };
        assert!(matches!(*p, ProcessTerm::Rename(_, ref r) if r.len() == 1));
    }

    #[test]
    fn indexed_choice() {
        let t = term("[] i : {id, prev(id)} @ pickup.i.id -> putdown.i.id -> Fork(id)");
        assert!(matches!(t, ProcessTerm::ReplExt(ref x, Expr::SetLit(_), _) if x == "i"));
    }

    #[test]
    fn expression_forms() {
        let e = parse_expr("{ x * 2 | x <- {0..N-1}, x % 2 == 0 }").unwrap();
        assert!(matches!(e, Expr::SetComp(..)));
        let e = parse_expr("<1, 2> ^ <x | x <- <3>>").unwrap();
        assert!(matches!(e, Expr::Binary(BinOp::Cat, ..)));
        assert_eq!(parse_expr("-(3)").unwrap(), Expr::int(-3));
        assert!(matches!(parse_expr("if a then 1 else 2").unwrap(), Expr::If(..)));
    }

    #[test]
    fn missing_choice_operand_is_a_diagnostic() {
        let e = parse_network("P = a -> STOP []\nQ = STOP").unwrap_err();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].pos.line, 2);
    }

    #[test]
    fn several_errors_are_collected_in_order() {
        let e = parse_network("const = 1\nP = (a -> STOP\nchannel c : {0..1}\nQ = ->").unwrap_err();
        assert_eq!(e.len(), 3);
        assert!(e.windows(2).all(|w| w[0].pos <= w[1].pos));
    }
}
