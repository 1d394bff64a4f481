//! Source text for elaborated networks. The output parses back to the same
//! components, alphabets and term structure.

use std::fmt::Write;

use super::NET_VERSION;
use crate::network::Network;
use crate::term::{Expr, Gen, ProcessTerm, Symbols, UnOp, Value};

pub fn print_network(net: &Network) -> String {
    let env = &net.env;
    let sy = &env.symbols;
    let mut out = format!("version {NET_VERSION}\n\n");
    for c in sy.channels() {
        write!(out, "channel {}", c.name).unwrap();
        for (k, f) in c.fields.iter().enumerate() {
            out.push_str(if k == 0 { " : " } else { "." });
            out.push('{');
            out.push_str(&f.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
            out.push('}');
        }
        out.push('\n');
    }
    if !env.consts.is_empty() {
        out.push('\n');
    }
    for (n, v) in &env.consts {
        writeln!(out, "const {n} = {}", print_value(sy, v)).unwrap();
    }
    if !env.funs.is_empty() {
        out.push('\n');
    }
    for (n, f) in &env.funs {
        writeln!(out, "fun {n}({}) = {}", f.params.join(", "), print_expr(sy, &f.body)).unwrap();
    }
    out.push('\n');
    for ((n, _), d) in &env.defs {
        let params = if d.params.is_empty() { String::new() } else { format!("({})", d.params.join(", ")) };
        writeln!(out, "{n}{params} = {}", print_term(sy, &d.body)).unwrap();
    }
    out.push('\n');
    for c in &net.components {
        let alpha: Vec<String> = c.alphabet.iter().map(|e| sy.name(e).to_string()).collect();
        writeln!(out, "component {} : {{{}}} = {}", c.name, alpha.join(", "), print_term(sy, &c.behaviour)).unwrap();
    }
    out
}

fn print_value(sy: &Symbols, v: &Value) -> String {
    let list = |xs: &mut dyn Iterator<Item = &Value>| xs.map(|x| print_value(sy, x)).collect::<Vec<_>>().join(", ");
    match v {
        Value::Int(i) if *i < 0 => format!("({i})"),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Event(e) => sy.name(*e).to_string(),
        Value::Chan { chan, prefix } => {
            let mut s = sy.channel(*chan as usize).name.clone();
            for p in prefix {
                s.push_str(&format!(".{p}"));
            }
            s
        }
        Value::Comp(a, i) => format!("{a}.{i}"),
        Value::Set(xs) => format!("{{{}}}", list(&mut xs.iter())),
        Value::Seq(xs) => format!("<{}>", list(&mut xs.iter())),
        Value::Tuple(xs) => format!("({})", list(&mut xs.iter())),
    }
}

pub fn print_expr(sy: &Symbols, e: &Expr) -> String {
    let p = |x: &Expr| print_expr(sy, x);
    let list = |xs: &[Expr]| xs.iter().map(|x| print_expr(sy, x)).collect::<Vec<_>>().join(", ");
    let gens = |gs: &[Gen]| {
        gs.iter()
            .map(|g| match g {
                Gen::Bind(x, s) => format!("{x} <- {}", print_expr(sy, s)),
                Gen::Cond(c) => print_expr(sy, c),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    match e {
        Expr::Lit(v) => print_value(sy, v),
        Expr::Var(n) => n.clone(),
        Expr::Unary(UnOp::Neg, a) => format!("-({})", p(a)),
        Expr::Unary(UnOp::Not, a) => format!("(not {})", p(a)),
        Expr::Unary(UnOp::Card, a) => format!("#({})", p(a)),
        Expr::Binary(op, a, b) => format!("({} {} {})", p(a), op.symbol(), p(b)),
        Expr::If(c, t, f) => format!("(if {} then {} else {})", p(c), p(t), p(f)),
        Expr::Call(n, args) => format!("{n}({})", list(args)),
        Expr::Dotted(h, fs) => {
            let mut s = h.clone();
            for f in fs {
                match f {
                    Expr::Lit(Value::Int(i)) if *i >= 0 => write!(s, ".{i}").unwrap(),
                    Expr::Var(_) => write!(s, ".{}", p(f)).unwrap(),
                    _ => write!(s, ".({})", p(f)).unwrap(),
                }
            }
            s
        }
        Expr::Ext(xs) => format!("{{| {} |}}", list(xs)),
        Expr::SetLit(xs) => format!("{{{}}}", list(xs)),
        Expr::SeqLit(xs) => format!("<{}>", list(xs)),
        Expr::Tuple(xs) => format!("({})", list(xs)),
        Expr::Range(a, b) => format!("{{{}..{}}}", p(a), p(b)),
        Expr::SetComp(b, gs) => format!("{{ {} | {} }}", p(b), gens(gs)),
        Expr::SeqComp(b, gs) => format!("< {} | {} >", p(b), gens(gs)),
    }
}

/// Binding strength as the parser sees it; higher binds tighter.
fn level(t: &ProcessTerm) -> u8 {
    use ProcessTerm::*;
    match t {
        Hide(..) => 0,
        IntChoice(_) => 1,
        ExtChoice(_) => 2,
        Interrupt(..) => 3,
        Prefix(..) | Guard(..) | Seq(..) => 4,
        Rename(..) => 5,
        _ => 6,
    }
}

pub fn print_term(sy: &Symbols, t: &ProcessTerm) -> String {
    at(sy, t, 0)
}

fn at(sy: &Symbols, t: &ProcessTerm, min: u8) -> String {
    use ProcessTerm::*;
    let e = |x: &Expr| print_expr(sy, x);
    let join = |ps: &[ProcessTerm], op: &str, lvl: u8| ps.iter().map(|p| at(sy, p, lvl)).collect::<Vec<_>>().join(op);
    let s = match t {
        Stop => "STOP".to_string(),
        Skip => "SKIP".to_string(),
        Div => "DIV".to_string(),
        Hide(p, x) => format!("{} \\ {}", at(sy, p, 0), e(x)),
        IntChoice(ps) if ps.len() > 1 => join(ps, " |~| ", 2),
        ExtChoice(ps) if ps.len() > 1 => join(ps, " [] ", 3),
        // degenerate choices have no infix form
        IntChoice(ps) => ps.first().map(|p| at(sy, p, min)).unwrap_or_else(|| "STOP".into()),
        ExtChoice(ps) => ps.first().map(|p| at(sy, p, min)).unwrap_or_else(|| "STOP".into()),
        Interrupt(p, q) => format!("{} /\\ {}", at(sy, p, 3), at(sy, q, 4)),
        Prefix(a, p) => format!("{} -> {}", e(a), at(sy, p, 4)),
        Guard(c, p) => format!("{} & {}", e(c), at(sy, p, 4)),
        Seq(p, q) => format!("{} ; {}", at(sy, p, 5), at(sy, q, 4)),
        Rename(p, r) => {
            let pairs: Vec<String> = r.iter().map(|(a, b)| format!("{} <- {}", e(a), e(b))).collect();
            format!("{}[[{}]]", at(sy, p, 5), pairs.join(", "))
        }
        ReplExt(x, set, p) => format!("([] {x} : {} @ {})", e(set), at(sy, p, 0)),
        ReplInt(x, set, p) => format!("(|~| {x} : {} @ {})", e(set), at(sy, p, 0)),
        Call(n, args) if args.is_empty() => n.clone(),
        Call(n, args) => format!("{n}({})", args.iter().map(e).collect::<Vec<_>>().join(", ")),
    };
    if level(t) < min && !matches!(t, IntChoice(ps) | ExtChoice(ps) if ps.len() <= 1) {
        format!("({s})")
    } else {
        s
    }
}
