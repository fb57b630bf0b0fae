//! MiniLang: the small imperative IR that subject programs are written in.
//!
//! Grammar (EBNF, see `docs/minilang.md` for the full reference):
//!
//! ```text
//! program  = [ "program" IDENT ";" ] class { class } ;
//! class    = "class" IDENT "{" { method } "}" ;
//! method   = "fn" IDENT "(" [ param { "," param } ] ")" [ "->" type ] block ;
//! stmt     = "let" IDENT "=" expr ";" | IDENT "=" expr ";" | call ";"
//!          | "if" "(" expr ")" block [ "else" ( block | if ) ]
//!          | "while" "(" expr ")" "@maxiter" INT block
//!          | "return" [ expr ] ";" | "trap" STRING [ "if" "(" expr ")" ] ";" ;
//! ```

mod ast;
mod check;
mod error;
mod lexer;
mod parser;
mod printer;
mod targets;

pub use ast::*;
pub use error::{ParseError, Pos, SyntaxError};
pub use printer::{expr as print_expr, pretty_print};
pub use targets::{
    build_cdg, enumerate_targets, nesting_depth, BranchTarget, ControlDependencyGraph, Polarity,
    TargetId,
};

/// Parse and resolve a MiniLang source text.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut program = parser::parse_unresolved(text)?;
    check::resolve(&mut program)?;
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MATH94: &str = include_str!("../../../../corpus/programs/math94.mini");

    fn mref(c: usize, m: usize) -> MethodRef {
        MethodRef { class: c, method: m }
    }

    #[test]
    fn empty_class_body() {
        let p = parse_program("class C { }").unwrap();
        assert_eq!(p.classes.len(), 1);
        assert_eq!(p.classes[0].name, "C");
        assert!(p.classes[0].methods.is_empty());
    }

    #[test]
    fn math94_shape() {
        let p = parse_program(MATH94).unwrap();
        assert_eq!(p.name, "math94");
        assert_eq!(p.classes.len(), 1);
        assert_eq!(p.classes[0].methods.len(), 1);
        assert!(p.site_count() >= 2);
        let m = &p.classes[0].methods[0];
        assert_eq!(m.name, "gcd");
        assert_eq!(m.params.len(), 2);
    }

    #[test]
    fn missing_loop_guard_is_rejected() {
        let err = parse_program("class C { fn f(x: int) { while (x > 0) { x = x - 1; } } }").unwrap_err();
        assert!(matches!(err, ParseError::UnboundedLoop { .. }), "{err:?}");
    }

    #[test]
    fn syntax_error_lists_expected_tokens() {
        let err = parse_program("class C { fn f(x: int) { let = 3; } }").unwrap_err();
        match err {
            ParseError::Syntax(e) => {
                assert_eq!(e.pos.line, 1);
                assert_eq!(e.expected, vec!["identifier".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_errors() {
        for src in [
            "class C { fn f(x: int) { if (x) { } } }",
            "class C { fn f(x: bool) -> int { return x; } }",
            "class C { fn f(x: int) { y = 1; } }",
            "class C { fn f(x: int) { g(x); } }",
            "class C { fn g() -> bool { return true; } fn f(x: int) { if (g()) { } } }",
            "class C { fn f(x: int) { let b = x == true; } }",
        ] {
            assert!(matches!(parse_program(src), Err(ParseError::Type { .. })), "{src}");
        }
    }

    #[test]
    fn duplicate_names() {
        for src in [
            "class C { } class C { }",
            "class C { fn f() { } fn f() { } }",
            "class C { fn f(x: int) { let x = 1; } }",
            "class C { fn f() { trap \"a\"; } fn g() { trap \"a\"; } }",
        ] {
            assert!(matches!(parse_program(src), Err(ParseError::Duplicate { .. })), "{src}");
        }
    }

    #[test]
    fn resolves_slots_and_calls() {
        let p = parse_program(
            "class C { fn h(a: int) -> int { return a; } fn f(x: int) { let y = h(x); if (y > 0) { let z = 1; } let w = 2; } }",
        )
        .unwrap();
        let f = &p.classes[0].methods[1];
        assert_eq!(f.frame_size, 4);
        match &f.body[0] {
            Stmt::Let { value: Expr::Call(c), .. } => assert_eq!(c.method, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extreme_literals() {
        let p = parse_program("class C { fn f() -> int { return -9223372036854775808; } }").unwrap();
        assert_eq!(
            p.classes[0].methods[0].body[0],
            Stmt::Return(Some(Expr::Int(i64::MIN)))
        );
        assert!(parse_program("class C { fn f() -> int { return 9223372036854775808; } }").is_err());
    }

    #[test]
    fn roundtrip_math94() {
        let p = parse_program(MATH94).unwrap();
        let printed = pretty_print(&p);
        assert_eq!(parse_program(&printed).unwrap(), p);
    }

    #[test]
    fn roundtrip_tricky_expressions() {
        let src = "class C { fn f(a: int, b: bool) -> int {
            let x = -5 * a - -3 - (a - 1);
            let y = -(5) + -(-a) + -(a * 2);
            let z = !(b && a > 1) || !b == (a % 3 != 0);
            if (a < 0) { return x; } else if (b) { return y; } else { if (z) { trap \"t\" if (a == 7); } }
            return i32(a * a) / abs(a - 1);
        } }";
        let p = parse_program(src).unwrap();
        let again = parse_program(&pretty_print(&p)).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn no_conditionals_no_targets() {
        let p = parse_program("class C { fn f(a: int) -> int { return a + 1; } }").unwrap();
        assert!(enumerate_targets(&p).is_empty());
        assert!(build_cdg(&p, mref(0, 0)).nodes.is_empty());
    }

    #[test]
    fn single_if_else_gives_two_roots() {
        let p = parse_program("class C { fn f(a: int) { if (a > 0) { } else { } } }").unwrap();
        let t = enumerate_targets(&p);
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].polarity, t[1].polarity), (Polarity::True, Polarity::False));
        assert!(t.iter().all(|t| t.parent.is_none()));
        assert_eq!(t[0].label, "C.f:s0:T");
    }

    /// Independent oracle: walk the tree keeping an explicit stack of
    /// enclosing (site, side) pairs and read off each target's parent.
    fn oracle_parents(p: &Program) -> Vec<(SiteId, bool, Option<(SiteId, bool)>)> {
        fn go(block: &[Stmt], stack: &mut Vec<(SiteId, bool)>, out: &mut Vec<(SiteId, bool, Option<(SiteId, bool)>)>) {
            for s in block {
                match s {
                    Stmt::If { site, then_block, else_block, .. } => {
                        out.push((*site, true, stack.last().copied()));
                        out.push((*site, false, stack.last().copied()));
                        stack.push((*site, true));
                        go(then_block, stack, out);
                        stack.pop();
                        if let Some(b) = else_block {
                            stack.push((*site, false));
                            go(b, stack, out);
                            stack.pop();
                        }
                    }
                    Stmt::While { site, body, .. } => {
                        out.push((*site, true, stack.last().copied()));
                        out.push((*site, false, stack.last().copied()));
                        stack.push((*site, true));
                        go(body, stack, out);
                        stack.pop();
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        for c in &p.classes {
            for m in &c.methods {
                go(&m.body, &mut Vec::new(), &mut out);
            }
        }
        out
    }

    fn assert_matches_oracle(p: &Program) {
        let targets = enumerate_targets(p);
        let oracle = oracle_parents(p);
        assert_eq!(targets.len(), oracle.len());
        for (t, (site, side, parent)) in targets.iter().zip(oracle) {
            assert_eq!((t.site, t.polarity.as_bool()), (site, side));
            let got = t.parent.map(|pid| (targets[pid].site, targets[pid].polarity.as_bool()));
            assert_eq!(got, parent, "target {}", t.label);
        }
    }

    #[test]
    fn nested_if_parent_is_enclosing_true_side() {
        let p = parse_program("class C { fn f(a: int, b: int) { if (a > 0) { if (b > 0) { } } } }").unwrap();
        let t = enumerate_targets(&p);
        assert_eq!(t[2].parent, Some(0));
        assert_eq!(t[3].parent, Some(0));
        assert_matches_oracle(&p);
    }

    #[test]
    fn three_level_chain() {
        let p = parse_program(
            "class C { fn f(a: int) { if (a > 0) { if (a > 1) { if (a > 2) { } } } } }",
        )
        .unwrap();
        let cdg = build_cdg(&p, mref(0, 0));
        assert_eq!(cdg.chain(4), vec![4, 2, 0]);
        assert_eq!(cdg.roots(), vec![0, 1]);
        assert!(cdg.is_forest());
        assert_matches_oracle(&p);
    }

    #[test]
    fn siblings_share_parent() {
        let p = parse_program(
            "class C { fn f(a: int) { if (a > 0) { if (a > 1) { } while (a < 9) @maxiter 3 { a = a + 1; } } else { if (a == -1) { } } } }",
        )
        .unwrap();
        let t = enumerate_targets(&p);
        assert_eq!(t[2].parent, Some(0));
        assert_eq!(t[4].parent, Some(0));
        assert_eq!(t[6].parent, Some(1));
        assert_matches_oracle(&p);
        let cdg = build_cdg(&p, mref(0, 0));
        assert_eq!(cdg.children(0), vec![2, 3, 4, 5]);
    }

    #[test]
    fn math94_targets_match_oracle() {
        let p = parse_program(MATH94).unwrap();
        assert_matches_oracle(&p);
        assert_eq!(enumerate_targets(&p).len(), 2 * p.site_count() as usize);
    }
}
