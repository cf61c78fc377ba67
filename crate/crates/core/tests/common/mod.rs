//! Seeded generator of small well-typed programs, emitted as source text.
#![allow(dead_code)]

use std::fmt::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dlctx::syntax::{parse, Program};

pub const FIXTURES: &[(&str, &str)] = &[
    ("db_workers_orig", include_str!("../../../../corpus/db_workers_orig.act")),
    ("db_workers_mod", include_str!("../../../../corpus/db_workers_mod.act")),
    ("empty", include_str!("../../../../corpus/empty.act")),
    ("mutual_get", include_str!("../../../../corpus/mutual_get.act")),
    ("await_chain", include_str!("../../../../corpus/await_chain.act")),
];

pub fn corpus() -> Vec<(&'static str, Program)> {
    FIXTURES.iter().map(|(n, s)| (*n, parse(s).unwrap())).collect()
}

struct Method {
    name: String,
    /// Class index of the single reference parameter, if any.
    param: Option<usize>,
    rank: usize,
}

struct Shape {
    n: usize,
    bools: Vec<usize>,
    methods: Vec<Vec<Method>>,
    /// Calls only go to higher-ranked methods and there are no loops, so
    /// every run terminates.
    finite: bool,
}

fn cname(i: usize) -> String {
    ["Alpha", "Beta", "Gamma"][i].to_string()
}

/// A reference in scope: expression text and class index.
type Ref = (String, usize);

struct Gen<'a> {
    rng: StdRng,
    shape: &'a Shape,
    out: String,
    futs: usize,
    label: usize,
}

impl Gen<'_> {
    fn label(&mut self) -> String {
        self.label += 1;
        format!("@pp:l{}", self.label)
    }

    fn call_candidates(&self, refs: &[Ref], caller_rank: Option<usize>) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for (expr, ci) in refs {
            for m in &self.shape.methods[*ci] {
                if self.shape.finite && caller_rank.is_some_and(|r| m.rank <= r) {
                    continue;
                }
                match m.param {
                    None => out.push((expr.clone(), m.name.clone(), String::new())),
                    Some(pc) => {
                        for (arg, ac) in refs {
                            if *ac == pc {
                                out.push((expr.clone(), m.name.clone(), arg.clone()));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn block(&mut self, class: usize, rank: usize, refs: &[Ref], futs: &mut Vec<String>, depth: usize, indent: usize) {
        let len = self.rng.random_range(1..=4);
        let scope = futs.len();
        for _ in 0..len {
            let pad = "  ".repeat(indent);
            let nb = self.shape.bools[class];
            let choice = self.rng.random_range(0..10);
            let label = if self.rng.random_bool(0.3) { self.label() } else { String::new() };
            match choice {
                0..=3 => {
                    let cands = self.call_candidates(refs, Some(rank));
                    if cands.is_empty() {
                        let _ = writeln!(self.out, "{pad}skip; {label}");
                        continue;
                    }
                    let (t, m, a) = &cands[self.rng.random_range(0..cands.len())];
                    let f = format!("f{}", self.futs);
                    self.futs += 1;
                    let _ = writeln!(self.out, "{pad}Fut {f} = {t} ! {m}({a}); {label}");
                    futs.push(f);
                }
                4 | 5 if !futs.is_empty() => {
                    let f = futs[self.rng.random_range(0..futs.len())].clone();
                    if choice == 4 {
                        let _ = writeln!(self.out, "{pad}await {f}?; {label}");
                    } else {
                        let _ = writeln!(self.out, "{pad}{f}.get; {label}");
                    }
                }
                6 | 7 if nb > 0 => {
                    let b = self.rng.random_range(0..nb);
                    let v = self.rng.random_bool(0.5);
                    let _ = writeln!(self.out, "{pad}b{b} = {v}; {label}");
                }
                8 | 9 if nb > 0 && depth < 2 => {
                    let b = self.rng.random_range(0..nb);
                    if choice == 8 || self.shape.finite {
                        let _ = writeln!(self.out, "{pad}if (b{b}) {{");
                        self.block(class, rank, refs, futs, depth + 1, indent + 1);
                        if self.rng.random_bool(0.4) {
                            let _ = writeln!(self.out, "{pad}}} else {{");
                            self.block(class, rank, refs, futs, depth + 1, indent + 1);
                        }
                        let _ = writeln!(self.out, "{pad}}} {label}");
                    } else {
                        let _ = writeln!(self.out, "{pad}while (b{b}) {{");
                        let _ = writeln!(self.out, "{pad}  b{b} = false;");
                        self.block(class, rank, refs, futs, depth + 1, indent + 1);
                        let _ = writeln!(self.out, "{pad}}} {label}");
                    }
                }
                _ => {
                    let _ = writeln!(self.out, "{pad}skip; {label}");
                }
            }
        }
        // locals declared in a nested block stay inside it
        futs.truncate(scope);
    }
}

/// Source text of a random program with 2 or 3 classes.
pub fn random_source(seed: u64) -> String {
    source(seed, false)
}

/// Like [`random_source`], but every run of the program terminates.
pub fn finite_source(seed: u64) -> String {
    source(seed, true)
}

fn source(seed: u64, finite: bool) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.random_range(2..=3);
    let bools = (0..n).map(|_| rng.random_range(0..=2)).collect();
    let methods = (0..n)
        .map(|ci| {
            let k = rng.random_range(1..=3);
            (0..k)
                .map(|mi| Method {
                    name: format!("m{mi}"),
                    rank: rng.random_range(0..1000),
                    param: if rng.random_bool(0.5) {
                        Some(rng.random_range(0..n)).filter(|&pc| pc != ci)
                    } else {
                        None
                    },
                })
                .collect()
        })
        .collect();
    let shape = Shape {
        n,
        bools,
        methods,
        finite,
    };
    let mut g = Gen {
        rng,
        shape: &shape,
        out: String::new(),
        futs: 0,
        label: 0,
    };

    for ci in 0..n {
        let _ = writeln!(g.out, "class {} {{", cname(ci));
        for b in 0..shape.bools[ci] {
            let _ = writeln!(g.out, "  Bool b{b} = false;");
        }
        // references point to later classes and arrive through the constructor
        for cj in ci + 1..n {
            let _ = writeln!(g.out, "  {} r{cj};", cname(cj));
        }
        for m in &shape.methods[ci] {
            let mut refs: Vec<Ref> = vec![("this".into(), ci)];
            refs.extend((ci + 1..n).map(|cj| (format!("r{cj}"), cj)));
            let param = match m.param {
                Some(pc) => {
                    refs.push(("p".into(), pc));
                    format!("{} p", cname(pc))
                }
                None => String::new(),
            };
            let _ = writeln!(g.out, "  Unit {}({param}) {{", m.name);
            g.futs = 0;
            let mut futs = Vec::new();
            g.block(ci, m.rank, &refs, &mut futs, 0, 2);
            let _ = writeln!(g.out, "  }}");
        }
        let _ = writeln!(g.out, "}}");
    }

    let _ = writeln!(g.out, "main {{");
    let mut refs: Vec<Ref> = Vec::new();
    for ci in (0..n).rev() {
        let args: Vec<String> = (ci + 1..n).map(|cj| format!("o{cj}")).collect();
        let _ = writeln!(
            g.out,
            "  {} o{ci} = new {}({}); @pp:new{ci}",
            cname(ci),
            cname(ci),
            args.join(", ")
        );
        refs.push((format!("o{ci}"), ci));
    }
    let cands = g.call_candidates(&refs, None);
    for (i, (t, m, a)) in cands.iter().enumerate() {
        if g.rng.random_bool(0.6) {
            let _ = writeln!(g.out, "  Fut x{i} = {t} ! {m}({a});");
        }
    }
    let _ = writeln!(g.out, "}}");
    g.out
}

pub fn random_program(seed: u64) -> Program {
    parsed(seed, random_source(seed))
}

pub fn finite_program(seed: u64) -> Program {
    parsed(seed, finite_source(seed))
}

fn parsed(seed: u64, src: String) -> Program {
    match parse(&src) {
        Ok(p) => p,
        Err(e) => panic!("generated program {seed} does not parse: {e}\n{src}"),
    }
}

/// Classes named `K0`, `K1`, ... with the given method counts and no fields.
pub fn flat_program(methods: &[usize]) -> Program {
    let mut src = String::new();
    for (ci, &k) in methods.iter().enumerate() {
        src.push_str(&format!("class K{ci} {{\n"));
        for mi in 0..k {
            src.push_str(&format!("  Unit m{mi}() {{ skip; }}\n"));
        }
        src.push_str("}\n");
    }
    src.push_str("main { }\n");
    parse(&src).unwrap()
}
