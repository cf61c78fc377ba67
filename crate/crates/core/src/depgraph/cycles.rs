use std::collections::BTreeSet;

use super::{DeadlockCycle, DepGraph};

/// Elementary circuits of a digraph on nodes `0..n`, each starting at its
/// least node, sorted. Self-loops count as circuits of length one.
pub fn elementary_circuits(n: usize, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct Search<'a> {
        adj: &'a [Vec<usize>],
        start: usize,
        blocked: Vec<bool>,
        b: Vec<BTreeSet<usize>>,
        stack: Vec<usize>,
        out: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn unblock(&mut self, v: usize) {
            self.blocked[v] = false;
            let waiting = std::mem::take(&mut self.b[v]);
            for w in waiting {
                if self.blocked[w] {
                    self.unblock(w);
                }
            }
        }

        fn circuit(&mut self, v: usize) -> bool {
            let mut found = false;
            self.stack.push(v);
            self.blocked[v] = true;
            for &w in &self.adj[v] {
                if w < self.start {
                    continue;
                }
                if w == self.start {
                    self.out.push(self.stack.clone());
                    found = true;
                } else if !self.blocked[w] && self.circuit(w) {
                    found = true;
                }
            }
            if found {
                self.unblock(v);
            } else {
                for &w in &self.adj[v] {
                    if w >= self.start {
                        self.b[w].insert(v);
                    }
                }
            }
            self.stack.pop();
            found
        }
    }

    let adj: Vec<Vec<usize>> = adj
        .iter()
        .map(|succ| succ.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .collect();
    let mut out = Vec::new();
    for start in 0..n {
        let mut s = Search {
            adj: &adj,
            start,
            blocked: vec![false; n],
            b: vec![BTreeSet::new(); n],
            stack: Vec::new(),
            out: Vec::new(),
        };
        s.circuit(start);
        out.append(&mut s.out);
    }
    out.sort();
    out
}

/// All elementary cycles of `g`. Parallel edges between the same nodes give
/// distinct cycles.
pub fn enumerate_cycles(g: &DepGraph) -> Vec<DeadlockCycle> {
    let n = g.nodes().len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..g.edges().len() {
        let (a, b) = g.ends(i);
        adj[a].push(b);
    }
    let mut cycles = Vec::new();
    for circuit in elementary_circuits(n, &adj) {
        // candidate edges per hop
        let hops: Vec<Vec<usize>> = (0..circuit.len())
            .map(|k| {
                let (a, b) = (circuit[k], circuit[(k + 1) % circuit.len()]);
                (0..g.edges().len()).filter(|&i| g.ends(i) == (a, b)).collect()
            })
            .collect();
        expand(g, &hops, &mut Vec::new(), &mut cycles);
    }
    cycles
}

fn expand(g: &DepGraph, hops: &[Vec<usize>], picked: &mut Vec<usize>, out: &mut Vec<DeadlockCycle>) {
    match hops.split_first() {
        None => out.push(DeadlockCycle {
            edges: picked.iter().map(|&i| g.edges()[i].clone()).collect(),
            edge_ids: picked.clone(),
        }),
        Some((first, rest)) => {
            for &e in first {
                picked.push(e);
                expand(g, rest, picked, out);
                picked.pop();
            }
        }
    }
}
