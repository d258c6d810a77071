//! Emptiness and membership.
//!
//! Emptiness witnesses are lassos: a path from the initial state to an
//! accepting state plus a nonempty cycle back to it. Membership of an
//! ultimately periodic word runs the automaton over the word's lasso shape
//! and looks for a reachable cycle through an accepting product node.
//! Both searches visit states in id order, so results are reproducible.

use super::ops::scc_ids;
use super::{Nba, NbaError, StateId};
use crate::words::{LassoWord, Symbol};
use std::collections::VecDeque;

/// A reachable accepting lasso, if the language is nonempty. The returned
/// word is always accepted by the automaton (`member` closes the loop).
pub fn accepting_lasso(a: &Nba) -> Option<LassoWord> {
    let adj = a.adjacency();
    let n = a.num_states() as usize;

    // Forward reachability with parent pointers for prefix extraction.
    let mut parent: Vec<Option<(StateId, Symbol)>> = vec![None; n];
    let mut reachable = vec![false; n];
    reachable[a.initial() as usize] = true;
    let mut queue = VecDeque::from([a.initial()]);
    while let Some(s) = queue.pop_front() {
        for &(sym, t) in &adj[s as usize] {
            if !reachable[t as usize] {
                reachable[t as usize] = true;
                parent[t as usize] = Some((s, sym));
                queue.push_back(t);
            }
        }
    }

    for f in 0..a.num_states() {
        if !a.is_accepting(f) || !reachable[f as usize] {
            continue;
        }
        // Shortest nonempty cycle f -> f.
        if let Some(cycle) = shortest_path(a, &adj, f, f) {
            let mut prefix = Vec::new();
            let mut cursor = f;
            while let Some((p, sym)) = parent[cursor as usize] {
                prefix.push(sym);
                cursor = p;
            }
            prefix.reverse();
            return Some(LassoWord::new(a.arity(), prefix, cycle));
        }
    }
    None
}

/// True iff the automaton accepts nothing.
pub fn is_empty(a: &Nba) -> bool {
    accepting_lasso(a).is_none()
}

// BFS for a nonempty path from `from` to `to`, returning its symbols.
fn shortest_path(
    a: &Nba,
    adj: &[Vec<(Symbol, StateId)>],
    from: StateId,
    to: StateId,
) -> Option<Vec<Symbol>> {
    let n = a.num_states() as usize;
    let mut parent: Vec<Option<(StateId, Symbol)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    // Seed with the successors of `from` so the path is nonempty.
    for &(sym, t) in &adj[from as usize] {
        if t == to {
            return Some(vec![sym]);
        }
        if !seen[t as usize] {
            seen[t as usize] = true;
            parent[t as usize] = Some((from, sym));
            queue.push_back(t);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &(sym, t) in &adj[s as usize] {
            if t == to {
                let mut path = vec![sym];
                let mut cursor = s;
                while cursor != from {
                    let (p, psym) = parent[cursor as usize].expect("visited");
                    path.push(psym);
                    cursor = p;
                }
                path.reverse();
                return Some(path);
            }
            if !seen[t as usize] {
                seen[t as usize] = true;
                parent[t as usize] = Some((s, sym));
                queue.push_back(t);
            }
        }
    }
    None
}

/// Does the automaton accept the ultimately periodic word?
pub fn member(a: &Nba, word: &LassoWord) -> Result<bool, NbaError> {
    if a.arity() != word.arity {
        return Err(NbaError::ArityMismatch {
            left: a.arity(),
            right: word.arity,
        });
    }
    let adj = a.adjacency();

    // States reachable on the prefix.
    let mut current: Vec<bool> = vec![false; a.num_states() as usize];
    current[a.initial() as usize] = true;
    for sym in &word.prefix {
        let mut next = vec![false; a.num_states() as usize];
        for (s, _) in current.iter().enumerate().filter(|(_, &v)| v) {
            for &(edge_sym, t) in &adj[s] {
                if edge_sym == *sym {
                    next[t as usize] = true;
                }
            }
        }
        current = next;
    }

    // Product graph over (state, cycle position); node ids s * len + i.
    let len = word.cycle.len();
    let nodes = a.num_states() as usize * len;
    let mut product_adj: Vec<Vec<(Symbol, StateId)>> = vec![Vec::new(); nodes];
    for (s, edges) in adj.iter().enumerate() {
        for (i, sym) in word.cycle.iter().enumerate() {
            let from = s * len + i;
            for &(edge_sym, t) in edges {
                if edge_sym == *sym {
                    product_adj[from].push((edge_sym, (t as usize * len + (i + 1) % len) as u32));
                }
            }
        }
    }

    // Reachable product nodes from the post-prefix states at position 0.
    let mut include = vec![false; nodes];
    let mut queue = VecDeque::new();
    for (s, _) in current.iter().enumerate().filter(|(_, &v)| v) {
        let node = s * len;
        if !include[node] {
            include[node] = true;
            queue.push_back(node);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &(_, w) in &product_adj[v] {
            if !include[w as usize] {
                include[w as usize] = true;
                queue.push_back(w as usize);
            }
        }
    }

    // Accepting run exists iff some reachable SCC with a cycle contains a
    // node whose automaton state is accepting.
    let scc = scc_ids(nodes, &product_adj, &include);
    let mut scc_size = std::collections::HashMap::new();
    for &c in scc.iter().flatten() {
        *scc_size.entry(c).or_insert(0usize) += 1;
    }
    for v in 0..nodes {
        if !include[v] || !a.is_accepting((v / len) as StateId) {
            continue;
        }
        let c = scc[v].expect("included nodes have an SCC");
        if scc_size[&c] > 1 || product_adj[v].iter().any(|&(_, w)| w as usize == v) {
            return Ok(true);
        }
    }
    Ok(false)
}
