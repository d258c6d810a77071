//! Automaton combinators: boolean operations, track surgery, relational
//! composition, and language-preserving trimming.
//!
//! Intersections (and the intersection buried inside composition) use the
//! standard two-phase flag product, so they are correct for arbitrary
//! Buchi automata, not just the forward-closed ones produced by the
//! constraint machines. Everything explores reachable states only, breadth
//! first, so state numbering is deterministic.

use super::{Nba, NbaBuilder, NbaError, StateId};
use crate::words::{all_symbols, Symbol};
use std::collections::{HashMap, VecDeque};

/// Which factor the intersection flag is waiting on.
const WAIT_LEFT: u8 = 1;
const WAIT_RIGHT: u8 = 2;

fn flag_step(
    left_accepting: bool,
    right_accepting: bool,
    flag: u8,
) -> u8 {
    match flag {
        WAIT_LEFT if left_accepting => WAIT_RIGHT,
        WAIT_RIGHT if right_accepting => WAIT_LEFT,
        f => f,
    }
}

/// `L(A) intersect L(B)` via the two-phase product.
pub fn intersection(a: &Nba, b: &Nba) -> Result<Nba, NbaError> {
    if a.arity() != b.arity() {
        return Err(NbaError::ArityMismatch {
            left: a.arity(),
            right: b.arity(),
        });
    }
    let a_adj = a.adjacency();
    let mut b_index: Vec<HashMap<u64, Vec<StateId>>> = vec![HashMap::new(); b.num_states() as usize];
    for &(f, s, t) in b.transitions() {
        b_index[f as usize].entry(s.raw()).or_default().push(t);
    }

    let mut builder: NbaBuilder<(StateId, StateId, u8)> = NbaBuilder::new(a.arity());
    let (init, _) = builder.intern((a.initial(), b.initial(), WAIT_LEFT));
    let mut queue = VecDeque::from([init]);
    while let Some(id) = queue.pop_front() {
        let (qa, qb, flag) = *builder.key(id);
        builder.set_accepting(id, flag == WAIT_RIGHT && b.is_accepting(qb));
        let next_flag = flag_step(a.is_accepting(qa), b.is_accepting(qb), flag);
        for &(sym, ta) in &a_adj[qa as usize] {
            if let Some(tbs) = b_index[qb as usize].get(&sym.raw()) {
                for &tb in tbs {
                    let (next, is_new) = builder.intern((ta, tb, next_flag));
                    builder.add_edge(id, sym, next);
                    if is_new {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Ok(reduce(&builder.finish(init)))
}

/// `L(A) union L(B)`: disjoint copies behind a fresh initial state.
pub fn union(a: &Nba, b: &Nba) -> Result<Nba, NbaError> {
    if a.arity() != b.arity() {
        return Err(NbaError::ArityMismatch {
            left: a.arity(),
            right: b.arity(),
        });
    }
    let offset_a = 1u32;
    let offset_b = 1 + a.num_states();
    let num_states = 1 + a.num_states() + b.num_states();
    let mut accepting = vec![false; num_states as usize];
    for s in a.accepting_states() {
        accepting[(offset_a + s) as usize] = true;
    }
    for s in b.accepting_states() {
        accepting[(offset_b + s) as usize] = true;
    }
    let mut transitions = Vec::with_capacity(a.num_transitions() + b.num_transitions());
    for &(f, s, t) in a.transitions() {
        transitions.push((offset_a + f, s, offset_a + t));
        if f == a.initial() {
            transitions.push((0, s, offset_a + t));
        }
    }
    for &(f, s, t) in b.transitions() {
        transitions.push((offset_b + f, s, offset_b + t));
        if f == b.initial() {
            transitions.push((0, s, offset_b + t));
        }
    }
    Ok(trim(&Nba::new(a.arity(), num_states, 0, accepting, transitions)))
}

/// Insert unconstrained tracks at the given positions of the result. The
/// inserted tracks range over the full alphabet; callers re-impose
/// well-formedness by intersecting with `build_wff` where it matters.
pub fn cylindrify(a: &Nba, positions: &[usize]) -> Result<Nba, NbaError> {
    let new_arity = a.arity() + positions.len();
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != positions.len() || sorted.iter().any(|&p| p >= new_arity) {
        return Err(NbaError::BadTracks(format!(
            "cannot insert tracks at {positions:?}"
        )));
    }
    // Where each old track lands in the widened symbol.
    let mut old_slots = Vec::with_capacity(a.arity());
    let mut fill_slots = Vec::with_capacity(sorted.len());
    {
        let mut next_old = 0;
        for slot in 0..new_arity {
            if sorted.contains(&slot) {
                fill_slots.push(slot);
            } else {
                old_slots.push(slot);
                next_old += 1;
            }
        }
        debug_assert_eq!(next_old, a.arity());
    }
    let fillers = all_symbols(sorted.len());
    let mut transitions = Vec::with_capacity(a.num_transitions() * fillers.len());
    for &(f, sym, t) in a.transitions() {
        let old_glyphs = sym.glyphs(a.arity());
        for filler in &fillers {
            let mut glyphs = vec![crate::words::Glyph::Zero; new_arity];
            for (i, g) in old_glyphs.iter().enumerate() {
                glyphs[old_slots[i]] = *g;
            }
            for (i, &slot) in fill_slots.iter().enumerate() {
                glyphs[slot] = filler.track(i);
            }
            transitions.push((f, Symbol::from_glyphs(&glyphs), t));
        }
    }
    let accepting = (0..a.num_states()).map(|s| a.is_accepting(s)).collect();
    Ok(Nba::new(
        new_arity,
        a.num_states(),
        a.initial(),
        accepting,
        transitions,
    ))
}

/// Erase all tracks except `keep` (result tracks appear in the listed
/// order). Nondeterminism realizes the existential quantification.
pub fn project(a: &Nba, keep: &[usize]) -> Result<Nba, NbaError> {
    if keep.is_empty() || keep.iter().any(|&t| t >= a.arity()) {
        return Err(NbaError::BadTracks(format!(
            "cannot keep tracks {keep:?} of arity {}",
            a.arity()
        )));
    }
    let transitions = a
        .transitions()
        .iter()
        .map(|&(f, sym, t)| (f, sym.select(keep), t))
        .collect();
    let accepting = (0..a.num_states()).map(|s| a.is_accepting(s)).collect();
    Ok(Nba::new(
        keep.len(),
        a.num_states(),
        a.initial(),
        accepting,
        transitions,
    ))
}

/// Duplicate the first `n` tracks: `(u, v) -> (u, u, v)`. This is the
/// "also copies its input" transformation for graph automata.
pub fn duplicate_tracks(a: &Nba, n: usize) -> Result<Nba, NbaError> {
    if n > a.arity() {
        return Err(NbaError::BadTracks(format!(
            "cannot duplicate {n} of {} tracks",
            a.arity()
        )));
    }
    let transitions = a
        .transitions()
        .iter()
        .map(|&(f, sym, t)| {
            let mut glyphs = sym.glyphs(a.arity());
            let copied: Vec<_> = glyphs[..n].to_vec();
            glyphs.splice(n..n, copied);
            (f, Symbol::from_glyphs(&glyphs), t)
        })
        .collect();
    let accepting = (0..a.num_states()).map(|s| a.is_accepting(s)).collect();
    Ok(Nba::new(
        a.arity() + n,
        a.num_states(),
        a.initial(),
        accepting,
        transitions,
    ))
}

/// Relational composition: `A` over `Sigma^(k1+k)` and `B` over
/// `Sigma^(k+k2)` yield the automaton over `Sigma^(k1+k2)` accepting
/// `(u, w)` iff some `v` has `(u, v) in L(A)` and `(v, w) in L(B)`.
///
/// Implemented as a fused join: the product runs both automata on a shared
/// middle word and projects it away on the fly, so the intermediate arity
/// never materializes. Both inputs must only accept well-formed words
/// (every constructor here guarantees that), which makes the output
/// well-formed without an extra product.
pub fn compose(a: &Nba, k: usize, b: &Nba) -> Result<Nba, NbaError> {
    if a.arity() < k || b.arity() < k {
        return Err(NbaError::ArityMismatch {
            left: a.arity(),
            right: b.arity(),
        });
    }
    let k1 = a.arity() - k;
    let k2 = b.arity() - k;
    let front: Vec<usize> = (0..k1).collect();
    let mid_a: Vec<usize> = (k1..k1 + k).collect();
    let mid_b: Vec<usize> = (0..k).collect();
    let back_b: Vec<usize> = (k..k + k2).collect();

    let a_adj = a.adjacency();
    // B edges indexed by (state, middle symbol).
    let mut b_index: HashMap<(StateId, u64), Vec<(Symbol, StateId)>> = HashMap::new();
    for &(f, sym, t) in b.transitions() {
        b_index
            .entry((f, sym.select(&mid_b).raw()))
            .or_default()
            .push((sym.select(&back_b), t));
    }

    let mut builder: NbaBuilder<(StateId, StateId, u8)> = NbaBuilder::new(k1 + k2);
    let (init, _) = builder.intern((a.initial(), b.initial(), WAIT_LEFT));
    let mut queue = VecDeque::from([init]);
    while let Some(id) = queue.pop_front() {
        let (qa, qb, flag) = *builder.key(id);
        builder.set_accepting(id, flag == WAIT_RIGHT && b.is_accepting(qb));
        let next_flag = flag_step(a.is_accepting(qa), b.is_accepting(qb), flag);
        for &(sym, ta) in &a_adj[qa as usize] {
            let mid = sym.select(&mid_a);
            let u = sym.select(&front);
            if let Some(edges) = b_index.get(&(qb, mid.raw())) {
                for &(w, tb) in edges {
                    let (next, is_new) = builder.intern((ta, tb, next_flag));
                    builder.add_edge(id, u.concat(k1, w, k2), next);
                    if is_new {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Ok(reduce(&builder.finish(init)))
}

/// Trim, then quotient by direct bisimulation: states are merged when they
/// agree on acceptance and, recursively, on their successor classes per
/// symbol. Coarsest-partition refinement; the language is preserved (blocks
/// are acceptance-uniform and runs lift through the quotient both ways).
/// Composition products leave large amounts of this redundancy behind, so
/// every relation-building pipeline runs through here.
pub fn reduce(a: &Nba) -> Nba {
    let a = trim(a);
    let n = a.num_states() as usize;
    if n <= 1 {
        return a;
    }
    let adj = a.adjacency();
    // Start from the acceptance partition and refine to stability.
    let mut class: Vec<u32> = (0..n).map(|s| a.is_accepting(s as StateId) as u32).collect();
    let mut num_classes = 2u32;
    loop {
        let mut keys: HashMap<(u32, Vec<(u64, u32)>), u32> = HashMap::new();
        let mut next: Vec<u32> = Vec::with_capacity(n);
        for s in 0..n {
            let mut signature: Vec<(u64, u32)> = adj[s]
                .iter()
                .map(|&(sym, t)| (sym.raw(), class[t as usize]))
                .collect();
            signature.sort_unstable();
            signature.dedup();
            let fresh = keys.len() as u32;
            let id = *keys.entry((class[s], signature)).or_insert(fresh);
            next.push(id);
        }
        let refined = keys.len() as u32;
        class = next;
        if refined == num_classes {
            break;
        }
        num_classes = refined;
    }
    // Renumber classes in first-seen state order for determinism.
    let mut renumber: HashMap<u32, u32> = HashMap::new();
    let mut order: Vec<u32> = Vec::with_capacity(num_classes as usize);
    for &c in &class {
        renumber.entry(c).or_insert_with(|| {
            order.push(c);
            (order.len() - 1) as u32
        });
    }
    let class: Vec<u32> = class.iter().map(|c| renumber[c]).collect();
    let mut accepting = vec![false; num_classes as usize];
    for s in 0..n {
        if a.is_accepting(s as StateId) {
            accepting[class[s] as usize] = true;
        }
    }
    let transitions = a
        .transitions()
        .iter()
        .map(|&(f, sym, t)| (class[f as usize], sym, class[t as usize]))
        .collect();
    Nba::new(
        a.arity(),
        num_classes,
        class[a.initial() as usize],
        accepting,
        transitions,
    )
}

/// Remove states that are unreachable or cannot reach an accepting cycle.
/// The language is preserved; applying `trim` twice is a fixed point.
pub fn trim(a: &Nba) -> Nba {
    let n = a.num_states() as usize;
    let adj = a.adjacency();

    // Forward reachability.
    let mut reachable = vec![false; n];
    let mut queue = VecDeque::from([a.initial()]);
    reachable[a.initial() as usize] = true;
    while let Some(s) = queue.pop_front() {
        for &(_, t) in &adj[s as usize] {
            if !reachable[t as usize] {
                reachable[t as usize] = true;
                queue.push_back(t);
            }
        }
    }

    // Accepting states on a (reachable) cycle, via SCCs of the reachable
    // subgraph.
    let scc = scc_ids(n, &adj, &reachable);
    let mut scc_size = HashMap::new();
    for &c in scc.iter().flatten() {
        *scc_size.entry(c).or_insert(0usize) += 1;
    }
    let mut cycle_accepting = vec![false; n];
    for s in 0..n {
        if !reachable[s] || !a.is_accepting(s as StateId) {
            continue;
        }
        let c = scc[s].expect("reachable states have an SCC id");
        let big = scc_size[&c] > 1;
        let self_loop = adj[s].iter().any(|&(_, t)| t as usize == s);
        if big || self_loop {
            cycle_accepting[s] = true;
        }
    }

    // Backward reachability from cycle-capable accepting states.
    let mut reverse = vec![Vec::new(); n];
    for &(f, _, t) in a.transitions() {
        if reachable[f as usize] && reachable[t as usize] {
            reverse[t as usize].push(f);
        }
    }
    let mut live = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| cycle_accepting[s]).collect();
    for &s in &queue {
        live[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &reverse[s] {
            if !live[p as usize] {
                live[p as usize] = true;
                queue.push_back(p as usize);
            }
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&s| reachable[s] && live[s]).collect();
    if !keep.contains(&(a.initial() as usize)) {
        return Nba::empty_language(a.arity());
    }
    let mut renumber = vec![u32::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        renumber[old] = new as u32;
    }
    let accepting = keep.iter().map(|&s| a.is_accepting(s as StateId)).collect();
    let transitions = a
        .transitions()
        .iter()
        .filter(|&&(f, _, t)| renumber[f as usize] != u32::MAX && renumber[t as usize] != u32::MAX)
        .map(|&(f, s, t)| (renumber[f as usize], s, renumber[t as usize]))
        .collect();
    Nba::new(
        a.arity(),
        keep.len() as u32,
        renumber[a.initial() as usize],
        accepting,
        transitions,
    )
}

/// Iterative Tarjan over the states marked true, yielding SCC ids.
pub(crate) fn scc_ids(
    n: usize,
    adj: &[Vec<(Symbol, StateId)>],
    include: &[bool],
) -> Vec<Option<u32>> {
    #[derive(Clone)]
    struct NodeData {
        index: u32,
        lowlink: u32,
        on_stack: bool,
    }
    let mut data: Vec<Option<NodeData>> = vec![None; n];
    let mut scc: Vec<Option<u32>> = vec![None; n];
    let mut counter = 0u32;
    let mut next_scc = 0u32;
    let mut stack: Vec<usize> = Vec::new();

    // Explicit DFS: (node, edge cursor).
    for root in 0..n {
        if !include[root] || data[root].is_some() {
            continue;
        }
        let mut call_stack: Vec<(usize, usize)> = vec![(root, 0)];
        data[root] = Some(NodeData {
            index: counter,
            lowlink: counter,
            on_stack: true,
        });
        counter += 1;
        stack.push(root);
        while let Some(&(v, cursor)) = call_stack.last() {
            if cursor < adj[v].len() {
                call_stack.last_mut().expect("nonempty").1 += 1;
                let w = adj[v][cursor].1 as usize;
                if !include[w] {
                    continue;
                }
                match &data[w] {
                    None => {
                        data[w] = Some(NodeData {
                            index: counter,
                            lowlink: counter,
                            on_stack: true,
                        });
                        counter += 1;
                        stack.push(w);
                        call_stack.push((w, 0));
                    }
                    Some(wd) if wd.on_stack => {
                        let wi = wd.index;
                        let vd = data[v].as_mut().expect("visited");
                        vd.lowlink = vd.lowlink.min(wi);
                    }
                    Some(_) => {}
                }
            } else {
                call_stack.pop();
                let vd = data[v].as_ref().expect("visited").clone();
                if vd.lowlink == vd.index {
                    loop {
                        let w = stack.pop().expect("stack nonempty");
                        data[w].as_mut().expect("visited").on_stack = false;
                        scc[w] = Some(next_scc);
                        if w == v {
                            break;
                        }
                    }
                    next_scc += 1;
                }
                if let Some(&(parent, _)) = call_stack.last() {
                    let low = data[v].as_ref().expect("visited").lowlink;
                    let pd = data[parent].as_mut().expect("visited");
                    pd.lowlink = pd.lowlink.min(low);
                }
            }
        }
    }
    scc
}
