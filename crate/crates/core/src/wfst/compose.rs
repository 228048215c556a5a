//! Composition with the three-state epsilon-matching filter.
//!
//! Filter state 0 allows every move; after the left machine moves alone on an
//! epsilon output (state 2) the right machine may not move alone until the next
//! match, and vice versa (state 1). This keeps exactly one composed path per
//! pair of matching paths.

use std::collections::{HashMap, VecDeque};

use super::fst::{Arc, StateId, Wfst, EPSILON};
use super::semiring::Semiring;
use crate::error::{Error, Result};

type Triple = (StateId, StateId, u8);

pub fn compose<W: Semiring>(a: &Wfst<W>, b: &Wfst<W>) -> Result<Wfst<W>> {
    if a.output_symbols() != b.input_symbols() {
        return Err(Error::Composition(
            "left output symbols differ from right input symbols".into(),
        ));
    }
    let mut out = Wfst::new(a.input_symbols().clone(), b.output_symbols().clone());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(out);
    };
    let mut ids: HashMap<Triple, StateId> = HashMap::new();
    let mut queue: VecDeque<Triple> = VecDeque::new();
    let mut intern = |t: Triple, out: &mut Wfst<W>, queue: &mut VecDeque<Triple>| -> StateId {
        *ids.entry(t).or_insert_with(|| {
            queue.push_back(t);
            out.add_state()
        })
    };
    let start = intern((sa, sb, 0), &mut out, &mut queue);
    out.set_start(start);

    while let Some(t @ (qa, qb, f)) = queue.pop_front() {
        let from = intern(t, &mut out, &mut queue);
        let fw = a.final_weight(qa).times(b.final_weight(qb));
        if !fw.is_zero() {
            out.set_final(from, fw);
        }
        let mut arcs = Vec::new();
        for ea in a.arcs(qa) {
            if ea.olabel == EPSILON {
                // left moves alone
                if f != 1 {
                    arcs.push((Arc::new(ea.ilabel, EPSILON, ea.weight, 0), (ea.next, qb, 2)));
                }
                continue;
            }
            for eb in b.arcs(qb) {
                if eb.ilabel == ea.olabel {
                    arcs.push((
                        Arc::new(ea.ilabel, eb.olabel, ea.weight.times(eb.weight), 0),
                        (ea.next, eb.next, 0),
                    ));
                }
            }
        }
        for eb in b.arcs(qb) {
            if eb.ilabel != EPSILON {
                continue;
            }
            // right moves alone
            if f != 2 {
                arcs.push((Arc::new(EPSILON, eb.olabel, eb.weight, 0), (qa, eb.next, 1)));
            }
            // both move on epsilon together
            if f == 0 {
                for ea in a.arcs(qa).iter().filter(|e| e.olabel == EPSILON) {
                    arcs.push((
                        Arc::new(ea.ilabel, eb.olabel, ea.weight.times(eb.weight), 0),
                        (ea.next, eb.next, 0),
                    ));
                }
            }
        }
        for (arc, target) in arcs {
            let next = intern(target, &mut out, &mut queue);
            out.add_arc(from, Arc { next, ..arc })?;
        }
    }
    Ok(out.trim())
}
