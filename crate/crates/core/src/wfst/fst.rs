use std::collections::{HashMap, VecDeque};

use super::semiring::Semiring;
use crate::error::{Error, Result};

pub type Label = u32;
pub type StateId = u32;
pub const EPSILON: Label = 0;
pub const EPSILON_SYMBOL: &str = "<eps>";

/// Symbol strings indexed by label; label 0 is always `<eps>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, Label>,
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut t = Self {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        t.add(EPSILON_SYMBOL);
        t
    }

    pub fn from_symbols<S: AsRef<str>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut t = Self::new();
        for s in symbols {
            let s = s.as_ref();
            if t.index.contains_key(s) {
                return Err(Error::invalid(format!("duplicate symbol {s:?} in symbol table")));
            }
            t.add(s);
        }
        Ok(t)
    }

    /// Adds `symbol` if absent and returns its label.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&l) = self.index.get(symbol) {
            return l;
        }
        let l = self.symbols.len() as Label;
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), l);
        l
    }

    pub fn label(&self, symbol: &str) -> Option<Label> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, label: Label) -> Option<&str> {
        self.symbols.get(label as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc<W> {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: W,
    pub next: StateId,
}

impl<W> Arc<W> {
    pub fn new(ilabel: Label, olabel: Label, weight: W, next: StateId) -> Self {
        Self {
            ilabel,
            olabel,
            weight,
            next,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct State<W> {
    arcs: Vec<Arc<W>>,
    final_weight: W,
}

/// Weighted transducer with a single start state.
#[derive(Clone, Debug, PartialEq)]
pub struct Wfst<W> {
    states: Vec<State<W>>,
    start: Option<StateId>,
    isyms: SymbolTable,
    osyms: SymbolTable,
}

impl<W: Semiring> Wfst<W> {
    pub fn new(isyms: SymbolTable, osyms: SymbolTable) -> Self {
        Self {
            states: Vec::new(),
            start: None,
            isyms,
            osyms,
        }
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(State {
            arcs: Vec::new(),
            final_weight: W::zero(),
        });
        (self.states.len() - 1) as StateId
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!((s as usize) < self.states.len(), "start state {s} does not exist");
        self.start = Some(s);
    }

    pub fn set_final(&mut self, s: StateId, weight: W) {
        self.states[s as usize].final_weight = weight;
    }

    /// Adds an arc after checking both endpoints and both labels.
    pub fn add_arc(&mut self, from: StateId, arc: Arc<W>) -> Result<()> {
        let n = self.states.len() as StateId;
        if from >= n || arc.next >= n {
            return Err(Error::Build(format!("arc {from} -> {} references a missing state", arc.next)));
        }
        if arc.ilabel as usize >= self.isyms.len() || arc.olabel as usize >= self.osyms.len() {
            return Err(Error::Build(format!(
                "arc labels {}:{} are outside the symbol tables",
                arc.ilabel, arc.olabel
            )));
        }
        self.states[from as usize].arcs.push(arc);
        Ok(())
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|s| s.arcs.len()).sum()
    }

    pub fn arcs(&self, s: StateId) -> &[Arc<W>] {
        &self.states[s as usize].arcs
    }

    pub fn final_weight(&self, s: StateId) -> W {
        self.states[s as usize].final_weight
    }

    pub fn is_final(&self, s: StateId) -> bool {
        !self.states[s as usize].final_weight.is_zero()
    }

    pub fn input_symbols(&self) -> &SymbolTable {
        &self.isyms
    }

    pub fn output_symbols(&self) -> &SymbolTable {
        &self.osyms
    }

    /// Removes states that are unreachable from the start or cannot reach a final state.
    pub fn trim(&self) -> Self {
        let n = self.states.len();
        let mut access = vec![false; n];
        if let Some(s) = self.start {
            let mut queue = VecDeque::from([s]);
            access[s as usize] = true;
            while let Some(s) = queue.pop_front() {
                for a in self.arcs(s) {
                    if !access[a.next as usize] {
                        access[a.next as usize] = true;
                        queue.push_back(a.next);
                    }
                }
            }
        }
        let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for (s, st) in self.states.iter().enumerate() {
            for a in &st.arcs {
                reverse[a.next as usize].push(s as StateId);
            }
        }
        let mut coaccess = vec![false; n];
        let mut queue: VecDeque<StateId> = (0..n as StateId).filter(|&s| self.is_final(s)).collect();
        for &s in &queue {
            coaccess[s as usize] = true;
        }
        while let Some(s) = queue.pop_front() {
            for &p in &reverse[s as usize] {
                if !coaccess[p as usize] {
                    coaccess[p as usize] = true;
                    queue.push_back(p);
                }
            }
        }
        let mut map = vec![None; n];
        let mut out = Self::new(self.isyms.clone(), self.osyms.clone());
        for s in 0..n {
            if access[s] && coaccess[s] {
                map[s] = Some(out.add_state());
            }
        }
        for s in 0..n {
            let Some(ns) = map[s] else { continue };
            out.states[ns as usize].final_weight = self.states[s].final_weight;
            for a in &self.states[s].arcs {
                if let Some(nn) = map[a.next as usize] {
                    out.states[ns as usize].arcs.push(Arc { next: nn, ..*a });
                }
            }
        }
        if let Some(s) = self.start.and_then(|s| map[s as usize]) {
            out.start = Some(s);
        }
        out
    }

    /// Every (output string, path weight) for paths whose input tape is `input`.
    ///
    /// Epsilon-input arcs are followed at most `num_states` times in a row so
    /// epsilon cycles terminate. Intended for small graphs and tests.
    pub fn paths_for_input(&self, input: &[Label]) -> Vec<(Vec<Label>, W)> {
        let mut out = Vec::new();
        if let Some(s) = self.start {
            let mut stack = Vec::new();
            self.walk(s, input, 0, W::one(), &mut stack, &mut out);
        }
        out
    }

    fn walk(
        &self,
        s: StateId,
        input: &[Label],
        eps_run: usize,
        weight: W,
        olabels: &mut Vec<Label>,
        out: &mut Vec<(Vec<Label>, W)>,
    ) {
        if input.is_empty() && self.is_final(s) {
            out.push((olabels.clone(), weight.times(self.final_weight(s))));
        }
        for a in self.arcs(s) {
            let (rest, run) = if a.ilabel == EPSILON {
                if eps_run >= self.states.len() {
                    continue;
                }
                (input, eps_run + 1)
            } else if input.first() == Some(&a.ilabel) {
                (&input[1..], 0)
            } else {
                continue;
            };
            if a.olabel != EPSILON {
                olabels.push(a.olabel);
            }
            self.walk(a.next, rest, run, weight.times(a.weight), olabels, out);
            if a.olabel != EPSILON {
                olabels.pop();
            }
        }
    }

    /// `plus` over all paths accepting `input`, grouped by output string.
    pub fn transduce(&self, input: &[Label]) -> HashMap<Vec<Label>, W> {
        let mut map: HashMap<Vec<Label>, W> = HashMap::new();
        for (o, w) in self.paths_for_input(input) {
            let e = map.entry(o).or_insert_with(W::zero);
            *e = e.plus(w);
        }
        map
    }
}

/// Linear acceptor for `labels` over `table`.
pub fn linear_acceptor<W: Semiring>(table: &SymbolTable, labels: &[Label]) -> Result<Wfst<W>> {
    let mut fst = Wfst::new(table.clone(), table.clone());
    let mut s = fst.add_state();
    fst.set_start(s);
    for &l in labels {
        let n = fst.add_state();
        fst.add_arc(s, Arc::new(l, l, W::one(), n))?;
        s = n;
    }
    fst.set_final(s, W::one());
    Ok(fst)
}

/// One-state acceptor of every string over `table`.
pub fn identity_acceptor<W: Semiring>(table: &SymbolTable) -> Wfst<W> {
    let mut fst = Wfst::new(table.clone(), table.clone());
    let s = fst.add_state();
    fst.set_start(s);
    fst.set_final(s, W::one());
    for l in 1..table.len() as Label {
        fst.add_arc(s, Arc::new(l, l, W::one(), s)).expect("labels come from the table");
    }
    fst
}
