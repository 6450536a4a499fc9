//! Market matching: lowest market-clearing prices for one multi-object
//! auction of storage blocks among content blocks.
//!
//! Valuations live on an integer grid (`units × quantum`), which is what
//! makes the ascending price search terminate. When there are more contents
//! than storages the instance is padded with zero-value virtual storages.
//! All virtual storages are interchangeable and always enter or leave a
//! constricted set together, so they are represented by a single node with
//! capacity `N − M` and one shared price.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AuctionError {
    #[error("valuation matrix needs {want} entries, got {got}")]
    Shape { want: usize, got: usize },
    #[error("{contents} contents cannot fill {storages} storages")]
    TooFewContents { contents: usize, storages: usize },
    #[error("valuation at ({row}, {col}) is negative or not finite")]
    BadValue { row: usize, col: usize },
    #[error("quantification accuracy must be at least 1, got {0}")]
    BadAccuracy(f64),
}

/// Valuations of `rows` contents for `cols` storages, on a grid of `quantum`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationMatrix {
    rows: usize,
    cols: usize,
    units: Vec<i64>,
    quantum: f64,
}

impl ValuationMatrix {
    /// Integer valuations with quantum 1.
    pub fn from_units(rows: usize, cols: usize, units: Vec<i64>) -> Result<Self, AuctionError> {
        if units.len() != rows * cols {
            return Err(AuctionError::Shape { want: rows * cols, got: units.len() });
        }
        if let Some(k) = units.iter().position(|&u| u < 0) {
            return Err(AuctionError::BadValue { row: k / cols, col: k % cols });
        }
        Ok(Self { rows, cols, units, quantum: 1.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn unit(&self, row: usize, col: usize) -> i64 {
        self.units[row * self.cols + col]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.unit(row, col) as f64 * self.quantum
    }

    pub fn max_unit(&self) -> i64 {
        self.units.iter().copied().max().unwrap_or(0)
    }

    fn row(&self, n: usize) -> &[i64] {
        &self.units[n * self.cols..(n + 1) * self.cols]
    }
}

/// Rounds each value to the nearest multiple of `max / alpha`.
pub fn quantize(values: &[f64], rows: usize, cols: usize, alpha: f64) -> Result<ValuationMatrix, AuctionError> {
    if values.len() != rows * cols {
        return Err(AuctionError::Shape { want: rows * cols, got: values.len() });
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(AuctionError::BadAccuracy(alpha));
    }
    if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AuctionError::BadValue { row: k / cols.max(1), col: k % cols.max(1) });
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(ValuationMatrix { rows, cols, units: vec![0; values.len()], quantum: 0.0 });
    }
    let quantum = max / alpha;
    let units = values.iter().map(|v| libm::round(v / quantum) as i64).collect();
    Ok(ValuationMatrix { rows, cols, units, quantum })
}

/// Edges from each content to its maximum-profit storages. Storage index
/// `storages` (one past the last real storage) is the virtual node.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferredGraph {
    storages: usize,
    virtual_capacity: usize,
    edges: Vec<Vec<usize>>,
}

impl PreferredGraph {
    pub fn from_edges(storages: usize, virtual_capacity: usize, edges: Vec<Vec<usize>>) -> Self {
        Self { storages, virtual_capacity, edges }
    }

    fn build(v: &ValuationMatrix, prices: &[i64], virtual_price: i64, virtual_capacity: usize) -> (Self, Vec<i64>) {
        let mut graph = Self { storages: v.cols, virtual_capacity, edges: vec![Vec::new(); v.rows] };
        let best = (0..v.rows).map(|n| graph.refresh(v, prices, virtual_price, n)).collect();
        (graph, best)
    }

    /// Recomputes the edges of one content and returns its best profit.
    fn refresh(&mut self, v: &ValuationMatrix, prices: &[i64], virtual_price: i64, n: usize) -> i64 {
        let m = self.storages;
        let row = v.row(n);
        let mut top = if self.virtual_capacity > 0 { -virtual_price } else { i64::MIN };
        for s in 0..m {
            top = top.max(row[s] - prices[s]);
        }
        // real storages first, the virtual node last
        let e = &mut self.edges[n];
        e.clear();
        e.extend((0..m).filter(|&s| row[s] - prices[s] == top));
        if self.virtual_capacity > 0 && -virtual_price == top {
            e.push(m);
        }
        top
    }

    pub fn contents(&self) -> usize {
        self.edges.len()
    }

    pub fn storages(&self) -> usize {
        self.storages
    }

    pub fn virtual_node(&self) -> usize {
        self.storages
    }

    pub fn preferred(&self, content: usize) -> &[usize] {
        &self.edges[content]
    }

    pub fn has_edge(&self, content: usize, storage: usize) -> bool {
        self.edges[content].contains(&storage)
    }

    fn capacity(&self, storage: usize) -> usize {
        if storage == self.storages {
            self.virtual_capacity
        } else {
            1
        }
    }
}

/// A matching between contents and storages of a [`PreferredGraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    of_content: Vec<Option<usize>>,
    // contents held by each storage node, ascending
    holders: Vec<Vec<usize>>,
}

impl Matching {
    pub fn empty(contents: usize, storages: usize) -> Self {
        Self { of_content: vec![None; contents], holders: vec![Vec::new(); storages + 1] }
    }

    pub fn storage_of(&self, content: usize) -> Option<usize> {
        self.of_content[content]
    }

    pub fn size(&self) -> usize {
        self.of_content.iter().flatten().count()
    }

    fn assign(&mut self, content: usize, storage: Option<usize>) {
        if let Some(old) = self.of_content[content] {
            let list = &mut self.holders[old];
            if let Ok(k) = list.binary_search(&content) {
                list.remove(k);
            }
        }
        if let Some(s) = storage {
            let list = &mut self.holders[s];
            if let Err(k) = list.binary_search(&content) {
                list.insert(k, content);
            }
        }
        self.of_content[content] = storage;
    }
}

/// Contents whose preferred storages are too few to serve them all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrictedSet {
    pub contents: Vec<usize>,
    pub storages: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchStep {
    Perfect,
    Augmented,
    Constricted(ConstrictedSet),
}

/// Grows `matching` by one augmenting path from the lowest unmatched
/// content, or reports the alternating-tree node sets when none exists.
pub fn augment_or_constrict(graph: &PreferredGraph, matching: &mut Matching) -> MatchStep {
    let Some(root) = matching.of_content.iter().position(Option::is_none) else {
        return MatchStep::Perfect;
    };
    let nodes = graph.storages + 1;
    let mut reached_from: Vec<Option<usize>> = vec![None; nodes];
    let mut seen_content = vec![false; graph.contents()];
    let mut queue = VecDeque::new();
    seen_content[root] = true;
    queue.push_back(root);
    let mut contents = vec![root];
    let mut storages = Vec::new();

    while let Some(c) = queue.pop_front() {
        for &s in graph.preferred(c) {
            if reached_from[s].is_some() {
                continue;
            }
            reached_from[s] = Some(c);
            storages.push(s);
            if matching.holders[s].len() < graph.capacity(s) {
                flip_path(matching, &reached_from, s, root);
                return MatchStep::Augmented;
            }
            for &other in &matching.holders[s] {
                if !seen_content[other] {
                    seen_content[other] = true;
                    contents.push(other);
                    queue.push_back(other);
                }
            }
        }
    }
    contents.sort_unstable();
    storages.sort_unstable();
    MatchStep::Constricted(ConstrictedSet { contents, storages })
}

fn flip_path(matching: &mut Matching, reached_from: &[Option<usize>], free: usize, root: usize) {
    let mut s = free;
    loop {
        let c = reached_from[s].expect("storage on the tree has a parent");
        let previous = matching.of_content[c];
        matching.assign(c, Some(s));
        if c == root {
            break;
        }
        s = previous.expect("non-root tree content is matched");
    }
}

/// One price raise of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub contents: usize,
    pub storages: usize,
    pub delta_units: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    /// Real storage won by each content; `None` means a virtual storage.
    pub assignment: Vec<Option<usize>>,
    pub price_units: Vec<i64>,
    pub virtual_price_units: i64,
    pub quantum: f64,
    /// Number of preferred-graph constructions.
    pub iterations: usize,
    pub welfare_units: i64,
    pub trace: Vec<TraceStep>,
}

impl MatchingResult {
    pub fn prices(&self) -> Vec<f64> {
        self.price_units.iter().map(|&p| p as f64 * self.quantum).collect()
    }

    pub fn welfare(&self) -> f64 {
        self.welfare_units as f64 * self.quantum
    }

    /// Winner of each real storage.
    pub fn owners(&self, storages: usize) -> Vec<Option<usize>> {
        let mut owners = vec![None; storages];
        for (n, s) in self.assignment.iter().enumerate() {
            if let Some(s) = *s {
                owners[s] = Some(n);
            }
        }
        owners
    }
}

pub fn market_match(v: &ValuationMatrix) -> Result<MatchingResult, AuctionError> {
    run(v, false)
}

/// As [`market_match`], also recording every price raise.
pub fn market_match_traced(v: &ValuationMatrix) -> Result<MatchingResult, AuctionError> {
    run(v, true)
}

fn run(v: &ValuationMatrix, trace: bool) -> Result<MatchingResult, AuctionError> {
    let (n, m) = (v.rows, v.cols);
    if n < m {
        return Err(AuctionError::TooFewContents { contents: n, storages: m });
    }
    let virtual_capacity = n - m;
    let mut prices = vec![0i64; m];
    let mut virtual_price = 0i64;
    let mut matching = Matching::empty(n, m);
    let mut steps = Vec::new();
    let mut iterations = 0;

    let (mut graph, mut best) = PreferredGraph::build(v, &prices, virtual_price, virtual_capacity);
    let mut stale: Vec<usize> = Vec::new();
    let mut rescan: Vec<usize> = Vec::new();
    loop {
        iterations += 1;
        // keep the matched edges that are still preferred
        for &c in &stale {
            if let Some(s) = matching.of_content[c] {
                if !graph.has_edge(c, s) {
                    matching.assign(c, None);
                }
            }
        }
        let constricted = loop {
            match augment_or_constrict(&graph, &mut matching) {
                MatchStep::Augmented => continue,
                MatchStep::Perfect => break None,
                MatchStep::Constricted(set) => break Some(set),
            }
        };
        let Some(set) = constricted else {
            break;
        };

        let mut in_set = vec![false; m + 1];
        for &s in &set.storages {
            in_set[s] = true;
        }
        let mut delta = i64::MAX;
        for &c in &set.contents {
            let row = v.row(c);
            for s in (0..m).filter(|&s| !in_set[s]) {
                delta = delta.min(best[c] - (row[s] - prices[s]));
            }
            if virtual_capacity > 0 && !in_set[m] {
                delta = delta.min(best[c] + virtual_price);
            }
        }
        debug_assert!(delta > 0 && delta < i64::MAX, "constricted set must be escapable");
        for &s in &set.storages {
            if s == m {
                virtual_price += delta;
            } else {
                prices[s] += delta;
            }
        }
        // only contents preferring a raised storage see a different graph;
        // those that also prefer an unraised one just lose the raised edges
        stale.clear();
        rescan.clear();
        for c in 0..n {
            let edges = &mut graph.edges[c];
            if edges.iter().any(|&s| in_set[s]) {
                stale.push(c);
                if edges.iter().all(|&s| in_set[s]) {
                    rescan.push(c);
                } else {
                    edges.retain(|&s| !in_set[s]);
                }
            }
        }
        let floor = prices.iter().copied().chain((virtual_capacity > 0).then_some(virtual_price)).min().unwrap_or(0);
        if floor > 0 {
            prices.iter_mut().for_each(|p| *p -= floor);
            virtual_price -= floor;
            best.iter_mut().for_each(|b| *b += floor);
        }
        for &c in &rescan {
            best[c] = graph.refresh(v, &prices, virtual_price, c);
        }
        if trace {
            steps.push(TraceStep { contents: set.contents.len(), storages: set.storages.len(), delta_units: delta });
        }
    }

    let assignment: Vec<Option<usize>> = matching.of_content.iter().map(|s| s.filter(|&s| s < m)).collect();
    let welfare_units = assignment.iter().enumerate().filter_map(|(c, s)| s.map(|s| v.unit(c, s))).sum();
    Ok(MatchingResult {
        assignment,
        price_units: prices,
        virtual_price_units: virtual_price,
        quantum: v.quantum,
        iterations,
        welfare_units,
        trace: steps,
    })
}
