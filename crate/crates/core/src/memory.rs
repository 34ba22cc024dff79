//! Differentiable persistent memory: a continuous stack and a head-relative
//! doubly-linked list, with forward update rules and exact adjoint rules.
//!
//! Cells outside the written extent always read as -1. Updates are pure: the
//! input state is untouched and a new state is returned. Each state keeps at
//! most `cap` materialized cells per side; content pushed past the cap falls
//! off the far end, which keeps a step O(cap) and never aborts a run. Trailing
//! cells that come out exactly -1 are trimmed, so one-hot action sequences
//! reproduce the classical structures cell for cell.

use crate::{Error, Result};

/// Value read from any cell outside the written extent.
pub const EMPTY: f64 = -1.0;

pub const STACK_PUSH: usize = 0;
pub const STACK_POP: usize = 1;
pub const STACK_NOOP: usize = 2;

pub const LIST_INSERT: usize = 0;
pub const LIST_LEFT: usize = 1;
pub const LIST_RIGHT: usize = 2;
pub const LIST_NOOP: usize = 3;

pub fn stack_action_label(idx: usize) -> &'static str {
    ["PUSH", "POP", "NO-OP"][idx]
}

pub fn list_action_label(idx: usize) -> &'static str {
    ["INSERT", "LEFT", "RIGHT", "NO-OP"][idx]
}

/// Probabilities over one memory unit's action set.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDist(Vec<f64>);

impl ActionDist {
    /// Validates non-negativity and normalization to 1 +- 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "action probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "action probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ActionDist(probs))
    }

    /// Unvalidated constructor, used by gradient-check harnesses that perturb
    /// coordinates off the simplex.
    pub fn from_raw(probs: Vec<f64>) -> Self {
        ActionDist(probs)
    }

    pub fn one_hot(idx: usize, n_actions: usize) -> Self {
        let mut p = vec![0.0; n_actions];
        p[idx] = 1.0;
        ActionDist(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Stack
// ---------------------------------------------------------------------------

/// Continuous stack; index 0 is the top.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StackState {
    cells: Vec<f64>,
}

impl StackState {
    pub fn new() -> Self {
        StackState { cells: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.cells.len()
    }

    /// Cell at depth `i`; -1 past the written extent.
    pub fn get(&self, i: usize) -> f64 {
        self.cells.get(i).copied().unwrap_or(EMPTY)
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Top-most k cells, -1 filled.
    pub fn read(&self, k: usize) -> Vec<f64> {
        (0..k).map(|i| self.get(i)).collect()
    }

    /// Blended update. `a` has 2 entries (PUSH, POP) or 3 (plus NO-OP):
    ///   new[0] = a[PUSH]*v_new + a[POP]*old[1] (+ a[NO-OP]*old[0])
    ///   new[i] = a[PUSH]*old[i-1] + a[POP]*old[i+1] (+ a[NO-OP]*old[i])
    pub fn update(&self, a: &ActionDist, v_new: f64, cap: usize) -> StackState {
        let p = a.probs();
        debug_assert!(p.len() == 2 || p.len() == 3);
        let noop = p.len() == 3;
        let n_new = (self.cells.len() + 1).min(cap);
        let mut cells = Vec::with_capacity(n_new);
        for i in 0..n_new {
            let mut v = if i == 0 {
                p[STACK_PUSH] * v_new + p[STACK_POP] * self.get(1)
            } else {
                p[STACK_PUSH] * self.get(i - 1) + p[STACK_POP] * self.get(i + 1)
            };
            if noop {
                v += p[STACK_NOOP] * self.get(i);
            }
            cells.push(v);
        }
        while cells.last() == Some(&EMPTY) {
            cells.pop();
        }
        StackState { cells }
    }

    /// Exact partial derivatives of `update`. `grad_next[i]` is the loss
    /// gradient w.r.t. new cell i (cells beyond `grad_next` carry none).
    /// Returns (grad w.r.t. old cells, grad w.r.t. a, grad w.r.t. v_new).
    pub fn update_adjoint(
        &self,
        a: &ActionDist,
        v_new: f64,
        grad_next: &[f64],
    ) -> (Vec<f64>, Vec<f64>, f64) {
        let p = a.probs();
        let noop = p.len() == 3;
        let depth = self.cells.len();
        let mut g_prev = vec![0.0; depth];
        let mut g_a = vec![0.0; p.len()];
        let mut g_v = 0.0;
        for (i, &g) in grad_next.iter().enumerate() {
            if i == 0 {
                g_a[STACK_PUSH] += g * v_new;
                g_v += g * p[STACK_PUSH];
                g_a[STACK_POP] += g * self.get(1);
                if 1 < depth {
                    g_prev[1] += g * p[STACK_POP];
                }
            } else {
                g_a[STACK_PUSH] += g * self.get(i - 1);
                if i - 1 < depth {
                    g_prev[i - 1] += g * p[STACK_PUSH];
                }
                g_a[STACK_POP] += g * self.get(i + 1);
                if i + 1 < depth {
                    g_prev[i + 1] += g * p[STACK_POP];
                }
            }
            if noop {
                g_a[STACK_NOOP] += g * self.get(i);
                if i < depth {
                    g_prev[i] += g * p[STACK_NOOP];
                }
            }
        }
        (g_prev, g_a, g_v)
    }
}

// ---------------------------------------------------------------------------
// Doubly-linked list
// ---------------------------------------------------------------------------

/// Head-relative tape. Offset 0 is the cell under the head; offsets grow to
/// the right. `nonneg[r]` stores offset r, `neg[l]` stores offset -(l+1).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ListState {
    nonneg: Vec<f64>,
    neg: Vec<f64>,
}

impl ListState {
    pub fn new() -> Self {
        ListState::default()
    }

    pub fn left_extent(&self) -> usize {
        self.neg.len()
    }

    pub fn right_extent(&self) -> usize {
        self.nonneg.len()
    }

    /// Cell at a head-relative offset; -1 outside the written extent.
    pub fn get(&self, offset: i64) -> f64 {
        if offset >= 0 {
            self.nonneg.get(offset as usize).copied().unwrap_or(EMPTY)
        } else {
            self.neg.get((-offset - 1) as usize).copied().unwrap_or(EMPTY)
        }
    }

    /// Cells at offsets 0, +1, ..., +(k-1), -1 filled.
    pub fn read(&self, k: usize) -> Vec<f64> {
        (0..k as i64).map(|i| self.get(i)).collect()
    }

    /// Blended update. `a` has 3 entries (INSERT, LEFT, RIGHT) or 4 (plus
    /// NO-OP):
    ///   new[0]   = a[INSERT]*v_new    + a[LEFT]*old[-1]  + a[RIGHT]*old[+1]
    ///   new[i<0] = a[INSERT]*old[i+1] + a[LEFT]*old[i-1] + a[RIGHT]*old[i+1]
    ///   new[i>0] = a[INSERT]*old[i]   + a[LEFT]*old[i-1] + a[RIGHT]*old[i+1]
    /// each plus a[NO-OP]*old[i] when enabled.
    pub fn update(&self, a: &ActionDist, v_new: f64, cap: usize) -> ListState {
        let p = a.probs();
        debug_assert!(p.len() == 3 || p.len() == 4);
        let noop = p.len() == 4;
        let n_left = (self.neg.len() + 1).min(cap);
        let n_right = (self.nonneg.len() + 1).min(cap);
        let cell = |i: i64| -> f64 {
            let ins = match i.cmp(&0) {
                std::cmp::Ordering::Equal => v_new,
                std::cmp::Ordering::Less => self.get(i + 1),
                std::cmp::Ordering::Greater => self.get(i),
            };
            let mut v =
                p[LIST_INSERT] * ins + p[LIST_LEFT] * self.get(i - 1) + p[LIST_RIGHT] * self.get(i + 1);
            if noop {
                v += p[LIST_NOOP] * self.get(i);
            }
            v
        };
        let mut nonneg: Vec<f64> = (0..n_right as i64).map(|i| cell(i)).collect();
        let mut neg: Vec<f64> = (1..=n_left as i64).map(|l| cell(-l)).collect();
        while nonneg.last() == Some(&EMPTY) {
            nonneg.pop();
        }
        while neg.last() == Some(&EMPTY) {
            neg.pop();
        }
        ListState { nonneg, neg }
    }

    /// Exact partial derivatives of `update`; `grad_next` is shaped like the
    /// updated state. Returns (grad w.r.t. old state, grad w.r.t. a, grad
    /// w.r.t. v_new).
    pub fn update_adjoint(
        &self,
        a: &ActionDist,
        v_new: f64,
        grad_next: &ListGrad,
    ) -> (ListGrad, Vec<f64>, f64) {
        let p = a.probs();
        let noop = p.len() == 4;
        let mut g_prev = ListGrad::zeros_like(self);
        let mut g_a = vec![0.0; p.len()];
        let mut g_v = 0.0;
        let mut scatter = |offset: i64, g: f64| {
            match offset.cmp(&0) {
                std::cmp::Ordering::Equal => {
                    g_a[LIST_INSERT] += g * v_new;
                    g_v += g * p[LIST_INSERT];
                }
                std::cmp::Ordering::Less => {
                    g_a[LIST_INSERT] += g * self.get(offset + 1);
                    g_prev.add(offset + 1, g * p[LIST_INSERT], self);
                }
                std::cmp::Ordering::Greater => {
                    g_a[LIST_INSERT] += g * self.get(offset);
                    g_prev.add(offset, g * p[LIST_INSERT], self);
                }
            }
            g_a[LIST_LEFT] += g * self.get(offset - 1);
            g_prev.add(offset - 1, g * p[LIST_LEFT], self);
            g_a[LIST_RIGHT] += g * self.get(offset + 1);
            g_prev.add(offset + 1, g * p[LIST_RIGHT], self);
            if noop {
                g_a[LIST_NOOP] += g * self.get(offset);
                g_prev.add(offset, g * p[LIST_NOOP], self);
            }
        };
        for (r, &g) in grad_next.nonneg.iter().enumerate() {
            scatter(r as i64, g);
        }
        for (l, &g) in grad_next.neg.iter().enumerate() {
            scatter(-(l as i64) - 1, g);
        }
        (g_prev, g_a, g_v)
    }
}

/// Loss gradient w.r.t. a list state, aligned to its materialized extents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ListGrad {
    pub nonneg: Vec<f64>,
    pub neg: Vec<f64>,
}

impl ListGrad {
    pub fn zeros_like(state: &ListState) -> Self {
        ListGrad {
            nonneg: vec![0.0; state.nonneg.len()],
            neg: vec![0.0; state.neg.len()],
        }
    }

    /// Adds g at an offset if that cell is materialized in `state`.
    fn add(&mut self, offset: i64, g: f64, state: &ListState) {
        if offset >= 0 {
            let r = offset as usize;
            if r < state.nonneg.len() {
                self.nonneg[r] += g;
            }
        } else {
            let l = (-offset - 1) as usize;
            if l < state.neg.len() {
                self.neg[l] += g;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Unified view used by the models
// ---------------------------------------------------------------------------

/// One memory unit of either topology.
#[derive(Debug, Clone, PartialEq)]
pub enum MemoryState {
    Stack(StackState),
    List(ListState),
}

/// Gradient w.r.t. a MemoryState, matching its materialized cells.
#[derive(Debug, Clone, PartialEq)]
pub enum MemoryGrad {
    Stack(Vec<f64>),
    List(ListGrad),
}

impl MemoryState {
    pub fn read(&self, k: usize) -> Vec<f64> {
        match self {
            MemoryState::Stack(s) => s.read(k),
            MemoryState::List(l) => l.read(k),
        }
    }

    /// Cell fed to the trace display (stack top / cell under the head).
    pub fn top(&self) -> f64 {
        match self {
            MemoryState::Stack(s) => s.get(0),
            MemoryState::List(l) => l.get(0),
        }
    }

    pub fn update(&self, a: &ActionDist, v_new: f64, cap: usize) -> MemoryState {
        match self {
            MemoryState::Stack(s) => MemoryState::Stack(s.update(a, v_new, cap)),
            MemoryState::List(l) => MemoryState::List(l.update(a, v_new, cap)),
        }
    }

    pub fn update_adjoint(
        &self,
        a: &ActionDist,
        v_new: f64,
        grad_next: &MemoryGrad,
    ) -> (MemoryGrad, Vec<f64>, f64) {
        match (self, grad_next) {
            (MemoryState::Stack(s), MemoryGrad::Stack(g)) => {
                let (gp, ga, gv) = s.update_adjoint(a, v_new, g);
                (MemoryGrad::Stack(gp), ga, gv)
            }
            (MemoryState::List(l), MemoryGrad::List(g)) => {
                let (gp, ga, gv) = l.update_adjoint(a, v_new, g);
                (MemoryGrad::List(gp), ga, gv)
            }
            _ => unreachable!("memory/grad topology mismatch"),
        }
    }

    pub fn zero_grad(&self) -> MemoryGrad {
        match self {
            MemoryState::Stack(s) => MemoryGrad::Stack(vec![0.0; s.depth()]),
            MemoryState::List(l) => MemoryGrad::List(ListGrad::zeros_like(l)),
        }
    }

    /// Adds the gradient flowing through `read(k)` (cells 0..k that are
    /// materialized; -1 fills are constants and take none).
    pub fn add_read_grad(&self, grad: &mut MemoryGrad, g_read: &[f64]) {
        match (self, grad) {
            (MemoryState::Stack(s), MemoryGrad::Stack(g)) => {
                for (i, &gr) in g_read.iter().enumerate() {
                    if i < s.depth() {
                        g[i] += gr;
                    }
                }
            }
            (MemoryState::List(l), MemoryGrad::List(g)) => {
                for (i, &gr) in g_read.iter().enumerate() {
                    if i < l.nonneg.len() {
                        g.nonneg[i] += gr;
                    }
                }
            }
            _ => unreachable!("memory/grad topology mismatch"),
        }
    }
}

// ---------------------------------------------------------------------------
// Discrete reference structures
// ---------------------------------------------------------------------------

/// Classical (non-continuous) stack and tape with the same read semantics.
/// These are reference oracles: the continuous structures driven by one-hot
/// actions must match them cell for cell.
pub mod discrete {
    use super::EMPTY;

    #[derive(Debug, Clone, Default)]
    pub struct DiscreteStack {
        cells: Vec<f64>, // index 0 = top
    }

    impl DiscreteStack {
        pub fn new() -> Self {
            Self::default()
        }

        pub fn push(&mut self, v: f64) {
            self.cells.insert(0, v);
        }

        /// Popping an empty stack leaves it empty.
        pub fn pop(&mut self) {
            if !self.cells.is_empty() {
                self.cells.remove(0);
            }
        }

        pub fn noop(&mut self) {}

        pub fn get(&self, i: usize) -> f64 {
            self.cells.get(i).copied().unwrap_or(EMPTY)
        }

        pub fn cells(&self) -> &[f64] {
            &self.cells
        }
    }

    /// Exact head-relative tape transitions (the one-hot case hand-simulated
    /// on integer offsets, with no blending, trimming or caps).
    #[derive(Debug, Clone, Default)]
    pub struct DiscreteList {
        cells: std::collections::HashMap<i64, f64>,
    }

    impl DiscreteList {
        pub fn new() -> Self {
            Self::default()
        }

        /// New value under the head; the old head cell and everything left
        /// of it shift one position left, the right side stays.
        pub fn insert(&mut self, v: f64) {
            let mut next = std::collections::HashMap::with_capacity(self.cells.len() + 1);
            for (&i, &val) in &self.cells {
                next.insert(if i <= 0 { i - 1 } else { i }, val);
            }
            next.insert(0, v);
            self.cells = next;
        }

        /// Head moves left: every cell's head-relative offset grows by one.
        pub fn left(&mut self) {
            self.cells = self.cells.iter().map(|(&i, &v)| (i + 1, v)).collect();
        }

        pub fn right(&mut self) {
            self.cells = self.cells.iter().map(|(&i, &v)| (i - 1, v)).collect();
        }

        pub fn noop(&mut self) {}

        pub fn get(&self, offset: i64) -> f64 {
            self.cells.get(&offset).copied().unwrap_or(EMPTY)
        }
    }
}
