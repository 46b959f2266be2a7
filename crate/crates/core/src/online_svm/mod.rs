//! Exact incremental/decremental linear SVM.
//!
//! Every example carries a multiplier `a_i` in `[0, C]` and a margin
//! `m_i = sum_j Q_ij a_j + y_i b - 1` with `Q_ij = y_i y_j <x_i, x_j>`.
//! Examples are partitioned into
//!
//! * `E1` (on the margin, `m_i = 0`, `0 <= a_i <= C`),
//! * `E2` (margin violators, `m_i <= 0`, `a_i = C`),
//! * `E3` (non-support vectors, `m_i >= 0`, `a_i = 0`).
//!
//! Learning a new example raises its multiplier from zero, and unlearning
//! lowers it to zero, in the largest steps that keep every other example in
//! its set and `sum_i y_i a_i = 0`. When a step would break a condition the
//! offending example migrates between sets and the walk continues.

mod linalg;
mod snapshot;

use thiserror::Error;

use linalg::{dot, invert};
pub use snapshot::{read_snapshot, write_snapshot};

/// Margins within this distance of zero count as "on the margin".
pub const MARGIN_TOL: f64 = 1e-6;
/// Ridge added to the bordered system when the margin-set features are dependent.
pub const SINGULAR_RIDGE: f64 = 1e-10;
/// Relative residual below which a feature counts as dependent on the margin set.
const INDEPENDENCE_TOL: f64 = 1e-9;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_BUDGET: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("label must be +1 or -1, got {0}")]
    BadLabel(f64),
    #[error("non-finite feature value")]
    NonFinite,
    #[error("box constraint C must be positive, got {0}")]
    BadC(f64),
    #[error("example index {index} out of range ({len} examples)")]
    Index { index: usize, len: usize },
    #[error("adiabatic update did not converge after {0} steps")]
    NoProgress(usize),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginSet {
    /// On the margin.
    E1,
    /// Bounded support vector inside the margin.
    E2,
    /// Non-support vector.
    E3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub value: f64,
}

#[derive(Debug, Clone)]
struct Example {
    x: Vec<f64>,
    y: f64,
    alpha: f64,
    /// Cached margin `m_i`.
    g: f64,
    set: MarginSet,
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    c: f64,
    dim: Option<usize>,
    examples: Vec<Example>,
    bias: f64,
    w: Vec<f64>,
    /// Indices of the `E1` members, in the order of the bordered system.
    on_margin: Vec<usize>,
    /// Inverse of `[[0, y_S^T], [y_S, Q_SS]]` over the `E1` members, row-major.
    inverse_system: Vec<f64>,
    ridge_used: bool,
}

impl Default for SvmModel {
    fn default() -> Self {
        SvmModel::new(DEFAULT_C).expect("default C is positive")
    }
}

/// What stopped an adiabatic step.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    /// The driven example finished: reached its target set or bound.
    Driven(MarginSet),
    /// A margin-set member hit a multiplier bound and leaves to the given set.
    Leaves(usize, MarginSet),
    /// An `E2`/`E3` example reached zero margin and joins `E1`.
    Joins(usize),
}

impl Event {
    fn priority(&self) -> usize {
        match *self {
            Event::Driven(_) => 0,
            Event::Leaves(i, _) | Event::Joins(i) => i + 1,
        }
    }
}

impl SvmModel {
    pub fn new(c: f64) -> Result<Self, SvmError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(SvmError::BadC(c));
        }
        Ok(SvmModel {
            c,
            dim: None,
            examples: Vec::new(),
            bias: 0.0,
            w: Vec::new(),
            on_margin: Vec::new(),
            inverse_system: vec![0.0],
            ridge_used: false,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.examples[i].alpha
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.alpha).collect()
    }

    pub fn label(&self, i: usize) -> f64 {
        self.examples[i].y
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.examples[i].x
    }

    pub fn set_of(&self, i: usize) -> MarginSet {
        self.examples[i].set
    }

    pub fn members(&self, set: MarginSet) -> Vec<usize> {
        (0..self.examples.len()).filter(|&i| self.examples[i].set == set).collect()
    }

    /// Number of support vectors, `|E1 u E2|`.
    pub fn support_count(&self) -> usize {
        self.examples.iter().filter(|e| e.set != MarginSet::E3).count()
    }

    /// True when the bordered system had to be regularized at some point.
    pub fn ridge_used(&self) -> bool {
        self.ridge_used
    }

    /// All stored labels are identical, so no positive multiplier can satisfy `sum y a = 0`.
    pub fn is_one_class(&self) -> bool {
        let mut labels = self.examples.iter().map(|e| e.y);
        match labels.next() {
            Some(first) => labels.all(|y| y == first),
            None => false,
        }
    }

    /// `w = sum_{E1 u E2} a_i y_i x_i`, recomputed from the multipliers.
    pub fn weight_vector(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim.unwrap_or(0)];
        for e in &self.examples {
            if e.set == MarginSet::E3 || e.alpha == 0.0 {
                continue;
            }
            let s = e.alpha * e.y;
            for (wk, xk) in w.iter_mut().zip(&e.x) {
                *wk += s * xk;
            }
        }
        w
    }

    pub fn predict(&self, feature: &[f64]) -> Result<f64, SvmError> {
        match self.dim {
            None => Ok(0.0),
            Some(d) if d != feature.len() => Err(SvmError::DimMismatch {
                expected: d,
                found: feature.len(),
            }),
            Some(_) => Ok(dot(&self.w, feature) + self.bias),
        }
    }

    /// Exact margin `m_i`, recomputed from the multipliers.
    pub fn margin(&self, index: usize) -> Result<Margin, SvmError> {
        let e = self.examples.get(index).ok_or(SvmError::Index {
            index,
            len: self.examples.len(),
        })?;
        let w = self.weight_vector();
        Ok(Margin {
            value: e.y * (dot(&w, &e.x) + self.bias) - 1.0,
        })
    }

    /// Dual objective `1/2 a^T Q a - sum a + b sum y a`.
    pub fn dual_objective(&self) -> f64 {
        let w = self.weight_vector();
        let balance: f64 = self.examples.iter().map(|e| e.y * e.alpha).sum();
        0.5 * dot(&w, &w) - self.examples.iter().map(|e| e.alpha).sum::<f64>() + self.bias * balance
    }

    /// Largest violation of the optimality conditions over all examples, including `|sum y a|`.
    pub fn kkt_violation(&self) -> f64 {
        let w = self.weight_vector();
        let mut worst: f64 = self.examples.iter().map(|e| e.y * e.alpha).sum::<f64>().abs();
        for e in &self.examples {
            let m = e.y * (dot(&w, &e.x) + self.bias) - 1.0;
            let v = if e.alpha <= 0.0 {
                (-m).max(0.0)
            } else if e.alpha >= self.c {
                m.max(0.0)
            } else {
                m.abs()
            };
            let bound = (-e.alpha).max(e.alpha - self.c).max(0.0);
            worst = worst.max(v).max(bound);
        }
        worst
    }

    /// Learns each `(feature, label)` in order, keeping the optimality conditions exact.
    pub fn partial_fit<F: AsRef<[f64]>>(&mut self, batch: &[(F, f64)]) -> Result<(), SvmError> {
        for (x, y) in batch {
            self.learn_one(x.as_ref(), *y)?;
        }
        Ok(())
    }

    pub fn learn_one(&mut self, x: &[f64], y: f64) -> Result<(), SvmError> {
        if y != 1.0 && y != -1.0 {
            return Err(SvmError::BadLabel(y));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite);
        }
        match self.dim {
            None => {
                self.dim = Some(x.len());
                self.w = vec![0.0; x.len()];
            }
            Some(d) if d != x.len() => {
                return Err(SvmError::DimMismatch {
                    expected: d,
                    found: x.len(),
                })
            }
            Some(_) => {}
        }

        let k = self.examples.len();
        let g = y * (dot(&self.w, x) + self.bias) - 1.0;
        self.examples.push(Example {
            x: x.to_vec(),
            y,
            alpha: 0.0,
            g,
            set: MarginSet::E3,
        });

        if g < -MARGIN_TOL {
            self.drive(k, 1.0)?;
            self.refresh();
        } else if g <= MARGIN_TOL && self.admissible_on_margin(k) {
            // Already satisfied; join the margin when that keeps the system regular.
            self.examples[k].g = 0.0;
            self.join_margin(k);
        }
        self.center_bias();
        Ok(())
    }

    /// Removes example `index`, first driving its multiplier to zero so the
    /// remaining examples keep exact optimality.
    pub fn unlearn(&mut self, index: usize) -> Result<(), SvmError> {
        if index >= self.examples.len() {
            return Err(SvmError::Index {
                index,
                len: self.examples.len(),
            });
        }
        if self.examples[index].set == MarginSet::E1 {
            self.leave_margin(index);
        }
        // Parked outside every set while it is driven.
        self.examples[index].set = MarginSet::E3;
        if self.examples[index].alpha > 0.0 {
            self.drive(index, -1.0)?;
        }
        self.examples.remove(index);
        for s in &mut self.on_margin {
            if *s > index {
                *s -= 1;
            }
        }
        if self.examples.is_empty() {
            self.bias = 0.0;
        }
        self.refresh();
        self.center_bias();
        Ok(())
    }

    /// Support vector that pruning would remove next: the largest margin,
    /// ties (within tolerance) going to the oldest example.
    pub fn prune_candidate(&self) -> Option<usize> {
        let w = self.weight_vector();
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.examples.iter().enumerate() {
            if e.set == MarginSet::E3 {
                continue;
            }
            let m = if e.set == MarginSet::E1 {
                0.0
            } else {
                e.y * (dot(&w, &e.x) + self.bias) - 1.0
            };
            match best {
                Some((_, bm)) if m <= bm + MARGIN_TOL => {}
                _ => best = Some((i, m)),
            }
        }
        best.map(|(i, _)| i)
    }

    /// Unlearns support vectors, largest margin first, until `|E1 u E2| <= budget`.
    /// Returns the number of examples removed.
    pub fn prune_to_budget(&mut self, budget: usize) -> Result<usize, SvmError> {
        let budget = budget.max(1);
        let mut removed = 0;
        while self.support_count() > budget {
            let Some(i) = self.prune_candidate() else { break };
            self.unlearn(i)?;
            removed += 1;
        }
        Ok(removed)
    }

    // ---- adiabatic machinery -------------------------------------------------

    fn q(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.examples[i], &self.examples[j]);
        a.y * b.y * dot(&a.x, &b.x)
    }

    fn scale(&self, k: usize) -> f64 {
        let e = &self.examples[k];
        1.0 + dot(&e.x, &e.x)
    }

    /// Sensitivities for a unit increase of `a_k`: `(beta_b, beta_S, u)` where
    /// `u` is the induced change of `w`.
    fn sensitivities(&self, k: usize) -> (f64, Vec<f64>, Vec<f64>) {
        let s = self.on_margin.len();
        let n = s + 1;
        let mut rhs = Vec::with_capacity(n);
        rhs.push(self.examples[k].y);
        rhs.extend(self.on_margin.iter().map(|&j| self.q(j, k)));
        let mut beta = vec![0.0; n];
        for (r, b) in beta.iter_mut().enumerate() {
            let row = &self.inverse_system[r * n..(r + 1) * n];
            *b = -dot(row, &rhs);
        }
        let ek = &self.examples[k];
        let mut u: Vec<f64> = ek.x.iter().map(|v| ek.y * v).collect();
        for (idx, &j) in self.on_margin.iter().enumerate() {
            let ej = &self.examples[j];
            let f = beta[idx + 1] * ej.y;
            if f != 0.0 {
                for (uk, xk) in u.iter_mut().zip(&ej.x) {
                    *uk += f * xk;
                }
            }
        }
        let beta_b = beta[0];
        beta.remove(0);
        (beta_b, beta, u)
    }

    /// Whether `(1, x_k)` is linearly independent of the augmented margin-set
    /// features, i.e. whether `k` can join `E1` without making the system singular.
    fn admissible_on_margin(&self, k: usize) -> bool {
        let aug = |i: usize| {
            let mut v = Vec::with_capacity(self.examples[i].x.len() + 1);
            v.push(1.0);
            v.extend_from_slice(&self.examples[i].x);
            v
        };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.on_margin.len());
        for &j in &self.on_margin {
            let mut v = aug(j);
            orthogonalize(&mut v, &basis);
            let n = dot(&v, &v).sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|a| *a /= n);
                basis.push(v);
            }
        }
        let mut v = aug(k);
        let norm = dot(&v, &v).sqrt();
        orthogonalize(&mut v, &basis);
        dot(&v, &v).sqrt() > INDEPENDENCE_TOL * norm
    }

    /// Moves `a_k` in direction `dir` (+1 learn, -1 unlearn) until it settles.
    fn drive(&mut self, k: usize, dir: f64) -> Result<(), SvmError> {
        let max_steps = 50 + 20 * self.examples.len();
        let c = self.c;
        // Examples linearly dependent on the margin set cannot join it; their
        // margins are (numerically) constant, so they are held out of the search.
        let mut frozen = vec![false; self.examples.len()];
        for _ in 0..max_steps {
            if dir < 0.0 && self.examples[k].alpha <= 1e-12 * c {
                // Rounding residue of a tie with another bound event.
                self.examples[k].alpha = 0.0;
                return Ok(());
            }
            let yk = self.examples[k].y;
            let scale = self.scale(k);
            let rate_eps = 1e-12 * scale;
            let mut best_step = f64::INFINITY;
            let mut best_event = None;
            // Near-ties go to the driven example, then to the lowest index,
            // which keeps degenerate zero-length steps from cycling.
            let consider = |step: f64, ev: Event, best_step: &mut f64, best_event: &mut Option<Event>| {
                let step = step.max(0.0);
                let tol = 1e-12 * best_step.abs().max(1.0);
                let better = match best_event {
                    None => true,
                    Some(b) if (step - *best_step).abs() <= tol => ev.priority() < b.priority(),
                    Some(_) => step < *best_step,
                };
                if better {
                    *best_step = step;
                    *best_event = Some(ev);
                }
            };

            if self.on_margin.is_empty() {
                // Only the bias can move: db = dir * y_k * t, dg_i = dir * y_k * y_i * t.
                if dir > 0.0 {
                    consider(-self.examples[k].g, Event::Driven(MarginSet::E1), &mut best_step, &mut best_event);
                }
                for (i, e) in self.examples.iter().enumerate() {
                    if i == k || frozen[i] {
                        continue;
                    }
                    let rate = dir * yk * e.y;
                    match e.set {
                        MarginSet::E2 if rate > 0.0 => consider(-e.g / rate, Event::Joins(i), &mut best_step, &mut best_event),
                        MarginSet::E3 if rate < 0.0 => consider(-e.g / rate, Event::Joins(i), &mut best_step, &mut best_event),
                        _ => {}
                    }
                }
                let Some(event) = best_event else {
                    if dir < 0.0 && self.examples[k].alpha <= 1e-6 * c {
                        // Rounding residue: no other multiplier can absorb it.
                        self.examples[k].alpha = 0.0;
                        return Ok(());
                    }
                    return Err(SvmError::NoProgress(0));
                };
                let t = best_step;
                self.bias += dir * yk * t;
                for e in &mut self.examples {
                    e.g += dir * yk * e.y * t;
                }
                match event {
                    Event::Driven(_) => {
                        self.examples[k].g = 0.0;
                        self.join_margin(k);
                        return Ok(());
                    }
                    Event::Joins(i) => {
                        self.examples[i].g = 0.0;
                        self.join_margin(i);
                    }
                    Event::Leaves(..) => unreachable!(),
                }
                continue;
            }

            let (beta_b, beta, u) = self.sensitivities(k);
            let gammas: Vec<f64> = self
                .examples
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    if e.set == MarginSet::E1 && i != k {
                        0.0
                    } else {
                        e.y * (dot(&e.x, &u) + beta_b)
                    }
                })
                .collect();

            let ak = self.examples[k].alpha;
            if dir > 0.0 {
                consider(c - ak, Event::Driven(MarginSet::E2), &mut best_step, &mut best_event);
                let gk = gammas[k];
                if gk > rate_eps {
                    consider(-self.examples[k].g / gk, Event::Driven(MarginSet::E1), &mut best_step, &mut best_event);
                }
            } else {
                consider(ak, Event::Driven(MarginSet::E3), &mut best_step, &mut best_event);
            }
            for (idx, &j) in self.on_margin.iter().enumerate() {
                let rate = dir * beta[idx];
                let aj = self.examples[j].alpha;
                if rate > 1e-12 {
                    consider((c - aj) / rate, Event::Leaves(j, MarginSet::E2), &mut best_step, &mut best_event);
                } else if rate < -1e-12 {
                    consider(-aj / rate, Event::Leaves(j, MarginSet::E3), &mut best_step, &mut best_event);
                }
            }
            for (i, e) in self.examples.iter().enumerate() {
                if i == k || frozen[i] {
                    continue;
                }
                let rate = dir * gammas[i];
                match e.set {
                    MarginSet::E2 if rate > rate_eps => consider(-e.g / rate, Event::Joins(i), &mut best_step, &mut best_event),
                    MarginSet::E3 if rate < -rate_eps => consider(-e.g / rate, Event::Joins(i), &mut best_step, &mut best_event),
                    _ => {}
                }
            }

            let event = best_event.expect("multiplier bound always limits the step");
            let step = best_step;
            if let Event::Joins(i) = event {
                if !self.admissible_on_margin(i) {
                    frozen[i] = true;
                    continue;
                }
            }
            self.examples[k].alpha += dir * step;
            for (idx, &j) in self.on_margin.iter().enumerate() {
                self.examples[j].alpha += dir * beta[idx] * step;
            }
            self.bias += dir * beta_b * step;
            for (e, gamma) in self.examples.iter_mut().zip(&gammas) {
                e.g += dir * gamma * step;
            }
            for (wk, uk) in self.w.iter_mut().zip(&u) {
                *wk += dir * step * uk;
            }

            match event {
                Event::Driven(MarginSet::E2) => {
                    self.examples[k].alpha = c;
                    self.examples[k].set = MarginSet::E2;
                    return Ok(());
                }
                Event::Driven(MarginSet::E1) => {
                    self.examples[k].g = 0.0;
                    self.join_margin(k);
                    return Ok(());
                }
                Event::Driven(MarginSet::E3) => {
                    self.examples[k].alpha = 0.0;
                    return Ok(());
                }
                Event::Leaves(j, to) => {
                    self.examples[j].alpha = if to == MarginSet::E2 { c } else { 0.0 };
                    self.leave_margin(j);
                    self.examples[j].set = to;
                    frozen.iter_mut().for_each(|f| *f = false);
                }
                Event::Joins(i) => {
                    self.examples[i].g = 0.0;
                    self.join_margin(i);
                }
            }
        }
        Err(SvmError::NoProgress(max_steps))
    }

    fn join_margin(&mut self, i: usize) {
        self.examples[i].set = MarginSet::E1;
        self.on_margin.push(i);
        self.rebuild_system();
    }

    fn leave_margin(&mut self, i: usize) {
        self.on_margin.retain(|&j| j != i);
        self.rebuild_system();
    }

    fn rebuild_system(&mut self) {
        let s = self.on_margin.len();
        let n = s + 1;
        let mut m = vec![0.0; n * n];
        let mut diag_max: f64 = 1.0;
        for (a, &i) in self.on_margin.iter().enumerate() {
            let yi = self.examples[i].y;
            m[a + 1] = yi;
            m[(a + 1) * n] = yi;
            for (b, &j) in self.on_margin.iter().enumerate() {
                m[(a + 1) * n + b + 1] = self.q(i, j);
            }
            diag_max = diag_max.max(m[(a + 1) * n + a + 1].abs());
        }
        if s == 0 {
            self.inverse_system = vec![0.0];
            return;
        }
        let min_pivot = 1e-13 * diag_max;
        self.inverse_system = match invert(m.clone(), n, min_pivot) {
            Some(inv) => inv,
            None => {
                self.ridge_used = true;
                for a in 1..n {
                    m[a * n + a] += SINGULAR_RIDGE;
                }
                invert(m, n, 0.0).expect("ridge-regularized system is invertible")
            }
        };
    }

    /// Recomputes `w` and all cached margins from the multipliers.
    /// With no example on the margin the bias is only fixed to an interval;
    /// settle on its midpoint, or on the finite end when it is one-sided.
    fn center_bias(&mut self) {
        let eps = 1e-12 * self.c;
        let bound = |a: f64| a <= eps || a >= self.c - eps;
        if self.examples.is_empty() || !self.on_margin.iter().all(|&i| bound(self.examples[i].alpha)) {
            return;
        }
        // Margin members already at a bound do not pin the bias.
        for i in std::mem::take(&mut self.on_margin) {
            let e = &mut self.examples[i];
            (e.alpha, e.set) = if e.alpha <= eps { (0.0, MarginSet::E3) } else { (self.c, MarginSet::E2) };
        }
        self.rebuild_system();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for e in &self.examples {
            let r = e.y - dot(&self.w, &e.x);
            if (e.y > 0.0) == (e.set == MarginSet::E3) {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
        self.bias = match (lo.is_finite(), hi.is_finite()) {
            (true, true) if lo <= hi => 0.5 * (lo + hi),
            (true, true) => return,
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => return,
        };
        self.refresh();
    }

    fn refresh(&mut self) {
        self.w = self.weight_vector();
        for e in &mut self.examples {
            e.g = e.y * (dot(&self.w, &e.x) + self.bias) - 1.0;
        }
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            v.iter_mut().zip(b).for_each(|(a, bb)| *a -= p * bb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(c: f64) -> SvmModel {
        let mut m = SvmModel::new(c).unwrap();
        m.partial_fit(&[(vec![1.0], 1.0), (vec![-1.0], -1.0)]).unwrap();
        m
    }

    #[test]
    fn empty_model_scores_zero() {
        let m = SvmModel::default();
        assert_eq!(m.predict(&[3.0, 4.0]).unwrap(), 0.0);
        assert!(m.weight_vector().is_empty());
        assert_eq!(m.c(), 1.0);
    }

    #[test]
    fn two_point_hard_margin() {
        let m = two_point(10.0);
        assert!((m.alpha(0) - 0.5).abs() < 1e-12);
        assert!((m.alpha(1) - 0.5).abs() < 1e-12);
        assert!(m.bias().abs() < 1e-12);
        assert!((m.weight_vector()[0] - 1.0).abs() < 1e-12);
        assert!((m.predict(&[1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.predict(&[-1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(m.margin(0).unwrap().value.abs() < 1e-12);
        assert!(m.margin(1).unwrap().value.abs() < 1e-12);
        assert_eq!(m.set_of(0), MarginSet::E1);
    }

    #[test]
    fn satisfied_point_lands_in_e3() {
        let mut m = two_point(10.0);
        let before = (m.alphas(), m.bias(), m.weight_vector());
        m.learn_one(&[3.0], 1.0).unwrap();
        assert_eq!(m.set_of(2), MarginSet::E3);
        assert_eq!(m.alpha(2), 0.0);
        assert!(m.margin(2).unwrap().value > 0.0);
        assert_eq!(&m.alphas()[..2], &before.0[..]);
        assert_eq!(m.bias(), before.1);
        assert_eq!(m.weight_vector(), before.2);
    }

    #[test]
    fn single_sv_prediction() {
        // One-dimensional check of w = sum a y x with the alphas set by hand.
        let mut m = SvmModel::new(10.0).unwrap();
        m.learn_one(&[2.0, 0.0], 1.0).unwrap();
        m.examples[0].alpha = 1.0;
        m.examples[0].set = MarginSet::E2;
        m.bias = 0.0;
        m.refresh();
        assert_eq!(m.weight_vector(), vec![2.0, 0.0]);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn e2_member_has_negative_margin() {
        let mut m = SvmModel::new(0.1).unwrap();
        m.partial_fit(&[(vec![1.0], 1.0), (vec![-1.0], -1.0), (vec![-0.5], 1.0)]).unwrap();
        assert!(m.kkt_violation() < 1e-9);
        let e2 = m.members(MarginSet::E2);
        assert!(!e2.is_empty());
        for i in e2 {
            assert!(m.margin(i).unwrap().value < 0.0);
        }
    }

    #[test]
    fn one_class_keeps_zero_multipliers() {
        let mut m = SvmModel::new(1.0).unwrap();
        m.partial_fit(&[(vec![1.0, 2.0], 1.0), (vec![0.5, 0.1], 1.0), (vec![3.0, -1.0], 1.0)]).unwrap();
        assert!(m.is_one_class());
        assert!(m.alphas().iter().all(|&a| a == 0.0));
        assert!(m.kkt_violation() < 1e-9);
    }

    #[test]
    fn input_errors() {
        let mut m = two_point(1.0);
        assert_eq!(m.learn_one(&[1.0], 0.0), Err(SvmError::BadLabel(0.0)));
        assert_eq!(
            m.learn_one(&[1.0, 2.0], 1.0),
            Err(SvmError::DimMismatch { expected: 1, found: 2 })
        );
        assert!(m.predict(&[1.0, 2.0]).is_err());
        assert!(m.margin(7).is_err());
        assert!(SvmModel::new(0.0).is_err());
    }

    #[test]
    fn duplicate_examples_stay_regular() {
        let mut m = SvmModel::new(1.0).unwrap();
        for _ in 0..3 {
            m.partial_fit(&[(vec![1.0, 0.0], 1.0), (vec![-1.0, 0.0], -1.0)]).unwrap();
        }
        assert!(m.kkt_violation() < 1e-9);
        assert!((m.weight_vector()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unlearning_restores_previous_solution() {
        let mut m = two_point(10.0);
        m.learn_one(&[0.2], -1.0).unwrap();
        assert!(m.kkt_violation() < 1e-9);
        m.unlearn(2).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.alpha(0) - 0.5).abs() < 1e-9);
        assert!((m.weight_vector()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn under_budget_prune_is_noop() {
        let mut m = two_point(10.0);
        assert_eq!(m.prune_to_budget(2).unwrap(), 0);
        assert_eq!(m.support_count(), 2);
    }

    #[test]
    fn prune_prefers_largest_margin() {
        // Overlapping classes: a bounded violator (negative margin) plus on-margin vectors.
        let mut m = SvmModel::new(0.1).unwrap();
        m.partial_fit(&[(vec![1.0], 1.0), (vec![-1.0], -1.0), (vec![-0.5], 1.0)]).unwrap();
        let cand = m.prune_candidate().unwrap();
        let cand_margin = m.margin(cand).unwrap().value;
        for i in 0..m.len() {
            if m.set_of(i) != MarginSet::E3 {
                assert!(m.margin(i).unwrap().value <= cand_margin + MARGIN_TOL);
            }
        }
        let budget = m.support_count() - 1;
        m.prune_to_budget(budget).unwrap();
        assert!(m.support_count() <= budget);
        assert!(m.kkt_violation() < 1e-9);
    }
}
