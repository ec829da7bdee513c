//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! Training solves the box-constrained dual QP by sequential minimal
//! optimization over the (alpha, alpha*) pairs: pick the maximal-violating
//! variable pair, solve the two-variable subproblem analytically, clip to
//! the box, repeat until the KKT gap closes. Kernel rows are computed on
//! demand through a bounded LRU cache so memory stays linear in the number
//! of rows actually touched.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{rbf_unchecked, KernelError};
use crate::linalg::Matrix;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum SvrError<T: Real> {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("iteration budget exhausted before reaching tolerance; best iterate attached")]
    MaxIterationsExceeded { best: Box<SvrModel<T>> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file format: {0}")]
    Format(String),
}

/// Solver settings. `max_passes` bounds the optimization effort: up to
/// `max_passes * n` accepted pair updates before the trainer gives up.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrHyperparams<T> {
    /// Regularization weight; caps every |beta_i|.
    pub c: T,
    /// Half-width of the insensitive tube around the targets.
    pub epsilon: T,
    /// RBF kernel width.
    pub sigma: T,
    /// KKT gap at which optimization stops.
    pub tol: T,
    pub max_passes: usize,
}

impl<T: Real> SvrHyperparams<T> {
    /// Defaults sized for standardized features and targets on a dataset of
    /// `n` rows.
    pub fn defaults_for(n: usize) -> Self {
        Self {
            c: real(10.0),
            epsilon: real(0.01),
            sigma: T::one(),
            tol: real(1e-6),
            max_passes: 10 * n.max(1),
        }
    }

    pub fn validate(&self) -> Result<(), SvrError<T>> {
        let bad = |msg: &str| Err(SvrError::InvalidHyperparams(msg.to_string()));
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return bad("c must be strictly positive");
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return bad("epsilon must be non-negative");
        }
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return bad("sigma must be strictly positive");
        }
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return bad("tol must lie in (0, 1)");
        }
        if self.max_passes < 1 {
            return bad("max_passes must be at least 1");
        }
        Ok(())
    }
}

/// Trained regressor for one output coordinate: a kernel expansion over the
/// support vectors plus a bias. Rows with a zero dual coefficient are pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel<T> {
    pub support_vectors: Matrix<T>,
    /// Dual coefficient per support vector; |beta_i| <= c, sum = 0 together
    /// with the pruned zeros.
    pub beta: Vec<T>,
    pub bias: T,
    pub hyperparams: SvrHyperparams<T>,
}

impl<T: Real> SvrModel<T> {
    /// Kernel-expansion prediction in standardized target units.
    pub fn predict(&self, x: &[T]) -> Result<T, SvrError<T>> {
        if x.len() != self.support_vectors.cols() {
            return Err(SvrError::DimensionMismatch {
                expected: self.support_vectors.cols(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SvrError::NonFiniteInput);
        }
        let mut acc = self.bias;
        for (i, &b) in self.beta.iter().enumerate() {
            acc += b * rbf_unchecked(self.support_vectors.row(i), x, self.hyperparams.sigma);
        }
        Ok(acc)
    }

    pub fn predict_batch(&self, x: &Matrix<T>) -> Result<Vec<T>, SvrError<T>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

/// One model per output coordinate, trained on the same inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrPair<T> {
    pub lat_model: SvrModel<T>,
    pub lon_model: SvrModel<T>,
}

impl<T: Real> SvrPair<T> {
    pub fn predict(&self, x: &[T]) -> Result<(T, T), SvrError<T>> {
        Ok((self.lat_model.predict(x)?, self.lon_model.predict(x)?))
    }
}

/// Dual objective in the beta = alpha - alpha* parameterization:
/// `-1/2 beta' K beta - epsilon * sum |beta_i| + y' beta`. Shared by the
/// solver's final score and by exhaustive-search oracles so both sides rank
/// candidates identically.
pub fn dual_objective<T: Real>(
    beta: &[T],
    y: &[T],
    gram: &Matrix<T>,
    epsilon: T,
) -> Result<T, SvrError<T>> {
    let n = beta.len();
    if y.len() != n {
        return Err(SvrError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if gram.rows() != n || gram.cols() != n {
        return Err(SvrError::DimensionMismatch {
            expected: n,
            got: gram.rows(),
        });
    }
    let half = real::<T>(0.5);
    let mut quad = T::zero();
    let mut rest = T::zero();
    for i in 0..n {
        let gi = gram.row(i);
        let mut dot = T::zero();
        for j in 0..n {
            dot += gi[j] * beta[j];
        }
        quad += beta[i] * dot;
        rest += y[i] * beta[i] - epsilon * beta[i].abs();
    }
    Ok(rest - half * quad)
}

/// Bounded cache of kernel rows, evicting the least recently used row when
/// full. Row `i` holds K(x_i, x_j) for all j.
struct RowCache<'a, T> {
    x: &'a Matrix<T>,
    sigma: T,
    capacity: usize,
    rows: HashMap<usize, (u64, Vec<T>)>,
    tick: u64,
}

impl<'a, T: Real> RowCache<'a, T> {
    fn new(x: &'a Matrix<T>, sigma: T, capacity: usize) -> Self {
        Self {
            x,
            sigma,
            capacity: capacity.max(2),
            rows: HashMap::new(),
            tick: 0,
        }
    }

    /// Default capacity: whole problem if small, else ~64 MB worth of rows.
    fn default_capacity(n: usize) -> usize {
        let budget_rows = 64 * 1024 * 1024 / (8 * n.max(1));
        n.min(budget_rows.max(64))
    }

    fn ensure(&mut self, i: usize, protect: usize) {
        self.tick += 1;
        if let Some(entry) = self.rows.get_mut(&i) {
            entry.0 = self.tick;
            return;
        }
        if self.rows.len() >= self.capacity {
            if let Some((&victim, _)) = self
                .rows
                .iter()
                .filter(|(&k, _)| k != protect)
                .min_by_key(|(_, (t, _))| *t)
            {
                self.rows.remove(&victim);
            }
        }
        let xi = self.x.row(i);
        let row: Vec<T> = (0..self.x.rows())
            .map(|j| rbf_unchecked(xi, self.x.row(j), self.sigma))
            .collect();
        self.rows.insert(i, (self.tick, row));
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[T], &[T]) {
        self.ensure(i, j);
        self.ensure(j, i);
        let a = &self.rows[&i].1;
        let b = &self.rows[&j].1;
        (a, b)
    }
}

struct SolveOutcome<T> {
    beta: Vec<T>,
    ftilde: Vec<T>,
    converged: bool,
    /// Dual objective after each accepted step.
    trace: Vec<T>,
}

/// Core SMO loop over the 2n dual variables (alpha_i for p in [0, n),
/// alpha*_i for p in [n, 2n)).
fn solve_smo<T: Real>(x: &Matrix<T>, y: &[T], hp: &SvrHyperparams<T>) -> SolveOutcome<T> {
    let n = y.len();
    let c = hp.c;
    let eps = hp.epsilon;
    let tau = real::<T>(1e-12);
    let two = real::<T>(2.0);
    let snap = real::<T>(1e-12) * c;

    let mut z = vec![T::zero(); 2 * n];
    let mut beta = vec![T::zero(); n];
    let mut ftilde = vec![T::zero(); n];
    let mut cache = RowCache::new(x, hp.sigma, RowCache::<T>::default_capacity(n));
    let mut objective = T::zero();
    let mut trace = vec![objective];
    let max_updates = hp.max_passes.saturating_mul(n);
    let mut converged = false;

    for _ in 0..max_updates {
        // Maximal-violating-pair selection. v is the signed gradient
        // -s_p * grad_p; ties go to the lowest variable index via strict
        // comparisons over an ascending scan.
        let mut m = T::neg_infinity();
        let mut p_up = usize::MAX;
        let mut big_m = T::infinity();
        let mut p_low = usize::MAX;
        for p in 0..2 * n {
            let i = p % n;
            let v = if p < n {
                y[i] - ftilde[i] - eps
            } else {
                y[i] - ftilde[i] + eps
            };
            let (in_up, in_low) = if p < n {
                (z[p] < c, z[p] > T::zero())
            } else {
                (z[p] > T::zero(), z[p] < c)
            };
            if in_up && v > m {
                m = v;
                p_up = p;
            }
            if in_low && v < big_m {
                big_m = v;
                p_low = p;
            }
        }
        if p_up == usize::MAX || p_low == usize::MAX || m - big_m <= hp.tol {
            converged = true;
            break;
        }

        let i = p_up % n;
        let j = p_low % n;
        let (row_i, row_j) = cache.pair(i, j);
        let mut eta = row_i[i] + row_j[j] - two * row_i[j];
        if eta < tau {
            eta = tau;
        }

        // Unconstrained step along the feasible direction, then clip to the
        // box of both variables.
        let mut delta = (m - big_m) / eta;
        let room_up = if p_up < n { c - z[p_up] } else { z[p_up] };
        let room_low = if p_low < n { z[p_low] } else { c - z[p_low] };
        if room_up < delta {
            delta = room_up;
        }
        if room_low < delta {
            delta = room_low;
        }
        if !(delta > T::zero()) {
            // No feasible progress (numerical stall); stop with the gap open.
            break;
        }

        let step_up = if p_up < n { delta } else { -delta };
        let step_low = if p_low < n { -delta } else { delta };
        z[p_up] = snap_to_bounds(z[p_up] + step_up, c, snap);
        z[p_low] = snap_to_bounds(z[p_low] + step_low, c, snap);
        objective += (m - big_m) * delta - real::<T>(0.5) * eta * delta * delta;

        // Keep alpha_i * alpha*_i = 0: shrinking both by their overlap
        // leaves beta untouched and strictly lowers the epsilon term, so the
        // recorded objective matches dual_objective(beta) exactly.
        for s in [i, j] {
            let overlap = z[s].min(z[s + n]);
            if overlap > T::zero() {
                z[s] -= overlap;
                z[s + n] -= overlap;
                objective += two * eps * overlap;
            }
        }

        beta[i] = z[i] - z[i + n];
        beta[j] = z[j] - z[j + n];
        let (row_i, row_j) = cache.pair(i, j);
        for k in 0..n {
            ftilde[k] += delta * (row_i[k] - row_j[k]);
        }
        trace.push(objective);
    }

    SolveOutcome {
        beta,
        ftilde,
        converged,
        trace,
    }
}

fn snap_to_bounds<T: Real>(v: T, c: T, snap: T) -> T {
    if v < snap {
        T::zero()
    } else if v > c - snap {
        c
    } else {
        v
    }
}

/// Bias choice: average the exact per-point solutions over free support
/// vectors; with none available, take the midpoint of the interval every
/// bound/inactive point still allows.
fn compute_bias<T: Real>(beta: &[T], ftilde: &[T], y: &[T], hp: &SvrHyperparams<T>) -> T {
    let eps = hp.epsilon;
    let c = hp.c;
    let mut free_sum = T::zero();
    let mut free_count = 0usize;
    for i in 0..beta.len() {
        let b = beta[i];
        if b != T::zero() && b.abs() < c {
            let sign = if b > T::zero() { T::one() } else { -T::one() };
            free_sum += y[i] - ftilde[i] - sign * eps;
            free_count += 1;
        }
    }
    if free_count > 0 {
        return free_sum / real::<T>(free_count as f64);
    }

    let mut lo = T::neg_infinity();
    let mut hi = T::infinity();
    for i in 0..beta.len() {
        let r = y[i] - ftilde[i];
        let b = beta[i];
        if b == T::zero() {
            lo = lo.max(r - eps);
            hi = hi.min(r + eps);
        } else if b >= c {
            hi = hi.min(r - eps);
        } else if b <= -c {
            lo = lo.max(r + eps);
        }
    }
    if lo.is_infinite() && hi.is_infinite() {
        T::zero()
    } else if lo.is_infinite() {
        hi
    } else if hi.is_infinite() {
        lo
    } else {
        real::<T>(0.5) * (lo + hi)
    }
}

/// Trains one coordinate model. See [`train_svr_with_trace`] for the variant
/// exposing the per-step objective history.
pub fn train_svr<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    hp: &SvrHyperparams<T>,
) -> Result<SvrModel<T>, SvrError<T>> {
    train_svr_with_trace(x, y, hp).map(|(model, _)| model)
}

/// Trains one coordinate model and returns the dual-objective value after
/// each accepted optimization step (non-decreasing by construction).
pub fn train_svr_with_trace<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    hp: &SvrHyperparams<T>,
) -> Result<(SvrModel<T>, Vec<T>), SvrError<T>> {
    hp.validate()?;
    let n = x.rows();
    if n < 2 {
        return Err(SvrError::TooFewRecords { needed: 2, got: n });
    }
    if y.len() != n {
        return Err(SvrError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(SvrError::NonFiniteInput);
    }

    let outcome = solve_smo(x, y, hp);
    let bias = compute_bias(&outcome.beta, &outcome.ftilde, y, hp);

    let mut sv_rows = Vec::new();
    let mut beta = Vec::new();
    for (i, &b) in outcome.beta.iter().enumerate() {
        if b != T::zero() {
            sv_rows.extend_from_slice(x.row(i));
            beta.push(b);
        }
    }
    let support_vectors = Matrix::from_vec(beta.len(), x.cols(), sv_rows);
    let model = SvrModel {
        support_vectors,
        beta,
        bias,
        hyperparams: hp.clone(),
    };
    if outcome.converged {
        Ok((model, outcome.trace))
    } else {
        Err(SvrError::MaxIterationsExceeded {
            best: Box::new(model),
        })
    }
}

/// Trains the two coordinate models (lat, lon) on the same inputs; the
/// models are independent, so they train on separate threads.
pub fn train_dual_svr<T: Real>(
    x: &Matrix<T>,
    targets: &Matrix<T>,
    hp: &SvrHyperparams<T>,
) -> Result<SvrPair<T>, SvrError<T>> {
    if targets.cols() != 2 {
        return Err(SvrError::DimensionMismatch {
            expected: 2,
            got: targets.cols(),
        });
    }
    if targets.rows() != x.rows() {
        return Err(SvrError::DimensionMismatch {
            expected: x.rows(),
            got: targets.rows(),
        });
    }
    let col = |j: usize| -> Vec<T> { (0..targets.rows()).map(|i| targets.get(i, j)).collect() };
    let (y_lat, y_lon) = (col(0), col(1));
    let (lat_res, lon_res) = std::thread::scope(|scope| {
        let lat = scope.spawn(|| train_svr(x, &y_lat, hp));
        let lon = scope.spawn(|| train_svr(x, &y_lon, hp));
        (
            lat.join().expect("lat trainer panicked"),
            lon.join().expect("lon trainer panicked"),
        )
    });
    Ok(SvrPair {
        lat_model: lat_res?,
        lon_model: lon_res?,
    })
}

#[derive(Serialize, Deserialize)]
struct SvrModelFile {
    #[serde(rename = "type")]
    kind: String,
    sigma: f64,
    c: f64,
    epsilon: f64,
    bias: f64,
    support_vectors: Vec<Vec<f64>>,
    beta: Vec<f64>,
}

impl SvrModel<f64> {
    pub fn save_json(&self, path: &std::path::Path) -> Result<(), SvrError<f64>> {
        let file = SvrModelFile {
            kind: "svr".to_string(),
            sigma: self.hyperparams.sigma,
            c: self.hyperparams.c,
            epsilon: self.hyperparams.epsilon,
            bias: self.bias,
            support_vectors: (0..self.support_vectors.rows())
                .map(|i| self.support_vectors.row(i).to_vec())
                .collect(),
            beta: self.beta.clone(),
        };
        let out = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(out), &file)
            .map_err(|e| SvrError::Format(e.to_string()))?;
        Ok(())
    }

    /// Loads a model file. Solver-only settings (tol, max_passes) are not
    /// part of the artifact and come back as defaults.
    pub fn load_json(path: &std::path::Path) -> Result<Self, SvrError<f64>> {
        let file: SvrModelFile =
            serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
                .map_err(|e| SvrError::Format(e.to_string()))?;
        if file.kind != "svr" {
            return Err(SvrError::Format(format!(
                "expected type \"svr\", got \"{}\"",
                file.kind
            )));
        }
        if file.beta.len() != file.support_vectors.len() {
            return Err(SvrError::Format(format!(
                "{} support vectors but {} coefficients",
                file.support_vectors.len(),
                file.beta.len()
            )));
        }
        let cols = file.support_vectors.first().map_or(6, Vec::len);
        if file.support_vectors.iter().any(|r| r.len() != cols) {
            return Err(SvrError::Format("ragged support vector rows".to_string()));
        }
        let mut data = Vec::with_capacity(file.beta.len() * cols);
        for row in &file.support_vectors {
            data.extend_from_slice(row);
        }
        let mut hyperparams = SvrHyperparams::defaults_for(file.beta.len().max(2));
        hyperparams.sigma = file.sigma;
        hyperparams.c = file.c;
        hyperparams.epsilon = file.epsilon;
        Ok(SvrModel {
            support_vectors: Matrix::from_vec(file.beta.len(), cols, data),
            beta: file.beta,
            bias: file.bias,
            hyperparams,
        })
    }
}
