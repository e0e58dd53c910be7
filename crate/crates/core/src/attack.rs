//! Recursive, query-budgeted warping attack.
//!
//! The attack walks a depth-first schedule of `(function, scale)` nodes: every
//! scale of the first function, then every scale of the next, and so on. Each
//! node warps the working face, spends one oracle query, and stops as soon as
//! the response satisfies the goal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmarks::{LandmarkSet, ReferenceSpace};
use crate::oracle::{identify, Oracle, OracleError, OracleResponse, QueryLedger};
use crate::warp::{warp_face, Image, WarpError, WarpFunction, WarpSpec, MAX_SCALE};

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    Config(String),
    #[error("images differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("invalid complexity parameters: {0}")]
    Complexity(String),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error("attack stopped after {queries_used} queries: {reason}")]
    Interrupted { queries_used: u32, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    Dodge,
    Impersonation,
    Either,
}

impl Goal {
    pub fn accepts(self, resp: &OracleResponse, true_id: &str) -> bool {
        match self {
            Goal::Dodge => is_dodge(resp, true_id),
            Goal::Impersonation => is_impersonation(resp, true_id),
            Goal::Either => is_dodge(resp, true_id) || is_impersonation(resp, true_id),
        }
    }
}

impl FromStr for Goal {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dodge" => Ok(Goal::Dodge),
            "impersonation" | "impersonate" => Ok(Goal::Impersonation),
            "either" | "any" => Ok(Goal::Either),
            _ => Err(AttackError::Config(format!("unknown goal {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Composition {
    /// Each node warps the output of the previous node.
    Cumulative,
    /// Each node warps the original face.
    Fresh,
}

impl FromStr for Composition {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cumulative" => Ok(Composition::Cumulative),
            "fresh" => Ok(Composition::Fresh),
            _ => Err(AttackError::Config(format!("unknown composition {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub order: Vec<WarpFunction>,
    /// Ascending scales tried for every function.
    pub scales: Vec<f64>,
    pub budget: u32,
    pub goal: Goal,
    pub composition: Composition,
    /// Scale increment between repeats of one function; `with_step` derives
    /// `scales` from it.
    pub step: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            order: vec![
                WarpFunction::StretchNose,
                WarpFunction::Smile,
                WarpFunction::RaiseEyebrow,
            ],
            scales: vec![0.1, 0.2, 0.3],
            budget: 3,
            goal: Goal::Either,
            composition: Composition::Cumulative,
            step: 0.1,
        }
    }
}

impl AttackConfig {
    /// Replaces `scales` with `step, 2·step, …, levels·step`.
    pub fn with_step(mut self, step: f64, levels: usize) -> Self {
        self.step = step;
        self.scales = (1..=levels).map(|i| i as f64 * step).collect();
        self
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let fail = |msg: String| Err(AttackError::Config(msg));
        if self.budget < 1 {
            return fail("budget must be at least 1".into());
        }
        if self.order.is_empty() {
            return fail("order must name at least one warping function".into());
        }
        for (i, f) in self.order.iter().enumerate() {
            if self.order[..i].contains(f) {
                return fail(format!("{f} appears twice in order"));
            }
        }
        if self.scales.is_empty() {
            return fail("at least one scale is required".into());
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && **s <= MAX_SCALE)) {
            return fail(format!("scale {s} outside (0, {MAX_SCALE}]"));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("scales {:?} are not strictly ascending", self.scales));
        }
        if !(self.step > 0.0 && self.step <= MAX_SCALE) {
            return fail(format!("step {} outside (0, {MAX_SCALE}]", self.step));
        }
        Ok(())
    }
}

/// Depth-first node order, truncated to the query budget.
pub fn schedule(config: &AttackConfig) -> Vec<WarpSpec> {
    config
        .order
        .iter()
        .flat_map(|&function| config.scales.iter().map(move |&scale| WarpSpec { function, scale }))
        .take(config.budget as usize)
        .collect()
}

/// Root-mean-square sample difference; both images in `[0, 1]`, so the result
/// is in `[0, 1]` too.
pub fn l2_distance(x: &Image, xw: &Image) -> Result<f64, AttackError> {
    if !x.same_shape(xw) {
        return Err(AttackError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.width(),
            x.height(),
            x.channels(),
            xw.width(),
            xw.height(),
            xw.channels()
        )));
    }
    let sum: f64 = x
        .samples()
        .iter()
        .zip(xw.samples())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / x.samples().len() as f64).sqrt())
}

/// Nobody was recognized.
pub fn is_dodge(resp: &OracleResponse, _true_id: &str) -> bool {
    resp.identity.is_none()
}

/// Somebody other than the true identity was recognized.
pub fn is_impersonation(resp: &OracleResponse, true_id: &str) -> bool {
    resp.identity.as_deref().is_some_and(|id| id != true_id)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackStatus {
    Dodge,
    Impersonation,
    Failed,
}

impl fmt::Display for AttackStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackStatus::Dodge => "dodge",
            AttackStatus::Impersonation => "impersonation",
            AttackStatus::Failed => "failed",
        })
    }
}

/// One spent query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub spec: WarpSpec,
    pub response: Option<OracleResponse>,
    pub error: Option<String>,
    /// Distance of the submitted image to the original.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackOutcome {
    pub status: AttackStatus,
    pub queries_used: u32,
    pub trace: Vec<TraceEntry>,
    pub final_image: Image,
    pub final_landmarks: LandmarkSet,
    pub final_delta: f64,
}

impl AttackOutcome {
    /// The node that produced the adversarial face, if any.
    pub fn success_spec(&self) -> Option<WarpSpec> {
        match self.status {
            AttackStatus::Failed => None,
            _ => self.trace.last().map(|e| e.spec),
        }
    }
}

/// Runs the attack against `oracle` with a fresh ledger of `config.budget`
/// queries.
///
/// Transport failures are recorded in the trace and the walk moves on to the
/// next node; the failed query stays spent.
pub fn raf_attack<O: Oracle + ?Sized>(
    img: &Image,
    lm: &LandmarkSet,
    true_id: &str,
    oracle: &mut O,
    config: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    config.validate()?;
    let reference = ReferenceSpace::canonical();
    let mut ledger = QueryLedger::new(config.budget);
    let mut trace = Vec::new();
    let mut working = (img.clone(), lm.clone());
    let mut status = AttackStatus::Failed;

    for spec in schedule(config) {
        let (base_img, base_lm) = match config.composition {
            Composition::Cumulative => (&working.0, &working.1),
            Composition::Fresh => (img, lm),
        };
        let (warped, warped_lm) = match warp_face(base_img, base_lm, spec, &reference) {
            Ok(w) => w,
            Err(e) if ledger.used() == 0 => return Err(e.into()),
            Err(e) => {
                return Err(AttackError::Interrupted {
                    queries_used: ledger.used(),
                    reason: format!("{spec}: {e}"),
                })
            }
        };
        let delta = l2_distance(img, &warped)?;
        let result = identify(oracle, &warped, &mut ledger);
        working = (warped, warped_lm);
        match result {
            Ok(resp) => {
                let hit = config.goal.accepts(&resp, true_id);
                if hit {
                    status = if is_dodge(&resp, true_id) {
                        AttackStatus::Dodge
                    } else {
                        AttackStatus::Impersonation
                    };
                }
                trace.push(TraceEntry {
                    spec,
                    response: Some(resp),
                    error: None,
                    delta,
                });
                if hit {
                    break;
                }
            }
            Err(OracleError::BudgetExhausted { .. }) => break,
            Err(e) => {
                log::warn!("query {} ({spec}) failed: {e}", ledger.used());
                trace.push(TraceEntry {
                    spec,
                    response: None,
                    error: Some(e.to_string()),
                    delta,
                });
            }
        }
    }

    let final_delta = trace.last().map_or(0.0, |e| e.delta);
    Ok(AttackOutcome {
        status,
        queries_used: ledger.used(),
        trace,
        final_image: working.0,
        final_landmarks: working.1,
        final_delta,
    })
}

/// Evaluates the divide-and-conquer cost recurrence
/// `T(n) = ξ · k · T(n / k)`, `T(d) = base_cost`.
///
/// * `n` – total number of variables (pixels / landmark coordinates),
/// * `d` – block size chosen per level (`|x_C|`),
/// * `k` – number of independent sub-problems per level,
/// * `xi` – restarts per level, `ξ(d)`,
/// * `base_cost` – cost of a leaf, `T(d)`.
///
/// Only the dominant term is modelled; the per-level linear costs (`g(d)`,
/// simplification over `m` terms, component maintenance over `|V|`
/// vertices) are folded into `base_cost`. `n / d` must be a power of `k`.
pub fn complexity_bound(n: u64, d: u64, k: u64, xi: f64, base_cost: f64) -> Result<f64, AttackError> {
    complexity_levels(n, d, k)?;
    if !(xi.is_finite() && xi >= 0.0 && base_cost.is_finite()) {
        return Err(AttackError::Complexity(format!("xi = {xi}, base = {base_cost}")));
    }
    fn unroll(size: u64, d: u64, k: u64, xi: f64, base: f64) -> f64 {
        if size == d {
            base
        } else {
            xi * (k as f64 * unroll(size / k, d, k, xi, base))
        }
    }
    Ok(unroll(n, d, k, xi, base_cost))
}

/// Closed form `(k·ξ)^{log_k(n/d)} · base_cost` of [`complexity_bound`].
pub fn complexity_closed_form(n: u64, d: u64, k: u64, xi: f64, base_cost: f64) -> Result<f64, AttackError> {
    let levels = complexity_levels(n, d, k)?;
    Ok((k as f64 * xi).powi(levels as i32) * base_cost)
}

/// `log_k(n / d)`, requiring it to be a non-negative integer.
pub fn complexity_levels(n: u64, d: u64, k: u64) -> Result<u32, AttackError> {
    if d < 1 || n < d {
        return Err(AttackError::Complexity(format!("need n >= d >= 1, got n = {n}, d = {d}")));
    }
    if k < 2 {
        return Err(AttackError::Complexity(format!("branch factor k = {k} < 2")));
    }
    if !n.is_multiple_of(d) {
        return Err(AttackError::Complexity(format!("n = {n} is not a multiple of d = {d}")));
    }
    let mut ratio = n / d;
    let mut levels = 0;
    while ratio > 1 {
        if !ratio.is_multiple_of(k) {
            return Err(AttackError::Complexity(format!("n/d = {} is not a power of k = {k}", n / d)));
        }
        ratio /= k;
        levels += 1;
    }
    Ok(levels)
}
