//! Normalization layers for mixed-domain batches.
//!
//! All layers act on `B×C` activations, use biased (1/N) batch variance and
//! keep running statistics per domain slot for inference:
//!
//! * [`batch_norm`]: statistics of the whole batch, domain-blind.
//! * [`group_norm`]: per-sample statistics over channel groups, usually
//!   paired with [`weight_standardize`] on the preceding linear layer.
//! * [`dan_norm`]: source-row statistics normalize every row.
//! * [`trans_norm`]: each domain normalized by its own statistics, then
//!   channels reweighted by `1 + α` where `α` favours channels whose
//!   standardized means agree across domains. `α` is a constant for the
//!   reverse pass.

use crate::autodiff::{column_stats, Segment, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Param, ParamId, ParamSet, Tensor};

/// Epsilon used inside weight standardization.
pub const WS_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormKind {
    BatchNorm,
    GroupNormWs,
    DomainAgnostic,
    TransNorm,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [
        NormKind::BatchNorm,
        NormKind::GroupNormWs,
        NormKind::DomainAgnostic,
        NormKind::TransNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::BatchNorm => "bn",
            NormKind::GroupNormWs => "gn_ws",
            NormKind::DomainAgnostic => "dan",
            NormKind::TransNorm => "trans",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bn" | "batchnorm" | "batch_norm" => Some(NormKind::BatchNorm),
            "gn_ws" | "gn+ws" | "gnws" | "groupnorm" => Some(NormKind::GroupNormWs),
            "dan" | "domain_agnostic" => Some(NormKind::DomainAgnostic),
            "trans" | "transnorm" | "trans_norm" => Some(NormKind::TransNorm),
            _ => None,
        }
    }
}

/// Per-row domain flag: `true` = source, `false` = target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainMask(pub Vec<bool>);

impl DomainMask {
    pub fn all_source(n: usize) -> Self {
        DomainMask(vec![true; n])
    }

    pub fn all_target(n: usize) -> Self {
        DomainMask(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn source_rows(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i]).collect()
    }

    pub fn target_rows(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| !self.0[i]).collect()
    }

    fn check(&self, rows: usize) -> Result<()> {
        if self.0.len() != rows {
            return Err(Error::Shape {
                op: "domain mask",
                left: vec![rows],
                right: vec![self.0.len()],
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Batch statistics; running statistics are refreshed when requested.
    Train { update_running: bool },
    /// Running statistics only.
    Eval,
}

impl NormMode {
    pub const TRAIN: NormMode = NormMode::Train {
        update_running: true,
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormConfig {
    pub eps: f64,
    pub momentum: f64,
    pub groups: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            eps: 1e-5,
            momentum: 0.1,
            groups: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    fn update(&mut self, momentum: f64, mean: &[f64], var: &[f64]) {
        for (r, m) in self.mean.iter_mut().zip(mean) {
            *r = (1.0 - momentum) * *r + momentum * m;
        }
        for (r, v) in self.var.iter_mut().zip(var) {
            *r = (1.0 - momentum) * *r + momentum * v;
        }
    }
}

/// Affine parameters and per-domain running statistics of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NormState {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
    pub momentum: f64,
    pub groups: usize,
    pub running_src: RunningStats,
    pub running_tgt: RunningStats,
}

impl NormState {
    /// Registers `γ = 1` and `β = 0` (both exempt from L2) for `channels`.
    pub fn new(params: &mut ParamSet, channels: usize, cfg: NormConfig) -> Self {
        let gamma = params.add(Param::new(Tensor::full(&[channels], 1.0), false));
        let beta = params.add(Param::new(Tensor::zeros(&[channels]), false));
        NormState {
            gamma,
            beta,
            eps: cfg.eps,
            momentum: cfg.momentum,
            groups: cfg.groups,
            running_src: RunningStats::new(channels),
            running_tgt: RunningStats::new(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.running_src.mean.len()
    }

    fn affine(&self, tape: &mut Tape, params: &ParamSet) -> (Var, Var) {
        (tape.param(params, self.gamma), tape.param(params, self.beta))
    }
}

fn require_rows(op: &'static str, got: usize, needed: usize) -> Result<()> {
    if got < needed {
        return Err(Error::BatchTooSmall { op, needed, got });
    }
    Ok(())
}

/// Batch normalization over the full batch. Training refreshes the single
/// (source) running-statistics slot.
pub fn batch_norm(
    tape: &mut Tape,
    params: &ParamSet,
    x: Var,
    state: &mut NormState,
    mode: NormMode,
) -> Result<Var> {
    let rows = tape.value(x).rows();
    let all: Vec<usize> = (0..rows).collect();
    let affine = Some(state.affine(tape, params));
    let segment = match mode {
        NormMode::Train { update_running } => {
            require_rows("batch_norm", rows, 2)?;
            let (mean, var) = column_stats(tape.value(x), &all);
            if update_running {
                state.running_src.update(state.momentum, &mean, &var);
            }
            Segment {
                stats_rows: Some(all.clone()),
                apply_rows: all,
                mean,
                var,
            }
        }
        NormMode::Eval => Segment {
            stats_rows: None,
            apply_rows: all,
            mean: state.running_src.mean.clone(),
            var: state.running_src.var.clone(),
        },
    };
    tape.standardize(x, affine, vec![segment], state.eps, None)
}

/// Group normalization: per sample, per group of `C / groups` channels.
/// Behaves identically in training and inference.
pub fn group_norm(tape: &mut Tape, params: &ParamSet, x: Var, state: &NormState) -> Result<Var> {
    let (gamma, beta) = state.affine(tape, params);
    tape.group_norm(x, gamma, beta, state.groups, state.eps)
}

/// Standardizes each output column of `w: I×O` to zero mean and unit
/// variance over its `I` inputs; gradients flow through the standardization.
pub fn weight_standardize(tape: &mut Tape, w: Var) -> Result<Var> {
    let wv = tape.value(w);
    if wv.shape().len() != 2 || wv.rows() < 2 {
        return Err(Error::config(format!(
            "weight standardization needs at least 2 inputs per column, got shape {:?}",
            wv.shape()
        )));
    }
    let all: Vec<usize> = (0..wv.rows()).collect();
    let (mean, var) = column_stats(wv, &all);
    let segment = Segment {
        stats_rows: Some(all.clone()),
        apply_rows: all,
        mean,
        var,
    };
    tape.standardize(w, None, vec![segment], WS_EPS, None)
}

/// Normalizes every row with statistics taken from the source rows only.
pub fn dan_norm(
    tape: &mut Tape,
    params: &ParamSet,
    x: Var,
    mask: &DomainMask,
    state: &mut NormState,
    mode: NormMode,
) -> Result<Var> {
    let rows = tape.value(x).rows();
    mask.check(rows)?;
    let all: Vec<usize> = (0..rows).collect();
    let affine = Some(state.affine(tape, params));
    let segment = match mode {
        NormMode::Train { update_running } => {
            let src = mask.source_rows();
            require_rows("dan_norm source rows", src.len(), 2)?;
            let (mean, var) = column_stats(tape.value(x), &src);
            if update_running {
                state.running_src.update(state.momentum, &mean, &var);
            }
            Segment {
                stats_rows: Some(src),
                apply_rows: all,
                mean,
                var,
            }
        }
        NormMode::Eval => Segment {
            stats_rows: None,
            apply_rows: all,
            mean: state.running_src.mean.clone(),
            var: state.running_src.var.clone(),
        },
    };
    tape.standardize(x, affine, vec![segment], state.eps, None)
}

/// Per-channel transferability weights.
///
/// `d_c = |μs/√(σs²+ε) − μt/√(σt²+ε)|`, `α_c = C·(1+d_c)⁻¹ / Σ_j (1+d_j)⁻¹`,
/// so `Σ α = C` and equal statistics give `α = 1`.
pub fn transferability_alpha(
    src_mean: &[f64],
    src_var: &[f64],
    tgt_mean: &[f64],
    tgt_var: &[f64],
    eps: f64,
) -> Vec<f64> {
    let c = src_mean.len();
    let inv: Vec<f64> = (0..c)
        .map(|j| {
            let s = src_mean[j] / (src_var[j] + eps).sqrt();
            let t = tgt_mean[j] / (tgt_var[j] + eps).sqrt();
            1.0 / (1.0 + (s - t).abs())
        })
        .collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|v| c as f64 * v / total).collect()
}

/// Domain-specific normalization with shared affine parameters, scaled per
/// channel by `1 + α`. Inference normalizes each row with its declared
/// domain's running statistics and takes `α` from the running statistics.
pub fn trans_norm(
    tape: &mut Tape,
    params: &ParamSet,
    x: Var,
    mask: &DomainMask,
    state: &mut NormState,
    mode: NormMode,
) -> Result<Var> {
    trans_norm_with_alpha(tape, params, x, mask, state, mode, None)
}

/// [`trans_norm`] with an optional externally supplied `α`, which replaces
/// the statistics-derived weights. Gradient checks use it to hold `α` fixed
/// across perturbations.
pub fn trans_norm_with_alpha(
    tape: &mut Tape,
    params: &ParamSet,
    x: Var,
    mask: &DomainMask,
    state: &mut NormState,
    mode: NormMode,
    alpha_override: Option<&[f64]>,
) -> Result<Var> {
    let (rows, cols) = (tape.value(x).rows(), tape.value(x).cols());
    mask.check(rows)?;
    let (src, tgt) = (mask.source_rows(), mask.target_rows());
    let affine = Some(state.affine(tape, params));
    let (segments, alpha) = match mode {
        NormMode::Train { update_running } => {
            if src.is_empty() {
                return Err(Error::MissingDomain("source"));
            }
            if tgt.is_empty() {
                return Err(Error::MissingDomain("target"));
            }
            require_rows("trans_norm source rows", src.len(), 2)?;
            require_rows("trans_norm target rows", tgt.len(), 2)?;
            let (ms, vs) = column_stats(tape.value(x), &src);
            let (mt, vt) = column_stats(tape.value(x), &tgt);
            let alpha = transferability_alpha(&ms, &vs, &mt, &vt, state.eps);
            if update_running {
                state.running_src.update(state.momentum, &ms, &vs);
                state.running_tgt.update(state.momentum, &mt, &vt);
            }
            let segments = vec![
                Segment {
                    stats_rows: Some(src.clone()),
                    apply_rows: src,
                    mean: ms,
                    var: vs,
                },
                Segment {
                    stats_rows: Some(tgt.clone()),
                    apply_rows: tgt,
                    mean: mt,
                    var: vt,
                },
            ];
            (segments, alpha)
        }
        NormMode::Eval => {
            let (rs, rt) = (&state.running_src, &state.running_tgt);
            let alpha = transferability_alpha(&rs.mean, &rs.var, &rt.mean, &rt.var, state.eps);
            let segments = vec![
                Segment {
                    stats_rows: None,
                    apply_rows: src,
                    mean: rs.mean.clone(),
                    var: rs.var.clone(),
                },
                Segment {
                    stats_rows: None,
                    apply_rows: tgt,
                    mean: rt.mean.clone(),
                    var: rt.var.clone(),
                },
            ];
            (segments, alpha)
        }
    };
    let alpha = match alpha_override {
        Some(a) if a.len() == cols => a.to_vec(),
        Some(a) => {
            return Err(Error::Shape {
                op: "trans_norm alpha",
                left: vec![cols],
                right: vec![a.len()],
            })
        }
        None => alpha,
    };
    let mut scale = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        scale.extend(alpha.iter().map(|a| 1.0 + a));
    }
    let scale = Tensor::new(vec![rows, cols], scale)?;
    tape.standardize(x, affine, segments, state.eps, Some(scale))
}

/// A normalization layer of one of the four kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct NormLayer {
    pub kind: NormKind,
    pub state: NormState,
}

impl NormLayer {
    pub fn new(params: &mut ParamSet, kind: NormKind, channels: usize, cfg: NormConfig) -> Result<Self> {
        if kind == NormKind::GroupNormWs && (cfg.groups == 0 || !channels.is_multiple_of(cfg.groups)) {
            return Err(Error::config(format!(
                "groups={} does not divide channel count {channels}",
                cfg.groups
            )));
        }
        Ok(NormLayer {
            kind,
            state: NormState::new(params, channels, cfg),
        })
    }

    pub fn forward(
        &mut self,
        tape: &mut Tape,
        params: &ParamSet,
        x: Var,
        mask: &DomainMask,
        mode: NormMode,
    ) -> Result<Var> {
        match self.kind {
            NormKind::BatchNorm => batch_norm(tape, params, x, &mut self.state, mode),
            NormKind::GroupNormWs => group_norm(tape, params, x, &self.state),
            NormKind::DomainAgnostic => dan_norm(tape, params, x, mask, &mut self.state, mode),
            NormKind::TransNorm => trans_norm(tape, params, x, mask, &mut self.state, mode),
        }
    }
}
