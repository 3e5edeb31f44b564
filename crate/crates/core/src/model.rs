//! Feature extractor, label predictor and domain discriminator, trained
//! with alternating classification, discriminator and confusion updates.

use std::fmt;

use rand::Rng;

use crate::autodiff::{softmax_rows, Sgd, Tape, Var};
use crate::data::{features, Domain, MixedBatcher, Sample, SingleBatcher};
use crate::error::{Error, Result};
use crate::norm::{weight_standardize, DomainMask, NormConfig, NormKind, NormLayer, NormMode};
use crate::pool::Pool;
use crate::rng::{derive_seed, seeded, stream};
use crate::stats::mean_per_class_accuracy;
use crate::tensor::{Param, ParamId, ParamSet, Tensor};

/// Which pools are trained on and which sub-updates run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrainMode {
    /// Labeled source only.
    SourceOnly,
    /// Fully labeled target only; the upper bound.
    TargetOnly,
    /// Labeled source plus unlabeled target, adversarial alignment.
    Uada,
    /// As `Uada`, plus whatever target samples have been annotated.
    UadaSemi,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [
        TrainMode::SourceOnly,
        TrainMode::TargetOnly,
        TrainMode::Uada,
        TrainMode::UadaSemi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::SourceOnly => "source_only",
            TrainMode::TargetOnly => "target_only",
            TrainMode::Uada => "uada",
            TrainMode::UadaSemi => "uada_semi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TrainMode::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, TrainMode::Uada | TrainMode::UadaSemi)
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub runs: usize,
    pub seed: u64,
    pub mode: TrainMode,
    pub norm: NormKind,
    /// Weight of the summed confusion loss in the feature-extractor update.
    pub conf_weight: f64,
    /// Widths of the feature-extractor blocks; the last one is the feature dim.
    pub hidden: Vec<usize>,
    pub disc_hidden: usize,
    /// Share of each mixed batch drawn from the source pool.
    pub source_fraction: f64,
    pub norm_cfg: NormConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            l2: 0.001,
            momentum: 0.9,
            batch_size: 32,
            epochs: 100,
            runs: 3,
            seed: 0,
            mode: TrainMode::Uada,
            norm: NormKind::TransNorm,
            conf_weight: 1.0,
            hidden: vec![64, 64],
            disc_hidden: 64,
            source_fraction: 0.5,
            norm_cfg: NormConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.conf_weight >= 0.0 && self.conf_weight.is_finite()) {
            return Err(Error::config(format!(
                "conf_weight must be >= 0, got {}",
                self.conf_weight
            )));
        }
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) || self.disc_hidden == 0 {
            return Err(Error::config("hidden sizes must be nonempty and positive"));
        }
        if self.mode.is_adversarial() {
            if self.batch_size < 4 {
                return Err(Error::config(format!(
                    "batch_size={} too small: mixed batches need at least 2 rows per domain",
                    self.batch_size
                )));
            }
            let per_src = (self.batch_size as f64 * self.source_fraction).floor() as usize;
            if !(0.0..=1.0).contains(&self.source_fraction)
                || per_src < 2
                || self.batch_size - per_src < 2
            {
                return Err(Error::config(format!(
                    "source_fraction={} leaves fewer than 2 rows for a domain at batch_size={}",
                    self.source_fraction, self.batch_size
                )));
            }
        } else {
            if self.batch_size < 2 {
                return Err(Error::config("batch_size must be at least 2"));
            }
            if self.norm == NormKind::TransNorm {
                return Err(Error::config(format!(
                    "norm=trans needs both domains in every batch; mode {} has one",
                    self.mode
                )));
            }
        }
        Ok(())
    }
}

/// Per-step (or per-epoch mean) losses.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub cls_loss: f64,
    pub dom_loss: f64,
    pub conf_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
struct Block {
    dense: Dense,
    norm: NormLayer,
}

/// The three-part network over one shared parameter arena.
#[derive(Clone, Debug, PartialEq)]
pub struct UadaModel {
    pub params: ParamSet,
    blocks: Vec<Block>,
    head: Dense,
    disc: [Dense; 2],
    norm_kind: NormKind,
    single_domain: bool,
    input_dim: usize,
    num_classes: usize,
}

fn dense(params: &mut ParamSet, rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Dense {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w: Vec<f64> = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Dense {
        w: params.add(Param::new(
            Tensor::new(vec![fan_in, fan_out], w).expect("sized above"),
            true,
        )),
        b: params.add(Param::new(Tensor::zeros(&[fan_out]), false)),
    }
}

/// Builds a freshly initialized model; weights are uniform in
/// `±1/√fan_in`, biases zero.
pub fn build_model(
    cfg: &TrainConfig,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<UadaModel> {
    if input_dim == 0 || num_classes < 2 {
        return Err(Error::config(format!(
            "need input_dim >= 1 and num_classes >= 2, got {input_dim} and {num_classes}"
        )));
    }
    if cfg.hidden.is_empty() || cfg.hidden.contains(&0) || cfg.disc_hidden == 0 {
        return Err(Error::config("hidden sizes must be nonempty and positive"));
    }
    if cfg.norm == NormKind::GroupNormWs && input_dim < 2 {
        return Err(Error::config("weight standardization needs input_dim >= 2"));
    }
    let mut rng = seeded(derive_seed(seed, stream::INIT));
    let mut params = ParamSet::new();
    let mut blocks = Vec::with_capacity(cfg.hidden.len());
    let mut fan_in = input_dim;
    for &width in &cfg.hidden {
        let dense = dense(&mut params, &mut rng, fan_in, width);
        let norm = NormLayer::new(&mut params, cfg.norm, width, cfg.norm_cfg)?;
        blocks.push(Block { dense, norm });
        fan_in = width;
    }
    let head = dense(&mut params, &mut rng, fan_in, num_classes);
    let disc = [
        dense(&mut params, &mut rng, fan_in, cfg.disc_hidden),
        dense(&mut params, &mut rng, cfg.disc_hidden, 1),
    ];
    Ok(UadaModel {
        params,
        blocks,
        head,
        disc,
        norm_kind: cfg.norm,
        single_domain: !cfg.mode.is_adversarial(),
        input_dim,
        num_classes,
    })
}

/// Outputs of an inference pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `B × C` class posteriors.
    pub probs: Tensor,
    /// `B × F` extracted features.
    pub features: Tensor,
    /// Discriminator outputs, read as `P(domain = target)`.
    pub gd: Vec<f64>,
}

impl UadaModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.blocks.last().map_or(self.input_dim, |b| b.norm.state.channels())
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    /// Feature-extractor parameters (dense layers and norm affines).
    pub fn gf_ids(&self) -> Vec<ParamId> {
        self.blocks
            .iter()
            .flat_map(|b| [b.dense.w, b.dense.b, b.norm.state.gamma, b.norm.state.beta])
            .collect()
    }

    pub fn gl_ids(&self) -> Vec<ParamId> {
        vec![self.head.w, self.head.b]
    }

    pub fn gd_ids(&self) -> Vec<ParamId> {
        self.disc.iter().flat_map(|d| [d.w, d.b]).collect()
    }

    pub fn head_weight(&self) -> ParamId {
        self.head.w
    }

    /// Mask for rows that all come from `domain`. Single-domain models keep
    /// every row in the primary statistics slot.
    pub fn domain_mask(&self, domain: Domain, rows: usize) -> DomainMask {
        if self.single_domain || domain == Domain::Source {
            DomainMask::all_source(rows)
        } else {
            DomainMask::all_target(rows)
        }
    }

    pub(crate) fn extract(
        &mut self,
        tape: &mut Tape,
        x: Var,
        mask: &DomainMask,
        mode: NormMode,
    ) -> Result<Var> {
        let ws = self.norm_kind == NormKind::GroupNormWs;
        extract_blocks(&mut self.blocks, &self.params, ws, tape, x, mask, mode)
    }

    /// Records a forward pass to class logits on `tape`.
    pub fn logits(&mut self, tape: &mut Tape, x: Var, mask: &DomainMask, mode: NormMode) -> Result<Var> {
        let feats = self.extract(tape, x, mask, mode)?;
        self.classify(tape, feats)
    }

    pub(crate) fn classify(&self, tape: &mut Tape, feats: Var) -> Result<Var> {
        let (w, b) = (tape.param(&self.params, self.head.w), tape.param(&self.params, self.head.b));
        tape.linear(feats, w, b)
    }

    /// Discriminator output as a length-`B` vector in `(0, 1)`.
    pub(crate) fn discriminate(&self, tape: &mut Tape, feats: Var) -> Result<Var> {
        let rows = tape.value(feats).rows();
        let [d1, d2] = self.disc;
        let (w, b) = (tape.param(&self.params, d1.w), tape.param(&self.params, d1.b));
        let h = tape.linear(feats, w, b)?;
        let h = tape.relu(h);
        let (w, b) = (tape.param(&self.params, d2.w), tape.param(&self.params, d2.b));
        let z = tape.linear(h, w, b)?;
        let p = tape.sigmoid(z);
        tape.reshape(p, &[rows])
    }

    /// Inference pass with running normalization statistics.
    pub fn predict_proba(&self, x: &Tensor, domain: Domain) -> Result<Prediction> {
        if x.shape().len() != 2 || x.cols() != self.input_dim {
            return Err(Error::Shape {
                op: "predict_proba",
                left: x.shape().to_vec(),
                right: vec![x.rows(), self.input_dim],
            });
        }
        let mask = self.domain_mask(domain, x.rows());
        // eval mode never writes the running statistics; the copy only
        // satisfies the layer signature
        let mut blocks = self.blocks.clone();
        let ws = self.norm_kind == NormKind::GroupNormWs;
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let feats = extract_blocks(&mut blocks, &self.params, ws, &mut tape, xv, &mask, NormMode::Eval)?;
        let logits = self.classify(&mut tape, feats)?;
        let gd = self.discriminate(&mut tape, feats)?;
        Ok(Prediction {
            probs: softmax_rows(tape.value(logits)),
            features: tape.value(feats).clone(),
            gd: tape.value(gd).data().to_vec(),
        })
    }

    /// Arg-max class per row; ties go to the smaller class index.
    pub fn predict(&self, x: &Tensor, domain: Domain) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x, domain)?.probs;
        Ok((0..probs.rows()).map(|r| argmax(probs.row(r))).collect())
    }

    /// Mean per-class accuracy on labeled samples from one domain.
    pub fn evaluate(&self, samples: &[Sample], domain: Domain) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Empty("evaluation set".into()));
        }
        let x = features(samples)?;
        let preds = self.predict(&x, domain)?;
        let truths: Vec<usize> = samples.iter().map(|s| s.y).collect();
        Ok(mean_per_class_accuracy(&preds, &truths, self.num_classes)?.mpca)
    }
}

fn extract_blocks(
    blocks: &mut [Block],
    params: &ParamSet,
    ws: bool,
    tape: &mut Tape,
    x: Var,
    mask: &DomainMask,
    mode: NormMode,
) -> Result<Var> {
    let mut h = x;
    for block in blocks {
        let mut w = tape.param(params, block.dense.w);
        if ws {
            w = weight_standardize(tape, w)?;
        }
        let b = tape.param(params, block.dense.b);
        h = tape.linear(h, w, b)?;
        h = block.norm.forward(tape, params, h, mask, mode)?;
        h = tape.relu(h);
    }
    Ok(h)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// One training batch. `labels[i]` is `None` for rows whose label the
/// learner may not see.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub mask: DomainMask,
    pub labels: Vec<Option<usize>>,
}

impl Batch {
    fn labeled(&self) -> (Vec<usize>, Vec<usize>) {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|y| (i, y)))
            .unzip()
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Sub-update 1: softmax cross-entropy over the labeled rows, SGD on the
/// feature extractor and label predictor. Refreshes running statistics.
/// Returns the loss before the update (0 when no row is labeled).
pub fn classification_step(
    model: &mut UadaModel,
    batch: &Batch,
    cfg: &TrainConfig,
    tape: &mut Tape,
) -> Result<f64> {
    let (rows, labels) = batch.labeled();
    tape.clear();
    model.params.zero_grads();
    let x = tape.leaf(batch.x.clone());
    let feats = model.extract(tape, x, &batch.mask, NormMode::TRAIN)?;
    if rows.is_empty() {
        return Ok(0.0);
    }
    let logits = model.classify(tape, feats)?;
    let logits = tape.select_rows(logits, &rows)?;
    let loss = tape.softmax_cross_entropy(logits, &labels)?;
    let value = finite(tape.scalar(loss), "classification loss")?;
    tape.backward(loss, &mut model.params)?;
    let mut ids = model.gf_ids();
    ids.extend(model.gl_ids());
    Sgd::with_momentum(cfg.lr, cfg.l2, cfg.momentum)?.step(model.params.subset_mut(&ids));
    Ok(value)
}

/// Sub-update 2: binary cross-entropy of the discriminator on detached
/// features (target = 1, source = 0), SGD on the discriminator only.
pub fn discriminator_step(
    model: &mut UadaModel,
    batch: &Batch,
    cfg: &TrainConfig,
    tape: &mut Tape,
) -> Result<f64> {
    tape.clear();
    model.params.zero_grads();
    let x = tape.leaf(batch.x.clone());
    let feats = model.extract(tape, x, &batch.mask, NormMode::Train { update_running: false })?;
    let feats = tape.detach(feats);
    let p = model.discriminate(tape, feats)?;
    let targets: Vec<f64> = batch.mask.0.iter().map(|&src| if src { 0.0 } else { 1.0 }).collect();
    let loss = tape.binary_cross_entropy(p, &targets)?;
    let value = finite(tape.scalar(loss), "domain loss")?;
    tape.backward(loss, &mut model.params)?;
    let ids = model.gd_ids();
    Sgd::with_momentum(cfg.lr, cfg.l2, cfg.momentum)?.step(model.params.subset_mut(&ids));
    Ok(value)
}

/// Sub-update 3: `conf_weight · −Σ log(1 − G_D(G_F(x)))` over the target
/// rows, plain SGD on the feature extractor only. Returns the unweighted
/// confusion loss before the update.
pub fn confusion_step(
    model: &mut UadaModel,
    batch: &Batch,
    cfg: &TrainConfig,
    tape: &mut Tape,
) -> Result<f64> {
    let loss = record_confusion(model, batch, tape)?;
    let value = finite(tape.scalar(loss), "confusion loss")?;
    if cfg.conf_weight > 0.0 && value > 0.0 {
        let weighted = tape.scale(loss, cfg.conf_weight);
        tape.backward(weighted, &mut model.params)?;
        let ids = model.gf_ids();
        Sgd::new(cfg.lr, 0.0)?.step(model.params.subset_mut(&ids));
    }
    // the discriminator received gradients it does not apply
    model.params.zero_grads();
    Ok(value)
}

fn record_confusion(model: &mut UadaModel, batch: &Batch, tape: &mut Tape) -> Result<Var> {
    tape.clear();
    model.params.zero_grads();
    let x = tape.leaf(batch.x.clone());
    let feats = model.extract(tape, x, &batch.mask, NormMode::Train { update_running: false })?;
    let tgt = batch.mask.target_rows();
    let feats = tape.select_rows(feats, &tgt)?;
    let p = model.discriminate(tape, feats)?;
    Ok(tape.confusion_loss(p))
}

/// Confusion loss of a batch under training-mode normalization, without
/// updating anything.
pub fn confusion_loss_of(model: &mut UadaModel, batch: &Batch) -> Result<f64> {
    let mut tape = Tape::new();
    let loss = record_confusion(model, batch, &mut tape)?;
    Ok(tape.scalar(loss))
}

/// One training step: classification, then (adversarial modes only)
/// discriminator and confusion updates.
pub fn train_step(
    model: &mut UadaModel,
    batch: &Batch,
    cfg: &TrainConfig,
    tape: &mut Tape,
) -> Result<LossReport> {
    if cfg.mode.is_adversarial() {
        if batch.mask.source_rows().is_empty() {
            return Err(Error::MissingDomain("source"));
        }
        if batch.mask.target_rows().is_empty() {
            return Err(Error::MissingDomain("target"));
        }
    }
    let cls_loss = classification_step(model, batch, cfg, tape)?;
    let mut report = LossReport {
        cls_loss,
        ..LossReport::default()
    };
    if cfg.mode.is_adversarial() {
        report.dom_loss = discriminator_step(model, batch, cfg, tape)?;
        report.conf_loss = confusion_step(model, batch, cfg, tape)?;
    }
    Ok(report)
}

/// Row sources for one training run, derived from a pool and a mode.
struct TrainData<'a> {
    src: Vec<(&'a [f64], Option<usize>)>,
    tgt: Vec<(&'a [f64], Option<usize>)>,
}

fn train_data<'a>(pool: &'a Pool, mode: TrainMode) -> Result<TrainData<'a>> {
    let labeled = |s: &'a Sample| (s.x.as_slice(), Some(s.y));
    let data = match mode {
        TrainMode::SourceOnly => TrainData {
            src: pool.labeled_src().iter().map(labeled).collect(),
            tgt: Vec::new(),
        },
        TrainMode::TargetOnly => TrainData {
            src: pool.labeled_tgt().iter().map(labeled).collect(),
            tgt: Vec::new(),
        },
        TrainMode::Uada | TrainMode::UadaSemi => {
            let semi = mode == TrainMode::UadaSemi;
            let mut tgt: Vec<(usize, &'a [f64], Option<usize>)> = pool
                .labeled_tgt()
                .iter()
                .map(|s| (s.id, s.x.as_slice(), semi.then_some(s.y)))
                .chain(pool.unlabeled_tgt().iter().map(|u| (u.id, u.x.as_slice(), None)))
                .collect();
            tgt.sort_by_key(|t| t.0);
            TrainData {
                src: pool.labeled_src().iter().map(labeled).collect(),
                tgt: tgt.into_iter().map(|(_, x, y)| (x, y)).collect(),
            }
        }
    };
    if data.src.is_empty() {
        let which = if mode == TrainMode::TargetOnly {
            "labeled target pool"
        } else {
            "labeled source pool"
        };
        return Err(Error::Empty(format!("{which} for mode {mode}")));
    }
    if mode.is_adversarial() && data.tgt.is_empty() {
        return Err(Error::Empty(format!("target pool for mode {mode}")));
    }
    Ok(data)
}

fn assemble(rows: &[&(&[f64], Option<usize>)], n_src: usize) -> Result<Batch> {
    let x: Vec<&[f64]> = rows.iter().map(|r| r.0).collect();
    let mut mask = vec![true; n_src];
    mask.resize(rows.len(), false);
    Ok(Batch {
        x: Tensor::from_rows(&x)?,
        mask: DomainMask(mask),
        labels: rows.iter().map(|r| r.1).collect(),
    })
}

/// Trains for `cfg.epochs` epochs and returns the per-epoch mean losses.
pub fn train(model: &mut UadaModel, pool: &Pool, cfg: &TrainConfig) -> Result<Vec<LossReport>> {
    train_with(model, pool, cfg, |_, _, _| Ok(()))
}

/// [`train`] with a callback after every epoch (1-based epoch index).
pub fn train_with<F>(
    model: &mut UadaModel,
    pool: &Pool,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<LossReport>>
where
    F: FnMut(usize, &UadaModel, &LossReport) -> Result<()>,
{
    cfg.validate()?;
    if model.single_domain == cfg.mode.is_adversarial() {
        return Err(Error::config(format!(
            "model was built for a different mode than {}",
            cfg.mode
        )));
    }
    let data = train_data(pool, cfg.mode)?;
    let seed = derive_seed(cfg.seed, stream::BATCHES);
    let mut tape = Tape::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut mixed = if cfg.mode.is_adversarial() {
        Some(MixedBatcher::new(
            data.src.len(),
            data.tgt.len(),
            cfg.batch_size,
            cfg.source_fraction,
            seed,
        )?)
    } else {
        None
    };
    let mut single = if mixed.is_none() {
        Some(SingleBatcher::new(data.src.len(), cfg.batch_size, seed)?)
    } else {
        None
    };
    for epoch in 1..=cfg.epochs {
        let batches: Vec<Batch> = if let Some(m) = mixed.as_mut() {
            m.epoch()
                .into_iter()
                .map(|b| {
                    let rows: Vec<_> = b
                        .src
                        .iter()
                        .map(|&i| &data.src[i])
                        .chain(b.tgt.iter().map(|&i| &data.tgt[i]))
                        .collect();
                    assemble(&rows, b.src.len())
                })
                .collect::<Result<_>>()?
        } else {
            let s = single.as_mut().expect("one batcher is set");
            s.epoch()
                .into_iter()
                .map(|idx| {
                    let rows: Vec<_> = idx.iter().map(|&i| &data.src[i]).collect();
                    assemble(&rows, rows.len())
                })
                .collect::<Result<_>>()?
        };
        let mut total = LossReport::default();
        for batch in &batches {
            let r = train_step(model, batch, cfg, &mut tape)?;
            total.cls_loss += r.cls_loss;
            total.dom_loss += r.dom_loss;
            total.conf_loss += r.conf_loss;
        }
        let n = batches.len().max(1) as f64;
        let mean = LossReport {
            cls_loss: total.cls_loss / n,
            dom_loss: total.dom_loss / n,
            conf_loss: total.conf_loss / n,
        };
        on_epoch(epoch, model, &mean)?;
        history.push(mean);
    }
    Ok(history)
}

#[cfg(test)]
mod tests;
