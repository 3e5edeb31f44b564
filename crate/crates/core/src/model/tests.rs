use super::*;
use crate::data::{gen_shifted_gaussians, DatasetSplit, ShiftSpec};

fn data(seed: u64) -> DatasetSplit {
    gen_shifted_gaussians(&ShiftSpec {
        seed,
        ..ShiftSpec::default()
    })
    .unwrap()
}

fn mixed_batch(d: &DatasetSplit, n: usize, semi: bool) -> Batch {
    let src = &d.source.train[..n];
    let tgt = &d.target.train[..n];
    let rows: Vec<&Sample> = src.iter().chain(tgt).collect();
    let mut mask = vec![true; n];
    mask.resize(2 * n, false);
    Batch {
        x: features(rows.iter().copied()).unwrap(),
        mask: DomainMask(mask),
        labels: rows
            .iter()
            .map(|s| (s.domain == Domain::Source || semi).then_some(s.y))
            .collect(),
    }
}

fn values(m: &UadaModel, ids: &[ParamId]) -> Vec<Tensor> {
    ids.iter().map(|&id| m.params.get(id).value.clone()).collect()
}

fn cfg(mode: TrainMode, norm: NormKind) -> TrainConfig {
    TrainConfig {
        mode,
        norm,
        ..TrainConfig::default()
    }
}

#[test]
fn build_is_deterministic_and_sized() {
    let c = TrainConfig::default();
    assert_eq!(build_model(&c, 2, 5, 3).unwrap(), build_model(&c, 2, 5, 3).unwrap());
    assert_ne!(build_model(&c, 2, 5, 3).unwrap().params, build_model(&c, 2, 5, 4).unwrap().params);
    for classes in [15, 11] {
        let m = build_model(&c, 8, classes, 0).unwrap();
        assert_eq!(m.params.get(m.head_weight()).value.shape(), &[64, classes]);
        assert_eq!(m.num_classes(), classes);
    }
    assert!(matches!(build_model(&c, 0, 5, 0), Err(Error::Config(_))));
    assert!(matches!(build_model(&c, 2, 1, 0), Err(Error::Config(_))));
}

#[test]
fn confusion_loss_examples() {
    let mut tape = Tape::new();
    let p = tape.leaf(Tensor::full(&[4], 0.5));
    let l = tape.confusion_loss(p);
    assert!((tape.scalar(l) - 4.0 * 2f64.ln()).abs() < 1e-10);
    assert!((tape.scalar(l) - 2.77259).abs() < 1e-5);

    let p = tape.leaf(Tensor::full(&[6], 1e-12));
    let l = tape.confusion_loss(p);
    assert!(tape.scalar(l) < 1e-5);

    let p = tape.leaf(Tensor::vector(vec![0.9]));
    let l = tape.confusion_loss(p);
    assert!((tape.scalar(l) - std::f64::consts::LN_10).abs() < 1e-12);

    let p = tape.leaf(Tensor::zeros(&[0]));
    let l = tape.confusion_loss(p);
    assert_eq!(tape.scalar(l), 0.0);
}

#[test]
fn config_guards() {
    let mut c = cfg(TrainMode::Uada, NormKind::TransNorm);
    c.batch_size = 3;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let c = cfg(TrainMode::SourceOnly, NormKind::TransNorm);
    assert!(c.validate().is_err());
    assert!(cfg(TrainMode::SourceOnly, NormKind::BatchNorm).validate().is_ok());
    let mut c = TrainConfig::default();
    c.source_fraction = 1.0;
    assert!(c.validate().is_err());
}

#[test]
fn lr_zero_leaves_parameters() {
    let d = data(0);
    let mut c = TrainConfig::default();
    c.lr = 0.0;
    let mut m = build_model(&c, 2, 5, 1).unwrap();
    let before = m.params.clone();
    let r = train_step(&mut m, &mixed_batch(&d, 8, false), &c, &mut Tape::new()).unwrap();
    assert!(r.cls_loss > 0.0 && r.dom_loss > 0.0 && r.conf_loss > 0.0);
    for (a, b) in before.iter().zip(m.params.iter()) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn uada_batch_needs_both_domains() {
    let d = data(0);
    let c = TrainConfig::default();
    let mut m = build_model(&c, 2, 5, 1).unwrap();
    let mut b = mixed_batch(&d, 4, false);
    b.mask = DomainMask::all_source(8);
    assert!(matches!(
        train_step(&mut m, &b, &c, &mut Tape::new()),
        Err(Error::MissingDomain("target"))
    ));
}

#[test]
fn discriminator_step_touches_only_gd() {
    let d = data(1);
    let c = TrainConfig::default();
    for norm in NormKind::ALL {
        let c = TrainConfig { norm, ..c.clone() };
        let mut m = build_model(&c, 2, 5, 2).unwrap();
        let b = mixed_batch(&d, 8, false);
        let mut tape = Tape::new();
        train_step(&mut m, &b, &c, &mut tape).unwrap();
        let (gf, gl, gd) = (m.gf_ids(), m.gl_ids(), m.gd_ids());
        let (f0, l0, d0) = (values(&m, &gf), values(&m, &gl), values(&m, &gd));
        discriminator_step(&mut m, &b, &c, &mut tape).unwrap();
        assert_eq!(values(&m, &gf), f0);
        assert_eq!(values(&m, &gl), l0);
        assert_ne!(values(&m, &gd), d0);

        let d1 = values(&m, &gd);
        confusion_step(&mut m, &b, &c, &mut tape).unwrap();
        assert_eq!(values(&m, &gd), d1);
        assert_eq!(values(&m, &gl), l0);
        assert_ne!(values(&m, &gf), f0);
    }
}

#[test]
fn confusion_step_descends() {
    let d = data(2);
    let mut c = TrainConfig::default();
    c.momentum = 0.0;
    let mut m = build_model(&c, 2, 5, 5).unwrap();
    let b = mixed_batch(&d, 8, false);
    let mut tape = Tape::new();
    for _ in 0..3 {
        train_step(&mut m, &b, &c, &mut tape).unwrap();
    }
    c.lr = 1e-6;
    let before = confusion_loss_of(&mut m, &b).unwrap();
    let reported = confusion_step(&mut m, &b, &c, &mut tape).unwrap();
    let after = confusion_loss_of(&mut m, &b).unwrap();
    assert_eq!(before, reported);
    assert!(after - before < 0.0, "{before} -> {after}");
}

#[test]
fn zero_confusion_weight_reduces_to_classifier() {
    let d = data(3);
    let mut c = TrainConfig::default();
    c.conf_weight = 0.0;
    let mut adv = build_model(&c, 2, 5, 9).unwrap();
    let mut plain = adv.clone();
    let mut tape = Tape::new();
    for k in 0..4 {
        let b = mixed_batch(&d, 6 + k, false);
        train_step(&mut adv, &b, &c, &mut tape).unwrap();
        classification_step(&mut plain, &b, &c, &mut tape).unwrap();
        let ids: Vec<ParamId> = adv.gf_ids().into_iter().chain(adv.gl_ids()).collect();
        assert_eq!(values(&adv, &ids), values(&plain, &ids));
        assert_eq!(adv.blocks, plain.blocks);
    }
}

/// Single-layer softmax regression: one tape step equals the hand-derived
/// update `W ← W − lr·Xᵀ(P − Y)/B` and lowers the loss.
#[test]
fn classification_step_matches_hand_rolled_gradient() {
    let x = [[1.0, 0.5], [0.8, 1.2], [-1.0, -0.3], [-0.7, -1.1]];
    let y = [0usize, 0, 1, 1];
    let lr = 0.5;
    let mut w = [[0.1, -0.2], [0.05, 0.3]];
    let b = [0.0, 0.0];

    let hand_loss = |w: &[[f64; 2]; 2]| -> (f64, [[f64; 2]; 2]) {
        let mut loss = 0.0;
        let mut g = [[0.0; 2]; 2];
        for (xi, &yi) in x.iter().zip(&y) {
            let z = [0, 1].map(|k| xi[0] * w[0][k] + xi[1] * w[1][k]);
            let m = z[0].max(z[1]);
            let e = z.map(|v| (v - m).exp());
            let s = e[0] + e[1];
            loss -= (e[yi] / s).ln();
            for k in 0..2 {
                let d = e[k] / s - (k == yi) as usize as f64;
                g[0][k] += xi[0] * d / 4.0;
                g[1][k] += xi[1] * d / 4.0;
            }
        }
        (loss / 4.0, g)
    };
    let (l0, g) = hand_loss(&w);

    let mut ps = ParamSet::new();
    let wid = ps.add(Param::new(Tensor::from_rows(&w).unwrap(), true));
    let bid = ps.add(Param::new(Tensor::vector(b.to_vec()), false));
    let mut tape = Tape::new();
    let xv = tape.leaf(Tensor::from_rows(&x).unwrap());
    let (wv, bv) = (tape.param(&ps, wid), tape.param(&ps, bid));
    let z = tape.linear(xv, wv, bv).unwrap();
    let loss = tape.softmax_cross_entropy(z, &y).unwrap();
    assert!((tape.scalar(loss) - l0).abs() < 1e-12);
    tape.backward(loss, &mut ps).unwrap();
    Sgd::new(lr, 0.0).unwrap().step(ps.subset_mut(&[wid]));

    for r in 0..2 {
        for k in 0..2 {
            w[r][k] -= lr * g[r][k];
            assert!((ps.get(wid).value.at(r, k) - w[r][k]).abs() < 1e-12);
        }
    }
    assert!(hand_loss(&w).0 < l0);

    // the full model on a separable two-class batch also improves
    let mut c = cfg(TrainMode::SourceOnly, NormKind::BatchNorm);
    c.momentum = 0.0;
    c.lr = 0.05;
    let mut m = build_model(&c, 2, 2, 0).unwrap();
    let batch = Batch {
        x: Tensor::from_rows(&x).unwrap(),
        mask: DomainMask::all_source(4),
        labels: y.iter().map(|&v| Some(v)).collect(),
    };
    let first = classification_step(&mut m, &batch, &c, &mut tape).unwrap();
    let second = classification_step(&mut m, &batch, &c, &mut tape).unwrap();
    assert!(second < first, "{first} -> {second}");
}

#[test]
fn predictions_are_distributions() {
    let d = data(4);
    let mut m = build_model(&TrainConfig::default(), 2, 5, 0).unwrap();
    let x = features(&d.target.test).unwrap();
    let p = m.predict_proba(&x, Domain::Target).unwrap();
    for r in 0..p.probs.rows() {
        assert!((p.probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(p.gd.iter().all(|&g| g > 0.0 && g < 1.0));
    assert_eq!(p.features.shape(), &[x.rows(), 64]);

    let head = m.head_weight();
    m.params.get_mut(head).value.data_mut().fill(0.0);
    let p = m.predict_proba(&x, Domain::Source).unwrap();
    assert!(p.probs.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
}

#[test]
fn zero_epochs_changes_nothing_and_training_is_deterministic() {
    let d = data(5);
    let pool = Pool::from_split(&d);
    let mut c = TrainConfig::default();
    c.epochs = 0;
    let mut m = build_model(&c, 2, 5, 0).unwrap();
    let fresh = m.clone();
    assert!(train(&mut m, &pool, &c).unwrap().is_empty());
    assert_eq!(m, fresh);

    c.epochs = 2;
    let mut a = fresh.clone();
    let mut b = fresh.clone();
    let ha = train(&mut a, &pool, &c).unwrap();
    let hb = train(&mut b, &pool, &c).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
    assert!(ha.iter().all(|r| r.cls_loss.is_finite() && r.dom_loss >= 0.0 && r.conf_loss >= 0.0));
}

#[test]
fn training_never_reads_hidden_target_labels() {
    let d = data(6);
    let mut c = TrainConfig::default();
    c.epochs = 2;
    for (mode, norm) in [
        (TrainMode::SourceOnly, NormKind::BatchNorm),
        (TrainMode::Uada, NormKind::TransNorm),
        (TrainMode::Uada, NormKind::DomainAgnostic),
    ] {
        let pool = Pool::from_split(&d);
        let c = TrainConfig { mode, norm, ..c.clone() };
        let mut m = build_model(&c, 2, 5, 0).unwrap();
        train(&mut m, &pool, &c).unwrap();
        assert_eq!(pool.label_reads(), 0, "{mode}");
    }

    let mut pool = Pool::from_split(&d);
    let ids: Vec<usize> = pool.unlabeled_ids().into_iter().step_by(9).collect();
    pool.annotate(&ids).unwrap();
    let c = TrainConfig {
        mode: TrainMode::UadaSemi,
        ..c
    };
    let mut m = build_model(&c, 2, 5, 0).unwrap();
    train(&mut m, &pool, &c).unwrap();
    assert_eq!(pool.read_ids(), ids.as_slice());
}

#[test]
fn target_only_needs_revealed_pool() {
    let d = data(7);
    let mut pool = Pool::from_split(&d);
    let mut c = cfg(TrainMode::TargetOnly, NormKind::BatchNorm);
    c.epochs = 1;
    let mut m = build_model(&c, 2, 5, 0).unwrap();
    assert!(matches!(train(&mut m, &pool, &c), Err(Error::Empty(_))));
    pool.reveal_all().unwrap();
    assert!(train(&mut m, &pool, &c).is_ok());
}

#[test]
fn random_predictor_scores_one_over_c() {
    use rand::Rng;
    let mut rng = crate::rng::seeded(11);
    let (c, per) = (5usize, 400usize);
    let truths: Vec<usize> = (0..c * per).map(|i| i % c).collect();
    let preds: Vec<usize> = truths.iter().map(|_| rng.random_range(0..c)).collect();
    let mpca = mean_per_class_accuracy(&preds, &truths, c).unwrap().mpca;
    // each recall is Binomial(per, 1/C)/per; the mean of C of them
    let sd = ((1.0 / c as f64) * (1.0 - 1.0 / c as f64) / (per * c) as f64).sqrt();
    assert!((mpca - 0.2).abs() < 3.0 * sd, "{mpca}");
}

/// When the rotation is below half the class spacing, adversarial alignment
/// recovers the right class correspondence and beats source-only.
#[test]
fn uada_beats_source_only_on_identifiable_shift() {
    let mut gains = Vec::new();
    for seed in 0..3 {
        let d = gen_shifted_gaussians(&ShiftSpec {
            seed,
            rotation: 30f64.to_radians(),
            translation: vec![2.0, 0.0],
            ..ShiftSpec::default()
        })
        .unwrap();
        let mut acc = Vec::new();
        for (mode, norm) in [(TrainMode::SourceOnly, NormKind::BatchNorm), (TrainMode::Uada, NormKind::TransNorm)] {
            let c = TrainConfig {
                mode,
                norm,
                seed,
                epochs: 60,
                ..TrainConfig::default()
            };
            let mut m = build_model(&c, 2, 5, seed).unwrap();
            train(&mut m, &Pool::from_split(&d), &c).unwrap();
            acc.push(m.evaluate(&d.target.test, Domain::Target).unwrap());
        }
        gains.push(acc[1] - acc[0]);
    }
    let mean = gains.iter().sum::<f64>() / 3.0;
    assert!(mean > 0.1, "{gains:?}");
}
