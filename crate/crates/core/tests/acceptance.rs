//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them). Expected values come from the
//! independent oracles in `common`, never from the code under test.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use petrel_core::corpus::sources::{parse_source_dataset, SourceKind};
use petrel_core::corpus::Sentence;
use petrel_core::domainsim::{overlap_pct, rank_sources, top_vocab, StopwordList};
use petrel_core::eval::{
    build_report, mcc_binary, mcc_multiclass, stratified_kfold, ConfusionMatrix,
};
use petrel_core::features::encoder::HashEncoder;
use petrel_core::features::ChannelConfig;
use petrel_core::graph::{
    expand_k, gcn_backward, gcn_forward, normalized_adjacency, path_prune, GcnLayerParams,
};
use petrel_core::model::{decode_bio, encode_bio, BioTag, LabelVocab, TypedSpan};
use petrel_core::nn::{attentive_pool, attentive_pool_backward};
use petrel_core::synth::{generate_corpus, CuePlacement, SynthConfig};
use petrel_core::tasks::property::{property_instances, PropertyKind};
use petrel_core::tasks::trainer::{train_property_head, Task, TrainConfig};
use petrel_core::tasks::SpanStrategy;
use petrel_core::transfer::{
    align_source_labels, fresh_backbone, joint_loss, property_confusion, run_setup, EeLabels,
    JointLossSpec, RunConfig, SetupKind, TaskSetup,
};

#[test]
fn c01_mcc_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    for round in 0..1000 {
        let k = [2usize, 3, 5][round % 3];
        let cm = random_confusion(k, 20, &mut rng);
        let ours = mcc_multiclass(&cm);
        let oracle = mcc_one_hot_oracle(&cm);
        assert!(
            (ours - oracle).abs() < 1e-10,
            "round {round}: impl {ours} vs oracle {oracle} on {cm:?}"
        );
        if k == 2 {
            assert!(
                (ours - mcc_binary(&cm)).abs() < 1e-10,
                "round {round}: multiclass vs binary disagree"
            );
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    assert!(checked >= 1000);
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("[acceptance] C1 MCC oracle equivalence ({checked} matrices, {elapsed:?}): PASS");
}

#[test]
fn c02_mcc_spot_values() {
    // perfect prediction
    let perfect = petrel_core::eval::confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
    assert_eq!(mcc_multiclass(&perfect), 1.0);

    // TP=3, FP=1, TN=4, FN=2 (class 1 is positive: counts[gold][pred])
    let cm = ConfusionMatrix {
        classes: vec!["neg".into(), "pos".into()],
        counts: vec![vec![4, 1], vec![2, 3]],
    };
    let oracle = mcc_binary_scalar(3.0, 1.0, 4.0, 2.0);
    assert!((oracle - 0.4082).abs() < 1e-4, "oracle sanity: {oracle}");
    assert!((mcc_binary(&cm) - oracle).abs() < 1e-12);
    assert!((mcc_binary(&cm) - 0.4082).abs() < 1e-4);

    // single-class prediction: zero-denominator convention
    let one_sided = ConfusionMatrix {
        classes: vec!["neg".into(), "pos".into()],
        counts: vec![vec![0, 5], vec![0, 5]],
    };
    assert_eq!(mcc_binary(&one_sided), 0.0);
    assert_eq!(mcc_multiclass(&one_sided), 0.0);
    println!("[acceptance] C2 MCC spot values: PASS");
}

#[test]
fn c03_bio_codec() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let labels = ["COMMODITY", "DATE", "COUNTRY", "ORG"];
    // round-trip on 1000 random well-formed span sets
    for round in 0..1000 {
        let n = rng.random_range(1..40usize);
        let mut spans: Vec<TypedSpan> = Vec::new();
        for _ in 0..rng.random_range(0..8usize) {
            let start = rng.random_range(0..n);
            let end = (start + rng.random_range(0..3usize)).min(n - 1);
            let candidate =
                TypedSpan::new(start, end, labels[rng.random_range(0..labels.len())]);
            if !spans.iter().any(|s| s.overlaps(&candidate)) {
                spans.push(candidate);
            }
        }
        spans.sort();
        let tags = encode_bio(&spans, n).expect("non-overlapping by construction");
        let decoded = decode_bio(&tags);
        assert_eq!(decoded, spans, "round {round}");
    }
    // decode totality on 1000 random (often ill-formed) tag sequences
    for _ in 0..1000 {
        let n = rng.random_range(1..40usize);
        let tags: Vec<BioTag> = (0..n)
            .map(|_| match rng.random_range(0..5u8) {
                0 => BioTag::O,
                1 => BioTag::B(labels[rng.random_range(0..labels.len())].to_string()),
                _ => BioTag::I(labels[rng.random_range(0..labels.len())].to_string()),
            })
            .collect();
        let spans = decode_bio(&tags);
        // decoded spans are well-formed: re-encoding must succeed
        encode_bio(&spans, n).expect("decoder output must be non-overlapping");
    }
    println!("[acceptance] C3 BIO codec round-trip and totality: PASS");
}

#[test]
fn c04_pruning_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for round in 0..500 {
        let n = rng.random_range(1..=40usize);
        let tree = random_tree(n, &mut rng);
        let adj = adjacency(&tree);
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let path = path_prune(&tree, a, b).expect("valid tree");
        assert_eq!(path.kept_sorted(), bfs_path(&adj, a, b), "round {round} path");
        let mut previous: Option<Vec<usize>> = None;
        for k in 0..=2usize {
            let expanded = expand_k(&tree, &path, k);
            let expected = ball_union(&adj, &path.kept_sorted(), k);
            assert_eq!(expanded.kept_sorted(), expected, "round {round} k={k}");
            if let Some(prev) = &previous {
                assert!(
                    prev.iter().all(|x| expanded.kept.contains(x)),
                    "round {round}: monotonicity violated at k={k}"
                );
            }
            previous = Some(expanded.kept_sorted());
        }
    }
    println!("[acceptance] C4 pruning matches BFS oracles (500 trees, k in 0..=2): PASS");
}

#[test]
fn c05_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let eps = 1e-5;

    // GCN: 20 random small instances
    for round in 0..20 {
        let n = rng.random_range(4..10usize);
        let tree = random_tree(n, &mut rng);
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let sub = expand_k(&tree, &path_prune(&tree, a, b).unwrap(), 1);
        let a_norm = normalized_adjacency(&tree, &sub);
        let m = a_norm.nrows();
        let d_in = rng.random_range(3..6usize);
        let d_mid = rng.random_range(3..6usize);
        let d_out = rng.random_range(2..5usize);
        let h = rand_matrix(m, d_in, &mut rng);
        let layers = vec![
            GcnLayerParams {
                w: rand_matrix(d_in, d_mid, &mut rng),
                b: rand_vector(d_mid, &mut rng),
            },
            GcnLayerParams {
                w: rand_matrix(d_mid, d_out, &mut rng),
                b: rand_vector(d_out, &mut rng),
            },
        ];
        let g = rand_matrix(m, d_out, &mut rng);
        let loss = |h: &Array2<f64>, layers: &[GcnLayerParams]| {
            let (out, _) = gcn_forward(h, &a_norm, layers, true).unwrap();
            (&out * &g).sum()
        };
        let (_, cache) = gcn_forward(&h, &a_norm, &layers, true).unwrap();
        let grads = gcn_backward(&a_norm, &layers, &cache, &g);

        let mut analytic: Vec<f64> = Vec::new();
        let mut numeric: Vec<f64> = Vec::new();
        analytic.extend(grads.d_input.iter());
        for (r, c) in itertools_pairs(m, d_in) {
            let mut hp = h.clone();
            hp[[r, c]] += eps;
            let mut hm = h.clone();
            hm[[r, c]] -= eps;
            numeric.push((loss(&hp, &layers) - loss(&hm, &layers)) / (2.0 * eps));
        }
        for (li, (dw, db)) in grads.d_layers.iter().enumerate() {
            analytic.extend(dw.iter());
            for (r, c) in itertools_pairs(dw.nrows(), dw.ncols()) {
                let mut lp = layers.clone();
                lp[li].w[[r, c]] += eps;
                let mut lm = layers.clone();
                lm[li].w[[r, c]] -= eps;
                numeric.push((loss(&h, &lp) - loss(&h, &lm)) / (2.0 * eps));
            }
            analytic.extend(db.iter());
            for j in 0..db.len() {
                let mut lp = layers.clone();
                lp[li].b[j] += eps;
                let mut lm = layers.clone();
                lm[li].b[j] -= eps;
                numeric.push((loss(&h, &lp) - loss(&h, &lm)) / (2.0 * eps));
            }
        }
        let err = grad_rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "GCN round {round}: relative error {err}");
    }

    // attentive span pooling: 20 random instances
    for round in 0..20 {
        let n = rng.random_range(2..8usize);
        let d = rng.random_range(3..6usize);
        let feats = rand_matrix(n, d, &mut rng);
        let w = rand_vector(d, &mut rng);
        let span_start = rng.random_range(0..n);
        let span: Vec<usize> = (span_start..n).collect();
        let g = rand_vector(d, &mut rng);
        let loss = |feats: &Array2<f64>, w: &Array1<f64>| {
            let (v, _) = attentive_pool(feats, &span, w);
            v.dot(&g)
        };
        let (_, cache) = attentive_pool(&feats, &span, &w);
        let mut d_feats = Array2::<f64>::zeros(feats.dim());
        let d_w = attentive_pool_backward(&feats, &w, &cache, &g, &mut d_feats);

        let mut analytic: Vec<f64> = d_w.iter().copied().collect();
        let mut numeric: Vec<f64> = Vec::new();
        for j in 0..d {
            let mut wp = w.clone();
            wp[j] += eps;
            let mut wm = w.clone();
            wm[j] -= eps;
            numeric.push((loss(&feats, &wp) - loss(&feats, &wm)) / (2.0 * eps));
        }
        analytic.extend(d_feats.iter());
        for (r, c) in itertools_pairs(n, d) {
            let mut fp = feats.clone();
            fp[[r, c]] += eps;
            let mut fm = feats.clone();
            fm[[r, c]] -= eps;
            numeric.push((loss(&fp, &w) - loss(&fm, &w)) / (2.0 * eps));
        }
        let err = grad_rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "attentive round {round}: relative error {err}");
    }
    println!("[acceptance] C5 GCN and attentive-span gradient checks (20 + 20): PASS");
}

#[test]
fn c06_stratified_folds() {
    // exact 18/2 per fold on a 90/10 split of 100
    let mut labels: Vec<String> = vec!["maj".into(); 90];
    labels.extend(vec!["min".to_string(); 10]);
    let split = stratified_kfold(&labels, 5, 606).unwrap();
    for fold in &split.folds {
        assert_eq!(fold.len(), 20);
        assert_eq!(fold.iter().filter(|&&i| labels[i] == "min").count(), 2);
        assert_eq!(fold.iter().filter(|&&i| labels[i] == "maj").count(), 18);
    }

    // disjoint + exhaustive on 200 random label sets
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    for round in 0..200 {
        let n_classes = rng.random_range(2..5usize);
        let k = rng.random_range(2..6usize);
        let n = rng.random_range(n_classes * k..80 + n_classes * k);
        let labels: Vec<String> = {
            // guarantee every class has at least k members
            let mut l: Vec<String> = Vec::with_capacity(n);
            for c in 0..n_classes {
                for _ in 0..k {
                    l.push(format!("c{c}"));
                }
            }
            while l.len() < n {
                l.push(format!("c{}", rng.random_range(0..n_classes)));
            }
            l
        };
        let split = stratified_kfold(&labels, k, round as u64).unwrap();
        let mut seen = vec![false; labels.len()];
        for fold in &split.folds {
            for &i in fold {
                assert!(!seen[i], "round {round}: index {i} duplicated");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "round {round}: not exhaustive");
        // per-class proportion within one instance of perfect
        for c in 0..n_classes {
            let total = labels.iter().filter(|l| **l == format!("c{c}")).count();
            for fold in &split.folds {
                let in_fold = fold.iter().filter(|&&i| labels[i] == format!("c{c}")).count();
                let lo = total / k;
                let hi = total.div_ceil(k);
                assert!(
                    in_fold >= lo && in_fold <= hi,
                    "round {round}: class {c} count {in_fold} outside [{lo},{hi}]"
                );
            }
        }
    }
    println!("[acceptance] C6 stratified folds exact and disjoint/exhaustive: PASS");
}

#[test]
fn c07_joint_loss_wiring() {
    // loss_EMD + beta*loss_ED, beta = 2, losses {1.0, 2.0} -> 5.0 exactly
    let spec_eq4 = JointLossSpec::new(BTreeMap::from([(Task::Ed, 2.0)])).unwrap();
    let losses = BTreeMap::from([(Task::Emd, 1.0), (Task::Ed, 2.0)]);
    assert_eq!(joint_loss(&losses, &spec_eq4).unwrap(), 5.0);

    // loss_EMD + loss_ED -> 2.0 exactly
    let spec_eq5 = JointLossSpec::uniform();
    let losses = BTreeMap::from([(Task::Emd, 1.0), (Task::Ed, 1.0)]);
    assert_eq!(joint_loss(&losses, &spec_eq5).unwrap(), 2.0);

    // linearity: adding delta to one task moves the total by weight * delta
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for _ in 0..200 {
        let w_ed = rng.random_range(0.1..5.0);
        let w_arp = rng.random_range(0.1..5.0);
        let spec = JointLossSpec::new(BTreeMap::from([(Task::Ed, w_ed), (Task::Arp, w_arp)]))
            .unwrap();
        let base = BTreeMap::from([
            (Task::Emd, rng.random_range(0.0..4.0)),
            (Task::Ed, rng.random_range(0.0..4.0)),
            (Task::Arp, rng.random_range(0.0..4.0)),
        ]);
        let before = joint_loss(&base, &spec).unwrap();
        for (task, weight) in [(Task::Emd, 1.0), (Task::Ed, w_ed), (Task::Arp, w_arp)] {
            let delta = rng.random_range(0.01..2.0);
            let mut bumped = base.clone();
            *bumped.get_mut(&task).unwrap() += delta;
            let after = joint_loss(&bumped, &spec).unwrap();
            assert!(
                (after - before - weight * delta).abs() < 1e-9,
                "{task:?}: {after} - {before} != {weight} * {delta}"
            );
            assert!(after > before, "strictly increasing in {task:?}");
        }
    }
    println!("[acceptance] C7 joint-loss wiring and linearity: PASS");
}

fn acceptance_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 0.02,
        epochs: 40,
        seed,
        hidden_dim: 48,
        gcn_dim: 32,
        gcn_layers: 2,
        k: 1,
        mlp_dim: 32,
        downweight_none: true,
    }
}

/// Stratified property cross-validation; returns the aggregated macro-F1.
fn property_cv_f1(
    sentences: &[&Sentence],
    kind: PropertyKind,
    strategy: SpanStrategy,
    folds: usize,
    cfg: &TrainConfig,
) -> f64 {
    let encoder = Arc::new(HashEncoder::new(32, 1));
    let channel_cfg = ChannelConfig::default();
    let instances = property_instances(sentences, kind);
    let labels: Vec<String> =
        instances.iter().map(|i| kind.classes()[i.label_idx].clone()).collect();
    let split = stratified_kfold(&labels, folds, cfg.seed).expect("stratifiable");
    let mut cms = Vec::new();
    for fold in 0..split.k() {
        let (train_idx, test_idx) = split.split(fold);
        let train: Vec<_> = train_idx.iter().map(|&i| instances[i].clone()).collect();
        let test: Vec<_> = test_idx.iter().map(|&i| instances[i].clone()).collect();
        let mut fold_cfg = cfg.clone();
        fold_cfg.seed = cfg.seed ^ (fold as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15);
        let mut backbone =
            fresh_backbone(sentences, Arc::clone(&encoder) as _, &channel_cfg, &fold_cfg);
        let (head, _) =
            train_property_head(kind, strategy, sentences, &train, &mut backbone, &fold_cfg)
                .expect("property training");
        cms.push(
            property_confusion(&head, &backbone, sentences, &test, kind).expect("evaluation"),
        );
    }
    build_report(kind.name(), &cms).expect("report").macro_f1
}

#[test]
fn c08_end_to_end_synthetic_pipeline() {
    let start = Instant::now();
    let corpus = generate_corpus(&SynthConfig {
        n_sentences: 200,
        seed: 11,
        cue_placement: CuePlacement::Adjacent,
        two_event_fraction: 0.5,
        sentences_per_doc: 10,
    })
    .expect("synthetic corpus");
    let sentences: Vec<&Sentence> = corpus.sentences().collect();
    let vocab = LabelVocab::crude_oil_news();
    let labels = EeLabels::from_vocab(&vocab);
    let encoder = Arc::new(HashEncoder::new(32, 1));
    let cfg = RunConfig {
        train: acceptance_train_config(808),
        beta: 2.0,
        literal_eq4: false,
        jobs: 2,
        train_final: false,
    };
    let setup = TaskSetup::new(SetupKind::Combo2, 2.0, false).unwrap();
    let folds = petrel_core::eval::kfold(sentences.len(), 5, 808).unwrap();
    let outcome = run_setup(
        &setup,
        &sentences,
        &folds,
        &labels,
        encoder,
        &ChannelConfig::default(),
        &cfg,
    )
    .expect("combo2 run");
    for task in [Task::Emd, Task::Ed, Task::Arp] {
        let report = outcome.reports.get(&task).expect("report present");
        println!(
            "[acceptance] C8 {} macro-F1 {:.4} (MCC {:.4})",
            task.name(),
            report.macro_f1,
            report.mcc
        );
        assert!(
            report.macro_f1 >= 0.95,
            "{} macro-F1 {:.4} below 0.95",
            task.name(),
            report.macro_f1
        );
    }
    for kind in PropertyKind::ALL {
        let f1 = property_cv_f1(
            &sentences,
            kind,
            SpanStrategy::SelfAttentiveSpan,
            5,
            &acceptance_train_config(809),
        );
        println!("[acceptance] C8 {} macro-F1 {:.4}", kind.name(), f1);
        assert!(f1 >= 0.95, "{} macro-F1 {:.4} below 0.95", kind.name(), f1);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "pipeline took {elapsed:?}");
    println!("[acceptance] C8 end-to-end synthetic pipeline in {elapsed:?}: PASS");
}

#[test]
fn c09_span_strategy_ordering() {
    // Cue words sit outside every 3-token trigger window but inside the
    // sentence; the attentive strategy must strictly beat the window.
    let corpus = generate_corpus(&SynthConfig {
        n_sentences: 120,
        seed: 23,
        cue_placement: CuePlacement::FarFromTrigger,
        two_event_fraction: 0.4,
        sentences_per_doc: 10,
    })
    .expect("synthetic corpus");
    let sentences: Vec<&Sentence> = corpus.sentences().collect();

    let mean_f1 = |strategy: SpanStrategy, seed: u64| -> f64 {
        let mut cfg = acceptance_train_config(seed);
        cfg.epochs = 16;
        let mut sum = 0.0;
        for kind in PropertyKind::ALL {
            sum += property_cv_f1(&sentences, kind, strategy, 3, &cfg);
        }
        sum / 3.0
    };

    let seeds = [1u64, 2, 3, 4, 5];
    let mut attentive: Vec<f64> =
        seeds.iter().map(|&s| mean_f1(SpanStrategy::SelfAttentiveSpan, s)).collect();
    let mut window: Vec<f64> =
        seeds.iter().map(|&s| mean_f1(SpanStrategy::FixedWindow { r: 1 }, s)).collect();
    attentive.sort_by(|a, b| a.partial_cmp(b).unwrap());
    window.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med_attentive = attentive[seeds.len() / 2];
    let med_window = window[seeds.len() / 2];
    println!(
        "[acceptance] C9 median F1: attentive {med_attentive:.4} vs window {med_window:.4} \
         (attentive {attentive:?}, window {window:?})"
    );
    assert!(
        med_attentive > med_window,
        "attentive ({med_attentive:.4}) must strictly beat window ({med_window:.4})"
    );
    println!("[acceptance] C9 span-strategy ordering: PASS");
}

#[test]
fn c10_label_alignment_totality() {
    let fixtures: Vec<(SourceKind, &str)> = vec![
        (SourceKind::ConanDoyle, "There\tO\nwas\tO\nno\tCUE\nfire\tO\n\nHe\tO\nsmiled\tO\n"),
        (SourceKind::Socc, "never\tCUE\nagain\tO\n\nall\tO\ngood\tO\n"),
        (SourceKind::TenKFin, "uncertain\tresults may vary\ncertain\trevenue was flat\n"),
        (SourceKind::WikipediaConll, "possibly\tCUE\ntrue\tO\n\nknown\tO\nfact\tO\n"),
        (
            SourceKind::Reviews,
            "not\tCUE\tO\ngood\tO\tO\n\nmaybe\tO\tCUE\nfine\tO\tO\n\nplain\tO\tO\ntext\tO\tO\n",
        ),
        (
            SourceKind::Sentivent,
            "{\"text\": \"profits fell\", \"negated\": true, \"uncertain\": false}\n\
             {\"text\": \"sales may rise\", \"negated\": false, \"uncertain\": true}\n\
             {\"text\": \"sales rose\", \"negated\": false, \"uncertain\": false}",
        ),
    ];
    for (kind, raw) in fixtures {
        let set = parse_source_dataset(kind, raw).expect("fixture parses");
        let mut served = 0;
        if kind.has_negation() {
            let aligned = align_source_labels(&set, PropertyKind::Polarity).expect("polarity");
            assert_eq!(aligned.len(), set.sentences.len());
            let classes: std::collections::BTreeSet<usize> =
                aligned.iter().map(|(_, c)| *c).collect();
            assert!(classes.contains(&1), "{kind:?}: NEGATIVE present");
            assert!(classes.iter().all(|&c| c < 2), "{kind:?}: binary labels only");
            served += 1;
        } else {
            assert!(align_source_labels(&set, PropertyKind::Polarity).is_err());
        }
        if kind.has_uncertainty() {
            let aligned = align_source_labels(&set, PropertyKind::Modality).expect("modality");
            assert_eq!(aligned.len(), set.sentences.len());
            assert!(aligned.iter().all(|(_, c)| *c < 2), "{kind:?}: binary labels only");
            served += 1;
        } else {
            assert!(align_source_labels(&set, PropertyKind::Modality).is_err());
        }
        assert!(align_source_labels(&set, PropertyKind::Intensity).is_err());
        assert!(served >= 1, "{kind:?} serves at least one property");
    }
    println!("[acceptance] C10 label alignment total over all six source kinds: PASS");
}

#[test]
fn c11_vocabulary_overlap() {
    let stopwords = StopwordList::from_text("");
    fn toks(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split_whitespace().map(|s| s.to_string())
    }

    // identity -> 100%
    let a = top_vocab("a", toks("oil prices fell on tuesday"), 100, &stopwords).unwrap();
    assert_eq!(overlap_pct(&a, &a).unwrap(), 100.0);

    // disjoint -> 0%
    let b = top_vocab("b", toks("cat dog bird fish"), 100, &stopwords).unwrap();
    assert_eq!(overlap_pct(&a, &b).unwrap(), 0.0);

    // constructed 25% case: |source| = 200 words, 50 shared
    let source_tokens: Vec<String> = (0..200).map(|i| format!("s{i:03}")).collect();
    let mut target_tokens: Vec<String> = (0..50).map(|i| format!("s{i:03}")).collect();
    target_tokens.extend((0..150).map(|i| format!("t{i:03}")));
    let src = top_vocab("src", source_tokens.into_iter(), 200, &stopwords).unwrap();
    let tgt = top_vocab("tgt", target_tokens.into_iter(), 200, &stopwords).unwrap();
    assert_eq!(overlap_pct(&src, &tgt).unwrap(), 25.0);

    // deterministic ranking
    let target = top_vocab("target", toks("a b c d"), 10, &stopwords).unwrap();
    let sources = vec![
        top_vocab("half", toks("a b x y"), 10, &stopwords).unwrap(),
        top_vocab("full", toks("a b c d"), 10, &stopwords).unwrap(),
        top_vocab("none", toks("p q r s"), 10, &stopwords).unwrap(),
    ];
    let r1 = rank_sources(&target, &sources).unwrap();
    let r2 = rank_sources(&target, &sources).unwrap();
    assert_eq!(r1, r2);
    let ids: Vec<&str> = r1.entries.iter().map(|e| e.0.as_str()).collect();
    assert_eq!(ids, vec!["full", "half", "none"]);
    println!("[acceptance] C11 vocabulary overlap values and ranking: PASS");
}

/// (row, col) index pairs, row-major.
fn itertools_pairs(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push((r, c));
        }
    }
    out
}
