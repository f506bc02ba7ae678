mod support;

use aggrolab_core::embedding::{DualEmbedding, Vocabulary, PAD_ROW};
use aggrolab_core::models::{
    ArchConfig, Architecture, DpcnnConfig, DrnnConfig, Model, ModelInput, PooledBilstmConfig,
};
use aggrolab_core::CoreError;
use aggrolab_numerics::{rng_stream, Graph, Mode, Tensor};
use rand::Rng as _;
use support::{drnn_oracle, drnn_oracle_error, max_abs_diff};

const VOCAB: usize = 40;
const FEATURES: usize = 24;

fn embedding() -> Tensor<f64> {
    let vocab: Vocabulary = (0..VOCAB)
        .map(|i| format!("t{i}"))
        .collect::<Vec<_>>()
        .into();
    DualEmbedding::hashed(vocab, 11).matrix.cast()
}

fn model(config: ArchConfig, classes: usize, seed: u64) -> Model<f64> {
    Model::new(config, embedding(), false, FEATURES, classes, seed).unwrap()
}

fn small(arch: Architecture) -> ArchConfig {
    match arch {
        Architecture::Dpcnn => ArchConfig::Dpcnn(DpcnnConfig {
            filters: 8,
            blocks: 3,
            ..DpcnnConfig::default()
        }),
        Architecture::Drnn => ArchConfig::Drnn(DrnnConfig {
            window: 3,
            hidden: 5,
            dropout: 0.2,
        }),
        Architecture::PooledBilstm => ArchConfig::PooledBilstm(PooledBilstmConfig {
            hidden: 5,
            dropout: 0.3,
        }),
    }
}

fn doc(seed: u64, n: usize) -> ModelInput {
    let mut rng = rng_stream(seed, &[1]);
    let rows = (0..n).map(|_| rng.random_range(1..=VOCAB)).collect();
    let f = (0..FEATURES).map(|_| rng.random_range(-1.5..1.5)).collect();
    ModelInput::new(format!("d{seed}"), rows, f)
}

fn drnn(window: usize, hidden: usize) -> (DrnnConfig, Model<f64>) {
    let c = DrnnConfig {
        window,
        hidden,
        dropout: 0.0,
    };
    let m = model(ArchConfig::Drnn(c.clone()), 3, 5);
    (c, m)
}

#[test]
fn drnn_window_covering_the_text_matches_bilstm_oracle() {
    let (c, m) = drnn(16, 6);
    let o = drnn_oracle(&c, &m, &doc(3, 9).padded(4));
    assert_eq!(o.states.shape(), &[9, 12]);
    assert!(drnn_oracle_error(&o, 6) < 1e-10);
}

#[test]
fn drnn_single_token_is_one_bilstm_step() {
    let (c, m) = drnn(8, 4);
    let o = drnn_oracle(&c, &m, &doc(9, 1));
    assert_eq!(o.states.shape(), &[1, 8]);
    assert!(max_abs_diff(o.states.data(), &o.prefix[0]) < 1e-12);
    assert!(max_abs_diff(o.states.data(), o.plain.data()) < 1e-12);
}

#[test]
fn drnn_states_depend_only_on_the_last_k_words() {
    let (c, m) = drnn(3, 5);
    let tail = doc(4, 10);
    let mut shifted = doc(8, 6);
    shifted.rows.extend(&tail.rows);
    shifted.pad.extend(&tail.pad);
    let a = drnn_oracle(&c, &m, &tail).states;
    let b = drnn_oracle(&c, &m, &shifted).states;
    for t in c.window - 1..10 {
        assert!(
            max_abs_diff(a.row_slice(t), b.row_slice(t + 6)) < 1e-12,
            "position {t}"
        );
    }
    assert!(max_abs_diff(a.row_slice(0), b.row_slice(6)) > 1e-6);
}

#[test]
fn dpcnn_pyramid_halves_a_long_document() {
    let c = DpcnnConfig::default();
    assert_eq!(c.pooled_lengths(200), vec![100, 50, 25, 13, 7, 4]);
    let m = model(ArchConfig::Dpcnn(c.clone()), 3, 2);
    let input = doc(1, 200);
    let mut g = Graph::new(&m.params);
    let table = g.param_by_name("embedding").unwrap();
    let x = g.gather_rows(table, &input.rows, Some(PAD_ROW)).unwrap();
    let outs = c.block_outputs(&mut g, x, &mut Mode::Eval).unwrap();
    let lengths: Vec<usize> = outs.iter().map(|&v| g.shape(v)[0]).collect();
    assert_eq!(lengths, vec![200, 100, 50, 25, 13, 7, 4]);
    assert!(outs.iter().all(|&v| g.shape(v)[1] == 128));
    let p = m.predict(&input).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn classifier_input_widths_follow_the_encoders() {
    for (arch, width) in [
        (Architecture::Dpcnn, 152),
        (Architecture::Drnn, 280),
        (Architecture::PooledBilstm, 1560),
    ] {
        let m = model(arch.default_config(), 3, 1);
        assert_eq!(m.z_width(), width);
        let mut g = Graph::new(&m.params);
        let z = m.encode(&mut g, &doc(2, 7), &mut Mode::Eval).unwrap();
        assert_eq!(g.shape(z), &[1, width], "{arch}");
        assert_eq!(
            m.params
                .value(&format!("{arch}.out.weight"))
                .unwrap()
                .shape(),
            &[width, 3]
        );
    }
}

#[test]
fn pooled_bilstm_single_token_pools_are_identical() {
    let m = model(small(Architecture::PooledBilstm), 3, 4);
    let mut g = Graph::new(&m.params);
    let z = m.encode(&mut g, &doc(5, 1), &mut Mode::Eval).unwrap();
    let z = g.value(z).data();
    let w = 10;
    assert_eq!(&z[..w], &z[w..2 * w]);
    assert!(max_abs_diff(&z[..w], &z[2 * w..3 * w]) < 1e-15);
}

#[test]
fn predictions_are_deterministic_distributions() {
    for arch in Architecture::ALL {
        for classes in [2, 3] {
            let m = model(small(arch), classes, 6);
            for seed in 0..5 {
                let x = doc(seed, 1 + seed as usize * 3);
                let p = m.predict(&x).unwrap();
                assert_eq!(p.len(), classes);
                assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(p, m.predict(&x).unwrap());
            }
        }
    }
}

#[test]
fn trailing_padding_does_not_change_predictions() {
    for arch in Architecture::ALL {
        let m = model(small(arch), 3, 7);
        let x = doc(3, 6);
        assert_eq!(
            m.predict(&x).unwrap(),
            m.predict(&x.clone().padded(9)).unwrap(),
            "{arch}"
        );
    }
}

#[test]
fn permuting_features_with_head_rows_preserves_predictions() {
    for arch in Architecture::ALL {
        let m = model(small(arch), 3, 8);
        let x = doc(4, 5);
        let perm: Vec<usize> = (0..FEATURES).rev().collect();
        let mut y = x.clone();
        y.features = perm.iter().map(|&i| x.features[i]).collect();
        let mut permuted = m.clone();
        let enc = m.config.encoding_width();
        let name = format!("{arch}.out.weight");
        let id = permuted.params.id(&name).unwrap();
        let w = m.params.value(&name).unwrap();
        let cols = w.cols();
        let data = permuted.params.get_mut(id).value.data_mut();
        for (j, &i) in perm.iter().enumerate() {
            data[(enc + j) * cols..(enc + j + 1) * cols].copy_from_slice(w.row_slice(enc + i));
        }
        let a = m.predict(&x).unwrap();
        let b = permuted.predict(&y).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12, "{arch}");
        assert!(
            max_abs_diff(&a, &m.predict(&y).unwrap()) > 1e-9,
            "{arch}: features have no effect"
        );
    }
}

#[test]
fn empty_documents_are_rejected() {
    for arch in Architecture::ALL {
        let m = model(small(arch), 3, 1);
        let features = vec![0.0; FEATURES];
        let empty = ModelInput::new("e", vec![], features.clone());
        assert!(matches!(m.predict(&empty), Err(CoreError::EmptyDocument(id)) if id == "e"));
        let all_pad = ModelInput::new("p", vec![], features).padded(3);
        assert!(matches!(
            m.predict(&all_pad),
            Err(CoreError::EmptyDocument(_))
        ));
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    let m = model(small(Architecture::Drnn), 3, 1);
    let mut x = doc(1, 4);
    x.features.pop();
    assert!(m.predict(&x).is_err());
    let mut x = doc(1, 4);
    x.rows[2] = VOCAB + 1;
    assert!(m.predict(&x).is_err());
}

#[test]
fn binary_head_has_one_logit() {
    for arch in Architecture::ALL {
        let m = model(small(arch), 2, 3);
        let x = doc(2, 6);
        let mut g = Graph::new(&m.params);
        let s = m.logits(&mut g, &x, &mut Mode::Eval).unwrap();
        assert_eq!(g.shape(s), &[1, 1]);
        let s = g.scalar(s);
        let p = 1.0 / (1.0 + (-s).exp());
        let probs = m.predict(&x).unwrap();
        assert!((probs[1] - p).abs() < 1e-15 && (probs[0] - (1.0 - p)).abs() < 1e-15);
    }
}

#[test]
fn only_dpcnn_carries_a_weight_penalty() {
    for arch in Architecture::ALL {
        let m = model(small(arch), 3, 3);
        let mut g = Graph::new(&m.params);
        let loss = m.loss(&mut g, &doc(1, 6), 1, &mut Mode::Eval).unwrap();
        assert_eq!(loss.penalty.is_some(), arch == Architecture::Dpcnn);
        assert!(m.loss(&mut g, &doc(1, 6), 3, &mut Mode::Eval).is_err());
    }
}

#[test]
fn dropout_is_active_only_in_training() {
    let m = model(small(Architecture::PooledBilstm), 3, 2);
    let x = doc(6, 8);
    let logits = |mode: &mut Mode<'_>| {
        let mut g = Graph::new(&m.params);
        let s = m.logits(&mut g, &x, mode).unwrap();
        g.value(s).data().to_vec()
    };
    let eval = logits(&mut Mode::Eval);
    let train = logits(&mut Mode::Train(&mut rng_stream(0, &[1])));
    assert_ne!(eval, train);
    assert_eq!(train, logits(&mut Mode::Train(&mut rng_stream(0, &[1]))));
}

#[test]
fn f32_and_f64_models_agree() {
    for arch in Architecture::ALL {
        let m = model(small(arch), 3, 9);
        let m32: Model<f32> = m.cast();
        let x = doc(7, 9);
        assert!(
            max_abs_diff(&m.predict(&x).unwrap(), &m32.predict(&x).unwrap()) < 1e-4,
            "{arch}"
        );
    }
}
