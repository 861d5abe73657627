mod common;

use std::rc::Rc;

use common::nn::{finite_difference_check, Oracle};
use mipgnn::bias::{compute_bias, threshold_bias};
use mipgnn::bnb::{collect_pool, PoolConfig};
use mipgnn::generate::{gen_gisp_er, gen_random_blp, GispParams};
use mipgnn::gnn::{
    label_accuracy, train, Architecture, GnnModel, GraphInputs, Tape, Tensor, TrainConfig,
    TrainingExample,
};
use mipgnn::io::{load_model, save_model};
use mipgnn::model::{featurized_graph, BlpInstance};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(arch: Architecture, seed: u64) -> GnnModel {
    GnnModel::with_dims(arch, 8, 2, seed)
}

fn labelled(inst: &BlpInstance) -> TrainingExample {
    let pool = collect_pool(
        inst,
        &PoolConfig {
            epsilon: 0.1,
            target: None,
            time_limit: None,
        },
    )
    .unwrap();
    let labels = threshold_bias(&compute_bias(&pool).unwrap().biases, 0.0).unwrap();
    TrainingExample {
        graph: featurized_graph(inst),
        labels: labels.as_f64(),
    }
}

#[test]
fn straight_line_oracle_agrees_bitwise() {
    let insts = [
        gen_random_blp(7, 4, 0.5, 3).unwrap(),
        gen_gisp_er(&GispParams::set2(9, 0.4, 1)).unwrap(),
    ];
    for inst in &insts {
        let g = featurized_graph(inst);
        for arch in Architecture::ALL {
            for model in [GnnModel::new(arch, 11), small(arch, 5)] {
                let inputs = GraphInputs::new(&g).unwrap();
                let got = model.logits(&inputs);
                let want = Oracle::new(&model).logits(&g);
                let got_bits: Vec<u64> = got.iter().map(|v| v.to_bits()).collect();
                let want_bits: Vec<u64> = want.iter().map(|v| v.to_bits()).collect();
                assert_eq!(got_bits, want_bits, "{arch}");
            }
        }
    }
}

#[test]
fn zeroed_error_weights_reduce_to_plain() {
    let g = featurized_graph(&gen_random_blp(8, 5, 0.5, 9).unwrap());
    for arch in [Architecture::SageErr, Architecture::EcErr] {
        let mut m = GnnModel::new(arch, 4);
        m.zero_error_weights();
        let plain = m.without_error();
        assert_eq!(plain.architecture(), arch.plain());
        let a = m.forward(&g).unwrap();
        let b = plain.forward(&g).unwrap();
        let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b, "{arch}");
    }
}

#[test]
fn gradients_match_finite_differences_on_small_models() {
    let inst = gen_random_blp(5, 3, 0.6, 2).unwrap();
    let ex = labelled(&inst);
    for arch in Architecture::ALL {
        let model = small(arch, 1);
        let r = finite_difference_check(&model, &ex.graph, &ex.labels, 1e-5, 1e-8);
        assert!(r.checked > 0);
        assert!(r.max_rel_error <= 1e-4, "{arch}: {r:?}");
    }
}

#[test]
fn linear_regression_gradient_is_analytic() {
    let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]]);
    let w = Tensor::from_rows(&[vec![0.25], vec![-0.5]]);
    let y = [1.0, 0.0, 2.0];
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(&w);
    let pred = tape.matmul(xv, wv);
    let loss = tape.squared_error(pred, y.to_vec().into());
    let grads = tape.backward(loss);
    let g = grads[wv.index()].as_ref().unwrap();
    // d/dw Σ(Xw − y)² = 2 Xᵀ(Xw − y)
    let resid: Vec<f64> = (0..3)
        .map(|r| x.row(r)[0] * 0.25 + x.row(r)[1] * -0.5 - y[r])
        .collect();
    for j in 0..2 {
        let want = 2.0 * (0..3).map(|r| x.row(r)[j] * resid[r]).sum::<f64>();
        assert!((g.data()[j] - want).abs() < 1e-14);
    }
}

#[test]
fn disjoint_copies_predict_identically() {
    let inst = gen_random_blp(6, 3, 0.6, 13).unwrap();
    let n = inst.num_vars();
    let m = inst.num_cons();
    let mut names: Vec<String> = inst.var_names().to_vec();
    names.extend(inst.var_names().iter().map(|s| format!("{s}_b")));
    let mut obj = inst.objective().to_vec();
    obj.extend_from_slice(inst.objective());
    let mut rows = inst.rows().to_vec();
    rows.extend(
        inst.rows()
            .iter()
            .map(|r| r.iter().map(|&(i, a)| (i + n, a)).collect::<Vec<_>>()),
    );
    let mut rhs = inst.rhs().to_vec();
    rhs.extend_from_slice(inst.rhs());
    let cons: Vec<String> = (0..2 * m).map(|j| format!("c{j}")).collect();
    let doubled = BlpInstance::new(names, obj, cons, rows, rhs).unwrap();
    // the error variants normalize over all constraints, so only plain ones are separable
    for arch in [Architecture::SagePlain, Architecture::EcPlain] {
        let model = GnnModel::new(arch, 2);
        let single = model.forward(&featurized_graph(&inst)).unwrap();
        let both = model.forward(&featurized_graph(&doubled)).unwrap();
        for i in 0..n {
            assert!((both[i] - single[i]).abs() < 1e-12);
            assert!((both[i + n] - single[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn training_is_deterministic_and_lr_zero_is_inert() {
    let data: Vec<TrainingExample> = (0..4)
        .map(|s| labelled(&gen_random_blp(6, 3, 0.5, s).unwrap()))
        .collect();
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let (a, la) = train(Architecture::SageErr, &data, &cfg).unwrap();
    let (b, lb) = train(Architecture::SageErr, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let frozen = TrainConfig {
        learning_rate: 0.0,
        ..cfg
    };
    let (c, _) = train(Architecture::EcErr, &data, &frozen).unwrap();
    assert_eq!(c, GnnModel::new(Architecture::EcErr, frozen.init_seed));
}

#[test]
fn overfits_one_instance() {
    let ex = labelled(&gen_random_blp(10, 6, 0.5, 1).unwrap());
    let (model, log) = train(
        Architecture::SageErr,
        std::slice::from_ref(&ex),
        &TrainConfig::default(),
    )
    .unwrap();
    assert!(log.val_indices.is_empty());
    let first = log.epochs.first().unwrap().train_loss;
    let last = log.epochs.last().unwrap().train_loss;
    assert!(last < first);
    assert_eq!(label_accuracy(&model, &ex).unwrap(), 1.0);
}

#[test]
fn saved_model_predicts_identically() {
    let data: Vec<TrainingExample> = (0..3)
        .map(|s| labelled(&gen_random_blp(6, 3, 0.5, s).unwrap()))
        .collect();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    for arch in Architecture::ALL {
        let (model, _) = train(arch, &data, &cfg).unwrap();
        let back = load_model(&save_model(&model).unwrap()).unwrap();
        assert_eq!(back, model);
        let g = featurized_graph(&gen_random_blp(9, 4, 0.5, 77).unwrap());
        let x: Vec<u64> = model
            .forward(&g)
            .unwrap()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        let y: Vec<u64> = back
            .forward(&g)
            .unwrap()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        assert_eq!(x, y);
    }
}

#[test]
fn residual_distribution_sums_to_one() {
    let inst = gen_gisp_er(&GispParams::set2(10, 0.3, 4)).unwrap();
    let trace = GnnModel::new(Architecture::SageErr, 0)
        .trace(&featurized_graph(&inst))
        .unwrap();
    assert_eq!(trace.residuals.len(), mipgnn::gnn::NUM_ROUNDS);
    for e in &trace.residuals {
        assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(e.iter().all(|&p| p > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_follow_variable_permutations(seed in 0u64..1000, arch_i in 0usize..4) {
        let arch = Architecture::ALL[arch_i];
        let inst = gen_random_blp(7, 4, 0.5, seed).unwrap();
        let model = small(arch, seed);
        let base = model.forward(&featurized_graph(&inst)).unwrap();
        let mut perm: Vec<usize> = (0..inst.num_vars()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = model.forward(&featurized_graph(&inst.permute_vars(&perm))).unwrap();
        for i in 0..perm.len() {
            prop_assert!((out[perm[i]] - base[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn predictions_are_probabilities(seed in 0u64..1000) {
        let inst = gen_random_blp(6, 3, 0.5, seed).unwrap();
        let p = GnnModel::new(Architecture::EcErr, seed).forward(&featurized_graph(&inst)).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn loss_is_weighted_mean() {
    let inst = gen_random_blp(5, 3, 0.6, 6).unwrap();
    let g = featurized_graph(&inst);
    let inputs = GraphInputs::new(&g).unwrap();
    let model = small(Architecture::SagePlain, 3);
    let z = model.logits(&inputs);
    let y = [1.0, 0.0, 1.0, 1.0, 0.0];
    let w = [2.0, 1.0, 1.0, 0.5, 1.0];
    let want: f64 = z
        .iter()
        .zip(&y)
        .zip(&w)
        .map(|((&z, &y), &w)| {
            let p = 1.0 / (1.0 + (-z).exp());
            -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / 5.0;
    let t: Rc<[f64]> = y.to_vec().into();
    let wt: Rc<[f64]> = w.to_vec().into();
    assert!((model.loss(&inputs, &t, &wt) - want).abs() < 1e-12);
}
