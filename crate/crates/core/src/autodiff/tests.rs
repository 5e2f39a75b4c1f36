use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Sum of `v` weighted elementwise by a fixed random tensor.
fn project(tape: &mut Tape<f64>, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.shape(v);
    let w = random(&mut ChaCha8Rng::seed_from_u64(seed), r, c);
    let w = tape.constant(w);
    let p = tape.mul(v, w)?;
    Ok(tape.sum_all(p))
}

fn check<F>(rows: usize, cols: usize, f: F) -> f64
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let point = random(&mut ChaCha8Rng::seed_from_u64(7), rows, cols);
    gradient_check(&point, 1e-3, f).unwrap()
}

const TOL: f64 = 1e-4;

#[test]
fn leaky_relu_definition() {
    let mut tape = Tape::<f64>::new();
    let x = tape.param(Tensor::scalar(-2.0));
    let y = tape.leaky_relu(x, LEAKY_SLOPE);
    assert!((tape.value(y).data[0] + 0.4).abs() < 1e-12);
    tape.backward(y).unwrap();
    assert!((tape.grad(x).unwrap().data[0] - 0.2).abs() < 1e-12);
}

#[test]
fn segment_sum_example() {
    let mut tape = Tape::<f64>::new();
    let x = tape.param(Tensor::from_f64(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let y = tape.segment_sum(x, vec![0, 0, 1], 2).unwrap();
    assert_eq!(tape.value(y).data, vec![4.0, 6.0, 5.0, 6.0]);
}

#[test]
fn shape_errors_name_the_primitive() {
    let mut tape = Tape::<f64>::new();
    let a = tape.param(Tensor::zeros(2, 3));
    let b = tape.param(Tensor::zeros(2, 3));
    let err = tape.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("matmul") && err.contains("2x3"), "{err}");
    assert!(tape.add_row(a, b).is_err());
    assert!(tape.segment_sum(a, vec![0], 1).is_err());
    assert!(tape.segment_sum(a, vec![0, 5], 2).is_err());
    assert!(tape.gather_rows(a, vec![2]).is_err());
    let c = tape.param(Tensor::zeros(2, 4));
    assert!(tape.edge_contract(a, c).is_err());
    assert!(tape.softmax_cross_entropy(a, &[0, 3], None).is_err());
}

#[test]
fn square_and_constant() {
    let x = Tensor::scalar(3.0);
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let y = tape.mul(v, v).unwrap();
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(v).unwrap().data[0], 6.0);
    assert!(gradient_check(&x, 1e-3, |t, v| t.mul(v, v)).unwrap() < 1e-6);
    let c = gradient_check(&x, 1e-3, |t, _| Ok(t.constant(Tensor::scalar(5.0)))).unwrap();
    assert_eq!(c, 0.0);
}

#[test]
fn non_finite_is_an_error() {
    let x = Tensor::scalar(f64::NAN);
    assert!(gradient_check(&x, 1e-3, |t, v| t.mul(v, v)).is_err());
}

#[test]
fn gradients_of_primitives() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let other = random(&mut rng, 4, 3);
    let row = random(&mut rng, 1, 3);
    let right = random(&mut rng, 3, 5);
    let wide = random(&mut rng, 4, 6);

    let cases: Vec<(&str, f64)> = vec![
        ("matmul_left", check(4, 3, |t, x| {
            let b = t.constant(right.clone());
            let y = t.matmul(x, b)?;
            project(t, y, 1)
        })),
        ("matmul_right", check(3, 5, |t, x| {
            let a = t.constant(other.clone());
            let y = t.matmul(a, x)?;
            project(t, y, 1)
        })),
        ("add", check(4, 3, |t, x| {
            let b = t.constant(other.clone());
            let y = t.add(x, b)?;
            project(t, y, 2)
        })),
        ("add_row_bias", check(1, 3, |t, b| {
            let x = t.constant(other.clone());
            let y = t.add_row(x, b)?;
            project(t, y, 2)
        })),
        ("mul", check(4, 3, |t, x| {
            let y = t.mul(x, x)?;
            project(t, y, 3)
        })),
        ("scale", check(4, 3, |t, x| {
            let y = t.scale(x, -1.7);
            project(t, y, 3)
        })),
        ("leaky_relu", check(4, 3, |t, x| {
            let y = t.leaky_relu(x, LEAKY_SLOPE);
            project(t, y, 4)
        })),
        ("batch_norm_train", check(5, 3, |t, x| {
            let g = t.constant(Tensor::from_f64(1, 3, &[1.5, -0.5, 2.0])?);
            let b = t.constant(Tensor::from_f64(1, 3, &[0.1, 0.2, 0.3])?);
            let (y, _) = t.batch_norm_train(x, g, b)?;
            project(t, y, 5)
        })),
        ("batch_norm_gamma", check(1, 3, |t, g| {
            let x = t.constant(other.clone());
            let b = t.constant(row.clone());
            let (y, _) = t.batch_norm_train(x, g, b)?;
            project(t, y, 5)
        })),
        ("batch_norm_eval", check(4, 3, |t, x| {
            let g = t.constant(row.clone());
            let b = t.constant(row.clone());
            let y = t.batch_norm_eval(x, g, b, &[0.1, -0.2, 0.3], &[0.5, 1.5, 2.0])?;
            project(t, y, 5)
        })),
        ("dropout", check(4, 3, |t, x| {
            let y = t.dropout(x, 0.3, true, &mut ChaCha8Rng::seed_from_u64(9))?;
            project(t, y, 6)
        })),
        ("gather_rows", check(4, 3, |t, x| {
            let y = t.gather_rows(x, vec![3, 0, 0, 2, 3])?;
            project(t, y, 7)
        })),
        ("segment_sum", check(4, 3, |t, x| {
            let y = t.segment_sum(x, vec![1, 0, 1, 2], 3)?;
            project(t, y, 8)
        })),
        ("segment_mean", check(4, 3, |t, x| {
            let y = t.segment_mean(x, vec![1, 0, 1, 1], 3)?;
            project(t, y, 8)
        })),
        ("mean_rows", check(4, 3, |t, x| {
            let y = t.mean_rows(x)?;
            project(t, y, 9)
        })),
        ("concat_cols", check(4, 3, |t, x| {
            let b = t.constant(wide.clone());
            let y = t.concat_cols(&[b, x, x])?;
            project(t, y, 10)
        })),
        ("edge_contract_features", check(4, 3, |t, f| {
            let w = t.constant(random(&mut ChaCha8Rng::seed_from_u64(11), 4, 6));
            let y = t.edge_contract(f, w)?;
            project(t, y, 11)
        })),
        ("edge_contract_kernels", check(4, 6, |t, w| {
            let f = t.constant(other.clone());
            let y = t.edge_contract(f, w)?;
            project(t, y, 12)
        })),
        ("softmax_cross_entropy", check(4, 3, |t, x| t.softmax_cross_entropy(x, &[0, 2, 1, 2], None))),
        ("softmax_cross_entropy_weighted", check(4, 3, |t, x| {
            t.softmax_cross_entropy(x, &[0, 2, 1, 2], Some(&[0.5, 1.0, 2.0]))
        })),
        ("sum_squares", check(4, 3, |t, x| Ok(t.sum_squares(x)))),
    ];
    for (name, err) in &cases {
        assert!(*err < TOL, "{name}: {err}");
    }
}

#[test]
fn composite_graphs() {
    for seed in 0..20u64 {
        let err = check(5, 4, |t, x| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = t.constant(random(&mut rng, 4, 4));
            let h = t.matmul(x, w)?;
            let h = t.leaky_relu(h, LEAKY_SLOPE);
            let h = t.gather_rows(h, vec![0, 4, 2, 2])?;
            let h = t.segment_sum(h, vec![0, 1, 1, 0], 2)?;
            let h = t.mul(h, h)?;
            project(t, h, seed)
        });
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn eval_batch_norm_is_affine() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::from_f64(2, 1, &[1.0, 3.0]).unwrap());
    let g = tape.constant(Tensor::scalar(2.0));
    let b = tape.constant(Tensor::scalar(1.0));
    let y = tape.batch_norm_eval(x, g, b, &[1.0], &[4.0 - BN_EPS]).unwrap();
    let v = &tape.value(y).data;
    assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 3.0).abs() < 1e-12);
}

#[test]
fn batch_norm_train_statistics() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::from_f64(2, 1, &[1.0, 3.0]).unwrap());
    let g = tape.constant(Tensor::scalar(1.0));
    let b = tape.constant(Tensor::scalar(0.0));
    let (y, stats) = tape.batch_norm_train(x, g, b).unwrap();
    assert_eq!(stats.mean, vec![2.0]);
    assert_eq!(stats.var, vec![1.0]);
    let v = &tape.value(y).data;
    assert!((v[0] + 1.0).abs() < 1e-4 && (v[1] - 1.0).abs() < 1e-4);
}

#[test]
fn dropout_modes() {
    let mut tape = Tape::<f64>::new();
    let x = tape.param(Tensor::filled(10, 10, 1.0));
    let same = tape.dropout(x, 0.5, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(same, x);
    let a = tape.dropout(x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let b = tape.dropout(x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(tape.value(a), tape.value(b));
    assert!(tape.value(a).data.iter().all(|&v| v == 0.0 || v == 2.0));
    assert!(tape.value(a).data.contains(&0.0));
}

#[test]
fn row_dropout_zeroes_whole_rows() {
    let mut tape = Tape::<f64>::new();
    let x = tape.param(Tensor::filled(50, 3, 1.0));
    let y = tape.row_dropout(x, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let v = tape.value(y);
    for r in 0..50 {
        let row = v.row(r);
        assert!(row.iter().all(|&e| e == row[0]));
    }
}

#[test]
fn segment_sum_then_gather_preserves_totals() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::<f64>::new();
    let x = tape.param(random(&mut rng, 6, 2));
    let seg = vec![2, 0, 2, 1, 0, 2];
    let s = tape.segment_sum(x, seg.clone(), 3).unwrap();
    let g = tape.gather_rows(s, seg.clone()).unwrap();
    let m = tape.segment_mean(g, seg, 3).unwrap();
    assert_eq!(tape.value(m), tape.value(s));
}

#[test]
fn backward_requires_scalar() {
    let mut tape = Tape::<f64>::new();
    let x = tape.param(Tensor::zeros(2, 2));
    assert!(tape.backward(x).is_err());
}

#[test]
fn constants_get_no_gradient() {
    let mut tape = Tape::<f32>::new();
    let x = tape.param(Tensor::filled(2, 2, 1.0));
    let c = tape.constant(Tensor::filled(2, 2, 3.0));
    let y = tape.mul(x, c).unwrap();
    let s = tape.sum_all(y);
    tape.backward(s).unwrap();
    assert!(tape.grad(c).is_none());
    assert_eq!(tape.grad(x).unwrap().data, vec![3.0; 4]);
}
