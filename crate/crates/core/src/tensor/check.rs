//! Central finite-difference gradient checking.
//!
//! `finite_diff_check` runs one analytic backward pass and compares it
//! against central differences with eps = 1e-3, coordinate by coordinate,
//! reporting the worst relative error. The scalar function under test is
//! supplied as a graph builder so the same code path serves both the
//! analytic and the numeric evaluations.

use super::tape::{Tape, Var};
use super::{Result, Tensor, TensorError};

const EPS: f64 = 1e-3;

/// Max over all coordinates of the relative error between the analytic
/// gradient and central differences.
pub fn finite_diff_check<F>(f: F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let coords: Vec<usize> = (0..x.numel()).collect();
    finite_diff_check_coords(f, x, &coords)
}

/// Like [`finite_diff_check`] but restricted to chosen coordinates, for
/// inputs too large to difference exhaustively.
pub fn finite_diff_check_coords<F>(f: F, x: &Tensor, coords: &[usize]) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |point: &Tensor, coord: usize| -> Result<f64> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(point.clone())?;
        let out = f(&mut tape, leaf)?;
        let v = tape.value(out);
        if v.numel() != 1 {
            return Err(TensorError::NonScalarOutput {
                got: v.shape().to_vec(),
            });
        }
        let y = v.item();
        if !y.is_finite() {
            return Err(TensorError::NonFinite {
                op: "finite_diff_check",
                index: coord,
            });
        }
        Ok(y)
    };

    // Analytic gradient from one taped pass.
    let analytic = {
        let mut tape = Tape::new();
        let leaf = tape.leaf_grad(x.clone())?;
        let out = f(&mut tape, leaf)?;
        if tape.value(out).numel() != 1 {
            return Err(TensorError::NonScalarOutput {
                got: tape.value(out).shape().to_vec(),
            });
        }
        tape.backward(out)?;
        tape.grad(leaf)
            .cloned()
            .ok_or_else(|| TensorError::Invalid {
                op: "finite_diff_check",
                msg: "no gradient reached the probe leaf".into(),
            })?
    };

    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for &i in coords {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + EPS;
        let plus = eval(&probe, i)?;
        probe.data_mut()[i] = orig - EPS;
        let minus = eval(&probe, i)?;
        probe.data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * EPS);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::super::{Axis, Tape, Tensor};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn sum_of_squares_gradient() {
        // f = sum(x^2), grad = 2x
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&mut rng, &[5]);
        let err = finite_diff_check(
            |t, v| {
                let sq = t.mul(v, v)?;
                t.sum_all(sq)
            },
            &x,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {}", err);
    }

    #[test]
    fn softmax_cross_entropy_closed_form() {
        // With a one-hot target, d(loss)/d(logits) = softmax(logits) - onehot.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let logits = random_tensor(&mut rng, &[4, 7]);
        let targets = [2usize, 0, 6, 3];

        let mut tape = Tape::new();
        let x = tape.leaf_grad(logits.clone()).unwrap();
        let logp = tape.log_softmax_rows(x).unwrap();
        let picked = tape.gather_index(logp, &targets).unwrap();
        let mean = tape.mean_all(picked).unwrap();
        let loss = tape.scale(mean, -1.0).unwrap();
        tape.backward(loss).unwrap();
        let got = tape.grad(x).unwrap().clone();

        let mut check = Tape::new();
        let xl = check.leaf(logits.clone()).unwrap();
        let sm = check.softmax_rows(xl).unwrap();
        let smv = check.value(sm).data();
        for p in 0..4 {
            for q in 0..7 {
                let expected =
                    (smv[p * 7 + q] - if q == targets[p] { 1.0 } else { 0.0 }) / 4.0;
                let g = got.data()[p * 7 + q];
                assert!(
                    (g - expected).abs() < 1e-12,
                    "({},{}) got {} expected {}",
                    p,
                    q,
                    g,
                    expected
                );
            }
        }

        // And the same loss also passes the numeric check.
        let err = finite_diff_check(
            |t, v| {
                let logp = t.log_softmax_rows(v)?;
                let picked = t.gather_index(logp, &targets)?;
                let mean = t.mean_all(picked)?;
                t.scale(mean, -1.0)
            },
            &logits,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {}", err);
    }

    #[test]
    fn normalized_dot_similarity_gradient() {
        // exp(dot(normalize(a), b_const) / tau) checked at random points.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let a = random_tensor(&mut rng, &[1, 6]);
            let b = random_tensor(&mut rng, &[1, 6]);
            let err = finite_diff_check(
                |t, v| {
                    let an = t.l2_normalize_rows(v)?;
                    let bc = t.leaf(b.clone())?;
                    let bn = t.l2_normalize_rows(bc)?;
                    let bt = t.transpose(bn)?;
                    let dot = t.matmul(an, bt)?;
                    let scaled = t.scale(dot, 1.0 / 0.1)?;
                    let e = t.exp(scaled)?;
                    t.sum_all(e)
                },
                &a,
            )
            .unwrap();
            assert!(err < 1e-4, "relative error {}", err);
        }
    }

    #[test]
    fn every_primitive_passes_gradient_check() {
        // 10 random points per primitive, eps 1e-3, tolerance 1e-4.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        type Builder = fn(&mut Tape, Var) -> super::Result<Var>;
        let cases: Vec<(&str, Vec<usize>, Builder)> = vec![
            ("matmul", vec![3, 4], |t, v| {
                let w = t.leaf(Tensor::from_fn(&[4, 2], |i| (i as f64 * 0.7).sin()))?;
                let y = t.matmul(v, w)?;
                t.sum_all(y)
            }),
            ("matmul_rhs", vec![4, 2], |t, v| {
                let a = t.leaf(Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.3).cos()))?;
                let y = t.matmul(a, v)?;
                t.sum_all(y)
            }),
            ("transpose", vec![3, 5], |t, v| {
                let y = t.transpose(v)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("add", vec![2, 3], |t, v| {
                let o = t.leaf(Tensor::from_fn(&[2, 3], |i| i as f64 * 0.1))?;
                let y = t.add(v, o)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("sub", vec![2, 3], |t, v| {
                let o = t.leaf(Tensor::from_fn(&[2, 3], |i| i as f64 * 0.1))?;
                let y = t.sub(o, v)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("mul", vec![2, 3], |t, v| {
                let o = t.leaf(Tensor::from_fn(&[2, 3], |i| 0.5 + i as f64 * 0.1))?;
                let y = t.mul(v, o)?;
                t.sum_all(y)
            }),
            ("scale", vec![4], |t, v| {
                let y = t.scale(v, -2.5)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("add_row", vec![3, 4], |t, v| {
                let r = t.leaf(Tensor::from_fn(&[4], |i| i as f64 * 0.2 - 0.3))?;
                let y = t.add_row(v, r)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("add_row_row", vec![4], |t, v| {
                let x = t.leaf(Tensor::from_fn(&[3, 4], |i| i as f64 * 0.2 - 1.0))?;
                let y = t.add_row(x, v)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("mul_row", vec![3, 4], |t, v| {
                let r = t.leaf(Tensor::from_fn(&[4], |i| 0.4 + i as f64 * 0.2))?;
                let y = t.mul_row(v, r)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("mul_row_row", vec![4], |t, v| {
                let x = t.leaf(Tensor::from_fn(&[3, 4], |i| i as f64 * 0.2 - 1.0))?;
                let y = t.mul_row(x, v)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("exp", vec![5], |t, v| {
                let y = t.exp(v)?;
                t.sum_all(y)
            }),
            ("log", vec![5], |t, v| {
                // Shift into the positive domain before log.
                let s = t.scale(v, 0.25)?;
                let off = t.leaf(Tensor::from_fn(&[5], |_| 2.0))?;
                let pos = t.add(s, off)?;
                let y = t.log(pos)?;
                t.sum_all(y)
            }),
            ("silu", vec![6], |t, v| {
                let y = t.silu(v)?;
                t.sum_all(y)
            }),
            ("softmax_rows", vec![2, 5], |t, v| {
                let y = t.softmax_rows(v)?;
                let w = t.leaf(Tensor::from_fn(&[2, 5], |i| (i as f64 * 0.9).sin()))?;
                let z = t.mul(y, w)?;
                t.sum_all(z)
            }),
            ("log_softmax_rows", vec![2, 5], |t, v| {
                let y = t.log_softmax_rows(v)?;
                let w = t.leaf(Tensor::from_fn(&[2, 5], |i| (i as f64 * 0.9).cos()))?;
                let z = t.mul(y, w)?;
                t.sum_all(z)
            }),
            ("layer_norm_rows", vec![3, 6], |t, v| {
                let y = t.layer_norm_rows(v)?;
                let w = t.leaf(Tensor::from_fn(&[3, 6], |i| (i as f64 * 0.5).sin()))?;
                let z = t.mul(y, w)?;
                t.sum_all(z)
            }),
            ("l2_normalize_rows", vec![3, 4], |t, v| {
                let y = t.l2_normalize_rows(v)?;
                let w = t.leaf(Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.8).cos()))?;
                let z = t.mul(y, w)?;
                t.sum_all(z)
            }),
            ("sum_all", vec![7], |t, v| t.sum_all(v)),
            ("mean_all", vec![7], |t, v| t.mean_all(v)),
            ("reduce_sum_rows", vec![3, 4], |t, v| {
                let y = t.reduce_sum(v, Axis::Rows)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("reduce_sum_cols", vec![3, 4], |t, v| {
                let y = t.reduce_sum(v, Axis::Cols)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("reduce_mean_rows", vec![3, 4], |t, v| {
                let y = t.reduce_mean(v, Axis::Rows)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("reduce_max_rows", vec![3, 4], |t, v| {
                let y = t.reduce_max(v, Axis::Rows)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("reduce_max_cols", vec![3, 4], |t, v| {
                let y = t.reduce_max(v, Axis::Cols)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("gather_index", vec![3, 5], |t, v| {
                let y = t.gather_index(v, &[4, 0, 2])?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("concat_rows", vec![2, 3], |t, v| {
                let o = t.leaf(Tensor::from_fn(&[1, 3], |i| i as f64))?;
                let y = t.concat_rows(&[v, o])?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("slice_rows", vec![4, 3], |t, v| {
                let y = t.slice_rows(v, 1, 3)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("reshape", vec![2, 6], |t, v| {
                let y = t.reshape(v, &[3, 4])?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("conv2d_input", vec![2, 5, 5], |t, v| {
                let w = t.leaf(Tensor::from_fn(&[3, 2, 3, 3], |i| (i as f64 * 0.37).sin() * 0.4))?;
                let b = t.leaf(Tensor::from_fn(&[3], |i| i as f64 * 0.05))?;
                let y = t.conv2d(v, w, b)?;
                let flat = t.reshape(y, &[3, 25])?;
                let sq = t.mul(flat, flat)?;
                t.sum_all(sq)
            }),
            ("conv2d_weight", vec![3, 2, 3, 3], |t, v| {
                let x = t.leaf(Tensor::from_fn(&[2, 5, 5], |i| (i as f64 * 0.21).cos()))?;
                let b = t.leaf(Tensor::from_fn(&[3], |i| i as f64 * 0.05))?;
                let y = t.conv2d(x, v, b)?;
                let flat = t.reshape(y, &[3, 25])?;
                let sq = t.mul(flat, flat)?;
                t.sum_all(sq)
            }),
            ("conv2d_bias", vec![3], |t, v| {
                let x = t.leaf(Tensor::from_fn(&[2, 5, 5], |i| (i as f64 * 0.21).cos()))?;
                let w = t.leaf(Tensor::from_fn(&[3, 2, 3, 3], |i| (i as f64 * 0.37).sin() * 0.4))?;
                let y = t.conv2d(x, w, v)?;
                let flat = t.reshape(y, &[3, 25])?;
                let sq = t.mul(flat, flat)?;
                t.sum_all(sq)
            }),
            ("upsample2d", vec![3, 3], |t, v| {
                let y = t.upsample2d(v, 7, 7)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
            ("avg_pool2d", vec![6, 6], |t, v| {
                let y = t.avg_pool2d(v, 2)?;
                let sq = t.mul(y, y)?;
                t.sum_all(sq)
            }),
        ];

        for (name, shape, builder) in cases {
            for trial in 0..10 {
                let x = random_tensor(&mut rng, &shape);
                let err = finite_diff_check(builder, &x).unwrap();
                assert!(
                    err < 1e-4,
                    "{} trial {}: relative error {}",
                    name,
                    trial,
                    err
                );
            }
        }
    }

    #[test]
    fn reports_non_finite_function_values() {
        // log of a negative point produces the error, not a bogus gradient.
        let x = Tensor::new(vec![2], vec![0.5, -0.5]).unwrap();
        let res = finite_diff_check(
            |t, v| {
                let y = t.log(v)?;
                t.sum_all(y)
            },
            &x,
        );
        assert!(res.is_err());
    }
}
