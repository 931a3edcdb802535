//! Canned gradient-check scenarios covering every op kind.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gradcheck::{grad_check, GradCheckReport};
use crate::graph::Graph;
use crate::tensor::Tensor;
use crate::TensorError;

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_EPSILON: f64 = 1e-5;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Values bounded away from zero, for hinge ops and norms.
fn rand_vec_off_hinge(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(0.2..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn rand_positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.3..1.5)).collect()
}

fn leaf(rng: &mut ChaCha8Rng, name: &str, shape: &[usize]) -> (String, Tensor) {
    let numel = shape.iter().product();
    let t = Tensor::param(shape, rand_vec(rng, numel)).expect("finite random leaf");
    (name.to_string(), t)
}

/// Weighted scalar readout so output gradients are non-uniform.
fn readout(g: &mut Graph, out: &Tensor, weights: &Tensor) -> Result<Tensor, TensorError> {
    let flat = g.reshape(out, &[out.numel()])?;
    let prod = g.mul(&flat, weights)?;
    g.sum_all(&prod)
}

fn const_weights(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    Tensor::from_vec(&[n], rand_vec(rng, n)).expect("finite weights")
}

type Check = (String, GradCheckReport);

fn run_case<F>(
    name: &str,
    leaves: Vec<(String, Tensor)>,
    build: F,
    tolerance: f64,
) -> Result<Check, TensorError>
where
    F: Fn(&mut Graph) -> Result<Tensor, TensorError>,
{
    let report = grad_check(&leaves, build, tolerance, DEFAULT_EPSILON)?;
    Ok((name.to_string(), report))
}

/// One gradient check per op kind, all leaves seeded from `seed`.
pub fn standard_op_suite(seed: u64, tolerance: f64) -> Result<Vec<Check>, TensorError> {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // linear 4 -> 3 with bias
    {
        let x = leaf(rng, "x", &[4]);
        let w = leaf(rng, "w", &[3, 4]);
        let b = leaf(rng, "b", &[3]);
        let cw = const_weights(rng, 3);
        let (xt, wt, bt) = (x.1.clone(), w.1.clone(), b.1.clone());
        checks.push(run_case(
            "linear",
            vec![x, w, b],
            move |g| {
                let y = g.linear(&xt, &wt, Some(&bt))?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // conv2d 2x5x5 -> 3 channels, 3x3 kernel, stride 2, pad 1
    {
        let x = leaf(rng, "x", &[2, 5, 5]);
        let k = leaf(rng, "k", &[3, 2, 3, 3]);
        let b = leaf(rng, "b", &[3]);
        let cw = const_weights(rng, 3 * 3 * 3);
        let (xt, kt, bt) = (x.1.clone(), k.1.clone(), b.1.clone());
        checks.push(run_case(
            "conv2d",
            vec![x, k, b],
            move |g| {
                let y = g.conv2d(&xt, &kt, Some(&bt), 2, 1)?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // lstm_cell with 8 hidden units
    {
        let hsize = 8;
        let x = leaf(rng, "x", &[5]);
        let h = leaf(rng, "h", &[hsize]);
        let c = leaf(rng, "c", &[hsize]);
        let wx = leaf(rng, "w_x", &[4 * hsize, 5]);
        let wh = leaf(rng, "w_h", &[4 * hsize, hsize]);
        let b = leaf(rng, "b", &[4 * hsize]);
        let cw_h = const_weights(rng, hsize);
        let cw_c = const_weights(rng, hsize);
        let (xt, ht, ct) = (x.1.clone(), h.1.clone(), c.1.clone());
        let (wxt, wht, bt) = (wx.1.clone(), wh.1.clone(), b.1.clone());
        checks.push(run_case(
            "lstm_cell",
            vec![x, h, c, wx, wh, b],
            move |g| {
                let (h_new, c_new) = g.lstm_cell(&xt, &ht, &ct, &wxt, &wht, &bt)?;
                let a = readout(g, &h_new, &cw_h)?;
                let b = readout(g, &c_new, &cw_c)?;
                g.add(&a, &b)
            },
            tolerance,
        )?);
    }

    // embedding_lookup from a 6x3 table
    {
        let table = leaf(rng, "table", &[6, 3]);
        let cw = const_weights(rng, 3 * 3);
        let tt = table.1.clone();
        checks.push(run_case(
            "embedding_lookup",
            vec![table],
            move |g| {
                let y = g.embedding_lookup(&tt, &[4, 0, 4])?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // softmax over a length-5 vector
    {
        let x = leaf(rng, "x", &[5]);
        let cw = const_weights(rng, 5);
        let xt = x.1.clone();
        checks.push(run_case(
            "softmax",
            vec![x],
            move |g| {
                let y = g.softmax(&xt)?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // pointwise unaries
    for (name, kind) in [
        ("sigmoid", 0usize),
        ("tanh", 1),
        ("relu", 2),
        ("log", 3),
        ("clamp_min", 4),
    ] {
        let data = match name {
            "relu" | "clamp_min" => rand_vec_off_hinge(rng, 6),
            "log" => rand_positive(rng, 6),
            _ => rand_vec(rng, 6),
        };
        let x = Tensor::param(&[6], data)?;
        let cw = const_weights(rng, 6);
        let xt = x.clone();
        checks.push(run_case(
            name,
            vec![("x".to_string(), x)],
            move |g| {
                let y = match kind {
                    0 => g.sigmoid(&xt)?,
                    1 => g.tanh(&xt)?,
                    2 => g.relu(&xt)?,
                    3 => g.log(&xt)?,
                    _ => g.clamp_min(&xt, 0.1)?,
                };
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // concat of three vectors
    {
        let a = leaf(rng, "a", &[2]);
        let b = leaf(rng, "b", &[3]);
        let c = leaf(rng, "c", &[1]);
        let cw = const_weights(rng, 6);
        let (at, bt, ct) = (a.1.clone(), b.1.clone(), c.1.clone());
        checks.push(run_case(
            "concat",
            vec![a, b, c],
            move |g| {
                let y = g.concat(&[&at, &bt, &ct])?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // binary elementwise and scalar ops in one expression:
    // sum(((a + b) - b*s) ⊙ b') with a scalar gate
    {
        let a = leaf(rng, "a", &[5]);
        let b = leaf(rng, "b", &[5]);
        let s = leaf(rng, "s", &[1]);
        let cw = const_weights(rng, 5);
        let (at, bt, st) = (a.1.clone(), b.1.clone(), s.1.clone());
        checks.push(run_case(
            "add_sub_mul_scalar",
            vec![a, b, s],
            move |g| {
                let sum = g.add(&at, &bt)?;
                let gated = g.scalar_mul(&st, &bt)?;
                let diff = g.sub(&sum, &gated)?;
                let scaled = g.scale(&diff, 0.7)?;
                let shifted = g.add_scalar(&scaled, 0.3)?;
                let prod = g.mul(&shifted, &bt)?;
                readout(g, &prod, &cw)
            },
            tolerance,
        )?);
    }

    // reductions: mean_all(x) + sum_all(x) + l2_norm(x)
    {
        let x = Tensor::param(&[7], rand_vec_off_hinge(rng, 7))?;
        let xt = x.clone();
        checks.push(run_case(
            "reduce_and_norm",
            vec![("x".to_string(), x)],
            move |g| {
                let s = g.sum_all(&xt)?;
                let m = g.mean_all(&xt)?;
                let n = g.l2_norm(&xt)?;
                let sm = g.add(&s, &m)?;
                g.add(&sm, &n)
            },
            tolerance,
        )?);
    }

    // select + slice + reshape
    {
        let x = leaf(rng, "x", &[8]);
        let cw = const_weights(rng, 3);
        let xt = x.1.clone();
        checks.push(run_case(
            "select_slice_reshape",
            vec![x],
            move |g| {
                let s = g.slice(&xt, 2, 3)?;
                let r = g.reshape(&s, &[3, 1])?;
                let flat = g.reshape(&r, &[3])?;
                let weighted = readout(g, &flat, &cw)?;
                let picked = g.select(&xt, 6)?;
                g.add(&weighted, &picked)
            },
            tolerance,
        )?);
    }

    // factored_linear 4 -> 3 with factor dim 5
    {
        let x = leaf(rng, "x", &[4]);
        let w_in = leaf(rng, "w_in", &[5, 4]);
        let e = leaf(rng, "e", &[5]);
        let w_out = leaf(rng, "w_out", &[3, 5]);
        let b = leaf(rng, "b", &[3]);
        let cw = const_weights(rng, 3);
        let (xt, wit, et, wot, bt) = (
            x.1.clone(),
            w_in.1.clone(),
            e.1.clone(),
            w_out.1.clone(),
            b.1.clone(),
        );
        checks.push(run_case(
            "factored_linear",
            vec![x, w_in, e, w_out, b],
            move |g| {
                let y = g.factored_linear(&xt, &wit, &et, &wot, Some(&bt))?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    // predicted_conv2d: 1x1 kernel predicted from a 4-dim embedding
    {
        let x = leaf(rng, "x", &[2, 3, 3]);
        let e = leaf(rng, "e", &[4]);
        let wk = leaf(rng, "w_k", &[3 * 2, 4]);
        let b = leaf(rng, "b", &[3]);
        let cw = const_weights(rng, 3 * 3 * 3);
        let (xt, et, wkt, bt) = (x.1.clone(), e.1.clone(), wk.1.clone(), b.1.clone());
        checks.push(run_case(
            "predicted_conv2d",
            vec![x, e, wk, b],
            move |g| {
                let y = g.predicted_conv2d(&xt, &et, &wkt, Some(&bt), [3, 2, 1, 1], 1, 0)?;
                readout(g, &y, &cw)
            },
            tolerance,
        )?);
    }

    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_over_many_seeds() {
        for seed in 0..20 {
            let checks = standard_op_suite(seed, DEFAULT_TOLERANCE).unwrap();
            for (name, report) in checks {
                assert!(
                    report.all_pass(),
                    "seed {seed}, op {name}: max rel err {}",
                    report.max_rel_err()
                );
            }
        }
    }

    #[test]
    fn corrupted_backward_is_detected() {
        // A wrong analytic gradient must blow past the tolerance. We fake
        // corruption by checking sigmoid against a readout that uses tanh
        // in the numeric path only.
        let x = Tensor::param(&[4], vec![0.4, -0.3, 0.8, 0.2]).unwrap();
        let xt = x.clone();
        let flip = std::cell::Cell::new(false);
        let report = grad_check(
            &[("x".to_string(), x)],
            move |g| {
                // Analytic pass records sigmoid; numeric re-evaluations see a
                // scaled variant, emulating a corrupted backward rule.
                let y = if flip.get() {
                    let s = g.sigmoid(&xt)?;
                    g.scale(&s, 1.25)?
                } else {
                    flip.set(true);
                    g.sigmoid(&xt)?
                };
                g.sum_all(&y)
            },
            DEFAULT_TOLERANCE,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert!(!report.all_pass());
        assert!(report.max_rel_err() >= 1e-2);
    }
}
