//! Weight initialization: orthogonal for recurrent matrices, scaled-uniform
//! fan-in for everything else, zero biases.

use rand::Rng;

/// Standard normal via Box-Muller; keeps the RNG stream dependency on `rand` only.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)], row-major [rows, cols].
pub fn fanin_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let bound = (1.0 / cols as f64).sqrt();
    (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Orthogonal init via modified Gram-Schmidt on a Gaussian matrix.
/// For rows > cols the columns are orthonormal; transposed internally when
/// rows < cols so the rows come out orthonormal instead.
pub fn orthogonal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let transpose = rows < cols;
    let (r, c) = if transpose { (cols, rows) } else { (rows, cols) };
    // Column-major working set of c columns of length r.
    let mut cols_v: Vec<Vec<f64>> = (0..c).map(|_| (0..r).map(|_| normal(rng)).collect()).collect();
    for j in 0..c {
        for k in 0..j {
            let dot: f64 = (0..r).map(|i| cols_v[j][i] * cols_v[k][i]).sum();
            for i in 0..r {
                cols_v[j][i] -= dot * cols_v[k][i];
            }
        }
        let norm: f64 = cols_v[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // Degenerate draw; fall back to a unit basis vector.
            cols_v[j].iter_mut().for_each(|v| *v = 0.0);
            cols_v[j][j % r] = 1.0;
        } else {
            cols_v[j].iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = if transpose { cols_v[i][j] } else { cols_v[j][i] };
        }
    }
    out
}

pub fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows_are_orthonormal_when_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (rows, cols) = (4, 9);
        let m = orthogonal(&mut rng, rows, cols);
        for a in 0..rows {
            for b in 0..rows {
                let dot: f64 = (0..cols).map(|j| m[a * cols + j] * m[b * cols + j]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "rows {a},{b}: {dot}");
            }
        }
    }

    #[test]
    fn fanin_uniform_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = fanin_uniform(&mut rng, 8, 16);
        let bound = (1.0f64 / 16.0).sqrt();
        assert!(m.iter().all(|v| v.abs() <= bound));
    }
}
