use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::Tensor;

/// A `[rows, cols]` matrix whose shorter side is orthonormal, times `gain`.
pub fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Tensor {
    // Orthonormalise the shorter set of vectors with modified Gram-Schmidt.
    let (count, len) = if rows >= cols { (cols, rows) } else { (rows, cols) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(count);
    while vecs.len() < count {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        for u in &vecs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= d * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        vecs.push(v);
    }
    let mut data = vec![0.0; rows * cols];
    for (i, v) in vecs.iter().enumerate() {
        for (j, x) in v.iter().enumerate() {
            let (r, c) = if rows >= cols { (j, i) } else { (i, j) };
            data[r * cols + c] = gain * x;
        }
    }
    Tensor::new(vec![rows, cols], data).expect("sized")
}

/// Uniform in `±1/sqrt(fan_in)`.
pub fn fan_in_uniform<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram(t: &Tensor, by_cols: bool) -> Vec<f64> {
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let (count, len) = if by_cols { (c, r) } else { (r, c) };
        let at = |v: usize, k: usize| if by_cols { t.data()[k * c + v] } else { t.data()[v * c + k] };
        let mut out = vec![0.0; count * count];
        for a in 0..count {
            for b in 0..count {
                out[a * count + b] = (0..len).map(|k| at(a, k) * at(b, k)).sum();
            }
        }
        out
    }

    #[test]
    fn orthonormal_columns_or_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c, by_cols) in [(10, 4, true), (3, 7, false), (5, 5, true)] {
            let t = orthogonal(r, c, 2.0, &mut rng);
            let g = gram(&t, by_cols);
            let n = r.min(c);
            for a in 0..n {
                for b in 0..n {
                    let want = if a == b { 4.0 } else { 0.0 };
                    assert!((g[a * n + b] - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn fan_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = fan_in_uniform(&[3, 3, 4], 9, &mut rng);
        assert!(t.data().iter().all(|x| x.abs() <= 1.0 / 3.0));
    }
}
