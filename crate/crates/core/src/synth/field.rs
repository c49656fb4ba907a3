use rand_distr::{Distribution, StandardNormal};

use super::rng_for;

/// A smooth vector field over grid coordinates: Gaussian vectors on a coarse
/// lattice with node spacing `step` cells, bilinearly interpolated.
#[derive(Debug, Clone)]
pub struct Lattice {
    step: f64,
    nx: usize,
    ny: usize,
    dim: usize,
    nodes: Vec<f64>,
}

impl Lattice {
    pub fn new(seed: &[u64], rows: usize, cols: usize, step: f64, dim: usize, scale: f64) -> Self {
        let nx = ((cols.saturating_sub(1)) as f64 / step).ceil() as usize + 2;
        let ny = ((rows.saturating_sub(1)) as f64 / step).ceil() as usize + 2;
        let mut nodes = Vec::with_capacity(nx * ny * dim);
        for j in 0..ny {
            for i in 0..nx {
                let mut words = seed.to_vec();
                words.extend([j as u64, i as u64]);
                let mut rng = rng_for(&words);
                nodes.extend((0..dim).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)));
            }
        }
        Lattice { step, nx, ny, dim, nodes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn node(&self, i: usize, j: usize) -> &[f64] {
        let at = (j * self.nx + i) * self.dim;
        &self.nodes[at..at + self.dim]
    }

    /// Add the field value at `(x, y)` (grid cells, non-negative) into `out`.
    pub fn eval(&self, x: f64, y: f64, out: &mut [f64]) {
        let (u, v) = (x.max(0.0) / self.step, y.max(0.0) / self.step);
        let i = (u.floor() as usize).min(self.nx - 2);
        let j = (v.floor() as usize).min(self.ny - 2);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let corners = [
            (i, j, (1.0 - fu) * (1.0 - fv)),
            (i + 1, j, fu * (1.0 - fv)),
            (i, j + 1, (1.0 - fu) * fv),
            (i + 1, j + 1, fu * fv),
        ];
        for (ci, cj, w) in corners {
            if w != 0.0 {
                for (o, n) in out.iter_mut().zip(self.node(ci, cj)) {
                    *o += w * n;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_exact_and_midpoints_average() {
        let l = Lattice::new(&[1], 10, 10, 2.0, 3, 1.0);
        let mut a = vec![0.0; 3];
        l.eval(2.0, 4.0, &mut a);
        assert_eq!(a, l.node(1, 2));
        let mut m = vec![0.0; 3];
        l.eval(3.0, 4.0, &mut m);
        for (k, v) in m.iter().enumerate() {
            assert!((v - 0.5 * (l.node(1, 2)[k] + l.node(2, 2)[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_across_cells() {
        let l = Lattice::new(&[2], 9, 9, 2.0, 4, 1.0);
        let (mut a, mut b) = (vec![0.0; 4], vec![0.0; 4]);
        l.eval(3.999_999_9, 1.0, &mut a);
        l.eval(4.0, 1.0, &mut b);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
    }
}
