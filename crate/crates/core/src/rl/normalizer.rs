use ndarray::{Array1, ArrayViewMut2};

/// Running per-dimension mean/std normalizer with clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    count: f64,
    sum: Array1<f64>,
    sum_sq: Array1<f64>,
    mean: Array1<f64>,
    std: Array1<f64>,
    min_std: f64,
    clip: f64,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Normalizer {
            count: 0.0,
            sum: Array1::zeros(dim),
            sum_sq: Array1::zeros(dim),
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
            min_std: 1e-2,
            clip: 5.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f64]>) {
        for row in rows {
            debug_assert_eq!(row.len(), self.dim());
            for (i, &v) in row.iter().enumerate() {
                self.sum[i] += v;
                self.sum_sq[i] += v * v;
            }
            self.count += 1.0;
        }
        if self.count > 0.0 {
            self.mean = &self.sum / self.count;
            let var = (&self.sum_sq / self.count - &self.mean * &self.mean).mapv(|v| v.max(0.0));
            let min_std = self.min_std;
            self.std = var.mapv(|v| v.sqrt().max(min_std));
        }
    }

    pub fn normalize(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = ((x[i] - self.mean[i]) / self.std[i]).clamp(-self.clip, self.clip);
        }
    }

    /// Normalizes columns `offset..offset + dim` of every row in place.
    pub fn normalize_columns(&self, mut x: ArrayViewMut2<f64>, offset: usize) {
        for mut row in x.rows_mut() {
            for i in 0..self.dim() {
                let v = &mut row[offset + i];
                *v = ((*v - self.mean[i]) / self.std[i]).clamp(-self.clip, self.clip);
            }
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.count];
        v.extend(self.sum.iter());
        v.extend(self.sum_sq.iter());
        v
    }

    pub fn from_vec(dim: usize, v: &[f64]) -> Option<Self> {
        if v.len() != 1 + 2 * dim {
            return None;
        }
        let mut n = Normalizer::new(dim);
        let sum = Array1::from(v[1..1 + dim].to_vec());
        let sum_sq = Array1::from(v[1 + dim..].to_vec());
        n.count = v[0];
        n.sum = sum;
        n.sum_sq = sum_sq;
        n.update(std::iter::empty());
        Some(n)
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<f64> {
        &self.std
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_normalizer_is_identity_within_clip() {
        let n = Normalizer::new(2);
        let mut out = [0.0; 2];
        n.normalize(&[0.3, -2.0], &mut out);
        assert_eq!(out, [0.3, -2.0]);
    }

    #[test]
    fn standardizes_and_round_trips() {
        let mut n = Normalizer::new(1);
        let data = [[1.0], [2.0], [3.0], [4.0]];
        n.update(data.iter().map(|r| &r[..]));
        assert!((n.mean()[0] - 2.5).abs() < 1e-12);
        assert!((n.std()[0] - 1.25f64.sqrt()).abs() < 1e-12);
        let back = Normalizer::from_vec(1, &n.to_vec()).unwrap();
        assert_eq!(back, n);
        let mut out = [0.0];
        n.normalize(&[1000.0], &mut out);
        assert_eq!(out[0], 5.0);
    }

    proptest::proptest! {
        #[test]
        fn outputs_are_clipped(
            data in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 1..30),
            probe in proptest::collection::vec(-1e6f64..1e6, 3),
        ) {
            let mut n = Normalizer::new(3);
            n.update(data.iter().map(|r| &r[..]));
            proptest::prop_assert!(n.std().iter().all(|&s| s >= 1e-2));
            let mut out = [0.0; 3];
            n.normalize(&probe, &mut out);
            proptest::prop_assert!(out.iter().all(|v| v.abs() <= 5.0));
        }
    }
}
