//! Streaming per-coordinate posterior summaries.

use rand::Rng;

/// Running mean and variance (Welford) of a vector-valued draw sequence and a
/// reservoir of whole draws for quantiles. Quantiles are exact while the
/// number of draws does not exceed the reservoir capacity.
///
/// The reservoir keeps the same subset of draws for every coordinate, so it
/// is also a valid joint subsample.
#[derive(Debug, Clone, PartialEq)]
pub struct Summaries {
    pub n: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
    capacity: usize,
    reservoir: Vec<Vec<f64>>,
    /// Position in the draw sequence of each reservoir entry.
    ids: Vec<usize>,
}

impl Summaries {
    pub fn new(n: usize, capacity: usize) -> Self {
        Summaries {
            n,
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            capacity: capacity.max(1),
            reservoir: Vec::new(),
            ids: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], rng: &mut impl Rng) {
        assert_eq!(x.len(), self.n);
        self.count += 1;
        let c = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / c;
            *s += d * (v - *m);
        }
        if self.reservoir.len() < self.capacity {
            self.reservoir.push(x.to_vec());
            self.ids.push(self.count - 1);
        } else {
            let j = rng.random_range(0..self.count);
            if j < self.capacity {
                self.reservoir[j] = x.to_vec();
                self.ids[j] = self.count - 1;
            }
        }
    }

    /// Sample variance (denominator `count - 1`).
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2[i] / (self.count - 1) as f64
        }
    }

    pub fn sd(&self, i: usize) -> f64 {
        self.variance(i).sqrt()
    }

    pub fn is_exact(&self) -> bool {
        self.count <= self.capacity
    }

    pub fn retained(&self) -> &[Vec<f64>] {
        &self.reservoir
    }

    /// Index of each retained draw in the order draws were pushed.
    pub fn retained_ids(&self) -> &[usize] {
        &self.ids
    }

    /// Linear-interpolation quantile of coordinate `i`.
    pub fn quantile(&self, i: usize, prob: f64) -> f64 {
        let mut v: Vec<f64> = self.reservoir.iter().map(|d| d[i]).collect();
        quantile_of(&mut v, prob)
    }

    /// Equal-tailed credible interval at `level`.
    pub fn interval(&self, i: usize, level: f64) -> (f64, f64) {
        let mut v: Vec<f64> = self.reservoir.iter().map(|d| d[i]).collect();
        let a = 0.5 * (1.0 - level);
        (quantile_of(&mut v, a), quantile_of(&mut v, 1.0 - a))
    }
}

pub(crate) fn quantile_of(v: &mut [f64], prob: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let h = prob.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn welford_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.random::<f64>() * 3.0, rng.random::<f64>() - 7.0])
            .collect();
        let mut s = Summaries::new(2, 1000);
        for d in &draws {
            s.push(d, &mut rng);
        }
        for i in 0..2 {
            let m: f64 = draws.iter().map(|d| d[i]).sum::<f64>() / 500.0;
            let v: f64 = draws.iter().map(|d| (d[i] - m).powi(2)).sum::<f64>() / 499.0;
            assert!((s.mean[i] - m).abs() < 1e-12);
            assert!((s.variance(i) - v).abs() < 1e-12);
        }
        assert!(s.is_exact());
        assert_eq!(
            s.quantile(0, 0.0),
            draws.iter().map(|d| d[0]).fold(f64::INFINITY, f64::min)
        );
    }

    #[test]
    fn reservoir_stays_bounded_and_nested_intervals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Summaries::new(1, 50);
        for k in 0..1000 {
            s.push(&[k as f64], &mut rng);
        }
        assert_eq!(s.retained().len(), 50);
        assert!(!s.is_exact());
        let (a, b) = s.interval(0, 0.95);
        let (c, d) = s.interval(0, 0.99);
        assert!(c <= a && b <= d);
    }
}
