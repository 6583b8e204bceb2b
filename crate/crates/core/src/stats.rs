//! Small sample statistics used by the Monte Carlo drivers.

/// Running mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Summary) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Normal-approximation 95% half-width.
    pub fn ci95(&self) -> f64 {
        Z95 * self.std_err()
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(hits: u64, trials: u64) -> Self {
        Self { hits, trials }
    }

    pub fn add(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += hit as u64;
    }

    pub fn merge(&mut self, other: Proportion) {
        self.hits += other.hits;
        self.trials += other.trials;
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Standard error of the estimate, `sqrt(p(1-p)/n)`.
    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.estimate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn ci95(&self) -> f64 {
        Z95 * self.std_err()
    }
}

/// Linear-interpolated empirical quantile, `q` in [0, 1]. NaN on empty input.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Result of a one-sided paired test of `mean(a - b) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub std_err: f64,
    /// One-sided 95% lower confidence bound on the mean difference.
    pub lower_bound: f64,
    pub n: u64,
}

impl PairedTest {
    pub fn from_pairs(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len(), "paired samples must have equal length");
        let s: Summary = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self {
            mean_diff: s.mean(),
            std_err: s.std_err(),
            lower_bound: s.mean() - Z95_ONE_SIDED * s.std_err(),
            n: s.count(),
        }
    }

    /// `a` is at least `b` at 95% one-sided confidence.
    pub fn non_inferior(&self) -> bool {
        self.lower_bound >= 0.0
    }

    /// `a` strictly exceeds `b` at 95% one-sided confidence.
    pub fn strictly_greater(&self) -> bool {
        self.lower_bound > 0.0
    }
}
