//! Warmup adaptation: dual-averaging step size and a windowed diagonal
//! metric.

use nalgebra::DMatrix;

pub(crate) struct DualAveraging {
    mu: f64,
    target: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

impl DualAveraging {
    pub fn new(step_size: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * step_size).ln(),
            target,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    pub fn restart(&mut self, step_size: f64) {
        *self = DualAveraging::new(step_size, self.target);
    }

    /// Updates with the latest acceptance statistic and returns the next
    /// step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = if accept_stat.is_nan() { 0.0 } else { accept_stat.min(1.0) };
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Welford accumulator for per-coordinate variances.
pub(crate) struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Welford {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    /// Sample variances shrunk toward `1e-3`.
    pub fn regularized(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|s| {
                let var = s / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Welford accumulator for a full covariance matrix.
pub(crate) struct WelfordDense {
    n: f64,
    mean: Vec<f64>,
    m2: DMatrix<f64>,
}

impl WelfordDense {
    pub fn new(dim: usize) -> Self {
        WelfordDense {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / self.n;
        }
        let dim = x.len();
        for i in 0..dim {
            let after = x[i] - self.mean[i];
            for j in 0..dim {
                self.m2[(i, j)] += after * delta[j];
            }
        }
    }

    /// Sample covariance shrunk toward `1e-3 I`.
    pub fn regularized(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut cov = &self.m2 * ((n / (n + 5.0)) / (n - 1.0));
        let dim = cov.nrows();
        // symmetrize away the rounding of the one-sided update
        for i in 0..dim {
            for j in 0..i {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
            cov[(i, i)] += 1e-3 * (5.0 / (n + 5.0));
        }
        cov
    }
}

/// Warmup schedule: an initial fast phase, doubling slow windows for the
/// metric, and a final fast phase for the step size.
pub(crate) struct Schedule {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_end: usize,
    window_size: usize,
}

impl Schedule {
    pub fn new(warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base) = (75, 50, 25);
        if warmup < init_buffer + term_buffer + base {
            init_buffer = (0.15 * warmup as f64) as usize;
            term_buffer = (0.1 * warmup as f64) as usize;
            base = warmup - init_buffer - term_buffer;
        }
        let mut s = Schedule {
            warmup,
            init_buffer,
            term_buffer,
            window_end: 0,
            window_size: base,
        };
        s.window_end = init_buffer + base;
        s.stretch_last();
        s
    }

    fn slow_end(&self) -> usize {
        self.warmup - self.term_buffer
    }

    fn stretch_last(&mut self) {
        let next_end = self.window_end + 2 * self.window_size;
        if next_end > self.slow_end() {
            self.window_end = self.slow_end();
        }
    }

    /// Whether warmup iteration `i` (0-based) contributes to the metric.
    pub fn in_slow_window(&self, i: usize) -> bool {
        i >= self.init_buffer && i < self.slow_end()
    }

    /// Whether a slow window closes after iteration `i`; advances the
    /// schedule if so.
    pub fn window_closes(&mut self, i: usize) -> bool {
        if i + 1 != self.window_end || i + 1 > self.slow_end() {
            return false;
        }
        self.window_size *= 2;
        self.window_end += self.window_size;
        self.stretch_last();
        true
    }
}
