use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over a flat parameter vector with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam {
    params: AdamParams,
    t: u32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(params: AdamParams, len: usize) -> Self {
        assert!((0.0..1.0).contains(&params.beta1) && (0.0..1.0).contains(&params.beta2));
        Self {
            params,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        assert_eq!(x.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let AdamParams { lr, beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for k in 0..x.len() {
            let g = grad[k];
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            x[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        for g in [3.0, -0.25, 1e-3] {
            let p = AdamParams::with_lr(5e-3);
            let mut adam = Adam::new(p, 1);
            let mut x = [1.0];
            adam.step(&mut x, &[g]);
            let expected = 1.0 - p.lr * g / (g.abs() + p.eps);
            assert!((x[0] - expected).abs() < 1e-15, "{g}");
        }
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut adam = Adam::new(AdamParams::with_lr(0.1), 3);
        let mut x = [1.0, -2.0, 0.5];
        for _ in 0..10 {
            adam.step(&mut x, &[0.0; 3]);
        }
        assert_eq!(x, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(AdamParams::with_lr(0.05), 2);
        let mut x = [2.0, -1.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 0.5), 2.0 * (x[1] + 0.25)];
            adam.step(&mut x, &g);
        }
        assert!((x[0] - 0.5).abs() < 1e-3 && (x[1] + 0.25).abs() < 1e-3, "{x:?}");
    }
}
