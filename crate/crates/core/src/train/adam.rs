use super::TrainError;
use crate::nn::{Network, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moments per parameter group, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
    pub t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(config: AdamConfig, group_sizes: &[usize]) -> Self {
        AdamState {
            config,
            m: group_sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: group_sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
            t: 0,
        }
    }

    pub fn for_network(config: AdamConfig, network: &Network<F>) -> Self {
        let sizes: Vec<usize> = network.trainable().iter().map(|g| g.len()).collect();
        AdamState::new(config, &sizes)
    }

    /// One bias-corrected update of every group.
    pub fn step(&mut self, params: &mut [&mut [F]], grads: &[Vec<F>]) -> Result<(), TrainError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TrainError::shape("parameter groups", self.m.len(), params.len().max(grads.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(TrainError::shape("parameter group size", self.m[i].len(), p.len().max(g.len())));
            }
        }
        self.t += 1;
        let c = self.config;
        let t = self.t as i32;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let (one_b1, one_b2) = (F::of(1.0 - c.beta1), F::of(1.0 - c.beta2));
        let corr1 = F::of(1.0 - c.beta1.powi(t));
        let corr2 = F::of(1.0 - c.beta2.powi(t));
        let (lr, eps) = (F::of(c.lr), F::of(c.epsilon));
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for j in 0..p.len() {
                m[j] = b1 * m[j] + one_b1 * g[j];
                v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
                let m_hat = m[j] / corr1;
                let v_hat = v[j] / corr2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<F: Real>(params: &mut [&mut [F]], grads: &[Vec<F>], state: &mut AdamState<F>) -> Result<(), TrainError> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(theta: f64, g: f64, steps: usize) -> (f64, AdamState<f64>) {
        let mut st = AdamState::new(AdamConfig::default(), &[1]);
        let mut p = [theta];
        for _ in 0..steps {
            st.step(&mut [&mut p[..]], &[vec![g]]).unwrap();
        }
        (p[0], st)
    }

    #[test]
    fn first_step_unit_gradient() {
        let (p, st) = scalar(0.0, 1.0, 1);
        assert_eq!(st.t, 1);
        assert!((p + 1e-3 / (1.0 + 1e-7)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_bitwise_identity() {
        let mut st = AdamState::<f32>::new(AdamConfig::default(), &[3]);
        let mut p = [0.25f32, -0.0, 7.5];
        let before = p;
        st.step(&mut [&mut p[..]], &[vec![0.0; 3]]).unwrap();
        assert_eq!(p.map(f32::to_bits), before.map(f32::to_bits));
    }

    #[test]
    fn recurrence_oracle() {
        let (p, _) = scalar(0.0, 0.5, 10);
        let (mut m, mut v, mut th) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            m = 0.9 * m + 0.1 * 0.5;
            v = 0.999 * v + 0.001 * 0.25;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            th -= 1e-3 * mh / (vh.sqrt() + 1e-7);
        }
        assert!((p - th).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let mut st = AdamState::<f64>::new(AdamConfig::default(), &[2]);
        let mut p = [0.0; 3];
        assert!(st.step(&mut [&mut p[..]], &[vec![0.0; 3]]).is_err());
        assert_eq!(st.t, 0);
    }
}
