//! Gradient-descent optimizers over the flat parameter list, plus
//! learning-rate schedules. Real-flagged parameters only ever update
//! their real component.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fno::ParamKind;
use crate::tensor::ComplexTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Multiply by gamma every `every` epochs.
    StepDecay { every: usize, gamma: f64 },
    /// Cosine decay to zero over `total` epochs.
    Cosine { total: usize },
}

impl LrSchedule {
    pub fn factor(&self, epoch: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::StepDecay { every, gamma } => gamma.powi((epoch / every.max(&1)) as i32),
            LrSchedule::Cosine { total } => {
                let t = (epoch as f64 / (*total).max(1) as f64).min(1.0);
                0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }

    pub fn parse(name: &str, epochs: usize) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "constant" => Ok(LrSchedule::Constant),
            "step" => Ok(LrSchedule::StepDecay {
                every: (epochs / 3).max(1),
                gamma: 0.5,
            }),
            "cosine" => Ok(LrSchedule::Cosine { total: epochs }),
            other => Err(Error::InvalidArg(format!("unknown lr schedule '{other}'"))),
        }
    }
}

pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn step(
        &self,
        params: Vec<(&mut ComplexTensor, ParamKind)>,
        grads: &[ComplexTensor],
        lr_factor: f64,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidArg("parameter/gradient count mismatch".into()));
        }
        let lr = self.lr * lr_factor;
        for ((tensor, kind), grad) in params.into_iter().zip(grads) {
            for (z, g) in tensor.data_mut().iter_mut().zip(grad.data()) {
                let im = if kind == ParamKind::Complex {
                    z.im - lr * g.im
                } else {
                    z.im
                };
                *z = Complex64::new(z.re - lr * g.re, im);
            }
        }
        Ok(())
    }
}

/// Adam with bias correction; defaults beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8. State is keyed by the canonical parameter order.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(
        &mut self,
        params: Vec<(&mut ComplexTensor, ParamKind)>,
        grads: &[ComplexTensor],
        lr_factor: f64,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidArg("parameter/gradient count mismatch".into()));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(p, _)| vec![0.0; 2 * p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::InvalidArg("optimizer state does not match parameters".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let lr = self.lr * lr_factor;
        for (pi, ((tensor, kind), grad)) in params.into_iter().zip(grads).enumerate() {
            let m = &mut self.m[pi];
            let v = &mut self.v[pi];
            for (j, (z, g)) in tensor.data_mut().iter_mut().zip(grad.data()).enumerate() {
                let comps: &[(usize, f64)] = if kind == ParamKind::Complex {
                    &[(0, g.re), (1, g.im)]
                } else {
                    &[(0, g.re)]
                };
                let mut re = z.re;
                let mut im = z.im;
                for &(c, gc) in comps {
                    let s = 2 * j + c;
                    m[s] = self.beta1 * m[s] + (1.0 - self.beta1) * gc;
                    v[s] = self.beta2 * v[s] + (1.0 - self.beta2) * gc * gc;
                    let m_hat = m[s] / bc1;
                    let v_hat = v[s] / bc2;
                    let delta = lr * m_hat / (v_hat.sqrt() + self.eps);
                    if c == 0 {
                        re -= delta;
                    } else {
                        im -= delta;
                    }
                }
                *z = Complex64::new(re, im);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> ComplexTensor {
        ComplexTensor::scalar(Complex64::new(v, 0.0))
    }

    #[test]
    fn sgd_leaves_params_unchanged_for_zero_gradient() {
        let mut p = scalar_param(1.5);
        let g = ComplexTensor::zeros(&[1]);
        Sgd { lr: 0.1 }
            .step(vec![(&mut p, ParamKind::Real)], &[g], 1.0)
            .unwrap();
        assert_eq!(p.data()[0].re, 1.5);
    }

    #[test]
    fn adam_first_step_is_signed_lr_for_large_gradients() {
        // with bias correction, |step| at t=1 is lr * |g| / (|g| + eps) ~ lr
        let mut adam = Adam::new(0.01);
        let mut p = scalar_param(0.0);
        let g = ComplexTensor::scalar(Complex64::new(1e6, 0.0));
        adam.step(vec![(&mut p, ParamKind::Real)], &[g], 1.0).unwrap();
        assert!((p.data()[0].re + 0.01).abs() <= 1e-10);

        let mut adam = Adam::new(0.01);
        let mut p = scalar_param(0.0);
        let g = ComplexTensor::scalar(Complex64::new(-1e6, 0.0));
        adam.step(vec![(&mut p, ParamKind::Real)], &[g], 1.0).unwrap();
        assert!((p.data()[0].re - 0.01).abs() <= 1e-10);
    }

    #[test]
    fn adam_converges_on_a_quadratic_bowl() {
        // f(x, y) = (x - 3)^2 + 2 (y + 1)^2
        let mut adam = Adam::new(0.05);
        let mut x = scalar_param(0.0);
        let mut y = scalar_param(0.0);
        for _ in 0..500 {
            let gx = 2.0 * (x.data()[0].re - 3.0);
            let gy = 4.0 * (y.data()[0].re + 1.0);
            adam.step(
                vec![(&mut x, ParamKind::Real), (&mut y, ParamKind::Real)],
                &[
                    ComplexTensor::scalar(Complex64::new(gx, 0.0)),
                    ComplexTensor::scalar(Complex64::new(gy, 0.0)),
                ],
                1.0,
            )
            .unwrap();
        }
        assert!((x.data()[0].re - 3.0).abs() <= 1e-6, "{}", x.data()[0].re);
        assert!((y.data()[0].re + 1.0).abs() <= 1e-6, "{}", y.data()[0].re);
    }

    #[test]
    fn real_params_never_grow_imaginary_parts() {
        let mut adam = Adam::new(0.1);
        let mut p = scalar_param(1.0);
        let g = ComplexTensor::scalar(Complex64::new(0.5, 0.7));
        adam.step(vec![(&mut p, ParamKind::Real)], &[g], 1.0).unwrap();
        assert_eq!(p.data()[0].im, 0.0);
    }

    #[test]
    fn schedules() {
        let s = LrSchedule::StepDecay { every: 10, gamma: 0.5 };
        assert_eq!(s.factor(0), 1.0);
        assert_eq!(s.factor(10), 0.5);
        assert_eq!(s.factor(25), 0.25);
        let c = LrSchedule::Cosine { total: 100 };
        assert!((c.factor(0) - 1.0).abs() <= 1e-12);
        assert!((c.factor(50) - 0.5).abs() <= 1e-12);
        assert!(c.factor(100) <= 1e-12);
    }
}
