use nalgebra::DMatrix;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Adam state for one parameter matrix.
#[derive(Debug, Clone)]
pub struct Adam {
    m: DMatrix<f64>,
    v: DMatrix<f64>,
    t: i32,
}

impl Adam {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            m: DMatrix::zeros(nrows, ncols),
            v: DMatrix::zeros(nrows, ncols),
            t: 0,
        }
    }

    pub fn step(&mut self, param: &mut DMatrix<f64>, grad: &DMatrix<f64>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for ((p, g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        }
    }
}
