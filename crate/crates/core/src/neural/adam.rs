use super::Parameters;

/// Bias-corrected Adam with first/second moment buffers shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState<P: Parameters> {
    pub m: P,
    pub v: P,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P, lr: f64) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let m = self.m.slices_mut();
        let v = self.v.slices_mut();
        let p = params.slices_mut();
        let g = grads.slices();
        assert_eq!(p.len(), g.len(), "gradient layout does not match parameters");
        for (((p, g), m), v) in p.into_iter().zip(g).zip(m).zip(v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
