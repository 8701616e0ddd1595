//! Ordered parameter traversal shared by the optimizer, gradient checks and checkpoints.

/// A module whose trainable parameters (and non-trainable buffers such as
/// batch-norm running statistics) can be visited in a fixed declared order.
///
/// Gradients are stored in a value of the same type, obtained with
/// [`Params::zeros_like`], so parameter and gradient traversals line up.
pub trait Params: Clone {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn visit_buffers(&self, _f: &mut dyn FnMut(&str, &[f64])) {}
    fn visit_buffers_mut(&mut self, _f: &mut dyn FnMut(&str, &mut [f64])) {}

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, p| n += p.len());
        n
    }

    fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.visit_mut(&mut |_, p| p.fill(0.0));
        g
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, p| out.extend_from_slice(p));
        out
    }

    fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "set_flat: length mismatch");
        let mut off = 0;
        self.visit_mut(&mut |_, p| {
            p.copy_from_slice(&flat[off..off + p.len()]);
            off += p.len();
        });
    }

    /// `self += other`, parameter-wise.
    fn accumulate(&mut self, other: &Self) {
        let flat = other.flatten();
        let mut off = 0;
        self.visit_mut(&mut |_, p| {
            let n = p.len();
            for (a, b) in p.iter_mut().zip(&flat[off..off + n]) {
                *a += b;
            }
            off += n;
        });
    }

    fn names(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |name, p| out.push((name.to_string(), p.len())));
        out
    }
}

