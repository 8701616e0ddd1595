use crate::nn::tensor::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_inplace(out.data_mut());
    out
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Gradient through ReLU given its output: passes where the output is positive.
pub fn relu_backward_inplace(output: &[f64], grad: &mut [f64]) {
    for (g, y) in grad.iter_mut().zip(output) {
        if *y <= 0.0 {
            *g = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::new(vec![2, 2], vec![-1.0, -0.5, -3.0, -1e-9]).unwrap();
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_mask_is_indicator_by_finite_differences() {
        let xs = [-2.0, -0.3, 0.4, 1.5, -1e-3, 2e-3];
        let y = relu(&Tensor::new(vec![6], xs.to_vec()).unwrap());
        let mut g = vec![1.0; 6];
        relu_backward_inplace(y.data(), &mut g);
        for (i, &x) in xs.iter().enumerate() {
            let h = 1e-5;
            let num = ((x + h).max(0.0) - (x - h).max(0.0)) / (2.0 * h);
            assert!((num - g[i]).abs() < 1e-9);
            assert_eq!(g[i], if x > 0.0 { 1.0 } else { 0.0 });
        }
    }
}
