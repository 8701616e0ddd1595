use crate::error::{Error, Result};

fn check(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "loss needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// `d mse / d pred = 2 (pred - target) / n`.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn random_vs_direct_sum() {
        let p: Vec<f64> = (0..100).map(|i| (i as f64 * 0.77).sin() * 30.0).collect();
        let t: Vec<f64> = (0..100).map(|i| (i as f64 * 0.31).cos() * 30.0).collect();
        let mut acc = 0.0;
        for i in 0..100 {
            acc += (p[i] - t[i]).powi(2);
        }
        assert!((mse_loss(&p, &t).unwrap() - acc / 100.0).abs() <= 1e-12 * acc);
    }

    proptest! {
        #[test]
        fn nonnegative_and_zero_iff_equal(p in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            prop_assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);
            let mut q = p.clone();
            q[0] += 1.0;
            prop_assert!(mse_loss(&p, &q).unwrap() > 0.0);
        }
    }
}
