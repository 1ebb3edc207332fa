//! Empirical convergence order `|e_{n+1}| ≈ C |e_n|^κ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub c: f64,
    pub kappa: f64,
    pub pairs: usize,
}

/// Least-squares line through `(log|e_n|, log|e_{n+1}|)` over the iterates
/// whose error lies in `(1e−12, 1e−1)`.
pub fn estimate_order(iterates: &[f64], truth: f64) -> Result<OrderFit> {
    let errors: Vec<f64> = iterates.iter().map(|p| (p - truth).abs()).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = errors
        .windows(2)
        .filter(|w| w[0] > 1e-12 && w[0] < 1e-1 && w[1] > 0.0)
        .map(|w| (w[0].ln(), w[1].ln()))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable error pairs, need at least 4",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("errors do not vary".into()));
    }
    let kappa = sxy / sxx;
    Ok(OrderFit {
        c: (my - kappa * mx).exp(),
        kappa,
        pairs: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_sequence() {
        let it: Vec<f64> = (0..8).map(|n| 0.5_f64.powi(1 << n)).collect();
        let fit = estimate_order(&it, 0.0).unwrap();
        assert!((fit.kappa - 2.0).abs() < 0.05, "{fit:?}");
        assert!((fit.c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_sequence() {
        let it: Vec<f64> = (0..30).map(|n| 0.5_f64.powi(n)).collect();
        let fit = estimate_order(&it, 0.0).unwrap();
        assert!((fit.kappa - 1.0).abs() < 0.05);
        assert!((fit.c - 0.5).abs() < 1e-9);
    }

    #[test]
    fn too_few_pairs() {
        assert!(estimate_order(&[0.5, 0.05, 0.005], 0.0).is_err());
        assert!(estimate_order(&[1.0; 10], 1.0).is_err());
    }
}
