use crate::{Error, Result};

/// `10·log10(max_value² / MSE(a, b))`, or `+∞` when the inputs are equal.
pub fn psnr(a: &[f64], b: &[f64], max_value: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("psnr over lengths {} and {}", a.len(), b.len())));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(psnr(&[0.3, 0.2], &[0.3, 0.2], 1.0).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&[0.1; 4], &[0.0; 4], 1.0).unwrap(), 20.0);
        assert_eq!(psnr(&[255.0; 9], &[0.0; 9], 255.0).unwrap(), 0.0);
        assert!(psnr(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }
}
