use rand::Rng;

use super::Mode;
use crate::{HgrError, Result};

/// Inverted dropout. Returns the output and the applied per-element scale
/// (0 for dropped elements, `1/(1-rate)` for survivors, 1 in inference).
pub fn dropout_apply<R: Rng>(x: &[f64], rate: f64, rng: &mut R, mode: Mode) -> Result<(Vec<f64>, Vec<f64>)> {
    let mask = dropout_mask(x.len(), rate, rng, mode)?;
    Ok((x.iter().zip(&mask).map(|(a, m)| a * m).collect(), mask))
}

pub fn dropout_mask<R: Rng>(n: usize, rate: f64, rng: &mut R, mode: Mode) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(HgrError::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout_apply(&x, 0.0, &mut rng, Mode::Train).unwrap().0, x);
        assert_eq!(dropout_apply(&x, 0.7, &mut rng, Mode::Infer).unwrap().0, x);
        assert!(matches!(dropout_apply(&x, 1.0, &mut rng, Mode::Train), Err(HgrError::Config(_))));
    }

    #[test]
    fn zero_fraction_and_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = vec![1.0; 100_000];
        let (y, _) = dropout_apply(&x, 0.3, &mut rng, Mode::Train).unwrap();
        let zeros = y.iter().filter(|v| **v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.3).abs() < 0.01, "{zeros}");
        let mean = y.iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
