use rand::Rng;

use super::frames::TrainingExample;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::FlagAugmentedInput;

/// One draw per example: `true` means the optional variables are withheld
/// for the whole window.
pub fn draw_masks(n: usize, mask_probability: f64, rng: &mut impl Rng) -> Vec<bool> {
    (0..n).map(|_| rng.random::<f64>() < mask_probability).collect()
}

/// Splits the example window into `[base | optional]` (the last
/// `n_optional` columns are optional) and, with probability
/// `mask_probability`, replaces the optional values with the placeholder
/// and zero flags.
pub fn apply_flag_masking(
    example: &TrainingExample,
    n_optional: usize,
    mask_probability: f64,
    rng: &mut impl Rng,
) -> Result<FlagAugmentedInput> {
    let w = &example.window;
    if n_optional > w.cols() {
        return Err(Error::Dimension(format!("{n_optional} optional columns in a window of width {}", w.cols())));
    }
    let nb = w.cols() - n_optional;
    let (mut base, mut optional) = (Vec::new(), Vec::new());
    for t in 0..w.rows() {
        base.extend_from_slice(&w.row(t)[..nb]);
        optional.extend_from_slice(&w.row(t)[nb..]);
    }
    let base = Tensor::matrix(w.rows(), nb, base)?;
    let optional = Tensor::matrix(w.rows(), n_optional, optional)?;
    if draw_masks(1, mask_probability, rng)[0] {
        FlagAugmentedInput::masked(base, &optional)
    } else {
        FlagAugmentedInput::available(base, optional)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example() -> TrainingExample {
        let date = NaiveDate::from_ymd_opt(2003, 5, 1).unwrap();
        TrainingExample {
            catchment_id: "a".into(),
            forecast_date: date,
            window_start: date - chrono::Duration::days(3),
            window: Tensor::matrix(3, 3, (1..=9).map(f64::from).collect()).unwrap(),
            target_z: 0.0,
            target: 1.0,
        }
    }

    #[test]
    fn probability_zero_and_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let kept = apply_flag_masking(&example(), 1, 0.0, &mut rng).unwrap();
        assert_eq!(kept.flags.values(), &[1.0; 3]);
        assert_eq!(kept.optional.values(), &[3.0, 6.0, 9.0]);
        assert_eq!(kept.base.values(), &[1.0, 2.0, 4.0, 5.0, 7.0, 8.0]);
        let masked = apply_flag_masking(&example(), 1, 1.0, &mut rng).unwrap();
        assert_eq!(masked.flags.values(), &[0.0; 3]);
        assert_eq!(masked.optional.values(), &[crate::models::PLACEHOLDER; 3]);
        masked.validate().unwrap();
    }

    #[test]
    fn masked_fraction_is_near_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let masked = (0..n)
            .filter(|_| apply_flag_masking(&example(), 1, 0.5, &mut rng).unwrap().flags.values()[0] == 0.0)
            .count();
        let frac = masked as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }
}
