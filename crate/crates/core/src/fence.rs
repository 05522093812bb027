//! Symmetric log fence around the median price.

/// Median; even-length input averages the two central values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Median of `ln p`.
pub fn log_median(prices: &[f64]) -> Option<f64> {
    median(&prices.iter().map(|p| p.ln()).collect::<Vec<_>>())
}

/// `mask[i] = |ln p_i − m| ≤ ln r` where `m` is the median of the logs.
pub fn fence_mask(prices: &[f64], r: f64) -> Vec<bool> {
    let Some(m) = log_median(prices) else {
        return Vec::new();
    };
    let bound = r.ln();
    prices.iter().map(|p| (p.ln() - m).abs() <= bound).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn examples() {
        assert_eq!(fence_mask(&[1.0, 1.0, 1.0], 1.5), vec![true; 3]);
        assert_eq!(fence_mask(&[1.0, 1.01, 10.0], 1.5), vec![true, true, false]);
        assert_eq!(fence_mask(&[42.0], 1.5), vec![true]);
        assert!(fence_mask(&[], 1.5).is_empty());
    }

    #[test]
    fn even_median_is_mean_of_central_logs() {
        let m = log_median(&[1.0, 4.0, 100.0, 0.5]).unwrap();
        assert!((m - (1.0f64.ln() + 4.0f64.ln()) / 2.0).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0]), Some(2.0));
        assert_eq!(median(&[]), None);
    }

    proptest! {
        #[test]
        fn ratio_form_agrees(prices in prop::collection::vec(1e-6f64..1e6, 1..40), r in 1.01f64..3.0) {
            let mask = fence_mask(&prices, r);
            let center = log_median(&prices).unwrap().exp();
            for (p, keep) in prices.iter().zip(mask) {
                let ratio = p / center;
                // away from the boundary the two forms must agree
                if (ratio.ln().abs() - r.ln()).abs() > 1e-9 {
                    prop_assert_eq!(keep, (1.0 / r..=r).contains(&ratio));
                }
            }
        }

        #[test]
        fn odd_sets_keep_the_median(prices in prop::collection::vec(1e-6f64..1e6, 0..20).prop_map(|mut v| { if v.len() % 2 == 0 { v.push(1.0) } v }), r in 1.01f64..3.0) {
            let m = median(&prices).unwrap();
            let mask = fence_mask(&prices, r);
            let i = prices.iter().position(|p| *p == m).unwrap();
            prop_assert!(mask[i]);
        }
    }
}
