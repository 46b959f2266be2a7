use std::fmt::Write;

use crate::geometry::BBox;

use super::EvalError;

/// Intersection over union; 0 for disjoint boxes.
pub fn overlap(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// Euclidean distance between box centers.
pub fn center_error(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// `0.00, 0.05, ..., 1.00`.
pub fn default_success_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// A rate per threshold plus a scalar summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub thresholds: Vec<f64>,
    pub rates: Vec<f64>,
    pub summary: f64,
}

impl EvalCurve {
    pub fn rate_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| (t - threshold).abs() < 1e-9)
            .map(|i| self.rates[i])
    }

    /// `threshold,rate` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,rate\n");
        for (t, r) in self.thresholds.iter().zip(&self.rates) {
            let _ = writeln!(s, "{t},{r}");
        }
        s
    }
}

fn check_lengths(pred: &[BBox], gt: &[BBox]) -> Result<(), EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn fraction(n: usize, total: usize) -> f64 {
    n as f64 / total as f64
}

/// Fraction of frames with overlap strictly above each threshold; summary is the mean rate.
pub fn success_curve_with(pred: &[BBox], gt: &[BBox], thresholds: &[f64]) -> Result<EvalCurve, EvalError> {
    check_lengths(pred, gt)?;
    let ious: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| overlap(p, g)).collect();
    let rates: Vec<f64> = thresholds
        .iter()
        .map(|&t| fraction(ious.iter().filter(|&&v| v > t).count(), ious.len()))
        .collect();
    let summary = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
    Ok(EvalCurve {
        thresholds: thresholds.to_vec(),
        rates,
        summary,
    })
}

pub fn success_curve(pred: &[BBox], gt: &[BBox]) -> Result<EvalCurve, EvalError> {
    success_curve_with(pred, gt, &default_success_thresholds())
}

/// Fraction of frames with center error at most `e` for `e = 0..=max_error`;
/// summary is the rate at 20 px.
pub fn precision_curve(pred: &[BBox], gt: &[BBox], max_error: usize) -> Result<EvalCurve, EvalError> {
    check_lengths(pred, gt)?;
    let errors: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_error(p, g)).collect();
    let thresholds: Vec<f64> = (0..=max_error).map(|e| e as f64).collect();
    let rates: Vec<f64> = thresholds
        .iter()
        .map(|&e| fraction(errors.iter().filter(|&&d| d <= e).count(), errors.len()))
        .collect();
    let summary = fraction(errors.iter().filter(|&&d| d <= 20.0).count(), errors.len());
    Ok(EvalCurve {
        thresholds,
        rates,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64) -> BBox {
        BBox::new(x, y, 10.0, 10.0)
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(&b(0.0, 0.0), &b(0.0, 0.0)), 1.0);
        assert_eq!(overlap(&b(0.0, 0.0), &b(20.0, 0.0)), 0.0);
        assert_eq!(overlap(&BBox::new(0.0, 0.0, 2.0, 2.0), &BBox::new(1.0, 1.0, 2.0, 2.0)), 1.0 / 7.0);
    }

    #[test]
    fn identical_predictions() {
        let gt = vec![b(0.0, 0.0), b(5.0, 5.0)];
        let s = success_curve(&gt, &gt).unwrap();
        assert_eq!(s.thresholds.len(), 21);
        assert_eq!(s.summary, 20.0 / 21.0);
        assert_eq!(s.rate_at(1.0), Some(0.0));
        let p = precision_curve(&gt, &gt, 50).unwrap();
        assert!(p.rates.iter().all(|&r| r == 1.0));
        assert_eq!(p.summary, 1.0);
    }

    #[test]
    fn hand_counts() {
        let gt = vec![b(0.0, 0.0); 3];
        // IoUs {1, 0.5, 0}: shifting 10x10 by 10/3 gives 0.5.
        let pred = vec![b(0.0, 0.0), b(10.0 / 3.0, 0.0), b(50.0, 0.0)];
        let s = success_curve(&pred, &gt).unwrap();
        assert_eq!(s.rate_at(0.45), Some(2.0 / 3.0));
        let pred = vec![b(0.0, 0.0), b(10.0, 0.0), b(30.0, 0.0)];
        let p = precision_curve(&pred, &gt, 50).unwrap();
        assert_eq!(p.summary, 2.0 / 3.0);
        let far = vec![b(25.0, 0.0); 3];
        let p = precision_curve(&far, &gt, 50).unwrap();
        assert_eq!((p.rate_at(20.0), p.rate_at(24.0), p.rate_at(25.0)), (Some(0.0), Some(0.0), Some(1.0)));
    }

    #[test]
    fn disjoint_and_mismatch() {
        let gt = vec![b(0.0, 0.0)];
        assert_eq!(success_curve(&[b(40.0, 40.0)], &gt).unwrap().summary, 0.0);
        assert!(success_curve(&[], &gt).is_err());
        assert!(precision_curve(&[], &[], 50).is_err());
    }
}
