//! Anchor/hair schedules for the hairy half-line.

use super::family::GraphFamily;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleMode {
    /// The doubly exponential schedule `a_n > exp((sum_{i<n} (a_i + b_i))^2)`,
    /// `b_n = floor(n^-4 p^(-2 a_n))`. Only the first term or two are representable.
    Paper,
    /// `a_k = 4 + 3k`, `b_k = ceil(k^-2 p^(-a_k / 2))` capped at [`DESK_HAIR_CAP`].
    Desk,
}

pub const DESK_HAIR_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct HairySchedule {
    pub anchors: Vec<u64>,
    pub hairs: Vec<u64>,
}

impl HairySchedule {
    pub fn into_family(self) -> Result<GraphFamily> {
        GraphFamily::hairy(self.anchors, self.hairs)
    }
}

/// Schedule for anchors `1..=k_max`.
///
/// In `Paper` mode the empty prior sum for the first anchor is taken as 1, so `a_1 = 3`.
pub fn hairy_schedule(mode: ScheduleMode, p: f64, k_max: usize) -> Result<HairySchedule> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let mut anchors = Vec::with_capacity(k_max);
    let mut hairs = Vec::with_capacity(k_max);
    match mode {
        ScheduleMode::Desk => {
            for k in 1..=k_max {
                let a = 4 + 3 * k as u64;
                let raw = (k as f64).powi(-2) * p.powf(-(a as f64) / 2.0);
                let b = if raw.is_finite() && raw < DESK_HAIR_CAP as f64 {
                    (raw.ceil() as u64).max(1)
                } else {
                    DESK_HAIR_CAP
                };
                anchors.push(a);
                hairs.push(b);
            }
        }
        ScheduleMode::Paper => {
            let mut prior: u128 = 1;
            for k in 1..=k_max {
                let overflow = |reason: String| Error::ScheduleOverflow { index: k, reason };
                let exponent = (prior as f64).powi(2);
                // Largest u64 has natural log ~44.36.
                if exponent >= 43.0 {
                    return Err(overflow(format!("a_{k} > exp({exponent})")));
                }
                let a = exponent.exp().floor() as u64 + 1;
                let log_b = -4.0 * (k as f64).ln() - 2.0 * a as f64 * p.ln();
                if log_b >= 43.0 {
                    return Err(overflow(format!("b_{k} = exp({log_b:.1})")));
                }
                let b = ((k as f64).powi(-4) * p.powf(-2.0 * a as f64)).floor() as u64;
                anchors.push(a);
                hairs.push(b);
                prior = if k == 1 { 0 } else { prior };
                prior += a as u128 + b as u128;
            }
        }
    }
    Ok(HairySchedule { anchors, hairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_schedule_first_anchor() {
        let s = hairy_schedule(ScheduleMode::Paper, 0.5, 1).unwrap();
        assert_eq!(s.anchors, vec![3]);
        assert_eq!(s.hairs, vec![64]);
    }

    #[test]
    fn full_schedule_overflows_at_second_anchor() {
        match hairy_schedule(ScheduleMode::Paper, 0.5, 3) {
            Err(Error::ScheduleOverflow { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn desk_schedule_orderings() {
        let p = 0.3;
        let s = hairy_schedule(ScheduleMode::Desk, p, 4).unwrap();
        assert_eq!(s.anchors, vec![7, 10, 13, 16]);
        for (k, (&a, &b)) in s.anchors.iter().zip(&s.hairs).enumerate() {
            let k = (k + 1) as f64;
            assert!(b as f64 * p.powi(a as i32) <= k.powi(-2), "summability at k={k}");
            assert!(b > a, "b_k >> a_k at k={k}");
        }
        assert!(s.anchors.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.hairs, vec![68, 103, 279, 953]);
        assert!(s.into_family().is_ok());
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(hairy_schedule(ScheduleMode::Desk, 1.0, 2).is_err());
        assert!(hairy_schedule(ScheduleMode::Desk, 0.3, 0).is_err());
    }
}
