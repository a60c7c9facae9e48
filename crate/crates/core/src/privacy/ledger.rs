use crate::error::{invalid, Error, Result};

/// Append-only record of privacy spends under basic sequential composition.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyLedger {
    cap: (f64, f64),
    spends: Vec<(f64, f64)>,
}

impl PrivacyLedger {
    pub fn new(cap_epsilon: f64, cap_delta: f64) -> Self {
        PrivacyLedger {
            cap: (cap_epsilon, cap_delta),
            spends: Vec::new(),
        }
    }

    pub fn spends(&self) -> &[(f64, f64)] {
        &self.spends
    }

    fn sum(spends: &[(f64, f64)]) -> (f64, f64) {
        // Summed in sorted order so the total does not depend on spend order.
        let mut eps: Vec<f64> = spends.iter().map(|s| s.0).collect();
        let mut del: Vec<f64> = spends.iter().map(|s| s.1).collect();
        eps.sort_by(f64::total_cmp);
        del.sort_by(f64::total_cmp);
        (eps.iter().sum(), del.iter().sum())
    }

    pub fn total(&self) -> (f64, f64) {
        Self::sum(&self.spends)
    }

    /// Records a spend, or rejects it and leaves the ledger unchanged when
    /// the composed total would exceed the cap.
    pub fn spend(&mut self, epsilon: f64, delta: f64) -> Result<(f64, f64)> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) || !(0.0..1.0).contains(&delta) {
            return Err(invalid(format!("invalid spend ({epsilon}, {delta})")));
        }
        let mut next = self.spends.clone();
        next.push((epsilon, delta));
        let (e, d) = Self::sum(&next);
        if e > self.cap.0 || d > self.cap.1 {
            return Err(Error::BudgetExceeded {
                epsilon: e,
                delta: d,
                cap_epsilon: self.cap.0,
                cap_delta: self.cap.1,
            });
        }
        self.spends = next;
        Ok((e, d))
    }
}
