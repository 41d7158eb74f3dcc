//! The W-trick: `w(T) = log log T`, `W(T) = ∏_{p ≤ w} p^{α(p)}` and the set
//! of unexceptional residues modulo `W`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arith::{primes_up_to, valuation};
use crate::error::{Error, Result};
use crate::localdensity::LocalForm;
use crate::repfn::RepStarTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WTrickContext {
    #[serde(rename = "T")]
    pub t: u64,
    pub w: f64,
    /// True when `w` was raised above `log log T` by the caller.
    pub w_overridden: bool,
    #[serde(rename = "W")]
    pub big_w: u64,
    pub alpha: BTreeMap<u64, u32>,
    #[serde(rename = "S", default)]
    pub s: Vec<u64>,
    #[serde(default)]
    pub field_id: Option<String>,
    #[serde(default)]
    pub residues: Vec<u64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `W(T)` from `w = log log T`.
pub fn build_w(t: u64) -> Result<WTrickContext> {
    build_w_with(t, None)
}

/// `W(T)` with an optional upward override of `w`.
pub fn build_w_with(t: u64, w_override: Option<f64>) -> Result<WTrickContext> {
    if t < 16 {
        return Err(Error::InvalidArgument(format!("T = {t} < 16")));
    }
    let log_t = (t as f64).ln();
    let natural = log_t.ln();
    let w = match w_override {
        Some(v) if v < natural => {
            return Err(Error::InvalidArgument(format!("w override {v} is below log log T = {natural}")));
        }
        Some(v) if v >= log_t => {
            return Err(Error::InvalidArgument(format!("w override {v} must stay below log T = {log_t}")));
        }
        Some(v) => v,
        None => natural,
    };
    let mut alpha = BTreeMap::new();
    let mut big_w: u64 = 1;
    for p in primes_up_to((w.floor() as u64).max(2)) {
        let mut a = 1u32;
        while ((p as f64).powi(a as i32)) < log_t {
            a += 1;
        }
        big_w = p
            .checked_pow(a)
            .and_then(|pa| big_w.checked_mul(pa))
            .ok_or_else(|| Error::InvalidArgument("W(T) overflows u64".into()))?;
        alpha.insert(p, a);
    }
    Ok(WTrickContext {
        t,
        w,
        w_overridden: w_override.is_some(),
        big_w,
        alpha,
        s: Vec::new(),
        field_id: None,
        residues: Vec::new(),
        warnings: Vec::new(),
    })
}

impl WTrickContext {
    pub fn log_t(&self) -> f64 {
        (self.t as f64).ln()
    }

    /// `p^{α−1} < log T ≤ p^α` for every prime below `w`.
    pub fn check_exponents(&self) -> bool {
        let l = self.log_t();
        self.alpha.iter().all(|(&p, &a)| (p as f64).powi(a as i32 - 1) < l && l <= (p as f64).powi(a as i32))
    }

    /// The three residue clauses, without the density condition.
    pub fn clauses_hold(&self, a: u64) -> bool {
        self.alpha.iter().all(|(&p, &alpha)| {
            let v = valuation(a as i128, p);
            if self.s.contains(&p) {
                // v_p(A) < α/3, strictly and exactly.
                matches!(v, Some(v) if 3 * v < alpha)
            } else {
                matches!(v, Some(v) if v <= 1)
            }
        })
    }

    /// Compute the unexceptional residues for the prime set `s`.
    pub fn with_residues(mut self, s: &[u64], form: &LocalForm, field_id: Option<String>) -> Result<Self> {
        let mut s: Vec<u64> = s.to_vec();
        s.sort_unstable();
        s.dedup();
        self.warnings.clear();
        for &p in &s {
            match self.alpha.get(&p) {
                None => {
                    return Err(Error::InvalidArgument(format!("prime {p} in S exceeds w(T) = {:.4}", self.w)));
                }
                Some(&a) if a <= 3 => self.warnings.push(format!(
                    "v_{p}(W)/3 = {a}/3 <= 1: only residues prime to {p} remain for this slot"
                )),
                _ => {}
            }
        }
        self.s = s;
        self.field_id = field_id;
        let mut residues = Vec::new();
        for a in 0..self.big_w {
            if self.clauses_hold(a) && form.rho(self.big_w, a as i128)? > 0 {
                residues.push(a);
            }
        }
        self.residues = residues;
        Ok(self)
    }

    pub fn contains(&self, a: i128) -> bool {
        self.residues.binary_search(&(a.rem_euclid(self.big_w as i128) as u64)).is_ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `w`-smooth: every prime factor is at most `w`.
pub fn is_w_smooth(q: u64, w: f64) -> bool {
    q >= 1 && crate::arith::factorize(q).iter().all(|&(p, _)| (p as f64) <= w)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub bound: u64,
    /// Integers with `R*_S(m) > 0` that were tested.
    pub checked: u64,
    /// Integers skipped because they exceed the S-valuation bound.
    pub excluded: u64,
    pub violations: Vec<i64>,
}

/// Every `m` in the support of `R*_S` (within the S-valuation bound) must
/// reduce to an unexceptional residue.
pub fn residue_support_check(ctx: &WTrickContext, table: &RepStarTable, sample_bound: u64) -> Result<SupportReport> {
    if sample_bound > 1_000_000 {
        return Err(Error::InvalidArgument(format!("sample bound {sample_bound} > 10^6")));
    }
    if table.m_max() < sample_bound {
        return Err(Error::InvalidArgument("representation table is shorter than the sample bound".into()));
    }
    let mut rep = SupportReport { bound: sample_bound, ..Default::default() };
    for m in 1..=sample_bound as i64 {
        for mm in [m, -m] {
            if table.get(mm) == 0 {
                continue;
            }
            let over = ctx.s.iter().any(|&p| {
                let v = valuation(mm as i128, p).unwrap();
                3 * v >= ctx.alpha[&p]
            });
            if over {
                rep.excluded += 1;
                continue;
            }
            rep.checked += 1;
            if !ctx.contains(mm as i128) {
                rep.violations.push(mm);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numberfield::presets;
    use crate::repfn::FundamentalDomainQuad;

    #[test]
    fn examples() {
        let t = 10f64.exp().ceil() as u64;
        let c = build_w(t).unwrap();
        assert_eq!(c.big_w, 16);
        assert_eq!(c.alpha[&2], 4);
        assert!(c.check_exponents());
        let t = 3f64.exp().exp().ceil() as u64;
        let c = build_w(t).unwrap();
        assert_eq!(c.alpha.get(&2), Some(&5));
        assert_eq!(c.alpha.get(&3), Some(&3));
        assert_eq!(c.big_w, 864);
        assert!(build_w(15).is_err());
        let small = build_w(100).unwrap();
        assert_eq!(small.alpha.keys().copied().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn residues_gaussian() {
        let t = 10f64.exp().ceil() as u64;
        let lf = LocalForm::from_spec(presets::gaussian()).unwrap();
        let with_s = build_w(t).unwrap().with_residues(&[2], &lf, None).unwrap();
        assert!(with_s.contains(1));
        assert!(!with_s.contains(0));
        let plain = build_w(t).unwrap().with_residues(&[], &lf, None).unwrap();
        assert!(!plain.contains(4));
        assert!(!plain.contains(0));
        let back = WTrickContext::from_json(&plain.to_json()).unwrap();
        assert_eq!(back, plain);
    }

    #[test]
    fn support_check_gaussian() {
        let t = 10f64.exp().ceil() as u64;
        let k = presets::gaussian();
        let lf = LocalForm::from_spec(k.clone()).unwrap();
        let ctx = build_w(t).unwrap().with_residues(&[], &lf, None).unwrap();
        let dom = FundamentalDomainQuad::from_spec(k).unwrap();
        let table = RepStarTable::build(&dom, 10_000, &[]);
        let rep = residue_support_check(&ctx, &table, 10_000).unwrap();
        assert!(rep.checked > 0);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    }
}
