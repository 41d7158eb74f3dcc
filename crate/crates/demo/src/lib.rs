//! Browser demo. Every export takes plain scalars or strings and returns a JSON
//! string, so the same functions run under `cargo test` on the host.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use normsieve::harness::{verify_beta_decay, BetaDecayConfig};
use normsieve::localdensity::{field_from_value, sieve_product, LocalForm};
use normsieve::nilsequence::{equidistribution_certificate, Coef, DiscrepancyConfig, PolySequence};
use normsieve::numberfield::NumberField;
use normsieve::repfn::{FundamentalDomainQuad, RepStarTable};
use normsieve::{Error, Result};

const MAX_X: u32 = 2_000_000;

fn wrap(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn parse_primes(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| Error::Parse(format!("bad prime {t:?}"))))
        .collect()
}

fn summatory_inner(field: &str, x: u32, s: &str, points: u32) -> Result<Value> {
    if !(2..=MAX_X).contains(&x) {
        return Err(Error::InvalidArgument(format!("x must lie in [2, {MAX_X}]")));
    }
    let s = parse_primes(s)?;
    let spec = field_from_value(&Value::String(field.to_string()))?;
    let field = NumberField::new(spec)?;
    let dom = FundamentalDomainQuad::new(&field)?;
    let (prod, (lo, hi)) = sieve_product(&LocalForm::new(&field), 1.0, &s, 10_000)?;
    let table = RepStarTable::build(&dom, x as u64, &s);
    let step = (x / points.clamp(1, 1000)).max(1);
    let mut acc = 0u64;
    let mut series = Vec::new();
    for m in 1..=x {
        acc += table.get(m as i64);
        if m % step == 0 || m == x {
            series.push(json!([m, acc]));
        }
    }
    let kappa = dom.kappa_exact(true);
    Ok(json!({
        "field_id": dom.field_id,
        "S": s,
        "x": x,
        "kappa": kappa,
        "predicted_ratio": kappa * prod,
        "predicted_bracket": [kappa * prod * lo, kappa * prod * hi],
        "total": acc,
        "ratio": acc as f64 / x as f64,
        "series": series,
    }))
}

/// Running sums of `R*_S(m)` for `1 ≤ m ≤ x`, sampled at about `points` abscissae,
/// next to the predicted slope `κ⁺ ∏_{p∉S} (1 − ρ(p², 0)/p^{2n})`.
#[wasm_bindgen]
pub fn summatory(field: &str, x: u32, s: &str, points: u32) -> String {
    wrap(summatory_inner(field, x, s, points))
}

fn rotation_inner(alpha: f64, beta: f64, n: u32, delta: f64) -> Result<Value> {
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite".into()));
    }
    if n == 0 || n > 200_000 {
        return Err(Error::InvalidArgument("N must lie in [1, 200000]".into()));
    }
    let seq = PolySequence::torus(vec![vec![Coef::Real(0.0), Coef::Real(alpha), Coef::Real(beta)]])?;
    let cfg = DiscrepancyConfig { progressions_per_axis: 100, ..Default::default() };
    let cert = equidistribution_certificate(&seq, &[n as u64], delta, None, &cfg)?;
    let points: Vec<f64> = (0..n.min(2000))
        .map(|k| {
            let k = k as f64;
            (alpha * k + beta * k * k).rem_euclid(1.0)
        })
        .collect();
    Ok(json!({ "certificate": cert, "points": points }))
}

/// Equidistribution certificate for `n ↦ αn + βn²` on the circle.
#[wasm_bindgen]
pub fn rotation(alpha: f64, beta: f64, n: u32, delta: f64) -> String {
    wrap(rotation_inner(alpha, beta, n, delta))
}

fn beta_decay_inner(system: &str, cutoff: u32) -> Result<Value> {
    if cutoff > 2000 {
        return Err(Error::InvalidArgument("cutoff must be at most 2000".into()));
    }
    let cfg = BetaDecayConfig { system: serde_json::from_str(system)?, cutoff: cutoff as u64, seed: 0 };
    let report = verify_beta_decay(&cfg)?;
    Ok(json!({ "table": report.table, "summary": report.exact, "notes": report.notes }))
}

/// Local factors up to `cutoff` for a system given as JSON.
#[wasm_bindgen]
pub fn beta_decay(system: &str, cutoff: u32) -> String {
    wrap(beta_decay_inner(system, cutoff))
}
