//! Three-valued monitoring of a formula on a trace prefix.
//!
//! Samples beyond the end of the prefix are unknown and contribute the
//! interval `[-inf, +inf]`. The formula is decided once the interval no
//! longer straddles zero, so `G` can be falsified mid-run while `F` is only
//! decided when its window has been observed.

use super::ast::Formula;
use super::eval::eval_expr;
use super::{SignalTrace, StlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    Pending,
}

/// Lower and upper bound of robustness at `t0` over every continuation of `prefix`.
pub fn prefix_bounds(formula: &Formula, prefix: &SignalTrace, t0: usize) -> Result<(f64, f64), StlError> {
    let sig = bounds(formula, prefix)?;
    Ok(sig.get(t0).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY)))
}

pub fn prefix_verdict(formula: &Formula, prefix: &SignalTrace, t0: usize) -> Result<Verdict, StlError> {
    let (lo, hi) = prefix_bounds(formula, prefix, t0)?;
    Ok(if lo >= 0.0 {
        Verdict::Satisfied
    } else if hi < 0.0 {
        Verdict::Violated
    } else {
        Verdict::Pending
    })
}

const UNKNOWN: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

fn bounds(formula: &Formula, prefix: &SignalTrace) -> Result<Vec<(f64, f64)>, StlError> {
    let n = prefix.len();
    let at = |sig: &[(f64, f64)], k: usize| sig.get(k).copied().unwrap_or(UNKNOWN);
    Ok(match formula {
        Formula::True => vec![(f64::INFINITY, f64::INFINITY); n],
        Formula::Predicate(p) => eval_expr(&p.expr, prefix)?
            .into_iter()
            .map(|v| {
                let m = p.margin(v);
                (m, m)
            })
            .collect(),
        Formula::Not(f) => bounds(f, prefix)?.into_iter().map(|(lo, hi)| (-hi, -lo)).collect(),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let sa = bounds(a, prefix)?;
            let sb = bounds(b, prefix)?;
            (0..n)
                .map(|t| {
                    let (alo, ahi) = at(&sa, t);
                    let (blo, bhi) = at(&sb, t);
                    match formula {
                        Formula::And(..) => (alo.min(blo), ahi.min(bhi)),
                        Formula::Or(..) => (alo.max(blo), ahi.max(bhi)),
                        _ => ((-ahi).max(blo), (-alo).max(bhi)),
                    }
                })
                .collect()
        }
        Formula::Globally(i, f) | Formula::Eventually(i, f) => {
            let child = bounds(f, prefix)?;
            let is_min = matches!(formula, Formula::Globally(..));
            (0..n)
                .map(|t| {
                    let window = (t + i.start..=t + i.end).map(|k| at(&child, k));
                    if is_min {
                        window.fold((f64::INFINITY, f64::INFINITY), |(l, h), (cl, ch)| (l.min(cl), h.min(ch)))
                    } else {
                        window.fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(l, h), (cl, ch)| {
                            (l.max(cl), h.max(ch))
                        })
                    }
                })
                .collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{parse, robustness};

    fn trace_x(values: &[f64]) -> SignalTrace {
        SignalTrace::new(1.0, values.len())
            .unwrap()
            .with_channel("x", values.to_vec())
            .unwrap()
    }

    #[test]
    fn globally_falsified_early() {
        let f = parse("G[0,10](x > 0)").unwrap();
        assert_eq!(prefix_verdict(&f, &trace_x(&[1.0, 2.0]), 0).unwrap(), Verdict::Pending);
        assert_eq!(prefix_verdict(&f, &trace_x(&[1.0, -2.0]), 0).unwrap(), Verdict::Violated);
    }

    #[test]
    fn eventually_undecided_until_observed() {
        let f = parse("F[0,4](x > 3)").unwrap();
        assert_eq!(prefix_verdict(&f, &trace_x(&[0.0, 0.0]), 0).unwrap(), Verdict::Pending);
        assert_eq!(prefix_verdict(&f, &trace_x(&[0.0, 4.0]), 0).unwrap(), Verdict::Satisfied);
        assert_eq!(prefix_verdict(&f, &trace_x(&[0.0; 5]), 0).unwrap(), Verdict::Violated);
    }

    #[test]
    fn complete_trace_matches_exact() {
        let f = parse("G[0,2](x > 0) | F[1,3](x < -1)").unwrap();
        let tr = trace_x(&[0.5, -2.0, 3.0, 1.0, -0.5]);
        let (lo, hi) = prefix_bounds(&f, &tr, 0).unwrap();
        let exact = robustness(&f, &tr, 0).unwrap();
        assert_eq!((lo, hi), (exact, exact));
    }
}
