//! Log-sum-exp relaxation of the quantitative semantics with reverse-mode
//! gradients with respect to every trace sample.
//!
//! `softmin_T(x) = -T ln sum exp(-x_i / T)` lies in `[min - T ln n, min]` and
//! `softmax_T` is its mirror image, so each min/max node moves the value by
//! at most `T ln n` toward the conservative (Globally) or optimistic
//! (Eventually) side.

use std::collections::BTreeMap;

use super::ast::{Expr, Formula};
use super::eval::{check_horizon, eval_expr, literal, vector_channels};
use super::{SignalTrace, StlError};

/// d robustness / d sample, keyed by channel name.
pub type TraceGradient = BTreeMap<String, Vec<f64>>;

pub fn smooth_robustness(
    formula: &Formula,
    trace: &SignalTrace,
    t0: usize,
    temperature: f64,
) -> Result<f64, StlError> {
    check_temperature(temperature)?;
    check_horizon(formula, trace, t0)?;
    let node = forward(formula, trace, temperature)?;
    Ok(node.values[t0])
}

/// Smooth robustness at `t0` together with its gradient.
pub fn smooth_robustness_grad(
    formula: &Formula,
    trace: &SignalTrace,
    t0: usize,
    temperature: f64,
) -> Result<(f64, TraceGradient), StlError> {
    check_temperature(temperature)?;
    check_horizon(formula, trace, t0)?;
    let node = forward(formula, trace, temperature)?;
    let value = node.values[t0];
    let mut adj = vec![0.0; node.values.len()];
    adj[t0] = 1.0;
    let mut grad = TraceGradient::new();
    backward(&node, &adj, trace, temperature, &mut grad)?;
    Ok((value, grad))
}

fn check_temperature(temperature: f64) -> Result<(), StlError> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(StlError::BadTemperature(temperature))
    }
}

/// Soft minimum and the normalised weights `d softmin / d x_i`.
pub fn softmin_weights(xs: &[f64], temperature: f64, weights: &mut Vec<f64>) -> f64 {
    weights.clear();
    weights.resize(xs.len(), 0.0);
    let m = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if m == f64::INFINITY {
        return m;
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut sum = 0.0;
    for (w, &x) in weights.iter_mut().zip(xs) {
        *w = (-(x - m) / temperature).exp();
        sum += *w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    m - temperature * sum.ln()
}

pub fn softmin(xs: &[f64], temperature: f64) -> f64 {
    let m = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if m.is_infinite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| (-(x - m) / temperature).exp()).sum();
    m - temperature * sum.ln()
}

pub fn softmax(xs: &[f64], temperature: f64) -> f64 {
    let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
    -softmin(&neg, temperature)
}

struct Node<'a> {
    formula: &'a Formula,
    values: Vec<f64>,
    children: Vec<Node<'a>>,
}

fn forward<'a>(formula: &'a Formula, trace: &SignalTrace, temp: f64) -> Result<Node<'a>, StlError> {
    let children = formula
        .children()
        .into_iter()
        .map(|c| forward(c, trace, temp))
        .collect::<Result<Vec<_>, _>>()?;
    let values = match formula {
        Formula::True => vec![f64::INFINITY; trace.len()],
        Formula::Predicate(p) => eval_expr(&p.expr, trace)?
            .into_iter()
            .map(|v| p.margin(v))
            .collect(),
        Formula::Not(_) => children[0].values.iter().map(|v| -v).collect(),
        Formula::And(..) | Formula::Or(..) | Formula::Implies(..) => {
            let (a, b) = (&children[0].values, &children[1].values);
            let n = a.len().min(b.len());
            (0..n)
                .map(|t| match formula {
                    Formula::And(..) => softmin(&[a[t], b[t]], temp),
                    Formula::Or(..) => softmax(&[a[t], b[t]], temp),
                    _ => softmax(&[-a[t], b[t]], temp),
                })
                .collect()
        }
        Formula::Globally(i, _) | Formula::Eventually(i, _) => {
            let x = &children[0].values;
            let n = x.len().saturating_sub(i.end);
            let is_min = matches!(formula, Formula::Globally(..));
            (0..n)
                .map(|t| {
                    let w = &x[t + i.start..=t + i.end];
                    if is_min {
                        softmin(w, temp)
                    } else {
                        softmax(w, temp)
                    }
                })
                .collect()
        }
    };
    Ok(Node { formula, values, children })
}

fn backward(
    node: &Node<'_>,
    adj: &[f64],
    trace: &SignalTrace,
    temp: f64,
    grad: &mut TraceGradient,
) -> Result<(), StlError> {
    let mut w = Vec::new();
    match node.formula {
        Formula::True => {}
        Formula::Predicate(p) => {
            let scaled: Vec<f64> = adj.iter().map(|a| a * p.margin_slope()).collect();
            expr_backward(&p.expr, trace, &scaled, grad)?;
        }
        Formula::Not(_) => {
            let neg: Vec<f64> = adj.iter().map(|a| -a).collect();
            backward(&node.children[0], &neg, trace, temp, grad)?;
        }
        Formula::And(..) | Formula::Or(..) | Formula::Implies(..) => {
            let (ca, cb) = (&node.children[0], &node.children[1]);
            let mut adj_a = vec![0.0; ca.values.len()];
            let mut adj_b = vec![0.0; cb.values.len()];
            for (t, &g) in adj.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let (a, b) = (ca.values[t], cb.values[t]);
                let sign_a = match node.formula {
                    Formula::And(..) => {
                        softmin_weights(&[a, b], temp, &mut w);
                        1.0
                    }
                    Formula::Or(..) => {
                        softmin_weights(&[-a, -b], temp, &mut w);
                        1.0
                    }
                    _ => {
                        softmin_weights(&[a, -b], temp, &mut w);
                        -1.0
                    }
                };
                adj_a[t] += sign_a * g * w[0];
                adj_b[t] += g * w[1];
            }
            backward(ca, &adj_a, trace, temp, grad)?;
            backward(cb, &adj_b, trace, temp, grad)?;
        }
        Formula::Globally(i, _) | Formula::Eventually(i, _) => {
            let child = &node.children[0];
            let is_min = matches!(node.formula, Formula::Globally(..));
            let mut adj_c = vec![0.0; child.values.len()];
            let mut buf = Vec::with_capacity(i.end - i.start + 1);
            for (t, &g) in adj.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                buf.clear();
                let window = &child.values[t + i.start..=t + i.end];
                if is_min {
                    buf.extend_from_slice(window);
                } else {
                    buf.extend(window.iter().map(|v| -v));
                }
                softmin_weights(&buf, temp, &mut w);
                for (j, wj) in w.iter().enumerate() {
                    adj_c[t + i.start + j] += g * wj;
                }
            }
            backward(child, &adj_c, trace, temp, grad)?;
        }
    }
    Ok(())
}

fn accumulate(grad: &mut TraceGradient, channel: &str, len: usize, k: usize, v: f64) {
    grad.entry(channel.to_owned()).or_insert_with(|| vec![0.0; len])[k] += v;
}

fn expr_backward(expr: &Expr, trace: &SignalTrace, adj: &[f64], grad: &mut TraceGradient) -> Result<(), StlError> {
    let n = trace.len();
    match expr {
        Expr::Const(_) => {}
        Expr::Channel(c) => {
            if trace.channel(c).is_none() {
                return Err(StlError::MissingChannel(c.clone()));
            }
            for (k, &a) in adj.iter().enumerate() {
                if a != 0.0 {
                    accumulate(grad, c, n, k, a);
                }
            }
        }
        Expr::Norm { vector, point } => {
            let comps = vector_channels(trace, vector)?;
            let p = literal(point)?;
            let names = ["x", "y", "z"].map(|a| format!("{vector}.{a}"));
            for (k, &a) in adj.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let diff = [comps[0][k] - p[0], comps[1][k] - p[1], comps[2][k] - p[2]];
                let d = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
                if d > 0.0 {
                    for axis in 0..3 {
                        accumulate(grad, &names[axis], n, k, a * diff[axis] / d);
                    }
                }
            }
        }
        Expr::Abs(e) => {
            let inner = eval_expr(e, trace)?;
            let scaled: Vec<f64> = adj.iter().zip(&inner).map(|(a, v)| a * v.signum()).collect();
            expr_backward(e, trace, &scaled, grad)?;
        }
        Expr::Scale(k, e) => {
            let scaled: Vec<f64> = adj.iter().map(|a| a * k).collect();
            expr_backward(e, trace, &scaled, grad)?;
        }
        Expr::Add(a, b) => {
            expr_backward(a, trace, adj, grad)?;
            expr_backward(b, trace, adj, grad)?;
        }
        Expr::Sub(a, b) => {
            expr_backward(a, trace, adj, grad)?;
            let neg: Vec<f64> = adj.iter().map(|v| -v).collect();
            expr_backward(b, trace, &neg, grad)?;
        }
    }
    Ok(())
}
