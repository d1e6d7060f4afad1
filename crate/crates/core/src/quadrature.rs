//! Finite discretisations of the measure space `(Ω, μ)`.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    GaussLegendre,
    Trapezoid,
    Midpoint,
}

impl std::str::FromStr for Rule {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss_legendre" => Ok(Rule::GaussLegendre),
            "trapezoid" => Ok(Rule::Trapezoid),
            "midpoint" => Ok(Rule::Midpoint),
            other => Err(input(format!(
                "unknown quadrature rule '{other}' (expected gauss_legendre, trapezoid or midpoint)"
            ))),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rule::GaussLegendre => "gauss_legendre",
            Rule::Trapezoid => "trapezoid",
            Rule::Midpoint => "midpoint",
        })
    }
}

pub const DEFAULT_RULE: Rule = Rule::GaussLegendre;
pub const DEFAULT_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Discrete,
    Interval { a: f64, b: f64, rule: Rule, n: usize },
}

/// Quadrature nodes `(ω_k, w_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDiscretization {
    nodes: Vec<(f64, f64)>,
    provenance: Provenance,
}

impl MeasureDiscretization {
    /// A discrete measure. Repeated nodes and zero weights are allowed.
    pub fn discrete(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(input("discrete measure needs at least one node"));
        }
        for &(omega, w) in &nodes {
            if !omega.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(input(format!("invalid node ({omega}, {w}): weights must be finite and ≥ 0")));
            }
        }
        Ok(MeasureDiscretization {
            nodes,
            provenance: Provenance::Discrete,
        })
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// `Σ w_k f(ω_k)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(omega, w)| w * f(omega)).sum()
    }
}

/// Nodes and weights of a composite or Gaussian rule on `[a, b]`.
/// Trapezoid and midpoint use `n` panels.
pub fn discretize_interval(a: f64, b: f64, rule: Rule, n: usize) -> Result<MeasureDiscretization> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(input(format!("interval needs finite a < b, got [{a}, {b}]")));
    }
    if n < 1 {
        return Err(input("quadrature needs n ≥ 1"));
    }
    let h = (b - a) / n as f64;
    let nodes = match rule {
        Rule::Midpoint => (0..n).map(|i| (a + (i as f64 + 0.5) * h, h)).collect(),
        Rule::Trapezoid => (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { h / 2.0 } else { h };
                (a + i as f64 * h, w)
            })
            .collect(),
        Rule::GaussLegendre => {
            let half = (b - a) / 2.0;
            let mid = (a + b) / 2.0;
            gauss_legendre(n)
                .into_iter()
                .map(|(x, w)| (mid + half * x, half * w))
                .collect()
        }
    };
    Ok(MeasureDiscretization {
        nodes,
        provenance: Provenance::Interval { a, b, rule, n },
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_gauss() {
        let m = discretize_interval(0.0, 1.0, Rule::GaussLegendre, 2).unwrap();
        let s = 1.0 / (2.0 * 3f64.sqrt());
        assert!((m.nodes()[0].0 - (0.5 - s)).abs() < 1e-15);
        assert!((m.nodes()[1].0 - (0.5 + s)).abs() < 1e-15);
        assert!(m.nodes().iter().all(|n| (n.1 - 0.5).abs() < 1e-15));
        assert!((m.integrate(|w| w * w) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_exact_to_degree_2n_minus_1() {
        for n in 1..=20 {
            let m = discretize_interval(-1.0, 2.0, Rule::GaussLegendre, n).unwrap();
            let deg = 2 * n - 1;
            let exact = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            let got = m.integrate(|w| w.powi(deg as i32));
            assert!((got - exact).abs() < 1e-11 * exact.abs().max(1.0), "n={n}");
            assert!((m.total_weight() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_single_panel() {
        let m = discretize_interval(0.0, 2.0, Rule::Midpoint, 1).unwrap();
        assert_eq!(m.nodes(), &[(1.0, 2.0)]);
    }

    #[test]
    fn trapezoid_is_second_order() {
        let err = |n| {
            let m = discretize_interval(0.0, 1.0, Rule::Trapezoid, n).unwrap();
            (m.integrate(|w| w * w) - 1.0 / 3.0).abs()
        };
        for n in [4, 8, 16, 32] {
            let ratio = err(n) / err(2 * n);
            assert!((ratio - 4.0).abs() < 1e-6, "ratio {ratio}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(discretize_interval(1.0, 0.0, Rule::Midpoint, 3).is_err());
        assert!(discretize_interval(0.0, 1.0, Rule::Midpoint, 0).is_err());
        assert!("simpson".parse::<Rule>().is_err());
        assert!(MeasureDiscretization::discrete(vec![(0.0, -1.0)]).is_err());
        assert!(MeasureDiscretization::discrete(vec![(0.0, 0.0), (0.0, 1.0)]).is_ok());
    }
}
