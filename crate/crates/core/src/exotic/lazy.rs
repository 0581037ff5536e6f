//! Solutions of `B_w u + b = u` with certified `q(n) (3/4)^n` tails, and the
//! norm-growth filter that separates `ℓ²` families from escaping ones.

use serde::Serialize;

use crate::error::{Error, Result};

/// `q(t) = Σ_r coeffs[r] C(t, r)` with nonnegative coefficients, so that
/// `q` is nonnegative and nondecreasing on the naturals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub coeffs: Vec<f64>,
}

fn binomial(n: f64, r: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..r {
        out *= (n - i as f64) / (i + 1) as f64;
    }
    out.max(0.0)
}

impl Envelope {
    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, n: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(r, c)| c * binomial(n as f64, r))
            .sum()
    }

    /// `|c| + Σ_{t<n} p(t)`: since `Σ_{t<n} C(t, r) = C(n, r + 1)` this shifts
    /// every coefficient up one degree.
    fn integrate(&self, c: f64) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(c.abs());
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    /// `|v(n+1)| <= q(n) (3/4)^n`.
    pub fn bound(&self, n: usize) -> f64 {
        self.eval(n) * 0.75f64.powi(n as i32)
    }

    /// Rigorous upper bound for `Σ_{n>=m} q(n)^2 (9/16)^n`, the squared mass
    /// of the entries past index `m`. For `n >= m >= deg q` the ratio
    /// `q(n+1)/q(n)` is at most `(m+1)/(m+1-deg q)`, so the tail is dominated
    /// by a geometric series. Returns `None` if that series does not converge.
    pub fn tail_mass_sq(&self, m: usize) -> Option<f64> {
        let r = self.degree();
        if m < r {
            return None;
        }
        let rho = (m + 1) as f64 / (m + 1 - r) as f64;
        let ratio = rho * rho * 9.0 / 16.0;
        if ratio >= 1.0 {
            return None;
        }
        let first = self.bound(m);
        Some(first * first / (1.0 - ratio))
    }
}

/// Entries `u(1..=len)` of an `ℓ²` sequence produced by the recursion, with
/// its certified envelope.
#[derive(Debug, Clone, Serialize)]
pub struct LazyVector {
    pub entries: Vec<f64>,
    pub envelope: Envelope,
    /// Largest `|w(n) u(n+1) + b(n) - u(n)|` over computed indices.
    pub equation_residual: f64,
    /// Largest `|u(n+1)| / (q(n)(3/4)^n)` over computed indices.
    pub envelope_ratio: f64,
    /// Whether every weight used was at least `4/3`, which the envelope needs.
    pub weights_admissible: bool,
}

impl LazyVector {
    pub fn zero(len: usize) -> Self {
        Self {
            entries: vec![0.0; len],
            envelope: Envelope::zero(),
            equation_residual: 0.0,
            envelope_ratio: 0.0,
            weights_admissible: true,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `u(n)`, 1-based.
    pub fn get(&self, n: usize) -> f64 {
        self.entries[n - 1]
    }

    pub fn truncated(&self, m: usize) -> &[f64] {
        &self.entries[..m.min(self.entries.len())]
    }

    pub fn respects_envelope(&self) -> bool {
        self.weights_admissible && self.envelope_ratio <= 1.0 + 1e-12
    }

    /// Certified `ℓ²` mass beyond the first `m` entries.
    pub fn tail_bound(&self, m: usize) -> Option<f64> {
        self.envelope.tail_mass_sq(m).map(f64::sqrt)
    }
}

/// Solves `B_w u + b = u` with `u(1) = c` through
/// `u(n+1) = (u(n) - b(n)) / w(n)`, equivalent to the closed form
/// `u(n+1) = c / Π_{k<=n} w(k) - Σ_{m<=n} b(m) / Π_{k=m..n} w(k)`.
/// Produces `m + 1` entries, one past the truncation, so the equation can be
/// checked at every index `n <= m`.
pub fn solve_fixed_point(
    w: impl Fn(usize) -> f64,
    b: Option<&LazyVector>,
    c: f64,
    m: usize,
) -> Result<LazyVector> {
    if let Some(b) = b {
        if b.len() < m {
            return Err(Error::InsufficientData(format!(
                "right-hand side has {} entries, need {m}",
                b.len()
            )));
        }
    }
    let bval = |n: usize| b.map_or(0.0, |b| b.get(n));
    let mut u = Vec::with_capacity(m + 1);
    u.push(c);
    let mut admissible = true;
    for n in 1..=m {
        let wn = w(n);
        admissible &= wn >= 4.0 / 3.0;
        u.push((u[n - 1] - bval(n)) / wn);
    }
    let envelope = match b {
        Some(b) => b.envelope.integrate(c),
        None => Envelope::zero().integrate(c).truncate_zero(),
    };
    let mut residual = 0.0f64;
    for n in 1..=m {
        residual = residual.max((w(n) * u[n] + bval(n) - u[n - 1]).abs());
    }
    let mut ratio = 0.0f64;
    for (n, un) in u.iter().enumerate() {
        let bound = envelope.bound(n);
        let r = if bound > 0.0 {
            un.abs() / bound
        } else if *un == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        ratio = ratio.max(r);
    }
    admissible &= b.is_none_or(|b| b.weights_admissible && b.respects_envelope());
    Ok(LazyVector {
        entries: u,
        envelope,
        equation_residual: residual,
        envelope_ratio: ratio,
        weights_admissible: admissible,
    })
}

impl Envelope {
    /// Drops the trailing zero coefficient produced by integrating the zero
    /// polynomial, so that `b = 0` yields a constant envelope.
    fn truncate_zero(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Verdict {
    /// Normalized candidates are Cauchy across truncations.
    Genuine,
    /// Norms grow geometrically with the truncation length.
    Escaping,
    /// Neither signal is clear.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub verdict: L2Verdict,
    pub truncations: Vec<usize>,
    pub norms: Vec<f64>,
    /// `‖v_{k+1} - v_k‖` after normalizing the first coordinate to 1 and
    /// padding the shorter vector with zeros.
    pub successive_distances: Vec<f64>,
    pub growth_ratios: Vec<f64>,
}

/// Classifies a family of candidates computed at increasing truncations.
pub fn l2_membership_test(levels: &[(usize, Vec<f64>)], tail_eps: f64) -> Result<MembershipReport> {
    if levels.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "membership test needs at least three truncation levels, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidSpec("truncation levels must increase".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let normalized: Vec<Vec<f64>> = levels
        .iter()
        .map(|(_, v)| match v.first() {
            Some(&f) if f != 0.0 => v.iter().map(|x| x / f).collect(),
            _ => v.clone(),
        })
        .collect();
    let norms: Vec<f64> = levels.iter().map(|(_, v)| norm(v)).collect();
    let successive_distances: Vec<f64> = normalized
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let len = a.len().max(b.len());
            let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
            (0..len)
                .map(|i| (get(a, i) - get(b, i)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let growth_ratios: Vec<f64> = norms
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let cauchy = successive_distances.iter().all(|d| *d < tail_eps);
    let escaping = growth_ratios.iter().all(|g| *g >= 1.1) && norms.iter().all(|n| *n > 0.0);
    let verdict = if cauchy {
        L2Verdict::Genuine
    } else if escaping {
        L2Verdict::Escaping
    } else {
        L2Verdict::Inconclusive
    };
    Ok(MembershipReport {
        verdict,
        truncations: levels.iter().map(|(m, _)| *m).collect(),
        norms,
        successive_distances,
        growth_ratios,
    })
}

/// The solution of `B_w x = x` with `x(1) = 1`, truncated at each level.
pub fn geometric_family(
    w: impl Fn(usize) -> f64,
    levels: &[usize],
) -> Result<Vec<(usize, Vec<f64>)>> {
    let max = levels.iter().copied().max().unwrap_or(0);
    let u = solve_fixed_point(&w, None, 1.0, max)?;
    Ok(levels
        .iter()
        .map(|&m| (m, u.truncated(m).to_vec()))
        .collect())
}

/// The last-block component of the truncated solution of `x = T_M x + y e`:
/// the shift equation forces the constant vector `(y, y, ..., y)`.
pub fn constant_family(levels: &[usize]) -> Vec<(usize, Vec<f64>)> {
    levels.iter().map(|&m| (m, vec![1.0; m])).collect()
}
