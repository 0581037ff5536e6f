//! Jiang–Wang weight sequences.
//!
//! The base sequence `c(k)` alternates between rising runs `(k+1)/k` and
//! falling runs `k/(k+1)`. The run ends `n_1 < n_2 < ...` are chosen minimal
//! so that the partial products `P(n) = c(1)···c(n)` satisfy `P(n_j) > j` for
//! odd `j` and `P(n_j) < 1/j` for even `j`. Because each run telescopes, all
//! of this is done in exact rational arithmetic; only the fractional powers
//! `a_i(k) = c(k)^(1 - 2^(1-i))` are evaluated in floating point.

use std::fmt;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest shift index whose dyadic exponent fits in a `u64` denominator.
pub const MAX_SHIFT_INDEX: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `c(k) = (k+1)/k`
    Rising,
    /// `c(k) = k/(k+1)`
    Falling,
}

impl Branch {
    /// Branch of the `j`-th run `(n_{j-1}, n_j]` (1-based).
    fn of_run(j: usize) -> Self {
        if j % 2 == 1 {
            Branch::Rising
        } else {
            Branch::Falling
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Rising => f.write_str("rising"),
            Branch::Falling => f.write_str("falling"),
        }
    }
}

/// Run ends `n_1 < ... < n_J` together with the exact products `P(n_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointSchedule {
    breakpoints: Vec<u64>,
    products: Vec<BigRational>,
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `P(n) / P(m)` for `m < n` inside a single run.
fn run_factor(branch: Branch, m: u64, n: u64) -> BigRational {
    match branch {
        Branch::Rising => ratio(n + 1, m + 1),
        Branch::Falling => ratio(m + 1, n + 1),
    }
}

/// Whether `P(n_j)` satisfies the run condition for index `j`.
pub fn product_condition_holds(j: usize, product: &BigRational) -> bool {
    let bound = BigRational::from_integer(BigInt::from(j));
    match Branch::of_run(j) {
        Branch::Rising => *product > bound,
        Branch::Falling => product * &bound < BigRational::one(),
    }
}

impl BreakpointSchedule {
    /// Builds the first `j_max` run ends, each the minimal witness of its
    /// product condition.
    ///
    /// Inside a rising run starting after `m`, `P(n) = P(m)(n+1)/(m+1)`, so
    /// `P(n) > j` first holds at `n = floor(j(m+1)/P(m))`; a falling run is
    /// symmetric with `n = floor(j P(m)(m+1))`.
    pub fn build(j_max: usize) -> Result<Self> {
        let j_max = j_max.max(1);
        let mut breakpoints = vec![1u64];
        let mut products = vec![ratio(2, 1)];
        for j in 2..=j_max {
            let m = *breakpoints.last().unwrap();
            let p = products.last().unwrap();
            let jm = BigRational::from_integer(BigInt::from(j) * BigInt::from(m + 1));
            let threshold = match Branch::of_run(j) {
                Branch::Rising => jm / p,
                Branch::Falling => jm * p,
            };
            let n = threshold
                .floor()
                .to_integer()
                .to_u64()
                .filter(|n| *n < u64::MAX)
                .ok_or(Error::BreakpointOverflow { index: j })?;
            debug_assert!(n > m);
            let next = p * run_factor(Branch::of_run(j), m, n);
            debug_assert!(product_condition_holds(j, &next));
            breakpoints.push(n);
            products.push(next);
        }
        Ok(Self {
            breakpoints,
            products,
        })
    }

    /// Rebuilds a schedule from stored run ends, checking every invariant.
    pub fn from_breakpoints(breakpoints: &[u64]) -> Result<Self> {
        let rebuilt = Self::build(breakpoints.len())?;
        if rebuilt.breakpoints != breakpoints {
            return Err(Error::PropertyViolation {
                clause: "schedule".into(),
                detail: format!(
                    "breakpoints {:?} are not the minimal schedule {:?}",
                    breakpoints, rebuilt.breakpoints
                ),
            });
        }
        Ok(rebuilt)
    }

    pub fn breakpoints(&self) -> &[u64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Largest `k` for which `c(k)` is defined, i.e. `n_J`.
    pub fn covered(&self) -> u64 {
        *self.breakpoints.last().unwrap()
    }

    /// `P(n_j)` for 1-based `j`.
    pub fn product_at_breakpoint(&self, j: usize) -> &BigRational {
        &self.products[j - 1]
    }

    fn check_k(&self, k: u64) -> Result<()> {
        if k == 0 || k > self.covered() {
            return Err(Error::ScheduleTooShort {
                k,
                covered: self.covered(),
            });
        }
        Ok(())
    }

    /// 1-based run index `j` with `n_{j-1} < k <= n_j` (`k = 1` is run 1).
    pub fn run_of(&self, k: u64) -> Result<usize> {
        self.check_k(k)?;
        Ok(self.breakpoints.partition_point(|&n| n < k) + 1)
    }

    pub fn branch(&self, k: u64) -> Result<Branch> {
        Ok(Branch::of_run(self.run_of(k)?))
    }

    pub fn c_value(&self, k: u64) -> Result<Ratio<u64>> {
        Ok(match self.branch(k)? {
            Branch::Rising => Ratio::new_raw(k + 1, k),
            Branch::Falling => Ratio::new_raw(k, k + 1),
        })
    }

    /// `ln c(k)`, accurate to a few ulps even for large `k`.
    pub fn ln_c(&self, k: u64) -> Result<f64> {
        let l = (1.0 / k as f64).ln_1p();
        Ok(match self.branch(k)? {
            Branch::Rising => l,
            Branch::Falling => -l,
        })
    }

    /// Exact `P(n) = c(1)···c(n)` via the telescoping form of each run.
    pub fn base_product(&self, n: u64) -> Result<BigRational> {
        let j = self.run_of(n)?;
        if j == 1 {
            return Ok(ratio(2, 1));
        }
        let m = self.breakpoints[j - 2];
        Ok(&self.products[j - 2] * run_factor(Branch::of_run(j), m, n))
    }

    /// Exact `P(n)` by multiplying every factor; used to cross-check the
    /// telescoping form on short prefixes.
    pub fn base_product_direct(&self, n: u64) -> Result<BigRational> {
        self.check_k(n)?;
        let mut p = BigRational::one();
        for k in 1..=n {
            let c = self.c_value(k)?;
            p *= ratio(*c.numer(), *c.denom());
        }
        Ok(p)
    }

    /// Serializable form carrying the branch label of every run.
    pub fn record(&self) -> ScheduleRecord {
        ScheduleRecord {
            breakpoints: self.breakpoints.clone(),
            branches: (1..=self.len()).map(Branch::of_run).collect(),
            products: self.products.iter().map(|p| p.to_string()).collect(),
        }
    }
}

impl Serialize for BreakpointSchedule {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.record().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BreakpointSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let record = ScheduleRecord::deserialize(deserializer)?;
        let schedule =
            Self::from_breakpoints(&record.breakpoints).map_err(serde::de::Error::custom)?;
        if schedule.record() != record {
            return Err(serde::de::Error::custom(
                "schedule labels or products disagree",
            ));
        }
        Ok(schedule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub breakpoints: Vec<u64>,
    /// `branches[j-1]` labels the run `(n_{j-1}, n_j]`.
    pub branches: Vec<Branch>,
    /// `P(n_j)` as reduced fractions.
    pub products: Vec<String>,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// The family `a_i(k)` and weights `w_i(k) = 2 a_i(k)` over a fixed schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFamily {
    schedule: BreakpointSchedule,
}

impl WeightFamily {
    pub fn new(schedule: BreakpointSchedule) -> Self {
        Self { schedule }
    }

    /// Smallest schedule covering positions `k <= k_max`.
    pub fn covering(k_max: u64) -> Result<Self> {
        let mut j = 1;
        loop {
            let schedule = BreakpointSchedule::build(j)?;
            if schedule.covered() >= k_max {
                return Ok(Self::new(schedule));
            }
            j += 1;
        }
    }

    pub fn schedule(&self) -> &BreakpointSchedule {
        &self.schedule
    }

    /// The dyadic exponent `1 - 2^(1-i)`.
    pub fn exponent(i: usize) -> Result<Ratio<u64>> {
        if i == 0 || i > MAX_SHIFT_INDEX {
            return Err(Error::ShiftIndexOutOfRange(i));
        }
        let den = 1u64 << (i - 1);
        Ok(Ratio::new_raw(den - 1, den))
    }

    fn exponent_f64(i: usize) -> Result<f64> {
        let e = Self::exponent(i)?;
        Ok(*e.numer() as f64 / *e.denom() as f64)
    }

    pub fn c_value(&self, k: u64) -> Result<Ratio<u64>> {
        self.schedule.c_value(k)
    }

    pub fn log_a_value(&self, i: usize, k: u64) -> Result<f64> {
        let e = Self::exponent_f64(i)?;
        let l = self.schedule.ln_c(k)?;
        Ok(if i == 1 { 0.0 } else { e * l })
    }

    pub fn a_value(&self, i: usize, k: u64) -> Result<f64> {
        if i == 1 {
            self.schedule.check_k(k)?;
            return Ok(1.0);
        }
        Ok(self.log_a_value(i, k)?.exp())
    }

    pub fn w_value(&self, i: usize, k: u64) -> Result<f64> {
        Ok(2.0 * self.a_value(i, k)?)
    }

    /// `sum_{k<=n} ln a_i(k)`, summed directly in log space.
    pub fn log_partial_product(&self, i: usize, n: u64) -> Result<f64> {
        Self::exponent(i)?;
        self.schedule.check_k(n)?;
        let mut acc = CompensatedSum::default();
        for k in 1..=n {
            acc.add(self.log_a_value(i, k)?);
        }
        Ok(acc.value())
    }

    /// Exact `P(n)`; the `i`-independent base product.
    pub fn base_product(&self, n: u64) -> Result<BigRational> {
        self.schedule.base_product(n)
    }

    /// Log partial products `L_i(n)` for every `i <= i_max` at each stop,
    /// computed in one compensated sweep. `stops` must be increasing.
    pub fn log_partial_products_at(&self, i_max: usize, stops: &[u64]) -> Result<Vec<Vec<f64>>> {
        let exps = (1..=i_max)
            .map(Self::exponent_f64)
            .collect::<Result<Vec<_>>>()?;
        let last = stops.last().copied().unwrap_or(0);
        if last > 0 {
            self.schedule.check_k(last)?;
        }
        let mut sums = vec![CompensatedSum::default(); i_max];
        let mut out = Vec::with_capacity(stops.len());
        let mut next = 0;
        let mut k = 0u64;
        while next < stops.len() {
            while k < stops[next] {
                k += 1;
                let l = self.schedule.ln_c(k)?;
                for (s, e) in sums.iter_mut().zip(&exps).skip(1) {
                    s.add(e * l);
                }
            }
            out.push(sums.iter().map(CompensatedSum::value).collect());
            next += 1;
        }
        Ok(out)
    }

    /// CSV with columns `k,c_num,c_den,a_1..a_{i_max}`.
    pub fn write_csv<W: Write>(&self, out: &mut W, i_max: usize, k_max: u64) -> Result<()> {
        let k_max = k_max.min(self.schedule.covered());
        let io = |e: std::io::Error| Error::InvalidSpec(format!("csv write failed: {e}"));
        write!(out, "k,c_num,c_den").map_err(io)?;
        for i in 1..=i_max {
            write!(out, ",a_{i}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for k in 1..=k_max {
            let c = self.c_value(k)?;
            write!(out, "{k},{},{}", c.numer(), c.denom()).map_err(io)?;
            for i in 1..=i_max {
                write!(out, ",{:.17e}", self.a_value(i, k)?).map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        Ok(())
    }
}

/// `ln` of an exact positive rational, accurate for very large numerators
/// and denominators.
pub fn ln_rational(x: &BigRational) -> f64 {
    fn ln_int(n: &BigInt) -> f64 {
        let bits = n.bits();
        if bits < 1000 {
            return n.to_f64().unwrap().ln();
        }
        let shift = bits - 900;
        let top: BigInt = n >> shift;
        top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
    debug_assert!(x.is_positive());
    ln_int(x.numer()) - ln_int(x.denom())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceCheckOptions {
    /// Bounds are checked for every `k <= bounds_k_max` within the schedule.
    pub bounds_k_max: u64,
    /// Relative tolerance between log-space ratio products and the exact
    /// power of the base product.
    pub ratio_rel_tol: f64,
}

impl Default for SequenceCheckOptions {
    fn default() -> Self {
        Self {
            bounds_k_max: 10_000,
            ratio_rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClauseResult {
    pub clause: String,
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEvidence {
    pub j: usize,
    pub n_j: u64,
    pub i: usize,
    pub i_prime: usize,
    /// `prod_{k<=n_j} a_{i'}(k)/a_i(k)` evaluated in log space.
    pub ratio_product: f64,
    /// `P(n_j)^(e_{i'} - e_i)` from the exact base product.
    pub expected: f64,
    pub relative_error: f64,
    /// `j^(e_{i'}-e_i)` for odd `j`, `j^-(e_{i'}-e_i)` for even `j`.
    pub bound: f64,
}

/// Finite-prefix evidence for the sequence lemma. Passing clauses show the
/// limsup/liminf behavior on the computed breakpoints only; they are not a
/// proof of the limit statements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub i_max: usize,
    pub j_max: usize,
    pub schedule: ScheduleRecord,
    pub clauses: Vec<ClauseResult>,
    pub ratios: Vec<RatioEvidence>,
}

impl SequenceReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| !c.passed)
    }

    pub fn into_result(self) -> Result<Self> {
        if let Some(c) = self.first_failure() {
            return Err(Error::PropertyViolation {
                clause: c.clause.clone(),
                detail: c.detail.clone(),
            });
        }
        Ok(self)
    }
}

/// Runs every sequence clause and collects the evidence without failing.
pub fn sequence_property_report(
    family: &WeightFamily,
    i_max: usize,
    j_max: usize,
    options: &SequenceCheckOptions,
) -> Result<SequenceReport> {
    let schedule = family.schedule();
    if j_max > schedule.len() {
        return Err(Error::ScheduleTooShort {
            k: u64::MAX,
            covered: schedule.covered(),
        });
    }
    for i in 1..=i_max {
        WeightFamily::exponent(i)?;
    }
    let mut clauses = Vec::new();

    // (a) bounds
    let k_max = options.bounds_k_max.min(schedule.covered());
    let (mut checked, mut violations) = (0, 0);
    let mut worst = String::new();
    for i in 1..=i_max {
        for k in 1..=k_max {
            let a = family.a_value(i, k)?;
            let w = 2.0 * a;
            checked += 1;
            if !(2.0 / 3.0..=2.0).contains(&a) || !(4.0 / 3.0..=4.0).contains(&w) {
                violations += 1;
                if worst.is_empty() {
                    worst = format!("a_{i}({k}) = {a}");
                }
            }
        }
    }
    clauses.push(ClauseResult {
        clause: "bounds".into(),
        passed: violations == 0,
        checked,
        violations,
        detail: if violations == 0 {
            format!("2/3 <= a_i(k) <= 2 and 4/3 <= w_i(k) <= 4 for i <= {i_max}, k <= {k_max}")
        } else {
            format!("first violation {worst}")
        },
    });

    // (b), (c) exact base products and log-space ratio products at breakpoints
    let stops: Vec<u64> = schedule.breakpoints()[..j_max].to_vec();
    let logs = family.log_partial_products_at(i_max, &stops)?;
    let mut ratios = Vec::new();
    let mut odd = ClauseAcc::new("odd-breakpoints");
    let mut even = ClauseAcc::new("even-breakpoints");
    for (idx, &n_j) in stops.iter().enumerate() {
        let j = idx + 1;
        let p = schedule.product_at_breakpoint(j);
        let acc = if j % 2 == 1 { &mut odd } else { &mut even };
        acc.check(product_condition_holds(j, p), || {
            format!("P(n_{j}) = {p} fails its product condition")
        });
        let ln_p = ln_rational(p);
        for i in 1..=i_max {
            for ip in (i + 1)..=i_max {
                let d = WeightFamily::exponent_f64(ip)? - WeightFamily::exponent_f64(i)?;
                let log_ratio = logs[idx][ip - 1] - logs[idx][i - 1];
                let ratio_product = log_ratio.exp();
                let expected = (d * ln_p).exp();
                let relative_error = (ratio_product / expected - 1.0).abs();
                let ln_j = (j as f64).ln();
                let (bound, beyond) = if j % 2 == 1 {
                    ((d * ln_j).exp(), log_ratio > d * ln_j)
                } else {
                    ((-d * ln_j).exp(), log_ratio < -d * ln_j)
                };
                acc.check(relative_error <= options.ratio_rel_tol, || {
                    format!(
                        "ratio product a_{ip}/a_{i} at n_{j}: relative error {relative_error:e}"
                    )
                });
                acc.check(beyond, || {
                    format!("ratio product a_{ip}/a_{i} at n_{j} = {ratio_product} does not pass {bound}")
                });
                ratios.push(RatioEvidence {
                    j,
                    n_j,
                    i,
                    i_prime: ip,
                    ratio_product,
                    expected,
                    relative_error,
                    bound,
                });
            }
        }
    }
    clauses.push(odd.finish());
    clauses.push(even.finish());

    // (d) tails: |a_i(k) - 1| <= 1/k and decreasing along k = 10, 100, ...
    let mut tails = ClauseAcc::new("tails");
    let samples: Vec<u64> = std::iter::successors(Some(10u64), |k| k.checked_mul(10))
        .take_while(|&k| k <= schedule.covered())
        .collect();
    for i in 1..=i_max {
        let mut prev = f64::INFINITY;
        for &k in &samples {
            let dev = (family.a_value(i, k)? - 1.0).abs();
            tails.check(dev <= 1.0 / k as f64, || {
                format!("|a_{i}({k}) - 1| = {dev:e} exceeds 1/k")
            });
            tails.check(i == 1 || dev < prev, || {
                format!("|a_{i}(k) - 1| not decreasing at k = {k}")
            });
            prev = dev;
        }
    }
    clauses.push(tails.finish());

    // weight products grow: ln prod w_i(k) increases across breakpoints
    let mut growth = ClauseAcc::new("weight-products-grow");
    for i in 1..=i_max {
        let mut prev = f64::NEG_INFINITY;
        for (idx, &n_j) in stops.iter().enumerate() {
            let lw = logs[idx][i - 1] + n_j as f64 * std::f64::consts::LN_2;
            growth.check(lw > prev, || {
                format!("ln prod w_{i} not increasing at n_{}", idx + 1)
            });
            prev = lw;
        }
    }
    clauses.push(growth.finish());

    Ok(SequenceReport {
        i_max,
        j_max,
        schedule: schedule.record(),
        clauses,
        ratios,
    })
}

/// Like [`sequence_property_report`], but fails on the first violated clause.
pub fn verify_sequence_properties(
    family: &WeightFamily,
    i_max: usize,
    j_max: usize,
    options: &SequenceCheckOptions,
) -> Result<SequenceReport> {
    sequence_property_report(family, i_max, j_max, options)?.into_result()
}

struct ClauseAcc {
    clause: &'static str,
    checked: usize,
    violations: usize,
    first: Option<String>,
}

impl ClauseAcc {
    fn new(clause: &'static str) -> Self {
        Self {
            clause,
            checked: 0,
            violations: 0,
            first: None,
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.first.is_none() {
                self.first = Some(detail());
            }
        }
    }

    fn finish(self) -> ClauseResult {
        ClauseResult {
            clause: self.clause.into(),
            passed: self.violations == 0,
            checked: self.checked,
            violations: self.violations,
            detail: self.first.unwrap_or_else(|| "ok".into()),
        }
    }
}
