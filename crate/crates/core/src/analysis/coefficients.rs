//! Time-average coefficients `C(n1, n2)` of odd-odd outcomes.
//!
//! The odd-odd probability factorizes as `f(m̄) g(t)`. `C` is the long-time
//! average of `g`. With `n3 = (n1+n2)/2`, `m' = n3+1−m` and the one-mode
//! elements `E = E_{n3}`,
//!
//! ```text
//! A_{km}   = E[k][m−1] E[n1−k][m]
//! B_{mm'}  = Σ_k A_{km} A_{km'}
//! C        = (1/8) Σ_{m=1}^{n3} (B_{mm} + B_{m,m'}) − (1/16) [n3 odd] B_{cc},  c = (n3+1)/2.
//! ```
//!
//! The m = 0 term of the time-dependent sum carries `sin(0) = 0`, so starting
//! the sum at m = 1 changes nothing.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{usage, Error, Result};
use crate::optics::{element_table, ln_factorial, BsElementTable};

/// Version tag of the on-disk coefficient cache.
pub const CACHE_VERSION: u32 = 1;

/// `D(n3) = n3/16 + (1 − (−1)^{n3})/64`, the sum of `C` over a fixed `n3`.
pub fn d_sum(n3: usize) -> f64 {
    n3 as f64 / 16.0 + if n3 % 2 == 1 { 1.0 / 32.0 } else { 0.0 }
}

pub(crate) fn check_odd(n1: usize, n2: usize) -> Result<usize> {
    if n1 % 2 == 0 || n2 % 2 == 0 {
        return Err(usage(format!("({n1}, {n2}) is not an odd-odd pair")));
    }
    Ok((n1 + n2) / 2)
}

pub(crate) fn check_mean(m_bar: f64) -> Result<()> {
    if !(m_bar >= 0.0 && m_bar.is_finite()) {
        return Err(crate::error::domain(format!(
            "mean photon number {m_bar} must be finite and ≥ 0"
        )));
    }
    Ok(())
}

/// `(m̄+1)^{−2} (m̄/(m̄+1))^{n3+1}`, the photon-number weight of every pair with this `n3`.
pub fn f_weight(n3: usize, m_bar: f64) -> f64 {
    let x = m_bar / (m_bar + 1.0);
    x.powi(n3 as i32 + 1) / ((m_bar + 1.0) * (m_bar + 1.0))
}

/// Separable `m̄`-dependent factor of an odd-odd outcome probability.
pub fn f_factor(n1: usize, n2: usize, m_bar: f64) -> Result<f64> {
    let n3 = check_odd(n1, n2)?;
    check_mean(m_bar)?;
    Ok(f_weight(n3, m_bar))
}

/// `g_{n1,n2}(t) = ½ Σ_k [Σ_{m=1}^{n3} sin(√m gt) sin(√m' gt) A_{km}]²`.
pub fn g_factor(n1: usize, n2: usize, gt: f64) -> Result<f64> {
    let n3 = check_odd(n1, n2)?;
    let e = element_table(n3);
    let sines: Vec<f64> = (0..=n3 + 1).map(|m| ((m as f64).sqrt() * gt).sin()).collect();
    let mut total = 0.0;
    for k in n1.saturating_sub(n3)..=n1.min(n3) {
        let mut inner = 0.0;
        for m in 1..=n3 {
            inner += sines[m] * sines[n3 + 1 - m] * e.get(k, m - 1) * e.get(n1 - k, m);
        }
        total += inner * inner;
    }
    Ok(0.5 * total)
}

/// `C(n1, 2n3−n1)` for all odd `n1`, indexed by `(n1−1)/2`.
pub fn c_row(n3: usize) -> Vec<f64> {
    c_row_from(&element_table(n3))
}

pub(crate) fn c_row_from(e: &BsElementTable) -> Vec<f64> {
    let n3 = e.n();
    let mut row = vec![0.0; n3];
    let centre = (n3 % 2 == 1).then(|| (n3 + 1) / 2);
    let mut a = vec![0.0; n3 + 1];
    for i in 0..n3.div_ceil(2) {
        let n1 = 2 * i + 1;
        let (mut diag, mut anti, mut cc) = (0.0, 0.0, 0.0);
        for k in n1.saturating_sub(n3)..=n1.min(n3) {
            let (ek, ej) = (e.row(k), e.row(n1 - k));
            for m in 1..=n3 {
                a[m] = ek[m - 1] * ej[m];
            }
            for m in 1..=n3 {
                diag += a[m] * a[m];
                anti += a[m] * a[n3 + 1 - m];
            }
            if let Some(c) = centre {
                cc += a[c] * a[c];
            }
        }
        let c = (diag + anti) / 8.0 - cc / 16.0;
        row[i] = c;
        row[n3 - 1 - i] = c;
    }
    row
}

/// `C(n1, n2)` for a single odd-odd pair.
pub fn c_coefficient(n1: usize, n2: usize) -> Result<f64> {
    let n3 = check_odd(n1, n2)?;
    Ok(c_row(n3)[(n1 - 1) / 2])
}

/// `C(1, 2n3−1)` from the closed-form first two rows of `E_{n3}`, in `O(n3)`.
pub fn edge_coefficient(n3: usize) -> f64 {
    if n3 == 0 {
        return 0.0;
    }
    let n = n3;
    let half_ln2 = 0.5 * n as f64 * std::f64::consts::LN_2;
    let lb = |l: usize| 0.5 * (ln_factorial(n) - ln_factorial(l) - ln_factorial(n - l)) - half_ln2;
    let sign = |l: usize| if l % 2 == 0 { 1.0 } else { -1.0 };
    // E[0][l] = (−1)^l √C(n,l) 2^{−n/2};  E[1][l] = (−1)^l (n−2l) √(C(n,l)/n) 2^{−n/2}.
    let e0 = |l: usize| sign(l) * lb(l).exp();
    let e1 = |l: usize| sign(l) * (n as f64 - 2.0 * l as f64) * (lb(l) - 0.5 * (n as f64).ln()).exp();
    let mut a = vec![[0.0; 2]; n + 2];
    for m in 1..=n {
        // k = 0 pairs E[0][m−1] with E[1][m]; k = 1 pairs E[1][m−1] with E[0][m].
        a[m] = [e0(m - 1) * e1(m), e1(m - 1) * e0(m)];
    }
    let centre = (n % 2 == 1).then(|| (n + 1) / 2);
    let mut c = 0.0;
    for k in 0..2 {
        for m in 1..=n {
            c += a[m][k] * (a[m][k] + a[n + 1 - m][k]) / 8.0;
        }
        if let Some(cc) = centre {
            c -= a[cc][k] * a[cc][k] / 16.0;
        }
    }
    c
}

/// Exact `C` for every odd-odd pair with `n3 ≤ n3_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CCoefficientTable {
    rows: Vec<Vec<f64>>,
}

impl CCoefficientTable {
    /// Build all rows, in parallel over `n3`.
    pub fn build(n3_max: usize) -> Self {
        let mut rows: Vec<Vec<f64>> = (1..=n3_max).into_par_iter().map(c_row).collect();
        rows.insert(0, Vec::new());
        Self { rows }
    }

    pub fn n3_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// Row for `n3`, indexed by `(n1−1)/2`.
    pub fn row(&self, n3: usize) -> Option<&[f64]> {
        (n3 >= 1).then(|| self.rows.get(n3).map(Vec::as_slice)).flatten()
    }

    pub fn get(&self, n1: usize, n2: usize) -> Result<f64> {
        let n3 = check_odd(n1, n2)?;
        self.row(n3)
            .map(|r| r[(n1 - 1) / 2])
            .ok_or_else(|| usage(format!("n3 = {n3} exceeds table limit {}", self.n3_max())))
    }

    /// `Σ_{n1} C(n1, 2n3−n1)` as stored.
    pub fn row_sum(&self, n3: usize) -> Option<f64> {
        self.row(n3).map(|r| r.iter().sum())
    }

    /// Standard deviation of `n1` under the weights `C(n1, 2n3−n1)/D(n3)`.
    pub fn spread(&self, n3: usize) -> Option<f64> {
        let r = self.row(n3)?;
        let total: f64 = r.iter().sum();
        let var: f64 = r
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let u = (2 * i + 1) as f64 - n3 as f64;
                c * u * u
            })
            .sum::<f64>()
            / total;
        Some(var.sqrt())
    }

    /// Keep only rows with `n3 ≤ n3_max`.
    pub fn truncated(&self, n3_max: usize) -> Self {
        Self {
            rows: self.rows[..=n3_max.min(self.n3_max())].to_vec(),
        }
    }

    /// Write the `n1,n2,C` cache file, atomically via a sibling temporary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
            writeln!(
                w,
                "# heralded c-table version={} n3_max={}",
                CACHE_VERSION,
                self.n3_max()
            )?;
            writeln!(w, "n1,n2,C")?;
            for n3 in 1..=self.n3_max() {
                for (i, c) in self.rows[n3].iter().enumerate() {
                    let n1 = 2 * i + 1;
                    writeln!(w, "{},{},{:e}", n1, 2 * n3 - n1, c)?;
                }
            }
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Read a cache file; it must carry the current version and cover `n3_max`.
    pub fn load(path: &Path, n3_max: usize) -> Result<Self> {
        let cache_err = |msg: String| Error::Cache(format!("{}: {msg}", path.display()));
        let mut lines = BufReader::new(fs::File::open(path)?).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let field = |key: &str| -> Option<usize> {
            header
                .split_whitespace()
                .find_map(|t| t.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
        };
        if field("version") != Some(CACHE_VERSION as usize) {
            return Err(cache_err(format!("unsupported header {header:?}")));
        }
        let stored = field("n3_max").ok_or_else(|| cache_err("missing n3_max".into()))?;
        if stored < n3_max {
            return Err(cache_err(format!("covers n3 ≤ {stored}, need {n3_max}")));
        }
        let mut rows: Vec<Vec<f64>> = (0..=n3_max).map(|n3| vec![f64::NAN; n3]).collect();
        for line in lines.skip(1) {
            let line = line?;
            let mut it = line.split(',');
            let parse_err = || cache_err(format!("malformed row {line:?}"));
            let n1: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
            let n2: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
            let c: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
            let n3 = check_odd(n1, n2).map_err(|_| parse_err())?;
            if n3 <= n3_max {
                rows[n3][(n1 - 1) / 2] = c;
            }
        }
        if rows.iter().flatten().any(|c| c.is_nan()) {
            return Err(cache_err("incomplete table".into()));
        }
        Ok(Self { rows })
    }
}

/// Build or read tables above this size only on explicit request.
pub const IMPLICIT_BUILD_LIMIT: usize = 150;

/// Read the cache at `path`, or build (and save) when allowed.
///
/// A missing cache for `n3_max > IMPLICIT_BUILD_LIMIT` is an error unless
/// `build` is set, so that a long build is never started by accident.
pub fn load_or_build(path: Option<&Path>, n3_max: usize, build: bool) -> Result<CCoefficientTable> {
    if let Some(p) = path {
        if p.exists() {
            match CCoefficientTable::load(p, n3_max) {
                Ok(t) => return Ok(t),
                Err(e) if !build => return Err(e),
                Err(_) => {}
            }
        }
    }
    if n3_max > IMPLICIT_BUILD_LIMIT && !build {
        let hint = path.map(|p| format!(" --cache {}", p.display())).unwrap_or_default();
        return Err(Error::Cache(format!(
            "no coefficient table for n3_max = {n3_max}; build it once with \
             `heralded coeffs --build --n3max {n3_max}{hint}`"
        )));
    }
    let table = CCoefficientTable::build(n3_max);
    if let Some(p) = path {
        table.save(p)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn f_examples() {
        assert_eq!(f_factor(1, 1, 0.0).unwrap(), 0.0);
        assert_relative_eq!(f_factor(1, 1, 1.0).unwrap(), 1.0 / 16.0, epsilon = 1e-16);
        assert!(f_factor(2, 1, 1.0).is_err());
        // Maximum over m̄ at (n3+1)/2.
        let best = (1..=3000)
            .map(|i| i as f64 * 1e-3)
            .max_by(|a, b| f_factor(1, 3, *a).unwrap().total_cmp(&f_factor(1, 3, *b).unwrap()))
            .unwrap();
        assert_relative_eq!(best, 1.5, epsilon = 1e-3);
    }

    #[test]
    fn known_coefficients() {
        assert_relative_eq!(c_coefficient(1, 1).unwrap(), 3.0 / 32.0, epsilon = 1e-15);
        assert_relative_eq!(c_coefficient(1, 3).unwrap(), 1.0 / 16.0, epsilon = 1e-14);
        assert_relative_eq!(c_coefficient(3, 3).unwrap(), 0.15234375, epsilon = 1e-12);
        assert_relative_eq!(c_coefficient(1, 7).unwrap(), 0.02734375, epsilon = 1e-12);
        assert_relative_eq!(c_coefficient(3, 5).unwrap(), 0.09765625, epsilon = 1e-12);
        assert!(c_coefficient(2, 2).is_err());
    }

    #[test]
    fn sum_rule_and_symmetry() {
        let t = CCoefficientTable::build(60);
        for n3 in 1..=60 {
            assert!((t.row_sum(n3).unwrap() - d_sum(n3)).abs() < 1e-10, "n3={n3}");
            let r = t.row(n3).unwrap();
            for (i, c) in r.iter().enumerate() {
                assert!(*c >= 0.0);
                assert_eq!(*c, r[n3 - 1 - i]);
            }
        }
        assert_relative_eq!(t.row_sum(5).unwrap(), 5.0 / 16.0 + 1.0 / 32.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_matches_row() {
        for n3 in [1usize, 2, 3, 10, 57, 200] {
            assert_relative_eq!(
                edge_coefficient(n3),
                c_row(n3)[0],
                epsilon = 1e-13,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn time_average_of_g_matches_c() {
        // Trapezoid-free uniform sampling of a quasi-periodic signal over a long window.
        let samples = 200_000;
        let span = 2.0e4;
        for (n1, n2) in [(1usize, 1usize), (1, 3), (3, 3), (1, 5)] {
            let mean: f64 = (0..samples)
                .map(|i| g_factor(n1, n2, (i as f64 + 0.5) * span / samples as f64).unwrap())
                .sum::<f64>()
                / samples as f64;
            let c = c_coefficient(n1, n2).unwrap();
            assert!((mean - c).abs() < 2e-3 * c.max(0.01), "({n1},{n2}) mean={mean} C={c}");
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let t = CCoefficientTable::build(12);
        t.save(&path).unwrap();
        assert_eq!(CCoefficientTable::load(&path, 12).unwrap(), t);
        assert_eq!(CCoefficientTable::load(&path, 7).unwrap(), t.truncated(7));
        assert!(matches!(CCoefficientTable::load(&path, 13), Err(Error::Cache(_))));

        std::fs::write(&path, "# heralded c-table version=0 n3_max=12\n").unwrap();
        assert!(matches!(CCoefficientTable::load(&path, 3), Err(Error::Cache(_))));
    }

    #[test]
    fn large_builds_need_explicit_request() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        assert!(matches!(load_or_build(Some(&path), 200, false), Err(Error::Cache(_))));
        let small = load_or_build(Some(&path), 20, false).unwrap();
        assert!(path.exists());
        assert_eq!(load_or_build(Some(&path), 20, false).unwrap(), small);
    }
}
