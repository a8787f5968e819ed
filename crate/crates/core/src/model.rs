//! Study designs, overlap structure and result containers.
//!
//! The same [`GroupSummary`] type carries either population parameters
//! (simulation truth) or sample summaries (reported data); the engine's
//! [`Mode`] says which.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::Dof;

/// Relative tolerance of the positive semidefinite check.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Whether group means and SDs are population truth or sample plug-ins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Means and SDs are population values; sigma is the supplied common SD.
    Truth,
    /// Means and SDs are sample summaries; sigma is the pooled SD.
    Plugin,
}

/// One arm: size, mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: u32,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    pub fn new(n: u32, mean: f64, sd: f64) -> Result<Self> {
        let g = Self { n, mean, sd };
        g.check()?;
        Ok(g)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Invalid(format!("group size must be >= 2, got {}", self.n)));
        }
        if !self.mean.is_finite() {
            return Err(Error::Invalid(format!("group mean must be finite, got {}", self.mean)));
        }
        if !(self.sd > 0.0 && self.sd.is_finite()) {
            return Err(Error::Invalid(format!("group sd must be finite and > 0, got {}", self.sd)));
        }
        Ok(())
    }

    fn df(&self) -> f64 {
        f64::from(self.n - 1)
    }
}

/// A set of groups whose variances are pooled.
pub trait PooledGroups {
    fn groups(&self) -> Vec<&GroupSummary>;

    /// Total subjects minus number of groups.
    fn degrees_of_freedom(&self) -> Dof {
        let groups = self.groups();
        let total: u32 = groups.iter().map(|g| g.n).sum();
        Dof::new(total - groups.len() as u32).expect("validated designs have v >= 2")
    }

    /// Square root of the (n - 1)-weighted mean of the group variances.
    fn pooled_sd(&self) -> f64 {
        let groups = self.groups();
        let ss: f64 = groups.iter().map(|g| g.df() * g.sd * g.sd).sum();
        (ss / self.degrees_of_freedom().as_f64()).sqrt()
    }
}

/// Treatment and control arm of one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGroup {
    pub treatment: GroupSummary,
    pub control: GroupSummary,
}

impl TwoGroup {
    pub fn new(treatment: GroupSummary, control: GroupSummary) -> Result<Self> {
        treatment.check()?;
        control.check()?;
        Ok(Self { treatment, control })
    }

    pub fn mean_difference(&self) -> f64 {
        self.treatment.mean - self.control.mean
    }

    /// Common SD, required to agree across both arms in truth mode.
    pub(crate) fn common_sd(&self) -> Result<f64> {
        common_sd(self.groups())
    }
}

impl PooledGroups for TwoGroup {
    fn groups(&self) -> Vec<&GroupSummary> {
        vec![&self.treatment, &self.control]
    }
}

pub(crate) fn common_sd(groups: Vec<&GroupSummary>) -> Result<f64> {
    let first = groups[0].sd;
    if groups.iter().any(|g| (g.sd - first).abs() > 1e-12 * first) {
        return Err(Error::Invalid(
            "truth mode requires every arm of an outcome to share one sd".into(),
        ));
    }
    Ok(first)
}

/// Correlation structure linking two outcomes measured in one study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLink {
    /// Within-subject correlation between the outcomes.
    pub rho: f64,
    /// Treatment subjects measured on both outcomes.
    pub overlap_t: u32,
    /// Control subjects measured on both outcomes.
    pub overlap_c: u32,
    /// Scale constant of Cov(s_jp^2, s_j'p^2) = rho^2 sigma_j^2 sigma_j'^2 k.
    pub k_factor: Option<f64>,
}

/// Two outcomes sharing treatment and control subjects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoOutcomeStudy {
    pub outcome_j: TwoGroup,
    pub outcome_jprime: TwoGroup,
    pub link: OutcomeLink,
}

impl TwoOutcomeStudy {
    pub fn new(outcome_j: TwoGroup, outcome_jprime: TwoGroup, link: OutcomeLink) -> Result<Self> {
        let study = Self {
            outcome_j,
            outcome_jprime,
            link,
        };
        study.check()?;
        Ok(study)
    }

    pub(crate) fn check(&self) -> Result<()> {
        for g in self.outcome_j.groups().into_iter().chain(self.outcome_jprime.groups()) {
            g.check()?;
        }
        let l = &self.link;
        if !(l.rho.abs() <= 1.0) {
            return Err(Error::Invalid(format!("rho must lie in [-1, 1], got {}", l.rho)));
        }
        let max_t = self.outcome_j.treatment.n.min(self.outcome_jprime.treatment.n);
        let max_c = self.outcome_j.control.n.min(self.outcome_jprime.control.n);
        if l.overlap_t > max_t {
            return Err(Error::Invalid(format!(
                "treatment overlap {} exceeds the smaller treatment arm ({max_t})",
                l.overlap_t
            )));
        }
        if l.overlap_c > max_c {
            return Err(Error::Invalid(format!(
                "control overlap {} exceeds the smaller control arm ({max_c})",
                l.overlap_c
            )));
        }
        if let Some(k) = l.k_factor {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::Invalid(format!("k must be finite and >= 0, got {k}")));
            }
        }
        Ok(())
    }

    /// Every subject of both outcomes is shared, so the arms coincide.
    pub fn is_full_overlap(&self) -> bool {
        let (a, b, l) = (&self.outcome_j, &self.outcome_jprime, &self.link);
        l.overlap_t == a.treatment.n
            && l.overlap_t == b.treatment.n
            && l.overlap_c == a.control.n
            && l.overlap_c == b.control.n
    }
}

/// Any number of outcomes, with a link for every unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiOutcomeStudy {
    outcomes: Vec<TwoGroup>,
    // links[(a, b)] for a < b, row-major over the strict upper triangle.
    links: Vec<OutcomeLink>,
}

impl MultiOutcomeStudy {
    /// `link(a, b)` is called once for every pair `a < b`.
    pub fn new(
        outcomes: Vec<TwoGroup>,
        mut link: impl FnMut(usize, usize) -> Result<OutcomeLink>,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Invalid("a multi-outcome study needs at least one outcome".into()));
        }
        let mut links = Vec::new();
        for a in 0..outcomes.len() {
            for b in a + 1..outcomes.len() {
                let l = link(a, b)?;
                TwoOutcomeStudy::new(outcomes[a], outcomes[b], l)?;
                links.push(l);
            }
        }
        Ok(Self { outcomes, links })
    }

    pub fn outcomes(&self) -> &[TwoGroup] {
        &self.outcomes
    }

    /// The pairwise view of outcomes `a` and `b` (`a != b`).
    pub fn pair(&self, a: usize, b: usize) -> TwoOutcomeStudy {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d = self.outcomes.len();
        let idx = lo * (2 * d - lo - 1) / 2 + (hi - lo - 1);
        TwoOutcomeStudy {
            outcome_j: self.outcomes[a],
            outcome_jprime: self.outcomes[b],
            link: self.links[idx],
        }
    }
}

impl From<TwoOutcomeStudy> for MultiOutcomeStudy {
    fn from(s: TwoOutcomeStudy) -> Self {
        Self {
            outcomes: vec![s.outcome_j, s.outcome_jprime],
            links: vec![s.link],
        }
    }
}

/// One control arm plus one or more treatment arms with a common SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiArmStudy {
    pub control: GroupSummary,
    pub arms: Vec<GroupSummary>,
    /// Common study SD: supplied truth, or the pooled SD of the summaries.
    pub sigma: f64,
}

impl MultiArmStudy {
    pub fn new(control: GroupSummary, arms: Vec<GroupSummary>, sigma: f64) -> Result<Self> {
        let study = Self {
            control,
            arms,
            sigma,
        };
        study.check()?;
        Ok(study)
    }

    /// Builds a study from sample summaries, with sigma set to the pooled SD.
    pub fn from_summaries(control: GroupSummary, arms: Vec<GroupSummary>) -> Result<Self> {
        let mut study = Self {
            control,
            arms,
            sigma: 1.0,
        };
        study.check()?;
        study.sigma = study.pooled_sd();
        Ok(study)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::Invalid("a multi-arm study needs at least one treatment arm".into()));
        }
        for g in self.groups() {
            g.check()?;
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be finite and > 0, got {}", self.sigma)));
        }
        let total: u32 = self.groups().iter().map(|g| g.n).sum();
        let v = total - self.groups().len() as u32;
        if v < 3 {
            return Err(Error::Invalid(format!(
                "multi-arm study needs at least 3 degrees of freedom, got {v}"
            )));
        }
        Ok(())
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }
}

impl PooledGroups for MultiArmStudy {
    fn groups(&self) -> Vec<&GroupSummary> {
        self.arms.iter().chain(std::iter::once(&self.control)).collect()
    }
}

/// Hedges' g per outcome or per arm, with the dof and J(v) used for each.
///
/// Multi-arm entries all share one dof; multi-outcome entries each carry
/// their own outcome's dof.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectVector {
    pub g: Vec<f64>,
    pub dof: Vec<Dof>,
    pub j_factor: Vec<f64>,
}

impl EffectVector {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

/// Symmetric covariance matrix stored as its packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    dim: usize,
    lower: Vec<f64>,
}

impl CovMatrix {
    /// Fills the lower triangle from `entry(row, col)` with `row >= col`.
    /// No invariants are checked; see [`CovMatrix::validated`].
    pub fn from_lower_fn(dim: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for r in 0..dim {
            for c in 0..=r {
                lower.push(entry(r, c));
            }
        }
        Self { dim, lower }
    }

    /// Like [`CovMatrix::from_lower_fn`], then checks finiteness, a strictly
    /// positive diagonal and positive semidefiniteness.
    pub fn validated(dim: usize, entry: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let m = Self::try_from_lower_fn(dim, entry)?;
        m.check()?;
        Ok(m)
    }

    fn try_from_lower_fn(
        dim: usize,
        mut entry: impl FnMut(usize, usize) -> Result<f64>,
    ) -> Result<Self> {
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for r in 0..dim {
            for c in 0..=r {
                lower.push(entry(r, c)?);
            }
        }
        Ok(Self { dim, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        self.lower[r * (r + 1) / 2 + c]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        (0..self.dim)
            .flat_map(|r| (0..self.dim).map(move |c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn check(&self) -> Result<()> {
        if let Some(x) = self.lower.iter().find(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("covariance entry is not finite: {x}")));
        }
        for i in 0..self.dim {
            let d = self.get(i, i);
            if d <= 0.0 {
                return Err(Error::Invalid(format!("diagonal entry {i} is not positive: {d}")));
            }
        }
        let ev = self.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        if min < -PSD_TOLERANCE * max {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(n: u32, mean: f64, sd: f64) -> GroupSummary {
        GroupSummary::new(n, mean, sd).unwrap()
    }

    #[test]
    fn two_group_dof() {
        let pair = TwoGroup::new(g(10, 0.0, 1.0), g(12, 0.0, 1.0)).unwrap();
        assert_eq!(pair.degrees_of_freedom().get(), 20);
    }

    #[test]
    fn multi_arm_dof() {
        let s = MultiArmStudy::from_summaries(g(20, 0.0, 1.0), vec![g(20, 0.0, 1.0), g(20, 0.0, 1.0)])
            .unwrap();
        assert_eq!(s.degrees_of_freedom().get(), 57);

        let single = MultiArmStudy::from_summaries(g(20, 0.0, 1.0), vec![g(20, 0.0, 1.0)]).unwrap();
        let pair = TwoGroup::new(g(20, 0.0, 1.0), g(20, 0.0, 1.0)).unwrap();
        assert_eq!(single.degrees_of_freedom(), pair.degrees_of_freedom());
        assert_eq!(single.degrees_of_freedom().get(), 38);
    }

    #[test]
    fn pooled_sd_examples() {
        let s = MultiArmStudy::from_summaries(g(7, 1.0, 1.7), vec![g(9, 0.0, 1.7), g(4, 2.0, 1.7)])
            .unwrap();
        assert!((s.pooled_sd() - 1.7).abs() < 1e-15);

        let pair = TwoGroup::new(g(3, 0.0, 1.0), g(3, 0.0, 2.0)).unwrap();
        assert!((pair.pooled_sd() - 2.5f64.sqrt()).abs() < 1e-15);

        let s = MultiArmStudy::from_summaries(
            g(5, 0.0, 3.0),
            vec![g(5, 0.0, 1.0), g(5, 0.0, 1.0), g(5, 0.0, 1.0)],
        )
        .unwrap();
        assert!((s.pooled_sd() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.sigma, s.pooled_sd());
    }

    #[test]
    fn group_invariants() {
        assert!(GroupSummary::new(1, 0.0, 1.0).is_err());
        assert!(GroupSummary::new(2, 0.0, 0.0).is_err());
        assert!(GroupSummary::new(2, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn multi_arm_invariants() {
        assert!(MultiArmStudy::from_summaries(g(5, 0.0, 1.0), vec![]).is_err());
        // 2 + 2 - 2 = 2 dof is not enough
        assert!(MultiArmStudy::from_summaries(g(2, 0.0, 1.0), vec![g(2, 0.0, 1.0)]).is_err());
        assert!(MultiArmStudy::new(g(5, 0.0, 1.0), vec![g(5, 0.0, 1.0)], -1.0).is_err());
        let bad = GroupSummary { n: 1, mean: 0.0, sd: 1.0 };
        assert!(MultiArmStudy::from_summaries(g(5, 0.0, 1.0), vec![bad]).is_err());
    }

    #[test]
    fn two_outcome_invariants() {
        let pair = TwoGroup::new(g(10, 0.0, 1.0), g(8, 0.0, 1.0)).unwrap();
        let link = |rho, t, c| OutcomeLink {
            rho,
            overlap_t: t,
            overlap_c: c,
            k_factor: None,
        };
        assert!(TwoOutcomeStudy::new(pair, pair, link(0.5, 10, 8)).unwrap().is_full_overlap());
        assert!(!TwoOutcomeStudy::new(pair, pair, link(0.5, 5, 8)).unwrap().is_full_overlap());
        assert!(TwoOutcomeStudy::new(pair, pair, link(1.5, 10, 8)).is_err());
        assert!(TwoOutcomeStudy::new(pair, pair, link(0.5, 11, 8)).is_err());
        assert!(TwoOutcomeStudy::new(pair, pair, link(0.5, 10, 9)).is_err());
        let mut l = link(0.5, 10, 8);
        l.k_factor = Some(-0.1);
        assert!(TwoOutcomeStudy::new(pair, pair, l).is_err());
    }

    #[test]
    fn multi_outcome_pair_indexing() {
        let outcomes: Vec<TwoGroup> = (0..4)
            .map(|i| TwoGroup::new(g(10 + i, 0.0, 1.0), g(10, 0.0, 1.0)).unwrap())
            .collect();
        let study = MultiOutcomeStudy::new(outcomes, |a, b| {
            Ok(OutcomeLink {
                rho: (a * 10 + b) as f64 / 100.0,
                overlap_t: 5,
                overlap_c: 5,
                k_factor: None,
            })
        })
        .unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a == b {
                    continue;
                }
                let p = study.pair(a, b);
                let (lo, hi) = (a.min(b), a.max(b));
                assert_eq!(p.link.rho, (lo * 10 + hi) as f64 / 100.0);
                assert_eq!(p.outcome_j.treatment.n, 10 + a as u32);
                assert_eq!(p.outcome_jprime.treatment.n, 10 + b as u32);
            }
        }
    }

    #[test]
    fn cov_matrix_symmetric_storage() {
        let m = CovMatrix::from_lower_fn(3, |r, c| (r * 3 + c) as f64);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(m.get(r, c), m.get(c, r));
            }
        }
        assert_eq!(m.to_row_major()[1], m.get(1, 0));
    }

    #[test]
    fn cov_matrix_checks() {
        let ok = CovMatrix::validated(2, |r, c| Ok(if r == c { 1.0 } else { 0.5 })).unwrap();
        assert_eq!(ok.dim(), 2);
        let not_psd = CovMatrix::validated(2, |r, c| Ok(if r == c { 1.0 } else { 2.0 }));
        assert!(matches!(not_psd, Err(Error::NotPsd { .. })));
        let zero_diag = CovMatrix::validated(2, |_, _| Ok(0.0));
        assert!(zero_diag.is_err());
        let nan = CovMatrix::validated(1, |_, _| Ok(f64::NAN));
        assert!(nan.is_err());
    }

    proptest! {
        #[test]
        fn pooled_sd_permutation_and_homogeneity(
            groups in prop::collection::vec((2u32..60, -5.0f64..5.0, 0.1f64..10.0), 2..6),
            scale in 0.01f64..100.0,
            rot in 0usize..6,
        ) {
            let mut arms: Vec<GroupSummary> = groups.iter().map(|&(n, m, s)| g(n, m, s)).collect();
            let control = arms.pop().unwrap();
            let base = MultiArmStudy::from_summaries(control, arms.clone()).unwrap();

            let mut rotated = arms.clone();
            let len = rotated.len();
            rotated.rotate_left(rot % len);
            let permuted = MultiArmStudy::from_summaries(control, rotated).unwrap();
            prop_assert!((base.pooled_sd() - permuted.pooled_sd()).abs() <= 1e-12 * base.pooled_sd());

            let scaled_arms: Vec<GroupSummary> =
                arms.iter().map(|a| g(a.n, a.mean, a.sd * scale)).collect();
            let scaled = MultiArmStudy::from_summaries(g(control.n, control.mean, control.sd * scale), scaled_arms).unwrap();
            prop_assert!((scaled.pooled_sd() - scale * base.pooled_sd()).abs() <= 1e-12 * scale * base.pooled_sd());
        }
    }
}
