//! Two-rater agreement statistics over action labels.
//!
//! Integer coding for the Pearson coefficient is the alphabetical class index
//! ([`ActionClass::index`]). Gwet's AC₁ uses prevalences pooled over both
//! raters and, in canonical mode, the number of categories observed in either
//! rater.

use std::collections::BTreeSet;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::{ActionClass, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("need at least {min} rated items, got {n}")]
    TooFewItems { n: usize, min: usize },
    #[error("expected agreement is 1 (both raters constant and identical); kappa is undefined")]
    DegenerateMarginals,
    #[error("a coded rating vector has zero variance")]
    ZeroVariance,
    #[error("chance agreement P_e is 1; AC1 is undefined")]
    DegeneratePe,
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Labels assigned to the same items by two raters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatingPair {
    pub items: Vec<(ActionClass, ActionClass)>,
}

impl RatingPair {
    pub fn new(items: Vec<(ActionClass, ActionClass)>) -> Self {
        Self { items }
    }

    pub fn from_vectors(a: &[ActionClass], b: &[ActionClass]) -> Self {
        assert_eq!(a.len(), b.len(), "rating vectors must have equal length");
        Self::new(a.iter().copied().zip(b.iter().copied()).collect())
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    fn require(&self, min: usize) -> Result<f64, AgreementError> {
        if self.n() < min {
            return Err(AgreementError::TooFewItems { n: self.n(), min });
        }
        Ok(self.n() as f64)
    }

    fn marginals(&self) -> ([usize; NUM_CLASSES], [usize; NUM_CLASSES]) {
        let mut a = [0; NUM_CLASSES];
        let mut b = [0; NUM_CLASSES];
        for &(x, y) in &self.items {
            a[x.index()] += 1;
            b[y.index()] += 1;
        }
        (a, b)
    }

    /// Reads `clip_id,rater_a,rater_b` CSV (with header).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, AgreementError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let mut items = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(AgreementError::Parse {
                    row: i + 1,
                    message: format!("expected 3 columns, found {}", rec.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<ActionClass>().map_err(|e| AgreementError::Parse {
                    row: i + 1,
                    message: e.to_string(),
                })
            };
            items.push((parse(&rec[1])?, parse(&rec[2])?));
        }
        Ok(Self::new(items))
    }
}

/// Fraction of items on which both raters agree.
pub fn observed_agreement(pair: &RatingPair) -> Result<f64, AgreementError> {
    let n = pair.require(1)?;
    Ok(pair.items.iter().filter(|(a, b)| a == b).count() as f64 / n)
}

/// Cohen's kappa with expected agreement from the product of the raters' marginals.
pub fn cohen_kappa(pair: &RatingPair) -> Result<f64, AgreementError> {
    let n = pair.require(2)?;
    let po = observed_agreement(pair)?;
    let (ma, mb) = pair.marginals();
    let pe: f64 = ma.iter().zip(&mb).map(|(&a, &b)| (a as f64 / n) * (b as f64 / n)).sum();
    if pe >= 1.0 {
        return Err(AgreementError::DegenerateMarginals);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Pearson product-moment correlation of the class-index coded ratings.
pub fn pearson_corr(pair: &RatingPair) -> Result<f64, AgreementError> {
    let n = pair.require(2)?;
    let xs: Vec<f64> = pair.items.iter().map(|(a, _)| a.index() as f64).collect();
    let ys: Vec<f64> = pair.items.iter().map(|(_, b)| b.index() as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AgreementError::ZeroVariance);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Gwet's AC₁.
///
/// Default mode uses `P_e = Σ π_j (1 - π_j)`; `canonical = true` scales it by
/// `1 / (k - 1)` with k the number of observed categories. The two coincide
/// when k = 2.
pub fn gwet_ac1(pair: &RatingPair, canonical: bool) -> Result<f64, AgreementError> {
    let n = pair.require(2)?;
    let po = observed_agreement(pair)?;
    let (ma, mb) = pair.marginals();
    let mut pe = 0.0;
    let mut k = 0usize;
    for (a, b) in ma.iter().zip(&mb) {
        if a + b == 0 {
            continue;
        }
        k += 1;
        let pi = (a + b) as f64 / (2.0 * n);
        pe += pi * (1.0 - pi);
    }
    if canonical && k > 1 {
        pe /= (k - 1) as f64;
    }
    if pe >= 1.0 {
        return Err(AgreementError::DegeneratePe);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Landis–Koch interpretation bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn label(self) -> &'static str {
        match self {
            KappaBand::Poor => "poor",
            KappaBand::Slight => "slight",
            KappaBand::Fair => "fair",
            KappaBand::Moderate => "moderate",
            KappaBand::Substantial => "substantial",
            KappaBand::AlmostPerfect => "almost perfect",
        }
    }
}

/// Bands kappa after rounding it half-to-even at two decimals, which closes
/// the gaps between the published band edges (0.20 / 0.21 and so on).
pub fn interpret_kappa(kappa: f64) -> KappaBand {
    let hundredths = (kappa * 100.0).round_ties_even();
    match hundredths {
        h if h < 0.0 => KappaBand::Poor,
        h if h <= 20.0 => KappaBand::Slight,
        h if h <= 40.0 => KappaBand::Fair,
        h if h <= 60.0 => KappaBand::Moderate,
        h if h <= 80.0 => KappaBand::Substantial,
        _ => KappaBand::AlmostPerfect,
    }
}

/// Everything the `agree` report prints. Undefined coefficients are `None`
/// with the reason listed in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub n: usize,
    pub categories: Vec<ActionClass>,
    pub observed_agreement: Option<f64>,
    pub cohen_kappa: Option<f64>,
    pub kappa_band: Option<KappaBand>,
    pub pearson: Option<f64>,
    pub gwet_ac1: Option<f64>,
    pub gwet_ac1_canonical: Option<f64>,
    pub notes: Vec<String>,
}

impl AgreementReport {
    pub fn compute(pair: &RatingPair) -> Self {
        let mut notes = Vec::new();
        let mut keep = |name: &str, r: Result<f64, AgreementError>| match r {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("{name}: {e}"));
                None
            }
        };
        let observed_agreement = keep("observed_agreement", observed_agreement(pair));
        let cohen_kappa = keep("cohen_kappa", cohen_kappa(pair));
        let pearson = keep("pearson", pearson_corr(pair));
        let ac1 = keep("gwet_ac1", gwet_ac1(pair, false));
        let ac1_canonical = keep("gwet_ac1_canonical", gwet_ac1(pair, true));
        let categories: BTreeSet<ActionClass> = pair.items.iter().flat_map(|&(a, b)| [a, b]).collect();
        AgreementReport {
            n: pair.n(),
            categories: categories.into_iter().collect(),
            observed_agreement,
            cohen_kappa,
            kappa_band: cohen_kappa.map(interpret_kappa),
            pearson,
            gwet_ac1: ac1,
            gwet_ac1_canonical: ac1_canonical,
            notes,
        }
    }
}
