//! Domain and spectrum types.
//!
//! A [`Spectrum`] is a flat, nondecreasing list of buckling eigenvalues with
//! multiplicities expanded. Per-mode results from the cap solver are merged
//! into one with [`merge_modes`].

use std::path::Path;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("sphere dimension n = {0} must be at least 2")]
    InvalidDimension(usize),
    #[error("cap aperture theta0 = {0} must lie in (0, pi)")]
    InvalidAperture(f64),
    #[error("spectrum is empty")]
    Empty,
    #[error("eigenvalues are not nondecreasing at index {index}: {prev} > {next}")]
    Unsorted { index: usize, prev: f64, next: f64 },
    #[error("eigenvalue {value} at index {index} is not strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("eigenvalue {value} at index {index} is not above n - 2 = {floor}")]
    SingularTerm {
        index: usize,
        value: f64,
        floor: f64,
    },
    #[error("only {available} eigenvalues available after multiplicity expansion, {requested} requested")]
    InsufficientModes { available: usize, requested: usize },
    #[error("spectrum file: {0}")]
    Io(String),
    #[error("spectrum file: {0}")]
    Format(String),
}

/// A geodesic cap `{theta <= theta0}` on the unit sphere `S^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapDomain {
    n: usize,
    theta0: f64,
}

impl CapDomain {
    pub fn new(n: usize, theta0: f64) -> Result<Self, SpectrumError> {
        if n < 2 {
            return Err(SpectrumError::InvalidDimension(n));
        }
        if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
            return Err(SpectrumError::InvalidAperture(theta0));
        }
        Ok(Self { n, theta0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }
}

/// Outcome of a successful validation. Failures are [`SpectrumError`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    /// `Lambda_1 < n`. True spectra never set this; hypothetical ones may.
    pub below_lemma_bound: bool,
}

/// Checks ordering, positivity and the `Lambda > n - 2` requirement of the
/// bound formulas.
pub fn validate_spectrum(n: usize, values: &[f64]) -> Result<Validation, SpectrumError> {
    if n < 2 {
        return Err(SpectrumError::InvalidDimension(n));
    }
    let first = *values.first().ok_or(SpectrumError::Empty)?;
    for (index, pair) in values.windows(2).enumerate() {
        // NaN fails this comparison and is reported as unsorted
        if !(pair[0] <= pair[1]) {
            return Err(SpectrumError::Unsorted {
                index: index + 1,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    let floor = n as f64 - 2.0;
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0) {
            return Err(SpectrumError::NonPositive { index, value });
        }
        if value <= floor {
            return Err(SpectrumError::SingularTerm {
                index,
                value,
                floor,
            });
        }
    }
    Ok(Validation {
        below_lemma_bound: first < n as f64,
    })
}

/// Ordered buckling eigenvalues `Lambda_1 <= Lambda_2 <= ...` on a domain in `S^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    n: usize,
    values: Vec<f64>,
    domain: Option<CapDomain>,
    meta: Map<String, Value>,
    validation: Validation,
}

impl Spectrum {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, SpectrumError> {
        let validation = validate_spectrum(n, &values)?;
        Ok(Self {
            n,
            values,
            domain: None,
            meta: Map::new(),
            validation,
        })
    }

    pub fn with_domain(mut self, domain: CapDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_meta(mut self, meta: Map<String, Value>) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn domain(&self) -> Option<&CapDomain> {
        self.domain.as_ref()
    }

    pub fn meta(&self) -> &Map<String, Value> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut Map<String, Value> {
        &mut self.meta
    }

    /// `Lambda_1 < n` (warning only).
    pub fn below_lemma_bound(&self) -> bool {
        self.validation.below_lemma_bound
    }

    /// The first `k` eigenvalues as a new spectrum.
    pub fn truncated(&self, k: usize) -> Result<Spectrum, SpectrumError> {
        if k == 0 {
            return Err(SpectrumError::Empty);
        }
        if k > self.values.len() {
            return Err(SpectrumError::InsufficientModes {
                available: self.values.len(),
                requested: k,
            });
        }
        let mut s = Spectrum::new(self.n, self.values[..k].to_vec())?;
        s.domain = self.domain;
        s.meta = self.meta.clone();
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String, SpectrumError> {
        let file = SpectrumFileOut {
            n: self.n,
            domain: self.domain.map(|d| DomainSpec::Cap { theta0: d.theta0 }),
            eigenvalues: &self.values,
            meta: &self.meta,
        };
        serde_json::to_string_pretty(&file).map_err(|e| SpectrumError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, SpectrumError> {
        let file: SpectrumFileIn =
            serde_json::from_str(text).map_err(|e| SpectrumError::Format(e.to_string()))?;
        let mut s = Spectrum::new(file.n, file.eigenvalues)?;
        s.domain = match file.domain {
            Some(DomainSpec::Cap { theta0 }) => Some(CapDomain::new(file.n, theta0)?),
            None => None,
        };
        s.meta = file.meta;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, SpectrumError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SpectrumError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), SpectrumError> {
        std::fs::write(path, self.to_json()? + "\n")
            .map_err(|e| SpectrumError::Io(format!("{}: {e}", path.display())))
    }

    /// `index,eigenvalue` rows, 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, sig17(*v)));
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum DomainSpec {
    Cap { theta0: f64 },
}

#[derive(Serialize)]
struct SpectrumFileOut<'a> {
    n: usize,
    domain: Option<DomainSpec>,
    #[serde(serialize_with = "serialize_sig17")]
    eigenvalues: &'a [f64],
    meta: &'a Map<String, Value>,
}

#[derive(Deserialize)]
struct SpectrumFileIn {
    n: usize,
    #[serde(default)]
    domain: Option<DomainSpec>,
    eigenvalues: Vec<f64>,
    #[serde(default)]
    meta: Map<String, Value>,
}

/// Seventeen significant digits in scientific notation.
pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

fn serialize_sig17<S: Serializer>(values: &&[f64], ser: S) -> Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(values.len()))?;
    for &v in values.iter() {
        if !v.is_finite() {
            return Err(serde::ser::Error::custom(format!(
                "non-finite eigenvalue {v}"
            )));
        }
        let raw = RawValue::from_string(sig17(v)).map_err(serde::ser::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

/// Dimension of the space of degree-`m` spherical harmonics on `S^{n-1}`.
///
/// For `n = 2` this is the circle, where every `m >= 1` has multiplicity 2.
pub fn harmonic_multiplicity(n: usize, m: usize) -> usize {
    assert!(n >= 2, "sphere dimension must be at least 2");
    if m == 0 {
        return 1;
    }
    let d = n - 1;
    let upper = binomial(m + d, d);
    let lower = if m >= 2 { binomial(m + d - 2, d) } else { 0 };
    (upper - lower) as usize
}

fn binomial(a: usize, b: usize) -> u128 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        acc = acc * (a - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Provenance of one expanded spectrum entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeLabel {
    pub value: f64,
    /// Azimuthal index.
    pub m: usize,
    /// Position within the mode's own eigenvalue list, 0-based.
    pub index: usize,
}

/// Expands each mode's eigenvalues by multiplicity and returns the `k`
/// smallest with their labels, sorted ascending.
pub fn merge_labelled(
    mode_lists: &[(usize, Vec<f64>)],
    n: usize,
    k: usize,
) -> Result<Vec<ModeLabel>, SpectrumError> {
    if n < 2 {
        return Err(SpectrumError::InvalidDimension(n));
    }
    let mut expanded = Vec::new();
    for (m, values) in mode_lists {
        for (index, pair) in values.windows(2).enumerate() {
            if !(pair[0] <= pair[1]) {
                return Err(SpectrumError::Unsorted {
                    index: index + 1,
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        let mult = harmonic_multiplicity(n, *m);
        for (index, &value) in values.iter().enumerate() {
            for _ in 0..mult {
                expanded.push(ModeLabel {
                    value,
                    m: *m,
                    index,
                });
            }
        }
    }
    if expanded.len() < k {
        return Err(SpectrumError::InsufficientModes {
            available: expanded.len(),
            requested: k,
        });
    }
    // total order on (value, m, index) keeps the result independent of input order
    expanded.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.m.cmp(&b.m))
            .then(a.index.cmp(&b.index))
    });
    expanded.truncate(k);
    Ok(expanded)
}

/// Merges per-mode eigenvalue lists into the `k` lowest eigenvalues of the
/// full problem, each repeated by its harmonic multiplicity.
pub fn merge_modes(
    mode_lists: &[(usize, Vec<f64>)],
    n: usize,
    k: usize,
) -> Result<Spectrum, SpectrumError> {
    let labelled = merge_labelled(mode_lists, n, k)?;
    Spectrum::new(n, labelled.into_iter().map(|l| l.value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_examples() {
        let v = validate_spectrum(2, &[2.0, 6.0]).unwrap();
        assert!(!v.below_lemma_bound);
        assert!(matches!(
            validate_spectrum(3, &[3.0, 1.0]),
            Err(SpectrumError::Unsorted { .. })
        ));
        assert!(matches!(
            validate_spectrum(3, &[0.5]),
            Err(SpectrumError::SingularTerm { .. })
        ));
        assert!(matches!(
            validate_spectrum(2, &[0.0, 1.0]),
            Err(SpectrumError::NonPositive { .. })
        ));
        assert_eq!(validate_spectrum(2, &[]), Err(SpectrumError::Empty));
        assert!(matches!(
            validate_spectrum(2, &[f64::NAN]),
            Err(SpectrumError::NonPositive { .. })
        ));
    }

    #[test]
    fn below_lemma_is_a_warning() {
        let s = Spectrum::new(3, vec![2.0, 4.0]).unwrap();
        assert!(s.below_lemma_bound());
        let s = Spectrum::new(3, vec![3.0, 4.0]).unwrap();
        assert!(!s.below_lemma_bound());
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(harmonic_multiplicity(2, 0), 1);
        assert_eq!(harmonic_multiplicity(3, 2), 5);
        assert_eq!(harmonic_multiplicity(4, 1), 4);
        for m in 1..50 {
            assert_eq!(harmonic_multiplicity(2, m), 2);
            assert_eq!(harmonic_multiplicity(3, m), 2 * m + 1);
            assert_eq!(harmonic_multiplicity(4, m), (m + 1) * (m + 1));
        }
    }

    #[test]
    fn merge_examples() {
        let lists = vec![(0, vec![10.0, 30.0]), (1, vec![12.0]), (2, vec![20.0])];
        let s = merge_modes(&lists, 2, 4).unwrap();
        assert_eq!(s.values(), &[10.0, 12.0, 12.0, 20.0]);

        let s = merge_modes(&[(0, vec![7.0]), (1, vec![9.0])], 3, 4).unwrap();
        assert_eq!(s.values(), &[7.0, 9.0, 9.0, 9.0]);

        assert!(matches!(
            merge_modes(&[(0, vec![10.0])], 2, 3),
            Err(SpectrumError::InsufficientModes {
                available: 1,
                requested: 3
            })
        ));
    }

    #[test]
    fn cap_domain_bounds() {
        assert!(CapDomain::new(2, 1.0).is_ok());
        assert!(CapDomain::new(1, 1.0).is_err());
        assert!(CapDomain::new(2, 0.0).is_err());
        assert!(CapDomain::new(2, std::f64::consts::PI).is_err());
        assert!(CapDomain::new(2, 4.0).is_err());
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = Spectrum::new(2, vec![0.1 + 0.2, 2.0])
            .unwrap()
            .with_domain(CapDomain::new(2, 1.0).unwrap());
        let text = s.to_json().unwrap();
        assert!(text.contains("2.0000000000000000e0"), "{text}");
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
        assert!(text.contains("\"type\": \"cap\""), "{text}");
        let back = Spectrum::from_json(&text).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.domain(), s.domain());
    }

    #[test]
    fn json_accepts_null_domain_and_missing_meta() {
        let s = Spectrum::from_json(r#"{"n": 2, "domain": null, "eigenvalues": [2]}"#).unwrap();
        assert_eq!(s.values(), &[2.0]);
        assert!(s.domain().is_none());
        assert!(Spectrum::from_json(r#"{"n": 2, "eigenvalues": [3, 2]}"#).is_err());
    }
}
