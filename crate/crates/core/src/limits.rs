//! Upper bounds on the number of possible sentences.
//!
//! A vocabulary of `V` words admits `V + V^2 + ... + V^N` word sequences of
//! length at most `N`. Values are exact big integers; floating point is used
//! only for display mantissas.

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, Pow, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Advised maximum sentence length for readable text.
pub const READABLE_MAX_WORDS: u32 = 25;
/// Length from which readers understand only a small fraction of a sentence.
pub const COMPREHENSION_MAX_WORDS: u32 = 43;
pub const DEFAULT_SIGNIFICANT_DIGITS: usize = 5;

const BUILTIN_WORD_LISTS: &str = include_str!("../data/word_lists.toml");

/// `Σ_{n=1..N} V^n` by repeated multiplication.
pub fn ceiling_loop(vocabulary: u64, max_words: u32) -> BigUint {
    let v = BigUint::from(vocabulary);
    let mut power = BigUint::one();
    let mut sum = BigUint::zero();
    for _ in 0..max_words {
        power *= &v;
        sum += &power;
    }
    sum
}

/// `V·(V^N − 1)/(V − 1)`, or `N` when `V = 1`.
pub fn ceiling_closed_form(vocabulary: u64, max_words: u32) -> BigUint {
    if vocabulary == 1 {
        return BigUint::from(max_words);
    }
    let v = BigUint::from(vocabulary);
    let vn: BigUint = Pow::pow(&v, max_words);
    &v * (vn - 1u32) / (&v - 1u32)
}

/// A big integer with its decimal and engineering renderings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BigValue {
    /// Engineering mantissa in `[1, 1000)`, rounded to the significant digits.
    pub mantissa: f64,
    /// Multiple of 3.
    pub exponent: u64,
    pub decimal_string: String,
    pub digits: usize,
    pub rendering: String,
}

impl BigValue {
    pub fn new(value: &BigUint, significant_digits: usize) -> Self {
        let decimal_string = value.to_str_radix(10);
        let (mantissa, exponent) = engineering_parts(&decimal_string, significant_digits);
        let rendering = if decimal_string.len() <= significant_digits {
            decimal_string.clone()
        } else {
            format!("{mantissa}\u{d7}10^{exponent}")
        };
        BigValue {
            mantissa: mantissa.parse().unwrap_or(f64::NAN),
            exponent,
            digits: decimal_string.len(),
            decimal_string,
            rendering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CeilingResult {
    pub vocabulary_size: u64,
    pub max_words: u32,
    /// The full sum.
    #[serde(serialize_with = "serialize_big")]
    pub exact: BigUint,
    /// The largest term, `V^N`.
    #[serde(serialize_with = "serialize_big")]
    pub dominant: BigUint,
    pub significant_digits: usize,
}

fn serialize_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    BigValue::new(v, DEFAULT_SIGNIFICANT_DIGITS).serialize(s)
}

impl CeilingResult {
    pub fn exact_value(&self) -> BigValue {
        BigValue::new(&self.exact, self.significant_digits)
    }

    pub fn dominant_value(&self) -> BigValue {
        BigValue::new(&self.dominant, self.significant_digits)
    }
}

pub fn sentence_ceiling(vocabulary: u64, max_words: u32) -> Result<CeilingResult> {
    if vocabulary == 0 || max_words == 0 {
        return Err(Error::Domain(format!(
            "vocabulary size and word count must be at least 1 (got {vocabulary}, {max_words})"
        )));
    }
    Ok(CeilingResult {
        vocabulary_size: vocabulary,
        max_words,
        exact: ceiling_closed_form(vocabulary, max_words),
        dominant: Pow::pow(&BigUint::from(vocabulary), max_words),
        significant_digits: DEFAULT_SIGNIFICANT_DIGITS,
    })
}

/// Rounds a decimal digit string to `sig` significant digits, half to even.
/// Returns the kept digits and the power of ten of the leading digit.
fn round_digits(digits: &str, sig: usize) -> (String, usize) {
    let sig = sig.max(1);
    let exp10 = digits.len() - 1;
    if digits.len() <= sig {
        let mut kept = digits.to_string();
        kept.extend(std::iter::repeat('0').take(sig - digits.len()));
        return (kept, exp10);
    }
    let (head, tail) = digits.split_at(sig);
    let first = tail.as_bytes()[0];
    let rest_zero = tail[1..].bytes().all(|b| b == b'0');
    let last_odd = (head.as_bytes()[sig - 1] - b'0') % 2 == 1;
    let round_up = first > b'5' || (first == b'5' && (!rest_zero || last_odd));
    if !round_up {
        return (head.to_string(), exp10);
    }
    let mut bytes = head.as_bytes().to_vec();
    let mut i = bytes.len();
    loop {
        if i == 0 {
            bytes.insert(0, b'1');
            bytes.pop();
            return (String::from_utf8(bytes).expect("ascii"), exp10 + 1);
        }
        i -= 1;
        if bytes[i] == b'9' {
            bytes[i] = b'0';
        } else {
            bytes[i] += 1;
            break;
        }
    }
    (String::from_utf8(bytes).expect("ascii"), exp10)
}

fn engineering_parts(digits: &str, sig: usize) -> (String, u64) {
    if digits == "0" {
        return ("0".into(), 0);
    }
    let (kept, exp10) = round_digits(digits, sig);
    let exponent = exp10 - exp10 % 3;
    let int_len = exp10 - exponent + 1;
    let mut mantissa = if kept.len() >= int_len {
        kept[..int_len].to_string()
    } else {
        format!("{kept:0<int_len$}")
    };
    if kept.len() > int_len {
        mantissa.push('.');
        mantissa.push_str(&kept[int_len..]);
    }
    (mantissa, exponent as u64)
}

/// Engineering notation (`288.74×10^246`); values with no more digits than
/// requested print as plain integers.
pub fn format_scientific(exact: &BigUint, significant_digits: usize) -> String {
    BigValue::new(exact, significant_digits).rendering
}

/// Normal scientific notation with one leading digit (`2.8874×10^248`).
pub fn format_normal(exact: &BigUint, significant_digits: usize) -> String {
    let digits = exact.to_str_radix(10);
    if digits.len() <= significant_digits {
        return digits;
    }
    let (kept, exp10) = round_digits(&digits, significant_digits);
    let tail = if kept.len() > 1 { format!(".{}", &kept[1..]) } else { String::new() };
    format!("{}{tail}\u{d7}10^{exp10}", &kept[..1])
}

/// A published rendering such as `177.22e84`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub text: String,
    mantissa_digits: BigUint,
    decimals: u32,
    exponent: u32,
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("reference {s:?} is not of the form 12.34e56"));
        let (m, e) = s.split_once(['e', 'E']).ok_or_else(bad)?;
        let exponent: u32 = e.parse().map_err(|_| bad())?;
        let (int, frac) = m.split_once('.').unwrap_or((m, ""));
        let mantissa_digits = format!("{int}{frac}").parse().map_err(|_| bad())?;
        Ok(Reference {
            text: s.to_string(),
            mantissa_digits,
            decimals: frac.len() as u32,
            exponent,
        })
    }
}

impl Reference {
    /// Signed distance between `value` and the reference, in units of the
    /// reference's last printed digit after rounding `value` half to even at
    /// that digit.
    pub fn deviation(&self, value: &BigUint) -> i128 {
        let ten = BigUint::from(10u32);
        let scaled = value * Pow::pow(&ten, self.decimals);
        let unit: BigUint = Pow::pow(&ten, self.exponent);
        let q = &scaled / &unit;
        let r = &scaled % &unit;
        let twice = &r * 2u32;
        let rounded = if twice > unit || (twice == unit && (&q % 2u32) == BigUint::one()) {
            q + 1u32
        } else {
            q
        };
        let diff = |a: &BigUint, b: &BigUint| -> i128 {
            let d = if a >= b { a - b } else { b - a };
            let d: i128 = d.to_string().parse().unwrap_or(i128::MAX);
            if a >= b {
                d
            } else {
                -d
            }
        };
        diff(&rounded, &self.mantissa_digits)
    }

    pub fn matches(&self, value: &BigUint, tolerance_digits: i128) -> bool {
        self.deviation(value).abs() <= tolerance_digits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordList {
    pub name: String,
    pub total_words: u64,
    #[serde(default)]
    pub coverage_pct: Option<f64>,
    #[serde(default)]
    pub citation: String,
    /// Published ceiling renderings keyed by maximum sentence length.
    #[serde(default)]
    pub reference: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct WordListFile {
    list: Vec<WordList>,
}

pub fn parse_word_lists(text: &str) -> Result<Vec<WordList>> {
    let file: WordListFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for l in &file.list {
        if l.total_words == 0 {
            return Err(Error::Config(format!("word list {:?} has no words", l.name)));
        }
    }
    Ok(file.list)
}

pub fn load_word_lists(path: &Path) -> Result<Vec<WordList>> {
    parse_word_lists(&std::fs::read_to_string(path)?)
}

pub fn builtin_word_lists() -> Vec<WordList> {
    parse_word_lists(BUILTIN_WORD_LISTS).expect("embedded word lists parse")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CeilingRow {
    pub list: String,
    pub total_words: u64,
    pub coverage_pct: Option<f64>,
    pub ceiling: CeilingResult,
    pub reference: Option<String>,
    /// Whether the published rendering agrees with `V^N` to within one unit in
    /// its last digit. `None` when there is no reference.
    pub reference_consistent: Option<bool>,
}

/// One row per (word list, maximum length) pair.
pub fn ceiling_table(lists: &[WordList], lengths: &[u32]) -> Result<Vec<CeilingRow>> {
    let mut rows = Vec::new();
    for l in lists {
        for &n in lengths {
            let ceiling = sentence_ceiling(l.total_words, n)?;
            let reference = l.reference.get(&n.to_string()).cloned();
            let reference_consistent = match &reference {
                Some(r) => Some(r.parse::<Reference>()?.matches(&ceiling.dominant, 1)),
                None => None,
            };
            rows.push(CeilingRow {
                list: l.name.clone(),
                total_words: l.total_words,
                coverage_pct: l.coverage_pct,
                ceiling,
                reference,
                reference_consistent,
            });
        }
    }
    Ok(rows)
}

pub fn render_ceiling_table(rows: &[CeilingRow]) -> String {
    use std::fmt::Write as _;
    let mut out = format!(
        "{:<12} {:>8} {:>6} {:>7} {:>22} {:>22}  {}\n",
        "list", "words", "max", "digits", "sum", "V^N", "published"
    );
    for r in rows {
        let sum = r.ceiling.exact_value();
        let dom = r.ceiling.dominant_value();
        let published = match (&r.reference, r.reference_consistent) {
            (Some(p), Some(true)) => p.clone(),
            (Some(p), _) => format!("{p} (inconsistent)"),
            (None, _) => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>6} {:>7} {:>22} {:>22}  {}",
            r.list, r.total_words, r.ceiling.max_words, sum.digits, sum.rendering, dom.rendering, published
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trivial_values() {
        assert_eq!(sentence_ceiling(1, 5).unwrap().exact, BigUint::from(5u32));
        assert_eq!(sentence_ceiling(2, 3).unwrap().exact, BigUint::from(14u32));
        assert_eq!(format_scientific(&BigUint::from(14u32), 5), "14");
        assert_eq!(format_scientific(&BigUint::from(600000u32), 5), "600.00\u{d7}10^3");
        assert!(sentence_ceiling(0, 3).is_err());
        assert!(sentence_ceiling(3, 0).is_err());
    }

    #[test]
    fn rounding_half_even() {
        assert_eq!(round_digits("125", 2), ("12".into(), 2));
        assert_eq!(round_digits("135", 2), ("14".into(), 2));
        assert_eq!(round_digits("1251", 2), ("13".into(), 3));
        assert_eq!(round_digits("9996", 3), ("100".into(), 4));
        assert_eq!(format_scientific(&BigUint::from(999_950u32), 4), "1.000\u{d7}10^6");
        assert_eq!(format_scientific(&BigUint::from(12_345_678u32), 3), "12.3\u{d7}10^6");
        assert_eq!(format_scientific(&BigUint::from(123_456u32), 2), "120\u{d7}10^3");
        assert_eq!(format_normal(&BigUint::from(123_456u32), 3), "1.23\u{d7}10^5");
    }

    #[test]
    fn oxford_rendering() {
        let c = sentence_ceiling(600000, COMPREHENSION_MAX_WORDS).unwrap();
        assert_eq!(c.exact_value().rendering, "288.74\u{d7}10^246");
        assert_eq!(c.exact_value().digits, 249);
    }

    #[test]
    fn reference_deviation() {
        let r: Reference = "177.22e84".parse().unwrap();
        let c = sentence_ceiling(2818, 25).unwrap();
        assert_eq!(r.deviation(&c.dominant), 0);
        assert!(r.deviation(&c.exact) > 1);
        assert!("12.3".parse::<Reference>().is_err());
    }

    #[test]
    fn table_flags_inconsistent_cell() {
        let rows = ceiling_table(&builtin_word_lists(), &[READABLE_MAX_WORDS, COMPREHENSION_MAX_WORDS]).unwrap();
        let bsl43 = rows
            .iter()
            .find(|r| r.total_words == 4518 && r.ceiling.max_words == 43)
            .unwrap();
        assert_eq!(bsl43.reference_consistent, Some(false));
        assert!(bsl43.ceiling.dominant_value().rendering.starts_with("14.54"));
        assert!(render_ceiling_table(&rows).contains("inconsistent"));
        let flagged = rows.iter().filter(|r| r.reference_consistent == Some(false)).count();
        assert_eq!(flagged, 1);
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(sentence_ceiling(2, 3).unwrap()).unwrap();
        assert_eq!(v["exact"]["decimalString"], "14");
        assert_eq!(v["exact"]["mantissa"], 14.0);
        assert_eq!(v["dominant"]["decimalString"], "8");
    }

    proptest! {
        #[test]
        fn loop_equals_closed_form(v in 1u64..1_000_000, n in 1u32..60) {
            let exact = ceiling_loop(v, n);
            prop_assert_eq!(&exact, &ceiling_closed_form(v, n));
            if v > 1 {
                let dominant: BigUint = Pow::pow(&BigUint::from(v), n);
                // 1 < sum / V^N <= V / (V - 1)
                prop_assert!(exact >= dominant);
                prop_assert!(n == 1 || exact > dominant);
                prop_assert!(&exact * (v - 1) <= dominant * v);
            }
        }

        #[test]
        fn monotone(v in 2u64..5000, n in 1u32..30) {
            prop_assert!(ceiling_closed_form(v + 1, n) > ceiling_closed_form(v, n));
            prop_assert!(ceiling_closed_form(v, n + 1) > ceiling_closed_form(v, n));
        }

        #[test]
        fn rendering_approximates(v in 2u64..100_000, n in 1u32..20, sig in 1usize..8) {
            let exact = ceiling_closed_form(v, n);
            let b = BigValue::new(&exact, sig);
            prop_assert!(b.mantissa >= 1.0 && b.mantissa < 1000.0 || b.digits <= sig);
            prop_assert_eq!(b.exponent % 3, 0);
            let approx = b.mantissa * 10f64.powi(b.exponent as i32);
            let actual: f64 = exact.to_string().parse().unwrap();
            prop_assert!(((approx - actual) / actual).abs() <= 10f64.powi(1 - sig as i32));
        }
    }
}
