//! Synthetic purchase-order documents with word-level key-class labels.

mod generator;
mod io;
mod lexicon;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generator::{generate_corpus, generate_corpus_with, GenConfig};
pub use io::{read_corpus, read_corpus_from, write_corpus, write_corpus_to};

/// Key classes of the purchase-order task plus the catch-all `OTHER`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KeyClass {
    PoNumber,
    PoAmount,
    CustomerName,
    Country,
    Currency,
    BillToAddress,
    BillToCustomerName,
    ShipToAddress,
    ShipToCustomerName,
    LogoCustomerName,
    Other,
}

impl KeyClass {
    /// The ten key classes in canonical order, `OTHER` excluded.
    pub const KEYS: [KeyClass; 10] = [
        KeyClass::PoNumber,
        KeyClass::PoAmount,
        KeyClass::CustomerName,
        KeyClass::Country,
        KeyClass::Currency,
        KeyClass::BillToAddress,
        KeyClass::BillToCustomerName,
        KeyClass::ShipToAddress,
        KeyClass::ShipToCustomerName,
        KeyClass::LogoCustomerName,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KeyClass::PoNumber => "PO_NUMBER",
            KeyClass::PoAmount => "PO_AMOUNT",
            KeyClass::CustomerName => "CUSTOMER_NAME",
            KeyClass::Country => "COUNTRY",
            KeyClass::Currency => "CURRENCY",
            KeyClass::BillToAddress => "BILL_TO_ADDRESS",
            KeyClass::BillToCustomerName => "BILL_TO_CUSTOMER_NAME",
            KeyClass::ShipToAddress => "SHIP_TO_ADDRESS",
            KeyClass::ShipToCustomerName => "SHIP_TO_CUSTOMER_NAME",
            KeyClass::LogoCustomerName => "LOGO_CUSTOMER_NAME",
            KeyClass::Other => "OTHER",
        }
    }

    pub fn is_other(self) -> bool {
        self == KeyClass::Other
    }
}

impl fmt::Display for KeyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KeyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KeyClass::KEYS
            .iter()
            .chain(std::iter::once(&KeyClass::Other))
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| Error::Label(format!("unknown key class {s:?}")))
    }
}

/// Parses a comma-separated class list such as `PO_NUMBER,COUNTRY`.
pub fn parse_class_list(s: &str) -> Result<Vec<KeyClass>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(KeyClass::from_str)
        .collect()
}

/// Axis-aligned box `(x0, y0, x1, y1)` in page units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn is_valid_within(&self, width: f64, height: f64) -> bool {
        [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x0 < self.x1
            && self.y0 < self.y1
            && self.x0 >= 0.0
            && self.y0 >= 0.0
            && self.x1 <= width
            && self.y1 <= height
    }
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// A labeled span of text as an annotator would draw it.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldAnnotation {
    pub text: String,
    pub bbox: BBox,
    pub label: KeyClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub bbox: BBox,
    pub label: KeyClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub template_id: u32,
    pub page_width: f64,
    pub page_height: f64,
    pub tokens: Vec<Token>,
}

impl Document {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Annotation(format!("document {}: {msg}", self.id)));
        if !(self.page_width > 0.0 && self.page_height > 0.0) {
            return bad("page dimensions must be positive".into());
        }
        if self.tokens.is_empty() {
            return bad("no tokens".into());
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.text.is_empty() || t.text.chars().any(char::is_whitespace) {
                return bad(format!("token {i} text {:?} is not a single word", t.text));
            }
            if !t.bbox.is_valid_within(self.page_width, self.page_height) {
                return bad(format!("token {i} bbox {:?} invalid", t.bbox));
            }
        }
        if !self
            .tokens
            .windows(2)
            .all(|w| reading_order_key(&w[0]) <= reading_order_key(&w[1]))
        {
            return bad("tokens are not in reading order".into());
        }
        Ok(())
    }
}

fn reading_order_key(t: &Token) -> (f64, f64) {
    (t.bbox.y0, t.bbox.x0)
}

/// Sorts tokens top-to-bottom then left-to-right (stable).
pub fn sort_reading_order(tokens: &mut [Token]) {
    tokens.sort_by(|a, b| {
        reading_order_key(a)
            .partial_cmp(&reading_order_key(b))
            .expect("finite coordinates")
    });
}

/// Splits a field annotation into one token per whitespace-separated word.
///
/// The field box is divided horizontally in proportion to character counts,
/// with one character-width gap between consecutive words.
pub fn split_field_to_words(field: &FieldAnnotation) -> Result<Vec<Token>> {
    let words: Vec<&str> = field.text.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::Annotation("field text is empty".into()));
    }
    let b = field.bbox;
    if !(b.x0 < b.x1 && b.y0 < b.y1) {
        return Err(Error::Annotation(format!("degenerate field bbox {b:?}")));
    }
    let chars: Vec<usize> = words.iter().map(|w| w.chars().count()).collect();
    let units = chars.iter().sum::<usize>() + words.len() - 1;
    let unit = (b.x1 - b.x0) / units as f64;
    let mut offset = 0usize;
    let last = words.len() - 1;
    Ok(words
        .iter()
        .zip(&chars)
        .enumerate()
        .map(|(i, (w, &n))| {
            let x0 = b.x0 + unit * offset as f64;
            let x1 = if i == last {
                b.x1
            } else {
                b.x0 + unit * (offset + n) as f64
            };
            offset += n + 1;
            Token {
                text: (*w).to_string(),
                bbox: BBox::new(x0, b.y0, x1, b.y1),
                label: field.label,
            }
        })
        .collect())
}

/// Replaces every label outside `keep` with `OTHER`.
pub fn relabel_to_other(docs: &[Document], keep: &[KeyClass]) -> Result<Vec<Document>> {
    if keep.contains(&KeyClass::Other) {
        return Err(Error::Label("OTHER is always kept; do not list it".into()));
    }
    let keep: BTreeSet<KeyClass> = keep.iter().copied().collect();
    Ok(docs
        .iter()
        .map(|d| {
            let mut d = d.clone();
            for t in &mut d.tokens {
                if !keep.contains(&t.label) {
                    t.label = KeyClass::Other;
                }
            }
            d
        })
        .collect())
}

/// Shuffles `docs` with `seed` and takes `floor(n·train)` then `floor(n·test)`
/// documents.
pub fn split_corpus(
    docs: &[Document],
    fractions: (f64, f64),
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    let (train, test) = fractions;
    if docs.is_empty() {
        return Err(Error::Config("cannot split an empty corpus".into()));
    }
    if !(train > 0.0 && test > 0.0 && train + test <= 1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "split fractions ({train}, {test}) must be positive and sum to at most 1"
        )));
    }
    let n = docs.len();
    // the epsilon keeps products like 742·(600/742) from flooring to 599
    let count = |f: f64| ((n as f64 * f + 1e-9).floor() as usize).min(n);
    let n_train = count(train);
    let n_test = count(test).min(n - n_train);
    if n_train == 0 || n_test == 0 {
        log::warn!("split of {n} documents yields {n_train} train / {n_test} test");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_test]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(text: &str, bbox: (f64, f64, f64, f64), label: KeyClass) -> FieldAnnotation {
        FieldAnnotation {
            text: text.into(),
            bbox: BBox::new(bbox.0, bbox.1, bbox.2, bbox.3),
            label,
        }
    }

    fn toy_doc(labels: &[KeyClass]) -> Document {
        let tokens = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Token {
                text: format!("w{i}"),
                bbox: BBox::new(10.0 * i as f64, 0.0, 10.0 * i as f64 + 8.0, 10.0),
                label,
            })
            .collect();
        Document {
            id: "toy".into(),
            template_id: 0,
            page_width: 612.0,
            page_height: 792.0,
            tokens,
        }
    }

    #[test]
    fn class_names_round_trip() {
        for k in KeyClass::KEYS.iter().chain([KeyClass::Other].iter()) {
            assert_eq!(k.name().parse::<KeyClass>().unwrap(), *k);
            assert_eq!(
                serde_json::to_string(k).unwrap(),
                format!("\"{}\"", k.name())
            );
        }
        assert!("PO_DATE".parse::<KeyClass>().is_err());
    }

    #[test]
    fn split_two_words() {
        let toks = split_field_to_words(&field(
            "Acme Corp",
            (0.0, 0.0, 90.0, 10.0),
            KeyClass::CustomerName,
        ))
        .unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].bbox, BBox::new(0.0, 0.0, 40.0, 10.0));
        assert_eq!(toks[1].bbox, BBox::new(50.0, 0.0, 90.0, 10.0));
        assert!(toks.iter().all(|t| t.label == KeyClass::CustomerName));
    }

    #[test]
    fn split_single_word_keeps_bbox() {
        let f = field("12345", (3.0, 4.0, 50.0, 14.0), KeyClass::PoNumber);
        let toks = split_field_to_words(&f).unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].bbox, f.bbox);
    }

    #[test]
    fn split_normalizes_whitespace() {
        let toks =
            split_field_to_words(&field("A  B", (0.0, 0.0, 30.0, 10.0), KeyClass::Other)).unwrap();
        let texts: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["A", "B"]);
        assert!(matches!(
            split_field_to_words(&field("   ", (0.0, 0.0, 30.0, 10.0), KeyClass::Other)),
            Err(Error::Annotation(_))
        ));
    }

    #[test]
    fn relabel_examples() {
        use KeyClass::*;
        let doc = toy_doc(&[
            PoNumber,
            Country,
            PoNumber,
            Currency,
            Other,
            PoNumber,
            ShipToAddress,
            Other,
        ]);
        let all = relabel_to_other(std::slice::from_ref(&doc), &KeyClass::KEYS).unwrap();
        assert_eq!(all[0], doc);

        let none = relabel_to_other(std::slice::from_ref(&doc), &[]).unwrap();
        assert!(none[0].tokens.iter().all(|t| t.label == Other));

        let po = relabel_to_other(std::slice::from_ref(&doc), &[PoNumber]).unwrap();
        let n_po = po[0].tokens.iter().filter(|t| t.label == PoNumber).count();
        let n_other = po[0].tokens.iter().filter(|t| t.label == Other).count();
        assert_eq!((n_po, n_other), (3, 5));

        assert!(matches!(
            relabel_to_other(&[doc], &[Other]),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn split_corpus_examples() {
        let docs: Vec<Document> = (0..10)
            .map(|i| Document {
                id: format!("d{i}"),
                ..toy_doc(&[KeyClass::Other])
            })
            .collect();
        let (tr, te) = split_corpus(&docs, (0.8, 0.2), 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let ids: BTreeSet<_> = tr.iter().chain(&te).map(|d| d.id.clone()).collect();
        assert_eq!(ids.len(), 10);
        let again = split_corpus(&docs, (0.8, 0.2), 1).unwrap();
        assert_eq!((tr, te), again);

        let (tr, te) = split_corpus(&docs[..1], (0.5, 0.5), 1).unwrap();
        assert_eq!((tr.len(), te.len()), (0, 0));

        assert!(matches!(
            split_corpus(&[], (0.5, 0.5), 1),
            Err(Error::Config(_))
        ));
        assert!(split_corpus(&docs, (0.8, 0.3), 1).is_err());
    }

    #[test]
    fn split_corpus_exact_proportions() {
        let docs: Vec<Document> = (0..742)
            .map(|i| Document {
                id: format!("d{i}"),
                ..toy_doc(&[KeyClass::Other])
            })
            .collect();
        let (tr, te) = split_corpus(&docs, (600.0 / 742.0, 142.0 / 742.0), 9).unwrap();
        assert_eq!((tr.len(), te.len()), (600, 142));
    }

    proptest! {
        #[test]
        fn split_reassembles_text(
            words in proptest::collection::vec("[A-Za-z0-9.,#-]{1,9}", 1..7),
            x0 in 0.0f64..100.0,
            width in 1.0f64..300.0,
        ) {
            let text = words.join("  ");
            let f = field(&text, (x0, 5.0, x0 + width, 15.0), KeyClass::ShipToAddress);
            let toks = split_field_to_words(&f).unwrap();
            let joined: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
            prop_assert_eq!(joined.join(" "), words.join(" "));
            prop_assert_eq!(toks[0].bbox.x0, f.bbox.x0);
            prop_assert_eq!(toks.last().unwrap().bbox.x1, f.bbox.x1);
            for t in &toks {
                prop_assert!(t.bbox.x0 < t.bbox.x1);
                prop_assert!(t.bbox.x0 >= f.bbox.x0 && t.bbox.x1 <= f.bbox.x1);
            }
        }

        #[test]
        fn relabel_is_idempotent(mask in proptest::collection::vec(any::<bool>(), 10), labels in proptest::collection::vec(0usize..11, 1..30)) {
            let keep: Vec<KeyClass> = KeyClass::KEYS.iter().zip(&mask).filter(|(_, m)| **m).map(|(k, _)| *k).collect();
            let all: Vec<KeyClass> = KeyClass::KEYS.iter().copied().chain([KeyClass::Other]).collect();
            let doc = toy_doc(&labels.iter().map(|&i| all[i]).collect::<Vec<_>>());
            let once = relabel_to_other(std::slice::from_ref(&doc), &keep).unwrap();
            let twice = relabel_to_other(&once, &keep).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once[0].tokens.len(), doc.tokens.len());
        }
    }
}
