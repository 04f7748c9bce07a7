//! Templated purchase-order generator.
//!
//! A template fixes where every field, key phrase and table sits on the page;
//! documents drawn from a template vary only in field values, which fields
//! are present, and how many line items the table holds.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lexicon::{self, pick, BOILERPLATE, ITEM_WORDS};
use super::{sort_reading_order, split_field_to_words, BBox, Document, FieldAnnotation, KeyClass};
use crate::error::{Error, Result};
use crate::exec::Execution;

const PAGE_W: f64 = 612.0;
const PAGE_H: f64 = 792.0;
const MARGIN: f64 = 36.0;
const LINE: f64 = 14.0;
const CHAR_W: f64 = 6.0;
const TEXT_H: f64 = 10.0;
const LOGO_CHAR_W: f64 = 11.0;
const LOGO_H: f64 = 20.0;
const FOOTER_Y: f64 = 700.0;
const FIELD_PRESENCE: f64 = 0.9;
const MIN_CLASSES_PER_DOC: usize = 4;

const TEMPLATE_STREAM: u64 = u64::MAX;
const LEXICON_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub n_templates: usize,
    pub n_docs: usize,
    pub seed: u64,
    /// Target fraction of tokens labeled `OTHER`.
    pub distractor_rate: f64,
    pub value_vocab: BTreeMap<KeyClass, usize>,
}

impl Default for GenConfig {
    fn default() -> Self {
        let value_vocab = KeyClass::KEYS
            .iter()
            .map(|&k| {
                let n = match k {
                    KeyClass::Currency | KeyClass::Country => 20,
                    KeyClass::PoNumber | KeyClass::PoAmount => 400,
                    _ => 150,
                };
                (k, n)
            })
            .collect();
        Self {
            n_templates: 12,
            n_docs: 600,
            seed: 7,
            distractor_rate: 0.6,
            value_vocab,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_templates == 0 {
            return Err(Error::Config("n_templates must be at least 1".into()));
        }
        if self.n_docs == 0 {
            return Err(Error::Config("n_docs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.distractor_rate) {
            return Err(Error::Config(format!(
                "distractor_rate {} outside [0, 1)",
                self.distractor_rate
            )));
        }
        if let Some((k, _)) = self.value_vocab.iter().find(|(_, &n)| n == 0) {
            return Err(Error::Config(format!("value vocabulary for {k} is empty")));
        }
        Ok(())
    }
}

pub fn generate_corpus(cfg: &GenConfig) -> Result<Vec<Document>> {
    generate_corpus_with(cfg, Execution::default())
}

/// Generates `cfg.n_docs` documents. Each document draws from its own RNG
/// stream keyed by its index, so the result does not depend on `exec`.
pub fn generate_corpus_with(cfg: &GenConfig, exec: Execution) -> Result<Vec<Document>> {
    cfg.validate()?;
    let world = World::build(cfg);
    exec.map_range(cfg.n_docs, |i| world.document(i))
        .into_iter()
        .collect()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct World {
    seed: u64,
    distractor_rate: f64,
    templates: Vec<Template>,
    vocab: BTreeMap<KeyClass, Vec<String>>,
}

#[derive(Clone, Copy, Debug)]
enum ValuePlacement {
    Inline,
    Below,
}

#[derive(Clone, Debug)]
enum RowKind {
    Key(KeyClass),
    Date,
    Vendor,
}

#[derive(Clone, Debug)]
struct HeaderRow {
    kind: RowKind,
    phrase: &'static str,
    y: f64,
}

#[derive(Clone, Debug)]
struct AddressBlock {
    name_class: KeyClass,
    addr_class: KeyClass,
    phrase: &'static str,
    x: f64,
    y: f64,
}

#[derive(Clone, Debug)]
struct Template {
    id: u32,
    included: Vec<KeyClass>,
    logo: Option<(f64, f64)>,
    title: (f64, f64),
    header_x: f64,
    placement: ValuePlacement,
    rows: Vec<HeaderRow>,
    blocks: Vec<AddressBlock>,
    table_y: f64,
    max_items: usize,
    total_phrase: &'static str,
    total_x: f64,
    total_y: f64,
}

impl Template {
    fn build(id: u32, rng: &mut ChaCha8Rng) -> Self {
        let mut keys = KeyClass::KEYS.to_vec();
        keys.shuffle(rng);
        let n_drop = match rng.gen_range(0..10) {
            0..=4 => 0,
            5..=7 => 1,
            _ => 2,
        };
        let dropped = &keys[..n_drop];
        let included: Vec<KeyClass> = KeyClass::KEYS
            .iter()
            .copied()
            .filter(|k| !dropped.contains(k))
            .collect();
        let has = |k: KeyClass| included.contains(&k);

        let logo_x = [MARGIN, 220.0, 380.0][rng.gen_range(0..3)];
        let logo = has(KeyClass::LogoCustomerName).then_some((logo_x, 24.0));
        let title_x = if logo_x < 200.0 { 400.0 } else { MARGIN };
        let title = (title_x, 56.0);

        let header_x = if rng.gen_bool(0.5) { MARGIN } else { 330.0 };
        let placement = if rng.gen_bool(0.6) {
            ValuePlacement::Inline
        } else {
            ValuePlacement::Below
        };
        let pitch = match placement {
            ValuePlacement::Inline => LINE,
            ValuePlacement::Below => 2.0 * LINE,
        };
        let mut kinds: Vec<RowKind> = [
            KeyClass::PoNumber,
            KeyClass::CustomerName,
            KeyClass::Country,
            KeyClass::Currency,
        ]
        .into_iter()
        .filter(|&k| has(k))
        .map(RowKind::Key)
        .collect();
        kinds.push(RowKind::Date);
        if rng.gen_bool(0.5) {
            kinds.push(RowKind::Vendor);
        }
        kinds.shuffle(rng);
        let header_y = [88.0, 100.0, 112.0][rng.gen_range(0..3)];
        let rows: Vec<HeaderRow> = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| {
                let phrase = match &kind {
                    RowKind::Key(k) => pick(lexicon::key_phrases(*k), rng),
                    RowKind::Date => pick(&["Date:", "Order Date:", "PO Date:"], rng),
                    RowKind::Vendor => pick(&["Vendor No:", "Supplier ID:", "Vendor:"], rng),
                };
                HeaderRow {
                    kind,
                    phrase,
                    y: header_y + pitch * i as f64,
                }
            })
            .collect();

        let blocks_y = header_y + pitch * rows.len() as f64 + 2.0 * LINE;
        let mut blocks = Vec::new();
        let bill = has(KeyClass::BillToCustomerName) || has(KeyClass::BillToAddress);
        let ship = has(KeyClass::ShipToCustomerName) || has(KeyClass::ShipToAddress);
        let side_by_side = rng.gen_bool(0.5);
        let bill_first = rng.gen_bool(0.5);
        let block_h = 5.0 * LINE;
        let mut slots = [
            (MARGIN, blocks_y),
            if side_by_side {
                (330.0, blocks_y)
            } else {
                (MARGIN, blocks_y + block_h)
            },
        ];
        if !bill_first {
            slots.swap(0, 1);
        }
        if bill {
            blocks.push(AddressBlock {
                name_class: KeyClass::BillToCustomerName,
                addr_class: KeyClass::BillToAddress,
                phrase: pick(lexicon::key_phrases(KeyClass::BillToAddress), rng),
                x: slots[0].0,
                y: slots[0].1,
            });
        }
        if ship {
            blocks.push(AddressBlock {
                name_class: KeyClass::ShipToCustomerName,
                addr_class: KeyClass::ShipToAddress,
                phrase: pick(lexicon::key_phrases(KeyClass::ShipToAddress), rng),
                x: slots[1].0,
                y: slots[1].1,
            });
        }
        let blocks_end = if side_by_side {
            blocks_y + block_h
        } else {
            blocks_y + 2.0 * block_h
        };
        let table_y = blocks_end + LINE;
        let totals_rows = 3.0;
        let max_items = (((FOOTER_Y - 2.0 * LINE - table_y) / LINE - totals_rows - 2.0).floor()
            as usize)
            .max(1);
        let total_y = table_y + LINE * (max_items as f64 + 2.0) + 2.0 * LINE;
        Self {
            id,
            included,
            logo,
            title,
            header_x,
            placement,
            rows,
            blocks,
            table_y,
            max_items,
            total_phrase: pick(lexicon::key_phrases(KeyClass::PoAmount), rng),
            total_x: [300.0, 360.0][rng.gen_range(0..2)],
            total_y,
        }
    }
}

/// Accumulates field annotations for one page.
struct Page {
    fields: Vec<FieldAnnotation>,
}

impl Page {
    fn put(&mut self, text: &str, x: f64, y: f64, label: KeyClass) -> f64 {
        self.put_sized(text, x, y, label, CHAR_W, TEXT_H)
    }

    /// Places `text` with its left edge at `x`; returns the right edge.
    fn put_sized(&mut self, text: &str, x: f64, y: f64, label: KeyClass, cw: f64, h: f64) -> f64 {
        let natural = text.chars().count() as f64 * cw;
        let x1 = (x + natural).min(PAGE_W - 10.0);
        self.fields.push(FieldAnnotation {
            text: text.to_string(),
            bbox: BBox::new(x, y, x1, y + h),
            label,
        });
        x1
    }
}

impl World {
    fn build(cfg: &GenConfig) -> Self {
        let mut trng = stream_rng(cfg.seed, TEMPLATE_STREAM);
        let templates = (0..cfg.n_templates)
            .map(|i| Template::build(i as u32, &mut trng))
            .collect();
        let mut lrng = stream_rng(cfg.seed, LEXICON_STREAM);
        let vocab = KeyClass::KEYS
            .iter()
            .map(|&k| {
                let n = cfg.value_vocab.get(&k).copied().unwrap_or(100);
                (k, lexicon::build_vocab(k, n, &mut lrng))
            })
            .collect();
        Self {
            seed: cfg.seed,
            distractor_rate: cfg.distractor_rate,
            templates,
            vocab,
        }
    }

    fn value(&self, class: KeyClass, rng: &mut ChaCha8Rng) -> &str {
        let v = &self.vocab[&class];
        &v[rng.gen_range(0..v.len())]
    }

    fn document(&self, index: usize) -> Result<Document> {
        let mut rng = stream_rng(self.seed, index as u64);
        let tpl = &self.templates[rng.gen_range(0..self.templates.len())];

        let mut present: Vec<KeyClass> = tpl
            .included
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(FIELD_PRESENCE))
            .collect();
        if present.len() < MIN_CLASSES_PER_DOC {
            let mut missing: Vec<KeyClass> = tpl
                .included
                .iter()
                .copied()
                .filter(|k| !present.contains(k))
                .collect();
            missing.shuffle(&mut rng);
            present.extend(
                missing
                    .into_iter()
                    .take(MIN_CLASSES_PER_DOC - present.len()),
            );
        }
        let on = |k: KeyClass| present.contains(&k);

        let mut page = Page { fields: Vec::new() };
        if let Some((x, y)) = tpl.logo.filter(|_| on(KeyClass::LogoCustomerName)) {
            let name = self.value(KeyClass::LogoCustomerName, &mut rng).to_string();
            page.put_sized(&name, x, y, KeyClass::LogoCustomerName, LOGO_CHAR_W, LOGO_H);
        }
        page.put("PURCHASE ORDER", tpl.title.0, tpl.title.1, KeyClass::Other);

        for row in &tpl.rows {
            let (label, value) = match &row.kind {
                RowKind::Key(k) if on(*k) => (*k, self.value(*k, &mut rng).to_string()),
                RowKind::Key(_) => continue,
                RowKind::Date => (
                    KeyClass::Other,
                    format!(
                        "{}-{:02}-{:02}",
                        rng.gen_range(2018..2025),
                        rng.gen_range(1..13),
                        rng.gen_range(1..29)
                    ),
                ),
                RowKind::Vendor => (
                    KeyClass::Other,
                    format!("V-{}", rng.gen_range(1000..99_999)),
                ),
            };
            let x_end = page.put(row.phrase, tpl.header_x, row.y, KeyClass::Other);
            match tpl.placement {
                ValuePlacement::Inline => page.put(&value, x_end + 2.0 * CHAR_W, row.y, label),
                ValuePlacement::Below => page.put(&value, tpl.header_x, row.y + LINE, label),
            };
        }

        for b in &tpl.blocks {
            let name_on = on(b.name_class);
            let addr_on = on(b.addr_class);
            if !name_on && !addr_on {
                continue;
            }
            page.put(b.phrase, b.x, b.y, KeyClass::Other);
            let mut y = b.y + LINE;
            if name_on {
                let name = self.value(b.name_class, &mut rng).to_string();
                page.put(&name, b.x, y, b.name_class);
                y += LINE;
            }
            if addr_on {
                let addr = self.value(b.addr_class, &mut rng).to_string();
                for line in addr.lines() {
                    page.put(line, b.x, y, b.addr_class);
                    y += LINE;
                }
            }
        }

        // Line items fill the table until the OTHER share reaches the target.
        let words_in = |fields: &[FieldAnnotation], other: bool| -> usize {
            fields
                .iter()
                .filter(|f| f.label.is_other() == other)
                .map(|f| f.text.split_whitespace().count())
                .sum()
        };
        page.put("Description", MARGIN, tpl.table_y, KeyClass::Other);
        page.put("Qty", 300.0, tpl.table_y, KeyClass::Other);
        page.put("Unit Price", 360.0, tpl.table_y, KeyClass::Other);
        page.put("Amount", 470.0, tpl.table_y, KeyClass::Other);
        let key_words = words_in(&page.fields, false) as f64;
        let other_words = words_in(&page.fields, true) as f64 + 8.0;
        let rate = self.distractor_rate;
        let wanted = (rate / (1.0 - rate) * key_words - other_words).max(0.0);
        let jitter: i64 = rng.gen_range(-1..=1);
        let n_items =
            ((wanted / 5.0).ceil() as i64 + jitter).clamp(1, tpl.max_items as i64) as usize;
        let mut subtotal = 0.0;
        for i in 0..n_items {
            let y = tpl.table_y + LINE * (i as f64 + 1.0);
            let desc = format!(
                "{} {}",
                pick(ITEM_WORDS, &mut rng),
                pick(ITEM_WORDS, &mut rng)
            );
            let qty: u32 = rng.gen_range(1..50);
            let unit: f64 = rng.gen_range(100..50_000) as f64 / 100.0;
            subtotal += unit * qty as f64;
            page.put(&desc, MARGIN, y, KeyClass::Other);
            page.put(&qty.to_string(), 300.0, y, KeyClass::Other);
            page.put(&format!("{unit:.2}"), 360.0, y, KeyClass::Other);
            page.put(
                &format!("{:.2}", unit * qty as f64),
                470.0,
                y,
                KeyClass::Other,
            );
        }
        let sub_y = tpl.total_y - 2.0 * LINE;
        page.put("Subtotal", tpl.total_x, sub_y, KeyClass::Other);
        page.put(&format!("{subtotal:.2}"), 470.0, sub_y, KeyClass::Other);
        page.put("Tax", tpl.total_x, sub_y + LINE, KeyClass::Other);
        page.put(
            &format!("{:.2}", subtotal * 0.08),
            470.0,
            sub_y + LINE,
            KeyClass::Other,
        );
        if on(KeyClass::PoAmount) {
            page.put(tpl.total_phrase, tpl.total_x, tpl.total_y, KeyClass::Other);
            let amount = self.value(KeyClass::PoAmount, &mut rng).to_string();
            page.put(&amount, 470.0, tpl.total_y, KeyClass::PoAmount);
        }
        for i in 0..rng.gen_range(1..=3) {
            let text = pick(BOILERPLATE, &mut rng);
            page.put(text, MARGIN, FOOTER_Y + LINE * i as f64, KeyClass::Other);
        }

        let mut tokens = Vec::new();
        for f in &page.fields {
            tokens.extend(split_field_to_words(f)?);
        }
        sort_reading_order(&mut tokens);
        let doc = Document {
            id: format!("po-{}-{index:06}", self.seed),
            template_id: tpl.id,
            page_width: PAGE_W,
            page_height: PAGE_H,
            tokens,
        };
        doc.validate()?;
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn cfg(n_docs: usize) -> GenConfig {
        GenConfig {
            n_docs,
            ..GenConfig::default()
        }
    }

    #[test]
    fn deterministic_and_counted() {
        let a = generate_corpus(&cfg(60)).unwrap();
        let b = generate_corpus(&cfg(60)).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_corpus(&cfg(1)).unwrap().len(), 1);
        let other_seed = generate_corpus(&GenConfig { seed: 8, ..cfg(60) }).unwrap();
        assert_ne!(a, other_seed);
    }

    #[test]
    fn sequential_equals_parallel() {
        let c = cfg(80);
        assert_eq!(
            generate_corpus_with(&c, Execution::Sequential).unwrap(),
            generate_corpus_with(&c, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn documents_are_valid_and_rich() {
        for doc in generate_corpus(&cfg(200)).unwrap() {
            doc.validate().unwrap();
            let classes: BTreeSet<KeyClass> = doc
                .tokens
                .iter()
                .map(|t| t.label)
                .filter(|k| !k.is_other())
                .collect();
            assert!(
                classes.len() >= MIN_CLASSES_PER_DOC,
                "{}: {classes:?}",
                doc.id
            );
            assert!(doc.tokens.iter().any(|t| t.label.is_other()));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(GenConfig {
            n_templates: 0,
            ..cfg(5)
        }
        .validate()
        .is_err());
        assert!(GenConfig {
            distractor_rate: 1.0,
            ..cfg(5)
        }
        .validate()
        .is_err());
        assert!(matches!(
            generate_corpus(&GenConfig {
                n_docs: 0,
                ..cfg(5)
            }),
            Err(Error::Config(_))
        ));
    }
}
