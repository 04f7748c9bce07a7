//! Word pools and per-class value vocabularies.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::KeyClass;

pub(super) const CURRENCIES: &[&str] = &[
    "USD", "EUR", "GBP", "JPY", "CHF", "CAD", "AUD", "INR", "CNY", "SEK", "NOK", "DKK", "MXN",
    "BRL", "ZAR", "SGD", "HKD", "NZD", "KRW", "PLN",
];

pub(super) const COUNTRIES: &[&str] = &[
    "United States",
    "Germany",
    "France",
    "Japan",
    "India",
    "Brazil",
    "Canada",
    "Mexico",
    "United Kingdom",
    "Italy",
    "Spain",
    "Netherlands",
    "Sweden",
    "Norway",
    "Denmark",
    "Poland",
    "South Africa",
    "Australia",
    "New Zealand",
    "Singapore",
    "China",
    "South Korea",
    "Switzerland",
    "Austria",
    "Belgium",
    "Ireland",
    "Portugal",
    "Finland",
    "Argentina",
    "Chile",
];

const NAME_HEADS: &[&str] = &[
    "Acme",
    "Globex",
    "Initech",
    "Umbrella",
    "Stark",
    "Wayne",
    "Wonka",
    "Hooli",
    "Vandelay",
    "Cyberdyne",
    "Soylent",
    "Tyrell",
    "Pinnacle",
    "Summit",
    "Apex",
    "Northwind",
    "Contoso",
    "Fabrikam",
    "Atlas",
    "Orion",
    "Vertex",
    "Nimbus",
    "Quantum",
    "Sterling",
    "Harbor",
    "Redwood",
    "Falcon",
    "Meridian",
    "Cobalt",
    "Keystone",
];

const NAME_MIDS: &[&str] = &[
    "Industrial",
    "Logistics",
    "Foods",
    "Systems",
    "Medical",
    "Energy",
    "Textiles",
    "Motors",
    "Chemicals",
    "Electronics",
    "Supply",
    "Trading",
    "Pharma",
    "Metals",
    "Packaging",
];

const NAME_TAILS: &[&str] = &[
    "Inc", "LLC", "Ltd", "Corp", "GmbH", "Co", "Group", "SA", "AG", "PLC",
];

const STREETS: &[&str] = &[
    "Oak", "Maple", "Pine", "Cedar", "Elm", "Main", "Park", "Lake", "Hill", "River", "Market",
    "Church", "Mill", "Harbor", "Station", "Bridge", "Spring", "Sunset", "Willow", "Chestnut",
];

const STREET_KINDS: &[&str] = &[
    "Street", "Avenue", "Road", "Blvd", "Lane", "Drive", "Way", "Court",
];

const CITIES: &[&str] = &[
    "Springfield",
    "Riverside",
    "Franklin",
    "Greenville",
    "Bristol",
    "Clinton",
    "Fairview",
    "Salem",
    "Madison",
    "Georgetown",
    "Arlington",
    "Ashland",
    "Dover",
    "Milton",
    "Newport",
    "Oxford",
    "Burlington",
    "Jackson",
    "Lexington",
    "Kingston",
];

const REGIONS: &[&str] = &[
    "CA", "NY", "TX", "IL", "WA", "MA", "OH", "GA", "NC", "MI", "ON", "BC",
];

pub(super) const ITEM_WORDS: &[&str] = &[
    "Steel", "Bolt", "Widget", "Cable", "Paper", "Toner", "Valve", "Pump", "Gasket", "Filter",
    "Bracket", "Sensor", "Motor", "Bearing", "Hose", "Panel", "Switch", "Relay", "Fuse", "Clamp",
    "Washer", "Spring", "Lamp", "Battery", "Adapter", "Module", "Frame", "Seal", "Nozzle", "Gear",
];

pub(super) const BOILERPLATE: &[&str] = &[
    "Terms: Net 30",
    "Payment due within thirty days",
    "Thank you for your business",
    "Authorized Signature",
    "Please reference this order on all invoices",
    "Goods remain property of seller until paid",
    "Page 1 of 1",
    "Delivery Terms: FOB Destination",
    "Questions? Contact purchasing department",
    "All prices exclusive of tax",
];

/// Finite value vocabulary for one class; values are space-separated words.
pub(super) fn build_vocab<R: Rng>(class: KeyClass, size: usize, rng: &mut R) -> Vec<String> {
    let size = size.max(1);
    match class {
        KeyClass::Currency => take_fixed(CURRENCIES, size, rng),
        KeyClass::Country => take_fixed(COUNTRIES, size, rng),
        _ => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::with_capacity(size);
            let mut attempts = 0;
            while out.len() < size && attempts < size * 50 {
                attempts += 1;
                let v = draw_value(class, rng);
                if seen.insert(v.clone()) {
                    out.push(v);
                }
            }
            out
        }
    }
}

fn take_fixed<R: Rng>(pool: &[&str], size: usize, rng: &mut R) -> Vec<String> {
    let mut v: Vec<String> = pool.iter().map(|s| s.to_string()).collect();
    v.shuffle(rng);
    v.truncate(size);
    v
}

fn draw_value<R: Rng>(class: KeyClass, rng: &mut R) -> String {
    match class {
        KeyClass::PoNumber => match rng.gen_range(0..3) {
            0 => format!("PO-{}", rng.gen_range(10_000..99_999)),
            1 => format!("4500{}", rng.gen_range(100_000..999_999)),
            _ => format!("PO{}", rng.gen_range(1_000_000..9_999_999)),
        },
        KeyClass::PoAmount => {
            let whole: u32 = rng.gen_range(100..99_999);
            let cents: u32 = rng.gen_range(0..100);
            let body = if whole >= 1000 {
                format!("{},{:03}.{cents:02}", whole / 1000, whole % 1000)
            } else {
                format!("{whole}.{cents:02}")
            };
            if rng.gen_bool(0.3) {
                format!("${body}")
            } else {
                body
            }
        }
        KeyClass::CustomerName
        | KeyClass::BillToCustomerName
        | KeyClass::ShipToCustomerName
        | KeyClass::LogoCustomerName => {
            let head = pick(NAME_HEADS, rng);
            let tail = pick(NAME_TAILS, rng);
            if rng.gen_bool(0.6) {
                format!("{head} {} {tail}", pick(NAME_MIDS, rng))
            } else {
                format!("{head} {tail}")
            }
        }
        KeyClass::BillToAddress | KeyClass::ShipToAddress => format!(
            "{} {} {}\n{} {} {:05}",
            rng.gen_range(1..9999),
            pick(STREETS, rng),
            pick(STREET_KINDS, rng),
            pick(CITIES, rng),
            pick(REGIONS, rng),
            rng.gen_range(1000..99_999),
        ),
        KeyClass::Currency => pick(CURRENCIES, rng).to_string(),
        KeyClass::Country => pick(COUNTRIES, rng).to_string(),
        KeyClass::Other => pick(ITEM_WORDS, rng).to_string(),
    }
}

pub(super) fn pick<'a, R: Rng>(pool: &'a [&'a str], rng: &mut R) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// Key-label phrase variants printed in front of (or above) a field value.
pub(super) fn key_phrases(class: KeyClass) -> &'static [&'static str] {
    match class {
        KeyClass::PoNumber => &[
            "PO Number:",
            "Purchase Order No.",
            "P.O. #",
            "Order Number:",
        ],
        KeyClass::PoAmount => &["Total:", "Total Amount:", "Grand Total", "Amount Due:"],
        KeyClass::CustomerName => &["Customer:", "Customer Name:", "Buyer:", "Client:"],
        KeyClass::Country => &["Country:", "Country of Origin:", "Ctry:"],
        KeyClass::Currency => &["Currency:", "Curr.", "Payment Currency:"],
        KeyClass::BillToCustomerName | KeyClass::BillToAddress => {
            &["Bill To:", "Invoice To:", "Billing Address:"]
        }
        KeyClass::ShipToCustomerName | KeyClass::ShipToAddress => {
            &["Ship To:", "Deliver To:", "Shipping Address:"]
        }
        KeyClass::LogoCustomerName | KeyClass::Other => &[],
    }
}
