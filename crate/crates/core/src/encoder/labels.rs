use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdocs::KeyClass;

/// Ordered class set with `OTHER` last, split into base (already learned)
/// and new (being added in the current phase) classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabelSpace")]
pub struct LabelSpace {
    classes: Vec<KeyClass>,
    base_classes: Vec<KeyClass>,
    new_classes: Vec<KeyClass>,
}

#[derive(Deserialize)]
struct RawLabelSpace {
    classes: Vec<KeyClass>,
    base_classes: Vec<KeyClass>,
    new_classes: Vec<KeyClass>,
}

impl TryFrom<RawLabelSpace> for LabelSpace {
    type Error = Error;

    fn try_from(raw: RawLabelSpace) -> Result<Self> {
        let expected: Vec<KeyClass> = raw
            .base_classes
            .iter()
            .chain(&raw.new_classes)
            .copied()
            .chain([KeyClass::Other])
            .collect();
        if raw.classes != expected {
            return Err(Error::Label(format!(
                "label space classes {:?} do not equal base ++ new ++ OTHER",
                raw.classes
            )));
        }
        Self::check_unique(&raw.classes)?;
        Ok(Self {
            classes: raw.classes,
            base_classes: raw.base_classes,
            new_classes: raw.new_classes,
        })
    }
}

fn canonical(classes: &[KeyClass]) -> Vec<KeyClass> {
    KeyClass::KEYS
        .iter()
        .copied()
        .filter(|k| classes.contains(k))
        .collect()
}

impl LabelSpace {
    /// Label space for a base phase: `classes` (canonical order) then `OTHER`.
    pub fn base(classes: &[KeyClass]) -> Result<Self> {
        if classes.contains(&KeyClass::Other) {
            return Err(Error::Label("OTHER is implicit; do not list it".into()));
        }
        Self::check_unique(classes)?;
        let base_classes = canonical(classes);
        let mut all = base_classes.clone();
        all.push(KeyClass::Other);
        Ok(Self {
            classes: all,
            base_classes,
            new_classes: Vec::new(),
        })
    }

    /// Label space for an incremental phase: every current key class becomes
    /// a base class and `new` is appended before `OTHER`.
    pub fn extend(&self, new: &[KeyClass]) -> Result<Self> {
        if new.is_empty() {
            return Err(Error::Label("no new classes given".into()));
        }
        if new.contains(&KeyClass::Other) {
            return Err(Error::Label("OTHER cannot be added as a new class".into()));
        }
        Self::check_unique(new)?;
        if let Some(k) = new.iter().find(|k| self.contains(**k)) {
            return Err(Error::Label(format!("{k} is already in the label space")));
        }
        let base_classes = self.key_classes().to_vec();
        let new_classes = canonical(new);
        let classes = base_classes
            .iter()
            .chain(&new_classes)
            .copied()
            .chain([KeyClass::Other])
            .collect();
        Ok(Self {
            classes,
            base_classes,
            new_classes,
        })
    }

    fn check_unique(classes: &[KeyClass]) -> Result<()> {
        for (i, k) in classes.iter().enumerate() {
            if classes[..i].contains(k) {
                return Err(Error::Label(format!("{k} listed twice")));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> &[KeyClass] {
        &self.classes
    }

    /// Every class except `OTHER`.
    pub fn key_classes(&self) -> &[KeyClass] {
        &self.classes[..self.classes.len() - 1]
    }

    pub fn base_classes(&self) -> &[KeyClass] {
        &self.base_classes
    }

    pub fn new_classes(&self) -> &[KeyClass] {
        &self.new_classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: KeyClass) -> bool {
        self.classes.contains(&k)
    }

    pub fn index_of(&self, k: KeyClass) -> Option<usize> {
        self.classes.iter().position(|&c| c == k)
    }

    pub fn other_index(&self) -> usize {
        self.classes.len() - 1
    }
}
