//! Prototype pool: per-class, capacity-bounded stores of LHL vectors filled
//! by reservoir sampling, queried by cosine k-nearest-neighbour vote.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::LabelSpace;
use crate::error::{dim_err, Error, Result};
use crate::gradcore::{cosine_similarity, norm, NORM_EPS};
use crate::synthdocs::KeyClass;

pub const DEFAULT_CAPACITY: usize = 50;
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub vector: Vec<f64>,
    pub class: KeyClass,
    /// Phase in which the vector was harvested (0 = base).
    pub epoch_tag: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSlot {
    pub class: KeyClass,
    /// Candidates offered to this class's reservoir in the current phase.
    pub seen: u64,
    pub prototypes: Vec<Prototype>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPool")]
pub struct PrototypePool {
    dim: usize,
    capacity_per_class: usize,
    phase: u32,
    slots: Vec<ClassSlot>,
}

#[derive(Deserialize)]
struct RawPool {
    dim: usize,
    capacity_per_class: usize,
    phase: u32,
    slots: Vec<ClassSlot>,
}

impl TryFrom<RawPool> for PrototypePool {
    type Error = Error;

    fn try_from(raw: RawPool) -> Result<Self> {
        let pool = PrototypePool {
            dim: raw.dim,
            capacity_per_class: raw.capacity_per_class,
            phase: raw.phase,
            slots: raw.slots,
        };
        pool.validate()?;
        Ok(pool)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub class: KeyClass,
    pub similarity: f64,
}

impl PrototypePool {
    /// Empty pool with one slot per class of `space`, in label-space order.
    pub fn new(space: &LabelSpace, dim: usize, capacity_per_class: usize) -> Result<Self> {
        if dim == 0 {
            return dim_err("prototype dimension must be at least 1");
        }
        if capacity_per_class == 0 {
            return Err(Error::Config(
                "capacity_per_class must be at least 1".into(),
            ));
        }
        Ok(Self {
            dim,
            capacity_per_class,
            phase: 0,
            slots: space
                .classes()
                .iter()
                .map(|&class| ClassSlot {
                    class,
                    seen: 0,
                    prototypes: Vec::new(),
                })
                .collect(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.capacity_per_class == 0 {
            return Err(Error::Config(
                "pool dim and capacity must be at least 1".into(),
            ));
        }
        for (i, s) in self.slots.iter().enumerate() {
            if self.slots[..i].iter().any(|o| o.class == s.class) {
                return Err(Error::Label(format!("{} has two pool slots", s.class)));
            }
            if s.prototypes.len() > self.capacity_per_class {
                return Err(Error::Config(format!("{} exceeds pool capacity", s.class)));
            }
            for p in &s.prototypes {
                if p.class != s.class {
                    return Err(Error::Label(format!(
                        "{} prototype in {} slot",
                        p.class, s.class
                    )));
                }
                if p.vector.len() != self.dim {
                    return dim_err(format!(
                        "prototype of length {} in pool of dim {}",
                        p.vector.len(),
                        self.dim
                    ));
                }
                let n = norm(&p.vector);
                if !n.is_finite() || n <= NORM_EPS {
                    return Err(Error::DegenerateVector {
                        norm: n,
                        eps: NORM_EPS,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity_per_class(&self) -> usize {
        self.capacity_per_class
    }

    /// Tag given to prototypes harvested from now on.
    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn slots(&self) -> &[ClassSlot] {
        &self.slots
    }

    pub fn classes(&self) -> impl Iterator<Item = KeyClass> + '_ {
        self.slots.iter().map(|s| s.class)
    }

    /// Total number of stored prototypes.
    pub fn len(&self) -> usize {
        self.slots.iter().map(|s| s.prototypes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slot(&self, class: KeyClass) -> Result<&ClassSlot> {
        self.slots
            .iter()
            .find(|s| s.class == class)
            .ok_or_else(|| Error::Label(format!("{class} is not in the pool")))
    }

    fn slot_mut(&mut self, class: KeyClass) -> Result<&mut ClassSlot> {
        self.slots
            .iter_mut()
            .find(|s| s.class == class)
            .ok_or_else(|| Error::Label(format!("{class} is not in the pool")))
    }

    /// Stored vectors of `class`, oldest slot first.
    pub fn class_prototypes(&self, class: KeyClass) -> Result<Vec<&[f64]>> {
        Ok(self
            .slot(class)?
            .prototypes
            .iter()
            .map(|p| p.vector.as_slice())
            .collect())
    }

    /// Offers `h` to the reservoir of `class`. The caller is responsible for
    /// only offering correctly classified tokens.
    pub fn harvest<R: Rng + ?Sized>(
        &mut self,
        class: KeyClass,
        h: &[f64],
        rng: &mut R,
    ) -> Result<()> {
        if h.len() != self.dim {
            return dim_err(format!(
                "vector of length {} for pool of dim {}",
                h.len(),
                self.dim
            ));
        }
        let n = norm(h);
        if !n.is_finite() || n <= NORM_EPS {
            return Err(Error::DegenerateVector {
                norm: n,
                eps: NORM_EPS,
            });
        }
        let capacity = self.capacity_per_class;
        let tag = self.phase;
        let slot = self.slot_mut(class)?;
        let proto = Prototype {
            vector: h.to_vec(),
            class,
            epoch_tag: tag,
        };
        let seen = slot.seen;
        if (seen as usize) < capacity {
            slot.prototypes.push(proto);
        } else {
            let j = rng.gen_range(0..=seen);
            if (j as usize) < capacity {
                slot.prototypes[j as usize] = proto;
            }
        }
        slot.seen += 1;
        Ok(())
    }

    /// Pool for the next phase: key-class prototypes are kept bit-for-bit,
    /// `OTHER` is emptied when `drop_other`, and every reservoir counter is
    /// reset.
    pub fn carry_forward(&self, drop_other: bool) -> Self {
        let mut next = self.clone();
        for s in &mut next.slots {
            s.seen = 0;
            if drop_other && s.class.is_other() {
                s.prototypes.clear();
            }
        }
        next
    }

    /// Re-lays the slots out in `space` order, adding empty slots for classes
    /// the pool has not seen and advancing the phase tag.
    pub fn extend_to(&self, space: &LabelSpace) -> Result<Self> {
        if let Some(k) = self.classes().find(|k| !space.contains(*k)) {
            return Err(Error::Label(format!(
                "{k} is missing from the new label space"
            )));
        }
        let slots = space
            .classes()
            .iter()
            .map(|&class| {
                self.slots
                    .iter()
                    .find(|s| s.class == class)
                    .cloned()
                    .unwrap_or(ClassSlot {
                        class,
                        seen: 0,
                        prototypes: Vec::new(),
                    })
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            capacity_per_class: self.capacity_per_class,
            phase: self.phase + 1,
            slots,
        })
    }

    /// Removes every prototype of `class`.
    pub fn clear_class(&mut self, class: KeyClass) -> Result<()> {
        let slot = self.slot_mut(class)?;
        slot.prototypes.clear();
        slot.seen = 0;
        Ok(())
    }

    /// Cosine k-NN vote over every stored prototype.
    ///
    /// Neighbours are ranked by similarity (ties broken by slot order, then
    /// insertion order). The label is the majority class among the top
    /// `min(k, len)`; a tie in votes goes to the higher mean similarity, and a
    /// remaining tie to the class listed first.
    pub fn knn_classify(&self, h: &[f64], cfg: KnnConfig) -> Result<(KeyClass, Vec<Neighbor>)> {
        if cfg.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let total = self.len();
        if total == 0 {
            return Err(Error::EmptyPool("no prototypes to search".into()));
        }
        if h.len() != self.dim {
            return dim_err(format!(
                "query of length {} for pool of dim {}",
                h.len(),
                self.dim
            ));
        }
        let k = cfg.k.min(total);
        // (similarity, slot index), kept sorted best-first.
        let mut top: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (si, slot) in self.slots.iter().enumerate() {
            for p in &slot.prototypes {
                let s = cosine_similarity(h, &p.vector)?;
                if top.len() == k && s <= top[k - 1].0 {
                    continue;
                }
                let pos = top.partition_point(|&(t, _)| t >= s);
                top.insert(pos, (s, si));
                top.truncate(k);
            }
        }

        let mut votes = vec![(0usize, 0.0f64); self.slots.len()];
        for &(s, si) in &top {
            votes[si].0 += 1;
            votes[si].1 += s;
        }
        let mut best = usize::MAX;
        for (si, &(count, sum)) in votes.iter().enumerate() {
            if count == 0 {
                continue;
            }
            if best == usize::MAX {
                best = si;
                continue;
            }
            let (bc, bs) = votes[best];
            let mean = sum / count as f64;
            let best_mean = bs / bc as f64;
            if count > bc || (count == bc && mean > best_mean) {
                best = si;
            }
        }
        let report = top
            .iter()
            .map(|&(similarity, si)| Neighbor {
                class: self.slots[si].class,
                similarity,
            })
            .collect();
        Ok((self.slots[best].class, report))
    }
}
