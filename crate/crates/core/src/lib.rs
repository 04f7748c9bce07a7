//! Few-shot class-incremental token classification for form documents.
//!
//! A small hashed-embedding encoder produces a last-hidden-layer vector per
//! token. Correctly classified vectors harvested after training become class
//! prototypes; tokens are labelled by cosine k-nearest-neighbour vote over the
//! pool. New classes are added from a handful of documents while a cosine
//! retention term keeps old-class tokens close to their stored prototypes.

pub mod diagnostics;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod gradcore;
pub mod json;
pub mod losses;
pub mod protopool;
pub mod synthdocs;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Execution;
pub use synthdocs::{Document, KeyClass};
