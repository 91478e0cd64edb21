//! Bi-encoder word sense disambiguation toolkit.

pub mod corpus;
pub mod datasets;
pub mod encoder;
pub mod inference;
pub mod lexicon;
pub mod losses;
pub mod scoring;
pub mod synthetic;
pub mod text;
pub mod training;
