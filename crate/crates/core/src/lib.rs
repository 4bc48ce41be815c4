//! Finitely presented groups, derivation traces and embedding constructions.

pub mod embed_bs;
pub mod embed_hvm;
pub mod measure;
pub mod presentations;
pub mod schema;
pub mod smachine;
pub mod verbal;
pub mod words;
