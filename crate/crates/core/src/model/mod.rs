//! Shared data model: label vocabularies, the BIO codec, and gold-structure
//! validation.

pub mod bio;
pub mod labels;

pub use bio::{decode_bio, encode_bio, is_well_formed, BioError, BioTag, BioTagVocab, TypedSpan};
pub use labels::{
    normalize_label, validate_event, EventProperties, EventRecord, Intensity, LabelVocab,
    Modality, Polarity, Violation, VocabError, NONE_ROLE,
};
