//! The trainable heads: BIO token classifiers for EMD and ED, the GCN pair
//! classifier for ARP, and the event-property classifiers with their three
//! span strategies.

pub mod arp;
pub mod backbone;
pub mod property;
pub mod spans;
pub mod token_head;
pub mod trainer;

pub use arp::{enumerate_pairs, ArpHead};
pub use backbone::Backbone;
pub use property::{property_instances, PropertyHead, PropertyInstance, PropertyKind};
pub use spans::{extract_span_subtree, extract_span_window, SpanStrategy};
pub use token_head::{TokenClassifierHead, TokenTask};
pub use trainer::{
    train_property_head, train_stage, train_token_head, ArpExample, StageData, StageHeads, Task,
    TrainConfig, TrainCurve, TrainError,
};
