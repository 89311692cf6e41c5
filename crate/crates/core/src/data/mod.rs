//! Embedding and lexicon ingestion, instance construction, splitting, and
//! synthetic taxonomies.

mod embeddings;
mod instances;
mod lexicon;
mod records;
mod split;
pub mod synthetic;
mod tokenize;

pub use embeddings::{oov_vector, Embeddings, LoadStats, OOV_SCALE};
pub use instances::{
    build_instances, load_instances, read_instances, term_tokens, write_instances, BuildOutput, BuildStats,
    Instance, InstanceKey, DEFAULT_NEGATIVE_RATIO,
};
pub use lexicon::{Lexicon, Sense, TermEntry};
pub use records::{load_relations, read_relations, write_relations, Relation, RelationRecord, DEFAULT_SENSE};
pub use split::{partition_vocabulary, split, Split, SplitMode, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticData};
pub use tokenize::{definition_tokens, tokenize, DEFAULT_MAX_DEFINITION_LEN};
