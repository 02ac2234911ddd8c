pub mod batch;
pub mod cmnist;
pub mod color;
pub mod dataset;
pub mod glyph;
pub mod idx;
pub mod schema;
pub mod split;
pub mod tabular;

pub use batch::{batches, batches_for};
pub use cmnist::{assign_colors, build_cmnist_split, cmnist_corpus, materialize, CmnistOptions, CmnistRecord, DigitSource, GlyphDigits, IdxDigits, Pool};
pub use color::{colorize, Palettes};
pub use dataset::{Dataset, Sample};
pub use idx::{parse_idx, write_idx_images, write_idx_labels, IdxData};
pub use schema::AttributeSchema;
pub use split::{carve_validation, validate_gcdr, GcdrSplit, Role, SplitEntry, ValidationReport, Violation};
pub use tabular::{build_grouped_split, generate_tabular, CausalEdge, TabularOptions};
