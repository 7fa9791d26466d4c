//! Synthetic task families and tabular lookup-table benchmarks.

pub mod branin;
pub mod family;
pub mod hartmann;
pub mod tabular;

pub use branin::{branin_eval, sample_branin_task, BraninTask, BRANIN_LOWER, BRANIN_UPPER};
pub use family::{
    generate_meta_data, true_maximum, true_maximum_with_seed, Family, MetaDataSpec, SyntheticTask,
};
pub use hartmann::{hartmann_eval, sample_hartmann_task, HartmannTask};
pub use tabular::{load_tabular, subsample_meta_tabular, write_tabular, TabularColumn, TabularTask};
