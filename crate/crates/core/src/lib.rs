pub mod analytics;
pub mod coherence;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod model;
pub mod optics;
pub mod phonons;

pub use error::{Error, Result};
pub use model::{ChainState, FractionalConfig, SystemParams};
