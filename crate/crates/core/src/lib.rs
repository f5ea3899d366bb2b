pub mod cp_lift;
pub mod error;
pub mod io;
pub mod linnet;
pub mod random;
pub mod rank_sdp;
pub mod relax;
pub mod report;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::DenseMatrix;
