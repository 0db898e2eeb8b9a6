pub mod admm;
pub mod ccp;
pub mod error;
pub mod estimator;
pub mod formulation;
pub mod linalg;
pub mod model;
pub mod pccp;
pub mod qcqp;
pub mod report;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/ccp.md")]
    mod ccp {}
    #[doc = include_str!("../../../book/src/pccp.md")]
    mod pccp {}
}
