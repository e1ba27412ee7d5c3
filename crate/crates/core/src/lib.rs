pub mod cache;
pub mod eisenmod;
pub mod error;
pub mod exactnum;
pub mod fgl;
pub mod gammap;
pub mod modforms;
pub mod qseries;
pub mod report;
pub mod suite;
pub mod ulimits;
pub mod weierstrass;

pub use error::{Error, Result};
