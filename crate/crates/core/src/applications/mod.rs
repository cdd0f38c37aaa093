//! Applications of average consensus in higher dimensions.

pub mod funccalc;
pub mod lse;
