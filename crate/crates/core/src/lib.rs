pub mod bounds;
pub mod lfmodels;
pub mod linalg;
pub mod quadrature;
pub mod sampling;
pub mod special;
pub mod support;
