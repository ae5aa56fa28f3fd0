//! Climate-dependent power-system test case synthesis and validation.

pub mod grid;
pub mod reduction;
pub mod climate;
pub mod profile;
pub mod renewable;
pub mod load;
pub mod rating;
pub mod scuc;
pub mod fixtures;
pub mod pipeline;
