pub mod groups;
pub mod tre;
pub mod blindsig;
pub mod authority;
pub mod chain;
pub mod auction;
pub mod bench;
