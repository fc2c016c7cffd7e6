pub mod bt;
pub mod dmp;
pub mod opt;
pub mod stats;
pub mod sim;
pub mod stl;
pub mod task;
