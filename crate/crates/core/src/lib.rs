pub mod geom;
pub mod channel;
pub mod decomp;
pub mod sweeppath;
pub mod users;
pub mod avoid;
pub mod controllers;
pub mod engine;
