pub mod connection;
pub mod cyclo;
pub mod lie;
pub mod linalg;
pub mod moebius;
pub mod monodromy;
pub mod presentation;
pub mod scalar;
