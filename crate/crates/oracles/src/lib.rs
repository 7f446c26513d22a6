//! Reference implementations written for clarity rather than speed, plus
//! seeded generators of random instances. The test suites compare the
//! production code against these.

pub mod coco;
pub mod edt;
pub mod gen;
pub mod otsu;
pub mod pairing;
