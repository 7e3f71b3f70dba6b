//! Reference implementations and check routines shared by the test targets.
//! Each target uses a different subset.
#![allow(dead_code)]

pub mod gradient;
pub mod link;
pub mod reference;
