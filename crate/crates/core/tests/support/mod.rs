#![allow(dead_code)]

pub mod ltlf;
pub mod osa;
pub mod transport;
