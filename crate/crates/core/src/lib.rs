//! Graph-directed similarity systems, multizippers and transversality scans
//! for self-similar Jordan arcs.

pub mod catalog;
pub mod digraph;
pub mod gdifs;
pub mod geometry;
pub mod multizipper;
pub mod specfile;
pub mod transversality;
