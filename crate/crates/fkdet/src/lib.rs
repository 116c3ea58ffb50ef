//! Fuglede-Kadison determinants of group-ring operators over amenable
//! groups, computed by Folner finite sections, with the derived invariants:
//! Mahler measures, entropy of principal algebraic actions, and L2-torsion.

pub mod cli;
pub mod fk;
pub mod groupring;
pub mod invariants;
pub mod groups;
pub mod parse;
pub mod section;
pub mod spectral;
