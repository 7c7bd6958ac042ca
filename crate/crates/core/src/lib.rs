//! Semi-supervised singing-voice separation.
//!
//! A single masking network `g(a) = a ⊙ m(a)` maps mixtures to their
//! instrumental part and acts as the identity on instrumentals. It is trained
//! from unmatched mixtures and instrumentals, plus synthetic crosses built from
//! its own vocal estimates, with L1 reconstruction and least-squares
//! adversarial losses.

pub mod autodiff;
pub mod bss;
pub mod data;
pub mod dsp;
pub mod models;
pub mod objective;
pub mod train;
pub mod real;
pub mod separate;
