//! Numerical core: tensors, FFTs, reverse-mode differentiation, Fourier and
//! recurrent layers, the FNO / F-RNN / C-RNN models, training, and the PDE
//! generators that produce their data.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod autodiff;
pub mod conv;
pub mod data;
pub mod error;
pub mod fft;
pub mod grid;
pub mod layers;
pub mod models;
pub mod pde;
pub mod spectral;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use grid::GridCoords;
pub use tensor::{FieldTensor, Tensor};
