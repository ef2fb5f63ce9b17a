//! Dense arrays, a reverse-mode autodiff tape, neural layers and Adam.

pub mod array;
pub mod checkpoint;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod params;
pub mod tape;

pub use array::{Array, Shape};
pub use checkpoint::Checkpoint;
pub use nn::{
    conv2d_forward, dense_forward, gru_cell_forward, max_pool_rows, self_attention_forward,
    sequence_forward, sparse_ce_loss, Activation, Attention, Conv2d, Dense, GruCell, LstmCell,
    Recurrent,
};
pub use optim::AdamState;
pub use params::{Bound, Param, ParamSet};
pub use tape::{Tape, Var};
